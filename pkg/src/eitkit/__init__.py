"""Electrical impedance tomography reconstruction toolkit.

Forward modeling with the complete electrode model on triangular meshes,
elastic-net (l1 + l2) regularized Gauss-Newton inversion via operator
splitting, total-variation and single-norm baselines, and an experiment
harness with phantom studies and parameter sweeps.
"""

from .baselines import TVReconstruction, run_l1, run_l2
from .forward import (CEMForwardModel, ForwardSolution, ForwardSolveError,
                      MeasurementLayout, adjacent_current_patterns, measure)
from .inversion import (InversionError, SplitBregmanReconstruction,
                        SplitBregmanState, morozov_stop, shrinkage,
                        shrinkage_threshold)
from .mesh import (ElectrodeLayout, MeshError, MeshTransfer, TriMesh,
                   adjacency_difference_operator, build_transfer,
                   generate_disk_mesh, load_mesh, save_mesh)
from .metrics import relative_error
from .phantoms import (PHANTOMS, Inclusion, NoiseSpec, Phantom,
                       build_phantom, synthesize_data)
from .transforms import (HaarBasis, HaarTransform, IdentityBasis,
                         haar_forward, haar_inverse, inhomogeneity)

__all__ = [
    "CEMForwardModel", "ElectrodeLayout", "ForwardSolution",
    "ForwardSolveError", "HaarBasis", "HaarTransform", "IdentityBasis",
    "Inclusion", "InversionError", "MeasurementLayout", "MeshError",
    "MeshTransfer", "NoiseSpec", "PHANTOMS", "Phantom",
    "SplitBregmanReconstruction", "SplitBregmanState", "TVReconstruction",
    "TriMesh", "adjacency_difference_operator", "adjacent_current_patterns",
    "build_phantom", "build_transfer", "generate_disk_mesh", "haar_forward",
    "haar_inverse", "inhomogeneity", "load_mesh", "measure", "morozov_stop",
    "relative_error", "run_l1", "run_l2", "save_mesh", "shrinkage",
    "shrinkage_threshold", "synthesize_data",
]

__version__ = "0.1.0"
