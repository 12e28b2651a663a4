"""Complete electrode model forward solver on triangular meshes.

Linear (P1) nodal elements for the interior potential, piecewise-constant
per-element conductivity, Robin coupling to the electrodes through contact
impedances. The zero-sum electrode constraint is imposed by expressing the
electrode potentials in an (L-1)-dimensional basis, which makes the reduced
system positive definite and solvable by sparse Cholesky/LU.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu


class ForwardSolveError(RuntimeError):
    """Linear solver breakdown while solving the electrode model."""


def adjacent_current_patterns(n_electrodes):
    """Unit current injected between adjacent electrode pairs.

    Row d drives +1 on electrode d and -1 on electrode (d+1) mod L;
    every row sums to zero.
    """
    L = n_electrodes
    patterns = np.zeros((L, L))
    idx = np.arange(L)
    patterns[idx, idx] = 1.0
    patterns[idx, (idx + 1) % L] = -1.0
    return patterns


def check_current_patterns(patterns, n_electrodes):
    patterns = np.atleast_2d(np.asarray(patterns, dtype=float))
    if patterns.shape[1] != n_electrodes:
        raise ValueError("current pattern length does not match electrode count")
    if np.any(np.abs(patterns.sum(axis=1)) > 1e-12):
        raise ValueError("current patterns must each sum to zero")
    return patterns


@dataclass
class MeasurementLayout:
    """Which adjacent electrode-pair differences are recorded per drive.

    ``pairs[d]`` lists pair starts m; the measurement is U_m - U_{m+1}
    (indices mod L). The stacked vector orders drives first, then pairs.
    ``gain`` is the readout scale (choice of voltage unit); it multiplies
    measured values and Jacobian rows alike.
    """

    n_electrodes: int
    pairs: list
    gain: float = 1.0

    @classmethod
    def adjacent(cls, n_electrodes, include_driven=False, gain=1.0):
        """Adjacent measurements for the adjacent drive protocol.

        With ``include_driven=False`` (default) the pairs touching either
        driven electrode are dropped: L-3 values per drive.
        """
        L = n_electrodes
        pairs = []
        for d in range(L):
            driven = {d, (d + 1) % L}
            ms = [m for m in range(L)
                  if include_driven
                  or (m not in driven and (m + 1) % L not in driven)]
            pairs.append(np.array(ms, dtype=np.int64))
        return cls(L, pairs, gain)

    @property
    def n_measurements(self):
        return int(sum(len(p) for p in self.pairs))

    def apply(self, electrode_potentials):
        """Stack pair differences from per-drive electrode potentials.

        Parameters
        ----------
        electrode_potentials : ndarray, shape (L, n_drives)
        """
        U = electrode_potentials
        L = self.n_electrodes
        out = []
        for d, ms in enumerate(self.pairs):
            out.append(U[ms, d] - U[(ms + 1) % L, d])
        return self.gain * np.concatenate(out)

    def difference_patterns(self):
        """All L adjacent-pair patterns as rows (+1 at m, -1 at m+1)."""
        return adjacent_current_patterns(self.n_electrodes)

    def row_index(self):
        """(drive, pair) per stacked row, for bookkeeping and Jacobians."""
        rows = []
        for d, ms in enumerate(self.pairs):
            rows.extend((d, int(m)) for m in ms)
        return rows


@dataclass
class ForwardSolution:
    """Nodal and electrode potentials for a set of current patterns."""

    interior: np.ndarray   # (n_nodes, n_drives)
    electrode: np.ndarray  # (L, n_drives)


def measure(solution, layout):
    """Stacked measurement vector from a forward solution."""
    return layout.apply(solution.electrode)


class CEMForwardModel:
    """Forward operator F(sigma) and its Jacobian for one mesh and layout.

    Parameters
    ----------
    mesh : TriMesh
    layout : ElectrodeLayout
    patterns : ndarray, optional
        Current patterns, one row per drive. Defaults to unit adjacent
        injection.
    measurement : MeasurementLayout, optional
        Defaults to adjacent differences excluding driven electrodes.
    admissible_bound : float
        Conductivities must lie in [bound, 1/bound].
    """

    def __init__(self, mesh, layout, patterns=None, measurement=None,
                 admissible_bound=0.02):
        if layout.count != mesh.n_electrodes:
            raise ValueError("electrode layout does not match mesh")
        self.mesh = mesh
        self.layout = layout
        if patterns is None:
            patterns = adjacent_current_patterns(layout.count)
        self.patterns = check_current_patterns(patterns, layout.count)
        if measurement is None:
            measurement = MeasurementLayout.adjacent(layout.count)
        self.measurement = measurement
        self.admissible_bound = float(admissible_bound)
        self._init_geometry()
        self._init_electrodes()
        self._init_ground_basis()

    # -- precomputed geometry -------------------------------------------

    def _init_geometry(self):
        mesh = self.mesh
        p = mesh.nodes[mesh.elements]  # (M, 3, 2)
        x, y = p[..., 0], p[..., 1]
        # gradients of barycentric basis: grad_i = (b_i, c_i) / (2A)
        nxt = [1, 2, 0]
        prv = [2, 0, 1]
        self._b = y[:, nxt] - y[:, prv]
        self._c = x[:, prv] - x[:, nxt]
        self._areas = mesh.areas
        # unit-conductivity element stiffness (M, 3, 3)
        self._k_unit = (self._b[:, :, None] * self._b[:, None, :]
                        + self._c[:, :, None] * self._c[:, None, :]) \
            / (4.0 * self._areas[:, None, None])
        m = mesh.n_elements
        rows = np.repeat(mesh.elements, 3, axis=1).reshape(m, 9)
        cols = np.tile(mesh.elements, (1, 3)).reshape(m, 9)
        self._kij = (rows.ravel(), cols.ravel())

    def _init_electrodes(self):
        mesh, layout = self.mesh, self.layout
        n = mesh.n_nodes
        L = layout.count
        z = layout.contact_impedances
        mass = sparse.lil_matrix((n, n))
        coupling = np.zeros((n, L))
        lengths = np.zeros(L)
        for l, edge_idx in enumerate(mesh.electrode_edges):
            for a, b in mesh.boundary_edges[edge_idx]:
                h = float(np.hypot(*(mesh.nodes[b] - mesh.nodes[a])))
                w = h / (6.0 * z[l])
                mass[a, a] += 2 * w
                mass[b, b] += 2 * w
                mass[a, b] += w
                mass[b, a] += w
                coupling[a, l] -= h / (2.0 * z[l])
                coupling[b, l] -= h / (2.0 * z[l])
                lengths[l] += h
        self._boundary_mass = mass.tocsr()
        self._coupling = sparse.csr_matrix(coupling)
        self._electrode_diag = lengths / z
        self.electrode_lengths = lengths

    def _init_ground_basis(self):
        # U = N @ c with columns e_j - e_L: spans the zero-sum subspace
        L = self.layout.count
        N = np.zeros((L, L - 1))
        N[:L - 1, :] = np.eye(L - 1)
        N[L - 1, :] = -1.0
        self._ground = sparse.csr_matrix(N)

    # -- assembly and solves ---------------------------------------------

    def check_admissible(self, sigma):
        sigma = np.asarray(sigma, dtype=float)
        if sigma.shape != (self.mesh.n_elements,):
            raise ValueError("conductivity length does not match element count")
        lam = self.admissible_bound
        if np.any(sigma < lam) or np.any(sigma > 1.0 / lam):
            raise ValueError(
                f"conductivity outside admissible range [{lam}, {1 / lam}]")
        return sigma

    def stiffness(self, sigma):
        """Conductivity-weighted stiffness block (linear in sigma)."""
        vals = (self._k_unit * np.asarray(sigma)[:, None, None]).ravel()
        n = self.mesh.n_nodes
        return sparse.coo_matrix((vals, self._kij), shape=(n, n)).tocsr()

    def assemble(self, sigma):
        """Reduced symmetric positive definite system matrix."""
        sigma = self.check_admissible(sigma)
        n = self.mesh.n_nodes
        L = self.layout.count
        a_uu = self.stiffness(sigma) + self._boundary_mass
        a_uc = self._coupling @ self._ground
        a_cc = self._ground.T @ sparse.diags(self._electrode_diag) @ self._ground
        return sparse.bmat([[a_uu, a_uc], [a_uc.T, a_cc]], format="csc")

    def _rhs(self, patterns):
        n = self.mesh.n_nodes
        body = np.zeros((n, patterns.shape[0]))
        return np.vstack([body, self._ground.T @ patterns.T])

    def solve(self, sigma, patterns=None):
        """Solve the electrode model for every current pattern.

        Returns
        -------
        ForwardSolution
        """
        if patterns is None:
            patterns = self.patterns
        else:
            patterns = check_current_patterns(patterns, self.layout.count)
        system = self.assemble(sigma)
        try:
            lu = splu(system)
        except RuntimeError as err:
            raise ForwardSolveError(f"factorization failed: {err}") from err
        x = lu.solve(self._rhs(patterns))
        if not np.all(np.isfinite(x)):
            raise ForwardSolveError("non-finite forward solution")
        n = self.mesh.n_nodes
        return ForwardSolution(interior=x[:n],
                               electrode=self._ground @ x[n:])

    def voltages(self, sigma):
        """F(sigma): stacked measurement vector for the default patterns."""
        return measure(self.solve(sigma), self.measurement)

    # -- sensitivities ----------------------------------------------------

    def _element_gradients(self, interior):
        """Per-element solution gradients, shape (M, 2, n_solves)."""
        u = interior[self.mesh.elements]              # (M, 3, k)
        gx = np.einsum("mi,mik->mk", self._b, u)
        gy = np.einsum("mi,mik->mk", self._c, u)
        return gx / (2 * self._areas[:, None]), gy / (2 * self._areas[:, None])

    def jacobian(self, sigma):
        """Sensitivity of stacked measurements to element conductivities.

        Row (d, m), column e holds -integral over element e of
        grad(u_d) . grad(w_m), with w_m the solution driven by the
        measurement pair pattern. Shape (n_measurements, n_elements).
        """
        return self.solve_with_jacobian(sigma)[1]

    def solve_with_jacobian(self, sigma):
        """(F(sigma), F'(sigma)) sharing one factorization."""
        system = self.assemble(sigma)
        try:
            lu = splu(system)
        except RuntimeError as err:
            raise ForwardSolveError(f"factorization failed: {err}") from err
        n = self.mesh.n_nodes

        x_drive = lu.solve(self._rhs(self.patterns))
        sol = ForwardSolution(interior=x_drive[:n],
                              electrode=self._ground @ x_drive[n:])
        volt = measure(sol, self.measurement)

        meas_patterns = self.measurement.difference_patterns()
        x_meas = lu.solve(self._rhs(meas_patterns))
        gxd, gyd = self._element_gradients(x_drive[:n])
        gxm, gym = self._element_gradients(x_meas[:n])
        # sens[d, m, e] = -A_e * grad(u_d) . grad(w_m)
        sens = -(np.einsum("ed,em->dme", gxd, gxm)
                 + np.einsum("ed,em->dme", gyd, gym)) * self._areas
        rows = [sens[d, m] for d, m in self.measurement.row_index()]
        jac = self.measurement.gain * np.array(rows)
        if not np.all(np.isfinite(jac)):
            raise ForwardSolveError("non-finite Jacobian")
        return volt, jac
