"""Piecewise-constant test phantoms and synthetic measurement data.

All phantoms live on the unit disk with a 4 ohm-m background. Inclusions
are circles of 1 ohm-m ("conductive") or 8 ohm-m ("resistive") material;
element conductivities are 1/resistivity of the region containing the
element barycenter. Positions and radii below are fixed project constants
(counts: A has 2 inclusions, B has 3, C has 5).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BACKGROUND_RESISTIVITY = 4.0
CONDUCTIVE_RESISTIVITY = 1.0
RESISTIVE_RESISTIVITY = 8.0


@dataclass
class Inclusion:
    center: tuple
    radius: float
    resistivity: float

    def contains(self, points):
        dx = points[:, 0] - self.center[0]
        dy = points[:, 1] - self.center[1]
        return dx * dx + dy * dy <= self.radius * self.radius


@dataclass
class Phantom:
    """Circular-inclusion conductivity ground truth."""

    id: str
    inclusions: list
    background_resistivity: float = BACKGROUND_RESISTIVITY

    def __post_init__(self):
        for inc in self.inclusions:
            if inc.resistivity <= 0:
                raise ValueError("resistivity must be positive")
            r = float(np.hypot(*inc.center))
            if r + inc.radius >= 1.0:
                raise ValueError(f"inclusion at {inc.center} leaves the disk")
        for i, a in enumerate(self.inclusions):
            for b in self.inclusions[i + 1:]:
                gap = float(np.hypot(a.center[0] - b.center[0],
                                     a.center[1] - b.center[1]))
                if gap <= a.radius + b.radius:
                    raise ValueError("inclusions overlap")

    @property
    def background_conductivity(self):
        return 1.0 / self.background_resistivity

    def element_values(self, mesh):
        """Per-element conductivity from barycenter region membership."""
        values = np.full(mesh.n_elements, self.background_conductivity)
        for inc in self.inclusions:
            values[inc.contains(mesh.barycenters)] = 1.0 / inc.resistivity
        return values


PHANTOMS = {
    "A": Phantom("A", [
        Inclusion((0.42, 0.36), 0.24, CONDUCTIVE_RESISTIVITY),
        Inclusion((-0.42, -0.36), 0.24, RESISTIVE_RESISTIVITY),
    ]),
    "B": Phantom("B", [
        Inclusion((0.0, 0.52), 0.22, CONDUCTIVE_RESISTIVITY),
        Inclusion((-0.46, -0.28), 0.21, RESISTIVE_RESISTIVITY),
        Inclusion((0.46, -0.28), 0.21, CONDUCTIVE_RESISTIVITY),
    ]),
    "C": Phantom("C", [
        Inclusion((0.0, 0.0), 0.18, RESISTIVE_RESISTIVITY),
        Inclusion((0.55, 0.0), 0.17, CONDUCTIVE_RESISTIVITY),
        Inclusion((0.0, 0.55), 0.17, RESISTIVE_RESISTIVITY),
        Inclusion((-0.55, 0.0), 0.17, CONDUCTIVE_RESISTIVITY),
        Inclusion((0.0, -0.55), 0.17, RESISTIVE_RESISTIVITY),
    ]),
}


def build_phantom(phantom_id, mesh):
    """Element conductivities of a named phantom on the given mesh."""
    if isinstance(phantom_id, Phantom):
        return phantom_id.element_values(mesh)
    key = str(phantom_id).upper()
    if key not in PHANTOMS:
        raise KeyError(f"unknown phantom {phantom_id!r}; choose from "
                       f"{sorted(PHANTOMS)}")
    return PHANTOMS[key].element_values(mesh)


@dataclass
class NoiseSpec:
    """Additive Gaussian noise: level as a fraction of the signal scale."""

    epsilon: float = 0.0
    seed: int = 0
    scale: str = "max-abs"  # or "per-channel" | "absolute"

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("noise level must be nonnegative")
        if self.scale not in ("max-abs", "per-channel", "absolute"):
            raise ValueError(f"unknown noise scale {self.scale!r}")


def synthesize_data(clean_voltages, noise):
    """Contaminate clean voltages with seeded Gaussian noise.

    Returns
    -------
    (clean, noisy, noise_norm) : the unchanged clean vector, the noisy
    vector, and the Euclidean norm of the realized perturbation.
    """
    clean = np.asarray(clean_voltages, dtype=float)
    if noise.epsilon == 0.0:
        return clean, clean.copy(), 0.0
    rng = np.random.default_rng(noise.seed)
    draw = rng.standard_normal(clean.shape[0])
    if noise.scale == "max-abs":
        amplitude = noise.epsilon * float(np.abs(clean).max())
    elif noise.scale == "per-channel":
        amplitude = noise.epsilon * np.abs(clean)
    else:
        amplitude = noise.epsilon
    noisy = clean + amplitude * draw
    return clean, noisy, float(np.linalg.norm(noisy - clean))
