import numpy as np
import pytest

from eitkit.forward import (CEMForwardModel, MeasurementLayout,
                            adjacent_current_patterns, measure)
from eitkit.mesh import ElectrodeLayout
from eitkit.phantoms import build_phantom


def test_adjacent_patterns_sum_to_zero():
    P = adjacent_current_patterns(16)
    assert P.shape == (16, 16)
    assert np.abs(P.sum(axis=1)).max() == 0.0


def test_measurement_counts():
    assert MeasurementLayout.adjacent(16).n_measurements == 16 * 13
    assert MeasurementLayout.adjacent(16, include_driven=True).n_measurements == 256
    assert MeasurementLayout.adjacent(8).n_measurements == 8 * 5


def test_all_equal_potentials_measure_zero():
    lay = MeasurementLayout.adjacent(16)
    U = np.ones((16, 16)) * 4.2
    assert np.abs(lay.apply(U)).max() == 0.0


def test_assembly_linear_in_sigma(small_model, rng):
    n = small_model.mesh.n_elements
    sa = 0.2 + rng.random(n)
    sb = 0.2 + rng.random(n)
    K = (small_model.stiffness(sa) + small_model.stiffness(sb)
         - small_model.stiffness(sa + sb))
    assert abs(K).max() < 1e-12


def test_homogeneous_stiffness_scales(small_model):
    n = small_model.mesh.n_elements
    K1 = small_model.stiffness(np.ones(n))
    K3 = small_model.stiffness(np.full(n, 3.0))
    assert abs(K3 - 3.0 * K1).max() < 1e-12


def test_system_symmetric_and_positive_definite(coarse_model, fine_mesh,
                                                transfer):
    sigma = transfer.map_values(build_phantom("A", fine_mesh))
    A = coarse_model.assemble(sigma)
    asym = abs(A - A.T).max()
    assert asym <= 1e-12 * abs(A).max()
    np.linalg.cholesky(A.toarray())  # raises if not positive definite


def test_grounding_sum_is_machine_zero(coarse_model):
    n = coarse_model.mesh.n_elements
    sol = coarse_model.solve(np.full(n, 0.25))
    scale = np.abs(sol.electrode).max()
    assert np.abs(sol.electrode.sum(axis=0)).max() <= 1e-13 * max(scale, 1.0)


def test_unreduced_residual_small(small_model, rng):
    # the reduced solve must satisfy the full block system
    n_el = small_model.mesh.n_elements
    sigma = 0.2 + rng.random(n_el)
    sol = small_model.solve(sigma)
    n = small_model.mesh.n_nodes
    a_uu = small_model.stiffness(sigma) + small_model._boundary_mass
    a_uc = small_model._coupling
    L = small_model.layout.count
    diag = np.diag(small_model._electrode_diag)
    full = np.block([[a_uu.toarray(), a_uc.toarray()],
                     [a_uc.toarray().T, diag]])
    x = np.vstack([sol.interior, sol.electrode])
    b = np.vstack([np.zeros((n, L)), small_model.patterns.T])
    res = np.linalg.norm(full @ x - b)
    assert res <= 1e-10 * np.linalg.norm(b)


def test_joint_scaling_halves_potentials(coarse_mesh):
    lay1 = ElectrodeLayout(16, contact_impedances=0.05)
    lay2 = ElectrodeLayout(16, contact_impedances=0.025)
    m1 = CEMForwardModel(coarse_mesh, lay1)
    m2 = CEMForwardModel(coarse_mesh, lay2)
    n = coarse_mesh.n_elements
    u1 = m1.solve(np.full(n, 0.25)).electrode
    u2 = m2.solve(np.full(n, 0.5)).electrode
    assert np.allclose(u2, 0.5 * u1, rtol=0, atol=1e-13 * np.abs(u1).max())


def test_reciprocity(small_model, rng):
    sigma = 0.2 + 0.3 * rng.random(small_model.mesh.n_elements)
    sol = small_model.solve(sigma)
    P = adjacent_current_patterns(small_model.layout.count)
    vals = P @ sol.electrode  # vals[q, p] = pattern q read on drive p
    scale = np.abs(vals).max()
    assert np.abs(vals - vals.T).max() <= 1e-8 * scale


def test_rotational_symmetry_homogeneous(coarse_model):
    L = 16
    n = coarse_model.mesh.n_elements
    sol = coarse_model.solve(np.full(n, 0.25))
    U = sol.electrode
    lay = coarse_model.measurement
    worst = 0.0
    for d in range(L):
        ms0 = lay.pairs[d]
        ms1 = lay.pairs[(d + 1) % L]
        a = U[ms0, d] - U[(ms0 + 1) % L, d]
        b = U[ms1, (d + 1) % L] - U[(ms1 + 1) % L, (d + 1) % L]
        # align pair m of drive d with pair m+1 of drive d+1
        k0 = np.argsort((ms0 - d) % L)
        k1 = np.argsort((ms1 - d - 1) % L)
        worst = max(worst, np.abs(a[k0] - b[k1]).max())
    assert worst <= 1e-6 * np.abs(U).max()


def test_phantom_voltages_finite_grounded(fine_mesh, layout16):
    model = CEMForwardModel(fine_mesh, layout16)
    sigma = build_phantom("A", fine_mesh)
    sol = model.solve(sigma)
    assert np.all(np.isfinite(sol.electrode))
    scale = np.abs(sol.electrode).max()
    assert np.abs(sol.electrode.sum(axis=0)).max() <= 1e-13 * scale


def test_jacobian_against_finite_differences(coarse_model, rng):
    n = coarse_model.mesh.n_elements
    sigma = 0.25 * (1.0 + 0.3 * (rng.random(n) - 0.5))
    _, J = coarse_model.solve_with_jacobian(sigma)
    assert J.shape == (coarse_model.measurement.n_measurements, n)
    for _ in range(20):
        r = int(rng.integers(J.shape[0]))
        e = int(rng.integers(J.shape[1]))
        h = 1e-6 * sigma[e]
        sp, sm = sigma.copy(), sigma.copy()
        sp[e] += h
        sm[e] -= h
        fd = (coarse_model.voltages(sp)[r] - coarse_model.voltages(sm)[r]) / (2 * h)
        # floor the denominator at 1e-3 of the column scale: differences of
        # two direct solves carry ~1e-9 absolute noise, which dominates any
        # entry that far below the column's sensitivity range
        denom = max(abs(fd), abs(J[r, e]), 1e-3 * np.abs(J[:, e]).max())
        assert abs(fd - J[r, e]) <= 1e-4 * denom


def test_boundary_element_more_sensitive_than_center(coarse_model):
    n = coarse_model.mesh.n_elements
    _, J = coarse_model.solve_with_jacobian(np.full(n, 0.25))
    bary = coarse_model.mesh.barycenters
    rad = np.hypot(bary[:, 0], bary[:, 1])
    center = int(np.argmin(rad))
    edge = int(np.argmax(rad))
    assert np.linalg.norm(J[:, edge]) > np.linalg.norm(J[:, center])


def test_jacobian_column_count_matches_coarse_mesh(coarse_model):
    n = coarse_model.mesh.n_elements
    J = coarse_model.jacobian(np.full(n, 0.25))
    assert J.shape[1] == n
    assert abs(n - 492) <= 0.15 * 492


def test_lipschitz_smoke(coarse_model, rng):
    n = coarse_model.mesh.n_elements
    base = np.full(n, 0.25)
    f0 = coarse_model.voltages(base)
    ratios = []
    for _ in range(10):
        d = 0.05 * rng.standard_normal(n)
        f1 = coarse_model.voltages(np.clip(base + d, 0.02, 50.0))
        ratios.append(np.linalg.norm(f1 - f0) / np.abs(d).max())
    ratios = np.array(ratios)
    assert ratios.max() <= 2.0 * ratios.mean()


def test_gain_scales_measurements_and_jacobian(coarse_mesh, layout16):
    meas = MeasurementLayout.adjacent(16, gain=10.0)
    scaled = CEMForwardModel(coarse_mesh, layout16, measurement=meas)
    plain = CEMForwardModel(coarse_mesh, layout16)
    n = coarse_mesh.n_elements
    sigma = np.full(n, 0.25)
    v1, j1 = plain.solve_with_jacobian(sigma)
    v2, j2 = scaled.solve_with_jacobian(sigma)
    assert np.allclose(v2, 10.0 * v1, rtol=1e-14)
    assert np.allclose(j2, 10.0 * j1, rtol=1e-14)


def test_rejects_nonzero_sum_pattern(small_model):
    bad = np.zeros((1, small_model.layout.count))
    bad[0, 0] = 1.0
    with pytest.raises(ValueError):
        small_model.solve(np.full(small_model.mesh.n_elements, 1.0), bad)


def test_rejects_inadmissible_sigma(small_model):
    n = small_model.mesh.n_elements
    with pytest.raises(ValueError):
        small_model.solve(np.full(n, 1e-4))


def test_measure_uses_layout(small_model):
    sol = small_model.solve(np.full(small_model.mesh.n_elements, 0.25))
    v = measure(sol, small_model.measurement)
    assert v.shape == (small_model.measurement.n_measurements,)
