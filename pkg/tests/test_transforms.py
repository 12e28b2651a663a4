import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eitkit.transforms import (HaarBasis, HaarTransform, IdentityBasis,
                               haar_forward, haar_inverse, inhomogeneity)


def test_constant_vector_single_coefficient():
    k = 6
    c = 3.25
    coeffs = haar_forward(np.full(2 ** k, c))
    assert coeffs[0] == pytest.approx(c * 2 ** (k / 2), rel=1e-12)
    assert np.abs(coeffs[1:]).max() <= 1e-12


def test_norm_preserved(rng):
    x = rng.standard_normal(256)
    assert np.linalg.norm(haar_forward(x)) == pytest.approx(
        np.linalg.norm(x), rel=1e-12)


def test_roundtrip(rng):
    x = rng.standard_normal(128)
    assert np.allclose(haar_inverse(haar_forward(x)), x, atol=1e-12)


def test_single_coefficient_gives_unit_basis_vector():
    n = 64
    for idx in (0, 1, 5, 63):
        c = np.zeros(n)
        c[idx] = 1.0
        v = haar_inverse(c)
        assert np.linalg.norm(v) == pytest.approx(1.0, rel=1e-12)


def test_adjoint_identity(rng):
    basis = HaarBasis(100)
    x = rng.standard_normal(100)
    y = rng.standard_normal(basis.padded)
    assert np.dot(basis.forward(x), y) == pytest.approx(
        np.dot(x, basis.adjoint(y)), rel=1e-12)


def test_padding_region_never_leaks(rng):
    basis = HaarBasis(100)
    x = rng.standard_normal(100)
    full = haar_inverse(basis.forward(x))
    assert np.abs(full[100:]).max() <= 1e-12
    assert np.allclose(full[:100], x, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=1, max_value=300), st.integers(0, 2 ** 31 - 1))
def test_roundtrip_any_length(n, seed):
    x = np.random.default_rng(seed).standard_normal(n)
    basis = HaarBasis(n)
    coeffs = basis.forward(x)
    assert np.linalg.norm(coeffs) == pytest.approx(
        max(np.linalg.norm(x), 0.0), rel=1e-12, abs=1e-12)
    assert np.allclose(basis.adjoint(coeffs), x, atol=1e-9 * max(1, np.abs(x).max()))


def test_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        haar_forward(np.zeros(100))
    with pytest.raises(ValueError):
        haar_inverse(np.zeros(100))


def test_basis_length_checks():
    basis = HaarBasis(10)
    with pytest.raises(ValueError):
        basis.forward(np.zeros(11))
    with pytest.raises(ValueError):
        basis.adjoint(np.zeros(10))  # padded length is 16


def test_sklearn_transformer_roundtrip(rng):
    X = rng.standard_normal((5, 60))
    tr = HaarTransform().fit(X)
    C = tr.transform(X)
    assert C.shape == (5, 64)
    assert np.allclose(tr.inverse_transform(C), X, atol=1e-12)
    # get_params/set_params come with the estimator API
    assert tr.get_params() == {}


def test_identity_basis(rng):
    basis = IdentityBasis(7)
    x = rng.standard_normal(7)
    assert np.array_equal(basis.forward(x), x)
    assert np.array_equal(basis.adjoint(x), x)


def test_inhomogeneity_basics(rng):
    sigma0 = np.full(50, 0.25)
    assert np.abs(inhomogeneity(sigma0, sigma0)).max() == 0.0
    sigma = sigma0.copy()
    sigma[7] = 1.0
    diff = inhomogeneity(sigma, sigma0)
    assert np.count_nonzero(diff) == 1
    assert diff[7] == pytest.approx(0.75)
    with pytest.raises(ValueError):
        inhomogeneity(sigma, np.zeros(49))


def test_phantom_inhomogeneity_l1_norm(fine_mesh):
    from eitkit.phantoms import PHANTOMS, build_phantom
    sigma = build_phantom("A", fine_mesh)
    sigma0 = np.full(fine_mesh.n_elements, 0.25)
    diff = inhomogeneity(sigma, sigma0)
    # nonzeros exactly on inclusion elements
    inside = np.zeros(fine_mesh.n_elements, dtype=bool)
    for inc in PHANTOMS["A"].inclusions:
        inside |= inc.contains(fine_mesh.barycenters)
    assert np.array_equal(diff != 0, inside)
    expected = sum(abs(1.0 / inc.resistivity - 0.25)
                   * np.count_nonzero(inc.contains(fine_mesh.barycenters))
                   for inc in PHANTOMS["A"].inclusions)
    assert np.abs(diff).sum() == pytest.approx(expected, rel=1e-12)


def test_phantom_coefficients_mostly_small(coarse_mesh, fine_mesh, transfer):
    from eitkit.phantoms import build_phantom
    sigma = transfer.map_values(build_phantom("A", fine_mesh))
    coeffs = HaarBasis(coarse_mesh.n_elements).forward(sigma)
    small = np.abs(coeffs) < 0.05 * np.abs(coeffs).max()
    assert small.mean() >= 0.60
