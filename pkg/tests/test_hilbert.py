import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ajch.hilbert import (DOWN, UP, CompositeSpace, HilbertSpaceError, SiteSpec, as_density,
                          basis_index, basis_label, check_density, embed_site_operator, expectation,
                          extend_levels, is_hermitian, level_isometry, partial_trace, product_ket,
                          tensor)

from conftest import random_density


def test_basis_index_examples():
    space = CompositeSpace.uniform(2, SiteSpec((DOWN, UP), 4))
    assert basis_index(space, [(DOWN, 0), (DOWN, 0)]) == 0
    assert basis_index(space, [(DOWN, 0), (DOWN, 4)]) == 4
    # site 0 is the most significant factor: (up,1) -> 6, times 10, plus (up,3) -> 8
    assert basis_index(space, [(UP, 1), (UP, 3)]) == 6 * 10 + 8


def test_site_index_layout():
    spec = SiteSpec((DOWN, UP), 3)
    assert spec.index(DOWN, 0) == 0
    assert spec.index(UP, 0) == 4
    assert spec.index(UP, 3) == 7
    assert spec.label(5) == (UP, 1)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 4), st.integers(1, 3), st.data())
def test_label_index_round_trip(n_max, n_sites, data):
    space = CompositeSpace.uniform(n_sites, SiteSpec((DOWN, UP), n_max))
    idx = data.draw(st.integers(0, space.dim - 1))
    assert basis_index(space, basis_label(space, idx)) == idx


def test_product_ket_matches_kron():
    spec = SiteSpec((DOWN, UP), 2)
    space = CompositeSpace.uniform(2, spec)
    ket = product_ket(space, [(UP, 1), (DOWN, 2)])
    assert np.array_equal(ket, np.kron(spec.ket(UP, 1), spec.ket(DOWN, 2)))
    assert ket[basis_index(space, [(UP, 1), (DOWN, 2)])] == 1


def test_rejects_bad_labels_and_cutoffs():
    spec = SiteSpec((DOWN, UP), 2)
    with pytest.raises(HilbertSpaceError):
        spec.index(UP, 3)
    with pytest.raises(HilbertSpaceError):
        spec.index("e0", 0)
    with pytest.raises(HilbertSpaceError):
        SiteSpec((DOWN, UP), 1)
    with pytest.raises(HilbertSpaceError):
        basis_index(CompositeSpace.uniform(2, spec), [(UP, 0)])


def test_ladder_operators():
    spec = SiteSpec((DOWN, UP), 4)
    a = spec.destroy()
    assert np.allclose(a.conj().T @ a, spec.number())
    ket = a.conj().T @ spec.ket(UP, 2)
    assert np.allclose(ket, np.sqrt(3) * spec.ket(UP, 3))
    assert np.allclose(spec.sigma_plus() @ spec.ket(DOWN, 1), spec.ket(UP, 1))
    assert np.allclose(spec.sigma_minus() @ spec.sigma_plus(), spec.level_projector(DOWN))


def test_embed_acts_on_one_site():
    spec = SiteSpec((DOWN, UP), 2)
    space = CompositeSpace.uniform(3, spec)
    op = embed_site_operator(space, 1, spec.sigma_plus())
    ket = op @ product_ket(space, [(DOWN, 1), (DOWN, 2), (UP, 0)])
    assert np.allclose(ket, product_ket(space, [(DOWN, 1), (UP, 2), (UP, 0)]))
    with pytest.raises(HilbertSpaceError):
        embed_site_operator(space, 3, spec.sigma_plus())


def test_partial_trace_of_product(rng):
    spec = SiteSpec((DOWN, UP), 2)
    space = CompositeSpace.uniform(2, spec)
    r0, r1 = random_density(6, rng), random_density(6, rng)
    rho = tensor(r0, r1)
    assert np.allclose(partial_trace(rho, space, 0), r0)
    assert np.allclose(partial_trace(rho, space, 1), r1)


def test_partial_trace_of_ket_equals_density():
    spec = SiteSpec((DOWN, UP), 2)
    space = CompositeSpace.uniform(2, spec)
    ket = (product_ket(space, [(UP, 0), (DOWN, 0)]) + product_ket(space, [(DOWN, 0), (UP, 0)])) / np.sqrt(2)
    reduced = partial_trace(ket, space, 0)
    assert np.allclose(reduced, partial_trace(as_density(ket), space, 0))
    assert np.isclose(np.trace(reduced @ reduced).real, 0.5)


def test_expectation_on_ket_and_density(rng):
    spec = SiteSpec((DOWN, UP), 3)
    ket = rng.normal(size=spec.dim) + 1j * rng.normal(size=spec.dim)
    ket /= np.linalg.norm(ket)
    n = spec.number()
    assert np.isclose(expectation(n, ket), expectation(n, as_density(ket)))


def test_check_density(rng):
    rho = random_density(4, rng)
    check_density(rho)
    with pytest.raises(HilbertSpaceError):
        check_density(2 * rho)
    assert is_hermitian(rho)
    assert not is_hermitian(rho + 1e-3j * np.eye(4))


def test_extend_levels_preserves_state():
    small = SiteSpec((DOWN, UP), 2)
    big = small.with_levels((DOWN, UP, "e0"))
    iso = level_isometry(small, big)
    assert np.allclose(iso.conj().T @ iso, np.eye(small.dim))
    ket = extend_levels(small.ket(UP, 1), small, big)
    assert np.allclose(ket, big.ket(UP, 1))
    rho = extend_levels(as_density(small.ket(DOWN, 2)), small, big)
    assert np.isclose(rho[big.index(DOWN, 2), big.index(DOWN, 2)], 1)
