from math import sqrt

import numpy as np
import pytest

from ajch import constants as C
from ajch.experiments import blockade_separation
from ajch.hilbert import AUX_LEVELS, DOWN, UP, SiteSpec
from ajch.model import build_ajc, two_ion_params
from ajch.polariton import (PolaritonError, PolaritonLabel, blockade_gap, is_truncation_affected,
                            ladder_gap, manifold_population, manifold_projector, pair_energy,
                            polariton_energy, polariton_state, residual_projector,
                            site_polariton_number)

W, G = C.TWO_PI * 1.3e3, C.TWO_PI * 7.5e3


def test_state_construction():
    spec = SiteSpec((DOWN, UP), 3)
    assert np.array_equal(polariton_state(PolaritonLabel(0), spec), spec.ket(UP, 0))
    plus = polariton_state(PolaritonLabel(2, "+"), spec)
    assert np.allclose(plus, (spec.ket(UP, 2) + spec.ket(DOWN, 1)) / sqrt(2))
    minus = polariton_state(PolaritonLabel(2, "-"), spec)
    assert abs(np.vdot(plus, minus)) < 1e-15


def test_label_validation():
    with pytest.raises(PolaritonError):
        PolaritonLabel(0, "+")
    with pytest.raises(PolaritonError):
        PolaritonLabel(1)
    with pytest.raises(PolaritonError):
        polariton_state(PolaritonLabel(4, "+"), SiteSpec((DOWN, UP), 3))


@pytest.mark.parametrize("l", range(0, 5))
@pytest.mark.parametrize("branch", ["+", "-"])
def test_states_are_eigenvectors(l, branch):
    spec = SiteSpec((DOWN, UP), 6)
    label = PolaritonLabel(l, branch if l else None)
    h = build_ajc(W, 0.0, G, spec)
    psi = polariton_state(label, spec)
    residual = h @ psi - polariton_energy(label, W, G) * psi
    assert np.linalg.norm(residual) < 1e-9 * G


def test_energies_and_gaps():
    assert polariton_energy(PolaritonLabel(2, "-"), W, G) == pytest.approx(2 * W - sqrt(2) * G)
    one = PolaritonLabel(1, "+")
    two = PolaritonLabel(2, "+")
    zero = PolaritonLabel(0)
    gap = pair_energy(two, zero, W, G) - pair_energy(one, one, W, G)
    assert gap == pytest.approx(blockade_gap(G, "+"), rel=1e-12)
    assert abs(blockade_gap(G, "+")) == pytest.approx((2 - sqrt(2)) * G)
    assert blockade_gap(G, "-") == -blockade_gap(G, "+")
    assert ladder_gap(2, "+", W, G) == pytest.approx(W + (sqrt(2) - 1) * G)
    with pytest.raises(PolaritonError):
        pair_energy(one, PolaritonLabel(1, "-"), W, G)
    with pytest.raises(PolaritonError):
        ladder_gap(0, "+", W, G)


def test_blockade_gap_numeric_limit():
    p = two_ion_params(fock_cutoff=4).replace(kappa=np.zeros((2, 2)), omega_shift=0.0)
    for branch in ("+", "-"):
        assert blockade_separation(p, branch) == pytest.approx(blockade_gap(p.g_b, branch), rel=1e-9)


def test_blockade_gap_small_hopping():
    base = two_ion_params(fock_cutoff=4)
    p = base.replace(kappa=base.kappa / 100, omega_shift=base.omega_shift / 100)
    assert blockade_separation(p, "+") == pytest.approx(blockade_gap(p.g_b, "+"), rel=1e-2)


def test_polariton_number_diagonal():
    spec = SiteSpec((DOWN, UP) + AUX_LEVELS, 3)
    n = np.real(np.diag(site_polariton_number(spec)))
    assert n[spec.index(UP, 2)] == 2
    assert n[spec.index(DOWN, 2)] == 3
    assert n[spec.index("e1", 1)] == 1


def test_projectors_partition_identity():
    for levels in ((DOWN, UP), (DOWN, UP) + AUX_LEVELS):
        spec = SiteSpec(levels, 4)
        total = sum(manifold_projector(spec, l) for l in range(5)) + residual_projector(spec)
        assert np.allclose(total, np.eye(spec.dim))
    spec = SiteSpec((DOWN, UP), 4)
    assert residual_projector(spec)[spec.index(DOWN, 4), spec.index(DOWN, 4)] == 1


def test_manifold_population():
    spec = SiteSpec((DOWN, UP), 3)
    psi = (spec.ket(UP, 1) + spec.ket(UP, 0)) / sqrt(2)
    rho = np.outer(psi, psi.conj())
    assert manifold_population(rho, spec, 1) == pytest.approx(0.5)
    assert manifold_population(rho, spec, 0) == pytest.approx(0.5)
    assert is_truncation_affected(spec, 3)
    assert not is_truncation_affected(spec, 2)
