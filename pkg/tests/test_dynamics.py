import numpy as np
import pytest

from ajch import constants as C
from ajch.dynamics import (NoiseModel, Trajectory, apply_channel, calibrate_dephasing, collapse_ops,
                           evolve_lindblad, evolve_unitary, evolve_unitary_grid, heating_ops,
                           leakage_estimate, lindblad_propagator, liouvillian,
                           sideband_contrast, site_dephasing_op, state_records, thermal_distribution,
                           thermal_state, QUANTITIES)
from ajch.hilbert import DOWN, UP, CompositeSpace, SiteSpec, as_density, product_ket
from ajch.model import build_ajc, build_ajch, two_ion_params
from ajch.polariton import total_polariton_number

from conftest import random_density


def test_unitary_norm_and_composition(params):
    space = params.space()
    h = build_ajch(params, space)
    psi = product_ket(space, [(UP, 0), (DOWN, 0)])
    a = evolve_unitary(h, evolve_unitary(h, psi, 1e-4), 2e-4)
    b = evolve_unitary(h, psi, 3e-4)
    assert np.linalg.norm(a) == pytest.approx(1, abs=1e-12)
    assert np.allclose(a, b, atol=1e-10)
    grid = evolve_unitary_grid(h, psi, [0.0, 1e-4, 3e-4])
    assert np.allclose(grid[2], b, atol=1e-10)


def test_phonon_swap_at_half_hopping_period():
    p = two_ion_params(fock_cutoff=2).replace(g_b=0.0)
    space = p.space()
    h = build_ajch(p, space)
    kappa = p.kappa[0, 1]
    psi = evolve_unitary(h, product_ket(space, [(UP, 1), (UP, 0)]), np.pi / kappa)
    target = product_ket(space, [(UP, 0), (UP, 1)])
    assert abs(np.vdot(target, psi)) ** 2 == pytest.approx(1, abs=1e-12)


def test_liouvillian_vectorisation(rng):
    d = 4
    h = random_density(d, rng)
    c = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = random_density(d, rng)
    lhs = (liouvillian(h, [c]) @ rho.reshape(-1)).reshape(d, d)
    rhs = -1j * (h @ rho - rho @ h) + c @ rho @ c.conj().T - 0.5 * (c.conj().T @ c @ rho + rho @ c.conj().T @ c)
    assert np.allclose(lhs, rhs)


def test_lindblad_without_noise_matches_unitary(params):
    space = params.space()
    h = build_ajch(params, space)
    psi = product_ket(space, [(UP, 0), (DOWN, 0)])
    times = np.linspace(0, 2e-4, 5)
    evo = evolve_lindblad(h, [], psi, times)
    for t, rho in zip(times, evo.states):
        assert np.allclose(rho, as_density(evolve_unitary(h, psi, t)), atol=1e-6)
    traj = evo.trajectory(space)
    assert traj.records.shape == (5, 2, len(QUANTITIES))


def test_dephasing_decay_rate():
    spec = SiteSpec((DOWN, UP), 2)
    gamma = 300.0
    plus = (spec.ket(DOWN, 0) + spec.ket(UP, 0)) / np.sqrt(2)
    ops = [np.sqrt(gamma) * site_dephasing_op(spec)]
    t = 2e-3
    rho = apply_channel(lindblad_propagator(np.zeros((spec.dim, spec.dim)), ops, t), as_density(plus))
    coherence = abs(rho[spec.index(DOWN, 0), spec.index(UP, 0)])
    assert coherence == pytest.approx(0.5 * np.exp(-2 * gamma * t), rel=1e-10)


def test_lindblad_solver_matches_propagator(rng):
    spec = SiteSpec((DOWN, UP), 2)
    space = CompositeSpace((spec,))
    h = build_ajc(0.0, 0.0, C.TWO_PI * 7.5e3, spec)
    noise = NoiseModel(dephasing_rates=500.0, heating_rate=50.0)
    ops = collapse_ops(noise, space)
    rho0 = as_density(spec.ket(DOWN, 0))
    t = 3e-4
    evo = evolve_lindblad(h, ops, rho0, [0.0, t])
    exact = apply_channel(lindblad_propagator(h, ops, t), rho0)
    assert np.allclose(evo.states[-1], exact, atol=1e-7)
    assert np.trace(evo.states[-1]).real == pytest.approx(1, abs=1e-9)


def test_thermal_distribution():
    p = thermal_distribution(0.04, 10)
    assert p[0] == pytest.approx(1 / 1.04, rel=1e-9)
    assert p[1] == pytest.approx(0.04 / 1.04**2, rel=1e-9)
    rho = thermal_state(0.04, SiteSpec((DOWN, UP), 4))
    assert np.trace(rho).real == pytest.approx(1)


def test_heating_rate_and_mean_occupation():
    spec = SiteSpec((DOWN, UP), 4)
    space = CompositeSpace((spec,))
    rate = 5.0
    ops = heating_ops(rate, space, 0)
    zero = np.zeros((spec.dim, spec.dim))
    rho = apply_channel(lindblad_propagator(zero, ops, 840e-6), as_density(spec.ket(DOWN, 0)))
    n = np.trace(spec.number() @ rho).real
    assert n == pytest.approx(rate * 840e-6, rel=1e-3)


def test_calibrated_contrast():
    g_b = C.TWO_PI * 7.5e3
    gamma = calibrate_dephasing(0.5, 840e-6, g_b)
    assert gamma == pytest.approx(830.16, rel=1e-4)
    assert sideband_contrast(gamma, 840e-6, g_b) == pytest.approx(0.5, abs=1e-8)
    assert sideband_contrast(0.0, 840e-6, g_b) == pytest.approx(1, abs=1e-9)


def test_leakage_estimate():
    assert leakage_estimate(0.04, 2, 5.0, 840e-6) == pytest.approx(0.0842, abs=1e-12)
    assert leakage_estimate(0.04, 1, 0.0, 1.0, method="thermal") == pytest.approx(0.04 / 1.04)
    with pytest.raises(ValueError):
        leakage_estimate(0.04, 2, 5.0, 1.0, method="poisson")


def test_fock_truncation_converged():
    results = []
    for n_max in (4, 6):
        p = two_ion_params(fock_cutoff=n_max)
        space = p.space()
        psi = product_ket(space, [(UP, 0), (DOWN, 0)])
        states = evolve_unitary_grid(build_ajch(p, space), psi, np.linspace(0, 1e-3, 11))
        results.append(np.stack([state_records(s, space)[..., :5] for s in states]))
    assert np.max(np.abs(results[0] - results[1])) < 1e-4


def test_total_polariton_number_conserved_over_one_ms(params):
    space = params.space()
    h = build_ajch(params, space)
    nt = total_polariton_number(space)
    psi = product_ket(space, [(DOWN, 0), (DOWN, 0)])
    states = evolve_unitary_grid(h, psi, np.linspace(0, 1e-3, 101))
    values = [np.vdot(s, nt @ s).real for s in states]
    assert np.max(np.abs(np.array(values) - 2)) < 1e-8


def test_trajectory_csv_round_trip(tmp_path, params):
    space = params.space()
    psi = product_ket(space, [(UP, 0), (DOWN, 0)])
    times = np.linspace(0, 1e-4, 4)
    traj = Trajectory.from_states(times, evolve_unitary_grid(build_ajch(params, space), psi, times), space)
    path = tmp_path / "traj.csv"
    traj.write_csv(path)
    back = Trajectory.read_csv(path)
    assert np.array_equal(back.times, traj.times)
    assert np.array_equal(back.records, traj.records)
    assert len(traj.column_names()) == 1 + 2 * len(QUANTITIES)


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(dephasing_rates=-1.0)
    with pytest.raises(ValueError):
        NoiseModel(rabi_drift_fraction=1.0)
    assert NoiseModel().is_noiseless
    assert not NoiseModel(heating_rate=1.0).is_noiseless
    assert not NoiseModel(rabi_drift_fraction=0.1).has_lindblad_terms
