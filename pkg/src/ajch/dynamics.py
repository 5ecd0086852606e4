"""Closed and open-system time evolution.

Unitary propagation uses the scaling-and-squaring matrix exponential
(``scipy.linalg.expm``). Open-system evolution integrates the Lindblad
master equation

    drho/dt = -i[H, rho] + sum_k (L_k rho L_k^+ - 1/2 {L_k^+ L_k, rho})

with an adaptive Runge-Kutta method (DOP853). For small spaces the
Liouvillian can be exponentiated directly, which gives a second,
independent propagator.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import log
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .hilbert import (DOWN, UP, CompositeSpace, SiteSpec, as_density, embed_site_operator,
                      is_hermitian, partial_trace)
from .model import build_ajc
from .polariton import manifold_population


class IntegrationError(ArithmeticError):
    """The ODE integrator failed; ``time`` is where it stopped."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} at t={time:.6g} s")
        self.time = time


@dataclass(frozen=True)
class NoiseModel:
    """Decoherence and control-error knobs.

    dephasing_rates : rad/s per site (scalar broadcasts); internal coherences
        decay as ``exp(-2 gamma t)``.
    heating_rate : phonon quanta/s per site.
    rabi_drift_fraction : the laser Rabi frequency of each experimental run is
        scaled by a factor drawn uniformly from ``[1 - f, 1]``.
    prep_infidelity : probability that a preparation pulse is skipped.
    """

    dephasing_rates: float | tuple[float, ...] = 0.0
    heating_rate: float = 0.0
    rabi_drift_fraction: float = 0.0
    prep_infidelity: float = 0.0

    def __post_init__(self):
        rates = np.atleast_1d(np.asarray(self.dephasing_rates, dtype=float))
        if np.any(rates < 0) or self.heating_rate < 0:
            raise ValueError("noise rates must be non-negative")
        if not 0 <= self.rabi_drift_fraction < 1:
            raise ValueError("rabi_drift_fraction must lie in [0, 1)")
        if not 0 <= self.prep_infidelity <= 1:
            raise ValueError("prep_infidelity must lie in [0, 1]")

    def site_dephasing(self, n_sites: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.dephasing_rates, dtype=float), (n_sites,))

    @property
    def is_noiseless(self) -> bool:
        return (not np.any(np.asarray(self.dephasing_rates)) and self.heating_rate == 0
                and self.rabi_drift_fraction == 0 and self.prep_infidelity == 0)

    @property
    def has_lindblad_terms(self) -> bool:
        return bool(np.any(np.asarray(self.dephasing_rates))) or self.heating_rate > 0


# trajectories --------------------------------------------------------------

TRACKED_STATES = ((UP, 0), (UP, 1), (DOWN, 0), (UP, 2), (DOWN, 1))
TRACKED_MANIFOLDS = (0, 1, 2)
QUANTITIES = tuple(f"{lvl}_{n}" for lvl, n in TRACKED_STATES) + tuple(
    f"manifold_{l}" for l in TRACKED_MANIFOLDS)


def site_records(rho_site: np.ndarray, spec: SiteSpec) -> np.ndarray:
    """Tracked basis-state and manifold populations of one reduced site state."""
    diag = np.real(np.diagonal(rho_site))
    out = [diag[spec.index(lvl, n)] if n <= spec.fock_cutoff else 0.0 for lvl, n in TRACKED_STATES]
    out += [manifold_population(rho_site, spec, l) if l <= spec.fock_cutoff else 0.0
            for l in TRACKED_MANIFOLDS]
    return np.array(out)


def state_records(state: np.ndarray, space: CompositeSpace) -> np.ndarray:
    """``(n_sites, len(QUANTITIES))`` array for a ket or density matrix."""
    return np.stack([site_records(partial_trace(state, space, i), spec)
                     for i, spec in enumerate(space.sites)])


@dataclass
class Trajectory:
    """Per-site populations on a time grid.

    ``records[t, site, q]`` follows the order of :data:`QUANTITIES`. CSV
    columns are ``time_s`` then ``ion{site+1}_{quantity}``.
    """

    times: np.ndarray
    records: np.ndarray
    quantities: tuple[str, ...] = QUANTITIES

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.records = np.asarray(self.records, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if self.records.shape[0] != len(self.times) or self.records.shape[2] != len(self.quantities):
            raise ValueError(f"records shape {self.records.shape} does not match grid/quantities")

    @classmethod
    def from_states(cls, times, states: Iterable[np.ndarray], space: CompositeSpace) -> "Trajectory":
        return cls(times, np.stack([state_records(s, space) for s in states]))

    @property
    def n_sites(self) -> int:
        return self.records.shape[1]

    def series(self, site: int, quantity: str) -> np.ndarray:
        return self.records[:, site, self.quantities.index(quantity)]

    def column_names(self) -> list[str]:
        return ["time_s"] + [f"ion{i + 1}_{q}" for i in range(self.n_sites) for q in self.quantities]

    def rows(self):
        flat = self.records.reshape(len(self.times), -1)
        for t, row in zip(self.times, flat):
            yield [t, *row]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.column_names())
            for row in self.rows():
                writer.writerow([repr(float(x)) for x in row])

    @classmethod
    def read_csv(cls, path) -> "Trajectory":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            data = np.array([[float(x) for x in row] for row in reader])
        names = header[1:]
        n_sites = len({n.split("_", 1)[0] for n in names})
        quantities = tuple(n.split("_", 1)[1] for n in names[: len(names) // n_sites])
        return cls(data[:, 0], data[:, 1:].reshape(len(data), n_sites, len(quantities)), quantities)


# unitary evolution --------------------------------------------------------

def _require_hermitian(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(h), initial=0.0)))
    if not is_hermitian(h, atol=1e-12 * scale):
        raise ValueError("Hamiltonian is not Hermitian")
    return h


def propagator(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i H t)``."""
    if t < 0:
        raise ValueError("evolution time must be non-negative")
    return scipy.linalg.expm(-1j * t * _require_hermitian(h))


def evolve_unitary(h: np.ndarray, psi0: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i H t) psi0``. Density matrices are conjugated by the propagator."""
    u = propagator(h, t)
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.ndim == 1:
        return u @ psi0
    return u @ psi0 @ u.conj().T


def evolve_unitary_grid(h: np.ndarray, psi0: np.ndarray, times: Sequence[float]) -> np.ndarray:
    """States at every time in ``times`` (sorted, >= 0). Uses one propagator per distinct step."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("times must be sorted and non-negative")
    h = _require_hermitian(h)
    state = np.asarray(psi0, dtype=complex)
    out = []
    cache: dict[float, np.ndarray] = {}
    prev = 0.0
    for t in times:
        dt = float(t - prev)
        if dt:
            key = round(dt, 18)
            if key not in cache:
                cache[key] = scipy.linalg.expm(-1j * dt * h)
            u = cache[key]
            state = u @ state if state.ndim == 1 else u @ state @ u.conj().T
        out.append(state)
        prev = t
    return np.stack(out)


# master equation ----------------------------------------------------------

class Evolution(NamedTuple):
    times: np.ndarray
    states: np.ndarray

    def trajectory(self, space: CompositeSpace) -> Trajectory:
        return Trajectory.from_states(self.times, self.states, space)


def liouvillian(h: np.ndarray, collapse_ops: Sequence[np.ndarray]) -> np.ndarray:
    """Superoperator acting on row-major ``rho.reshape(-1)``."""
    h = np.asarray(h, dtype=complex)
    eye = np.eye(h.shape[0])
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for c in collapse_ops:
        cdc = c.conj().T @ c
        sup += np.kron(c, c.conj()) - 0.5 * (np.kron(cdc, eye) + np.kron(eye, cdc.T))
    return sup


def lindblad_propagator(h: np.ndarray, collapse_ops: Sequence[np.ndarray], t: float) -> np.ndarray:
    """Channel ``exp(L t)`` on row-major vectorised density matrices."""
    return scipy.linalg.expm(t * liouvillian(h, collapse_ops))


def apply_channel(channel: np.ndarray, rho: np.ndarray) -> np.ndarray:
    d = rho.shape[0]
    return (channel @ rho.reshape(-1)).reshape(d, d)


def evolve_lindblad(h: np.ndarray, collapse_ops: Sequence[np.ndarray], rho0: np.ndarray,
                    times: Sequence[float], *, rtol: float = 1e-8, atol: float = 1e-10,
                    max_step: float = np.inf) -> Evolution:
    """Integrate the master equation and return the density matrix at each time.

    ``rho0`` may be a ket. ``times[0]`` is the initial time. Raises
    :class:`IntegrationError` if the integrator gives up.
    """
    h = _require_hermitian(h)
    rho0 = as_density(rho0)
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be strictly increasing")
    d = h.shape[0]
    if rho0.shape != (d, d):
        raise ValueError(f"initial state shape {rho0.shape} does not match Hamiltonian dimension {d}")
    ops = [np.asarray(c, dtype=complex) for c in collapse_ops]
    h_eff = h - 0.5j * sum((c.conj().T @ c for c in ops), np.zeros_like(h))
    h_eff_dag = h_eff.conj().T

    def rhs(_t, y):
        rho = y.reshape(d, d)
        out = -1j * (h_eff @ rho - rho @ h_eff_dag)
        for c in ops:
            out += c @ rho @ c.conj().T
        return out.reshape(-1)

    if len(times) == 1:
        return Evolution(times, rho0[None].copy())
    sol = solve_ivp(rhs, (times[0], times[-1]), rho0.reshape(-1), method="DOP853",
                    t_eval=times, rtol=rtol, atol=atol, max_step=max_step)
    if sol.status != 0:
        failed = sol.t[-1] if sol.t.size else times[0]
        raise IntegrationError(sol.message, failed)
    states = sol.y.T.reshape(len(times), d, d)
    states = 0.5 * (states + states.conj().transpose(0, 2, 1))
    return Evolution(times, states)


# initial states and collapse operators ------------------------------------

def thermal_distribution(nbar: float, n_max: int) -> np.ndarray:
    """Geometric phonon distribution truncated at ``n_max`` and renormalised."""
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    if nbar == 0:
        p = np.zeros(n_max + 1)
        p[0] = 1.0
        return p
    ratio = nbar / (1 + nbar)
    p = ratio ** np.arange(n_max + 1)
    return p / p.sum()


def thermal_state(nbar: float, spec: SiteSpec) -> np.ndarray:
    """``|down><down|`` times a thermal phonon state."""
    p = thermal_distribution(nbar, spec.fock_cutoff)
    rho = np.zeros((spec.dim, spec.dim), dtype=complex)
    for n, pn in enumerate(p):
        i = spec.index(DOWN, n)
        rho[i, i] = pn
    return rho


def heating_ops(rate: float, space: CompositeSpace, site: int) -> list[np.ndarray]:
    """Symmetric heating channel ``{sqrt(r) a+, sqrt(r) a}`` so that d<n>/dt = r."""
    if rate < 0:
        raise ValueError("heating rate must be non-negative")
    if rate == 0:
        return []
    a = space.check_site(site).destroy()
    return [np.sqrt(rate) * embed_site_operator(space, site, a.conj().T),
            np.sqrt(rate) * embed_site_operator(space, site, a)]


def site_dephasing_op(spec: SiteSpec) -> np.ndarray:
    """``|up><up| - |down><down|`` on the internal factor."""
    return spec.level_projector(UP) - spec.level_projector(DOWN)


def dephasing_ops(noise: NoiseModel, space: CompositeSpace) -> list[np.ndarray]:
    ops = []
    for i, gamma in enumerate(noise.site_dephasing(space.n_sites)):
        if gamma > 0:
            ops.append(np.sqrt(gamma) * embed_site_operator(space, i, site_dephasing_op(space.sites[i])))
    return ops


def collapse_ops(noise: NoiseModel, space: CompositeSpace) -> list[np.ndarray]:
    ops = dephasing_ops(noise, space)
    for i in range(space.n_sites):
        ops += heating_ops(noise.heating_rate, space, i)
    return ops


# calibration and estimates ------------------------------------------------

def sideband_contrast(gamma: float, t: float, g_b: float, fock_cutoff: int = 2) -> float:
    """Blue-sideband Rabi contrast on one ion after time ``t`` under dephasing ``gamma``.

    Starts in ``|down, 0>`` and returns the length of the Bloch vector
    component rotating under the drive (1 without dephasing).
    """
    spec = SiteSpec((DOWN, UP), fock_cutoff)
    h = build_ajc(0.0, 0.0, g_b, spec)
    ops = [np.sqrt(gamma) * site_dephasing_op(spec)] if gamma > 0 else []
    rho = apply_channel(lindblad_propagator(h, ops, t), as_density(spec.ket(DOWN, 0)))
    i, j = spec.index(DOWN, 0), spec.index(UP, 1)
    z = (rho[j, j] - rho[i, i]).real
    y = 2 * rho[i, j].imag
    return float(np.hypot(z, y))


def calibrate_dephasing(target_contrast: float, at_time: float, g_b: float) -> float:
    """Dephasing rate giving ``target_contrast`` sideband contrast at ``at_time``."""
    if not 0 < target_contrast < 1:
        raise ValueError("target contrast must lie in (0, 1)")
    guess = -log(target_contrast) / at_time
    f = lambda g: sideband_contrast(g, at_time, g_b) - target_contrast
    hi = guess
    while f(hi) > 0:
        hi *= 2
    return brentq(f, 0.0, hi, xtol=1e-10 * guess, rtol=1e-12)


def leakage_estimate(nbar: float, n_ions: int, heating_rate: float, duration: float,
                     method: str = "bound") -> float:
    """Upper estimate of the population pushed to higher polariton sectors.

    Sums a preparation term over ions and the heating contribution
    ``heating_rate * duration``. ``method="bound"`` charges ``nbar`` per ion
    (Markov bound ``P(n >= 1) <= <n>``); ``method="thermal"`` uses the exact
    geometric ``P(n >= 1) = nbar / (1 + nbar)``.
    """
    if min(nbar, n_ions, heating_rate, duration) < 0:
        raise ValueError("leakage inputs must be non-negative")
    if method == "bound":
        per_ion = nbar
    elif method == "thermal":
        per_ion = nbar / (1 + nbar)
    else:
        raise ValueError(f"unknown method {method!r}")
    return n_ions * per_ion + heating_rate * duration
