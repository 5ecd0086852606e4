"""Pulses, pulse sequences, state mapping and fluorescence detection.

A pulse of kind ``k`` is generated by a Hermitian site operator ``G_k``
normalised so that the reference transition has matrix element 1/2; the
pulse unitary is ``exp(-i * angle * G_k)``. On sidebands the other Fock
states see their natural ``sqrt(n+1)`` scaling (``ideal=False``) or the same
rotation angle as the reference (``ideal=True``).

Detection: ``down`` (S1/2) fluoresces, every other level (D5/2) is dark.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from math import pi, sqrt
from typing import Optional, Union

import numpy as np
import scipy.linalg

from .dynamics import (NoiseModel, apply_channel, collapse_ops, evolve_lindblad,
                       lindblad_propagator)
from .hilbert import (AUX_LEVELS, DOWN, UP, CompositeSpace, SiteSpec, as_density,
                      embed_site_operator)
from .model import ModelParams, build_ajch, hopping_hamiltonian

PULSE_KINDS = ("carrier", "blue_sideband", "red_sideband", "shelve", "uniform_transfer")
MAPPING_TARGETS = ((UP, 0), (UP, 1), (DOWN, 0))

# channels on spaces up to this dimension are built from the Liouvillian exponential
_DENSE_CHANNEL_DIM = 24


class SequenceError(ValueError):
    pass


@dataclass(frozen=True)
class Pulse:
    """A resonant laser pulse on one ion.

    ``rabi`` is the carrier-scale Rabi frequency Omega0 (rad/s); sideband
    pulses couple with ``g = eta * Omega0 / 2``. ``rabi``/``eta`` left as
    ``None`` are filled from :class:`ModelParams` when a duration is needed.
    """

    kind: str
    site: int = 0
    angle: float = pi
    phase: float = 0.0
    rabi: Optional[float] = None
    eta: Optional[float] = None
    reference_n: int = 0
    target: Optional[str] = None

    def __post_init__(self):
        if self.kind not in PULSE_KINDS:
            raise SequenceError(f"unknown pulse kind {self.kind!r}")
        if self.angle <= 0:
            raise SequenceError("pulse angle must be positive")
        if self.rabi is not None and self.rabi <= 0:
            raise SequenceError("rabi frequency must be positive")
        if self.kind == "shelve" and self.target not in AUX_LEVELS:
            raise SequenceError(f"shelve pulse needs an auxiliary target in {AUX_LEVELS}")
        if self.reference_n < 0:
            raise SequenceError("reference_n must be >= 0")

    @property
    def is_sideband(self) -> bool:
        return self.kind in ("blue_sideband", "red_sideband")

    def rabi_frequency(self) -> float:
        """Rabi frequency of the reference transition (rad/s)."""
        if self.kind == "uniform_transfer":
            return np.inf
        if self.rabi is None:
            raise SequenceError(f"{self.kind} pulse has no rabi frequency")
        if not self.is_sideband:
            return self.rabi
        if self.eta is None:
            raise SequenceError(f"{self.kind} pulse has no Lamb-Dicke parameter")
        g = self.eta * self.rabi / 2
        return 2 * sqrt(self.reference_n + 1) * g

    def duration(self) -> float:
        if self.kind == "uniform_transfer":
            return 0.0
        return self.angle / self.rabi_frequency()

    def resolved(self, params: Optional[ModelParams]) -> "Pulse":
        if params is None:
            return self
        return replace(self, rabi=self.rabi if self.rabi is not None else params.omega0_rabi,
                       eta=self.eta if self.eta is not None else params.eta)

    def describe(self) -> str:
        name = {"carrier": "pi_C", "blue_sideband": "pi_B", "red_sideband": "pi_R",
                "shelve": f"pi_S({self.target})", "uniform_transfer": "uniform_transfer"}[self.kind]
        if self.kind != "uniform_transfer" and not np.isclose(self.angle, pi):
            name += f"[{self.angle / pi:g}pi]"
        return f"{name} ion{self.site + 1}"


@dataclass(frozen=True)
class Wait:
    duration: float
    hamiltonian_on: bool = True

    def __post_init__(self):
        if self.duration < 0:
            raise SequenceError("wait duration must be non-negative")

    def describe(self) -> str:
        return f"wait {self.duration:g}s ({'H on' if self.hamiltonian_on else 'H off'})"


Step = Union[Pulse, Wait]


@dataclass(frozen=True)
class Sequence:
    steps: tuple[Step, ...] = ()
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    def __add__(self, other: "Sequence") -> "Sequence":
        label = " + ".join(x for x in (self.label, other.label) if x)
        return Sequence(self.steps + other.steps, label)

    def describe(self) -> list[str]:
        return [s.describe() for s in self.steps]


# pulse generators ---------------------------------------------------------

def _require(spec: SiteSpec, *levels: str) -> None:
    for lvl in levels:
        if lvl not in spec.internal_levels:
            raise SequenceError(f"pulse needs level {lvl!r}, site has {spec.internal_levels}")


def _pair_generator(spec: SiteSpec, pairs, phase: float) -> np.ndarray:
    """Sum over ``(upper, lower, weight)`` of ``weight/2 (e^{i phase}|upper><lower| + h.c.)``."""
    g = np.zeros((spec.dim, spec.dim), dtype=complex)
    for upper, lower, w in pairs:
        g[upper, lower] += 0.5 * w * np.exp(1j * phase)
        g[lower, upper] += 0.5 * w * np.exp(-1j * phase)
    return g


def pulse_generator(pulse: Pulse, spec: SiteSpec, ideal: bool = False) -> np.ndarray:
    """Site generator ``G`` with ``U = exp(-i angle G)``; reference element is 1/2."""
    n_max = spec.fock_cutoff
    if pulse.kind == "carrier":
        _require(spec, DOWN, UP)
        pairs = [(spec.index(UP, n), spec.index(DOWN, n), 1.0) for n in range(n_max + 1)]
    elif pulse.kind == "shelve":
        _require(spec, DOWN, pulse.target)
        pairs = [(spec.index(pulse.target, n), spec.index(DOWN, n), 1.0) for n in range(n_max + 1)]
    elif pulse.is_sideband:
        _require(spec, DOWN, UP)
        if pulse.reference_n > n_max - 1:
            raise SequenceError(f"reference_n={pulse.reference_n} needs fock_cutoff >= {pulse.reference_n + 1}")
        ref = sqrt(pulse.reference_n + 1)
        if pulse.kind == "blue_sideband":
            # |down, n> <-> |up, n+1>
            pairs = [(spec.index(UP, n + 1), spec.index(DOWN, n), 1.0 if ideal else sqrt(n + 1) / ref)
                     for n in range(n_max)]
        else:
            # |down, n+1> <-> |up, n>
            pairs = [(spec.index(UP, n), spec.index(DOWN, n + 1), 1.0 if ideal else sqrt(n + 1) / ref)
                     for n in range(n_max)]
    else:
        raise SequenceError("uniform_transfer has no generator; use uniform_transfer_unitary")
    return _pair_generator(spec, pairs, pulse.phase)


def uniform_transfer_unitary(spec: SiteSpec) -> np.ndarray:
    """Exact swap of ``|down,0> <-> |up,1>`` and ``|down,1> <-> |up,2>``; identity elsewhere."""
    _require(spec, DOWN, UP)
    if spec.fock_cutoff < 2:
        raise SequenceError("uniform transfer needs fock_cutoff >= 2")
    u = np.eye(spec.dim, dtype=complex)
    for a, b in (((DOWN, 0), (UP, 1)), ((DOWN, 1), (UP, 2))):
        i, j = spec.index(*a), spec.index(*b)
        u[[i, j], :] = u[[j, i], :]
    return u


def pulse_unitary(pulse: Pulse, spec: SiteSpec, ideal: bool = False, rabi_scale: float = 1.0) -> np.ndarray:
    """Site unitary of ``pulse``. ``rabi_scale`` multiplies the laser amplitude (not the duration)."""
    if pulse.kind == "uniform_transfer":
        return uniform_transfer_unitary(spec)
    g = pulse_generator(pulse, spec, ideal)
    return scipy.linalg.expm(-1j * pulse.angle * rabi_scale * g)


# mapping sequences --------------------------------------------------------

def _pi(kind: str, site: int, **kw) -> Pulse:
    return Pulse(kind, site, **kw)


def mapping_sequence(target: tuple[str, int], site: int) -> Sequence:
    """Pulses that make ``target`` bright before fluorescence detection.

    (up,1): shelve, BSB.  (up,0): shelve, BSB, carrier.
    (down,0): carrier, shelve, BSB, carrier.  Shelving uses e0.
    """
    target = tuple(target)
    shelve = _pi("shelve", site, target="e0")
    bsb = _pi("blue_sideband", site)
    car = _pi("carrier", site)
    if target == (UP, 1):
        steps = (shelve, bsb)
    elif target == (UP, 0):
        steps = (shelve, bsb, car)
    elif target == (DOWN, 0):
        steps = (car, shelve, bsb, car)
    else:
        raise SequenceError(f"no mapping sequence for {target}; choose from {MAPPING_TARGETS}")
    return Sequence(steps, f"map {target[0]},{target[1]} ion{site + 1}")


def full_mapping_sequence(site: int) -> Sequence:
    """Eight-step map storing 0-, 1- and 2-polariton basis states in the motional ground state.

    |up,0> -> |e0,0>, |up,1> -> |e2,0>, |down,0> -> |down,0>,
    |up,2> -> |e1,0>, |down,1> -> |up,0>.
    """
    p = lambda kind, **kw: Pulse(kind, site, **kw)
    steps = (
        p("shelve", target="e3"),     # down -> e3
        p("uniform_transfer"),        # |down,0>,|down,1> <-> |up,1>,|up,2>
        p("carrier"),                 # down <-> up
        p("shelve", target="e0"),     # |down,0> -> |e0,0>
        p("blue_sideband"),           # |up,1> -> |down,0>
        p("shelve", target="e1"),     # -> |e1,0>
        p("carrier"),                 # |up,0> -> |down,0>
        p("shelve", target="e2"),     # -> |e2,0>
        p("shelve", target="e3"),     # e3 -> down
        p("red_sideband"),            # |down,1> -> |up,0>
    )
    return Sequence(steps, f"full 2-polariton map ion{site + 1}")


# application --------------------------------------------------------------

def _conjugate(u: np.ndarray, state: np.ndarray) -> np.ndarray:
    return u @ state if state.ndim == 1 else u @ state @ u.conj().T


_channel_cache: dict = {}


def _small_channel(h: np.ndarray, ops, duration: float) -> np.ndarray:
    # mapping sequences are replayed on every time point with identical pulses
    key = (h.tobytes(), tuple(c.tobytes() for c in ops), duration)
    channel = _channel_cache.get(key)
    if channel is None:
        if len(_channel_cache) >= 512:
            _channel_cache.clear()
        channel = _channel_cache[key] = lindblad_propagator(h, ops, duration)
    return channel


def _evolve_open(h: np.ndarray, ops, state: np.ndarray, duration: float) -> np.ndarray:
    rho = as_density(state)
    if duration == 0:
        return rho
    if rho.shape[0] <= _DENSE_CHANNEL_DIM:
        return apply_channel(_small_channel(h, ops, duration), rho)
    return evolve_lindblad(h, ops, rho, [0.0, duration]).states[-1]


def apply_sequence(seq: Sequence, state: np.ndarray, space: CompositeSpace,
                   params: Optional[ModelParams] = None, noise: Optional[NoiseModel] = None, *,
                   ideal: bool = False, hopping_during_pulses: bool = False,
                   rabi_scale: float = 1.0) -> np.ndarray:
    """Apply ``seq`` step by step to a ket or density matrix on ``space``.

    Without Lindblad noise and with hopping frozen, pulses are exact site
    unitaries. Otherwise each pulse of finite duration evolves under its drive
    Hamiltonian (plus site shifts and hopping when ``hopping_during_pulses``)
    and the noise collapse operators. ``Wait`` steps evolve under the full
    anti-JCH Hamiltonian when flagged on.
    """
    noise = noise or NoiseModel()
    ops = collapse_ops(noise, space) if noise.has_lindblad_terms else []
    if hopping_during_pulses and params is None:
        raise SequenceError("hopping during pulses needs model parameters")
    state = np.asarray(state, dtype=complex)
    for step in seq.steps:
        if isinstance(step, Wait):
            if step.duration == 0:
                continue
            if step.hamiltonian_on:
                if params is None:
                    raise SequenceError("a Hamiltonian-on wait needs model parameters")
                h = build_ajch(params.scaled_drive(rabi_scale), space)
            else:
                h = np.zeros((space.dim, space.dim), dtype=complex)
            if ops:
                state = _evolve_open(h, ops, state, step.duration)
            elif step.hamiltonian_on:
                state = _conjugate(scipy.linalg.expm(-1j * step.duration * h), state)
            continue

        spec = space.check_site(step.site)
        if step.kind == "uniform_transfer" or (not ops and not hopping_during_pulses):
            u = embed_site_operator(space, step.site, pulse_unitary(step, spec, ideal, rabi_scale))
            state = _conjugate(u, state)
            continue
        pulse = step.resolved(params)
        rabi = pulse.rabi_frequency()
        h = embed_site_operator(space, step.site, rabi * rabi_scale * pulse_generator(pulse, spec, ideal))
        if hopping_during_pulses:
            h = h + hopping_hamiltonian(params, space)
        if ops:
            state = _evolve_open(h, ops, state, pulse.duration())
        else:
            state = _conjugate(scipy.linalg.expm(-1j * pulse.duration() * h), state)
    return state


def bright_probability(state: np.ndarray, space: CompositeSpace, site: int) -> float:
    """Population of ``down`` (the fluorescing S1/2 level) at ``site``."""
    spec = space.check_site(site)
    proj = embed_site_operator(space, site, spec.level_projector(DOWN))
    state = np.asarray(state)
    if state.ndim == 1:
        value = np.vdot(state, proj @ state).real
    else:
        value = np.einsum("ij,ji->", proj, state).real
    return float(value)


def sample_shots(p: float, shots: int, seed) -> float:
    """Fraction of bright outcomes in ``shots`` projective measurements.

    ``seed`` is anything accepted by ``numpy.random.default_rng``.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if not -1e-9 <= p <= 1 + 1e-9:
        raise ValueError(f"probability {p} outside [0, 1]")
    rng = np.random.default_rng(seed)
    return rng.binomial(shots, min(max(p, 0.0), 1.0)) / shots
