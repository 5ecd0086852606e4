"""Ion-chain parameters and the JC, anti-JC and anti-JCH Hamiltonians.

All frequencies are angular (rad/s); hbar = 1 so Hamiltonians are in rad/s.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import pi
from typing import Optional, Sequence

import numpy as np

from . import constants as C
from .hilbert import DOWN, UP, CompositeSpace, SiteSpec, embed_site_operator


class ModelError(ValueError):
    """Inconsistent or unphysical model parameters."""


class ConvergenceError(ArithmeticError):
    """An iterative solver failed to meet its tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3g})")
        self.residual = residual


# geometry ----------------------------------------------------------------

_RADIAL_AXIS = {"x": 0, "y": 1}


@dataclass(frozen=True)
class IonChainGeometry:
    """Trap and species data for a linear chain.

    ``trap_frequencies`` are angular frequencies ``(w_x, w_y, w_z)``.
    ``positions`` are axial coordinates in metres; when omitted they can be
    filled in with :meth:`with_equilibrium`.
    """

    trap_frequencies: tuple[float, float, float]
    ion_mass: float = C.CA40_MASS
    ion_charge: float = C.ELEMENTARY_CHARGE
    positions: Optional[tuple[float, ...]] = None
    radial_reference: str = "y"

    def __post_init__(self):
        wx, wy, wz = self.trap_frequencies
        if min(wx, wy, wz) <= 0:
            raise ModelError("trap frequencies must be positive")
        if not (wz < wx and wz < wy):
            raise ModelError("axial frequency must be below both radial frequencies for a linear chain")
        if self.radial_reference not in _RADIAL_AXIS:
            raise ModelError(f"radial_reference must be 'x' or 'y', got {self.radial_reference!r}")
        if self.positions is not None:
            pos = tuple(float(p) for p in self.positions)
            if any(b <= a for a, b in zip(pos, pos[1:])):
                raise ModelError("ion positions must be strictly increasing")
            object.__setattr__(self, "positions", pos)

    @property
    def omega_axial(self) -> float:
        return self.trap_frequencies[2]

    @property
    def omega_radial(self) -> float:
        return self.trap_frequencies[_RADIAL_AXIS[self.radial_reference]]

    @property
    def length_scale(self) -> float:
        """``(q^2 / (4 pi eps0 m w_z^2))^(1/3)``, the natural axial length."""
        k = self.ion_charge**2 / (4 * pi * C.VACUUM_PERMITTIVITY)
        return (k / (self.ion_mass * self.omega_axial**2)) ** (1 / 3)

    def with_equilibrium(self, n_ions: int) -> "IonChainGeometry":
        pos = equilibrium_positions(n_ions, self)
        return IonChainGeometry(self.trap_frequencies, self.ion_mass, self.ion_charge,
                                tuple(pos), self.radial_reference)


def two_ion_spacing(geometry: IonChainGeometry) -> float:
    """Closed-form separation of two ions, ``(q^2 / (2 pi eps0 m w_z^2))^(1/3)``."""
    k = geometry.ion_charge**2 / (2 * pi * C.VACUUM_PERMITTIVITY)
    return (k / (geometry.ion_mass * geometry.omega_axial**2)) ** (1 / 3)


def _axial_force(u: np.ndarray) -> np.ndarray:
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    return -u + np.sum(np.sign(diff) / diff**2, axis=1)


def _axial_jacobian(u: np.ndarray) -> np.ndarray:
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    coupling = 2.0 / np.abs(diff) ** 3
    jac = coupling.copy()
    np.fill_diagonal(jac, -1.0 - coupling.sum(axis=1))
    return jac


def equilibrium_positions(n_ions: int, geometry: IonChainGeometry,
                          force_tol: float = 1e-20, max_iter: int = 200) -> np.ndarray:
    """Axial equilibrium positions (metres) of ``n_ions`` in a harmonic trap.

    Damped Newton iteration on the dimensionless force balance
    ``u_i = sum_j sign(u_i - u_j) / (u_i - u_j)^2``, seeded with the
    two-ion closed-form spacing. Raises :class:`ConvergenceError` if the
    largest residual force does not drop below ``force_tol`` newtons.
    """
    if n_ions < 1:
        raise ModelError("n_ions must be >= 1")
    if n_ions == 1:
        return np.zeros(1)
    ell = geometry.length_scale
    force_unit = geometry.ion_mass * geometry.omega_axial**2 * ell
    spacing = two_ion_spacing(geometry) / ell
    if n_ions > 2:
        # empirical N^-0.56 contraction of the central spacing
        spacing *= (n_ions / 2) ** -0.559
    u = spacing * (np.arange(n_ions) - (n_ions - 1) / 2)

    residual = np.max(np.abs(_axial_force(u)))
    for _ in range(max_iter):
        if residual * force_unit < force_tol and residual < 1e-12:
            break
        step = np.linalg.solve(_axial_jacobian(u), -_axial_force(u))
        lam = 1.0
        while lam > 1e-8:
            trial = u + lam * step
            if np.all(np.diff(trial) > 0):
                r = np.max(np.abs(_axial_force(trial)))
                if r < residual or r * force_unit < force_tol:
                    break
            lam *= 0.5
        else:
            raise ConvergenceError("equilibrium search stalled", residual * force_unit)
        u, residual = trial, r
    else:
        raise ConvergenceError("equilibrium search did not converge", residual * force_unit)
    return u * ell


def hopping_matrix(geometry: IonChainGeometry) -> np.ndarray:
    """Coulomb hopping rates ``kappa_ij = q^2 / (4 pi eps0 m d_ij^3 w_r)`` in rad/s."""
    if geometry.positions is None:
        raise ModelError("geometry has no ion positions; call with_equilibrium first")
    pos = np.asarray(geometry.positions)
    d = np.abs(pos[:, None] - pos[None, :])
    off = ~np.eye(len(pos), dtype=bool)
    if np.any(d[off] == 0):
        raise ModelError("coincident ion positions")
    k = geometry.ion_charge**2 / (4 * pi * C.VACUUM_PERMITTIVITY)
    kappa = np.zeros_like(d)
    kappa[off] = k / (geometry.ion_mass * d[off] ** 3 * geometry.omega_radial)
    return kappa


def site_shifts(kappa: np.ndarray) -> np.ndarray:
    """Position-dependent secular shifts ``w_i = -sum_{j != i} kappa_ij / 2``."""
    kappa = np.asarray(kappa, dtype=float)
    if kappa.ndim != 2 or kappa.shape[0] != kappa.shape[1]:
        raise ModelError(f"kappa must be square, got shape {kappa.shape}")
    off = kappa - np.diag(np.diag(kappa))
    return -0.5 * off.sum(axis=1)


def chain_kappa(n_sites: int, nearest_neighbour: float) -> np.ndarray:
    """Hopping matrix for an equally spaced chain with cubic fall-off."""
    idx = np.arange(n_sites)
    dist = np.abs(idx[:, None] - idx[None, :]).astype(float)
    kappa = np.zeros((n_sites, n_sites))
    off = dist > 0
    kappa[off] = nearest_neighbour / dist[off] ** 3
    return kappa


# parameters --------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Parameters of the anti-JCH Hamiltonian, all in rad/s.

    Use :meth:`from_kappa` to derive ``omega_shift`` from the hopping matrix.
    """

    n_sites: int
    omega_shift: np.ndarray
    delta: np.ndarray
    g_b: float
    kappa: np.ndarray
    fock_cutoff: int
    g_r: float = 0.0
    eta: Optional[float] = None
    omega0_rabi: Optional[float] = None

    def __post_init__(self):
        n = self.n_sites
        if n < 1:
            raise ModelError("n_sites must be >= 1")
        for name in ("omega_shift", "delta"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (n,)).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        kappa = np.asarray(self.kappa, dtype=float)
        if kappa.shape == ():
            kappa = chain_kappa(n, float(kappa))
        if kappa.shape != (n, n):
            raise ModelError(f"kappa must be {n}x{n}, got {kappa.shape}")
        if not np.allclose(kappa, kappa.T, rtol=0, atol=1e-12 * max(1.0, np.abs(kappa).max())):
            raise ModelError("kappa must be symmetric")
        if np.any(np.diag(kappa) != 0):
            raise ModelError("kappa must have zero diagonal")
        if np.any(kappa < 0):
            raise ModelError("kappa entries must be non-negative")
        kappa = kappa.copy()
        kappa.setflags(write=False)
        object.__setattr__(self, "kappa", kappa)
        if self.g_b < 0 or self.g_r < 0:
            raise ModelError("couplings must be non-negative")
        if self.eta is not None and self.omega0_rabi is not None:
            expected = self.eta * self.omega0_rabi / 2
            if not np.isclose(self.g_b, expected, rtol=1e-9, atol=0):
                raise ModelError(f"g_b={self.g_b} inconsistent with eta*omega0/2={expected}")

    @classmethod
    def from_kappa(cls, kappa, g_b: float, fock_cutoff: int, *, n_sites: Optional[int] = None,
                   delta=0.0, **kwargs) -> "ModelParams":
        """Build parameters with ``omega_shift`` taken from :func:`site_shifts`."""
        kappa = np.asarray(kappa, dtype=float)
        if kappa.ndim == 0:
            if n_sites is None:
                raise ModelError("n_sites is required with a scalar kappa")
            kappa = chain_kappa(n_sites, float(kappa))
        return cls(n_sites=kappa.shape[0], omega_shift=site_shifts(kappa), delta=delta,
                   g_b=g_b, kappa=kappa, fock_cutoff=fock_cutoff, **kwargs)

    def replace(self, **changes) -> "ModelParams":
        fields = dict(n_sites=self.n_sites, omega_shift=self.omega_shift, delta=self.delta,
                      g_b=self.g_b, kappa=self.kappa, fock_cutoff=self.fock_cutoff,
                      g_r=self.g_r, eta=self.eta, omega0_rabi=self.omega0_rabi)
        fields.update(changes)
        return ModelParams(**fields)

    def scaled_drive(self, factor: float) -> "ModelParams":
        """Same model with the laser Rabi frequency (and hence g_b) scaled by ``factor``."""
        omega0 = None if self.omega0_rabi is None else self.omega0_rabi * factor
        return self.replace(g_b=self.g_b * factor, omega0_rabi=omega0)

    def site_spec(self, levels: Sequence[str] = (DOWN, UP)) -> SiteSpec:
        return SiteSpec(tuple(levels), self.fock_cutoff)

    def space(self, levels: Sequence[str] = (DOWN, UP)) -> CompositeSpace:
        return CompositeSpace.uniform(self.n_sites, self.site_spec(levels))


def two_ion_params(fock_cutoff: int = 4, kappa_hz: float = 2e3, two_g_b_hz: float = 15e3,
                 eta: Optional[float] = None) -> ModelParams:
    """Two-ion parameters with ``(kappa_12, 2 g_b) / 2pi`` given in Hz."""
    g_b = C.TWO_PI * two_g_b_hz / 2
    extra = {}
    if eta is not None:
        extra = dict(eta=eta, omega0_rabi=2 * g_b / eta)
    return ModelParams.from_kappa(C.TWO_PI * kappa_hz, g_b, fock_cutoff, n_sites=2, **extra)


# Hamiltonians ------------------------------------------------------------

def _require_qubit(spec: SiteSpec) -> None:
    for level in (DOWN, UP):
        if level not in spec.internal_levels:
            raise ModelError(f"site lacks level {level!r}")


def build_jc(omega: float, delta_jc: float, g_r: float, spec: SiteSpec) -> np.ndarray:
    """Single-site JC Hamiltonian ``w a+a + (w + D) s+s- + g_r (a s+ + a+ s-)``."""
    _require_qubit(spec)
    a = spec.destroy()
    sp, sm = spec.sigma_plus(), spec.sigma_minus()
    h = omega * spec.number() + (omega + delta_jc) * (sp @ sm) + g_r * (a @ sp + a.conj().T @ sm)
    return h


def build_ajc(omega: float, delta_ajc: float, g_b: float, spec: SiteSpec) -> np.ndarray:
    """Single-site anti-JC Hamiltonian ``w a+a + (w + D) s-s+ + g_b (a s- + a+ s+)``."""
    _require_qubit(spec)
    a = spec.destroy()
    sp, sm = spec.sigma_plus(), spec.sigma_minus()
    h = omega * spec.number() + (omega + delta_ajc) * (sm @ sp) + g_b * (a @ sm + a.conj().T @ sp)
    return h


def hopping_hamiltonian(params: ModelParams, space: CompositeSpace) -> np.ndarray:
    """Phonon part of the anti-JCH Hamiltonian: site shifts plus hopping."""
    _check_space(params, space)
    h = np.zeros((space.dim, space.dim), dtype=complex)
    a = [embed_site_operator(space, i, s.destroy()) for i, s in enumerate(space.sites)]
    for i in range(space.n_sites):
        h += params.omega_shift[i] * (a[i].conj().T @ a[i])
        for j in range(i + 1, space.n_sites):
            if params.kappa[i, j]:
                hop = a[i].conj().T @ a[j]
                h += 0.5 * params.kappa[i, j] * (hop + hop.conj().T)
    return h


def build_ajch(params: ModelParams, space: CompositeSpace) -> np.ndarray:
    """Anti-JCH Hamiltonian of the chain.

    ``sum_i w_i a_i+a_i + sum_i d_i s_i-s_i+ + g_b sum_i (a_i s_i- + a_i+ s_i+)
    + sum_{i<j} (kappa_ij/2)(a_i+ a_j + a_j+ a_i)``
    """
    h = hopping_hamiltonian(params, space)
    for i, spec in enumerate(space.sites):
        _require_qubit(spec)
        a = spec.destroy()
        sp, sm = spec.sigma_plus(), spec.sigma_minus()
        local = params.delta[i] * (sm @ sp) + params.g_b * (a @ sm + a.conj().T @ sp)
        h += embed_site_operator(space, i, local)
    return h


def drive_hamiltonian(params: ModelParams, space: CompositeSpace) -> np.ndarray:
    """On-site anti-JC terms only (no phonon shifts or hopping)."""
    return build_ajch(params, space) - hopping_hamiltonian(params, space)


def _check_space(params: ModelParams, space: CompositeSpace) -> None:
    if space.n_sites != params.n_sites:
        raise ModelError(f"space has {space.n_sites} sites, params describe {params.n_sites}")
