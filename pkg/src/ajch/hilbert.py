"""Composite Hilbert space of an ion chain.

Each site is (internal levels) x (truncated phonon Fock space). Sites are
combined with the Kronecker product, site 0 being the most significant
factor. Within a site the basis index is ``level_index * (fock_cutoff + 1) + n``.

Operators and states are plain numpy arrays: kets are 1-d complex vectors,
density matrices and operators are 2-d complex arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from math import prod
from typing import Sequence

import numpy as np

DOWN = "down"
UP = "up"
AUX_LEVELS = ("e0", "e1", "e2", "e3")

HERMITIAN_ATOL = 1e-10
TRACE_ATOL = 1e-9
POSITIVITY_ATOL = 1e-8


class HilbertSpaceError(ValueError):
    """Invalid site index, level label, Fock number or dimension."""


@dataclass(frozen=True)
class SiteSpec:
    """Levels and phonon cutoff of one ion."""

    internal_levels: tuple[str, ...] = (DOWN, UP)
    fock_cutoff: int = 2

    def __post_init__(self):
        levels = tuple(self.internal_levels)
        object.__setattr__(self, "internal_levels", levels)
        if len(set(levels)) != len(levels):
            raise HilbertSpaceError(f"duplicate level labels in {levels}")
        for required in (DOWN, UP):
            if required not in levels:
                raise HilbertSpaceError(f"site levels {levels} lack {required!r}")
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 2:
            raise HilbertSpaceError(f"fock_cutoff must be an integer >= 2, got {self.fock_cutoff}")
        object.__setattr__(self, "fock_cutoff", int(self.fock_cutoff))

    @property
    def n_levels(self) -> int:
        return len(self.internal_levels)

    @property
    def n_fock(self) -> int:
        return self.fock_cutoff + 1

    @property
    def dim(self) -> int:
        return self.n_levels * self.n_fock

    def level_index(self, level: str) -> int:
        try:
            return self.internal_levels.index(level)
        except ValueError:
            raise HilbertSpaceError(f"unknown level {level!r}; site has {self.internal_levels}") from None

    def index(self, level: str, n: int) -> int:
        """Site-local basis index of ``|level, n>``."""
        if not 0 <= n <= self.fock_cutoff:
            raise HilbertSpaceError(f"phonon number {n} outside 0..{self.fock_cutoff}")
        return self.level_index(level) * self.n_fock + n

    def label(self, index: int) -> tuple[str, int]:
        if not 0 <= index < self.dim:
            raise HilbertSpaceError(f"site index {index} outside 0..{self.dim - 1}")
        lvl, n = divmod(int(index), self.n_fock)
        return self.internal_levels[lvl], n

    def with_levels(self, levels: Sequence[str]) -> "SiteSpec":
        return SiteSpec(tuple(levels), self.fock_cutoff)

    # site operators -----------------------------------------------------

    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)

    def destroy(self) -> np.ndarray:
        """Truncated phonon annihilation operator (no renormalisation at the cutoff)."""
        a = np.diag(np.sqrt(np.arange(1, self.n_fock)), 1).astype(complex)
        return np.kron(np.eye(self.n_levels), a)

    def number(self) -> np.ndarray:
        return np.kron(np.eye(self.n_levels), np.diag(np.arange(self.n_fock))).astype(complex)

    def transition(self, to_level: str, from_level: str) -> np.ndarray:
        """``|to><from|`` on the internal factor, identity on the phonon."""
        t = np.zeros((self.n_levels, self.n_levels), dtype=complex)
        t[self.level_index(to_level), self.level_index(from_level)] = 1.0
        return np.kron(t, np.eye(self.n_fock))

    def sigma_plus(self) -> np.ndarray:
        """``|up><down|``."""
        return self.transition(UP, DOWN)

    def sigma_minus(self) -> np.ndarray:
        return self.transition(DOWN, UP)

    def level_projector(self, level: str) -> np.ndarray:
        return self.transition(level, level)

    def ket(self, level: str, n: int) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(level, n)] = 1.0
        return v


@dataclass(frozen=True)
class CompositeSpace:
    """Tensor product of per-site spaces, site-major ordering."""

    sites: tuple[SiteSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        if not self.sites:
            raise HilbertSpaceError("a composite space needs at least one site")

    @classmethod
    def uniform(cls, n_sites: int, spec: SiteSpec) -> "CompositeSpace":
        return cls((spec,) * n_sites)

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.sites)

    @property
    def dim(self) -> int:
        return prod(self.dims)

    def check_site(self, site: int) -> SiteSpec:
        if not 0 <= site < self.n_sites:
            raise HilbertSpaceError(f"site {site} outside 0..{self.n_sites - 1}")
        return self.sites[site]

    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)


def basis_index(space: CompositeSpace, assignment: Sequence[tuple[str, int]]) -> int:
    """Composite index of the product state ``|level_0, n_0> x |level_1, n_1> x ...``."""
    if len(assignment) != space.n_sites:
        raise HilbertSpaceError(f"expected {space.n_sites} site assignments, got {len(assignment)}")
    idx = 0
    for site, (spec, (level, n)) in enumerate(zip(space.sites, assignment)):
        try:
            local = spec.index(level, n)
        except HilbertSpaceError as exc:
            raise HilbertSpaceError(f"site {site}: {exc}") from None
        idx = idx * spec.dim + local
    return idx


def basis_label(space: CompositeSpace, index: int) -> tuple[tuple[str, int], ...]:
    """Inverse of :func:`basis_index`."""
    if not 0 <= index < space.dim:
        raise HilbertSpaceError(f"index {index} outside 0..{space.dim - 1}")
    locals_ = []
    for spec in reversed(space.sites):
        index, local = divmod(index, spec.dim)
        locals_.append(spec.label(local))
    return tuple(reversed(locals_))


def product_ket(space: CompositeSpace, assignment: Sequence[tuple[str, int]]) -> np.ndarray:
    psi = np.zeros(space.dim, dtype=complex)
    psi[basis_index(space, assignment)] = 1.0
    return psi


def tensor(*factors: np.ndarray) -> np.ndarray:
    return reduce(np.kron, factors)


def embed_site_operator(space: CompositeSpace, site: int, op: np.ndarray) -> np.ndarray:
    """Return ``I x ... x op x ... x I`` with ``op`` acting on ``site``."""
    spec = space.check_site(site)
    op = np.asarray(op, dtype=complex)
    if op.shape != (spec.dim, spec.dim):
        raise HilbertSpaceError(f"operator shape {op.shape} does not match site dimension {spec.dim}")
    left = prod(space.dims[:site])
    right = prod(space.dims[site + 1:])
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


def as_density(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return np.outer(state, state.conj())
    return state


def partial_trace(rho: np.ndarray, space: CompositeSpace, keep_site: int) -> np.ndarray:
    """Reduced density matrix of ``keep_site``. Kets are accepted too."""
    space.check_site(keep_site)
    dims = space.dims
    state = np.asarray(rho, dtype=complex)
    if state.ndim == 1:
        psi = state.reshape(dims)
        psi = np.moveaxis(psi, keep_site, 0).reshape(dims[keep_site], -1)
        return psi @ psi.conj().T
    n = len(dims)
    t = state.reshape(dims + dims)
    t = np.moveaxis(t, (keep_site, n + keep_site), (0, 1))
    d = dims[keep_site]
    rest = t.shape[2: 2 + n - 1]
    t = t.reshape(d, d, prod(rest), prod(rest))
    return np.einsum("abkk->ab", t)


def expectation(op: np.ndarray, state: np.ndarray) -> complex:
    """``<psi|op|psi>`` for a ket, ``Tr(op rho)`` for a density matrix."""
    op = np.asarray(op)
    state = np.asarray(state)
    if op.shape[0] != state.shape[0]:
        raise HilbertSpaceError(f"operator dimension {op.shape[0]} does not match state dimension {state.shape[0]}")
    if state.ndim == 1:
        return complex(np.vdot(state, op @ state))
    return complex(np.einsum("ij,ji->", op, state))


def is_hermitian(op: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    op = np.asarray(op)
    return bool(np.max(np.abs(op - op.conj().T), initial=0.0) <= atol)


def check_density(rho: np.ndarray, *, atol_herm: float = HERMITIAN_ATOL,
                  atol_trace: float = TRACE_ATOL, atol_pos: float = POSITIVITY_ATOL) -> None:
    """Raise ``HilbertSpaceError`` unless ``rho`` is a valid density matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise HilbertSpaceError(f"density matrix must be square, got shape {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > atol_herm:
        raise HilbertSpaceError(f"density matrix not Hermitian (max deviation {herm:.3g})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > atol_trace:
        raise HilbertSpaceError(f"density matrix trace {tr!r} differs from 1")
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lam < -atol_pos:
        raise HilbertSpaceError(f"density matrix has negative eigenvalue {lam:.3g}")


def level_isometry(source: SiteSpec, target: SiteSpec) -> np.ndarray:
    """Inclusion of the ``source`` site basis into ``target`` (same cutoff, more levels)."""
    if source.fock_cutoff != target.fock_cutoff:
        raise HilbertSpaceError("level extension requires equal Fock cutoffs")
    iso = np.zeros((target.dim, source.dim))
    for i in range(source.dim):
        level, n = source.label(i)
        iso[target.index(level, n), i] = 1.0
    return iso


def extend_levels(op: np.ndarray, source: CompositeSpace | SiteSpec,
                  target: CompositeSpace | SiteSpec) -> np.ndarray:
    """Re-express a state or operator in a space with extra internal levels.

    Amplitudes on the added levels are zero.
    """
    if isinstance(source, SiteSpec):
        source, target = CompositeSpace((source,)), CompositeSpace((target,))
    if source.n_sites != target.n_sites:
        raise HilbertSpaceError("level extension requires equal site counts")
    iso = tensor(*(level_isometry(s, t) for s, t in zip(source.sites, target.sites)))
    op = np.asarray(op, dtype=complex)
    if op.ndim == 1:
        return iso @ op
    return iso @ op @ iso.T
