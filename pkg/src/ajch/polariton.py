"""Polariton algebra of the resonant anti-JC ladder.

The ``l``-polariton manifold of a site is ``span{|up, l>, |down, l-1>}``
(``span{|up, 0>}`` for ``l = 0``). Branch ``"+"`` carries the ``+sqrt(l) g_b``
eigenvalue.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt
from typing import Optional

import numpy as np

from .hilbert import DOWN, UP, CompositeSpace, HilbertSpaceError, SiteSpec, embed_site_operator

BRANCHES = ("+", "-")


class PolaritonError(ValueError):
    pass


@dataclass(frozen=True)
class PolaritonLabel:
    l: int
    branch: Optional[str] = None

    def __post_init__(self):
        if self.l < 0:
            raise PolaritonError(f"polariton number must be >= 0, got {self.l}")
        if self.l == 0 and self.branch is not None:
            raise PolaritonError("the l=0 state has no branch")
        if self.l > 0 and self.branch not in BRANCHES:
            raise PolaritonError(f"l={self.l} needs a branch in {BRANCHES}, got {self.branch!r}")

    @property
    def sign(self) -> int:
        return 0 if self.branch is None else (1 if self.branch == "+" else -1)


def _sign(branch: str) -> int:
    if branch not in BRANCHES:
        raise PolaritonError(f"branch must be '+' or '-', got {branch!r}")
    return 1 if branch == "+" else -1


def polariton_state(label: PolaritonLabel, spec: SiteSpec) -> np.ndarray:
    """Site ket ``|l+->``; ``|0> = |up, 0>``."""
    if label.l > spec.fock_cutoff:
        raise PolaritonError(f"l={label.l} exceeds Fock cutoff {spec.fock_cutoff}")
    if label.l == 0:
        return spec.ket(UP, 0)
    return (spec.ket(UP, label.l) + label.sign * spec.ket(DOWN, label.l - 1)) / sqrt(2)


def polariton_energy(label: PolaritonLabel, omega: float, g_b: float) -> float:
    """``E = l w +- sqrt(l) g_b``, zero for ``l = 0``."""
    if label.l == 0:
        return 0.0
    return label.l * omega + label.sign * sqrt(label.l) * g_b


def pair_energy(k: PolaritonLabel, l: PolaritonLabel, omega: float, g_b: float) -> float:
    """Energy of ``|k, l>`` on two uncoupled sites; both labels must share a branch."""
    if k.branch is not None and l.branch is not None and k.branch != l.branch:
        raise PolaritonError(f"mixed branches {k.branch!r} and {l.branch!r}")
    return polariton_energy(k, omega, g_b) + polariton_energy(l, omega, g_b)


def blockade_gap(g_b: float, branch: str) -> float:
    """``(E_2 + E_0) - 2 E_1 = -+(2 - sqrt 2) g_b`` for the given branch."""
    return -_sign(branch) * (2 - sqrt(2)) * g_b


def ladder_gap(l: int, branch: str, omega: float, g_b: float) -> float:
    """``E_l - E_{l-1} = w +- (sqrt l - sqrt(l-1)) g_b`` for ``l >= 1``."""
    if l < 1:
        raise PolaritonError(f"ladder gap needs l >= 1, got {l}")
    return omega + _sign(branch) * (sqrt(l) - sqrt(l - 1)) * g_b


def site_polariton_number(spec: SiteSpec) -> np.ndarray:
    """``a+a + s-s+``: ``n + [level == down]``. Auxiliary levels count phonons only."""
    return spec.number() + spec.level_projector(DOWN)


def polariton_number_operator(space: CompositeSpace, site: int) -> np.ndarray:
    spec = space.check_site(site)
    return embed_site_operator(space, site, site_polariton_number(spec))


def total_polariton_number(space: CompositeSpace) -> np.ndarray:
    return sum(polariton_number_operator(space, i) for i in range(space.n_sites))


def manifold_indices(spec: SiteSpec, l: int) -> list[int]:
    """Site basis indices spanning the ``l``-polariton manifold."""
    if not 0 <= l <= spec.fock_cutoff:
        raise PolaritonError(f"manifold l={l} outside 0..{spec.fock_cutoff}")
    if l == 0:
        return [spec.index(UP, 0)]
    return [spec.index(UP, l), spec.index(DOWN, l - 1)]


def manifold_projector(spec: SiteSpec, l: int) -> np.ndarray:
    proj = np.zeros((spec.dim, spec.dim), dtype=complex)
    for i in manifold_indices(spec, l):
        proj[i, i] = 1.0
    return proj


def manifold_population(rho_site: np.ndarray, spec: SiteSpec, l: int) -> float:
    """Population of the ``l``-polariton manifold from a reduced site state.

    At ``l = fock_cutoff`` the value is truncation-affected (``|up, l+1>`` is
    missing from the space); see :func:`is_truncation_affected`.
    """
    rho_site = np.asarray(rho_site)
    if rho_site.shape != (spec.dim, spec.dim):
        raise HilbertSpaceError(f"reduced state shape {rho_site.shape} does not match site dimension {spec.dim}")
    return float(sum(rho_site[i, i].real for i in manifold_indices(spec, l)))


def is_truncation_affected(spec: SiteSpec, l: int) -> bool:
    return l >= spec.fock_cutoff


def residual_projector(spec: SiteSpec) -> np.ndarray:
    """Projector onto everything outside the polariton manifolds 0..n_max.

    That is the auxiliary levels plus ``|down, n_max>``, whose partner
    ``|up, n_max + 1>`` lies beyond the cutoff.
    """
    total = sum(manifold_projector(spec, l) for l in range(spec.fock_cutoff + 1))
    return np.eye(spec.dim) - total
