"""Experiment configuration files.

A config is a flat JSON object with a ``schema`` version. Frequencies carry
their unit in the key (``*_hz``, ``*_khz``, ``*_mhz``) and are converted to
rad/s here; numbers are parsed as decimals so that ``7.5`` kHz and ``7500`` Hz
give bit-identical floats. Unknown keys are errors.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from decimal import Decimal
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import constants as C
from .dynamics import NoiseModel, calibrate_dephasing
from .hilbert import AUX_LEVELS, DOWN, UP
from .model import IonChainGeometry, ModelParams, chain_kappa, hopping_matrix, site_shifts

SCHEMA_VERSION = 1
EXPERIMENTS = ("hopping", "blockade", "eigen", "map_check", "leakage")
MEASUREMENT_MODES = ("exact_manifold", "mapped_ideal", "mapped_realistic")
DEFAULT_ETA = 0.06

_UNIT_SCALE = {"hz": Decimal(1), "khz": Decimal(1000), "mhz": Decimal(1000000)}

# frequency quantities: base key -> units accepted
_FREQUENCY_KEYS = {
    "kappa": ("hz", "khz"),
    "g_b": ("hz", "khz"),
    "g_r": ("hz", "khz"),
    "delta": ("hz", "khz"),
    "omega_shift": ("hz", "khz"),
    "omega0_rabi": ("hz", "khz", "mhz"),
    "trap_frequencies": ("hz", "khz", "mhz"),
}

_PLAIN_KEYS = {
    "schema", "experiment", "n_sites", "fock_cutoff", "kappa_from_geometry", "ion_mass_amu",
    "radial_axis", "eta", "dephasing_rate_per_s", "dephasing_contrast", "dephasing_contrast_time_s",
    "heating_rate_quanta_per_s", "rabi_drift_fraction", "prep_infidelity", "nbar", "initial_state",
    "prep_pulses", "t_start_s", "t_stop_s", "t_step_s", "shots", "seed", "measurement_mode",
    "hopping_during_pulses", "drift_levels", "leakage_duration_s", "description",
}


class ConfigError(ValueError):
    """Every problem found in a config, one per entry of ``problems``."""

    def __init__(self, problems: list[str]):
        super().__init__("invalid config:\n  " + "\n  ".join(problems))
        self.problems = problems


def _to_float(value) -> Any:
    if isinstance(value, list):
        return [_to_float(v) for v in value]
    if isinstance(value, (Decimal, int)) and not isinstance(value, bool):
        return float(value)
    return value


def _angular(value, unit: str):
    """Ordinary frequency in ``unit`` -> angular frequency in rad/s."""
    scale = _UNIT_SCALE[unit]
    if isinstance(value, list):
        return [_angular(v, unit) for v in value]
    return C.TWO_PI * float(Decimal(str(value)) * scale)


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment description; frequencies in rad/s, times in s."""

    experiment: str
    n_sites: int = 2
    fock_cutoff: int = 4
    kappa: Any = None  # scalar nearest-neighbour rate or full matrix
    kappa_from_geometry: bool = False
    trap_frequencies: Optional[tuple[float, float, float]] = None
    ion_mass_amu: float = 40.0
    radial_axis: str = "y"
    g_b: float = 0.0
    g_r: float = 0.0
    delta: Any = 0.0
    omega_shift: Any = None
    eta: float = DEFAULT_ETA
    omega0_rabi: Optional[float] = None
    dephasing_rate_per_s: Any = 0.0
    dephasing_contrast: Optional[float] = None
    dephasing_contrast_time_s: Optional[float] = None
    heating_rate_quanta_per_s: float = 0.0
    rabi_drift_fraction: float = 0.0
    prep_infidelity: float = 0.0
    nbar: float = 0.0
    initial_state: Any = "thermal"
    prep_pulses: Optional[tuple[dict, ...]] = None
    t_start_s: float = 0.0
    t_stop_s: float = 1e-3
    t_step_s: float = 1e-5
    shots: int = 0
    seed: int = 0
    measurement_mode: str = "exact_manifold"
    hopping_during_pulses: bool = False
    drift_levels: int = 8
    leakage_duration_s: Optional[float] = None
    description: str = ""

    # derived objects ------------------------------------------------------

    def kappa_matrix(self) -> np.ndarray:
        if self.kappa_from_geometry:
            geom = IonChainGeometry(tuple(self.trap_frequencies), self.ion_mass_amu * C.ATOMIC_MASS_UNIT,
                                    radial_reference=self.radial_axis)
            return hopping_matrix(geom.with_equilibrium(self.n_sites))
        if self.kappa is None:
            return np.zeros((self.n_sites, self.n_sites))
        k = np.asarray(self.kappa, dtype=float)
        return chain_kappa(self.n_sites, float(k)) if k.ndim == 0 else k

    def model_params(self) -> ModelParams:
        kappa = self.kappa_matrix()
        shift = site_shifts(kappa) if self.omega_shift is None else self.omega_shift
        omega0 = self.omega0_rabi
        if omega0 is None and self.eta:
            omega0 = 2 * self.g_b / self.eta if self.g_b > 0 else None
        return ModelParams(n_sites=self.n_sites, omega_shift=shift, delta=self.delta, g_b=self.g_b,
                           kappa=kappa, fock_cutoff=self.fock_cutoff, g_r=self.g_r,
                           eta=self.eta if omega0 is not None else None, omega0_rabi=omega0)

    def dephasing_rates(self) -> np.ndarray:
        if self.dephasing_contrast is not None:
            gamma = calibrate_dephasing(self.dephasing_contrast, self.dephasing_contrast_time_s, self.g_b)
            return np.full(self.n_sites, gamma)
        return np.broadcast_to(np.asarray(self.dephasing_rate_per_s, dtype=float), (self.n_sites,)).copy()

    def noise_model(self) -> NoiseModel:
        return NoiseModel(dephasing_rates=tuple(self.dephasing_rates()),
                          heating_rate=self.heating_rate_quanta_per_s,
                          rabi_drift_fraction=self.rabi_drift_fraction,
                          prep_infidelity=self.prep_infidelity)

    def time_grid(self) -> np.ndarray:
        n = int(round((self.t_stop_s - self.t_start_s) / self.t_step_s)) + 1
        return self.t_start_s + self.t_step_s * np.arange(n)

    def resolved_prep_pulses(self) -> tuple[dict, ...]:
        if self.prep_pulses is not None:
            return self.prep_pulses
        if self.experiment == "hopping" and self.initial_state == "thermal":
            return ({"kind": "carrier", "ion": 1},)
        return ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["prep_pulses"] = list(self.resolved_prep_pulses())
        d["schema"] = SCHEMA_VERSION
        d["units"] = "angular frequencies in rad/s, times in s"
        return d

    # parsing --------------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        problems: list[str] = []
        values: dict[str, Any] = {}
        seen_freq: dict[str, str] = {}

        for key, value in raw.items():
            base, _, unit = key.rpartition("_")
            if base in _FREQUENCY_KEYS and unit in _UNIT_SCALE:
                if unit not in _FREQUENCY_KEYS[base]:
                    problems.append(f"{key}: unit {unit!r} not accepted for {base}")
                elif base in seen_freq:
                    problems.append(f"{key}: {base} already given as {seen_freq[base]}")
                else:
                    seen_freq[base] = key
                    try:
                        values[base] = _angular(value, unit)
                    except (ArithmeticError, TypeError, ValueError):
                        problems.append(f"{key}: not a number or list of numbers: {value!r}")
            elif key in _PLAIN_KEYS:
                values[key] = _to_float(value) if key not in ("n_sites", "fock_cutoff", "shots", "seed",
                                                              "drift_levels", "schema") else value
            else:
                problems.append(f"{key}: unknown key")

        schema = values.pop("schema", None)
        if schema != SCHEMA_VERSION:
            problems.append(f"schema: expected {SCHEMA_VERSION}, got {schema!r}")
        values.pop("description", None)
        if "experiment" not in values:
            problems.append("experiment: missing")
        elif values["experiment"] not in EXPERIMENTS:
            problems.append(f"experiment: {values['experiment']!r} not in {EXPERIMENTS}")

        if "trap_frequencies" in values:
            values["trap_frequencies"] = tuple(values["trap_frequencies"])
        if "prep_pulses" in values and values["prep_pulses"] is not None:
            values["prep_pulses"] = tuple(dict(p) for p in values["prep_pulses"])
        if problems:
            raise ConfigError(problems)
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        p: list[str] = []
        for name in ("n_sites", "fock_cutoff", "shots", "seed", "drift_levels"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                p.append(f"{name}: must be an integer, got {v!r}")
        if isinstance(self.n_sites, int) and self.n_sites < 1:
            p.append("n_sites: must be >= 1")
        if isinstance(self.fock_cutoff, int) and self.fock_cutoff < 2:
            p.append("fock_cutoff: must be >= 2")
        if isinstance(self.shots, int) and self.shots < 0:
            p.append("shots: must be >= 0")
        if isinstance(self.seed, int) and not 0 <= self.seed < 2**64:
            p.append("seed: must be a 64-bit unsigned integer")
        if isinstance(self.drift_levels, int) and self.drift_levels < 1:
            p.append("drift_levels: must be >= 1")
        if not self.t_stop_s > self.t_start_s:
            p.append("t_stop_s: must exceed t_start_s")
        if not self.t_step_s > 0:
            p.append("t_step_s: must be positive")
        if self.t_start_s < 0:
            p.append("t_start_s: must be non-negative")
        for name in ("g_b", "g_r", "heating_rate_quanta_per_s", "nbar", "eta"):
            if getattr(self, name) < 0:
                p.append(f"{name}: must be non-negative")
        for name in ("kappa", "delta", "dephasing_rate_per_s"):
            v = getattr(self, name)
            if v is not None and np.any(np.asarray(v, dtype=float) < 0):
                p.append(f"{name}: must be non-negative")
        if not 0 <= self.rabi_drift_fraction < 1:
            p.append("rabi_drift_fraction: must lie in [0, 1)")
        if not 0 <= self.prep_infidelity <= 1:
            p.append("prep_infidelity: must lie in [0, 1]")
        if self.measurement_mode not in MEASUREMENT_MODES:
            p.append(f"measurement_mode: {self.measurement_mode!r} not in {MEASUREMENT_MODES}")
        if self.kappa_from_geometry:
            if self.trap_frequencies is None or len(self.trap_frequencies) != 3:
                p.append("trap_frequencies: three values required with kappa_from_geometry")
            if self.kappa is not None:
                p.append("kappa: give either kappa or kappa_from_geometry, not both")
        if (self.dephasing_contrast is None) != (self.dephasing_contrast_time_s is None):
            p.append("dephasing_contrast: needs dephasing_contrast_time_s (and vice versa)")
        if self.dephasing_contrast is not None:
            if not 0 < self.dephasing_contrast < 1:
                p.append("dephasing_contrast: must lie in (0, 1)")
            if np.any(np.asarray(self.dephasing_rate_per_s, dtype=float) != 0):
                p.append("dephasing_rate_per_s: conflicts with dephasing_contrast")
            if self.g_b <= 0:
                p.append("dephasing_contrast: calibration needs g_b > 0")
        if isinstance(self.initial_state, list):
            if len(self.initial_state) != self.n_sites:
                p.append(f"initial_state: expected {self.n_sites} entries")
            for entry in self.initial_state:
                if (not isinstance(entry, list) or len(entry) != 2
                        or entry[0] not in (DOWN, UP) + AUX_LEVELS or not float(entry[1]).is_integer()):
                    p.append(f"initial_state: bad entry {entry!r}; use [level, n]")
        elif self.initial_state != "thermal":
            p.append("initial_state: must be 'thermal' or a list of [level, n]")
        for pulse in self.resolved_prep_pulses():
            if pulse.get("kind") not in ("carrier", "blue_sideband", "red_sideband"):
                p.append(f"prep_pulses: unsupported kind in {pulse!r}")
            ion = pulse.get("ion")
            if not isinstance(ion, (int, float)) or not 1 <= ion <= self.n_sites:
                p.append(f"prep_pulses: ion must be in 1..{self.n_sites} in {pulse!r}")
            extra = set(pulse) - {"kind", "ion", "angle_pi", "phase"}
            if extra:
                p.append(f"prep_pulses: unknown fields {sorted(extra)}")
        if self.experiment in ("hopping", "blockade") and self.g_b <= 0 and self.kappa is None \
                and not self.kappa_from_geometry:
            p.append("g_b/kappa: a dynamics experiment needs a coupling or a hopping rate")
        if p:
            raise ConfigError(p)


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        raw = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: not valid JSON ({exc})"]) from None
    if not isinstance(raw, dict):
        raise ConfigError([f"{path}: top level must be an object"])
    return ExperimentConfig.from_dict(raw)
