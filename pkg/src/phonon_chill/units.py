"""SI conversion, scenario files and presets.

Frequencies in scenario SI blocks are ordinary frequencies in Hz (``f``);
the corresponding angular frequency is ``2 pi f``.  Internally everything
is divided by omega_k.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from typing import Optional

from scipy import constants as _c

from .cooling import thermal_occupation
from .schemes import (
    ConfigError,
    SchemeConfig,
    SchemeKind,
    asymmetric,
    eit_baseline,
    stark_baseline,
    symmetric,
)

CONSTANTS = {
    "hbar_J_s": _c.hbar,
    "k_B_J_per_K": _c.k,
    "mu_B_J_per_T": _c.physical_constants["Bohr magneton"][0],
    "g_e": 2.0,
    "diamond_density_kg_m3": 3500.0,
}

# SI keys holding frequencies (Hz) that map onto SchemeConfig fields
_FREQ_FIELDS = {
    "Omega_hz": "Omega",
    "Omega_g_hz": "Omega_g",
    "Delta_hz": "Delta",
    "Delta_g_hz": "Delta_g",
    "Delta_plus_hz": "Delta_plus",
    "Delta_minus_hz": "Delta_minus",
}
_SI_KEYS = {
    "scheme", "omega_k_hz", "lambda_hz", "gradient_T_per_m", "mass_kg", "diameter_m",
    "Gamma_hz", "Q", "temperature_K", "fock_dim", "branching", *_FREQ_FIELDS,
}


def sphere_mass(diameter: float, density: float = CONSTANTS["diamond_density_kg_m3"]) -> float:
    if diameter <= 0:
        raise ConfigError("diameter must be positive")
    return density * math.pi * diameter**3 / 6


def zero_point_amplitude(mass: float, omega: float) -> float:
    """z0 = sqrt(hbar / (2 M omega)) for angular frequency omega."""
    if mass <= 0 or omega <= 0:
        raise ConfigError("mass and frequency must be positive")
    return math.sqrt(CONSTANTS["hbar_J_s"] / (2 * mass * omega))


def gradient_coupling(mass: float, omega: float, gradient: float) -> float:
    """Angular spin-phonon coupling lambda = g_e mu_B B' z0 / hbar."""
    z0 = zero_point_amplitude(mass, omega)
    return CONSTANTS["g_e"] * CONSTANTS["mu_B_J_per_T"] * gradient * z0 / CONSTANTS["hbar_J_s"]


def temperature_from_occupation(omega: float, n: float) -> float:
    if n <= 0:
        return 0.0
    return CONSTANTS["hbar_J_s"] * omega / (CONSTANTS["k_B_J_per_K"] * math.log1p(1.0 / n))


@dataclass
class Scenario:
    si: Optional[dict] = None
    dimensionless: Optional[dict] = None
    run: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.si is None) == (self.dimensionless is None):
            raise ConfigError("scenario needs exactly one of the 'si' and 'dimensionless' blocks")

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if not isinstance(data, dict):
            raise ConfigError("scenario must be a JSON object")
        extra = set(data) - {"si", "dimensionless", "run"}
        if extra:
            raise ConfigError(f"unknown scenario blocks: {sorted(extra)}")
        return cls(copy.deepcopy(data.get("si")), copy.deepcopy(data.get("dimensionless")),
                   copy.deepcopy(data.get("run", {})))

    def to_dict(self) -> dict:
        out = {"run": copy.deepcopy(self.run)}
        if self.si is not None:
            out["si"] = copy.deepcopy(self.si)
        else:
            out["dimensionless"] = copy.deepcopy(self.dimensionless)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "Scenario":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    @property
    def omega_k_si(self) -> Optional[float]:
        """Angular trap frequency in rad/s, if the scenario is in SI."""
        return None if self.si is None else 2 * math.pi * float(self.si["omega_k_hz"])

    def config(self) -> SchemeConfig:
        return si_to_internal(self)


def _build(kind: SchemeKind, lam, Omega, Gamma, fields: dict, **kw) -> SchemeConfig:
    if kind is SchemeKind.ASYMMETRIC:
        cfg = asymmetric(lam, Omega, Gamma, Omega_g=fields.get("Omega_g"),
                         Delta_minus=fields.get("Delta_minus"), **kw)
        dp = fields.get("Delta_plus")
        if dp is not None and not math.isclose(dp, cfg.Delta_plus, rel_tol=1e-12, abs_tol=1e-12):
            cfg = cfg.replace(Delta_plus=fields["Delta_plus"], enforce_dark=False)
        return cfg
    if kind is SchemeKind.SYMMETRIC:
        return symmetric(lam, Omega, Gamma, Omega_g=fields.get("Omega_g"),
                         Delta_g=fields.get("Delta_g"), Delta=fields.get("Delta"), **kw)
    if kind is SchemeKind.EIT_BASELINE:
        return eit_baseline(lam, Omega, Gamma, Delta=fields.get("Delta"), **kw)
    return stark_baseline(lam, Omega, Gamma, Omega_g=fields.get("Omega_g"),
                          Delta_g=fields.get("Delta_g"), Delta=fields.get("Delta"), **kw)


def si_to_internal(scenario: Scenario) -> SchemeConfig:
    """SchemeConfig in omega_k units; unspecified drive fields take the scheme's gate values."""
    if scenario.dimensionless is not None:
        try:
            cfg = SchemeConfig.from_dict(scenario.dimensionless)
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"bad dimensionless block: {exc}") from exc
        cfg.validate()
        return cfg
    si = scenario.si
    unknown = set(si) - _SI_KEYS
    if unknown:
        raise ConfigError(f"unknown SI fields: {sorted(unknown)}")
    for key in ("scheme", "omega_k_hz", "Omega_hz", "Gamma_hz"):
        if key not in si:
            raise ConfigError(f"missing SI field '{key}'")
    f_k = float(si["omega_k_hz"])
    if f_k <= 0:
        raise ConfigError("omega_k_hz must be positive")
    w_k = 2 * math.pi * f_k
    if "lambda_hz" in si:
        lam = float(si["lambda_hz"]) / f_k
    elif "gradient_T_per_m" in si:
        if "mass_kg" in si:
            mass = float(si["mass_kg"])
        elif "diameter_m" in si:
            mass = sphere_mass(float(si["diameter_m"]))
        else:
            raise ConfigError("gradient coupling needs 'mass_kg' or 'diameter_m'")
        if mass <= 0:
            raise ConfigError("mass must be positive")
        lam = gradient_coupling(mass, w_k, float(si["gradient_T_per_m"])) / w_k
    else:
        raise ConfigError("missing SI field 'lambda_hz' (or 'gradient_T_per_m' with a mass)")
    q = si.get("Q")
    if q is not None and float(q) <= 0:
        raise ConfigError("Q must be positive")
    gamma_k = 0.0 if q is None else 1.0 / float(q)
    temp = float(si.get("temperature_K", 0.0))
    if temp < 0:
        raise ConfigError("temperature_K must be >= 0")
    n_bath = thermal_occupation(w_k, temp)
    fields = {v: float(si[k]) / f_k for k, v in _FREQ_FIELDS.items() if k in si and k != "Omega_hz"}
    kw = {"gamma_k": gamma_k, "n_thermal": n_bath}
    if "fock_dim" in si:
        kw["fock_dim"] = int(si["fock_dim"])
    if "branching" in si:
        kw["branching"] = tuple(float(x) for x in si["branching"])
    try:
        kind = SchemeKind(si["scheme"])
    except ValueError as exc:
        raise ConfigError(f"unknown scheme '{si['scheme']}'") from exc
    cfg = _build(kind, lam, float(si["Omega_hz"]) / f_k, float(si["Gamma_hz"]) / f_k, fields, **kw)
    cfg.validate()
    return cfg


def internal_to_si(cfg: SchemeConfig, omega_k_hz: float) -> dict:
    """Inverse of ``si_to_internal`` for the fields a SchemeConfig carries."""
    si = {
        "scheme": cfg.kind.value,
        "omega_k_hz": omega_k_hz,
        "lambda_hz": cfg.lam * omega_k_hz,
        "Omega_hz": cfg.Omega * omega_k_hz,
        "Gamma_hz": cfg.Gamma * omega_k_hz,
        "temperature_K": temperature_from_occupation(2 * math.pi * omega_k_hz, cfg.n_thermal),
        "fock_dim": cfg.fock_dim,
    }
    if cfg.gamma_k > 0:
        si["Q"] = 1.0 / cfg.gamma_k
    for key, name in _FREQ_FIELDS.items():
        value = getattr(cfg, name)
        if value is not None and key != "Omega_hz":
            si[key] = value * omega_k_hz
    return si


_PRESETS = {
    "levitated": {
        "si": {
            "scheme": "symmetric", "omega_k_hz": 500e3, "lambda_hz": 50e3, "Omega_hz": 1.5e6,
            "Gamma_hz": 15e6, "Q": 1e10, "temperature_K": 300.0, "fock_dim": 8,
        },
        "run": {"t_final_s": 100e-6, "n0": 1.0, "n_samples": 201},
    },
    "cantilever": {
        "si": {
            "scheme": "asymmetric", "omega_k_hz": 8e6, "lambda_hz": 500e3, "Omega_hz": 40e6,
            "Gamma_hz": 15e6, "Q": 1e6, "temperature_K": 0.02, "fock_dim": 10,
        },
        "run": {"t_final_s": 90e-6, "n0": 1.0, "n_samples": 201},
    },
}


def preset_names() -> list:
    return sorted(_PRESETS)


def preset(name: str) -> Scenario:
    """Fully populated scenario with the scheme's gate-point drive values written out."""
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset '{name}'; available: {', '.join(preset_names())}")
    scen = Scenario.from_dict(_PRESETS[name])
    cfg = si_to_internal(scen)
    f_k = scen.si["omega_k_hz"]
    for key, field_name in _FREQ_FIELDS.items():
        value = getattr(cfg, field_name)
        if value is not None and key not in scen.si:
            scen.si[key] = value * f_k
    return scen


def run_time(scenario: Scenario, override: Optional[float] = None, default: float = 1e3) -> float:
    """Simulation horizon in 1/omega_k; SI scenarios may give ``t_final_s`` in seconds."""
    if override is not None:
        return float(override)
    run = scenario.run
    if "t_final" in run:
        return float(run["t_final"])
    if "t_final_s" in run:
        if scenario.si is None:
            raise ConfigError("'t_final_s' needs an SI block")
        return float(run["t_final_s"]) * scenario.omega_k_si
    return default
