"""Model parameters: physical input set, dimensionless working set, derived quantities.

All dynamics in this package run in units where time is measured in cavity
lifetimes (``t' = kappa * t``).  :class:`PhysicalParams` exists only at the
ingestion boundary; everything downstream consumes :class:`SystemParams`.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import math
from dataclasses import dataclass
from typing import Any, Mapping

from scipy.constants import hbar, k as k_B

from .errors import ParameterError

__all__ = [
    "Bath",
    "PhysicalParams",
    "SystemParams",
    "NormalModes",
    "nondimensionalize",
    "thermal_occupancy",
    "normal_modes",
    "coupling_g",
]


class Bath(str, enum.Enum):
    """Mechanical dissipation topology."""

    SEPARATE = "sb"
    COMMON = "cb"

    @classmethod
    def parse(cls, value: "Bath | str") -> "Bath":
        if isinstance(value, Bath):
            return value
        key = str(value).strip().lower()
        aliases = {
            "sb": cls.SEPARATE, "separate": cls.SEPARATE, "separatebaths": cls.SEPARATE,
            "cb": cls.COMMON, "common": cls.COMMON, "commonbath": cls.COMMON,
        }
        try:
            return aliases[key.replace("_", "").replace("-", "")]
        except KeyError:
            raise ParameterError(f"unknown bath kind {value!r} (expected 'sb' or 'cb')") from None


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional device parameters (SI units, angular frequencies in rad/s)."""

    m: float
    omega_m1: float
    omega_m2: float
    kappa: float
    gamma: float
    k: float
    Delta0: float
    P_in: float
    omega_c: float
    omega_L: float
    L_om: float
    T: float
    bath: Bath = Bath.SEPARATE

    def __post_init__(self):
        positive = ("m", "omega_m1", "omega_m2", "kappa", "gamma", "omega_c", "omega_L", "L_om")
        for name in positive:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be finite and > 0, got {value!r}")
        for name in ("k", "P_in", "T"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ParameterError(f"{name} must be finite and >= 0, got {value!r}")
        if not math.isfinite(self.Delta0):
            raise ParameterError("Delta0 must be finite")
        object.__setattr__(self, "bath", Bath.parse(self.bath))


@dataclass(frozen=True)
class SystemParams:
    """Dimensionless parameter set (frequencies and rates in units of kappa).

    ``gamma`` is the mechanical energy damping rate, ``kc`` the spring coupling
    ``k/(m kappa^2)``, ``power`` the drive strength and ``n_th`` the bath
    phonon occupancy.
    """

    omega_m1: float
    omega_m2: float
    gamma: float
    kc: float
    delta0: float
    power: float
    n_th: float = 0.0
    bath: Bath = Bath.SEPARATE

    def __post_init__(self):
        for name in ("omega_m1", "omega_m2", "gamma"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be finite and > 0, got {value!r}")
        for name in ("kc", "power", "n_th"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ParameterError(f"{name} must be finite and >= 0, got {value!r}")
        if not math.isfinite(self.delta0):
            raise ParameterError("delta0 must be finite")
        object.__setattr__(self, "bath", Bath.parse(self.bath))

    @classmethod
    def identical(cls, omega_m: float, **kwargs) -> "SystemParams":
        """Two units sharing the mechanical frequency ``omega_m``."""
        return cls(omega_m1=omega_m, omega_m2=omega_m, **kwargs)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "SystemParams":
        """Build from a flat key-value mapping; unknown keys are errors.

        ``omega_m`` may stand in for both mechanical frequencies.
        """
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        if "omega_m" in data:
            omega = data.pop("omega_m")
            data.setdefault("omega_m1", omega)
            data.setdefault("omega_m2", omega)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ParameterError(f"unknown parameter keys: {', '.join(unknown)}")
        missing = sorted(f.name for f in dataclasses.fields(cls)
                         if f.name not in data and f.default is dataclasses.MISSING)
        if missing:
            raise ParameterError(f"missing parameter keys: {', '.join(missing)}")
        try:
            values = {k: (v if k == "bath" else float(v)) for k, v in data.items()}
        except (TypeError, ValueError) as exc:
            raise ParameterError(f"non-numeric parameter value: {exc}") from None
        return cls(**values)

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["bath"] = self.bath.value
        return out

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    @property
    def is_identical(self) -> bool:
        return self.omega_m1 == self.omega_m2

    @property
    def omega_m(self) -> float:
        """Common mechanical frequency; only defined for identical units."""
        if not self.is_identical:
            raise ParameterError(
                f"units are detuned (omega_m1={self.omega_m1}, omega_m2={self.omega_m2})")
        return self.omega_m1

    @property
    def delta_omega(self) -> float:
        return self.omega_m2 - self.omega_m1

    @property
    def q_m(self) -> float:
        """Mechanical quality factor of unit 1."""
        return self.omega_m1 / self.gamma

    def digest(self) -> str:
        """Short stable hash of the parameter values."""
        text = repr(sorted(self.as_dict().items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class NormalModes:
    omega_plus: float
    omega_minus: float

    @property
    def omega_bar(self) -> float:
        return 0.5 * (self.omega_plus + self.omega_minus)

    @property
    def splitting(self) -> float:
        return self.omega_minus - self.omega_plus


def thermal_occupancy(r: float | None = None, *, zero_temperature: bool = False) -> float:
    """Bose occupancy ``1/(exp(r) - 1)`` for ``r = hbar*omega_m/(k_B*T)``.

    The zero-temperature bath must be requested explicitly with
    ``zero_temperature=True``; ``r`` is then ignored.
    """
    if zero_temperature:
        return 0.0
    if r is None or not r > 0:
        raise ParameterError(f"r = hbar*omega/(k_B*T) must be > 0, got {r!r}")
    if r > 700.0:
        return 0.0
    return 1.0 / math.expm1(r)


def nondimensionalize(p: PhysicalParams) -> SystemParams:
    """Map a physical parameter set to the dimensionless working set."""
    kappa = p.kappa
    if p.T == 0:
        n_th = thermal_occupancy(zero_temperature=True)
    else:
        n_th = thermal_occupancy(hbar * p.omega_m1 / (k_B * p.T))
    return SystemParams(
        omega_m1=p.omega_m1 / kappa,
        omega_m2=p.omega_m2 / kappa,
        gamma=p.gamma / kappa,
        kc=p.k / (p.m * kappa**2),
        delta0=p.Delta0 / kappa,
        power=4.0 * p.P_in * p.omega_c / (p.m * p.L_om**2 * kappa**4),
        n_th=n_th,
        bath=p.bath,
    )


def normal_modes(p: SystemParams) -> NormalModes:
    """Eigenfrequencies of the isolated mechanical pair (identical units)."""
    if not p.is_identical:
        raise ParameterError("normal-mode frequencies assume identical mechanical units")
    w = p.omega_m1
    return NormalModes(omega_plus=w, omega_minus=math.sqrt(w * w + 2.0 * p.kc))


def coupling_g(p: SystemParams, fp, omega_ratio: float = 1.0) -> float:
    """Linear optomechanical coupling relative to the mechanical frequency.

    With ``g = (omega_c x_zpf / L_om) sqrt(|a|^2 / 2)`` in dimensional form and
    ``x_zpf = sqrt(hbar/(m omega_m))``, the dimensionless map gives
    ``(g/omega_m)^2 = power |a_st|^2 / (2 omega_m^3) * omega_c/omega_L``.

    Parameters
    ----------
    p : SystemParams
    fp : FixedPoint
        Steady state providing ``a_sq`` (the intracavity ``|a_st|^2`` per unit).
    omega_ratio : float
        ``omega_c/omega_L``; unity for any realistic detuning.
    """
    w = p.omega_m
    return math.sqrt(p.power * fp.a_sq * omega_ratio / (2.0 * w**3))
