"""Mean-field dynamics of two driven optomechanical units.

State vector layout (real): ``(Re a1, Im a1, Re a2, Im a2, x1, p1, x2, p2)``.
Mechanical dissipation acts on the momenta only: ``gamma*p_j`` for separate
baths, ``gamma*(p1 + p2)`` in both equations for a common bath.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .errors import ParameterError
from .integrator import dopri5
from .params import Bath, SystemParams, normal_modes

__all__ = [
    "ClassicalState",
    "Trajectory",
    "IntegrationControls",
    "rhs",
    "integrate",
    "initial_state",
    "mode_energies",
    "write_trajectory_csv",
]

STATE_COLUMNS = ("t", "re_a1", "im_a1", "re_a2", "im_a2", "x1", "p1", "x2", "p2")
CSV_DIGITS = 12  # significant digits in exported tables


@dataclass(frozen=True)
class ClassicalState:
    a1: complex
    a2: complex
    x1: float
    p1: float
    x2: float
    p2: float

    def to_array(self) -> np.ndarray:
        return np.array([self.a1.real, self.a1.imag, self.a2.real, self.a2.imag,
                         self.x1, self.p1, self.x2, self.p2])

    @classmethod
    def from_array(cls, y) -> "ClassicalState":
        y = np.asarray(y, dtype=float)
        return cls(complex(y[0], y[1]), complex(y[2], y[3]),
                   float(y[4]), float(y[5]), float(y[6]), float(y[7]))

    def swapped(self) -> "ClassicalState":
        return ClassicalState(self.a2, self.a1, self.x2, self.p2, self.x1, self.p1)


@dataclass(frozen=True)
class IntegrationControls:
    rtol: float = 1e-9
    atol: float = 1e-12

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ParameterError("integration tolerances must be positive")


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled trajectory; ``y`` has one row per sample."""

    t0: float
    dt_sample: float
    y: np.ndarray

    def __post_init__(self):
        if self.y.ndim != 2 or self.y.shape[1] != 8 or self.y.shape[0] < 2:
            raise ValueError("trajectory needs at least two 8-component samples")
        if not self.dt_sample > 0:
            raise ValueError("dt_sample must be positive")

    def __len__(self):
        return self.y.shape[0]

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt_sample * np.arange(len(self))

    @property
    def x1(self) -> np.ndarray:
        return self.y[:, 4]

    @property
    def x2(self) -> np.ndarray:
        return self.y[:, 6]

    @property
    def a1(self) -> np.ndarray:
        return self.y[:, 0] + 1j * self.y[:, 1]

    @property
    def a2(self) -> np.ndarray:
        return self.y[:, 2] + 1j * self.y[:, 3]

    def state(self, i: int) -> ClassicalState:
        return ClassicalState.from_array(self.y[i])

    @property
    def samples(self) -> list[ClassicalState]:
        return [ClassicalState.from_array(row) for row in self.y]


def _args(p: SystemParams) -> np.ndarray:
    return np.array([p.omega_m1, p.omega_m2, p.gamma, p.kc, p.delta0, p.power,
                     1.0 if p.bath is Bath.COMMON else 0.0])


@njit(cache=True)
def _rhs(t, y, args, out):
    w1, w2, gamma, kc, delta0, power, common = args
    ar1, ai1, ar2, ai2, x1, p1, x2, p2 = y[0], y[1], y[2], y[3], y[4], y[5], y[6], y[7]
    d1 = delta0 + x1
    d2 = delta0 + x2
    # a' = [i(D0 + x) - 1/2] a + 1/2
    out[0] = -0.5 * ar1 - d1 * ai1 + 0.5
    out[1] = d1 * ar1 - 0.5 * ai1
    out[2] = -0.5 * ar2 - d2 * ai2 + 0.5
    out[3] = d2 * ar2 - 0.5 * ai2
    if common > 0.5:
        diss1 = gamma * (p1 + p2)
        diss2 = diss1
    else:
        diss1 = gamma * p1
        diss2 = gamma * p2
    spring = kc * (x1 - x2)
    out[4] = p1
    out[5] = -w1 * w1 * x1 - spring - diss1 + power * (ar1 * ar1 + ai1 * ai1)
    out[6] = p2
    out[7] = -w2 * w2 * x2 + spring - diss2 + power * (ar2 * ar2 + ai2 * ai2)


def rhs(s: ClassicalState | np.ndarray, p: SystemParams) -> np.ndarray:
    """Time derivative of the mean-field state, as an 8-vector."""
    y = s.to_array() if isinstance(s, ClassicalState) else np.asarray(s, dtype=float)
    out = np.empty(8)
    _rhs(0.0, y, _args(p), out)
    return out


def initial_state(displacement: float = 0.01, seed: int | None = None,
                  scale: float = 1.0) -> ClassicalState:
    """Default sweep initial condition: empty cavities, equal small displacement.

    With ``seed`` given, mechanical positions and momenta are drawn uniformly
    from ``[-scale, scale]`` and cavity amplitudes from the unit square, to
    probe multistability.
    """
    if seed is None:
        return ClassicalState(0j, 0j, displacement, 0.0, displacement, 0.0)
    rng = np.random.default_rng(seed)
    ar = rng.uniform(-1.0, 1.0, size=4)
    mech = rng.uniform(-scale, scale, size=4)
    return ClassicalState(complex(ar[0], ar[1]), complex(ar[2], ar[3]), *mech)


def integrate(s0: ClassicalState | np.ndarray, p: SystemParams, t_end: float,
              dt_sample: float, controls: IntegrationControls | None = None,
              t_record: float = 0.0) -> Trajectory:
    """Integrate from ``t = 0`` to ``t_end``; keep samples from ``t_record`` on.

    Raises
    ------
    StepSizeUnderflow, NonFiniteState
    """
    controls = controls or IntegrationControls()
    if not (t_end > 0 and dt_sample > 0):
        raise ParameterError("t_end and dt_sample must be positive")
    if not 0 <= t_record < t_end:
        raise ParameterError("t_record must lie in [0, t_end)")
    n = int(math.floor((t_end - t_record) / dt_sample + 1e-9)) + 1
    t_out = t_record + dt_sample * np.arange(n)
    y0 = s0.to_array() if isinstance(s0, ClassicalState) else np.asarray(s0, dtype=float)
    y, _ = dopri5(_rhs, 0.0, y0, t_out, _args(p), rtol=controls.rtol, atol=controls.atol)
    return Trajectory(t0=float(t_out[0]), dt_sample=float(dt_sample), y=y)


def mode_energies(traj: Trajectory, p: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Energies of the centre-of-mass and relative mechanical modes.

    ``E_pm = (p_pm^2 + Omega_pm^2 x_pm^2)/2`` with ``x_pm = (x1 +- x2)/sqrt 2``.
    """
    modes = normal_modes(p)
    y = traj.y
    s = 1.0 / math.sqrt(2.0)
    x_plus, x_minus = s * (y[:, 4] + y[:, 6]), s * (y[:, 4] - y[:, 6])
    p_plus, p_minus = s * (y[:, 5] + y[:, 7]), s * (y[:, 5] - y[:, 7])
    e_plus = 0.5 * (p_plus**2 + modes.omega_plus**2 * x_plus**2)
    e_minus = 0.5 * (p_minus**2 + modes.omega_minus**2 * x_minus**2)
    return e_plus, e_minus


def write_trajectory_csv(traj: Trajectory, path: str | Path, digits: int = CSV_DIGITS) -> Path:
    """Write ``t, Re a1, Im a1, Re a2, Im a2, x1, p1, x2, p2`` rows (``%.{digits}g``)."""
    path = Path(path)
    fmt = f"{{:.{digits}g}}"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATE_COLUMNS)
        for t, row in zip(traj.t, traj.y):
            w.writerow([fmt.format(t)] + [fmt.format(v) for v in row])
    return path
