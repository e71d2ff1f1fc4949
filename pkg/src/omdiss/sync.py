"""Synchronization of the mechanical oscillations.

The measure is the windowed Pearson correlation between ``x1(t)`` and the
delayed ``x2(t + tau)``, maximized over one oscillation period.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .classical import IntegrationControls, Trajectory, initial_state, integrate
from .errors import IntegrationError, NoBracket, NoDominantPeak, OmdissError, ParameterError, ZeroVariance
from .params import SystemParams

__all__ = [
    "SyncResult",
    "SyncConfig",
    "SyncRecord",
    "pearson",
    "estimate_period",
    "delay_scan",
    "phase_class",
    "simulate_sync",
    "sync_threshold",
    "sync_map",
    "write_sync_csv",
    "write_heatmap_script",
]

MIN_WINDOW_SAMPLES = 10
DEFAULT_THRESHOLD = 0.9


@dataclass(frozen=True)
class SyncResult:
    c_zero: float
    c_max: float
    phase_lock: float
    period: float
    synchronized: bool

    @property
    def phase_class(self) -> str:
        return phase_class(self.phase_lock)


def phase_class(phase_lock: float) -> str:
    """``'in-phase'``, ``'anti-phase'`` or ``'intermediate'``."""
    if phase_lock < 0.1 or phase_lock > 0.9:
        return "in-phase"
    if 0.4 < phase_lock < 0.6:
        return "anti-phase"
    return "intermediate"


def pearson(x1, x2) -> float:
    """Pearson correlation of two equally sampled windows.

    Raises
    ------
    ZeroVariance
        If either window is constant.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != x2.shape or x1.ndim != 1:
        raise ValueError("series must be 1-D and of equal length")
    if x1.size < MIN_WINDOW_SAMPLES:
        raise ValueError(f"window needs at least {MIN_WINDOW_SAMPLES} samples")
    d1 = x1 - x1.mean()
    d2 = x2 - x2.mean()
    v1 = np.mean(d1 * d1)
    v2 = np.mean(d2 * d2)
    scale = max(np.mean(x1 * x1), np.mean(x2 * x2), np.finfo(float).tiny)
    if v1 <= 1e-24 * scale or v2 <= 1e-24 * scale:
        raise ZeroVariance("constant signal in correlation window")
    c = np.mean(d1 * d2) / math.sqrt(v1 * v2)
    return float(min(1.0, max(-1.0, c)))


def estimate_period(x, dt: float, min_prominence: float = 10.0) -> float:
    """Dominant period of a sampled signal.

    The mean-removed, Hann-tapered signal is zero-padded eight-fold; the peak
    of the log power spectrum is refined by a parabola through its neighbours.

    Raises
    ------
    NoDominantPeak
        Flat signal, or a peak less than ``min_prominence`` times the median
        spectral power.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 16:
        raise NoDominantPeak("series too short for spectral estimate")
    x = x - x.mean()
    if not np.any(np.abs(x) > 1e-12 * max(1.0, np.abs(x).max())) or np.ptp(x) == 0:
        raise NoDominantPeak("constant signal")
    n_fft = 8 * (1 << int(math.ceil(math.log2(x.size))))
    power = np.abs(np.fft.rfft(x * np.hanning(x.size), n=n_fft)) ** 2
    power[0] = 0.0
    k = int(np.argmax(power))
    background = np.median(power[1:])
    if k == 0 or power[k] <= min_prominence * max(background, np.finfo(float).tiny):
        raise NoDominantPeak("no spectral peak above background")
    if 0 < k < power.size - 1:
        lm, l0, lp = np.log(power[k - 1:k + 2] + np.finfo(float).tiny)
        denom = lm - 2.0 * l0 + lp
        shift = 0.5 * (lm - lp) / denom if denom != 0 else 0.0
    else:
        shift = 0.0
    freq = (k + shift) / (n_fft * dt)
    return 1.0 / freq


def delay_scan(traj: Trajectory, window: float | None = None, n_delays: int = 128,
               threshold: float = DEFAULT_THRESHOLD, window_periods: float = 50.0,
               period: float | None = None) -> SyncResult:
    """Maximum over ``tau in [0, T)`` of the correlation of ``x1(t)`` and ``x2(t+tau)``.

    ``window`` is the averaging span in time units; by default it covers
    ``window_periods`` oscillation periods, clipped so that the delayed series
    stays inside the trajectory.
    """
    if n_delays < 64:
        raise ParameterError("n_delays must be >= 64")
    dt = traj.dt_sample
    t = traj.t
    x1, x2 = traj.x1, traj.x2
    if period is None:
        period = estimate_period(x1, dt)
    span = t[-1] - t[0]
    if window is None:
        window = min(window_periods * period, span - period)
    if window <= 0 or window + period > span + 1e-9:
        raise ParameterError(f"trajectory span {span:.4g} too short for window {window:.4g} "
                             f"plus one period {period:.4g}")
    n_win = int(math.floor(window / dt + 1e-9)) + 1
    if n_win < MIN_WINDOW_SAMPLES:
        raise ParameterError("window holds fewer than 10 samples")
    spline = CubicSpline(t, x2)
    base = t[:n_win]
    w1 = x1[:n_win]
    taus = period * np.arange(n_delays) / n_delays
    corr = np.array([pearson(w1, spline(base + tau)) for tau in taus])
    i = int(np.argmax(corr))
    c_max = float(corr[i])
    return SyncResult(
        c_zero=float(corr[0]),
        c_max=c_max,
        phase_lock=float(taus[i] / period),
        period=float(period),
        synchronized=bool(c_max >= threshold),
    )


@dataclass(frozen=True)
class SyncConfig:
    """Numerical choices for one synchronization measurement.

    The transient lasts ``transient_damping_times / gamma``; the kept record
    spans ``window_periods + 2`` nominal periods of unit 1.
    """

    transient_damping_times: float = 50.0
    window_periods: float = 50.0
    dt_sample: float = 0.05
    n_delays: int = 128
    threshold: float = DEFAULT_THRESHOLD
    displacement: float = 0.01
    seed: int | None = None
    controls: IntegrationControls = field(default_factory=IntegrationControls)

    def as_dict(self) -> dict:
        return asdict(self)


def simulate_sync(p: SystemParams, config: SyncConfig = SyncConfig()) -> SyncResult:
    """Integrate past the transient, then run the delay scan."""
    t_transient = config.transient_damping_times / p.gamma
    nominal = 2.0 * math.pi / min(p.omega_m1, p.omega_m2)
    t_end = t_transient + (config.window_periods + 2.0) * nominal * 1.25
    s0 = initial_state(config.displacement, seed=config.seed)
    traj = integrate(s0, p, t_end, config.dt_sample, config.controls, t_record=t_transient)
    return delay_scan(traj, n_delays=config.n_delays, threshold=config.threshold,
                      window_periods=config.window_periods)


def _is_synced(p: SystemParams, config: SyncConfig) -> bool:
    return simulate_sync(p, config).synchronized


def sync_threshold(p: SystemParams, delta_omega: float, kc_range: tuple[float, float],
                   config: SyncConfig = SyncConfig(), rel_tol: float = 1e-3) -> float:
    """Smallest mechanical coupling that synchronizes the pair, by bisection.

    ``p.omega_m1`` is kept; ``omega_m2 = omega_m1 + delta_omega``.  If the
    lower end of the range is zero coupling and already synchronized the
    threshold is 0.

    Raises
    ------
    NoBracket
        If the range does not straddle the transition.
    """
    lo, hi = map(float, kc_range)
    if not 0 <= lo < hi:
        raise ParameterError("kc_range must satisfy 0 <= lo < hi")
    base = p.replace(omega_m2=p.omega_m1 + delta_omega)
    if _is_synced(base.replace(kc=lo), config):
        if lo == 0.0:
            return 0.0
        raise NoBracket(f"already synchronized at the lower end kc={lo}")
    if not _is_synced(base.replace(kc=hi), config):
        raise NoBracket(f"not synchronized at the upper end kc={hi}")
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if _is_synced(base.replace(kc=mid), config):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class SyncRecord:
    delta_omega: float
    kc: float
    result: SyncResult | None
    status: str = "ok"


def _cell(args) -> SyncRecord:
    p, dw, kc, config = args
    try:
        res = simulate_sync(p.replace(omega_m2=p.omega_m1 + dw, kc=kc), config)
    except IntegrationError as exc:
        return SyncRecord(dw, kc, None, f"integration:{type(exc).__name__}")
    except OmdissError as exc:
        return SyncRecord(dw, kc, None, type(exc).__name__)
    return SyncRecord(dw, kc, res)


def sync_map(p: SystemParams, delta_omegas: Sequence[float], kcs: Sequence[float],
             config: SyncConfig = SyncConfig(), workers: int = 1) -> list[SyncRecord]:
    """One synchronization measurement per grid cell, in row-major (delta_omega, kc) order."""
    cells = [(p, float(dw), float(kc), config) for dw in delta_omegas for kc in kcs]
    if workers <= 1:
        return [_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_cell, cells, chunksize=max(1, len(cells) // (4 * workers))))


SYNC_COLUMNS = ("delta_omega", "kc", "c_zero", "c_max", "phase_lock", "period",
                "synchronized", "status")


def write_sync_csv(records: Sequence[SyncRecord], path: str | Path, digits: int = 10) -> Path:
    path = Path(path)
    fmt = f"{{:.{digits}g}}".format
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SYNC_COLUMNS)
        for rec in records:
            r = rec.result
            if r is None:
                w.writerow([fmt(rec.delta_omega), fmt(rec.kc), "", "", "", "", "", rec.status])
            else:
                w.writerow([fmt(rec.delta_omega), fmt(rec.kc), fmt(r.c_zero), fmt(r.c_max),
                            fmt(r.phase_lock), fmt(r.period), int(r.synchronized), rec.status])
    return path


def write_heatmap_script(csv_name: str, path: str | Path, column: str = "c_max") -> Path:
    """gnuplot script rendering ``column`` over the (delta_omega, kc) plane."""
    col = SYNC_COLUMNS.index(column) + 1
    path = Path(path)
    path.write_text(
        f"""# gnuplot heatmap of {column}
set datafile separator ','
set key autotitle columnhead
set xlabel 'delta omega_m'
set ylabel 'K_c'
set cblabel '{column}'
set view map
set terminal pngcairo size 800,600
set output '{Path(path).stem}.png'
plot '{csv_name}' using 1:2:{col} with image notitle
"""
    )
    return path
