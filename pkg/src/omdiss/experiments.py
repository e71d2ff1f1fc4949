"""Steady-state sweeps and derivative-free optimizers over detuning and drive.

Every objective is evaluated on a coarse grid first; cells without a stable
fixed point are marked ``unstable`` and left out.  The best stable grid cell
is then refined with bounded Brent minimization (golden section with
parabolic steps) between its stable neighbours.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import AllUnstable, NoBracket, OmdissError, UnstableDrift
from .gaussian import QuantumResult, quantum_result
from .linear import find_fixed_points, select_fixed_point
from .params import Bath, SystemParams, coupling_g, normal_modes

__all__ = [
    "SweepRecord",
    "Optimum",
    "OptimizationResult",
    "SidebandRecord",
    "evaluate",
    "parallel_map",
    "steady_scan",
    "optimize_detuning",
    "optimize_power",
    "sideband_scan",
    "detuning_landmarks",
    "stability_limit",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepRecord:
    """One grid cell: its coordinates, the outcome and a status code."""

    coords: dict
    result: object | None
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def evaluate(p: SystemParams) -> tuple[QuantumResult | None, str]:
    """Steady-state observables, or ``(None, status)`` when unavailable."""
    try:
        fp = select_fixed_point(find_fixed_points(p))
        if fp is None:
            return None, "unstable"
        return quantum_result(p, fp), "ok"
    except UnstableDrift:
        return None, "unstable"
    except OmdissError as exc:
        return None, type(exc).__name__


def _cell(args) -> SweepRecord:
    p, coords = args
    res, status = evaluate(p.replace(**coords))
    return SweepRecord(dict(coords), res, status)


def parallel_map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally on a process pool; order is preserved."""
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def steady_scan(p: SystemParams, axis: str, values: Sequence[float],
                workers: int = 1) -> list[SweepRecord]:
    """Steady-state observables along one parameter axis (``delta0``, ``power``, ``kc``...)."""
    if axis not in SystemParams.__dataclass_fields__:
        raise ValueError(f"unknown parameter axis {axis!r}")
    cells = [(p, {axis: float(v)}) for v in values]
    return parallel_map(_cell, cells, workers)


@dataclass(frozen=True)
class Optimum:
    """Location and value of one objective's optimum.

    ``boundary`` is set when the best grid cell touches the search range or
    the edge of the stable domain, so the optimum may lie outside.
    """

    arg: float
    value: float
    boundary: bool
    g_over_omega: float = math.nan


@dataclass(frozen=True)
class OptimizationResult:
    entanglement: Optimum
    cooling: Optimum
    records: tuple[SweepRecord, ...]

    @property
    def n_unstable(self) -> int:
        return sum(r.status == "unstable" for r in self.records)


def _refine(f: Callable[[float], float], grid: np.ndarray, values: np.ndarray,
            stable: np.ndarray, tol: float) -> tuple[float, float, bool]:
    i = int(np.nanargmin(np.where(stable, values, np.nan)))
    n = grid.size
    lo_edge = i == 0 or not stable[i - 1]
    hi_edge = i == n - 1 or not stable[i + 1]
    lo = grid[i] if lo_edge else grid[i - 1]
    hi = grid[i] if hi_edge else grid[i + 1]
    best_x, best_v = float(grid[i]), float(values[i])
    if hi > lo:
        res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": tol})
        if res.fun <= best_v:
            best_x, best_v = float(res.x), float(res.fun)
    # an optimum pinned to the edge of the bracket means the grid edge was binding
    boundary = (lo_edge and best_x - lo <= 2 * tol) or (hi_edge and hi - best_x <= 2 * tol)
    return best_x, best_v, bool(boundary)


def _optimize(p: SystemParams, axis: str, grid: np.ndarray, to_value: Callable[[float], float],
              tol: float, workers: int, with_g: bool) -> OptimizationResult:
    values = [to_value(x) for x in grid]
    records = steady_scan(p, axis, values, workers)
    for rec in records:
        if rec.status not in ("ok", "unstable"):
            log.warning("%s=%g: %s", axis, rec.coords[axis], rec.status)
    stable = np.array([r.ok for r in records])
    if not stable.any():
        raise AllUnstable(f"no stable cell in the {axis} scan")
    n_unstable = int((~stable).sum())
    if n_unstable:
        log.info("%d of %d %s cells unstable and skipped", n_unstable, len(records), axis)

    def observe(x: float, key: str) -> float:
        res, _ = evaluate(p.replace(**{axis: to_value(x)}))
        if res is None:
            return math.inf
        return -res.e_n_mech if key == "e" else res.n_eff

    def optimum(key: str) -> Optimum:
        vals = np.array([(-r.result.e_n_mech if key == "e" else r.result.n_eff) if r.ok
                         else np.inf for r in records])
        x, v, edge = _refine(lambda x: observe(x, key), grid, vals, stable, tol)
        arg = to_value(x)
        g = math.nan
        if with_g:
            q = p.replace(**{axis: arg})
            fp = select_fixed_point(find_fixed_points(q))
            g = coupling_g(q, fp) if fp is not None else math.nan
        return Optimum(arg=arg, value=-v if key == "e" else v, boundary=edge, g_over_omega=g)

    return OptimizationResult(entanglement=optimum("e"), cooling=optimum("n"),
                              records=tuple(records))


def optimize_detuning(p: SystemParams, delta_range: tuple[float, float], n_grid: int = 128,
                      tol: float = 1e-5, workers: int = 1) -> OptimizationResult:
    """Detunings that maximize mechanical entanglement and minimize ``n_eff``.

    Raises
    ------
    AllUnstable
        If no grid cell has a stable fixed point.
    """
    lo, hi = sorted(map(float, delta_range))
    if n_grid < 64 or not (math.isfinite(lo) and math.isfinite(hi)) or lo == hi:
        raise ValueError("need a finite range and n_grid >= 64")
    grid = np.linspace(lo, hi, n_grid)
    return _optimize(p, "delta0", grid, float, tol, workers, with_g=False)


def optimize_power(p: SystemParams, power_range: tuple[float, float], n_grid: int = 256,
                   tol: float = 1e-6, workers: int = 1) -> OptimizationResult:
    """Drive strengths that maximize entanglement and minimize ``n_eff``.

    The search runs in ``log10(power)``; ``tol`` applies there.  Each optimum
    also reports the effective coupling ``g/omega_m``.
    """
    lo, hi = sorted(map(float, power_range))
    if n_grid < 64 or not (0 < lo < hi and math.isfinite(hi)):
        raise ValueError("need 0 < lo < hi and n_grid >= 64")
    grid = np.linspace(math.log10(lo), math.log10(hi), n_grid)
    return _optimize(p, "power", grid, lambda u: 10.0 ** u, tol, workers, with_g=True)


SIDEBAND_CURVES = ("sb", "cb", "single")


@dataclass(frozen=True)
class SidebandRecord:
    omega_m: float
    curve: str
    result: OptimizationResult | None
    status: str = "ok"


def _sideband_point(args) -> SidebandRecord:
    w, curve, kc_ratio, q_m, n_th, power_range, n_grid = args
    bath = Bath.COMMON if curve == "cb" else Bath.SEPARATE
    kc = 0.0 if curve == "single" else kc_ratio * w * w
    p = SystemParams.identical(w, gamma=w / q_m, kc=kc, delta0=-w, power=1.0, n_th=n_th,
                               bath=bath)
    try:
        return SidebandRecord(w, curve, optimize_power(p, power_range, n_grid=n_grid))
    except OmdissError as exc:
        log.warning("omega_m=%g %s: %s", w, curve, exc)
        return SidebandRecord(w, curve, None, type(exc).__name__)


def sideband_scan(omegas: Sequence[float], kc_ratio: float = 0.5, q_m: float = 1e5,
                  n_th: float = 9.508, power_range: tuple[float, float] = (1e-2, 1e7),
                  n_grid: int = 256, workers: int = 1) -> list[SidebandRecord]:
    """Power-optimized entanglement and occupancy versus mechanical frequency.

    For each ``omega_m``: ``kc = kc_ratio * omega_m**2``, ``delta0 = -omega_m``,
    ``gamma = omega_m / q_m``.  Three curves per frequency: separate baths,
    common bath and the single-unit reference (``kc = 0``, separate baths,
    where the two units are independent copies).
    """
    cells = [(float(w), c, kc_ratio, q_m, n_th, power_range, n_grid)
             for w in omegas for c in SIDEBAND_CURVES]
    return parallel_map(_sideband_point, cells, workers)


def detuning_landmarks(p: SystemParams) -> dict:
    """``-Omega_plus`` and ``-Omega_bar``: reference detunings for the optimizers."""
    modes = normal_modes(p)
    return {"minus_omega_plus": -modes.omega_plus, "minus_omega_bar": -modes.omega_bar}


def _has_stable_point(p: SystemParams) -> bool:
    return select_fixed_point(find_fixed_points(p)) is not None


def stability_limit(p: SystemParams, axis: str, bracket: tuple[float, float],
                    rel_tol: float = 1e-8) -> float:
    """Value of ``axis`` where the stable fixed point disappears, by bisection.

    Returns the last stable value found.  ``bracket`` must hold a stable
    and an unstable end, in either order.

    Raises
    ------
    NoBracket
    """
    a, b = map(float, bracket)
    sa = _has_stable_point(p.replace(**{axis: a}))
    sb = _has_stable_point(p.replace(**{axis: b}))
    if sa == sb:
        raise NoBracket(f"{axis} range does not straddle the stability boundary")
    if not sa:
        a, b = b, a
    while abs(b - a) > rel_tol * max(abs(a), abs(b), 1e-300):
        mid = 0.5 * (a + b)
        if _has_stable_point(p.replace(**{axis: mid})):
            a = mid
        else:
            b = mid
    return a
