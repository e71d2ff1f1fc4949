"""Adaptive Dormand-Prince 5(4) integrator with dense output, compiled with numba.

The right-hand side is a jitted function ``f(t, y, args, out)`` that writes
the derivative into ``out``.  Output is produced on a caller-supplied
increasing time grid using the fourth-order continuous extension of the
method, so the step-size sequence is independent of the output grid.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .errors import IntegrationError, NonFiniteState, StepSizeUnderflow

__all__ = ["dopri5", "OK", "UNDERFLOW", "NONFINITE", "MAXSTEPS"]

OK, UNDERFLOW, NONFINITE, MAXSTEPS = 0, 1, 2, 3

# Butcher tableau (Dormand & Prince 1980) and dense-output weights (Hairer, contd5).
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
A71, A73, A74, A75, A76 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)
D1, D3, D4, D5, D6, D7 = (-12715105075.0 / 11282082432.0, 87487479700.0 / 32700410799.0,
                          -10690763975.0 / 1880347072.0, 701980252875.0 / 199316789632.0,
                          -1453857185.0 / 822651844.0, 69997945.0 / 29380423.0)

SAFETY, FAC_MIN, FAC_MAX = 0.9, 0.2, 5.0


@njit(cache=True)
def _norm(v, y0, y1, rtol, atol):
    acc = 0.0
    n = v.shape[0]
    for i in range(n):
        sc = atol + rtol * max(abs(y0[i]), abs(y1[i]))
        acc += (v[i] / sc) ** 2
    return np.sqrt(acc / n)


@njit(cache=True)
def _integrate(f, t0, y0, t_out, rtol, atol, args, h0, max_steps):
    n = y0.shape[0]
    m = t_out.shape[0]
    out = np.empty((m, n))
    y = y0.copy()
    y1 = np.empty(n)
    yt = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    err = np.empty(n)
    t = t0
    t_end = t_out[m - 1]
    j = 0
    while j < m and t_out[j] <= t:
        for i in range(n):
            out[j, i] = y[i]
        j += 1
    if j == m:
        return out, OK, 0, t

    f(t, y, args, k1)
    for i in range(n):
        if not np.isfinite(k1[i]):
            return out, NONFINITE, 0, t

    h = h0
    if h <= 0.0:
        # Hairer's starting-step heuristic
        d0 = _norm(y, y, y, rtol, atol)
        d1 = _norm(k1, y, y, rtol, atol)
        if d0 < 1e-5 or d1 < 1e-5:
            h = 1e-6
        else:
            h = 0.01 * d0 / d1
        h = min(h, t_end - t)
        for i in range(n):
            yt[i] = y[i] + h * k1[i]
        f(t + h, yt, args, k2)
        d2 = 0.0
        for i in range(n):
            sc = atol + rtol * abs(y[i])
            d2 += ((k2[i] - k1[i]) / sc) ** 2
        d2 = np.sqrt(d2 / n) / h
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** 0.2
        h = min(100.0 * h, h1)

    steps = 0
    rejected_nonfinite = 0
    while j < m:
        if steps >= max_steps:
            return out, MAXSTEPS, steps, t
        if h < 1e-14 * max(abs(t), 1.0):
            return out, UNDERFLOW, steps, t
        last = t + h >= t_end
        if last:
            h = t_end - t

        for i in range(n):
            yt[i] = y[i] + h * A21 * k1[i]
        f(t + C2 * h, yt, args, k2)
        for i in range(n):
            yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        f(t + C3 * h, yt, args, k3)
        for i in range(n):
            yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        f(t + C4 * h, yt, args, k4)
        for i in range(n):
            yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        f(t + C5 * h, yt, args, k5)
        for i in range(n):
            yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i]
                                + A65 * k5[i])
        f(t + h, yt, args, k6)
        for i in range(n):
            y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i]
                                + A76 * k6[i])
        f(t + h, y1, args, k7)
        for i in range(n):
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                          + E7 * k7[i])
        en = _norm(err, y, y1, rtol, atol)
        steps += 1

        if not np.isfinite(en):
            rejected_nonfinite += 1
            if rejected_nonfinite > 50:
                return out, NONFINITE, steps, t
            h *= 0.1
            continue
        rejected_nonfinite = 0

        if en <= 1.0:
            t_new = t_end if last else t + h
            # dense output on [t, t_new]
            while j < m and t_out[j] <= t_new:
                theta = (t_out[j] - t) / h
                theta1 = 1.0 - theta
                for i in range(n):
                    ydiff = y1[i] - y[i]
                    bspl = h * k1[i] - ydiff
                    r4 = ydiff - h * k7[i] - bspl
                    r5 = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i]
                              + D6 * k6[i] + D7 * k7[i])
                    out[j, i] = y[i] + theta * (ydiff + theta1 * (bspl + theta * (r4 + theta1 * r5)))
                j += 1
            t = t_new
            for i in range(n):
                y[i] = y1[i]
                k1[i] = k7[i]
            if en == 0.0:
                fac = FAC_MAX
            else:
                fac = min(FAC_MAX, max(FAC_MIN, SAFETY * en ** -0.2))
            h *= fac
        else:
            h *= max(FAC_MIN, SAFETY * en ** -0.2)
    return out, OK, steps, t


def dopri5(f, t0: float, y0, t_out, args, rtol: float = 1e-9, atol: float = 1e-12,
           h0: float = 0.0, max_steps: int = 50_000_000):
    """Integrate ``y' = f(t, y)`` from ``t0`` and sample the solution at ``t_out``.

    Parameters
    ----------
    f : numba-jitted callable ``f(t, y, args, out)``
    t0 : float
    y0 : array_like, shape (n,)
    t_out : array_like, shape (m,)
        Non-decreasing sample times, all ``>= t0``.
    args : ndarray
        Parameter vector handed to ``f`` unchanged.
    rtol, atol : float
        Per-step local error tolerances.
    h0 : float
        Initial step; ``<= 0`` selects it automatically.

    Returns
    -------
    samples : ndarray, shape (m, n)
    n_steps : int

    Raises
    ------
    StepSizeUnderflow, NonFiniteState, IntegrationError
    """
    y0 = np.ascontiguousarray(y0, dtype=float)
    t_out = np.ascontiguousarray(t_out, dtype=float)
    if t_out.ndim != 1 or t_out.size == 0:
        raise ValueError("t_out must be a non-empty 1-D array")
    if np.any(np.diff(t_out) < 0) or t_out[0] < t0:
        raise ValueError("t_out must be non-decreasing and start at or after t0")
    if not (rtol > 0 and atol > 0):
        raise ValueError("tolerances must be positive")
    out, status, steps, t_fail = _integrate(f, float(t0), y0, t_out, float(rtol), float(atol),
                                            np.ascontiguousarray(args, dtype=float),
                                            float(h0), int(max_steps))
    if status == UNDERFLOW:
        raise StepSizeUnderflow(f"step size underflow at t={t_fail:.6g}")
    if status == NONFINITE:
        raise NonFiniteState(f"non-finite state at t={t_fail:.6g}")
    if status == MAXSTEPS:
        raise IntegrationError(f"step budget exhausted at t={t_fail:.6g}")
    if not np.all(np.isfinite(out)):
        raise NonFiniteState("non-finite values in output samples")
    return out, steps
