"""Fixed points and the linearized fluctuation system.

Canonical fluctuation ordering used throughout the package::

    R = (dQ1, dP1, dQ2, dP2, dx1, dp1, dx2, dp2)

``Q = sqrt(2) Re a`` and ``P = sqrt(2) Im a`` are the optical quadratures in
the dimensionless units of the mean-field equations.  In these "raw" units the
optical vacuum variance is ``omega_m/(2 power)`` and the mechanical momentum
variance carries a factor ``omega_m**2``; :func:`quadrature_scales` converts
to the vacuum-normalized frame where every quadrature has vacuum variance 1/2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NoBracket, ParameterError
from .params import Bath, SystemParams

__all__ = [
    "LABELS",
    "FixedPoint",
    "find_fixed_points",
    "select_fixed_point",
    "drift_matrix",
    "dissipation_matrix",
    "classical_jacobian",
    "noise_matrix",
    "quadrature_scales",
    "normalized_system",
    "stability",
    "hopf_scan",
    "normal_mode_transform",
    "cb_normal_mode_matrices",
    "write_matrix_csv",
]

LABELS = ("dQ1", "dP1", "dQ2", "dP2", "dx1", "dp1", "dx2", "dp2")
STABILITY_MARGIN = 1e-10


@dataclass(frozen=True)
class FixedPoint:
    """Symmetric steady state ``x1 = x2 = x_st`` with its drift spectrum."""

    x_st: float
    a_st: complex
    eigenvalues: np.ndarray = field(repr=False)
    stable: bool

    @property
    def p_st(self) -> float:
        return 0.0

    @property
    def q_st(self) -> float:
        return math.sqrt(2.0) * self.a_st.real

    @property
    def pq_st(self) -> float:
        return math.sqrt(2.0) * self.a_st.imag

    @property
    def a_sq(self) -> float:
        return abs(self.a_st) ** 2

    def state_vector(self) -> np.ndarray:
        a = self.a_st
        return np.array([a.real, a.imag, a.real, a.imag, self.x_st, 0.0, self.x_st, 0.0])


def _require_identical(p: SystemParams):
    if not p.is_identical:
        raise ParameterError("the linearized pipeline assumes identical mechanical units")


def _cavity_amplitude(p: SystemParams, x: float) -> complex:
    return 0.5 / (0.5 - 1j * (p.delta0 + x))


def _polish(p: SystemParams, x: float) -> float:
    w2, d, pw = p.omega_m1**2, p.delta0, p.power
    for _ in range(50):
        u = d + x
        f = w2 * x * (0.25 + u * u) - 0.25 * pw
        df = w2 * (0.25 + u * u) + 2.0 * w2 * x * u
        if df == 0:
            break
        step = f / df
        x -= step
        if abs(step) <= 1e-15 * max(1.0, abs(x)):
            break
    return x


def find_fixed_points(p: SystemParams) -> list[FixedPoint]:
    """All real symmetric fixed points, sorted by ``x_st``.

    The steady position solves ``omega_m^2 x = power |a(x)|^2`` with
    ``|a(x)|^2 = (1/4)/(1/4 + (delta0 + x)^2)``, a cubic after clearing the
    denominator.  Roots are bracketed by sign changes on a dense scan of the
    bounded interval ``[0, power/omega_m^2]`` (slightly widened) and polished with Newton steps.
    """
    _require_identical(p)
    w2, d, pw = p.omega_m1**2, p.delta0, p.power
    if pw == 0.0:
        roots = [0.0]
    else:
        # every root obeys x <= power/omega^2; the margin keeps a root at the bound inside
        x_hi = 1.001 * pw / w2
        grid = np.linspace(0.0, x_hi, 4001)
        # refine around the cavity resonance x = -delta0 where |a|^2 is sharp
        if 0.0 < -d < x_hi:
            grid = np.union1d(grid, -d + np.linspace(-3.0, 3.0, 2001))
            grid = grid[(grid >= 0.0) & (grid <= x_hi)]
        g = w2 * grid * (0.25 + (d + grid) ** 2) - 0.25 * pw
        roots = list(grid[g == 0.0])
        for i in np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0.0):
            roots.append(_bisect_root(p, grid[i], grid[i + 1]))
        polished = sorted(_polish(p, r) for r in roots)
        roots = []
        for r in polished:
            if not roots or abs(r - roots[-1]) > 1e-10 * max(1.0, abs(r)):
                roots.append(r)
    out = []
    for x in roots:
        a = _cavity_amplitude(p, x)
        fp = FixedPoint(x_st=float(x), a_st=complex(a), eigenvalues=np.empty(0), stable=False)
        ev, stable = stability(drift_matrix(p, fp))
        out.append(FixedPoint(x_st=float(x), a_st=complex(a), eigenvalues=ev, stable=stable))
    return out


def _bisect_root(p: SystemParams, lo: float, hi: float) -> float:
    w2, d, pw = p.omega_m1**2, p.delta0, p.power
    f = lambda x: w2 * x * (0.25 + (d + x) ** 2) - 0.25 * pw  # noqa: E731
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo <= 1e-15 * max(1.0, abs(mid)):
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def select_fixed_point(fps: list[FixedPoint]) -> FixedPoint | None:
    """Stable root of smallest ``|x_st|``, or ``None`` if none is stable."""
    stable = [fp for fp in fps if fp.stable]
    if not stable:
        return None
    return min(stable, key=lambda fp: abs(fp.x_st))


def dissipation_matrix(p: SystemParams) -> np.ndarray:
    """Mechanical damping entries of the drift matrix (position and momentum)."""
    D = np.zeros((8, 8))
    g = p.gamma
    for j in (4, 6):
        if p.bath is Bath.COMMON:
            for k in (4, 6):
                D[j, k] = -g
                D[j + 1, k + 1] = -g
        else:
            D[j, j] = -g
            D[j + 1, j + 1] = -g
    return D


def _conservative_part(p: SystemParams, fp: FixedPoint) -> np.ndarray:
    M = np.zeros((8, 8))
    w2 = p.omega_m1**2
    det = fp.x_st + p.delta0
    Q, P = fp.q_st, fp.pq_st
    for j in range(2):
        o, m = 2 * j, 4 + 2 * j
        M[o, o] = M[o + 1, o + 1] = -0.5
        M[o, o + 1] = -det
        M[o + 1, o] = det
        M[o, m] = -P
        M[o + 1, m] = Q
        M[m, m + 1] = 1.0
        M[m + 1, m] = -w2
        M[m + 1, o] = p.power * Q
        M[m + 1, o + 1] = p.power * P
    # (-1)^j K (dx1 - dx2) in the dp_j row
    M[5, 4] -= p.kc
    M[5, 6] += p.kc
    M[7, 4] += p.kc
    M[7, 6] -= p.kc
    return M


def drift_matrix(p: SystemParams, fp: FixedPoint) -> np.ndarray:
    """8x8 drift matrix of the linearized fluctuations (raw units)."""
    _require_identical(p)
    return _conservative_part(p, fp) + dissipation_matrix(p)


def classical_jacobian(p: SystemParams, fp: FixedPoint) -> np.ndarray:
    """Jacobian of the mean-field equations at ``fp`` in the canonical ordering.

    Differs from :func:`drift_matrix` only in the damping: the mean-field
    equations damp the momenta alone.
    """
    _require_identical(p)
    J = _conservative_part(p, fp)
    D = dissipation_matrix(p)
    J[5::2, 5::2] += D[5::2, 5::2]
    return J


def noise_matrix(p: SystemParams) -> np.ndarray:
    """Symmetrized noise correlation matrix in raw units.

    Optical quadratures: ``omega_m/(2 power)``; mechanical position
    ``gamma(2 n_th + 1)``; momentum ``omega_m^2 gamma (2 n_th + 1)``.  A
    common bath adds identical 1-2 cross terms.

    Raises
    ------
    ParameterError
        For ``power == 0``: the optical quadratures are measured in units of
        the drive amplitude and their noise diverges; use
        :func:`normalized_system` instead.
    """
    _require_identical(p)
    if p.power <= 0.0:
        raise ParameterError("raw optical noise diverges at zero drive; use normalized_system")
    w = p.omega_m1
    N = np.zeros((8, 8))
    for o in (0, 1, 2, 3):
        N[o, o] = 0.5 * w / p.power
    thermal = p.gamma * (2.0 * p.n_th + 1.0)
    pairs = [(4, 4), (6, 6)] if p.bath is Bath.SEPARATE else [(4, 4), (6, 6), (4, 6), (6, 4)]
    for j, k in pairs:
        N[j, k] = thermal
        N[j + 1, k + 1] = w * w * thermal
    return N


def quadrature_scales(p: SystemParams) -> np.ndarray:
    """Factors ``s`` with ``R_normalized = s * R_raw`` (vacuum variance 1/2 each)."""
    w = p.omega_m1
    so = math.sqrt(p.power / w)
    return np.array([so, so, so, so, 1.0, 1.0 / w, 1.0, 1.0 / w])


def normalized_system(p: SystemParams, fp: FixedPoint) -> tuple[np.ndarray, np.ndarray]:
    """Drift and noise in the vacuum-normalized frame; finite at zero drive.

    Assembled directly: the optomechanical couplings carry ``sqrt(power/omega_m)``,
    the mechanical pair rotates at ``omega_m`` and the spring coupling enters
    as ``K/omega_m``.  Equals ``S M S^-1`` and ``S N S`` for ``S = diag(scales)``.
    """
    _require_identical(p)
    w = p.omega_m1
    G = math.sqrt(p.power / w)
    det = fp.x_st + p.delta0
    Q, P = fp.q_st, fp.pq_st
    M = np.zeros((8, 8))
    for j in range(2):
        o, m = 2 * j, 4 + 2 * j
        M[o, o] = M[o + 1, o + 1] = -0.5
        M[o, o + 1] = -det
        M[o + 1, o] = det
        M[o, m] = -G * P
        M[o + 1, m] = G * Q
        M[m, m + 1] = w
        M[m + 1, m] = -w
        M[m + 1, o] = G * Q
        M[m + 1, o + 1] = G * P
    kw = p.kc / w
    M[5, 4] -= kw
    M[5, 6] += kw
    M[7, 4] += kw
    M[7, 6] -= kw
    M += dissipation_matrix(p)
    N = np.zeros((8, 8))
    for o in (0, 1, 2, 3):
        N[o, o] = 0.5
    thermal = p.gamma * (2.0 * p.n_th + 1.0)
    pairs = [(4, 4), (6, 6)] if p.bath is Bath.SEPARATE else [(4, 4), (6, 6), (4, 6), (6, 4)]
    for j, k in pairs:
        N[j, k] = thermal
        N[j + 1, k + 1] = thermal
    return M, N


def stability(M: np.ndarray) -> tuple[np.ndarray, bool]:
    """Eigenvalues of ``M`` and whether all real parts are below ``-1e-10``."""
    ev = np.linalg.eigvals(np.asarray(M, dtype=float))
    return ev, bool(ev.real.max() < -STABILITY_MARGIN)


def _leading_real(p: SystemParams, delta0: float) -> float:
    q = p.replace(delta0=delta0)
    fp = select_fixed_point(find_fixed_points(q)) or find_fixed_points(q)[0]
    return float(np.linalg.eigvals(classical_jacobian(q, fp)).real.max())


def hopf_scan(p: SystemParams, delta_range: tuple[float, float], tol: float = 1e-6) -> float:
    """Detuning where the leading mean-field eigenvalue crosses the imaginary axis.

    Uses the mean-field Jacobian at the stable (or, failing that, lowest)
    symmetric fixed point and bisects on the sign of its largest real part.

    Raises
    ------
    NoBracket
    """
    lo, hi = map(float, delta_range)
    f_lo, f_hi = _leading_real(p, lo), _leading_real(p, hi)
    if (f_lo < 0) == (f_hi < 0):
        raise NoBracket(f"leading real part has the same sign at both ends ({f_lo:.3g}, {f_hi:.3g})")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = _leading_real(p, mid)
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def normal_mode_transform() -> np.ndarray:
    """Orthogonal map from the canonical basis to ``(dQ1, dP1, dQ2, dP2, dx+, dp+, dx-, dp-)``."""
    T = np.eye(8)
    s = 1.0 / math.sqrt(2.0)
    T[4:, 4:] = 0.0
    T[4, 4] = T[4, 6] = s
    T[5, 5] = T[5, 7] = s
    T[6, 4], T[6, 6] = s, -s
    T[7, 5], T[7, 7] = s, -s
    return T


def cb_normal_mode_matrices(p: SystemParams, fp: FixedPoint) -> tuple[np.ndarray, np.ndarray]:
    """Common-bath drift and noise written directly in the normal-mode basis.

    Only the centre-of-mass mode couples to the bath, at twice the single-unit
    rate; the relative mode evolves without damping or noise of its own.
    Ordering: ``(dQ1, dP1, dQ2, dP2, dx+, dp+, dx-, dp-)``; raw units.
    """
    _require_identical(p)
    if p.bath is not Bath.COMMON:
        raise ParameterError("normal-mode bath matrices are defined for the common bath only")
    if p.power <= 0.0:
        raise ParameterError("raw optical noise diverges at zero drive")
    w = p.omega_m1
    om_plus2, om_minus2 = w * w, w * w + 2.0 * p.kc
    det = fp.x_st + p.delta0
    Q, P = fp.q_st, fp.pq_st
    s = 1.0 / math.sqrt(2.0)
    M = np.zeros((8, 8))
    for j, sign in ((0, 1.0), (1, -1.0)):
        o = 2 * j
        M[o, o] = M[o + 1, o + 1] = -0.5
        M[o, o + 1] = -det
        M[o + 1, o] = det
        # dx_j = (dx+ +- dx-)/sqrt2
        M[o, 4] = -P * s
        M[o, 6] = -P * s * sign
        M[o + 1, 4] = Q * s
        M[o + 1, 6] = Q * s * sign
        # radiation force on dp+ and dp-
        M[5, o] += p.power * Q * s
        M[5, o + 1] += p.power * P * s
        M[7, o] += p.power * Q * s * sign
        M[7, o + 1] += p.power * P * s * sign
    M[4, 5] = 1.0
    M[4, 4] = -2.0 * p.gamma
    M[5, 4] = -om_plus2
    M[5, 5] = -2.0 * p.gamma
    M[6, 7] = 1.0
    M[7, 6] = -om_minus2
    N = np.zeros((8, 8))
    for o in (0, 1, 2, 3):
        N[o, o] = 0.5 * w / p.power
    thermal = 2.0 * p.gamma * (2.0 * p.n_th + 1.0)
    N[4, 4] = thermal
    N[5, 5] = w * w * thermal
    return M, N


def write_matrix_csv(matrix: np.ndarray, path: str | Path, digits: int = 17) -> Path:
    """Dump an 8x8 matrix with the canonical labels as header."""
    path = Path(path)
    fmt = f"{{:.{digits}g}}".format
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("row",) + LABELS)
        for label, row in zip(LABELS, np.asarray(matrix)):
            w.writerow([label] + [fmt(v) for v in row])
    return path
