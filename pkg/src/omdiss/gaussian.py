"""Steady-state covariance of the linear fluctuations and Gaussian observables.

Covariance matrices handed to the observables live in the vacuum-normalized
frame (each quadrature has vacuum variance 1/2, ``[q, p] = i``), in the
canonical ordering of :mod:`omdiss.linear`.  Mode ``k`` occupies rows
``2k, 2k+1``: modes 0 and 1 are the cavities, 2 and 3 the mechanical units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from numba import njit

from .errors import (IllConditioned, NegativeOccupancy, NonFiniteState, UnphysicalCovariance,
                     UnphysicalSubmatrix, UnstableDrift)
from .integrator import dopri5
from .linear import (FixedPoint, find_fixed_points, normalized_system, quadrature_scales,
                     select_fixed_point, stability)
from .params import Bath, SystemParams

__all__ = [
    "CovarianceMatrix",
    "QuantumResult",
    "lyapunov_residual",
    "lyapunov_steady",
    "evolve_covariance",
    "relaxation_time",
    "symplectic_form",
    "symplectic_eigenvalues",
    "check_physical",
    "log_negativity",
    "occupancy",
    "steady_covariance",
    "quantum_result",
    "MODES",
]

MODES = {"o1": 0, "o2": 1, "m1": 2, "m2": 3}
PHYSICAL_TOL = 1e-9
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class CovarianceMatrix:
    """Vacuum-normalized steady covariance plus provenance.

    ``scales`` converts back to the raw units of the drift matrix:
    ``raw = matrix / outer(scales, scales)``.
    """

    matrix: np.ndarray = field(repr=False)
    scales: np.ndarray = field(repr=False)
    bath: Bath
    params_digest: str
    residual: float = 0.0

    def raw(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.matrix / np.outer(self.scales, self.scales)

    def symplectic_eigenvalues(self) -> np.ndarray:
        return symplectic_eigenvalues(self.matrix)


@dataclass(frozen=True)
class QuantumResult:
    e_n_mech: float
    e_n_optmech: float
    n_eff1: float
    n_eff2: float
    residual: float
    stable: bool

    @property
    def n_eff(self) -> float:
        return 0.5 * (self.n_eff1 + self.n_eff2)


def lyapunov_residual(M: np.ndarray, C: np.ndarray, N: np.ndarray) -> float:
    """Largest entry of ``|M C + C M^T + N|``."""
    return float(np.abs(M @ C + C @ M.T + N).max())


def _kronecker_solve(M: np.ndarray, N: np.ndarray) -> np.ndarray:
    n = M.shape[0]
    eye = np.eye(n)
    L = np.kron(eye, M) + np.kron(M, eye)
    c = np.linalg.solve(L, -N.reshape(-1, order="F"))
    return c.reshape((n, n), order="F")


def lyapunov_steady(M, N, rel_tol: float = RESIDUAL_TOL, refine: int = 3) -> np.ndarray:
    """Solve ``M C + C M^T + N = 0`` for a stable drift ``M``.

    Bartels-Stewart (Schur) solve with a few steps of residual refinement; a
    dense Kronecker solve is the fallback when the residual bound is missed.

    Raises
    ------
    UnstableDrift
        If any eigenvalue of ``M`` has real part ``>= -1e-10``.
    IllConditioned
        If neither route reaches ``residual <= rel_tol * max|N|``.
    """
    M = np.asarray(M, dtype=float)
    N = np.asarray(N, dtype=float)
    _, stable = stability(M)
    if not stable:
        raise UnstableDrift("drift matrix is not Hurwitz; no steady state")
    bound = rel_tol * max(np.abs(N).max(), np.finfo(float).tiny)

    def polish(C):
        C = 0.5 * (C + C.T)
        for _ in range(refine):
            R = M @ C + C @ M.T + N
            if np.abs(R).max() <= 0.01 * bound:
                break
            dC = scipy.linalg.solve_continuous_lyapunov(M, -R)
            C = C + 0.5 * (dC + dC.T)
        return C

    C = polish(scipy.linalg.solve_continuous_lyapunov(M, -N))
    if not np.all(np.isfinite(C)) or lyapunov_residual(M, C, N) > bound:
        C = polish(_kronecker_solve(M, N))
    res = lyapunov_residual(M, C, N)
    if not np.all(np.isfinite(C)) or res > bound:
        raise IllConditioned(f"Lyapunov residual {res:.3g} exceeds {bound:.3g}")
    return C


@njit(cache=True)
def _cov_rhs(t, y, args, out):
    n = int(args[0])
    M = args[1:1 + n * n].reshape((n, n))
    N = args[1 + n * n:1 + 2 * n * n].reshape((n, n))
    C = np.empty((n, n))
    k = 0
    for i in range(n):
        for j in range(i, n):
            C[i, j] = y[k]
            C[j, i] = y[k]
            k += 1
    k = 0
    for i in range(n):
        for j in range(i, n):
            acc = N[i, j]
            for l in range(n):
                acc += M[i, l] * C[l, j] + C[i, l] * M[j, l]
            out[k] = acc
            k += 1


def evolve_covariance(C0, M, N, t_end: float, rtol: float = 1e-12, atol: float = 1e-14,
                      n_samples: int = 1):
    """Integrate ``dC/dt = M C + C M^T + N`` from ``C0`` up to ``t_end``.

    Only the upper triangle is propagated, so the result is symmetric by
    construction (an antisymmetric part of ``C0`` is discarded).  Returns the
    final matrix, or ``n_samples`` equally spaced matrices ending at ``t_end``
    when ``n_samples > 1``.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    M = np.asarray(M, dtype=float)
    N = np.asarray(N, dtype=float)
    C0 = np.asarray(C0, dtype=float)
    n = M.shape[0]
    iu = np.triu_indices(n)
    y0 = C0[iu]
    args = np.concatenate([[float(n)], M.ravel(), N.ravel()])
    times = np.linspace(0.0, t_end, n_samples + 1)[1:]
    ys, _ = dopri5(_cov_rhs, 0.0, y0, times, args, rtol=rtol, atol=atol)
    out = []
    for y in ys:
        C = np.zeros((n, n))
        C[iu] = y
        C = C + C.T - np.diag(np.diag(C))
        if not np.all(np.isfinite(C)):
            raise NonFiniteState("covariance diverged")
        out.append(C)
    return out[0] if n_samples == 1 else np.array(out)


def relaxation_time(M) -> float:
    """Inverse of the slowest decay rate of ``M``."""
    rate = -np.linalg.eigvals(np.asarray(M, dtype=float)).real.max()
    return math.inf if rate <= 0 else 1.0 / rate


def symplectic_form(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def symplectic_eigenvalues(C) -> np.ndarray:
    """Ascending symplectic spectrum: moduli of the eigenvalues of ``i Omega C``."""
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1] or C.shape[0] % 2:
        raise ValueError("need an even-dimensional square matrix")
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(C.shape[0] // 2) @ C))
    return np.sort(ev)[::2]


def check_physical(C) -> np.ndarray:
    """Return the symplectic spectrum of ``C``, raising if any value is below 1/2.

    Raises
    ------
    UnphysicalCovariance
    """
    C = C.matrix if isinstance(C, CovarianceMatrix) else np.asarray(C, dtype=float)
    if np.abs(C - C.T).max() > 1e-12 * max(1.0, np.abs(C).max()):
        raise UnphysicalCovariance("covariance matrix is not symmetric")
    nu = symplectic_eigenvalues(C)
    if nu[0] < 0.5 - PHYSICAL_TOL:
        raise UnphysicalCovariance(f"symplectic eigenvalue {nu[0]:.6g} < 1/2")
    return nu


def _mode_index(mode) -> int:
    if isinstance(mode, str):
        try:
            return MODES[mode]
        except KeyError:
            raise ValueError(f"unknown mode {mode!r}; expected one of {sorted(MODES)}") from None
    return int(mode)


def _two_mode_block(C, pair) -> np.ndarray:
    i, j = (_mode_index(m) for m in pair)
    if i == j:
        raise ValueError("log_negativity needs two distinct modes")
    idx = [2 * i, 2 * i + 1, 2 * j, 2 * j + 1]
    C = C.matrix if isinstance(C, CovarianceMatrix) else np.asarray(C, dtype=float)
    return C[np.ix_(idx, idx)]


def log_negativity(C, pair=("m1", "m2")) -> float:
    """Logarithmic negativity ``max(0, -ln 2 nu)`` of a two-mode reduction.

    ``nu`` is the smaller symplectic eigenvalue of the partial transpose
    (momentum of the second mode reflected).  It is taken from the spectrum
    of ``i Omega V`` rather than from the closed form in the two-mode
    invariants ``Delta = det A + det B - 2 det K`` and ``det V``, whose
    discriminant ``Delta^2 - 4 det V`` cancels to round-off near the
    separability boundary and costs about 1e-8 in ``nu``.

    Raises
    ------
    UnphysicalSubmatrix
        If the reduced state violates the uncertainty relation.
    """
    V = _two_mode_block(C, pair)
    nu = symplectic_eigenvalues(V)
    if nu[0] < 0.5 - PHYSICAL_TOL:
        raise UnphysicalSubmatrix(f"two-mode block has symplectic eigenvalue {nu[0]:.6g} < 1/2")
    flip = np.diag([1.0, 1.0, 1.0, -1.0])
    nu_pt = symplectic_eigenvalues(flip @ V @ flip)[0]
    if not nu_pt > 0.0:
        raise UnphysicalSubmatrix("degenerate partially transposed spectrum")
    return max(0.0, -math.log(2.0 * nu_pt))


def occupancy(C, j: int, omega_m: float | None = None) -> float:
    """Mean phonon number ``(<x^2> + <y^2>)/2 - 1/2`` of mechanical unit ``j`` (1 or 2).

    ``C`` is a :class:`CovarianceMatrix`, or a raw 8x8 array together with
    ``omega_m``, in which case ``y = p/omega_m``.
    """
    if j not in (1, 2):
        raise ValueError("mechanical unit index must be 1 or 2")
    k = 4 + 2 * (j - 1)
    if isinstance(C, CovarianceMatrix):
        vx, vy = C.matrix[k, k], C.matrix[k + 1, k + 1]
    else:
        if omega_m is None:
            raise ValueError("omega_m is required for a raw covariance array")
        C = np.asarray(C, dtype=float)
        vx, vy = C[k, k], C[k + 1, k + 1] / omega_m**2
    n = 0.5 * (vx + vy) - 0.5
    if n < -PHYSICAL_TOL:
        raise NegativeOccupancy(f"occupancy {n:.3g} < 0: normalization error")
    return float(max(n, 0.0))


def steady_covariance(p: SystemParams, fp: FixedPoint | None = None) -> CovarianceMatrix:
    """Steady covariance at ``fp`` (default: the stable root of smallest ``|x_st|``).

    Raises
    ------
    UnstableDrift
        No stable fixed point, or ``fp`` is unstable.
    """
    if fp is None:
        fp = select_fixed_point(find_fixed_points(p))
        if fp is None:
            raise UnstableDrift("no stable fixed point")
    M, N = normalized_system(p, fp)
    C = lyapunov_steady(M, N)
    check_physical(C)
    return CovarianceMatrix(matrix=C, scales=quadrature_scales(p), bath=p.bath,
                            params_digest=p.digest(), residual=lyapunov_residual(M, C, N))


def quantum_result(p: SystemParams, fp: FixedPoint | None = None) -> QuantumResult:
    cov = steady_covariance(p, fp)
    return QuantumResult(
        e_n_mech=log_negativity(cov, ("m1", "m2")),
        e_n_optmech=log_negativity(cov, ("o1", "m1")),
        n_eff1=occupancy(cov, 1),
        n_eff2=occupancy(cov, 2),
        residual=cov.residual,
        stable=True,
    )
