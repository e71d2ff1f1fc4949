"""Shared fixtures and the package-wide physicality guard."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import omdiss.gaussian as gaussian
import omdiss.sync as sync
from omdiss.params import Bath, SystemParams

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

OMEGA_Q = 3.0
N_TH = 9.508


def quantum_point(kc_ratio=1.0, bath=Bath.SEPARATE, **kw) -> SystemParams:
    """Entanglement/cooling reference point, optionally modified."""
    base = dict(gamma=OMEGA_Q / 1e5, kc=kc_ratio * OMEGA_Q**2, delta0=-3.0, power=12.0,
                n_th=N_TH, bath=bath)
    base.update(kw)
    return SystemParams.identical(OMEGA_Q, **base)


def oscillation_point(bath=Bath.SEPARATE, **kw) -> SystemParams:
    """Self-sustained oscillation reference point."""
    base = dict(gamma=0.01, kc=0.0, delta0=1.0, power=0.36, bath=bath)
    base.update(kw)
    return SystemParams.identical(1.0, **base)


# Every covariance, negativity and correlation computed while the suite runs
# passes through these wrappers, so a violation anywhere fails the test at hand.
PHYSICALITY = {"covariances": 0, "min_symplectic": np.inf, "negativities": 0,
               "min_negativity": np.inf, "pearsons": 0, "pearson_range": [np.inf, -np.inf]}


@pytest.fixture(autouse=True, scope="session")
def physicality_guard():
    check, logneg, pearson = gaussian.check_physical, gaussian.log_negativity, sync.pearson

    def guarded_check(C):
        nu = check(C)
        PHYSICALITY["covariances"] += 1
        PHYSICALITY["min_symplectic"] = min(PHYSICALITY["min_symplectic"], float(nu[0]))
        assert nu[0] >= 0.5 - 1e-9
        return nu

    def guarded_logneg(C, pair=("m1", "m2")):
        e = logneg(C, pair)
        PHYSICALITY["negativities"] += 1
        PHYSICALITY["min_negativity"] = min(PHYSICALITY["min_negativity"], e)
        assert e >= 0.0
        return e

    def guarded_pearson(x1, x2):
        c = pearson(x1, x2)
        PHYSICALITY["pearsons"] += 1
        lo, hi = PHYSICALITY["pearson_range"]
        PHYSICALITY["pearson_range"] = [min(lo, c), max(hi, c)]
        assert -1.0 <= c <= 1.0
        return c

    with pytest.MonkeyPatch.context() as mp:
        mp.setattr(gaussian, "check_physical", guarded_check)
        mp.setattr(gaussian, "log_negativity", guarded_logneg)
        mp.setattr(sync, "pearson", guarded_pearson)
        yield PHYSICALITY


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
    if PHYSICALITY["covariances"]:
        terminalreporter.write_line(
            f"physicality guard: {PHYSICALITY['covariances']} covariances "
            f"(min symplectic eigenvalue {PHYSICALITY['min_symplectic']:.6g}), "
            f"{PHYSICALITY['negativities']} negativities, {PHYSICALITY['pearsons']} correlations")
