import math

import numpy as np
import pytest

from omdiss.errors import AllUnstable, NoBracket
from omdiss.experiments import (detuning_landmarks, evaluate, optimize_detuning, optimize_power,
                                sideband_scan, stability_limit, steady_scan)
from omdiss.params import Bath, normal_modes

from conftest import quantum_point


def test_evaluate_status_codes():
    res, status = evaluate(quantum_point())
    assert status == "ok" and res.e_n_mech > 0
    assert evaluate(quantum_point(power=400.0)) == (None, "unstable")


def test_steady_scan_marks_unstable_cells():
    recs = steady_scan(quantum_point(delta0=-3.0), "power", [1.0, 12.0, 400.0])
    assert [r.status for r in recs] == ["ok", "ok", "unstable"]
    assert [r.coords for r in recs] == [{"power": 1.0}, {"power": 12.0}, {"power": 400.0}]
    with pytest.raises(ValueError):
        steady_scan(quantum_point(), "temperature", [1.0])


def test_steady_scan_is_independent_of_worker_count():
    values = np.linspace(-5, -1, 8)
    one = steady_scan(quantum_point(), "delta0", values, workers=1)
    two = steady_scan(quantum_point(), "delta0", values, workers=2)
    assert one == two


def test_stability_limit():
    p = quantum_point()
    pc = stability_limit(p, "power", (1.0, 1000.0))
    assert evaluate(p.replace(power=pc))[1] == "ok"
    assert evaluate(p.replace(power=pc * (1 + 1e-6)))[1] == "unstable"
    assert stability_limit(p, "power", (1000.0, 1.0)) == pytest.approx(pc, rel=1e-7)
    with pytest.raises(NoBracket):
        stability_limit(p, "power", (1.0, 2.0))


def test_detuning_optimum_is_a_local_extremum():
    p = quantum_point(0.6, Bath.COMMON)
    r = optimize_detuning(p, (-7.0, -1.5), n_grid=64)
    for opt, sign, key in [(r.cooling, 1, "n_eff"), (r.entanglement, -1, "e_n_mech")]:
        assert -7.0 < opt.arg < -1.5 and not opt.boundary
        here = getattr(evaluate(p.replace(delta0=opt.arg))[0], key)
        assert here == pytest.approx(opt.value, rel=1e-12)
        for step in (-1e-3, 1e-3):
            there = getattr(evaluate(p.replace(delta0=opt.arg + step))[0], key)
            assert sign * there >= sign * here


def test_truncated_range_is_flagged_as_boundary():
    r = optimize_detuning(quantum_point(0.6, Bath.SEPARATE), (-3.0, -1.0), n_grid=64)
    # the cooling optimum lies below -3, outside the range
    assert r.cooling.boundary and r.cooling.arg == pytest.approx(-3.0, abs=1e-4)


def test_optimizer_argument_checks():
    with pytest.raises(ValueError):
        optimize_detuning(quantum_point(), (-4, -2), n_grid=10)
    with pytest.raises(ValueError):
        optimize_power(quantum_point(), (0.0, 10.0))
    with pytest.raises(AllUnstable):
        optimize_power(quantum_point(), (300.0, 1000.0), n_grid=64)


def test_unstable_cells_are_skipped():
    r = optimize_power(quantum_point(delta0=-3.0), (1.0, 1000.0), n_grid=64)
    assert r.n_unstable > 0
    assert r.cooling.arg < 153.2 and r.entanglement.arg < 153.2


@pytest.fixture(scope="module")
def power_optima():
    return {b: optimize_power(quantum_point(1.0, b, delta0=-3.0), (1e-2, 1e3)) for b in Bath}


def test_occupancy_has_interior_minimum_in_power(power_optima):
    for r in power_optima.values():
        c = r.cooling
        assert not c.boundary
        n = [rec.result.n_eff for rec in r.records if rec.ok]
        assert n[0] > c.value and n[-1] > c.value


def test_common_bath_needs_less_power(power_optima):
    assert power_optima[Bath.COMMON].cooling.arg < power_optima[Bath.SEPARATE].cooling.arg
    assert power_optima[Bath.COMMON].cooling.value < power_optima[Bath.SEPARATE].cooling.value


def test_weak_drive_leaves_the_bath_occupancy():
    # uncoupled units: without cooling the local occupancy is the bath's
    res, _ = evaluate(quantum_point(0.0, Bath.SEPARATE, power=1e-8))
    assert res.n_eff == pytest.approx(quantum_point().n_th, rel=1e-5)
    r = optimize_power(quantum_point(0.0, Bath.SEPARATE, delta0=-3.0), (1e-8, 1e3), n_grid=128)
    assert r.records[0].result.n_eff == pytest.approx(quantum_point().n_th, rel=1e-5)


def test_power_optimum_reports_coupling(power_optima):
    for r in power_optima.values():
        assert 0 < r.cooling.g_over_omega < 1
        assert math.isfinite(r.entanglement.g_over_omega)


def test_landmarks():
    p = quantum_point(1.0)
    m = detuning_landmarks(p)
    assert m["minus_omega_plus"] == -3.0
    assert m["minus_omega_bar"] == pytest.approx(-normal_modes(p).omega_bar)


def test_sideband_scan_structure():
    recs = sideband_scan([2.0, 3.0], n_grid=64, power_range=(1e-1, 1e4))
    assert [(r.omega_m, r.curve) for r in recs] == [(2.0, "sb"), (2.0, "cb"), (2.0, "single"),
                                                    (3.0, "sb"), (3.0, "cb"), (3.0, "single")]
    assert all(r.status == "ok" for r in recs)
    single = [r for r in recs if r.curve == "single"]
    # independent units never entangle
    assert all(r.result.entanglement.value == 0.0 for r in single)
