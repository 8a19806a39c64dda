import math

import numpy as np
import pytest

from partint import dynamics as dyn
from partint.analysis import candidate
from partint.dynamics import IntegratorConfig, integrate
from partint.geometry import Formalism, HamiltonianSystem, Kind

import oracles


def osc(gamma=0.3):
    return HamiltonianSystem.from_text(Formalism(Kind.CONTACT, 1, ("q",), ("p",)),
                                       "p^2/2 + q^2/2 + gamma*z", {"gamma": gamma})


def test_projectile_matches_closed_form(projectile):
    cfg = IntegratorConfig(t_span=(0, 5))
    tr = integrate(projectile, dict(x=0, y=0, p_x=1, p_y=0, z=0), cfg)
    assert tr.final["p_x"] == pytest.approx(math.exp(-2.5), abs=1e-7)
    ref = oracles.projectile(tr.times, 1.0, 9.8, 0.5, 0, 0, 1, 0, 0)
    for name, col in zip(tr.chart, ref):
        np.testing.assert_allclose(tr.column(name), col, atol=1e-6)


def test_free_particle():
    sys = HamiltonianSystem.from_text(Formalism(Kind.SYMPLECTIC, 1, ("q",), ("p",)), "p^2/2")
    tr = integrate(sys, [0.0, 1.0], IntegratorConfig())
    assert tr.final == pytest.approx({"q": 1.0, "p": 1.0}, abs=1e-12)


def test_time_coordinate_tracks_time():
    sys = HamiltonianSystem.from_text(Formalism(Kind.COSYMPLECTIC, 1, ("q",), ("p",)), "p^2/2")
    tr = integrate(sys, [0.0, 1.0, 2.0], IntegratorConfig(t_span=(2.0, 7.0)))
    np.testing.assert_allclose(tr.column("t"), tr.times, rtol=1e-14)
    np.testing.assert_array_equal(dyn.observe_along(tr, "t").values, tr.column("t"))


def test_inconsistent_time_rejected():
    sys = HamiltonianSystem.from_text(Formalism(Kind.COCONTACT, 1), "p1^2/2")
    with pytest.raises(dyn.InconsistentTimeError):
        integrate(sys, [0.5, 0, 1, 0], IntegratorConfig(t_span=(0, 1)))


def test_energy_conserved_long_run():
    sys = HamiltonianSystem.from_text(Formalism(Kind.SYMPLECTIC, 1), "p1^2/2 + q1^2/2")
    tr = integrate(sys, [1.0, 0.0], IntegratorConfig(t_span=(0, 100), rtol=1e-10))
    H = dyn.observe_along(tr, sys.H).values
    assert np.max(np.abs(H - H[0])) <= 1e-9


def test_observe_reports_sample_index():
    sys = HamiltonianSystem.from_text(Formalism(Kind.SYMPLECTIC, 1), "p1^2/2")
    tr = integrate(sys, [-1.0, 1.0], IntegratorConfig(t_span=(0, 2)))
    with pytest.raises(Exception, match="sample"):
        dyn.observe_along(tr, "log(q1)")


def test_dissipation_law_projectile(projectile):
    tr = integrate(projectile, dict(x=0, y=0, p_x=1, p_y=1, z=0), IntegratorConfig(t_span=(0, 10)))
    rep = dyn.check_dissipation_law(projectile, tr, "p_x")
    assert rep.passed and rep.details["sup_rel_dev"] <= 1e-6
    zero = integrate(projectile, dict(x=0, y=0, p_x=0, p_y=1, z=0), IntegratorConfig(t_span=(0, 10)))
    assert dyn.check_dissipation_law(projectile, zero, "p_x").sup_residual == 0.0


def test_dissipation_law_damped_oscillator():
    sys = osc()
    tr = integrate(sys, [1.0, 0.0, 0.0], IntegratorConfig(t_span=(0, 10)))
    assert dyn.check_dissipation_law(sys, tr, sys.H).passed
    q, p, z = oracles.damped_oscillator(tr.times, 0.3, 1.0, 0.0, 0.0)
    np.testing.assert_allclose(tr.column("q"), q, atol=1e-7)
    np.testing.assert_allclose(tr.column("z"), z, atol=1e-7)


def test_dissipation_law_needs_action():
    sys = HamiltonianSystem.from_text(Formalism(Kind.SYMPLECTIC, 1), "p1^2/2")
    tr = integrate(sys, [0.0, 1.0], IntegratorConfig())
    with pytest.raises(Exception):
        dyn.check_dissipation_law(sys, tr, "p1")


def test_level_set_invariance_examples(projectile):
    cfg = IntegratorConfig(t_span=(0, 10))
    rep = dyn.check_level_set_invariance(projectile, candidate(projectile, "p_x"),
                                         dict(x=0, y=0, p_x=0, p_y=1, z=0), cfg)
    assert rep.passed and rep.sup_residual <= 1e-9
    sym = HamiltonianSystem.from_text(Formalism(Kind.SYMPLECTIC, 1), "p1^2/2 + q1^2/2")
    rep = dyn.check_level_set_invariance(sym, candidate(sym, sym.H.unparse()), [0.0, 0.0], cfg)
    assert rep.passed and rep.sup_residual == 0.0
    forced = HamiltonianSystem.from_text(Formalism(Kind.COSYMPLECTIC, 1, ("q",), ("p",)),
                                         "p^2/2 + sin(t)*q")
    rep = dyn.check_level_set_invariance(forced, candidate(forced, "p"), [0, 0, 0], cfg)
    assert not rep.passed and rep.sup_residual == pytest.approx(2.0, abs=1e-3)
    with pytest.raises(ValueError):
        dyn.check_level_set_invariance(forced, candidate(forced, "p"), [0, 0.1, 0], cfg)


def test_rk4_fourth_order():
    sys = osc()
    errs = []
    for h in (1e-2, 5e-3):
        tr = integrate(sys, [1.0, 0.0, 0.0], IntegratorConfig(t_span=(0, 10), method="rk4", step=h))
        ref = np.array(oracles.damped_oscillator(10.0, 0.3, 1.0, 0.0, 0.0))
        errs.append(np.max(np.abs(tr.states[-1] - ref)))
    assert 8 <= errs[0] / errs[1] <= 32


def test_rk4_grid():
    sys = osc()
    tr = integrate(sys, [1.0, 0.0, 0.0], IntegratorConfig(t_span=(0, 1), method="rk4", step=0.3))
    np.testing.assert_allclose(tr.times, [0, 0.3, 0.6, 0.9, 1.0])


def test_trajectory_invariants_and_csv(projectile, tmp_path):
    tr = integrate(projectile, dict(x=0, y=0, p_x=1, p_y=1, z=0), IntegratorConfig(t_span=(0, 3)))
    assert np.all(np.diff(tr.times) > 0)
    assert tr.states.shape == (len(tr.times), len(projectile.chart))
    path = tr.to_csv(tmp_path / "t.csv")
    header = path.read_text().splitlines()[0]
    assert header == "t,x,y,p_x,p_y,z"
    chart, times, states = dyn.read_csv(path)
    assert chart == tr.chart
    np.testing.assert_array_equal(times, tr.times)
    np.testing.assert_array_equal(states, tr.states)


def test_zero_length_span():
    sys = osc()
    tr = integrate(sys, [1.0, 0.0, 0.0], IntegratorConfig(t_span=(0, 0)))
    assert len(tr) == 1


@pytest.mark.parametrize("kwargs", [
    dict(rtol=1e-15), dict(t_span=(1, 0)), dict(max_steps=0), dict(method="euler"), dict(step=0),
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        IntegratorConfig(**kwargs)


def test_max_steps_exhausted():
    with pytest.raises(dyn.IntegrationError):
        integrate(osc(), [1.0, 0.0, 0.0], IntegratorConfig(t_span=(0, 10), max_steps=5))


def test_blow_up_is_reported():
    sys = HamiltonianSystem.from_text(Formalism(Kind.SYMPLECTIC, 1), "-q1^4/4 + p1^2/2")
    # qddot = q^3 blows up in finite time from q=1, p=1/sqrt(2)
    with pytest.raises(dyn.IntegrationError):
        integrate(sys, [1.0, 1 / math.sqrt(2)], IntegratorConfig(t_span=(0, 5)))
