"""Acceptance criteria 1-7.

Each criterion is a function returning ``(ok, detail)``; the pytest wrapper
prints one ``CRITERION n: PASS|FAIL`` line per criterion (visible under
``pytest -v`` and when this file is run as a script) and then asserts.
"""

import dataclasses
import json
import tempfile
from pathlib import Path

import numpy as np
import pytest

from partint import analysis as an
from partint import expr as ex
from partint import geometry as geo
from partint import reduction as red
from partint import scenario as sc
from partint.analysis import SamplePlan, candidate
from partint.dynamics import IntegratorConfig, integrate, observe_along
from partint.geometry import Formalism, HamiltonianSystem, Kind

import oracles
from randexpr import central_gradient, polynomial, smooth

GAMMA = 0.5
PROJECTILE_H = "(p_x^2 + p_y^2)/(2*m) + m*G*y + gamma*z"


def projectile():
    fm = Formalism(Kind.CONTACT, 2, ("x", "y"), ("p_x", "p_y"))
    return HamiltonianSystem.from_text(fm, PROJECTILE_H, {"m": 1.0, "G": 9.8, "gamma": GAMMA})


class Checks:
    """Collects named sub-checks of one criterion."""

    def __init__(self):
        self.items = []

    def add(self, label, value, ok):
        self.items.append((label, value, bool(ok)))

    def result(self):
        ok = all(o for _, _, o in self.items)
        # failing sub-checks first, marked with '!'
        parts = [("" if o else "!") + f"{label}={value:.3g}"
                 for label, value, o in sorted(self.items, key=lambda i: i[2])]
        return ok, "; ".join(parts)


def criterion_1():
    c = Checks()
    sys = projectile()
    tr = integrate(sys, dict(x=0, y=0, p_x=1, p_y=0, z=0), IntegratorConfig(t_span=(0, 10), rtol=1e-9))
    px = tr.column("p_x")
    exact = np.exp(-GAMMA * tr.times)
    dev = float(np.max(np.abs(px - exact) / exact))
    c.add("sup_rel_dev_p_x", dev, dev <= 1e-6)
    xs = SamplePlan(count=256, seed=0).draw(sys)
    br = max(abs(geo.bracket(sys, "p_x", sys.H, x)) for x in xs)
    c.add("sup_bracket", br, br <= 1e-12)
    xh = geo.hamiltonian_field(sys, sys.H)
    g = sys.observable(sys.parse("p_x"))
    law = max(abs(xh.apply(g, x) + GAMMA * g.value(x)) for x in xs)
    c.add("sup_X_H_p_x_plus_gamma_p_x", law, law <= 1e-12)
    return c.result()


def criterion_2():
    c = Checks()
    sys = projectile()
    x0 = dict(x=0.7, y=1.0, p_x=0, p_y=2.0, z=0.3)
    cfg = IntegratorConfig(t_span=(0, 10), rtol=1e-10)
    full = integrate(sys, x0, cfg)
    sr = red.slice_reduce(sys, "p_x")
    c.add("reduced_dim", float(len(sr.reduced.chart)), sr.reduced.chart == ("y", "p_y", "z"))
    reduced = integrate(sr.reduced, sr.restrict(sys.point(x0)), cfg)
    cmp = red.compare_trajectories(full, reduced, ["y", "p_y", "z"])
    c.add("sup_deviation_y_p_y_z", cmp.sup_deviation, cmp.sup_deviation <= 1e-6)
    xr = red.reconstruct_cyclic(reduced, sr, x0["x"]).values
    drift = float(np.max(np.abs(xr - x0["x"])))
    c.add("x_drift", drift, drift <= 1e-9)
    return c.result()


def _shipped_particular_integrals():
    for name in sc.catalog_names():
        entry = sc.catalog_entry(name)
        expected = dict(entry.expected)
        for spec in entry.config.candidates:
            if any(expected.get(f"{spec.name}:{k}") == "pass"
                   for k in ("particular_integral", "dissipated_quantity")):
                yield entry.config, spec


def criterion_3():
    c = Checks()
    for cfg, spec in _shipped_particular_integrals():
        sys = cfg.system
        cand = candidate(sys, spec.g)
        for ic in cfg.initial_conditions:
            x0, _ = an.project(sys, [cand], cfg.initial_state(ic.name))
            t0 = float(x0[sys.formalism.t_index]) if sys.formalism.t_index is not None else 0.0
            icfg = dataclasses.replace(cfg.integrator, t_span=(t0, t0 + 10))
            tr = integrate(sys, x0, icfg)
            drift = float(np.max(np.abs(observe_along(tr, cand.g).values)))
            c.add(f"{cfg.name}:{spec.name}@{ic.name}", drift, drift <= 1e-6)
    neg = sc.catalog_entry("cosymplectic_forced_negative").config
    g = candidate(neg.system, "p")
    tr = integrate(neg.system, [0.0, 0.0, 0.0], IntegratorConfig(t_span=(0, 1)))
    drift = float(np.max(np.abs(observe_along(tr, g.g).values)))
    c.add("negative_drift_by_t1", drift, drift > 1e-2)
    rep = an.verify_particular_integral(neg.system, g, SamplePlan())
    c.add("negative_verifier_failures", float(len(rep.failures)), not rep.passed)
    return c.result()


def _triples(kind, seed, count=100):
    rng = np.random.default_rng(seed)
    sys = HamiltonianSystem.from_text(Formalism(kind, 2), "0*q1 + 1")
    for _ in range(count):
        fs = [sys.parse(polynomial(rng, sys.chart, terms=3, degree=3)) for _ in range(3)]
        yield sys, fs, rng.uniform(-1, 1, len(sys.chart))


def criterion_4():
    c = Checks()
    for kind in Kind:
        anti = jac = 0.0
        for sys, (f, g, h), x in _triples(kind, 41):
            anti = max(anti, abs(geo.bracket(sys, f, g, x) + geo.bracket(sys, g, f, x)))
            B = lambda a, b: geo.bracket_observable(sys, a, b)
            jac = max(jac, abs(geo.bracket(sys, f, B(g, h), x) + geo.bracket(sys, g, B(h, f), x)
                               + geo.bracket(sys, h, B(f, g), x)))
        c.add(f"{kind.value}_antisymmetry", anti, anti <= 1e-9)
        c.add(f"{kind.value}_jacobi", jac, jac <= 1e-7)
    for kind in (Kind.SYMPLECTIC, Kind.COSYMPLECTIC):
        worst = 0.0
        for sys, (f, g, h), x in _triples(kind, 42):
            gh = sys.parse(f"({g.unparse()})*({h.unparse()})")
            rhs = (sys.observable(g).value(x) * geo.bracket(sys, f, h, x)
                   + sys.observable(h).value(x) * geo.bracket(sys, f, g, x))
            worst = max(worst, abs(geo.bracket(sys, f, gh, x) - rhs))
        c.add(f"{kind.value}_leibniz", worst, worst <= 1e-9)
    # {z, q1*q1} - 2 q1 {z, q1} = q1^2
    sys = HamiltonianSystem.from_text(Formalism(Kind.CONTACT, 1), "0*q1 + 1")
    x = np.array([1.0, 0.3, -0.2])
    viol = abs(geo.bracket(sys, "z", "q1*q1", x) - 2 * x[0] * geo.bracket(sys, "z", "q1", x))
    c.add("contact_leibniz_violation", viol, viol >= 1e-3)
    return c.result()


BUNDLE_LIMITS = {"reeb_conditions": 1e-12, "involution_on_level_set": 1e-8,
                 "dynamical_tangency": 1e-8, "lie_bracket_tangency": 1e-5}


def _family(name, family):
    cfg = sc.catalog_entry(name).config
    fam = next(f for f in cfg.families if f.name == family)
    gs = [candidate(cfg.system, cfg.candidate(m).g, label=m) for m in fam.members]
    return cfg.system, gs


def criterion_5():
    c = Checks()
    plan = SamplePlan(count=64, seed=0)
    for name, family in (("free_particle", "momenta"), ("cosymplectic_oscillator", "shell_only"),
                         ("contact_good", "H_p2")):
        sys, gs = _family(name, family)
        rep = an.verify_theorem_hypotheses(sys, gs, plan)
        c.add(f"{name}_bundle", float(len(rep.failures)), rep.passed)
        sigma = rep["functional_independence"].details["sigma_min"]
        c.add(f"{name}_sigma_min", sigma, sigma >= 1e-6)
        for cond, limit in BUNDLE_LIMITS.items():
            try:
                v = rep[cond].sup_residual
            except KeyError:
                continue
            c.add(f"{name}_{cond}", v, v <= limit)
    sys, gs = _family("projectile_friction", "H_p_x")
    rep = an.verify_theorem_hypotheses(sys, gs, plan)
    good = rep["good_system"].sup_residual
    c.add("projectile_failures", float(len(rep.failures)),
          not rep.passed and "good_system" in rep.failures)
    c.add("projectile_dH_dz", good, good == pytest.approx(GAMMA, abs=1e-12))
    c.add("projectile_diagnostics", float(len(rep.diagnostics)),
          any("0.5" in d for d in rep.diagnostics))
    return c.result()


DP54_RTOLS = (1e-6, 5e-7, 2.5e-7, 1.25e-7, 6.25e-8)


def dp54_errors():
    sys = projectile()
    x0 = (0.0, 0.0, 1.0, 2.0, 0.0)
    errs = []
    for rtol in DP54_RTOLS:
        tr = integrate(sys, dict(zip(sys.chart, x0)), IntegratorConfig(t_span=(0, 10), rtol=rtol,
                                                                        atol=1e-14))
        ref = np.array(oracles.projectile(tr.times, 1.0, 9.8, GAMMA, *x0)).T
        errs.append(float(np.max(np.abs(tr.states - ref))))
    return errs


def criterion_6():
    c = Checks()
    rng = np.random.default_rng(2024)
    chart = ("q1", "q2", "p1", "p2", "z")
    worst = 0.0
    for _ in range(100):
        e = ex.parse(smooth(rng, chart), chart)
        x = rng.uniform(-1.5, 1.5, 5)
        g = e.gradient(x, {})
        fd = central_gradient(lambda y: e.value(y, {}), x)
        worst = max(worst, float(np.max(np.abs(g - fd)) / max(1.0, float(np.max(np.abs(g))))))
    c.add("ad_vs_fd_rel", worst, worst <= 1e-6)

    errs = dp54_errors()
    ratio = min(a / b for a, b in zip(errs, errs[1:]))
    c.add("dp54_min_ratio_per_rtol_halving", ratio, ratio >= 4)

    osc = HamiltonianSystem.from_text(Formalism(Kind.CONTACT, 1, ("q",), ("p",)),
                                      "p^2/2 + q^2/2 + gamma*z", {"gamma": 0.3})
    ref = np.array(oracles.damped_oscillator(10.0, 0.3, 1.0, 0.0, 0.0))
    rk = []
    for h in (2e-2, 1e-2, 5e-3):
        tr = integrate(osc, [1.0, 0.0, 0.0], IntegratorConfig(t_span=(0, 10), method="rk4", step=h))
        rk.append(float(np.max(np.abs(tr.states[-1] - ref))))
    ratios = [a / b for a, b in zip(rk, rk[1:])]
    c.add("rk4_ratio_min", min(ratios), all(8 <= r <= 32 for r in ratios))
    c.add("rk4_ratio_max", max(ratios), all(8 <= r <= 32 for r in ratios))
    return c.result()


def _strip(path):
    doc = json.loads(path.read_text())
    doc.pop("timestamp")
    return doc


def criterion_7():
    c = Checks()
    cfg = sc.catalog_entry("projectile_friction").config.with_overrides(seed=7)
    with tempfile.TemporaryDirectory() as tmp:
        outs = []
        for k in range(2):
            out = Path(tmp) / f"run{k}"
            sc.emit(sc.run_scenario(cfg, out), out)
            outs.append(out)
        files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*.csv"))
        diff = sum((outs[0] / f).read_bytes() != (outs[1] / f).read_bytes() for f in files)
        c.add("csv_files_differing", float(diff), diff == 0 and len(files) >= 3)
        same = _strip(outs[0] / "report.json") == _strip(outs[1] / "report.json")
        c.add("json_differs", float(not same), same)
    return c.result()


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7]


def _line(n, ok, detail):
    return f"CRITERION {n}: {'PASS' if ok else 'FAIL'} ({detail})"


@pytest.mark.parametrize("n", range(1, len(CRITERIA) + 1))
def test_criterion(n, capsys):
    ok, detail = CRITERIA[n - 1]()
    with capsys.disabled():
        print("\n" + _line(n, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    for n, crit in enumerate(CRITERIA, 1):
        print(_line(n, *crit()))
