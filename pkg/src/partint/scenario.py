"""Declarative scenarios: loading, validation, execution and report output.

A scenario is a single JSON file (schema in ``schemas/scenario.schema.json``)
describing a Hamiltonian system, candidate integrals with the checks to run
on them, candidate families, slice reductions and initial conditions.
Every check carries an expected verdict, so a scenario is self-verifying:
the run status is 0 exactly when every check met its expectation.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import io
import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterator, Mapping, Sequence

import jsonschema
import numpy as np

from . import analysis as an
from . import expr as ex
from . import geometry as geo
from . import reduction as rd
from .analysis import BundleReport, CandidateIntegral, SamplePlan, VerificationReport
from .dynamics import (IntegratorConfig, Trajectory, check_dissipation_law,
                       check_level_set_invariance, integrate)
from .expr import ExprError
from .geometry import Formalism, GeometryError, HamiltonianSystem

SCHEMA_VERSION = 1
BRACKET_TOL = 1e-12
CONSERVED_TOL = 1e-9
REDUCTION_TOL = 1e-6

CANDIDATE_CHECKS = ("particular_integral", "dissipated_quantity", "bracket_with_hamiltonian",
                    "level_set_invariance", "dissipation_law", "conserved")
FAMILY_CHECKS = ("functional_independence", "particular_involution", "theorem_hypotheses")
_NEEDS_ACTION = ("dissipated_quantity", "dissipation_law")
_NEEDS_TRAJECTORY = ("level_set_invariance", "dissipation_law", "conserved")


class ScenarioError(Exception):
    pass


class ScenarioParseError(ScenarioError):
    def __init__(self, path, line: int, column: int, message: str):
        super().__init__(f"{path}:{line}:{column}: {message}")
        self.path, self.line, self.column = path, line, column


class ScenarioValidationError(ScenarioError):
    def __init__(self, source, problems: Sequence[str]):
        self.source = source
        self.problems = list(problems)
        head = f"{source}: " if source else ""
        super().__init__(head + f"{len(self.problems)} problem(s)\n"
                         + "\n".join("  - " + p for p in self.problems))


def load_schema(name: str) -> dict:
    """One of the shipped JSON schemas (``scenario`` or ``report``)."""
    text = resources.files(__package__).joinpath("schemas", f"{name}.schema.json")
    return json.loads(text.read_text(encoding="utf-8"))


# -- configuration ---------------------------------------------------------------


@dataclass(frozen=True)
class CheckSpec:
    name: str
    expect: str = "pass"
    tol: float | None = None
    initial_condition: str | None = None


@dataclass(frozen=True)
class CandidateSpec:
    name: str
    g: str
    factor: str | None = None
    checks: tuple[CheckSpec, ...] = ()


@dataclass(frozen=True)
class FamilySpec:
    name: str
    members: tuple[str, ...]
    checks: tuple[CheckSpec, ...] = ()


@dataclass(frozen=True)
class ReductionSpec:
    coordinate: str
    initial_condition: str
    tol: float = REDUCTION_TOL
    expect: str = "pass"


@dataclass(frozen=True)
class InitialCondition:
    name: str
    state: Mapping[str, float]


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    system: HamiltonianSystem
    hamiltonian: str
    candidates: tuple[CandidateSpec, ...] = ()
    families: tuple[FamilySpec, ...] = ()
    reductions: tuple[ReductionSpec, ...] = ()
    initial_conditions: tuple[InitialCondition, ...] = ()
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    plan: SamplePlan = field(default_factory=SamplePlan)
    output: str | None = None
    description: str = ""
    source: str | None = None

    @property
    def formalism(self) -> Formalism:
        return self.system.formalism

    def with_overrides(self, seed: int | None = None, rtol: float | None = None,
                       output: str | None = None) -> "ScenarioConfig":
        cfg = self
        if seed is not None:
            cfg = dataclasses.replace(cfg, plan=dataclasses.replace(cfg.plan, seed=int(seed)))
        if rtol is not None:
            cfg = dataclasses.replace(cfg, integrator=cfg.integrator.replace(rtol=float(rtol)))
        if output is not None:
            cfg = dataclasses.replace(cfg, output=str(output))
        return cfg

    def candidate(self, name: str) -> CandidateIntegral:
        spec = next(c for c in self.candidates if c.name == name)
        return an.candidate(self.system, spec.g, spec.factor, label=spec.name)

    def initial_state(self, name: str) -> np.ndarray:
        ic = next(i for i in self.initial_conditions if i.name == name)
        return self.system.point(ic.state)


def _checks(raw: Mapping | None) -> tuple[CheckSpec, ...]:
    return tuple(CheckSpec(name, opts.get("expect", "pass"), opts.get("tol"),
                           opts.get("initial_condition"))
                 for name, opts in (raw or {}).items())


def _schema_problems(data) -> list[str]:
    validator = jsonschema.Draft202012Validator(load_schema("scenario"))
    out = []
    for err in sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.path))):
        where = "/".join(map(str, err.path)) or "<root>"
        out.append(f"{where}: {err.message}")
    return out


def validate_scenario(data, source: str | None = None) -> ScenarioConfig:
    """Build a config from decoded JSON, collecting every problem before failing."""
    problems = _schema_problems(data)
    if problems:
        raise ScenarioValidationError(source, problems)

    def bad(msg):
        problems.append(msg)

    params = {k: float(v) for k, v in data.get("parameters", {}).items()}
    f = data["formalism"]
    try:
        fm = Formalism(f["kind"], f["n"], tuple(f.get("positions", ())),
                       tuple(f.get("momenta", ())), f.get("time", "t"), f.get("action", "z"))
    except GeometryError as exc:
        raise ScenarioValidationError(source, [f"formalism: {exc}"]) from None
    chart = fm.chart
    sys = None
    try:
        sys = HamiltonianSystem.from_text(fm, data["hamiltonian"], params)
    except (ExprError, GeometryError) as exc:
        bad(f"hamiltonian: {exc}")

    try:
        integ = IntegratorConfig(**{k: (tuple(v) if k == "t_span" else v)
                                    for k, v in data.get("integrator", {}).items()})
    except ValueError as exc:
        bad(f"integrator: {exc}")
        integ = IntegratorConfig()

    raw_plan = data.get("sample_plan", {})
    box = {k: tuple(v) for k, v in raw_plan.get("box", {}).items()}
    for name in sorted(set(box) - set(chart)):
        bad(f"sample_plan/box: {name!r} is not a coordinate of {chart}")
    try:
        plan = SamplePlan(raw_plan.get("count", 256), raw_plan.get("seed", 0),
                          {k: v for k, v in box.items() if k in chart})
    except an.AnalysisError as exc:
        bad(f"sample_plan: {exc}")
        plan = SamplePlan()

    ics = []
    for i, raw in enumerate(data.get("initial_conditions", [])):
        where = f"initial_conditions/{i}"
        state = raw["state"]
        missing = [c for c in chart if c not in state]
        unknown = sorted(set(state) - set(chart))
        if missing:
            bad(f"{where}: missing coordinates {missing}")
        if unknown:
            bad(f"{where}: unknown coordinates {unknown} (chart is {chart})")
        if fm.t_index is not None and fm.time in state:
            if abs(state[fm.time] - integ.t_span[0]) > 1e-12 * max(1.0, abs(integ.t_span[0])):
                bad(f"{where}: {fm.time} = {state[fm.time]} differs from t_span start "
                    f"{integ.t_span[0]}")
        ics.append(InitialCondition(raw["name"], {k: float(v) for k, v in state.items()}))
    ic_names = [ic.name for ic in ics]
    for name in sorted({n for n in ic_names if ic_names.count(n) > 1}):
        bad(f"initial_conditions: duplicate name {name!r}")

    def ic_ref(where, name):
        if name is None:
            if not ics:
                bad(f"{where}: needs at least one initial condition")
            return ic_names[0] if ics else None
        if name not in ic_names:
            bad(f"{where}: unknown initial condition {name!r}")
        return name

    cands = []
    for i, raw in enumerate(data.get("candidates", [])):
        where = f"candidates/{i}"
        for key in ("g", "factor"):
            if key in raw:
                try:
                    ex.parse(raw[key], chart, tuple(params))
                except ExprError as exc:
                    bad(f"{where}/{key}: {exc}")
        checks = _checks(raw.get("checks"))
        for c in checks:
            if c.name in _NEEDS_ACTION and not fm.kind.has_action:
                bad(f"{where}/checks/{c.name}: needs a contact or cocontact formalism, "
                    f"not {fm.kind.value}")
            if c.name == "level_set_invariance" or c.initial_condition is not None:
                ic_ref(f"{where}/checks/{c.name}", c.initial_condition)
            elif c.name in _NEEDS_TRAJECTORY and not ics:
                bad(f"{where}/checks/{c.name}: needs at least one initial condition")
        cands.append(CandidateSpec(raw["name"], raw["g"], raw.get("factor"), checks))
    cand_names = [c.name for c in cands]
    for name in sorted({n for n in cand_names if cand_names.count(n) > 1}):
        bad(f"candidates: duplicate name {name!r}")

    fams = []
    for i, raw in enumerate(data.get("families", [])):
        where = f"families/{i}"
        members = tuple(raw["members"])
        for m in members:
            if m not in cand_names:
                bad(f"{where}/members: unknown candidate {m!r}")
        checks = _checks(raw.get("checks"))
        for c in checks:
            if c.name == "theorem_hypotheses" and len(members) != fm.n:
                bad(f"{where}/checks/theorem_hypotheses: needs exactly n = {fm.n} members")
            if c.name == "particular_involution" and len(members) < 2:
                bad(f"{where}/checks/particular_involution: needs at least two members")
        fams.append(FamilySpec(raw["name"], members, checks))

    reds = []
    for i, raw in enumerate(data.get("reductions", [])):
        where = f"reductions/{i}"
        coord = raw["coordinate"]
        if coord not in fm.positions + fm.momenta:
            bad(f"{where}: {coord!r} is not a canonical position or momentum")
        if fm.n < 2:
            bad(f"{where}: slice reduction needs n >= 2")
        ic = ic_ref(where, raw.get("initial_condition"))
        reds.append(ReductionSpec(coord, ic, raw.get("tol", REDUCTION_TOL),
                                  raw.get("expect", "pass")))

    if problems:
        raise ScenarioValidationError(source, problems)
    return ScenarioConfig(data["name"], sys, data["hamiltonian"], tuple(cands), tuple(fams),
                          tuple(reds), tuple(ics), integ, plan, data.get("output"),
                          data.get("description", ""), source)


def load_scenario(path) -> ScenarioConfig:
    """Read, decode and validate a scenario file."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror or exc}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = raw[:exc.start].count(b"\n") + 1
        raise ScenarioParseError(path, line, 1, "file is not valid UTF-8") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(path, exc.lineno, exc.colno, exc.msg) from None
    return validate_scenario(data, str(path))


# -- catalog ------------------------------------------------------------------------


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    config: ScenarioConfig
    expected: Mapping[str, str]


def catalog_names() -> list[str]:
    root = resources.files(__package__).joinpath("catalog")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def catalog_path(name: str):
    if name not in catalog_names():
        raise ScenarioError(f"unknown catalog scenario {name!r}; "
                            f"available: {', '.join(catalog_names())}")
    return resources.files(__package__).joinpath("catalog", f"{name}.json")


def catalog_entry(name: str) -> CatalogEntry:
    with resources.as_file(catalog_path(name)) as p:
        cfg = load_scenario(p)
    cfg = dataclasses.replace(cfg, source=f"catalog:{name}")
    return CatalogEntry(name, cfg, {t.id: t.expected for t in plan_tasks(cfg)})


# -- execution --------------------------------------------------------------------


@dataclass
class CheckResult:
    id: str
    stage: str
    check: str
    target: str
    expected: str
    verdict: str
    sup_residual: float | None = None
    tolerance: float | None = None
    result: dict | None = None
    error: str | None = None

    @property
    def met(self) -> bool:
        return self.verdict == self.expected

    def to_dict(self) -> dict:
        return {"id": self.id, "stage": self.stage, "check": self.check, "target": self.target,
                "expected": self.expected, "verdict": self.verdict, "met": self.met,
                "sup_residual": self.sup_residual, "tolerance": self.tolerance,
                "result": self.result, "error": self.error}


@dataclass
class RunReport:
    scenario: str
    checks: list[CheckResult] = field(default_factory=list)
    trajectories: list[dict] = field(default_factory=list)
    settings: dict = field(default_factory=dict)
    timestamp: dict = field(default_factory=dict)

    @property
    def unmet(self) -> list[str]:
        return [c.id for c in self.checks if not c.met]

    @property
    def status(self) -> int:
        return 0 if not self.unmet else 1

    def __getitem__(self, check_id: str) -> CheckResult:
        for c in self.checks:
            if c.id == check_id:
                return c
        raise KeyError(check_id)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario,
            "status": self.status,
            "summary": {"total": len(self.checks),
                        "met": sum(c.met for c in self.checks),
                        "unmet": self.unmet,
                        "errors": sum(c.verdict == "error" for c in self.checks)},
            "settings": self.settings,
            "checks": [c.to_dict() for c in self.checks],
            "trajectories": list(self.trajectories),
            "timestamp": dict(self.timestamp),
        }


@dataclass(frozen=True)
class Task:
    id: str
    stage: str
    check: str
    target: str
    expected: str
    run: Callable[["_Context"], tuple]


@dataclass
class _Context:
    cfg: ScenarioConfig
    out: Path | None
    trajectories: dict[str, Trajectory] = field(default_factory=dict)
    files: list[dict] = field(default_factory=list)

    def write(self, name: str, traj: Trajectory):
        entry = {"name": name, "path": f"trajectories/{name}.csv", "chart": list(traj.chart),
                 "nodes": len(traj), "accepted": traj.accepted, "rejected": traj.rejected,
                 "nfev": traj.nfev}
        if self.out is not None:
            (self.out / "trajectories").mkdir(parents=True, exist_ok=True)
            traj.to_csv(self.out / entry["path"])
        self.files.append(entry)


def _report_outcome(rep, tol=None):
    if isinstance(rep, VerificationReport):
        if tol is not None:
            rep = dataclasses.replace(rep, tolerance=tol)
        return rep.passed, rep.sup_residual, rep.tolerance, rep.to_dict()
    sup = max((r.sup_residual for r in rep.reports), default=0.0)
    return rep.passed, sup, None, rep.to_dict()


def _plain_report(condition, sup, tol, details=None):
    rep = VerificationReport(condition, float(sup), float(sup), 1, 0, float(tol),
                             None, dict(details or {}))
    return _report_outcome(rep)


def _verify(cfg: ScenarioConfig, cand: CandidateSpec, check: CheckSpec):
    def run(ctx):
        sys, plan = cfg.system, cfg.plan
        c = cfg.candidate(cand.name)
        tol = check.tol
        if check.name == "particular_integral":
            return _report_outcome(an.verify_particular_integral(
                sys, c, plan, tol if tol is not None else an.EXACT_TOL))
        if check.name == "dissipated_quantity":
            return _report_outcome(an.verify_dissipated_quantity(sys, c, plan), tol)
        xs = plan.draw(sys)
        res = [geo.bracket(sys, c.g, sys.H, x) for x in xs]
        rep = an.residual_report(f"bracket_with_hamiltonian[{c.label}]", sys, xs, res,
                                 BRACKET_TOL if tol is None else tol)
        return _report_outcome(rep)
    return run


def _family(cfg: ScenarioConfig, fam: FamilySpec, check: CheckSpec):
    def run(ctx):
        gs = [cfg.candidate(m) for m in fam.members]
        if check.name == "functional_independence":
            return _report_outcome(an.functional_independence(gs, cfg.system, cfg.plan))
        if check.name == "particular_involution":
            return _report_outcome(an.verify_particular_involution(
                gs, cfg.system, cfg.plan, tol=check.tol or an.EXACT_TOL))
        return _report_outcome(an.verify_theorem_hypotheses(
            cfg.system, gs, cfg.plan, tol=check.tol or an.EXACT_TOL))
    return run


def _reduce(cfg: ScenarioConfig, spec: ReductionSpec):
    def run(ctx):
        sys = cfg.system
        try:
            sr = rd.slice_reduce(sys, spec.coordinate, cfg.plan)
        except rd.NotAParticularIntegral as exc:
            return False, None, spec.tol, {"condition": f"reduction[{spec.coordinate}]",
                                           "verdict": "fail", "reason": str(exc),
                                           "verification": exc.report.to_dict()}
        x0 = cfg.initial_state(spec.initial_condition)
        full = integrate(sys, x0, cfg.integrator)
        red = integrate(sr.reduced, sr.restrict(x0), cfg.integrator)
        ctx.write(f"reduced_{spec.coordinate}_{spec.initial_condition}", red)
        cmp = rd.compare_trajectories(full, red)
        i = sys.chart.index(sr.conjugate)
        recon = rd.reconstruct_cyclic(red, sr, float(x0[i]))
        grid = np.union1d(full.times, red.times)
        recon_dev = float(np.max(np.abs(np.interp(grid, recon.times, recon.values)
                                        - np.interp(grid, full.times, full.column(sr.conjugate)))))
        sup = max(cmp.sup_deviation, recon_dev)
        return _plain_report(f"reduction[{spec.coordinate}]", sup, spec.tol, {
            "reduced_chart": list(sr.reduced.chart),
            "reduced_hamiltonian": sr.reduced.H.unparse(),
            "reconstruction_integrand": sr.integrand.unparse(),
            "slice_consistency": sr.consistency,
            "comparison": cmp.to_dict(),
            "reconstruction_deviation": recon_dev,
            "reconstructed_final": float(recon.values[-1]),
        })
    return run


def _integrate(cfg: ScenarioConfig, ic: InitialCondition):
    def run(ctx):
        traj = integrate(cfg.system, cfg.initial_state(ic.name), cfg.integrator)
        ctx.trajectories[ic.name] = traj
        ctx.write(f"traj_{ic.name}", traj)
        return True, None, None, {"nodes": len(traj), "final": traj.final,
                                  "accepted": traj.accepted, "rejected": traj.rejected}
    return run


def _trajectory(ctx, name):
    if name not in ctx.trajectories:
        raise ScenarioError(f"integration from {name!r} did not complete")
    return ctx.trajectories[name]


def _monitor(cfg: ScenarioConfig, cand: CandidateSpec, check: CheckSpec, ic: str):
    def run(ctx):
        sys = cfg.system
        c = cfg.candidate(cand.name)
        if check.name == "level_set_invariance":
            x0, _ = an.project(sys, [c], cfg.initial_state(ic))
            return _report_outcome(check_level_set_invariance(sys, c, x0, cfg.integrator),
                                   check.tol)
        traj = _trajectory(ctx, ic)
        if check.name == "dissipation_law":
            return _report_outcome(check_dissipation_law(
                sys, traj, c.g, check.tol if check.tol is not None else 1e-5))
        g = sys.observable(c.g)
        vals = np.array([g.value(x) for x in traj.states])
        dev = np.abs(vals - vals[0]) / max(1.0, abs(vals[0]))
        return _plain_report(f"conserved[{c.label}]", dev.max(),
                             CONSERVED_TOL if check.tol is None else check.tol,
                             {"g0": float(vals[0]), "g_final": float(vals[-1])})
    return run


def plan_tasks(cfg: ScenarioConfig) -> list[Task]:
    """All checks of a scenario in execution order:
    verifications, reductions, integrations, monitors."""
    tasks = []
    for cand in cfg.candidates:
        for chk in cand.checks:
            if chk.name in ("particular_integral", "dissipated_quantity",
                            "bracket_with_hamiltonian"):
                tasks.append(Task(f"{cand.name}:{chk.name}", "verification", chk.name,
                                  cand.name, chk.expect, _verify(cfg, cand, chk)))
    for fam in cfg.families:
        for chk in fam.checks:
            tasks.append(Task(f"{fam.name}:{chk.name}", "verification", chk.name, fam.name,
                              chk.expect, _family(cfg, fam, chk)))
    for red in cfg.reductions:
        tasks.append(Task(f"reduce:{red.coordinate}@{red.initial_condition}", "reduction",
                          "slice_reduction", red.coordinate, red.expect, _reduce(cfg, red)))
    for ic in cfg.initial_conditions:
        tasks.append(Task(f"integrate@{ic.name}", "integration", "integrate", ic.name, "pass",
                          _integrate(cfg, ic)))
    ic_names = [ic.name for ic in cfg.initial_conditions]
    for cand in cfg.candidates:
        for chk in cand.checks:
            if chk.name not in _NEEDS_TRAJECTORY:
                continue
            if chk.name == "level_set_invariance":
                targets = [chk.initial_condition or ic_names[0]]
            else:
                targets = [chk.initial_condition] if chk.initial_condition else ic_names
            for ic in targets:
                tasks.append(Task(f"{cand.name}:{chk.name}@{ic}", "monitor", chk.name,
                                  cand.name, chk.expect, _monitor(cfg, cand, chk, ic)))
    return tasks


def _run_task(task: Task, ctx: _Context) -> CheckResult:
    try:
        passed, sup, tol, result = task.run(ctx)
    except Exception as exc:  # captured per task; the run continues
        return CheckResult(task.id, task.stage, task.check, task.target, task.expected,
                           "error", error=f"{type(exc).__name__}: {exc}")
    sup = None if sup is None else (float(sup) if math.isfinite(sup) else str(sup))
    return CheckResult(task.id, task.stage, task.check, task.target, task.expected,
                       "pass" if passed else "fail", sup, tol, result)


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> RunReport:
    """Execute every check; trajectories are written under ``out_dir`` when given."""
    started = _dt.datetime.now(_dt.timezone.utc)
    t0 = time.perf_counter()
    out = None if out_dir is None else Path(out_dir)
    ctx = _Context(cfg, out)
    report = RunReport(cfg.name, settings={
        "formalism": cfg.formalism.to_dict(),
        "chart": list(cfg.system.chart),
        "parameters": dict(cfg.system.params),
        "hamiltonian": cfg.hamiltonian,
        "integrator": cfg.integrator.to_dict(),
        "sample_plan": cfg.plan.to_dict(),
    })
    timings = {}
    for task in plan_tasks(cfg):
        t = time.perf_counter()
        report.checks.append(_run_task(task, ctx))
        timings[task.id] = time.perf_counter() - t
    report.trajectories = ctx.files
    report.timestamp = {"started_utc": started.isoformat(timespec="seconds"),
                        "elapsed_seconds": time.perf_counter() - t0,
                        "check_seconds": timings}
    return report


# -- output -----------------------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def report_json(report: RunReport) -> str:
    return json.dumps(_jsonable(report.to_dict()), indent=2) + "\n"


SUMMARY_COLUMNS = ("id", "stage", "check", "target", "expected", "verdict", "met",
                   "sup_residual", "tolerance", "error")


def report_csv(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for c in report.checks:
        d = c.to_dict()
        w.writerow(["" if d[k] is None else (repr(d[k]) if isinstance(d[k], float) else d[k])
                    for k in SUMMARY_COLUMNS])
    return buf.getvalue()


def emit(report: RunReport, out_dir, formats: Sequence[str] = ("json", "csv-summary")
         ) -> list[Path]:
    """Write ``report.json`` and/or ``summary.csv`` into ``out_dir``."""
    writers = {"json": ("report.json", report_json), "csv-summary": ("summary.csv", report_csv)}
    unknown = [f for f in formats if f not in writers]
    if unknown:
        raise ValueError(f"unknown report format(s) {unknown}; use {sorted(writers)}")
    out = Path(out_dir)
    paths = []
    for fmt in formats:
        name, render = writers[fmt]
        path = out / name
        try:
            out.mkdir(parents=True, exist_ok=True)
            path.write_text(render(report), encoding="utf-8")
        except OSError as exc:
            raise ScenarioError(f"{path}: {exc.strerror or exc}") from None
        paths.append(path)
    return paths


def validate_report(doc: Mapping) -> None:
    """Raise ``jsonschema.ValidationError`` if ``doc`` violates the report schema."""
    jsonschema.validate(doc, load_schema("report"))


def iter_failures(report: RunReport) -> Iterator[str]:
    """Human-readable lines naming every check that missed its expectation."""
    for c in report.checks:
        if c.met:
            continue
        why = c.error
        if why is None and c.result is not None:
            failed = c.result.get("failures")
            why = (f"failed {', '.join(failed)}" if failed else
                   f"sup residual {c.sup_residual} vs tolerance {c.tolerance}")
        yield f"{c.id}: expected {c.expected}, got {c.verdict}" + (f" ({why})" if why else "")


__all__ = [
    "SCHEMA_VERSION", "ScenarioConfig", "CandidateSpec", "FamilySpec", "ReductionSpec",
    "InitialCondition", "CheckSpec", "CatalogEntry", "CheckResult", "RunReport", "Task",
    "ScenarioError", "ScenarioParseError", "ScenarioValidationError", "load_scenario",
    "validate_scenario", "load_schema", "catalog_names", "catalog_path", "catalog_entry",
    "plan_tasks", "run_scenario", "emit", "report_json", "report_csv", "validate_report",
    "iter_failures",
]
