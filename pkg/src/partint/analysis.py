"""Numerical verification of particular integrals and related conditions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import geometry as geo
from .expr import Expression
from .geometry import HamiltonianSystem, Kind

EXACT_TOL = 1e-8
FD_TOL = 1e-5
REEB_TOL = 1e-12
RANK_THRESHOLD = 1e-6


class AnalysisError(Exception):
    pass


class ProjectionError(AnalysisError):
    """Newton projection could not reach the level set."""


class InsufficientSamplesError(AnalysisError):
    pass


@dataclass(frozen=True)
class CandidateIntegral:
    """An observable ``g`` with an optional claimed factor ``a`` (``X_H g = a g``)."""

    g: Expression
    factor: Expression | None = None
    label: str = ""

    def __post_init__(self):
        if self.g.is_zero:
            raise AnalysisError("the zero function is a trivial particular integral")
        if not self.label:
            object.__setattr__(self, "label", self.g.unparse())


def candidate(sys: HamiltonianSystem, g, factor=None, label: str = "") -> CandidateIntegral:
    """Build a candidate from text or expressions on ``sys``'s chart."""
    if isinstance(g, str):
        label = label or g
        g = sys.parse(g)
    if isinstance(factor, str):
        factor = sys.parse(factor)
    return CandidateIntegral(g, factor, label)


@dataclass(frozen=True)
class SamplePlan:
    """Seeded uniform samples in a box (default ``[-1, 1]`` per coordinate)."""

    count: int = 256
    seed: int = 0
    box: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    on_level_set: bool = False
    points: tuple[Mapping[str, float], ...] = ()

    def __post_init__(self):
        if self.count < 1:
            raise AnalysisError("sample count must be >= 1")
        for name, (lo, hi) in self.box.items():
            if not lo < hi:
                raise AnalysisError(f"degenerate sampling interval for {name}: [{lo}, {hi}]")

    def draw(self, sys: HamiltonianSystem) -> np.ndarray:
        unknown = sorted(set(self.box) - set(sys.chart))
        if unknown:
            raise AnalysisError("box names unknown coordinates: " + ", ".join(unknown))
        lo = np.array([self.box.get(c, (-1.0, 1.0))[0] for c in sys.chart], dtype=float)
        hi = np.array([self.box.get(c, (-1.0, 1.0))[1] for c in sys.chart], dtype=float)
        rng = np.random.default_rng(self.seed)
        xs = lo + (hi - lo) * rng.random((self.count, len(sys.chart)))
        if self.points:
            extra = np.array([sys.point(p) for p in self.points])
            xs = np.vstack([extra, xs])
        return xs

    def to_dict(self) -> dict:
        return {"count": self.count, "seed": self.seed,
                "box": {k: list(v) for k, v in self.box.items()},
                "on_level_set": self.on_level_set}


@dataclass(frozen=True)
class VerificationReport:
    condition: str
    sup_residual: float
    rms_residual: float
    samples_used: int
    samples_rejected: int
    tolerance: float
    worst_point: Mapping[str, float] | None = None
    details: Mapping[str, object] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.sup_residual <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "sup_residual": _json_float(self.sup_residual),
            "rms_residual": _json_float(self.rms_residual),
            "samples_used": self.samples_used,
            "samples_rejected": self.samples_rejected,
            "tolerance": self.tolerance,
            "verdict": "pass" if self.passed else "fail",
            "worst_point": None if self.worst_point is None else dict(self.worst_point),
            "details": dict(self.details),
        }


@dataclass(frozen=True)
class BundleReport:
    """Aggregated reports; fails if any member fails."""

    condition: str
    reports: tuple[VerificationReport, ...]
    diagnostics: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def __getitem__(self, condition: str) -> VerificationReport:
        for r in self.reports:
            if r.condition == condition:
                return r
        raise KeyError(condition)

    @property
    def failures(self) -> list[str]:
        return [r.condition for r in self.reports if not r.passed]

    def to_dict(self) -> dict:
        return {"condition": self.condition,
                "verdict": "pass" if self.passed else "fail",
                "failures": self.failures,
                "diagnostics": list(self.diagnostics),
                "reports": [r.to_dict() for r in self.reports]}


def _json_float(v: float):
    return v if math.isfinite(v) else str(v)


def residual_report(condition: str, sys: HamiltonianSystem, xs: np.ndarray,
                    residuals: Sequence[float], tolerance: float, rejected: int = 0,
                    details: Mapping | None = None) -> VerificationReport:
    r = np.abs(np.asarray(residuals, dtype=float))
    if r.size == 0:
        return VerificationReport(condition, math.inf, math.inf, 0, rejected, tolerance,
                                  None, dict(details or {}))
    k = int(np.argmax(r))
    worst = {c: float(v) for c, v in zip(sys.chart, xs[k])}
    return VerificationReport(condition, float(r[k]), float(np.sqrt(np.mean(r ** 2))),
                              int(r.size), rejected, tolerance, worst, dict(details or {}))


# -- level-set projection -------------------------------------------------------


def _constraints(sys, gs):
    return [sys.observable(c.g if isinstance(c, CandidateIntegral) else c) for c in gs]


def _residual_and_jacobian(obs, x):
    vals, rows = zip(*(o.value_and_gradient(x) for o in obs))
    return np.array(vals, dtype=float), np.array(rows, dtype=float)


def project(sys: HamiltonianSystem, gs, x, tol: float = 1e-10, max_iter: int = 50,
            frozen: Sequence[int] | None = None) -> tuple[np.ndarray, int]:
    """Damped Gauss-Newton descent on ``1/2 sum g_i^2`` towards ``{g = 0}``.

    The minimum-norm Newton step is tried first and halved until the Armijo
    condition holds; if it never does, the steepest-descent direction is
    used instead. Coordinates in ``frozen`` (default: the time coordinate)
    are left untouched. Returns the projected point and the iteration count.
    """
    obs = _constraints(sys, gs)
    x = np.array(x, dtype=float)
    if frozen is None:
        frozen = [] if sys.formalism.t_index is None else [sys.formalism.t_index]
    free = np.ones(x.size, dtype=bool)
    free[list(frozen)] = False
    for it in range(max_iter + 1):
        r, J = _residual_and_jacobian(obs, x)
        if not np.all(np.isfinite(r)):
            break
        if np.max(np.abs(r)) <= tol:
            return x, it
        if it == max_iter:
            break
        Jf = J[:, free]
        phi = 0.5 * r @ r
        moved = False
        newton = np.linalg.lstsq(Jf, -r, rcond=None)[0]
        for d in (newton, -(Jf.T @ r)):
            slope = (r @ Jf) @ d
            if not np.all(np.isfinite(d)) or slope >= 0:
                continue
            alpha = 1.0
            while alpha > 1e-12:
                trial = x.copy()
                trial[free] += alpha * d
                try:
                    rt = np.array([o.value(trial) for o in obs])
                except ArithmeticError:
                    rt = None
                if rt is not None and np.all(np.isfinite(rt)) and 0.5 * rt @ rt <= phi + 1e-4 * alpha * slope:
                    x = trial
                    moved = True
                    break
                alpha *= 0.5
            if moved:
                break
        if not moved:
            break
    r = np.array([o.value(x) for o in obs])
    raise ProjectionError(f"projection stalled at max |g| = {np.max(np.abs(r)):.3e} "
                          f"after {max_iter} iterations")


def sample_level_set(sys: HamiltonianSystem, gs, plan: SamplePlan,
                     tol: float = 1e-10, max_iter: int = 50) -> tuple[np.ndarray, int]:
    """Project the plan's samples onto ``M_g``; returns (points, rejected)."""
    kept, rejected = [], 0
    for x in plan.draw(sys):
        try:
            kept.append(project(sys, gs, x, tol, max_iter)[0])
        except (ProjectionError, ArithmeticError):
            rejected += 1
    if not kept:
        raise ProjectionError(f"no sample reached |g| <= {tol:g} within {max_iter} iterations")
    return np.array(kept), rejected


def _samples(sys, plan, gs=None):
    if plan.on_level_set and gs:
        return sample_level_set(sys, gs, plan)
    return plan.draw(sys), 0


# -- checks ---------------------------------------------------------------------


def functional_independence(gs: Sequence, sys: HamiltonianSystem, plan: SamplePlan,
                            threshold: float = RANK_THRESHOLD,
                            min_fraction: float = 0.99) -> VerificationReport:
    """Rank test of the stacked gradients via the smallest singular value.

    The residual is the fraction of rank-deficient samples, so the verdict
    passes when at most ``1 - min_fraction`` of samples are rejected.
    """
    obs = _constraints(sys, gs)
    if len(obs) > len(sys.chart):
        raise AnalysisError("more functions than coordinates")
    xs, _ = _samples(sys, plan, gs)
    sig = np.empty(len(xs))
    for i, x in enumerate(xs):
        J = np.array([o.value_and_gradient(x)[1] for o in obs])
        norms = np.linalg.norm(J, axis=1)
        if np.any(norms == 0):
            sig[i] = 0.0
            continue
        sig[i] = np.linalg.svd(J / norms[:, None], compute_uv=False)[-1]
    bad = sig < threshold
    frac_bad = float(np.mean(bad))
    k = int(np.argmin(sig))
    worst = {c: float(v) for c, v in zip(sys.chart, xs[k])}
    return VerificationReport(
        "functional_independence", frac_bad, frac_bad, int(len(xs) - bad.sum()),
        int(bad.sum()), 1.0 - min_fraction, worst,
        {"sigma_min": float(sig.min()), "fraction_full_rank": 1.0 - frac_bad,
         "threshold": threshold})


def _xh_g(sys, xh, g_obs, x):
    return float(g_obs.value_and_gradient(x)[1] @ xh(x))


def verify_particular_integral(sys: HamiltonianSystem, c: CandidateIntegral,
                               plan: SamplePlan | None = None,
                               tol: float = EXACT_TOL) -> BundleReport:
    """Check ``R_t g = 0`` (when a time Reeb field exists) and ``X_H g = a g``.

    With a claimed factor the identity is checked on unconstrained samples;
    without one, tangency ``X_H g = 0`` (and ``E_H g = 0``) is checked on
    samples projected onto ``{g = 0}``.
    """
    plan = plan or SamplePlan()
    g = sys.observable(c.g)
    xh = geo.hamiltonian_field(sys, sys.H, "X_H")
    reports = []
    ti = sys.formalism.t_index
    xs = plan.draw(sys)
    if ti is not None:
        res = [g.value_and_gradient(x)[1][ti] for x in xs]
        reports.append(residual_report("reeb_time", sys, xs, res, tol))
    if c.factor is not None:
        a = sys.observable(c.factor)
        res = [_xh_g(sys, xh, g, x) - a.value(x) * g.value(x) for x in xs]
        reports.append(residual_report("factor_identity", sys, xs, res, tol,
                                       details={"factor": c.factor.unparse()}))
    else:
        ys, rejected = sample_level_set(sys, [c], plan)
        res = [_xh_g(sys, xh, g, y) for y in ys]
        reports.append(residual_report("tangency_X_H", sys, ys, res, tol, rejected))
        if ti is not None:
            eh = geo.evolution_field(sys)
            res = [_xh_g(sys, eh, g, y) for y in ys]
            reports.append(residual_report("tangency_E_H", sys, ys, res, tol, rejected))
    return BundleReport(f"particular_integral[{c.label}]", tuple(reports))


def verify_dissipated_quantity(sys: HamiltonianSystem, c: CandidateIntegral,
                               plan: SamplePlan | None = None,
                               tol: float = EXACT_TOL) -> VerificationReport:
    """Residual of ``X_H g + g R H`` (contact) or ``E_H g + g R_z H`` (cocontact)."""
    fm = sys.formalism
    if not fm.kind.has_action:
        raise geo.FormalismMismatch(
            f"dissipated quantities need a contact or cocontact system, not {fm.kind.value}")
    plan = plan or SamplePlan()
    g = sys.observable(c.g)
    H = sys.observable(sys.H)
    field_ = geo.evolution_field(sys)
    zi = fm.z_index
    xs = plan.draw(sys)
    res = []
    for x in xs:
        gv, gg = g.value_and_gradient(x)
        res.append(gg @ field_(x) + gv * H.value_and_gradient(x)[1][zi])
    return residual_report(f"dissipated_quantity[{c.label}]", sys, xs, res, tol)


def verify_particular_involution(gs: Sequence[CandidateIntegral], sys: HamiltonianSystem,
                                 plan: SamplePlan | None = None,
                                 factors: Mapping[tuple[int, int], Sequence[Expression]] | None = None,
                                 tol: float = EXACT_TOL) -> BundleReport:
    """``{g_i, g_j}`` vanishes on ``M_g`` for every pair; with ``factors`` the
    identity ``{g_i, g_j} = sum_k a^{ij}_k g_k`` is also checked off ``M_g``."""
    if len(gs) < 2:
        raise AnalysisError("particular involution needs at least two functions")
    plan = plan or SamplePlan()
    obs = _constraints(sys, gs)
    pairs = [(i, j) for i in range(len(gs)) for j in range(i + 1, len(gs))]
    ys, rejected = sample_level_set(sys, gs, plan)
    res = [max(abs(geo._bracket_value(sys.formalism, obs[i], obs[j], y)) for i, j in pairs)
           for y in ys]
    reports = [residual_report("involution_on_level_set", sys, ys, res, tol, rejected)]
    if factors:
        xs = plan.draw(sys)
        res = []
        for x in xs:
            worst = 0.0
            for (i, j), coeffs in factors.items():
                if len(coeffs) != len(gs):
                    raise AnalysisError(f"factors for pair {(i, j)} need {len(gs)} entries")
                lhs = geo._bracket_value(sys.formalism, obs[i], obs[j], x)
                rhs = sum(sys.observable(a).value(x) * o.value(x) for a, o in zip(coeffs, obs))
                worst = max(worst, abs(lhs - rhs))
            res.append(worst)
        reports.append(residual_report("involution_identity", sys, xs, res, tol))
    label = ",".join(c.label for c in gs)
    return BundleReport(f"particular_involution[{label}]", tuple(reports))


def _same_function(sys, a: Expression, b: Expression, plan: SamplePlan) -> bool:
    if a == b:
        return True
    A, B = sys.observable(a), sys.observable(b)
    return all(abs(A.value(x) - B.value(x)) <= 1e-12 * max(1.0, abs(A.value(x)))
               for x in plan.draw(sys)[:32])


def verify_theorem_hypotheses(sys: HamiltonianSystem, gs: Sequence[CandidateIntegral],
                              plan: SamplePlan | None = None, tol: float = EXACT_TOL,
                              fd_tol: float = FD_TOL, reeb_tol: float = REEB_TOL) -> BundleReport:
    """Hypotheses and checkable conclusions of the particular-integrability
    theorems for ``n`` functions ``g_1..g_n``.

    Contact systems must be good and list ``H`` first; cocontact systems must
    be good. Members: independence, Reeb conditions, involution on ``M_g``,
    dynamical tangency on ``M_g`` and Lie-bracket tangency on ``M_g``.
    """
    plan = plan or SamplePlan()
    fm = sys.formalism
    if len(gs) != fm.n:
        raise AnalysisError(f"need exactly n = {fm.n} functions, got {len(gs)}")
    obs = _constraints(sys, gs)
    reports: list[VerificationReport] = []
    diagnostics: list[str] = []
    xs = plan.draw(sys)
    H = sys.observable(sys.H)
    zi, ti = fm.z_index, fm.t_index

    if fm.kind.has_action:
        res = [H.value_and_gradient(x)[1][zi] for x in xs]
        good = residual_report("good_system", sys, xs, res, tol)
        reports.append(good)
        if not good.passed:
            diagnostics.append(f"system is not good: sup |dH/d{fm.action}| = "
                               f"{good.sup_residual:.6g} (need 0)")
    if fm.kind is Kind.CONTACT:
        first_is_h = _same_function(sys, gs[0].g, sys.H, plan)
        reports.append(VerificationReport("first_is_hamiltonian", 0.0 if first_is_h else 1.0,
                                          0.0 if first_is_h else 1.0, 1, 0, 0.0))
        if not first_is_h:
            diagnostics.append("the first function must be the Hamiltonian itself")

    reports.append(functional_independence(gs, sys, plan))

    reeb_idx = [i for i in (ti, zi) if i is not None]
    if reeb_idx:
        res = [max(abs(o.value_and_gradient(x)[1][i]) for o in obs for i in reeb_idx)
               for x in xs]
        reports.append(residual_report("reeb_conditions", sys, xs, res, reeb_tol))

    ys, rejected = sample_level_set(sys, gs, plan)
    if len(gs) >= 2:
        pairs = [(i, j) for i in range(len(gs)) for j in range(i + 1, len(gs))]
        res = [max(abs(geo._bracket_value(fm, obs[i], obs[j], y)) for i, j in pairs) for y in ys]
    else:
        res = [0.0] * len(ys)
    reports.append(residual_report("involution_on_level_set", sys, ys, res, tol, rejected))

    dyn = geo.evolution_field(sys) if fm.kind.has_time else geo.hamiltonian_field(sys, sys.H)
    res = [max(abs(o.value_and_gradient(y)[1] @ dyn(y)) for o in obs) for y in ys]
    reports.append(residual_report("dynamical_tangency", sys, ys, res, tol, rejected))

    xh = geo.hamiltonian_field(sys, sys.H, "X_H")
    fields = [geo.hamiltonian_field(sys, c.g) for c in gs]
    res = []
    for y in ys:
        worst = 0.0
        for Xg in fields:
            lb = geo.lie_bracket(xh, Xg, y)
            for o in obs:
                worst = max(worst, abs(o.value_and_gradient(y)[1] @ lb))
        res.append(worst)
    reports.append(residual_report("lie_bracket_tangency", sys, ys, res, fd_tol, rejected))

    label = ",".join(c.label for c in gs)
    return BundleReport(f"theorem[{fm.kind.value}:{label}]", tuple(reports), tuple(diagnostics))


@dataclass(frozen=True)
class FactorEstimate:
    """Pointwise ``a = X_H g / g`` with constant and affine least-squares fits."""

    label: str
    values: np.ndarray
    mean: float
    variance: float
    constant: float
    constant_residual: float
    affine: np.ndarray
    affine_residual: float
    samples_used: int
    samples_rejected: int

    def to_dict(self) -> dict:
        return {"condition": f"estimate_factor[{self.label}]", "mean": self.mean,
                "variance": self.variance, "constant_fit": self.constant,
                "constant_fit_residual": self.constant_residual,
                "affine_fit": [float(v) for v in self.affine],
                "affine_fit_residual": self.affine_residual,
                "samples_used": self.samples_used, "samples_rejected": self.samples_rejected}


def estimate_factor(sys: HamiltonianSystem, c: CandidateIntegral,
                    plan: SamplePlan | None = None, rel_threshold: float = 1e-6,
                    min_samples: int = 10) -> FactorEstimate:
    plan = plan or SamplePlan()
    g = sys.observable(c.g)
    xh = geo.hamiltonian_field(sys, sys.H, "X_H")
    xs = plan.draw(sys)
    gv = np.array([g.value(x) for x in xs])
    scale = float(np.max(np.abs(gv))) if gv.size else 0.0
    keep = np.abs(gv) >= rel_threshold * scale if scale > 0 else np.zeros(len(xs), bool)
    if keep.sum() < min_samples:
        raise InsufficientSamplesError(
            f"only {int(keep.sum())} samples with |g| above threshold; need {min_samples}")
    xk, gk = xs[keep], gv[keep]
    xg = np.array([_xh_g(sys, xh, g, x) for x in xk])
    a = xg / gk
    const = float(xg @ gk / (gk @ gk))
    const_res = float(np.sqrt(np.mean((xg - const * gk) ** 2)))
    design = np.column_stack([np.ones(len(xk)), xk])
    coef = np.linalg.lstsq(design, a, rcond=None)[0]
    aff_res = float(np.sqrt(np.mean((design @ coef - a) ** 2)))
    return FactorEstimate(c.label, a, float(a.mean()), float(a.var()), const, const_res,
                          coef, aff_res, int(keep.sum()), int((~keep).sum()))
