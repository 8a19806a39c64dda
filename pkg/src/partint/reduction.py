"""Reduction of the dynamics on invariant level sets.

Two routes are provided. ``slice_reduce`` handles a canonical coordinate
that is a particular integral: it drops the conjugate pair, forms
``K = H`` on the slice, and recovers the partner coordinate by quadrature.
``constrained_integrate`` handles arbitrary constraint families by
projecting back onto the level set after every accepted step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import analysis as an
from . import expr as ex
from . import geometry as geo
from .analysis import CandidateIntegral, SamplePlan, VerificationReport
from .dynamics import IntegratorConfig, ObservableSeries, Trajectory, _initial_state, solve
from .expr import Expression
from .geometry import Formalism, HamiltonianSystem


class ReductionError(Exception):
    pass


class NotAParticularIntegral(ReductionError):
    def __init__(self, message: str, report):
        super().__init__(message)
        self.report = report


class NotCanonicalCoordinate(ReductionError):
    pass


@dataclass(frozen=True)
class SliceReduction:
    """Reduced system on ``{coordinate = 0}``.

    ``integrand`` is the parent's velocity component for the conjugate
    coordinate, restricted to the slice; it lives on the parent chart.
    """

    parent: HamiltonianSystem
    coordinate: str
    conjugate: str
    reduced: HamiltonianSystem
    integrand: Expression
    consistency: float = 0.0

    def embed(self, y, conjugate_value: float = 0.0) -> np.ndarray:
        """Parent-chart point from a reduced state."""
        vals = dict(zip(self.reduced.chart, np.asarray(y, dtype=float)))
        vals[self.coordinate] = 0.0
        vals[self.conjugate] = conjugate_value
        return self.parent.point(vals)

    def restrict(self, x) -> np.ndarray:
        """Reduced-chart point from a parent state."""
        vals = dict(zip(self.parent.chart, np.asarray(x, dtype=float)))
        return np.array([vals[c] for c in self.reduced.chart])


def _reconstruction_integrand(sys: HamiltonianSystem, coordinate: str) -> Expression:
    fm = sys.formalism
    H = sys.H
    conj = fm.conjugate(coordinate)
    if coordinate in fm.momenta:
        # conjugate position: qdot = dH/dp
        rhs = ex.differentiate(H, coordinate)
    else:
        # conjugate momentum: pdot = -dH/dq, minus p dH/dz in contact charts
        rhs = ex.differentiate(H, coordinate)
        if fm.kind.has_action:
            rhs = ex.combine("+", rhs, ex.combine(
                "*", ex.parse(conj, sys.chart), ex.differentiate(H, fm.action)))
        rhs = Expression(ex._neg(rhs.root), sys.chart, rhs.params)
    return ex.substitute(rhs, {coordinate: 0.0})


def slice_reduce(sys: HamiltonianSystem, coordinate: str, plan: SamplePlan | None = None,
                 tol: float = 1e-12) -> SliceReduction:
    """Reduce ``sys`` on the slice where the canonical ``coordinate`` vanishes."""
    fm = sys.formalism
    if coordinate not in fm.positions + fm.momenta:
        raise NotCanonicalCoordinate(
            f"{coordinate!r} is not a canonical position or momentum of {fm.chart}")
    plan = plan or SamplePlan(count=64)
    cand = CandidateIntegral(sys.parse(coordinate), label=coordinate)
    report = an.verify_particular_integral(sys, cand, plan)
    if not report.passed:
        raise NotAParticularIntegral(
            f"{coordinate} is not a particular integral: failed {', '.join(report.failures)}",
            report)
    reduced_fm = fm.without_pair(coordinate)
    conj = fm.conjugate(coordinate)
    # on the slice K cannot depend on the conjugate (tangency), so it is fixed to 0
    K = ex.substitute(sys.H, {coordinate: 0.0, conj: 0.0}, reduced_fm.chart)
    reduced = HamiltonianSystem(reduced_fm, K, sys.params)
    sr = SliceReduction(sys, coordinate, conj, reduced,
                        _reconstruction_integrand(sys, coordinate))
    dev = _slice_consistency(sr, plan)
    if dev > tol:
        raise ReductionError(
            f"reduced field differs from the parent field on the slice by {dev:.3e}")
    return SliceReduction(sys, coordinate, conj, reduced, sr.integrand, dev)


def _slice_consistency(sr: SliceReduction, plan: SamplePlan) -> float:
    parent_field = geo.evolution_field(sr.parent)
    reduced_field = geo.evolution_field(sr.reduced)
    idx = [sr.parent.chart.index(c) for c in sr.reduced.chart]
    worst = 0.0
    for x in plan.draw(sr.parent):
        y = sr.restrict(x)
        xe = sr.embed(y, conjugate_value=float(x[sr.parent.chart.index(sr.conjugate)]))
        vp = parent_field(xe)[idx]
        vr = reduced_field(y)
        worst = max(worst, float(np.max(np.abs(vp - vr) / np.maximum(1.0, np.abs(vp)))))
    return worst


def reconstruct_cyclic(red_traj: Trajectory, sr: SliceReduction, x0_value: float,
                       iterations: int = 4) -> ObservableSeries:
    """Recover the sliced pair's surviving coordinate by trapezoid quadrature.

    When the integrand depends on the reconstructed coordinate itself the
    trapezoid rule is applied implicitly (fixed-point iterations).
    """
    if red_traj.chart != sr.reduced.chart:
        raise ReductionError(f"trajectory chart {red_traj.chart} does not match "
                             f"reduced chart {sr.reduced.chart}")
    f = sr.parent.observable(sr.integrand)
    implicit = sr.integrand.depends_on(sr.conjugate)
    vals = np.empty(len(red_traj))
    vals[0] = x0_value
    prev = f.value(sr.embed(red_traj.states[0], x0_value))
    for k in range(1, len(red_traj)):
        h = red_traj.times[k] - red_traj.times[k - 1]
        guess = vals[k - 1] + h * prev
        for _ in range(iterations if implicit else 1):
            cur = f.value(sr.embed(red_traj.states[k], guess))
            guess = vals[k - 1] + 0.5 * h * (prev + cur)
        vals[k] = guess
        prev = f.value(sr.embed(red_traj.states[k], guess)) if implicit else cur
    return ObservableSeries(red_traj.times, vals, sr.conjugate)


@dataclass(frozen=True)
class LevelSet:
    """Joint zero set of a family of constraints on ``system``."""

    system: HamiltonianSystem
    constraints: tuple[CandidateIntegral, ...]
    tol: float = 1e-10
    max_iter: int = 50

    def __post_init__(self):
        cs = tuple(c if isinstance(c, CandidateIntegral)
                   else an.candidate(self.system, c) for c in self.constraints)
        if not cs:
            raise ReductionError("a level set needs at least one constraint")
        object.__setattr__(self, "constraints", cs)

    def residual(self, x) -> float:
        return max(abs(self.system.observable(c.g).value(x)) for c in self.constraints)

    def independence(self, plan: SamplePlan) -> VerificationReport:
        return an.functional_independence(self.constraints, self.system, plan)


def project_to_level_set(x, ls: LevelSet) -> np.ndarray:
    """Damped Newton projection of ``x`` onto ``ls``."""
    return an.project(ls.system, ls.constraints, ls.system.point(x), ls.tol, ls.max_iter)[0]


def constrained_integrate(sys: HamiltonianSystem, ls: LevelSet, x0, cfg: IntegratorConfig,
                          check_independence: bool = True) -> Trajectory:
    """Integrate the evolution field, projecting onto ``ls`` after each step.

    ``info`` records the largest pre-projection residual (``max_drift``), the
    accumulated residual over all steps (``total_drift``) and the worst
    drift relative to the local error tolerance.
    """
    if ls.system is not sys and ls.system.chart != sys.chart:
        raise ReductionError("level set and system use different charts")
    x = _initial_state(sys, x0, cfg)
    x = project_to_level_set(x, ls)
    if check_independence:
        box = {c: (v - 1.0, v + 1.0) for c, v in zip(sys.chart, x)}
        rep = ls.independence(SamplePlan(count=32, seed=0, box=box))
        if not rep.passed:
            raise ReductionError("level-set constraints are not functionally independent "
                                 f"(sigma_min = {rep.details['sigma_min']:.3e})")
    drift = {"max_drift": 0.0, "total_drift": 0.0, "max_drift_ratio": 0.0}

    def post(t, y):
        d = ls.residual(y)
        local_tol = cfg.atol + cfg.rtol * float(np.max(np.abs(y)))
        drift["max_drift"] = max(drift["max_drift"], d)
        drift["total_drift"] += d
        drift["max_drift_ratio"] = max(drift["max_drift_ratio"], d / local_tol)
        return project_to_level_set(y, ls)

    try:
        times, states, stats = solve(geo.evolution_field(sys), x, cfg, post)
    except an.ProjectionError as exc:
        times, states, stats = exc.partial
        exc.trajectory = Trajectory(times, states, sys.chart, sys.params, stats["accepted"],
                                    stats["rejected"], stats["nfev"], dict(drift))
        raise
    return Trajectory(times, states, sys.chart, sys.params, stats["accepted"],
                      stats["rejected"], stats["nfev"], dict(drift, method=cfg.method))


@dataclass(frozen=True)
class ComparisonReport:
    deviations: Mapping[str, float]
    overlap: tuple[float, float]
    nodes: int

    @property
    def sup_deviation(self) -> float:
        return max(self.deviations.values()) if self.deviations else 0.0

    def to_dict(self) -> dict:
        return {"sup_deviation": self.sup_deviation, "deviations": dict(self.deviations),
                "overlap": list(self.overlap), "nodes": self.nodes}


def compare_trajectories(a: Trajectory, b: Trajectory,
                         coordinates: Mapping[str, str] | Sequence[str] | None = None
                         ) -> ComparisonReport:
    """Sup deviation per mapped coordinate over the common time range.

    Both trajectories are linearly interpolated onto the union of their
    nodes inside the overlap. ``coordinates`` maps names in ``a`` to names
    in ``b``; a sequence means identical names; ``None`` uses shared names.
    """
    if coordinates is None:
        coordinates = [c for c in a.chart if c in b.chart]
    if not isinstance(coordinates, Mapping):
        coordinates = {c: c for c in coordinates}
    lo = max(a.times[0], b.times[0])
    hi = min(a.times[-1], b.times[-1])
    if hi < lo:
        raise ReductionError("trajectories have no overlapping time range")
    grid = np.union1d(a.times, b.times)
    grid = grid[(grid >= lo) & (grid <= hi)]
    devs = {}
    for ca, cb in coordinates.items():
        va = np.interp(grid, a.times, a.column(ca))
        vb = np.interp(grid, b.times, b.column(cb))
        devs[ca] = float(np.max(np.abs(va - vb))) if grid.size else 0.0
    return ComparisonReport(devs, (float(lo), float(hi)), int(grid.size))


__all__ = [
    "SliceReduction", "LevelSet", "ComparisonReport", "ReductionError",
    "NotAParticularIntegral", "NotCanonicalCoordinate", "slice_reduce",
    "reconstruct_cyclic", "project_to_level_set", "constrained_integrate",
    "compare_trajectories", "Formalism", "IntegratorConfig",
]
