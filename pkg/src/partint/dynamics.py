"""Integration of the evolution field with trajectory recording and monitors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import geometry as geo
from .analysis import CandidateIntegral, VerificationReport
from .expr import Expression, ExprError
from .geometry import HamiltonianSystem

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class IntegrationError(Exception):
    pass


class StepSizeUnderflow(IntegrationError):
    pass


class InconsistentTimeError(IntegrationError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    """``method`` is ``"rk4"`` (fixed ``step``) or ``"dp54"`` (adaptive)."""

    t_span: tuple[float, float] = (0.0, 1.0)
    method: str = "dp54"
    step: float = 1e-3
    rtol: float = 1e-9
    atol: float = 1e-12
    max_steps: int = 1_000_000
    max_step: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "t_span", (float(self.t_span[0]), float(self.t_span[1])))
        object.__setattr__(self, "method", self.method.lower())
        if self.method not in ("rk4", "dp54"):
            raise ValueError(f"unknown method {self.method!r}; use 'rk4' or 'dp54'")
        if self.rtol < 1e-14:
            raise ValueError("rtol must be >= 1e-14")
        if self.atol < 0 or self.step <= 0 or self.max_step <= 0:
            raise ValueError("atol must be >= 0; step and max_step must be positive")
        # a zero-length span is allowed and yields a single-node trajectory
        if self.t_span[1] < self.t_span[0]:
            raise ValueError("t_span must satisfy t1 >= t0")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    def replace(self, **changes) -> "IntegratorConfig":
        d = dict(t_span=self.t_span, method=self.method, step=self.step, rtol=self.rtol,
                 atol=self.atol, max_steps=self.max_steps, max_step=self.max_step)
        d.update(changes)
        return IntegratorConfig(**d)

    def to_dict(self) -> dict:
        d = {"method": self.method, "t_span": list(self.t_span), "max_steps": self.max_steps}
        if self.method == "rk4":
            d["step"] = self.step
        else:
            d.update(rtol=self.rtol, atol=self.atol)
            if math.isfinite(self.max_step):
                d["max_step"] = self.max_step
        return d


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    chart: tuple[str, ...]
    params: Mapping[str, float] = field(default_factory=dict)
    accepted: int = 0
    rejected: int = 0
    nfev: int = 0
    info: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        states = np.array(self.states, dtype=float).reshape(len(times), len(self.chart))
        if len(times) > 1 and not np.all(np.diff(times) > 0):
            raise IntegrationError("trajectory times must be strictly increasing")
        times.flags.writeable = False
        states.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "chart", tuple(self.chart))

    def __len__(self):
        return len(self.times)

    def column(self, name: str) -> np.ndarray:
        return self.states[:, self.chart.index(name)]

    @property
    def final(self) -> dict[str, float]:
        return dict(zip(self.chart, map(float, self.states[-1])))

    def to_csv(self, path) -> Path:
        path = Path(path)
        lines = [",".join(("t",) + self.chart)]
        for t, row in zip(self.times, self.states):
            lines.append(",".join(format(v, ".17g") for v in (t, *row)))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


def read_csv(path) -> tuple[tuple[str, ...], np.ndarray, np.ndarray]:
    """Inverse of :meth:`Trajectory.to_csv`: (chart, times, states)."""
    rows = Path(path).read_text(encoding="utf-8").strip().splitlines()
    header = rows[0].split(",")
    data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]]).reshape(-1, len(header))
    return tuple(header[1:]), data[:, 0], data[:, 1:]


@dataclass(frozen=True, eq=False)
class ObservableSeries:
    times: np.ndarray
    values: np.ndarray
    label: str = ""


# -- integrators ----------------------------------------------------------------


def _norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(scale > 0, np.abs(err) / np.where(scale > 0, scale, 1.0),
                         np.where(err == 0, 0.0, np.inf))
    return float(np.max(ratio)) if ratio.size else 0.0


def _initial_step(f, y0, f0, rtol, atol, span):
    scale = atol + rtol * np.abs(y0)
    scale = np.where(scale > 0, scale, 1.0)
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = f(y0 + h0 * f0)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


PostStep = Callable[[float, np.ndarray], np.ndarray]


def solve(f: Callable[[np.ndarray], np.ndarray], y0, cfg: IntegratorConfig,
          post_step: PostStep | None = None):
    """Integrate the autonomous field ``f`` over ``cfg.t_span``.

    Returns ``(times, states, stats)``. ``post_step(t, y)`` may replace each
    accepted state (used for projection onto constraints); exceptions from
    it propagate with the partial run attached as ``.partial``.
    """
    t0, t1 = cfg.t_span
    y = np.array(y0, dtype=float)
    if not np.all(np.isfinite(y)):
        raise IntegrationError("initial state must be finite")
    times, states = [t0], [y.copy()]
    stats = {"accepted": 0, "rejected": 0, "nfev": 0}
    if t1 == t0:
        return np.array(times), np.array(states), stats

    def call(x):
        stats["nfev"] += 1
        v = f(x)
        if not np.all(np.isfinite(v)):
            raise IntegrationError(f"non-finite velocity at state {x}")
        return v

    def accept(t, ynew):
        if post_step is not None:
            try:
                ynew = post_step(t, ynew)
            except Exception as exc:
                exc.partial = (np.array(times), np.array(states), dict(stats))
                raise
        times.append(t)
        states.append(ynew.copy())
        stats["accepted"] += 1
        return ynew

    t = t0
    if cfg.method == "rk4":
        nsteps = int(math.ceil((t1 - t0) / cfg.step - 1e-9))
        if nsteps > cfg.max_steps:
            raise IntegrationError(f"rk4 needs {nsteps} steps > max_steps={cfg.max_steps}")
        for k in range(1, nsteps + 1):
            tn = t1 if k == nsteps else t0 + k * cfg.step
            h = tn - t
            k1 = call(y)
            k2 = call(y + 0.5 * h * k1)
            k3 = call(y + 0.5 * h * k2)
            k4 = call(y + h * k3)
            y = accept(tn, y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4))
            t = tn
        return np.array(times), np.array(states), stats

    fy = call(y)
    h = min(_initial_step(call, y, fy, cfg.rtol, cfg.atol, t1 - t0), cfg.max_step)
    K = np.empty((7, y.size))
    steps = 0
    while t < t1:
        if steps >= cfg.max_steps:
            raise IntegrationError(f"max_steps={cfg.max_steps} exhausted at t={t}")
        steps += 1
        if h < 16 * np.finfo(float).eps * max(1.0, abs(t)):
            raise StepSizeUnderflow(f"step size underflow at t={float(t)!r} (h={h:.3e})")
        last = t + h >= t1 or (t1 - (t + h)) < 1e-12 * max(1.0, abs(t1))
        if last:
            h = t1 - t
        K[0] = fy
        for s in range(1, 7):
            K[s] = call(y + h * (np.asarray(_A[s]) @ K[:s]))
        ynew = y + h * (_B5 @ K)
        err = _norm(h * (_E @ K), y, ynew, cfg.rtol, cfg.atol)
        if err <= 1.0:
            t = t1 if last else t + h
            y2 = accept(t, ynew)
            fy = K[6].copy() if y2 is ynew else call(y2)
            y = y2
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** (-0.2)))
            h = min(h * fac, cfg.max_step)
        else:
            stats["rejected"] += 1
            h *= max(0.2, 0.9 * err ** (-0.2))
    return np.array(times), np.array(states), stats


def _initial_state(sys: HamiltonianSystem, x0, cfg: IntegratorConfig) -> np.ndarray:
    x = sys.point(x0)
    ti = sys.formalism.t_index
    if ti is not None:
        t0 = cfg.t_span[0]
        if abs(x[ti] - t0) > 1e-12 * max(1.0, abs(t0)):
            raise InconsistentTimeError(
                f"initial {sys.formalism.time} = {x[ti]!r} differs from t0 = {t0!r}")
    return x


def integrate(sys: HamiltonianSystem, x0, cfg: IntegratorConfig) -> Trajectory:
    """Integral curve of the evolution field from ``x0``."""
    x = _initial_state(sys, x0, cfg)
    times, states, stats = solve(geo.evolution_field(sys), x, cfg)
    return Trajectory(times, states, sys.chart, sys.params, stats["accepted"],
                      stats["rejected"], stats["nfev"], {"method": cfg.method})


def observe_along(traj: Trajectory, g: Expression | str,
                  params: Mapping[str, float] | None = None) -> ObservableSeries:
    """Evaluate ``g`` at every recorded state."""
    params = dict(traj.params if params is None else params)
    if isinstance(g, str):
        from .expr import parse
        g = parse(g, traj.chart, tuple(params))
    if tuple(g.chart) != traj.chart:
        g = g.with_chart(traj.chart)
    vals = np.empty(len(traj))
    for i, x in enumerate(traj.states):
        try:
            vals[i] = g.value(x, params)
        except ExprError as exc:
            raise ExprError(f"sample {i} (t={traj.times[i]!r}): {exc}") from exc
    return ObservableSeries(traj.times, vals, g.unparse())


def cumulative_trapezoid(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    out = np.zeros(len(times))
    if len(times) > 1:
        out[1:] = np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(times))
    return out


def check_dissipation_law(sys: HamiltonianSystem, traj: Trajectory, g: Expression | str,
                          tol: float = 1e-5) -> VerificationReport:
    """Compare ``g(t)`` with ``g(0) exp(-int_0^t R_z H ds)`` along ``traj``."""
    fm = sys.formalism
    if not fm.kind.has_action:
        raise geo.FormalismMismatch(
            f"dissipation laws need a contact or cocontact system, not {fm.kind.value}")
    g = sys.parse(g) if isinstance(g, str) else g
    series = observe_along(traj, g, sys.params)
    H = sys.observable(sys.H)
    rate = np.array([H.value_and_gradient(x)[1][fm.z_index] for x in traj.states])
    predicted = series.values[0] * np.exp(-cumulative_trapezoid(rate, traj.times))
    dev = np.abs(series.values - predicted)
    denom = np.abs(predicted)
    rel = np.where(denom > 0, dev / np.where(denom > 0, denom, 1.0), dev)
    k = int(np.argmax(rel))
    worst = {"t": float(traj.times[k]), **dict(zip(sys.chart, map(float, traj.states[k])))}
    return VerificationReport(
        f"dissipation_law[{series.label}]", float(rel[k]), float(np.sqrt(np.mean(rel ** 2))),
        len(traj), 0, tol, worst,
        {"sup_rel_dev": float(rel[k]), "g0": float(series.values[0]),
         "g_final": float(series.values[-1]), "predicted_final": float(predicted[-1]),
         "t_final": float(traj.times[-1])})


def check_level_set_invariance(sys: HamiltonianSystem, c: CandidateIntegral, x0,
                               cfg: IntegratorConfig, factor: float = 100.0,
                               start_tol: float = 1e-10) -> VerificationReport:
    """Integrate from ``x0`` on ``{g = 0}`` and report the drift of ``|g|``.

    Passes when the drift stays below ``factor * rtol * scale`` (``step**4``
    replaces ``rtol`` for RK4), where ``scale = max(1, max |state|)``.
    """
    g = sys.observable(c.g)
    x = sys.point(x0)
    g0 = g.value(x)
    if abs(g0) > start_tol:
        raise ValueError(f"initial state is not on the level set: |g| = {abs(g0):.3e}")
    traj = integrate(sys, x, cfg)
    vals = np.abs([g.value(s) for s in traj.states])
    scale = max(1.0, float(np.max(np.abs(traj.states))))
    base = cfg.rtol if cfg.method == "dp54" else cfg.step ** 4
    k = int(np.argmax(vals))
    worst = {"t": float(traj.times[k]), **dict(zip(sys.chart, map(float, traj.states[k])))}
    return VerificationReport(
        f"level_set_invariance[{c.label}]", float(vals[k]), float(np.sqrt(np.mean(vals ** 2))),
        len(traj), 0, factor * base * scale, worst,
        {"scale": scale, "t_final": float(traj.times[-1]), "g_final": float(vals[-1])})


__all__ = [
    "IntegratorConfig", "Trajectory", "ObservableSeries", "IntegrationError",
    "StepSizeUnderflow", "InconsistentTimeError", "solve", "integrate", "observe_along",
    "check_dissipation_law", "check_level_set_invariance", "cumulative_trapezoid",
    "read_csv",
]
