"""Canonical-coordinate Hamiltonian geometry for four formalisms.

Everything is expressed in Darboux charts:

* symplectic   ``(q, p)``       dim 2n
* cosymplectic ``(q, p, t)``    dim 2n+1
* contact      ``(q, p, z)``    dim 2n+1
* cocontact    ``(t, q, p, z)`` dim 2n+2

Hamiltonian vector fields use the canonical components

* symplectic/cosymplectic: ``qdot = df/dp``, ``pdot = -df/dq`` (``tdot = 0``)
* contact/cocontact: ``qdot = df/dp``, ``pdot = -(df/dq + p df/dz)``,
  ``zdot = p . df/dp - f`` (``tdot = 0``)

The cocontact components are the contact ones with ``t`` inert; the
evolution field adds ``d/dt`` for the time-dependent formalisms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from . import expr as ex
from .expr import Expression


class GeometryError(Exception):
    pass


class FormalismMismatch(GeometryError):
    """The requested structure does not exist for this formalism."""


class Kind(str, Enum):
    SYMPLECTIC = "symplectic"
    COSYMPLECTIC = "cosymplectic"
    CONTACT = "contact"
    COCONTACT = "cocontact"

    @property
    def has_time(self) -> bool:
        return self in (Kind.COSYMPLECTIC, Kind.COCONTACT)

    @property
    def has_action(self) -> bool:
        return self in (Kind.CONTACT, Kind.COCONTACT)


@dataclass(frozen=True)
class Formalism:
    """Formalism tag, degrees of freedom and coordinate names."""

    kind: Kind
    n: int
    positions: tuple[str, ...] = ()
    momenta: tuple[str, ...] = ()
    time: str = "t"
    action: str = "z"

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.n < 1:
            raise GeometryError(f"need n >= 1 degrees of freedom, got {self.n}")
        qs = tuple(self.positions) or tuple(f"q{i + 1}" for i in range(self.n))
        ps = tuple(self.momenta) or tuple(f"p{i + 1}" for i in range(self.n))
        if len(qs) != self.n or len(ps) != self.n:
            raise GeometryError(f"expected {self.n} position and momentum names")
        object.__setattr__(self, "positions", qs)
        object.__setattr__(self, "momenta", ps)
        chart = self.chart
        if len(set(chart)) != len(chart):
            raise GeometryError(f"duplicate coordinate names in {chart}")
        for name in chart:
            if name in ex.FUNCTIONS or not name.isidentifier():
                raise GeometryError(f"invalid coordinate name {name!r}")

    @property
    def chart(self) -> tuple[str, ...]:
        qp = self.positions + self.momenta
        if self.kind is Kind.SYMPLECTIC:
            return qp
        if self.kind is Kind.COSYMPLECTIC:
            return qp + (self.time,)
        if self.kind is Kind.CONTACT:
            return qp + (self.action,)
        return (self.time,) + qp + (self.action,)

    @property
    def dim(self) -> int:
        return len(self.chart)

    def index(self, name: str) -> int:
        try:
            return self.chart.index(name)
        except ValueError:
            raise GeometryError(f"{name!r} is not a coordinate of {self.chart}") from None

    @property
    def q_slice(self) -> slice:
        off = 1 if self.kind is Kind.COCONTACT else 0
        return slice(off, off + self.n)

    @property
    def p_slice(self) -> slice:
        off = (1 if self.kind is Kind.COCONTACT else 0) + self.n
        return slice(off, off + self.n)

    @property
    def t_index(self) -> int | None:
        if self.kind is Kind.COSYMPLECTIC:
            return 2 * self.n
        if self.kind is Kind.COCONTACT:
            return 0
        return None

    @property
    def z_index(self) -> int | None:
        if self.kind is Kind.CONTACT:
            return 2 * self.n
        if self.kind is Kind.COCONTACT:
            return 2 * self.n + 1
        return None

    def conjugate(self, name: str) -> str:
        """Canonical partner of a position or momentum coordinate."""
        if name in self.positions:
            return self.momenta[self.positions.index(name)]
        if name in self.momenta:
            return self.positions[self.momenta.index(name)]
        raise GeometryError(f"{name!r} is not a canonical position or momentum")

    def without_pair(self, name: str) -> "Formalism":
        if self.n < 2:
            raise GeometryError("cannot remove a canonical pair from a 1-degree-of-freedom chart")
        self.conjugate(name)
        i = self.positions.index(name) if name in self.positions else self.momenta.index(name)
        keep = [k for k in range(self.n) if k != i]
        return Formalism(self.kind, self.n - 1,
                         tuple(self.positions[k] for k in keep),
                         tuple(self.momenta[k] for k in keep),
                         self.time, self.action)

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "n": self.n,
             "positions": list(self.positions), "momenta": list(self.momenta)}
        if self.kind.has_time:
            d["time"] = self.time
        if self.kind.has_action:
            d["action"] = self.action
        return d


@dataclass(frozen=True)
class HamiltonianSystem:
    formalism: Formalism
    H: Expression
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "params", dict(self.params))
        if tuple(self.H.chart) != self.chart:
            object.__setattr__(self, "H", self.H.with_chart(self.chart, self.H.params))
        missing = sorted(set(self.H.params) - set(self.params))
        if missing:
            raise GeometryError("parameters without values: " + ", ".join(missing))
        clash = sorted(set(self.params) & set(self.chart))
        if clash:
            raise GeometryError("parameter names collide with coordinates: " + ", ".join(clash))

    @classmethod
    def from_text(cls, formalism: Formalism, hamiltonian: str,
                  params: Mapping[str, float] | None = None) -> "HamiltonianSystem":
        params = dict(params or {})
        return cls(formalism, ex.parse(hamiltonian, formalism.chart, tuple(params)), params)

    @property
    def chart(self) -> tuple[str, ...]:
        return self.formalism.chart

    @property
    def kind(self) -> Kind:
        return self.formalism.kind

    def parse(self, text: str) -> Expression:
        """Parse an observable on this system's chart and parameters."""
        return ex.parse(text, self.chart, tuple(self.params))

    def observable(self, f) -> "Observable":
        if isinstance(f, (ExprObservable, BracketObservable)):
            return f
        if isinstance(f, str):
            f = self.parse(f)
        if tuple(f.chart) != self.chart:
            raise GeometryError(f"expression chart {f.chart} does not match {self.chart}")
        return ExprObservable(f, self.params)

    def point(self, values: Mapping[str, float] | Sequence[float]) -> np.ndarray:
        """Chart-ordered state from a name mapping or a sequence."""
        if isinstance(values, Mapping):
            unknown = sorted(set(values) - set(self.chart))
            if unknown:
                raise GeometryError("unknown coordinates: " + ", ".join(unknown))
            missing = [c for c in self.chart if c not in values]
            if missing:
                raise GeometryError("missing coordinates: " + ", ".join(missing))
            return np.array([float(values[c]) for c in self.chart])
        x = np.asarray(values, dtype=float)
        if x.shape != (len(self.chart),):
            raise GeometryError(f"state must have length {len(self.chart)}")
        return x


# -- observables ---------------------------------------------------------------


class ExprObservable:
    """An expression with parameter values fixed."""

    exact = True

    def __init__(self, e: Expression, params: Mapping[str, float]):
        self.expr = e
        self.params = dict(params)

    def value(self, x) -> float:
        return self.expr.value(x, self.params)

    def value_and_gradient(self, x):
        return self.expr.value_and_gradient(x, self.params)

    def hvp(self, x, w):
        return self.expr.hvp(x, self.params, w)

    def hessian(self, x):
        return self.expr.hessian(x, self.params)

    def __repr__(self):
        return f"ExprObservable({self.expr.unparse()!r})"


class BracketObservable:
    """The bracket ``{f, g}`` as a scalar field with an exact gradient.

    The gradient uses Hessian-vector products of ``f`` and ``g``, so both
    operands must be expression-backed.
    """

    exact = False

    def __init__(self, sys: HamiltonianSystem, f, g):
        self.sys = sys
        self.f = sys.observable(f)
        self.g = sys.observable(g)
        if not (self.f.exact and self.g.exact):
            raise GeometryError("bracket gradients need expression-backed operands")

    def value(self, x) -> float:
        return _bracket_value(self.sys.formalism, self.f, self.g, np.asarray(x, dtype=float))

    def value_and_gradient(self, x):
        x = np.asarray(x, dtype=float)
        fm = self.sys.formalism
        n = x.size
        f0, gf = self.f.value_and_gradient(x)
        g0, gg = self.g.value_and_gradient(x)
        Hf = self.f.hessian(x)
        Hg = self.g.hessian(x)
        Xg = canonical_components(fm, x, gg, g0)
        zi = fm.z_index
        rz = gg[zi] if zi is not None else 0.0
        grad = np.empty(n)
        eye = np.eye(n)
        for k in range(n):
            w = eye[k]
            dXg = _components_jvp(fm, x, gg, g0, Hg[:, k], gg[k], w)
            d = Hf[:, k] @ Xg + gf @ dXg
            if zi is not None:
                d += gf[k] * rz + f0 * Hg[zi, k]
            grad[k] = d
        return f0 * rz + gf @ Xg, grad

    def __repr__(self):
        return f"BracketObservable({self.f!r}, {self.g!r})"


Observable = ExprObservable | BracketObservable


def canonical_components(fm: Formalism, x: np.ndarray, grad: np.ndarray, fval: float) -> np.ndarray:
    """Velocity of ``X_f`` from ``f`` and its gradient at ``x``."""
    out = np.zeros(fm.dim)
    qs, ps = fm.q_slice, fm.p_slice
    out[qs] = grad[ps]
    if fm.kind.has_action:
        zi = fm.z_index
        out[ps] = -(grad[qs] + x[ps] * grad[zi])
        out[zi] = x[ps] @ grad[ps] - fval
    else:
        out[ps] = -grad[qs]
    return out


def _components_jvp(fm, x, grad, fval, hess_w, grad_w, w):
    # components are affine in (grad, fval) plus a term bilinear in (x, grad)
    base = canonical_components(fm, x, hess_w, grad_w)
    if not fm.kind.has_action:
        return base
    zero = np.zeros_like(x)
    return base + canonical_components(fm, w, grad, 0.0) - canonical_components(fm, zero, grad, 0.0)


def _bracket_value(fm: Formalism, f, g, x) -> float:
    f0, gf = f.value_and_gradient(x)
    g0, gg = g.value_and_gradient(x)
    val = gf @ canonical_components(fm, x, gg, g0)
    if fm.kind.has_action:
        val += f0 * gg[fm.z_index]
    return float(val)


# -- vector fields ---------------------------------------------------------------


@dataclass(frozen=True)
class VectorFieldEval:
    """A chart-ordered vector field ``point -> velocity``.

    ``jvp(x, w)`` returns the exact directional derivative of the field when
    the field is expression-backed.
    """

    func: Callable[[np.ndarray], np.ndarray]
    tag: str
    chart: tuple[str, ...]
    jvp: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def __call__(self, x) -> np.ndarray:
        return self.func(np.asarray(x, dtype=float))

    def apply(self, f: "Observable", x) -> float:
        """``(X f)(x)`` for an observable ``f``."""
        x = np.asarray(x, dtype=float)
        return float(f.value_and_gradient(x)[1] @ self(x))


def hamiltonian_field(sys: HamiltonianSystem, f, tag: str = "X_f") -> VectorFieldEval:
    """``X_f`` in canonical coordinates (``tdot = 0`` for time formalisms)."""
    fm = sys.formalism
    obs = sys.observable(f)

    def func(x):
        val, grad = obs.value_and_gradient(x)
        return canonical_components(fm, x, grad, val)

    jvp = None
    if obs.exact:
        def jvp(x, w):
            x = np.asarray(x, dtype=float)
            w = np.asarray(w, dtype=float)
            val, grad, grad_w, hess_w = obs.hvp(x, w)
            return _components_jvp(fm, x, grad, val, hess_w, grad_w, w)

    return VectorFieldEval(func, tag, sys.chart, jvp)


def evolution_field(sys: HamiltonianSystem) -> VectorFieldEval:
    """The dynamical field: ``X_H``, plus ``d/dt`` when the chart has time."""
    xh = hamiltonian_field(sys, sys.H, tag="X_H")
    ti = sys.formalism.t_index
    if ti is None:
        return VectorFieldEval(xh.func, "E_H", sys.chart, xh.jvp)

    def func(x):
        v = xh.func(x)
        v[ti] = 1.0
        return v

    def jvp(x, w):
        return xh.jvp(x, w)

    return VectorFieldEval(func, "E_H", sys.chart, jvp)


def reeb_field(sys: HamiltonianSystem, which: str) -> VectorFieldEval:
    idx = _reeb_index(sys.formalism, which)
    dim = sys.formalism.dim

    def func(x):
        v = np.zeros(dim)
        v[idx] = 1.0
        return v

    return VectorFieldEval(func, f"Reeb-{which}", sys.chart, lambda x, w: np.zeros(dim))


def _reeb_index(fm: Formalism, which: str) -> int:
    if which in ("time", "t"):
        idx = fm.t_index
    elif which in ("z", "action"):
        idx = fm.z_index
    else:
        raise ValueError(f"unknown Reeb field {which!r}; use 'time' or 'z'")
    if idx is None:
        raise FormalismMismatch(f"{fm.kind.value} formalism has no {which} Reeb field")
    return idx


def reeb_apply(sys: HamiltonianSystem, which: str, f, point) -> float:
    """``df/dt`` or ``df/dz`` at ``point``."""
    idx = _reeb_index(sys.formalism, which)
    return float(sys.observable(f).value_and_gradient(sys.point(point))[1][idx])


def bracket(sys: HamiltonianSystem, f, g, point) -> float:
    """Poisson bracket (symplectic, cosymplectic) or Jacobi bracket (contact,
    cocontact) ``{f, g} = X_g f + f R_z g``."""
    return _bracket_value(sys.formalism, sys.observable(f), sys.observable(g), sys.point(point))


def bracket_observable(sys: HamiltonianSystem, f, g) -> BracketObservable:
    return BracketObservable(sys, f, g)


def fd_jvp(field: VectorFieldEval, x, w, rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference directional derivative of a field."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    norm = np.linalg.norm(w)
    if norm == 0:
        return np.zeros_like(x)
    h = rel_step * max(1.0, np.linalg.norm(x))
    u = w / norm
    return norm * (field(x + h * u) - field(x - h * u)) / (2 * h)


def lie_bracket(X: VectorFieldEval, Y: VectorFieldEval, x, exact: bool = False) -> np.ndarray:
    """``[X, Y](x) = DY(x) X(x) - DX(x) Y(x)``.

    Finite differences by default; ``exact=True`` uses hyper-dual Jacobians
    and needs expression-backed fields.
    """
    x = np.asarray(x, dtype=float)
    vx, vy = X(x), Y(x)
    if exact:
        if X.jvp is None or Y.jvp is None:
            raise GeometryError("exact Lie bracket needs expression-backed fields")
        return Y.jvp(x, vx) - X.jvp(x, vy)
    return fd_jvp(Y, x, vx) - fd_jvp(X, x, vy)
