"""Dual and hyper-dual numbers for exact forward-mode derivatives.

``Dual`` carries a value and a vector of first-order parts (one per seeded
direction), so a single evaluation yields a full gradient.

``HyperDual`` carries two infinitesimal directions: a vector direction
``e1`` (typically the coordinate basis) and a scalar direction ``e2``.
With ``e1`` seeded by the basis and ``e2`` by a vector ``w`` one evaluation
gives ``f``, ``grad f``, ``grad f . w`` and ``Hess(f) w``.
"""

from __future__ import annotations

import numpy as np


class Dual:
    """``value + sum_k d[k] eps_k`` with ``eps_j eps_k = 0``."""

    __slots__ = ("value", "d")

    def __init__(self, value: float, d: np.ndarray):
        self.value = float(value)
        self.d = d

    @classmethod
    def seed(cls, values, directions=None) -> list["Dual"]:
        """Dual variables for ``values``; identity seeding by default."""
        values = np.asarray(values, dtype=float)
        if directions is None:
            directions = np.eye(values.size)
        directions = np.asarray(directions, dtype=float)
        return [cls(v, directions[i].copy()) for i, v in enumerate(values)]

    def __repr__(self) -> str:
        return f"Dual({self.value!r}, {self.d!r})"

    def __neg__(self):
        return Dual(-self.value, -self.d)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.d + other.d)
        return Dual(self.value + other, self.d)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value - other.value, self.d - other.d)
        return Dual(self.value - other, self.d)

    def __rsub__(self, other):
        return Dual(other - self.value, -self.d)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value * other.value,
                        self.value * other.d + other.value * self.d)
        return Dual(self.value * other, self.d * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            if other.value == 0.0:
                raise ZeroDivisionError("division by a dual with zero value")
            inv = 1.0 / other.value
            return Dual(self.value * inv,
                        (self.d * other.value - self.value * other.d) * (inv * inv))
        if other == 0:
            raise ZeroDivisionError("division by zero")
        return Dual(self.value / other, self.d / other)

    def __rtruediv__(self, other):
        if self.value == 0.0:
            raise ZeroDivisionError("division by a dual with zero value")
        inv = 1.0 / self.value
        return Dual(other * inv, -other * self.d * (inv * inv))

    def chain(self, f0: float, f1: float, f2: float = 0.0) -> "Dual":
        """Apply a scalar function given its value and first derivative."""
        return Dual(f0, f1 * self.d)

    @property
    def is_constant(self) -> bool:
        return not np.any(self.d)


class HyperDual:
    """``a + b.e1 + c e2 + d.e1e2`` with vector ``b``, ``d`` and scalar ``c``."""

    __slots__ = ("value", "d1", "d2", "d12")

    def __init__(self, value: float, d1: np.ndarray, d2: float, d12: np.ndarray):
        self.value = float(value)
        self.d1 = d1
        self.d2 = float(d2)
        self.d12 = d12

    @classmethod
    def seed(cls, values, directions, second) -> list["HyperDual"]:
        """Seed ``x_i`` with ``e1`` part ``directions[i]`` and ``e2`` part ``second[i]``."""
        values = np.asarray(values, dtype=float)
        directions = np.asarray(directions, dtype=float)
        second = np.asarray(second, dtype=float)
        k = directions.shape[1]
        return [cls(v, directions[i].copy(), second[i], np.zeros(k))
                for i, v in enumerate(values)]

    def __repr__(self) -> str:
        return f"HyperDual({self.value!r}, {self.d1!r}, {self.d2!r}, {self.d12!r})"

    def __neg__(self):
        return HyperDual(-self.value, -self.d1, -self.d2, -self.d12)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, HyperDual):
            return HyperDual(self.value + other.value, self.d1 + other.d1,
                             self.d2 + other.d2, self.d12 + other.d12)
        return HyperDual(self.value + other, self.d1, self.d2, self.d12)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, HyperDual):
            return HyperDual(self.value - other.value, self.d1 - other.d1,
                             self.d2 - other.d2, self.d12 - other.d12)
        return HyperDual(self.value - other, self.d1, self.d2, self.d12)

    def __rsub__(self, other):
        return HyperDual(other - self.value, -self.d1, -self.d2, -self.d12)

    def __mul__(self, other):
        if isinstance(other, HyperDual):
            a, b, c, d = self.value, self.d1, self.d2, self.d12
            a2, b2, c2, d2 = other.value, other.d1, other.d2, other.d12
            return HyperDual(a * a2, a * b2 + a2 * b, a * c2 + a2 * c,
                             a * d2 + a2 * d + b * c2 + b2 * c)
        return HyperDual(self.value * other, self.d1 * other,
                         self.d2 * other, self.d12 * other)

    __rmul__ = __mul__

    def reciprocal(self) -> "HyperDual":
        if self.value == 0.0:
            raise ZeroDivisionError("division by a hyper-dual with zero value")
        v = self.value
        return self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))

    def __truediv__(self, other):
        if isinstance(other, HyperDual):
            return self * other.reciprocal()
        if other == 0:
            raise ZeroDivisionError("division by zero")
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def chain(self, f0: float, f1: float, f2: float = 0.0) -> "HyperDual":
        """Apply a scalar function given value, first and second derivative."""
        return HyperDual(f0, f1 * self.d1, f1 * self.d2,
                         f1 * self.d12 + f2 * self.d1 * self.d2)

    @property
    def is_constant(self) -> bool:
        return not (np.any(self.d1) or self.d2 != 0.0 or np.any(self.d12))


def value_of(x) -> float:
    return x.value if isinstance(x, (Dual, HyperDual)) else float(x)


def is_active(x) -> bool:
    """True when ``x`` carries nonzero derivative parts."""
    return isinstance(x, (Dual, HyperDual)) and not x.is_constant


def apply(x, f0: float, f1: float, f2: float):
    if isinstance(x, (Dual, HyperDual)):
        return x.chain(f0, f1, f2)
    return f0


__all__ = ["Dual", "HyperDual", "value_of", "is_active", "apply"]
