"""Closed-form exact solutions and their data, derived symbolically."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy as sy

from .assembly import ProblemKind, ProblemSpec
from .errors import InvalidArgumentError

_X = sy.symbols("x y z", real=True)
COEFFICIENT_PRESETS = ("smooth",)


@dataclass(frozen=True)
class AnalyticField:
    """Point-evaluable exact field.

    ``value(points)`` gives (N,) or (N, 3); ``deriv`` the gradient (N, 3) or
    Jacobian (N, 3, 3) with ``jac[:, i, j] = d v_i / d x_j``.
    """

    value: Callable
    deriv: Callable
    is_vector: bool

    def curl(self, points):
        J = self.deriv(points)
        return np.stack([J[:, 2, 1] - J[:, 1, 2], J[:, 0, 2] - J[:, 2, 0], J[:, 1, 0] - J[:, 0, 1]], axis=-1)

    def div(self, points):
        return np.trace(self.deriv(points), axis1=-2, axis2=-1)

    def fd_defect(self, n_points: int = 50, step: float = 1e-5, seed: int = 0) -> float:
        """Max relative gap between ``deriv`` and central differences of ``value``."""
        rng = np.random.default_rng(seed)
        p = 0.05 + 0.9 * rng.random((n_points, 3))
        cols = []
        for k in range(3):
            e = np.zeros(3)
            e[k] = step
            cols.append((self.value(p + e) - self.value(p - e)) / (2 * step))
        fd = np.stack(cols, axis=-1)
        d = self.deriv(p)
        return float(np.abs(fd - d).max() / max(1.0, np.abs(d).max()))


@dataclass(frozen=True)
class ManufacturedSolution:
    kind: ProblemKind
    fields: dict  # "u", "phi" -> AnalyticField
    f1: Callable
    f2: Callable | None
    coefficient: object
    expressions: dict  # sympy expressions, for inspection


def _compile(expr, shape):
    """numpy callable of points (N, 3) for a sympy expression / nested list."""
    flat = list(np.ravel(np.array(expr, dtype=object))) if shape else [expr]
    f = sy.lambdify(_X, flat, modules="numpy", cse=True)

    def call(points):
        p = np.asarray(points, dtype=float)
        out = f(p[:, 0], p[:, 1], p[:, 2])
        out = np.stack([np.broadcast_to(np.asarray(o, dtype=float), p.shape[:1]) for o in out], axis=-1)
        return out.reshape(p.shape[:1] + tuple(shape))

    return call


def _grad(s):
    return [sy.diff(s, v) for v in _X]


def _curl(v):
    x, y, z = _X
    return [sy.diff(v[2], y) - sy.diff(v[1], z), sy.diff(v[0], z) - sy.diff(v[2], x), sy.diff(v[1], x) - sy.diff(v[0], y)]


def _lap(s):
    return sum(sy.diff(s, v, 2) for v in _X)


def _jac(v):
    return [[sy.diff(v[i], w) for w in _X] for i in range(3)]


def coefficient_expression(coefficient):
    """Symbolic form of a coefficient given as number, preset name or 3x3 matrix."""
    if isinstance(coefficient, str):
        if coefficient != "smooth":
            raise InvalidArgumentError(f"unknown coefficient preset {coefficient!r}; known: {COEFFICIENT_PRESETS}")
        x, y, z = _X
        return 1 + sy.Rational(1, 2) * sy.sin(sy.pi * x) * sy.sin(sy.pi * y) * sy.sin(sy.pi * z)
    arr = np.asarray(coefficient, dtype=float)
    if arr.shape == ():
        if not arr > 0:
            raise InvalidArgumentError("coefficient must be positive")
        return sy.nsimplify(float(arr))
    if arr.shape == (3, 3):
        if not np.allclose(arr, arr.T) or np.linalg.eigvalsh(arr).min() <= 0:
            raise InvalidArgumentError("matrix coefficient must be symmetric positive definite")
        return sy.Matrix(arr.tolist())
    raise InvalidArgumentError(f"unsupported coefficient {coefficient!r}")


def _coefficient_callable(expr):
    if isinstance(expr, sy.MatrixBase):
        mat = np.array(expr.tolist(), dtype=float)
        return lambda p: np.broadcast_to(mat, (len(p), 3, 3))
    if expr.is_number:
        return float(expr)
    return _compile(expr, ())


def manufactured_solution(kind, coefficient=1.0) -> ManufacturedSolution:
    kind = ProblemKind(kind)
    x, y, z = _X
    pi = sy.pi
    a = coefficient_expression(coefficient)
    if kind is ProblemKind.BILAPLACIAN:
        if isinstance(a, sy.MatrixBase):
            raise InvalidArgumentError("the bi-Laplacian takes a scalar coefficient")
        u = (sy.sin(pi * x) * sy.sin(pi * y) * sy.sin(pi * z)) ** 2
        phi = _grad(u)
        f1 = _lap(a * _lap(u))
        fields = {
            "u": AnalyticField(_compile(u, ()), _compile(phi, (3,)), False),
            "phi": AnalyticField(_compile(phi, (3,)), _compile(_jac(phi), (3, 3)), True),
        }
        f1_fn = _compile(f1, ())
        exprs = {"u": u, "phi": phi, "f1": f1}
    else:
        p = lambda t: sy.sin(pi * t)  # noqa: E731
        q = lambda t: sy.sin(pi * t) ** 2  # noqa: E731
        u = [p(x) * q(y) * q(z), q(x) * p(y) * q(z), q(x) * q(y) * p(z)]
        phi = _curl(u)
        cc = _curl(phi)
        if isinstance(a, sy.MatrixBase):
            acc = list(a * sy.Matrix(cc))
        else:
            acc = [a * c for c in cc]
        f1 = [sy.expand(c + ui) for c, ui in zip(_curl(_curl(acc)), u)]
        fields = {
            "u": AnalyticField(_compile(u, (3,)), _compile(_jac(u), (3, 3)), True),
            "phi": AnalyticField(_compile(phi, (3,)), _compile(_jac(phi), (3, 3)), True),
        }
        f1_fn = _compile(f1, (3,))
        exprs = {"u": u, "phi": phi, "f1": f1}
    return ManufacturedSolution(kind, fields, f1_fn, None, _coefficient_callable(a), exprs)


def manufactured_problem(kind, coefficient=1.0, quad_degree: int = 6) -> ProblemSpec:
    """ProblemSpec whose data come from the manufactured solution."""
    ms = manufactured_solution(kind, coefficient)
    return ProblemSpec(ms.kind, ms.coefficient, ms.f1, ms.f2, quad_degree, exact=ms)
