"""Normalized moment tables, an exact rational oracle, and the moment ODE check."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial

import numpy as np

from .errors import ParameterError, UnsupportedOracleError
from .weights import SQUARE, WeightSpec, build_quadrature


def _index_pairs(max_degree):
    for total in range(max_degree + 1):
        for k in range(total + 1):
            yield total - k, k


@dataclass(frozen=True, eq=False)
class MomentTable:
    """Moments ``omega[h, k]`` for ``h + k <= max_degree``.

    ``values`` is a square array; entries with ``h + k > max_degree`` are NaN.
    """

    max_degree: int
    values: np.ndarray
    t: float = 0.0

    def __getitem__(self, hk):
        h, k = hk
        if h < 0 or k < 0 or h + k > self.max_degree:
            raise ParameterError(
                f"moment ({h}, {k}) outside table of degree {self.max_degree}", "moments")
        return float(self.values[h, k])

    def items(self):
        for h, k in _index_pairs(self.max_degree):
            yield h, k, float(self.values[h, k])

    def truncated(self, max_degree):
        if max_degree > self.max_degree:
            raise ParameterError("cannot extend a moment table", "moments")
        vals = self.values[:max_degree + 1, :max_degree + 1].copy()
        return MomentTable(max_degree, vals, self.t)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["h", "k", "value"])
        for h, k, v in self.items():
            writer.writerow([h, k, repr(v)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "max_degree": self.max_degree,
            "t": self.t,
            "moments": [{"h": h, "k": k, "value": v, "hex": float.hex(v)}
                        for h, k, v in self.items()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data) -> "MomentTable":
        m = int(data["max_degree"])
        vals = np.full((m + 1, m + 1), np.nan)
        for rec in data["moments"]:
            # the hexfloat string is authoritative; the decimal is for humans
            vals[rec["h"], rec["k"]] = float.fromhex(rec["hex"])
        return cls(m, vals, float(data.get("t", 0.0)))

    @classmethod
    def from_json(cls, text) -> "MomentTable":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class RationalMomentTable:
    max_degree: int
    values: dict

    def __getitem__(self, hk):
        return self.values[tuple(hk)]

    def to_float(self) -> MomentTable:
        vals = np.full((self.max_degree + 1,) * 2, np.nan)
        for (h, k), v in self.values.items():
            vals[h, k] = float(v)
        return MomentTable(self.max_degree, vals, 0.0)


def compute_moments(spec: WeightSpec, max_degree: int) -> MomentTable:
    """Quadrature moments of the deformed weight, renormalized so omega[0,0] == 1."""
    if max_degree < 0:
        raise ParameterError("max_degree must be >= 0", "moments")
    rule = build_quadrature(spec, max_degree)
    vx = np.vander(rule.x, max_degree + 1, increasing=True)
    vy = np.vander(rule.y, max_degree + 1, increasing=True)
    raw = (vx * rule.weights[:, None]).T @ vy
    table = raw / raw[0, 0]
    table[0, 0] = 1.0
    h, k = np.indices(table.shape)
    table[h + k > max_degree] = np.nan
    return MomentTable(max_degree, table, spec.t)


def _beta_int(p, q):
    """B(p, q) for positive integers as a Fraction."""
    return Fraction(factorial(p - 1) * factorial(q - 1), factorial(p + q - 1))


def _jacobi_1d_moment(h, al, be):
    # int_{-1}^{1} x^h (1-x)^al (1+x)^be dx with x = 2u - 1, up to the 2^(al+be+1)
    # factor that cancels on normalization
    return sum(comb(h, j) * 2 ** j * (-1) ** (h - j) * _beta_int(be + j + 1, al + 1)
               for j in range(h + 1))


def exact_moments(spec: WeightSpec, max_degree: int) -> RationalMomentTable:
    """Exact rational moments for non-negative integer exponents at ``t = 0``."""
    if spec.t != 0.0:
        raise UnsupportedOracleError("exact moments exist only at t = 0", "moments")
    exps = spec.exponents
    if any(e < 0 or e != int(e) for e in exps):
        raise UnsupportedOracleError(
            "exact moments need non-negative integer exponents", "moments")
    exps = tuple(int(e) for e in exps)
    values = {}
    if spec.family == SQUARE:
        al, be, ga, de = exps
        mx = [_jacobi_1d_moment(h, al, be) for h in range(max_degree + 1)]
        my = [_jacobi_1d_moment(k, ga, de) for k in range(max_degree + 1)]
        for h, k in _index_pairs(max_degree):
            values[h, k] = (mx[h] / mx[0]) * (my[k] / my[0])
    else:
        a, b, c = exps

        def dirichlet(h, k):
            return Fraction(factorial(h + a) * factorial(k + b) * factorial(c),
                            factorial(h + k + a + b + c + 2))

        mass = dirichlet(0, 0)
        for h, k in _index_pairs(max_degree):
            values[h, k] = dirichlet(h, k) / mass
    return RationalMomentTable(max_degree, values)


def time_derivative(func, t, step):
    """Second-order finite difference of ``func`` at ``t`` along ``t >= 0``.

    Central when ``t - step >= 0``, otherwise the one-sided three-point rule
    (the deformation path is only defined for non-negative times).
    """
    if step <= 0 or not math.isfinite(step):
        raise ParameterError(f"fd_step must be > 0, got {step}", "moments")
    if t - step >= 0:
        return (func(t + step) - func(t - step)) / (2 * step)
    return (-3 * func(t) + 4 * func(t + step) - func(t + 2 * step)) / (2 * step)


def moment_ode_residual(spec: WeightSpec, max_degree: int, fd_step: float = 1e-5) -> float:
    """Max over ``h + k <= max_degree - 1`` of the moment ODE residual.

    Compares the finite-difference derivative along the exact deformation
    path with ``-omega[h+1,k] - omega[h,k+1] + omega[h,k] (omega[1,0] + omega[0,1])``.
    """
    if max_degree < 1:
        raise ParameterError("max_degree must be >= 1", "moments")
    if fd_step <= 0:
        raise ParameterError(f"fd_step must be > 0, got {fd_step}", "moments")
    m = max_degree - 1

    def table(t):
        return compute_moments(spec.with_time(t), m).values

    dot = time_derivative(table, spec.t, fd_step)
    w = compute_moments(spec, max_degree).values
    d0 = w[1, 0] + w[0, 1]
    worst = 0.0
    for h, k in _index_pairs(m):
        rhs = -w[h + 1, k] - w[h, k + 1] + w[h, k] * d0
        worst = max(worst, abs(dot[h, k] - rhs))
    return worst
