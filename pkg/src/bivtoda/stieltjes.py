"""Stieltjes double series of a weight and its marginal series.

``S(z1, z2) = sum_{h,k} w_{h,k} / (z1^(h+1) z2^(k+1))``, the expansion of
``int w(x, y) / ((z1 - x)(z2 - y))`` for large ``|z1|``, ``|z2|``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, ConvergenceDomainError, ParameterError
from .moments import MomentTable, compute_moments, time_derivative
from .weights import WeightSpec

DEFAULT_GATE = 1e-6


@dataclass(frozen=True, eq=False)
class StieltjesSeries:
    """Partial sums over ``h, k <= K`` of a moment table.

    Evaluation is only allowed for ``|z1|, |z2| > rho``; since every moment
    obeys ``|w_{h,k}| <= rho^(h+k)`` the tail is bounded geometrically there.
    """

    moments: MomentTable
    K: int
    rho: float = 1.0

    def __post_init__(self):
        if self.K < 0:
            raise ParameterError(f"K={self.K} must be >= 0", "stieltjes")
        if self.rho < 1.0:
            raise ParameterError(
                f"guard radius {self.rho} is below the coordinate bound 1", "stieltjes")
        # the double sum touches w_{K,K}
        if self.moments.max_degree < 2 * self.K:
            raise ParameterError(
                f"moment table of degree {self.moments.max_degree} cannot serve K={self.K}"
                f" (needs {2 * self.K})", "stieltjes")

    @classmethod
    def from_spec(cls, spec: WeightSpec, K: int, rho: float = 1.0) -> "StieltjesSeries":
        return cls(compute_moments(spec, 2 * K), K, rho)

    def _square(self):
        K = self.K
        return np.nan_to_num(self.moments.values[:K + 1, :K + 1], nan=0.0)

    def _ratio(self, z):
        z = complex(z)
        if not abs(z) > self.rho:
            raise ConvergenceDomainError(
                f"|z|={abs(z):g} is inside the guard radius {self.rho:g}", "stieltjes")
        return z, self.rho / abs(z)


def _powers(z, K):
    return z ** -np.arange(1, K + 2, dtype=float)


def eval_series(s: StieltjesSeries, z1, z2):
    """Partial sum and tail bound ``(value, tail)`` at ``(z1, z2)``."""
    z1, q1 = s._ratio(z1)
    z2, q2 = s._ratio(z2)
    value = _powers(z1, s.K) @ s._square() @ _powers(z2, s.K)
    const = 1.0 / ((1 - q1) * (1 - q2) * s.rho ** 2)
    tail = const * (q1 ** (s.K + 2) + q2 ** (s.K + 2))
    return complex(value), float(tail)


def marginal_series(s: StieltjesSeries, which: int, index: int, z):
    """``S_{1,k}(z) = sum_h w_{h,k} / z^(h+1)`` or ``S_{2,h}(z) = sum_k w_{h,k} / z^(k+1)``.

    Returns ``(value, tail)``.
    """
    if which not in (1, 2):
        raise ParameterError(f"marginal must be 1 or 2, got {which}", "stieltjes")
    if not 0 <= index <= s.K:
        raise ParameterError(f"index {index} outside 0..{s.K}", "stieltjes")
    z, q = s._ratio(z)
    M = s._square()
    row = M[:, index] if which == 1 else M[index, :]
    value = _powers(z, s.K) @ row
    tail = s.rho ** (index - 1) * q ** (s.K + 2) / (1 - q)
    return complex(value), float(tail)


def stieltjes_ode_residual(spec: WeightSpec, z1, z2, t: float, K: int,
                           fd_step: float = 1e-5, gate: float = DEFAULT_GATE) -> float:
    """``|dS/dt - ((D0 - z1 - z2) S + S_{1,0}(z1) + S_{2,0}(z2))|`` along the exact path.

    ``D0 = w_{1,0}(t) + w_{0,1}(t)``.  Raises :class:`AccuracyError` when the
    truncation tail alone could exceed ``gate``.
    """
    base = spec.with_time(t)

    def value(s_t):
        return np.array([eval_series(StieltjesSeries.from_spec(spec.with_time(s_t), K),
                                     z1, z2)[0]])

    series = StieltjesSeries.from_spec(base, K)
    S, tail = eval_series(series, z1, z2)
    if tail > gate:
        raise AccuracyError(f"series tail bound {tail:.3g} exceeds gate {gate:g}",
                            "stieltjes")
    S1, _ = marginal_series(series, 1, 0, z1)
    S2, _ = marginal_series(series, 2, 0, z2)
    d0 = series.moments[1, 0] + series.moments[0, 1]
    dS = time_derivative(value, t, fd_step)[0]
    rhs = (d0 - complex(z1) - complex(z2)) * S + S1 + S2
    return float(abs(dS - rhs))


def grid_csv(s: StieltjesSeries, points) -> str:
    """CSV of ``S`` over ``(z1, z2)`` pairs, columns as in the evaluation export."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["re(z1)", "im(z1)", "re(z2)", "im(z2)", "re(S)", "im(S)", "tail_bound"])
    for z1, z2 in points:
        z1, z2 = complex(z1), complex(z2)
        value, tail = eval_series(s, z1, z2)
        writer.writerow([repr(v) for v in (z1.real, z1.imag, z2.real, z2.imag,
                                           value.real, value.imag, tail)])
    return buf.getvalue()
