"""Weight families on compact domains, their exponential time deformation,
and Gauss-type quadrature against them.

Two families are supported:

``product-jacobi-square``
    ``(1-x)^alpha (1+x)^beta (1-y)^gamma (1+y)^delta`` on ``[-1, 1]^2``.
``jacobi-triangle``
    ``x^a y^b (1-x-y)^c`` on the simplex ``x, y >= 0, x + y <= 1``.

At time ``t`` the weight is ``exp(-(x+y) t) w(x, y) / kappa(t)`` where ``w``
is the base weight normalized to unit mass and ``kappa(t)`` restores unit
mass.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Mapping

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

from .errors import AccuracyError, CapacityError, DomainError, ParameterError

SQUARE = "product-jacobi-square"
TRIANGLE = "jacobi-triangle"

PARAM_NAMES = {
    SQUARE: ("alpha", "beta", "gamma", "delta"),
    TRIANGLE: ("a", "b", "c"),
}

MAX_POINTS_PER_AXIS = 512
KAPPA_RTOL = 1e-13


@dataclass(frozen=True)
class WeightSpec:
    """A weight family with exponents and a Toda time ``t``.

    Missing exponents default to 0 (the uniform weight).
    """

    family: str
    params: Mapping[str, float] = field(default_factory=dict)
    t: float = 0.0

    def __post_init__(self):
        if self.family not in PARAM_NAMES:
            raise ParameterError(f"unknown weight family {self.family!r}", "weights")
        names = PARAM_NAMES[self.family]
        unknown = set(self.params) - set(names)
        if unknown:
            raise ParameterError(
                f"unknown parameters {sorted(unknown)} for {self.family}", "weights")
        full = {}
        for name in names:
            value = float(self.params.get(name, 0.0))
            if not math.isfinite(value) or value <= -1.0:
                raise ParameterError(
                    f"exponent {name}={value} must be > -1 for integrability", "weights")
            full[name] = value
        t = float(self.t)
        if not math.isfinite(t) or t < 0.0:
            raise ParameterError(f"time t={self.t} must be finite and >= 0", "weights")
        object.__setattr__(self, "params", full)
        object.__setattr__(self, "t", t)

    def __hash__(self):
        return hash((self.family, self.exponents, self.t))

    @property
    def exponents(self) -> tuple:
        return tuple(self.params[name] for name in PARAM_NAMES[self.family])

    @property
    def coordinate_bound(self) -> float:
        # max(|x|, |y|) over both supported domains
        return 1.0

    def with_time(self, t: float) -> "WeightSpec":
        return replace(self, t=t)

    def contains(self, x, y, closed=False):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.family == SQUARE:
            if closed:
                return (np.abs(x) <= 1) & (np.abs(y) <= 1)
            return (np.abs(x) < 1) & (np.abs(y) < 1)
        if closed:
            return (x >= 0) & (y >= 0) & (x + y <= 1)
        return (x > 0) & (y > 0) & (x + y < 1)

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params), "t": self.t}

    @classmethod
    def from_dict(cls, data: Mapping) -> "WeightSpec":
        if not isinstance(data, Mapping) or "family" not in data:
            raise ParameterError("weight spec must be an object with a 'family' key",
                                 "weights")
        return cls(data["family"], dict(data.get("params", {})), data.get("t", 0.0))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "WeightSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and weights integrating against the normalized weight at time ``t``.

    ``sum(weights * f(nodes))`` approximates ``int f(x, y) w_t(x, y) dx dy``, so
    the weights themselves sum to one.
    """

    nodes: np.ndarray
    weights: np.ndarray
    order: int
    t: float = 0.0
    points_per_axis: int = 0

    @property
    def x(self):
        return self.nodes[:, 0]

    @property
    def y(self):
        return self.nodes[:, 1]

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def _base_log_mass(family, exponents):
    """Log of the integral of the unnormalized base weight over its domain."""
    if family == SQUARE:
        al, be, ga, de = exponents
        return ((al + be + 1) * math.log(2.0) + _log_beta(al + 1, be + 1)
                + (ga + de + 1) * math.log(2.0) + _log_beta(ga + 1, de + 1))
    a, b, c = exponents
    return gammaln(a + 1) + gammaln(b + 1) + gammaln(c + 1) - gammaln(a + b + c + 3)


def _log_beta(p, q):
    return gammaln(p) + gammaln(q) - gammaln(p + q)


def gauss_jacobi(n, alpha, beta):
    """Nodes and unit-mass weights for ``(1-x)^alpha (1+x)^beta`` on ``[-1, 1]``.

    Golub-Welsch on the Jacobi recurrence.  ``scipy.special.roots_jacobi``
    drifts by ~1e-13 at a few hundred points when an exponent is negative,
    which defeats the escalation test below.
    """
    k = np.arange(n, dtype=float)
    s = 2 * k + alpha + beta
    diag = np.empty(n)
    diag[0] = (beta - alpha) / (alpha + beta + 2)
    diag[1:] = (beta ** 2 - alpha ** 2) / (s[1:] * (s[1:] + 2))
    kk, s1 = k[1:], s[1:]
    off2 = 4 * kk * (kk + alpha) * (kk + beta) / (s1 ** 2 * (s1 + 1))
    ratio = np.ones_like(kk)
    # (k + alpha + beta) / (s - 1) is 1 at k = 1, where both may vanish
    ratio[1:] = (kk[1:] + alpha + beta) / (s1[1:] - 1)
    off = np.sqrt(off2 * ratio)
    if n == 1:
        return diag.copy(), np.ones(1)
    x, V = eigh_tridiagonal(diag, off)
    w = V[0] ** 2
    return x, w / w.sum()


@lru_cache(maxsize=64)
def _base_rule(family, exponents, n):
    """Tensor Gauss-Jacobi rule with ``n`` points per axis, weights summing to 1."""
    if family == SQUARE:
        al, be, ga, de = exponents
        xs, wx = gauss_jacobi(n, al, be)
        ys, wy = gauss_jacobi(n, ga, de)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        W = np.outer(wx, wy)
    else:
        a, b, c = exponents
        # Duffy collapse: x = s, y = (1-s) r, dx dy = (1-s) ds dr turns the
        # simplex weight into s^a (1-s)^(b+c+1) r^b (1-r)^c on the unit square
        xi, wxi = gauss_jacobi(n, b + c + 1, a)
        eta, weta = gauss_jacobi(n, c, b)
        s = (1 + xi) / 2
        r = (1 + eta) / 2
        S, R = np.meshgrid(s, r, indexing="ij")
        X = S
        Y = (1 - S) * R
        W = np.outer(wxi, weta)
    W = W / W.sum()
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    return nodes, W.ravel()


def _check_points(n):
    if n > MAX_POINTS_PER_AXIS:
        raise CapacityError(
            f"rule needs {n} points per axis, maximum is {MAX_POINTS_PER_AXIS}", "weights")


def _deformed(spec, exactness):
    """Escalate the base rule until the 0,0-moment of the deformed weight settles.

    Returns ``(nodes, raw_weights, kappa, n)`` where ``raw_weights`` carry the
    exponential factor but are not yet divided by ``kappa``.
    """
    if exactness < 0:
        raise ParameterError("exactness must be >= 0", "weights")
    n = int(exactness) + 10
    _check_points(n)
    nodes, w = _base_rule(spec.family, spec.exponents, n)
    # t = 0 goes through the same escalation so the node set does not jump
    # between t = 0 and small t > 0 (finite differences straddle that point)
    raw = w * np.exp(-(nodes[:, 0] + nodes[:, 1]) * spec.t)
    kappa = raw.sum()
    while True:
        n2 = min(2 * n, MAX_POINTS_PER_AXIS)
        if n2 == n:
            raise AccuracyError(
                f"kappa({spec.t}) did not settle to {KAPPA_RTOL:g} within "
                f"{MAX_POINTS_PER_AXIS} points per axis", "weights")
        nodes2, w2 = _base_rule(spec.family, spec.exponents, n2)
        raw2 = w2 * np.exp(-(nodes2[:, 0] + nodes2[:, 1]) * spec.t)
        kappa2 = raw2.sum()
        settled = abs(kappa2 - kappa) <= KAPPA_RTOL * abs(kappa2)
        nodes, raw, kappa, n = nodes2, raw2, kappa2, n2
        if settled:
            return nodes, raw, kappa, n


def build_quadrature(spec: WeightSpec, exactness: int) -> QuadratureRule:
    """Quadrature against the normalized weight of ``spec`` at its time ``t``.

    Exact (up to rounding) for polynomials of total degree ``<= exactness`` at
    ``t = 0``; for ``t > 0`` the exponential factor is folded into the weights.
    """
    nodes, raw, kappa, n = _deformed(spec, exactness)
    return QuadratureRule(nodes=nodes, weights=raw / kappa, order=int(exactness),
                          t=spec.t, points_per_axis=n)


@lru_cache(maxsize=256)
def normalization(spec: WeightSpec) -> float:
    """``kappa(t)``: mass of ``exp(-(x+y) t)`` times the normalized base weight."""
    if spec.t == 0.0:
        return 1.0
    return float(_deformed(spec, 0)[2])


def evaluate_weight(spec: WeightSpec, x, y):
    """Pointwise value of the normalized, deformed weight density.

    Accepts scalars or arrays; points must lie in the open domain.
    """
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if not np.all(spec.contains(xa, ya)):
        raise DomainError(f"point(s) outside the open {spec.family} domain", "weights")
    if spec.family == SQUARE:
        al, be, ga, de = spec.exponents
        log_w = (al * np.log1p(-xa) + be * np.log1p(xa)
                 + ga * np.log1p(-ya) + de * np.log1p(ya))
    else:
        a, b, c = spec.exponents
        log_w = a * np.log(xa) + b * np.log(ya) + c * np.log1p(-(xa + ya))
    log_w = log_w - _base_log_mass(spec.family, spec.exponents)
    value = np.exp(log_w - (xa + ya) * spec.t) / normalization(spec)
    return float(value) if value.ndim == 0 else value
