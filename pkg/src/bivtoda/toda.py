"""The 2D Toda flow on the three-term coefficients.

Ground truth is the *exact path*: deform the weight to time ``t``, rebuild
the OPS and read off ``D_{n,i}(t)``, ``C_{n,i}(t)``.  Everything else
(right-hand sides, the Lax commutator, RK4 integration, the ``dP/dt``
identity, spectral drift) is checked against it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import BoundaryError, DivergenceError, ParameterError
from .jacobi import assemble, spectrum
from .moments import time_derivative
from .ops import (
    OpsSet,
    RecurrenceSet,
    build_ops,
    gram_from_recurrence,
    level_offset,
    n_monomials,
    orthonormalize,
    recurrence_from_ops,
    shift,
)
from .weights import WeightSpec

EXACT_PATH = "exact-path"
INTEGRATED = "integrated"

DEFAULT_FD_STEP = 1e-5
DEFAULT_DT = 1e-3
# beyond the top level (wrong from the first step under the closure), one
# more boundary level is given up per this much integrated time
DEFAULT_HORIZON = 0.125
DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True, eq=False)
class TodaState:
    t: float
    rec: RecurrenceSet
    D0_scalar: float
    provenance: str
    ops: Optional[OpsSet] = field(default=None, repr=False)
    interior: Optional[int] = None

    @property
    def N(self):
        return self.rec.N

    @property
    def H(self):
        if self.ops is not None:
            return self.ops.H
        return gram_from_recurrence(self.rec)

    def summary(self) -> dict:
        return {"t": self.t, "D01": float(self.rec.D1[0][0, 0]),
                "D0": self.D0_scalar, "provenance": self.provenance}


@lru_cache(maxsize=256)
def _exact_ops(spec: WeightSpec, N: int) -> OpsSet:
    return build_ops(spec, N)


def exact_state(spec: WeightSpec, t: float, N: int) -> TodaState:
    """Recurrence data of the weight deformed to time ``t``."""
    if t < 0:
        raise ParameterError(f"t={t} must be >= 0", "toda")
    ops = _exact_ops(spec.with_time(t), N)
    rec = recurrence_from_ops(ops)
    d0 = ops.moments[1, 0] + ops.moments[0, 1]
    return TodaState(float(t), rec, float(d0), EXACT_PATH, ops=ops, interior=N)


class TodaDerivative:
    """Time derivatives of the coefficient blocks.

    ``D(n, i)`` exists for ``n <= top`` and ``C(n, i)`` for ``1 <= n <= N``;
    ``top`` is ``N - 1`` unless the truncated closure was requested.
    """

    def __init__(self, N, top, D1, D2, C1, C2):
        self.N, self.top = N, top
        self.D1, self.D2, self.C1, self.C2 = D1, D2, C1, C2

    def D(self, n, i):
        if not 0 <= n <= self.top:
            raise BoundaryError(
                f"dD_{n} needs C_{n + 1}, outside the truncation N={self.N}", "toda")
        return self.D1[n] if i == 1 else self.D2[n]

    def C(self, n, i):
        if not 1 <= n <= self.N:
            raise BoundaryError(f"dC_{n} is not defined for N={self.N}", "toda")
        return self.C1[n] if i == 1 else self.C2[n]


def _d_rhs(rec, n, i, closure):
    L = shift
    if n == rec.N:
        # truncated closure: C_{N+1} = 0
        return rec.C(n) @ L(n - 1, i) if n >= 1 else np.zeros((1, 1))
    out = -L(n, i) @ rec.C(n + 1)
    if n >= 1:
        out = out + rec.C(n) @ L(n - 1, i)
    return out


def toda_rhs(state, closure: bool = False) -> TodaDerivative:
    """``dD_{n,i} = C_n L_{n-1,i} - L_{n,i} C_{n+1}``, ``dC_{n,i} = C_n D_{n-1,i} - D_{n,i} C_n``.

    With ``C_0 = 0`` the level-0 equation is ``dD_{0,i} = -L_{0,i} C_1``.  The
    top level's D-equation needs ``C_{N+1}``; it is only produced when
    ``closure`` is set, in which case ``C_{N+1}`` is taken to be zero.
    """
    rec = state.rec if isinstance(state, TodaState) else state
    top = rec.N if closure else rec.N - 1
    dD = {1: [], 2: []}
    dC = {1: [np.zeros((1, 0))], 2: [np.zeros((1, 0))]}
    for i in (1, 2):
        for n in range(top + 1):
            dD[i].append(_d_rhs(rec, n, i, closure))
        for n in range(1, rec.N + 1):
            dC[i].append(rec.C(n) @ rec.Dn(n - 1, i) - rec.Dn(n, i) @ rec.C(n))
    return TodaDerivative(rec.N, top, dD[1], dD[2], dC[1], dC[2])


def alt_toda_rhs(state, closure: bool = False) -> TodaDerivative:
    """Same D-equation; ``dC_{n,i} = C_{n,i} D_{n-1} - D_n C_{n,i}``."""
    rec = state.rec if isinstance(state, TodaState) else state
    base = toda_rhs(rec, closure)
    dC = {1: [np.zeros((1, 0))], 2: [np.zeros((1, 0))]}
    for i in (1, 2):
        for n in range(1, rec.N + 1):
            dC[i].append(rec.Cn(n, i) @ rec.D(n - 1) - rec.D(n) @ rec.Cn(n, i))
    return TodaDerivative(rec.N, base.top, base.D1, base.D2, dC[1], dC[2])


def rhs_difference(a: TodaDerivative, b: TodaDerivative) -> float:
    worst = 0.0
    for n in range(a.top + 1):
        for i in (1, 2):
            worst = max(worst, float(np.max(np.abs(a.D(n, i) - b.D(n, i)))))
    for n in range(1, a.N + 1):
        for i in (1, 2):
            worst = max(worst, float(np.max(np.abs(a.C(n, i) - b.C(n, i)))))
    return worst


def lower_shift(rec: RecurrenceSet, N: int | None = None) -> np.ndarray:
    """Truncated ``A``: block subdiagonal ``C_n = C_{n,1} + C_{n,2}``, zero elsewhere."""
    N = rec.N if N is None else N
    A = np.zeros((n_monomials(N),) * 2)
    for n in range(1, N + 1):
        A[level_offset(n):level_offset(n + 1), level_offset(n - 1):level_offset(n)] = rec.C(n)
    return A


def _pack(rec: RecurrenceSet) -> np.ndarray:
    parts = [b.ravel() for b in rec.D1 + rec.D2 + rec.C1[1:] + rec.C2[1:]]
    return np.concatenate(parts)


def _unpack(vec: np.ndarray, N: int) -> RecurrenceSet:
    pos = 0

    def take(shape):
        nonlocal pos
        size = shape[0] * shape[1]
        out = vec[pos:pos + size].reshape(shape)
        pos += size
        return out

    D1 = [take((n + 1, n + 1)) for n in range(N + 1)]
    D2 = [take((n + 1, n + 1)) for n in range(N + 1)]
    C1 = [np.zeros((1, 0))] + [take((n + 1, n)) for n in range(1, N + 1)]
    C2 = [np.zeros((1, 0))] + [take((n + 1, n)) for n in range(1, N + 1)]
    return RecurrenceSet(N, D1, D2, C1, C2)


def _pack_derivative(d: TodaDerivative) -> np.ndarray:
    return np.concatenate([b.ravel() for b in d.D1 + d.D2 + d.C1[1:] + d.C2[1:]])


def fd_coefficients(spec: WeightSpec, t: float, N: int,
                    fd_step: float = DEFAULT_FD_STEP) -> RecurrenceSet:
    """Finite-difference time derivatives of all exact-path blocks at ``t``."""
    vec = time_derivative(lambda s: _pack(exact_state(spec, s, N).rec), t, fd_step)
    return _unpack(vec, N)


def toda_fd_residual(spec: WeightSpec, t: float, N: int,
                     fd_step: float = DEFAULT_FD_STEP) -> float:
    """Max gap between exact-path derivatives and the Toda right-hand side.

    Compares ``D`` on levels ``0..N-1`` and ``C`` on ``1..N`` (every block whose
    right-hand side exists inside the truncation).
    """
    dot = fd_coefficients(spec, t, N, fd_step)
    rhs = toda_rhs(exact_state(spec, t, N))
    worst = 0.0
    for i in (1, 2):
        for n in range(N):
            worst = max(worst, float(np.max(np.abs(dot.Dn(n, i) - rhs.D(n, i)))))
        for n in range(1, N + 1):
            worst = max(worst, float(np.max(np.abs(dot.Cn(n, i) - rhs.C(n, i)))))
    return worst


def lax_residual(state: TodaState, i: int, fd_step: float, spec: WeightSpec) -> float:
    """Interior-row residual of ``dJ_i/dt - (A J_i - J_i A)`` along the exact path.

    Block rows ``0..N-2`` only; the finite-difference derivative is taken on
    the exact deformation path of ``spec`` around ``state.t``.
    """
    N = state.N
    if N < 2:
        return 0.0

    def J(s):
        return assemble(exact_state(spec, s, N).rec, i).matrix

    Jdot = time_derivative(J, state.t, fd_step)
    Jt = assemble(state.rec, i).matrix
    A = lower_shift(state.rec)
    resid = Jdot - (A @ Jt - Jt @ A)
    return float(np.max(np.abs(resid[:level_offset(N - 1)])))


def interior_levels(N: int, elapsed: float, horizon: float = DEFAULT_HORIZON) -> int:
    """Highest level still trusted after integrating for ``elapsed`` time."""
    return N - 1 - math.ceil(elapsed / horizon - 1e-12) if elapsed > 0 else N


def integrate_toda(initial: TodaState, t_end: float, dt: float = DEFAULT_DT,
                   horizon: float = DEFAULT_HORIZON, callback=None) -> TodaState:
    """Classical RK4 for the coefficient ODEs from ``initial.t`` to ``t_end``.

    The finite system is closed by ``C_{N+1} = 0`` (the truncated Lax pair).
    Level ``N`` is wrong immediately and the error creeps down one further
    level per ``horizon`` of elapsed time; the
    returned state's ``interior`` is the highest level unaffected at the
    ``1e-6`` scale.  ``callback(state)`` is invoked after every step.
    """
    if not dt > 0 or not math.isfinite(dt):
        raise ParameterError(f"dt must be > 0, got {dt}", "toda")
    elapsed = t_end - initial.t
    if elapsed < 0:
        raise ParameterError("t_end precedes the initial time", "toda")
    if elapsed == 0:
        return initial
    N = initial.N
    interior = interior_levels(N, elapsed, horizon)
    if interior < 0:
        raise ParameterError(
            f"N={N} too small to keep any interior level up to t={t_end}", "toda")

    def f(vec):
        return _pack_derivative(toda_rhs(_unpack(vec, N), closure=True))

    y = _pack(initial.rec)
    steps = max(1, math.ceil(elapsed / dt - 1e-9))
    h = elapsed / steps
    t = initial.t
    for step in range(steps):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = initial.t + (step + 1) * h
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > DIVERGENCE_LIMIT:
            raise DivergenceError(f"integration diverged at t={t:.6g}", "toda")
        if callback is not None:
            rec = _unpack(y.copy(), N)
            callback(TodaState(t, rec, float(np.trace(rec.D(0))), INTEGRATED,
                               interior=interior_levels(N, t - initial.t, horizon)))
    rec = _unpack(y, N)
    return TodaState(float(t_end), rec, float(np.trace(rec.D(0))), INTEGRATED,
                     interior=interior)


def state_difference(a: TodaState, b: TodaState, levels: int) -> float:
    """Max entrywise gap of ``D`` and ``C`` blocks on levels ``0..levels``."""
    worst = 0.0
    for n in range(levels + 1):
        for i in (1, 2):
            worst = max(worst, float(np.max(np.abs(a.rec.Dn(n, i) - b.rec.Dn(n, i)))))
            if n >= 1:
                worst = max(worst, float(np.max(np.abs(a.rec.Cn(n, i) - b.rec.Cn(n, i)))))
    return worst


def pdot_residual(spec: WeightSpec, t: float, N: int,
                  fd_step: float = DEFAULT_FD_STEP) -> float:
    """Coefficient-level residual of ``dP_n/dt = C_n P_{n-1}`` for ``1 <= n <= N``."""
    def coefs(s):
        ops = _exact_ops(spec.with_time(s), N)
        return np.concatenate([p.coef.ravel() for p in ops.polys])

    dot = time_derivative(coefs, t, fd_step)
    ops = _exact_ops(spec.with_time(t), N)
    rec = recurrence_from_ops(ops)
    worst = 0.0
    pos = 1
    for n in range(1, N + 1):
        shape = (n + 1, n_monomials(n))
        g_dot = dot[pos:pos + shape[0] * shape[1]].reshape(shape)
        pos += shape[0] * shape[1]
        lower = n_monomials(n - 1)
        resid = g_dot[:, :lower] - rec.C(n) @ ops.polys[n - 1].coef
        worst = max(worst, float(np.max(np.abs(resid))),
                    float(np.max(np.abs(g_dot[:, lower:]))))
    return worst


@dataclass
class DriftReport:
    i: int
    N: int
    times: list
    spectra: dict
    indices: np.ndarray
    drift: float
    drift_lower: Optional[float]
    full_drift: float


def _state_spectrum(state: TodaState, i: int, N: int) -> np.ndarray:
    rec = state.rec.truncated(N)
    orth = orthonormalize(state.H[:N + 1], rec)
    return spectrum(orth, i, N)


def _lower_half(lam0):
    count = len(lam0) // 2
    return np.sort(np.argsort(np.abs(lam0), kind="stable")[:count])


def _drift(spec, i, N, times):
    lam0 = _state_spectrum(exact_state(spec, 0.0, N), i, N)
    idx = _lower_half(lam0)
    spectra = {}
    drift = full = 0.0
    for t in times:
        lam = lam0 if t == 0 else _state_spectrum(exact_state(spec, t, N), i, N)
        spectra[t] = lam
        drift = max(drift, float(np.max(np.abs(lam[idx] - lam0[idx]), initial=0.0)))
        full = max(full, float(np.max(np.abs(lam - lam0))))
    return spectra, idx, drift, full


def isospectral_drift(spec: WeightSpec, i: int, N: int, times) -> DriftReport:
    """Time drift of the lower half (by magnitude at ``t = 0``) of the truncation spectrum.

    Also reports the same metric at level ``N - 2`` and the unrestricted drift,
    which stays finite because truncations are not isospectral.
    """
    times = [float(t) for t in times]
    if not times or min(times) < 0:
        raise ParameterError("times must be non-empty and >= 0", "toda")
    spectra, idx, drift, full = _drift(spec, i, N, times)
    lower = _drift(spec, i, N - 2, times)[2] if N >= 2 else None
    return DriftReport(i, N, times, spectra, idx, drift, lower, full)


def flow_record(state: TodaState, drift: float, lax: float) -> str:
    """One JSON line of a trajectory export."""
    return json.dumps({"t": state.t, "D01": float(state.rec.D1[0][0, 0]),
                       "drift": drift, "lax_residual": lax})


def lax_consistency(state: TodaState, i: int) -> float:
    """Interior-row gap between ``J_i`` assembled from the Toda right-hand side and ``[A, J_i]``.

    Needs no exact path, so it applies to integrated states too.
    """
    N = state.N
    if N < 2:
        return 0.0
    d = toda_rhs(state, closure=True)
    Jdot = np.zeros((n_monomials(N),) * 2)
    for n in range(N + 1):
        o, o1 = level_offset(n), level_offset(n + 1)
        Jdot[o:o1, o:o1] = d.D(n, i)
        if n >= 1:
            Jdot[o:o1, level_offset(n - 1):o] = d.C(n, i)
    J = assemble(state.rec, i).matrix
    A = lower_shift(state.rec)
    resid = Jdot - (A @ J - J @ A)
    return float(np.max(np.abs(resid[:level_offset(N - 1)])))
