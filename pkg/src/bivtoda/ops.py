"""Monic bivariate orthogonal polynomial systems and their three-term data.

Polynomials of total degree ``<= n`` are stored as coefficient rows in the
graded monomial basis ``X_0, X_1, ..., X_n`` where ``X_m`` lists
``x^m, x^(m-1) y, ..., y^m``.  A vector polynomial of level ``n`` is an
``(n+1) x T(n)`` array with ``T(n) = (n+1)(n+2)/2``; its trailing
``(n+1) x (n+1)`` block is the identity for monic systems.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigh, svd

from .errors import DegeneracyError, ParameterError, StructuralError
from .moments import MomentTable, compute_moments
from .weights import QuadratureRule, WeightSpec, build_quadrature

SPD_FLOOR = 1e-12
RANK_RTOL = 1e-10

# node-based construction runs in x87 extended precision where the platform
# has it; level-8 triangle data loses ~3 digits in plain binary64
EXT = np.longdouble


def n_monomials(n: int) -> int:
    """T(n): number of monomials of total degree <= n."""
    return (n + 1) * (n + 2) // 2 if n >= 0 else 0


def level_offset(m: int) -> int:
    return m * (m + 1) // 2


def monomial_exponents(n: int):
    return [(m - j, j) for m in range(n + 1) for j in range(m + 1)]


def monomials(x, y, n):
    """Values of the graded monomial basis, shape ``(T(n),) + shape(x)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.stack([x ** a * y ** b for a, b in monomial_exponents(n)])


@dataclass(frozen=True)
class ShiftMatrices:
    n: int
    L1: np.ndarray
    L2: np.ndarray


def shift_matrices(n: int) -> ShiftMatrices:
    """0/1 matrices with ``L1 X_{n+1} = x X_n`` and ``L2 X_{n+1} = y X_n``."""
    if n < 0:
        raise ParameterError("level must be >= 0", "ops")
    eye = np.eye(n + 1)
    zero = np.zeros((n + 1, 1))
    return ShiftMatrices(n, np.hstack([eye, zero]), np.hstack([zero, eye]))


def shift(n: int, i: int) -> np.ndarray:
    """``L_{n,i}``; an empty ``(0, 0)`` array for ``n = -1``."""
    if n < 0:
        return np.zeros((0, 0))
    s = shift_matrices(n)
    return s.L1 if i == 1 else s.L2


def _pad(coef, width):
    out = np.zeros((coef.shape[0], width), dtype=coef.dtype)
    out[:, :coef.shape[1]] = coef
    return out


def _multiply(coef, n, i):
    """Coefficients of ``x * p`` (i=1) or ``y * p`` (i=2) for rows of degree <= n."""
    out = np.zeros((coef.shape[0], n_monomials(n + 1)), dtype=coef.dtype)
    for m in range(n + 1):
        src = level_offset(m)
        dst = level_offset(m + 1) + (i - 1)
        out[:, dst:dst + m + 1] = coef[:, src:src + m + 1]
    return out


@dataclass(frozen=True, eq=False)
class VectorPolynomial:
    """Monic vector polynomial ``P_n = sum_m G^n_m X_m``."""

    level: int
    coef: np.ndarray

    def block(self, m: int) -> np.ndarray:
        """The coefficient matrix ``G^n_m`` of shape ``(n+1, m+1)``."""
        start = level_offset(m)
        return self.coef[:, start:start + m + 1]

    def __call__(self, x, y):
        return self.coef @ monomials(x, y, self.level)


def evaluate_vpoly(p: VectorPolynomial, x, y):
    return p(x, y)


@dataclass(frozen=True, eq=False)
class OpsSet:
    """Levels ``0..N`` of a monic OPS and their Gram blocks ``H_n``.

    Built either from a moment table (inner products by contraction) or on
    quadrature nodes, in which case ``values[n]`` holds ``P_n`` at the nodes.
    """

    N: int
    polys: list
    H: list
    moments: Optional[MomentTable] = None
    rule: Optional[QuadratureRule] = None
    values: Optional[list] = None
    spec: Optional[WeightSpec] = None
    H_ext: Optional[list] = field(default=None, repr=False)
    _gram: Optional[np.ndarray] = field(default=None, repr=False)

    def inner(self, n, m, mult=0):
        """``<x_mult P_n, P_m^T>`` with ``mult`` 0 (none), 1 (x) or 2 (y)."""
        if self.values is not None:
            left = self.values[n]
            if mult:
                left = left * (self.rule.x if mult == 1 else self.rule.y).astype(EXT)
            return (left * self.rule.weights.astype(EXT)) @ self.values[m].T
        a = self.polys[n].coef
        if mult:
            a = _multiply(a, n, mult)
        b = self.polys[m].coef
        g = self.gram_matrix(max(a.shape[1], b.shape[1]))
        return a @ g[:a.shape[1], :b.shape[1]] @ b.T

    def gram_matrix(self, size=None):
        """Monomial Gram matrix ``omega[a+c, b+d]`` from the moment table."""
        if self.moments is None:
            raise ParameterError("no moment table attached", "ops")
        return _monomial_gram(self.moments, size)


def _monomial_gram(moments, size=None):
    deg = moments.max_degree // 2
    exps = monomial_exponents(deg)
    if size is not None:
        if size > len(exps):
            raise ParameterError("moment table too short for requested products", "ops")
        exps = exps[:size]
    a = np.array([e[0] for e in exps])
    b = np.array([e[1] for e in exps])
    return moments.values[a[:, None] + a[None, :], b[:, None] + b[None, :]]


def _right_solve(X, H):
    """``X @ inv(H)`` for a small SPD ``H`` in the dtype of the inputs.

    LAPACK has no extended-precision routines, so this is a plain Cholesky.
    """
    n = H.shape[0]
    L = np.zeros_like(H)
    for j in range(n):
        d = H[j, j] - L[j, :j] @ L[j, :j]
        L[j, j] = np.sqrt(d)
        for i in range(j + 1, n):
            L[i, j] = (H[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
    # solve H Z = X^T with H = L L^T
    Z = np.array(X.T, dtype=np.result_type(X, H), copy=True)
    for i in range(n):
        Z[i] = (Z[i] - L[i, :i] @ Z[:i]) / L[i, i]
    for i in range(n - 1, -1, -1):
        Z[i] = (Z[i] - L[i + 1:, i] @ Z[i + 1:]) / L[i, i]
    return Z.T


def _check_spd(H, n):
    lam = np.linalg.eigvalsh(H)
    if not lam[0] > SPD_FLOOR * lam[-1]:
        raise DegeneracyError(
            f"H_{n} is numerically singular (eigenvalues {lam[0]:.3e}..{lam[-1]:.3e})",
            "ops")


def build_ops(source, N: int) -> OpsSet:
    """Monic OPS through level ``N``.

    ``source`` is a :class:`MomentTable` (Gram-Schmidt against the table) or a
    :class:`WeightSpec` / :class:`QuadratureRule` (orthogonalization on the
    quadrature nodes, which stays accurate where the moment map is
    ill-conditioned).
    """
    if N < 0:
        raise ParameterError("N must be >= 0", "ops")
    if isinstance(source, MomentTable):
        return _build_from_moments(source, N)
    if isinstance(source, WeightSpec):
        rule = build_quadrature(source, 2 * N + 2)
        moments = compute_moments(source, 2 * N + 2)
        return _build_on_nodes(rule, N, moments, source)
    if isinstance(source, QuadratureRule):
        if source.order < 2 * N + 1:
            raise ParameterError(
                f"rule exactness {source.order} < {2 * N + 1} needed for level {N}", "ops")
        return _build_on_nodes(source, N, None, None)
    raise ParameterError(f"cannot build an OPS from {type(source).__name__}", "ops")


def _build_from_moments(moments, N):
    if moments.max_degree < 2 * N + 2:
        raise ParameterError(
            f"insufficient moment degree: need {2 * N + 2}, have {moments.max_degree}",
            "ops")
    gram = _monomial_gram(moments, n_monomials(N + 1))
    polys, H, factors = [], [], []
    for n in range(N + 1):
        width = n_monomials(n)
        coef = np.zeros((n + 1, width))
        coef[:, level_offset(n):] = np.eye(n + 1)
        top = coef.copy()
        for m in range(n):
            cm = polys[m].coef
            proj = top @ gram[:width, :cm.shape[1]] @ cm.T
            coef[:, :cm.shape[1]] -= cho_solve(factors[m], proj.T).T @ cm
        Hn = coef @ gram[:width, :width] @ coef.T
        Hn = (Hn + Hn.T) / 2
        _check_spd(Hn, n)
        coef[:, level_offset(n):] = np.eye(n + 1)
        polys.append(VectorPolynomial(n, coef))
        H.append(Hn)
        factors.append(cho_factor(Hn))
    return OpsSet(N, polys, H, moments=moments, _gram=gram)


def _build_on_nodes(rule, N, moments, spec):
    x = rule.x.astype(EXT)
    y = rule.y.astype(EXT)
    w = rule.weights.astype(EXT)
    vals = [np.ones((1, x.size), dtype=EXT)]
    coefs = [np.ones((1, 1), dtype=EXT)]
    H = []
    for n in range(N + 1):
        Pn = vals[n]
        Hn = (Pn * w) @ Pn.T
        Hn = (Hn + Hn.T) / 2
        _check_spd(Hn.astype(float), n)
        H.append(Hn)
        if n == N:
            break
        width = n_monomials(n + 1)
        rows_v, rows_c = [], []
        for i, xi in ((1, x), (2, y)):
            XP = Pn * xi
            D = _right_solve((XP * w) @ Pn.T, Hn)
            rv = XP - D @ Pn
            rc = _multiply(coefs[n], n, i) - D @ _pad(coefs[n], width)
            if n >= 1:
                C = _right_solve(Hn @ shift(n - 1, i).T.astype(EXT), H[n - 1])
                rv -= C @ vals[n - 1]
                rc -= C @ _pad(coefs[n - 1], width)
            rows_v.append(rv)
            rows_c.append(rc)
        # L_{n,1} picks the first n+1 entries of P_{n+1}, L_{n,2} the last n+1
        new_v = np.vstack([rows_v[0], rows_v[1][-1:]])
        new_c = np.vstack([rows_c[0], rows_c[1][-1:]])
        for m in range(n + 1):
            proj = _right_solve((new_v * w) @ vals[m].T, H[m])
            new_v -= proj @ vals[m]
            new_c -= proj @ _pad(coefs[m], width)
        new_c[:, level_offset(n + 1):] = np.eye(n + 2)
        vals.append(new_v)
        coefs.append(new_c)
    polys = [VectorPolynomial(n, c.astype(float)) for n, c in enumerate(coefs)]
    return OpsSet(N, polys, [h.astype(float) for h in H], moments=moments, rule=rule,
                  values=vals, spec=spec, H_ext=H)


@dataclass(frozen=True, eq=False)
class RecurrenceSet:
    """Three-term coefficients ``D_{n,i}`` (levels 0..N) and ``C_{n,i}`` (1..N).

    ``C1[0]`` and ``C2[0]`` are empty ``(1, 0)`` arrays so that products with
    the non-existent level ``-1`` vanish naturally.
    """

    N: int
    D1: list
    D2: list
    C1: list
    C2: list

    def Dn(self, n, i):
        return self.D1[n] if i == 1 else self.D2[n]

    def Cn(self, n, i):
        return self.C1[n] if i == 1 else self.C2[n]

    def D(self, n):
        return self.D1[n] + self.D2[n]

    def C(self, n):
        return self.C1[n] + self.C2[n]

    @staticmethod
    def L(n, i=None):
        if i is None:
            return shift(n, 1) + shift(n, 2)
        return shift(n, i)

    def truncated(self, N):
        if N > self.N:
            raise ParameterError(f"recurrence only reaches level {self.N}", "ops")
        return RecurrenceSet(N, self.D1[:N + 1], self.D2[:N + 1],
                             self.C1[:N + 1], self.C2[:N + 1])

    def to_dict(self):
        return {
            "N": self.N,
            "D1": [d.tolist() for d in self.D1],
            "D2": [d.tolist() for d in self.D2],
            "C1": [c.tolist() for c in self.C1],
            "C2": [c.tolist() for c in self.C2],
        }


def recurrence_from_ops(ops: OpsSet) -> RecurrenceSet:
    """``D_{n,i} = <x_i P_n, P_n^T> H_n^{-1}`` and ``C_{n,i} = H_n L_{n-1,i}^T H_{n-1}^{-1}``."""
    H = ops.H_ext if ops.H_ext is not None else ops.H
    D1, D2, C1, C2 = [], [], [], []
    for n in range(ops.N + 1):
        for i, Dl, Cl in ((1, D1, C1), (2, D2, C2)):
            Dl.append(_right_solve(ops.inner(n, n, i), H[n]).astype(float))
            if n == 0:
                Cl.append(np.zeros((1, 0)))
            else:
                L = shift(n - 1, i).T.astype(H[n].dtype)
                Cl.append(_right_solve(H[n] @ L, H[n - 1]).astype(float))
    return RecurrenceSet(ops.N, D1, D2, C1, C2)


def gram_from_recurrence(rec: RecurrenceSet) -> list:
    """Recover ``H_0..H_N`` from the C blocks using ``C_{n,i} H_{n-1} = H_n L_{n-1,i}^T``.

    ``L_{n-1,1}^T`` selects the first ``n`` columns of ``H_n`` and
    ``L_{n-1,2}^T`` the last ``n``; together they cover all of it.
    """
    H = [np.ones((1, 1))]
    for n in range(1, rec.N + 1):
        Hn = np.empty((n + 1, n + 1))
        Hn[:, 1:] = rec.C2[n] @ H[n - 1]
        Hn[:, :n] = rec.C1[n] @ H[n - 1]
        H.append((Hn + Hn.T) / 2)
    return H


def sqrtm_spd(H):
    """Unique SPD square root of ``H`` and its inverse."""
    lam, V = eigh(H)
    if not lam[0] > SPD_FLOOR * lam[-1]:
        raise DegeneracyError("matrix is not numerically positive definite", "ops")
    r = np.sqrt(lam)
    return (V * r) @ V.T, (V / r) @ V.T


@dataclass(frozen=True, eq=False)
class OrthonormalSet:
    N: int
    A1: list
    A2: list
    B1: list
    B2: list
    Hsqrt: list
    Hinvsqrt: list

    def An(self, n, i):
        return self.A1[n] if i == 1 else self.A2[n]

    def Bn(self, n, i):
        return self.B1[n] if i == 1 else self.B2[n]


def orthonormalize(ops, rec: RecurrenceSet) -> OrthonormalSet:
    """``A_{n,i} = H_n^{-1/2} L_{n,i} H_{n+1}^{1/2}``, ``B_{n,i} = H_n^{-1/2} D_{n,i} H_n^{1/2}``.

    ``ops`` may be an :class:`OpsSet` or a plain list of Gram blocks.
    """
    H = ops.H if isinstance(ops, OpsSet) else list(ops)
    roots = [sqrtm_spd(h) for h in H[:rec.N + 1]]
    sq = [r[0] for r in roots]
    isq = [r[1] for r in roots]
    A1, A2, B1, B2 = [], [], [], []
    for n in range(rec.N + 1):
        B1.append(isq[n] @ rec.D1[n] @ sq[n])
        B2.append(isq[n] @ rec.D2[n] @ sq[n])
        if n < rec.N:
            A1.append(isq[n] @ shift(n, 1) @ sq[n + 1])
            A2.append(isq[n] @ shift(n, 2) @ sq[n + 1])
    return OrthonormalSet(rec.N, A1, A2, B1, B2, sq, isq)


def orthogonality_residual(ops: OpsSet) -> float:
    """Max of ``|<p, q>| / (|p| |q|)`` over distinct-level pairs and of the same for ``<P_n, P_n^T> - H_n``.

    Inner products come from the quadrature nodes when the set was built on
    them (monomial contraction loses ~``cond(Gram) * eps`` on the triangle),
    otherwise from moment contraction; norms from the ``H_n`` diagonals.
    """
    if ops.values is None and (ops.moments is None or ops.moments.max_degree < 2 * ops.N):
        raise ParameterError("orthogonality check needs moments to degree 2N", "ops")
    gram = None if ops.values is not None else _monomial_gram(ops.moments, n_monomials(ops.N))
    norms = [np.sqrt(np.diag(h).astype(float)) for h in ops.H]
    worst = 0.0
    for n in range(ops.N + 1):
        a = ops.polys[n].coef
        for m in range(n + 1):
            b = ops.polys[m].coef
            if gram is None:
                val = ops.inner(n, m)
            else:
                val = a @ gram[:a.shape[1], :b.shape[1]] @ b.T
            target = ops.H[n] if m == n else 0.0
            scale = np.outer(norms[n], norms[m])
            worst = max(worst, float(np.max(np.abs(val - target) / scale)))
    return worst


def three_term_residual(ops: OpsSet, rec: RecurrenceSet) -> float:
    """Coefficient-level residual of ``x_i P_n - L_{n,i} P_{n+1} - D_{n,i} P_n - C_{n,i} P_{n-1}``."""
    worst = 0.0
    for n in range(min(ops.N, rec.N + 1)):
        width = n_monomials(n + 1)
        for i in (1, 2):
            terms = [_multiply(ops.polys[n].coef, n, i),
                     shift(n, i) @ ops.polys[n + 1].coef,
                     rec.Dn(n, i) @ _pad(ops.polys[n].coef, width)]
            if n >= 1:
                terms.append(rec.Cn(n, i) @ _pad(ops.polys[n - 1].coef, width))
            resid = terms[0] - sum(terms[1:])
            scale = max(float(np.max(np.abs(t))) for t in terms)
            worst = max(worst, float(np.max(np.abs(resid))) / scale)
    return worst


def rank_certificates(rec: RecurrenceSet) -> dict:
    """Singular values and numerical ranks of ``C_{n,i}`` and ``[C_{n,1} C_{n,2}]``.

    Raises :class:`StructuralError` at the first level where
    ``rank C_{n,i} != n`` or the joint rank is not ``n + 1``.
    """
    levels = []
    for n in range(rec.N + 1):
        entry = {"n": n}
        if n == 0:
            entry.update(sv_C1=[], sv_C2=[], sv_joint=[], rank_C1=0, rank_C2=0,
                         rank_joint=0)
            levels.append(entry)
            continue
        joint = np.hstack([rec.C1[n], rec.C2[n]])
        for name, mat, want in (("C1", rec.C1[n], n), ("C2", rec.C2[n], n),
                                ("joint", joint, n + 1)):
            sv = svd(mat, compute_uv=False)
            rank = int(np.sum(sv > RANK_RTOL * sv[0])) if sv.size and sv[0] > 0 else 0
            entry[f"sv_{name}"] = sv.tolist()
            entry[f"rank_{name}"] = rank
            if rank != want:
                raise StructuralError(
                    f"level {n}: rank of {name} is {rank}, expected {want}", "ops")
        levels.append(entry)
    return {"threshold": RANK_RTOL, "levels": levels, "passed": True}


def export_dict(ops: OpsSet, rec: RecurrenceSet) -> dict:
    """JSON-ready document with ``N, H, D1, D2, C1, C2, G`` (row-major lists)."""
    out = {"N": ops.N, "H": [h.tolist() for h in ops.H]}
    out.update({k: v for k, v in rec.to_dict().items() if k != "N"})
    out["G"] = [p.coef.tolist() for p in ops.polys]
    return out
