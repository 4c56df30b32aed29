"""Truncated block Jacobi matrices, moment recovery, commutation checks, spectra."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse
from scipy.linalg import LinAlgError, eigh

from .errors import NumericalError, ParameterError, TruncationError
from .ops import OrthonormalSet, RecurrenceSet, level_offset, n_monomials, shift

MONIC = "monic"
ORTHONORMAL = "orthonormal"


@dataclass(frozen=True, eq=False)
class BlockTridiagonal:
    """Leading ``T(N) x T(N)`` block of ``J_i`` (monic) or its symmetric conjugate."""

    N: int
    kind: str
    i: int
    matrix: np.ndarray

    @property
    def offsets(self):
        return [level_offset(n) for n in range(self.N + 2)]

    def block(self, r, c):
        o = self.offsets
        return self.matrix[o[r]:o[r + 1], o[c]:o[c + 1]]

    def to_json(self) -> str:
        return json.dumps({"N": self.N, "kind": self.kind, "i": self.i,
                           "matrix": self.matrix.tolist()})

    def to_matrix_market(self, target):
        """Write coordinate Matrix Market to a path or binary file object."""
        scipy.io.mmwrite(target, scipy.sparse.coo_matrix(self.matrix),
                         comment=f"{self.kind} block Jacobi J_{self.i}, N={self.N}",
                         precision=17)


def assemble(source, i: int, N: int | None = None) -> BlockTridiagonal:
    """Principal truncation of the block Jacobi matrix in variable ``i`` at level ``N``.

    A :class:`RecurrenceSet` gives the monic ``J_i``; an
    :class:`OrthonormalSet` gives the symmetric ``L_i``.
    """
    if i not in (1, 2):
        raise ParameterError(f"variable index must be 1 or 2, got {i}", "jacobi")
    N = source.N if N is None else N
    if N < 0 or N > source.N:
        raise ParameterError(f"N={N} exceeds available levels 0..{source.N}", "jacobi")
    size = n_monomials(N)
    J = np.zeros((size, size))
    for n in range(N + 1):
        o, o1 = level_offset(n), level_offset(n + 1)
        if isinstance(source, RecurrenceSet):
            kind = MONIC
            J[o:o1, o:o1] = source.Dn(n, i)
            if n < N:
                J[o:o1, o1:level_offset(n + 2)] = shift(n, i)
            if n >= 1:
                J[o:o1, level_offset(n - 1):o] = source.Cn(n, i)
        elif isinstance(source, OrthonormalSet):
            kind = ORTHONORMAL
            J[o:o1, o:o1] = source.Bn(n, i)
            if n < N:
                A = source.An(n, i)
                J[o:o1, o1:level_offset(n + 2)] = A
                J[o1:level_offset(n + 2), o:o1] = A.T
        else:
            raise ParameterError(f"cannot assemble from {type(source).__name__}", "jacobi")
    return BlockTridiagonal(N, kind, i, J)


def corner_moment(J1: BlockTridiagonal, J2: BlockTridiagonal, h: int, k: int) -> float:
    """``e_0^T J_1^h J_2^k e_0`` on the truncation, which needs ``N >= h + k``."""
    N = min(J1.N, J2.N)
    if N < h + k:
        raise TruncationError(f"truncation N={N} < h+k={h + k}", "jacobi")
    v = np.zeros(J1.matrix.shape[0])
    v[0] = 1.0
    for _ in range(k):
        v = J2.matrix @ v
    for _ in range(h):
        v = J1.matrix @ v
    return float(v[0])


def _scaled(lhs_terms, rhs_terms, floor):
    lhs = sum(lhs_terms)
    rhs = sum(rhs_terms)
    scale = max([np.max(np.abs(t)) for t in lhs_terms + rhs_terms if t.size] + [floor])
    diff = lhs - rhs
    return float(np.max(np.abs(diff))) / scale if diff.size else 0.0


def commutation_residuals(rec: RecurrenceSet) -> dict:
    """Scaled residuals of the four identities implied by ``x y P_n = y x P_n``.

    Identities involving ``C_{n+1}`` or ``D_{n+1}`` are checked for
    ``n <= N - 1``; ``C_{0,i} = 0``.
    """
    D, C, L = rec.Dn, rec.Cn, rec.L
    # symmetric weights make whole products vanish; measure those against
    # the overall coefficient size instead of their own rounding noise
    size = max(float(np.max(np.abs(b))) for b in rec.D1 + rec.D2 + rec.C1[1:] + rec.C2[1:]
               if b.size)
    floor = max(size * size, 1e-300)
    out = {"CC": 0.0, "DC": 0.0, "LCDD": 0.0, "LD": 0.0}
    for n in range(rec.N + 1):
        if n >= 2:
            out["CC"] = max(out["CC"], _scaled([C(n, 1) @ C(n - 1, 2)],
                                               [C(n, 2) @ C(n - 1, 1)], floor))
        if n >= 1:
            out["DC"] = max(out["DC"], _scaled(
                [D(n, 1) @ C(n, 2), C(n, 1) @ D(n - 1, 2)],
                [D(n, 2) @ C(n, 1), C(n, 2) @ D(n - 1, 1)], floor))
        if n <= rec.N - 1:
            lhs = [L(n, 1) @ C(n + 1, 2), D(n, 1) @ D(n, 2)]
            rhs = [L(n, 2) @ C(n + 1, 1), D(n, 2) @ D(n, 1)]
            if n >= 1:
                lhs.append(C(n, 1) @ L(n - 1, 2))
                rhs.append(C(n, 2) @ L(n - 1, 1))
            out["LCDD"] = max(out["LCDD"], _scaled(lhs, rhs, floor))
            out["LD"] = max(out["LD"], _scaled(
                [L(n, 1) @ D(n + 1, 2), D(n, 1) @ L(n, 2)],
                [L(n, 2) @ D(n + 1, 1), D(n, 2) @ L(n, 1)], floor))
    out["max"] = max(out.values())
    return out


def interior_commutator(J1: BlockTridiagonal, J2: BlockTridiagonal) -> float:
    """Max of ``|J1 J2 - J2 J1|`` over block rows ``0..N-2``.

    The last block rows of a truncated product miss terms through level
    ``N + 1``, so only interior rows can vanish.
    """
    if J1.N != J2.N:
        raise ParameterError("truncation levels differ", "jacobi")
    if J1.N < 2:
        return 0.0
    comm = J1.matrix @ J2.matrix - J2.matrix @ J1.matrix
    return float(np.max(np.abs(comm[:level_offset(J1.N - 1)])))


def spectrum(source: OrthonormalSet, i: int, N: int | None = None) -> np.ndarray:
    """Ascending eigenvalues of the symmetric truncation (real by construction)."""
    L = assemble(source, i, N)
    try:
        return eigh(L.matrix, eigvals_only=True)
    except LinAlgError as exc:
        raise NumericalError(f"symmetric eigensolver failed: {exc}", "jacobi") from exc


def spectrum_csv(rows) -> str:
    """CSV text for ``(t, level, index, eigenvalue)`` rows."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "level", "index", "eigenvalue"])
    for t, level, idx, lam in rows:
        writer.writerow([repr(float(t)), level, idx, repr(float(lam))])
    return buf.getvalue()
