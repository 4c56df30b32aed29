"""Exact rational Gram-Schmidt over a rational moment table.

Verification oracle for integer-exponent weights at ``t = 0``.  Deliberately
shares no numerics with :mod:`bivtoda.ops`: plain lists of ``Fraction`` and
Gauss-Jordan elimination.
"""
from __future__ import annotations

from fractions import Fraction

from .moments import RationalMomentTable, exact_moments


def _exps(n):
    return [(m - j, j) for m in range(n + 1) for j in range(m + 1)]


def _matmul(a, b):
    bt = list(zip(*b)) if b and b[0] else []
    return [[sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in bt]
            for row in a] if bt else [[] for _ in a]


def _transpose(a):
    return [list(r) for r in zip(*a)]


def _inverse(a):
    n = len(a)
    aug = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(a)]
    for col in range(n):
        piv = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [v - f * w for v, w in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def _shift(n, i):
    rows = []
    for r in range(n + 1):
        row = [Fraction(0)] * (n + 2)
        row[r + (i - 1)] = Fraction(1)
        rows.append(row)
    return rows


class ExactOPS:
    """Rational monic OPS, Gram blocks and recurrence through level ``N``."""

    def __init__(self, moments: RationalMomentTable, N: int):
        if moments.max_degree < 2 * N + 1:
            raise ValueError("need moments to degree 2N+1")
        self.N = N
        self.moments = moments
        exps = _exps(N + 1)
        self._exps = exps
        self.polys = []
        self.H = []
        Hinv = []
        for n in range(N + 1):
            # P_n as a dict exponent -> coefficient row
            rows = []
            for j in range(n + 1):
                poly = {(n - j, j): Fraction(1)}
                rows.append(poly)
            for m in range(n):
                proj = [[self._ip({(n - j, j): Fraction(1)}, q) for q in self.polys[m]]
                        for j in range(n + 1)]
                coef = _matmul(proj, Hinv[m])
                for j in range(n + 1):
                    for r, q in enumerate(self.polys[m]):
                        c = coef[j][r]
                        if c:
                            for e, v in q.items():
                                rows[j][e] = rows[j].get(e, Fraction(0)) - c * v
            self.polys.append(rows)
            Hn = [[self._ip(p, q) for q in rows] for p in rows]
            self.H.append(Hn)
            Hinv.append(_inverse(Hn))
        self._Hinv = Hinv
        self.D1, self.D2, self.C1, self.C2 = [], [], [], []
        for n in range(N + 1):
            for i, Dl, Cl in ((1, self.D1, self.C1), (2, self.D2, self.C2)):
                xp = [self._mult(p, i) for p in self.polys[n]]
                raw = [[self._ip(p, q) for q in self.polys[n]] for p in xp]
                Dl.append(_matmul(raw, Hinv[n]))
                if n >= 1:
                    Cl.append(_matmul(_matmul(self.H[n], _transpose(_shift(n - 1, i))),
                                      Hinv[n - 1]))
                else:
                    Cl.append([[]])

    def _ip(self, p, q):
        w = self.moments.values
        return sum((a * b * w[e[0] + f[0], e[1] + f[1]]
                    for e, a in p.items() for f, b in q.items()), Fraction(0))

    @staticmethod
    def _mult(p, i):
        return {(e[0] + (i == 1), e[1] + (i == 2)): v for e, v in p.items()}

    def coefficient_rows(self, n):
        """``P_n`` as rational rows in the graded monomial basis."""
        exps = _exps(n)
        return [[p.get(e, Fraction(0)) for e in exps] for p in self.polys[n]]


def exact_ops(spec, N: int) -> ExactOPS:
    return ExactOPS(exact_moments(spec, 2 * N + 2), N)
