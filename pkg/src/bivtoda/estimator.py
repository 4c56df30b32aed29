"""scikit-learn transformer wrapping the OPS construction.

``fit`` builds the orthogonal system of a weight (the data matrix is only
checked against the domain); ``transform`` maps points ``(x, y)`` to the
orthonormal polynomials ``H_n^{-1/2} P_n`` of every level up to ``degree``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import DomainError, ParameterError
from .ops import build_ops, monomial_exponents, orthonormalize, rank_certificates, \
    recurrence_from_ops
from .weights import SQUARE, WeightSpec


class BivariateOPS(TransformerMixin, BaseEstimator):
    """Orthonormal polynomial features for a bivariate weight.

    Parameters
    ----------
    family : str
        ``"product-jacobi-square"`` or ``"jacobi-triangle"``.
    params : dict or None
        Exponents of the family; missing ones default to 0.
    degree : int
        Highest level ``N``; the output has ``(N+1)(N+2)/2`` columns.
    t : float
        Toda time of the deformed weight.
    """

    def __init__(self, family=SQUARE, params=None, degree=4, t=0.0):
        self.family = family
        self.params = params
        self.degree = degree
        self.t = t

    def _spec(self):
        return WeightSpec(self.family, dict(self.params or {}), self.t)

    def fit(self, X=None, y=None):
        if not isinstance(self.degree, (int, np.integer)) or self.degree < 0:
            raise ParameterError(f"degree must be a non-negative int, got {self.degree!r}",
                                 "estimator")
        spec = self._spec()
        if X is not None:
            X = check_array(X, ensure_min_features=2)
            self._check_domain(spec, X)
        ops = build_ops(spec, int(self.degree))
        rec = recurrence_from_ops(ops)
        self.spec_ = spec
        self.ops_ = ops
        self.recurrence_ = rec
        self.orthonormal_ = orthonormalize(ops, rec)
        self.rank_report_ = rank_certificates(rec)
        self.n_features_in_ = 2
        return self

    @staticmethod
    def _check_domain(spec, X):
        if X.shape[1] != 2:
            raise ParameterError(f"expected 2 columns (x, y), got {X.shape[1]}", "estimator")
        if not np.all(spec.contains(X[:, 0], X[:, 1], closed=True)):
            raise DomainError(f"points outside the closed {spec.family} domain",
                              "estimator")

    def transform(self, X):
        check_is_fitted(self, "ops_")
        X = check_array(X, ensure_min_features=2)
        self._check_domain(self.spec_, X)
        cols = []
        for n, p in enumerate(self.ops_.polys):
            cols.append((self.orthonormal_.Hinvsqrt[n] @ p(X[:, 0], X[:, 1])).T)
        return np.hstack(cols).astype(float)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "ops_")
        return np.array([f"p{n}_{j}" for n in range(self.degree + 1) for j in range(n + 1)],
                        dtype=object)

    def monomial_exponents(self):
        """``(a, b)`` of the monomials ``x^a y^b`` in coefficient-column order."""
        return monomial_exponents(self.degree)
