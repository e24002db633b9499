"""Thin scikit-learn style wrappers.

The numerical routines take fields, families and domains rather than
feature matrices, so these classes only borrow the parameter handling
(``get_params``/``set_params``/``clone``) and the fit-then-use protocol.
``transform`` takes an array of complex points.
"""

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .beltrami import mrm_solve
from .criteria import radial_divergence
from .dirichlet import solve_dirichlet
from .modulus import discrete_modulus


def _points(Z):
    Z = np.asarray(Z)
    if not np.iscomplexobj(Z):
        if Z.ndim == 2 and Z.shape[-1] == 2:
            Z = Z[:, 0] + 1j * Z[:, 1]
        else:
            Z = Z.astype(complex)
    return Z


class BeltramiMap(TransformerMixin, BaseEstimator):
    def __init__(self, tol=1e-10, max_iter=500):
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, mu, y=None):
        self.solution_ = mrm_solve(mu, self.tol, self.max_iter)
        self.n_iter_ = self.solution_.provenance["iterations"]
        return self

    def transform(self, Z):
        check_is_fitted(self, "solution_")
        return self.solution_(_points(Z))


class DiscreteModulus(BaseEstimator):
    def __init__(self, tol=1e-3, max_iter=20000):
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, family, y=None, weights=None):
        res = discrete_modulus(family, self.tol, self.max_iter, weights)
        self.result_ = res
        self.modulus_ = res.value
        self.density_ = res.density
        return self


class DirichletSolver(TransformerMixin, BaseEstimator):
    """Fit on a coefficient (field, callable or constant); transform evaluates f."""

    def __init__(self, domain=None, data=None, truncation=math.inf, resolution=512, tol=1e-10,
                 n_boundary=2048, gauge=0.0):
        self.domain = domain
        self.data = data
        self.truncation = truncation
        self.resolution = resolution
        self.tol = tol
        self.n_boundary = n_boundary
        self.gauge = gauge

    def fit(self, mu, y=None):
        if self.domain is None or self.data is None:
            raise ValueError("domain and data must be set before fit")
        self.report_ = solve_dirichlet(mu, self.domain, self.data, self.truncation, self.resolution, self.tol,
                                       self.n_boundary, self.gauge)
        self.residual_ = self.report_.residual
        return self

    def transform(self, Z):
        check_is_fitted(self, "report_")
        return self.report_(_points(Z))


class RadialDivergence(BaseEstimator):
    def __init__(self, z0=0j, delta=0.5, n_levels=12, domain=None):
        self.z0 = z0
        self.delta = delta
        self.n_levels = n_levels
        self.domain = domain

    def fit(self, K, y=None):
        self.report_ = radial_divergence(K, self.domain, self.z0, self.delta, self.n_levels)
        self.verdict_ = self.report_.verdict
        self.model_ = self.report_.model
        return self

    def predict(self, K):
        return self.fit(K).verdict_
