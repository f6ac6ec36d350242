"""scikit-learn compatible wrappers around curve fitting and SOC lookup."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from .characterization import DEFAULT_BINS, OcvSocTable, fit
from .estimation import invert, soc_variance
from .exceptions import AmbiguousInverseError
from .ocv_model import DEFAULT_EPSILON, OcvModel, derivative, evaluate, is_monotone


def _single_column(X):
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature, got {X.shape[1]} columns")
        X = X[:, 0]
    return X


def _sorted_table(soc, ocv):
    order = np.argsort(soc, kind="stable")
    soc, ocv = soc[order], ocv[order]
    uniq, inv = np.unique(soc, return_inverse=True)
    if uniq.size != soc.size:
        # repeated SOC points are averaged into one table row
        ocv = np.bincount(inv, weights=ocv) / np.bincount(inv)
    return OcvSocTable(uniq, ocv)


class OcvCurveRegressor(RegressorMixin, BaseEstimator):
    """Least-squares OCV-SOC curve as a regressor from SOC to OCV.

    Parameters
    ----------
    form : {"nernst", "poly"}
    degree : int or None
        Polynomial degree when ``form="poly"``.
    bins : int
        SOC bins for the residual statistics in ``report_``.
    epsilon : float
        Domain clamp of the fitted model.

    Attributes
    ----------
    model_ : OcvModel
    report_ : FitReport
    coef_ : ndarray
    """

    def __init__(self, form="nernst", degree=None, bins=DEFAULT_BINS, epsilon=DEFAULT_EPSILON):
        self.form = form
        self.degree = degree
        self.bins = bins
        self.epsilon = epsilon

    def fit(self, X, y):
        soc = _single_column(X)
        ocv = column_or_1d(check_array(y, ensure_2d=False, dtype=float))
        if soc.shape != ocv.shape:
            raise ValueError("X and y have inconsistent lengths")
        self.report_ = fit(_sorted_table(soc, ocv), self.form, self.degree, self.bins, self.epsilon)
        self.model_ = self.report_.model
        self.coef_ = np.asarray(self.model_.coefficients)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return evaluate(self.model_, _single_column(X))

    def derivative(self, X):
        check_is_fitted(self, "model_")
        return derivative(self.model_, _single_column(X))


class SocLookup(TransformerMixin, BaseEstimator):
    """Map OCV readings to SOC by inverting an OCV-SOC curve.

    Either pass a ready ``model`` or let :meth:`fit` estimate one from
    ``(soc, ocv)`` pairs. ``sigma_e`` is the OCV standard deviation used by
    :meth:`predict_variance`.
    """

    def __init__(self, model=None, form="nernst", degree=None, sigma_e=0.0):
        self.model = model
        self.form = form
        self.degree = degree
        self.sigma_e = sigma_e

    def fit(self, X=None, y=None):
        if self.model is not None:
            model = self.model if isinstance(self.model, OcvModel) else OcvModel.from_dict(self.model)
        else:
            if X is None or y is None:
                raise ValueError("SocLookup needs either a model or (soc, ocv) data")
            model = OcvCurveRegressor(self.form, self.degree).fit(X, y).model_
        if not is_monotone(model):
            raise AmbiguousInverseError("OCV model is not strictly increasing")
        self.model_ = model
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        """OCV column -> SOC column."""
        check_is_fitted(self, "model_")
        s, _ = invert(self.model_, _single_column(X), check=False)
        return s.reshape(-1, 1)

    def inverse_transform(self, X):
        check_is_fitted(self, "model_")
        return evaluate(self.model_, _single_column(X)).reshape(-1, 1)

    def predict_variance(self, X):
        """First-order SOC error variance at each OCV reading."""
        s = self.transform(X)[:, 0]
        return soc_variance(self.model_, s, self.sigma_e)
