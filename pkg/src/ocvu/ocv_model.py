"""Parametric OCV-SOC curves.

Every shipped form is linear in its coefficients, ``f(s) = sum_j k_j * phi_j(s)``,
so a form is fully described by its basis functions and their derivatives.
The same basis drives evaluation, the analytic slope and least-squares fitting.

The log terms of the Nernst form are singular at ``s = 0`` and ``s = 1``; the
evaluation domain is therefore clamped to ``[epsilon, 1 - epsilon]`` for all
forms.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_soc
from .exceptions import InvalidModelError

DEFAULT_EPSILON = 1e-6


class _Basis:
    name = ""

    def n_coefficients(self, degree):
        raise NotImplementedError

    def design(self, s, n_coef):
        raise NotImplementedError

    def design_derivative(self, s, n_coef):
        raise NotImplementedError


class _NernstBasis(_Basis):
    # k0 + k1 ln(s) + k2 ln(1 - s)
    name = "nernst"

    def n_coefficients(self, degree=None):
        return 3

    def design(self, s, n_coef=3):
        return np.stack([np.ones_like(s), np.log(s), np.log1p(-s)], axis=-1)

    def design_derivative(self, s, n_coef=3):
        return np.stack([np.zeros_like(s), 1.0 / s, -1.0 / (1.0 - s)], axis=-1)


class _PolynomialBasis(_Basis):
    # c0 + c1 s + ... + cd s^d, ascending powers
    name = "poly"

    def n_coefficients(self, degree):
        if degree is None or int(degree) < 0:
            raise InvalidModelError("polynomial form needs a degree >= 0")
        return int(degree) + 1

    def design(self, s, n_coef):
        return np.polynomial.polynomial.polyvander(s, n_coef - 1)

    def design_derivative(self, s, n_coef):
        out = np.zeros(np.shape(s) + (n_coef,))
        if n_coef > 1:
            powers = np.arange(1, n_coef)
            out[..., 1:] = powers * np.polynomial.polynomial.polyvander(s, n_coef - 2)
        return out


FORMS = {b.name: b for b in (_NernstBasis(), _PolynomialBasis())}


def register_form(basis):
    """Add a new linear-in-coefficients OCV form to the model family."""
    if not basis.name:
        raise ValueError("basis must define a non-empty name")
    FORMS[basis.name] = basis
    return basis


@dataclass(frozen=True)
class OcvModel:
    """Immutable OCV-SOC curve.

    Parameters
    ----------
    form : str
        ``"nernst"`` or ``"poly"`` (or any name added via :func:`register_form`).
    coefficients : tuple of float
        Volts per basis term. Nernst takes ``(k0, k1, k2)``; a degree ``d``
        polynomial takes ``d + 1`` ascending-power coefficients.
    epsilon : float
        Domain clamp; SOC is restricted to ``[epsilon, 1 - epsilon]``.
    """

    form: str
    coefficients: tuple
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        coefs = tuple(float(c) for c in np.ravel(self.coefficients))
        object.__setattr__(self, "coefficients", coefs)
        object.__setattr__(self, "epsilon", float(self.epsilon))
        if self.form not in FORMS:
            raise InvalidModelError(f"unknown OCV model form {self.form!r}")
        if not all(math.isfinite(c) for c in coefs):
            raise InvalidModelError("model coefficients must be finite")
        if not (0.0 < self.epsilon < 0.01):
            raise InvalidModelError(f"epsilon must lie in (0, 0.01), got {self.epsilon}")
        if self.form == "nernst" and len(coefs) != 3:
            raise InvalidModelError("Nernst form takes exactly 3 coefficients (k0, k1, k2)")
        if len(coefs) < 1:
            raise InvalidModelError("model needs at least one coefficient")

    @classmethod
    def nernst(cls, k0, k1, k2, epsilon=DEFAULT_EPSILON):
        return cls("nernst", (k0, k1, k2), epsilon)

    @classmethod
    def polynomial(cls, coefficients, epsilon=DEFAULT_EPSILON):
        return cls("poly", tuple(coefficients), epsilon)

    @property
    def degree(self):
        """Polynomial degree, or ``None`` for non-polynomial forms."""
        return len(self.coefficients) - 1 if self.form == "poly" else None

    @property
    def basis(self):
        return FORMS[self.form]

    @property
    def soc_range(self):
        return self.epsilon, 1.0 - self.epsilon

    def clamp(self, s):
        lo, hi = self.soc_range
        return np.clip(s, lo, hi)

    def __call__(self, s):
        return evaluate(self, s)

    def derivative(self, s):
        return derivative(self, s)

    def scaled(self, factor):
        """Return a copy with every coefficient multiplied by ``factor``."""
        return OcvModel(self.form, tuple(factor * c for c in self.coefficients), self.epsilon)

    def to_dict(self):
        return {"form": self.form, "coefficients": list(self.coefficients), "epsilon": self.epsilon}

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(str(data["form"]), tuple(data["coefficients"]), data.get("epsilon", DEFAULT_EPSILON))
        except (KeyError, TypeError) as exc:
            raise InvalidModelError(f"malformed model object: {exc}") from exc

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _combine(model, s_clamped, derivative_basis):
    # s_clamped: validated float array already inside the model domain
    n = len(model.coefficients)
    basis = model.basis
    X = basis.design_derivative(s_clamped, n) if derivative_basis else basis.design(s_clamped, n)
    coefs = np.asarray(model.coefficients)
    # products rounded individually (no fused multiply-add) and intercept added
    # last, so exactly cancelling terms leave the intercept bit-exact
    return np.sum(X[..., 1:] * coefs[1:], axis=-1) + X[..., 0] * coefs[0]


def _linear_combination(model, s, derivative_basis):
    scalar = np.ndim(s) == 0
    s_arr = model.clamp(np.asarray(check_soc(s), dtype=float))
    out = _combine(model, s_arr, derivative_basis)
    return float(np.reshape(out, -1)[0]) if scalar else out


def evaluate(model, s):
    """OCV in volts at SOC fraction(s) ``s`` (clamped to the model domain)."""
    return _linear_combination(model, s, derivative_basis=False)


def derivative(model, s):
    """Slope ``df/ds`` in volts per unit SOC, evaluated at the clamped SOC."""
    return _linear_combination(model, s, derivative_basis=True)


def is_monotone(model, grid_size=1024):
    """True iff the slope is strictly positive on a uniform grid of the domain."""
    if int(grid_size) < 2:
        raise ValueError("grid_size must be >= 2")
    lo, hi = model.soc_range
    grid = np.linspace(lo, hi, int(grid_size))
    return bool(np.all(derivative(model, grid) > 0.0))
