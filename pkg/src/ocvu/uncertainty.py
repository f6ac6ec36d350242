"""Six-channel Gaussian OCV error budget.

Each channel carries a mean and a standard deviation as piecewise-linear
functions of SOC. Channels are independent, so variances add; means are summed
separately and never folded into the variance.
"""

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._validation import check_soc
from .exceptions import ParseError


class SourceKind(str, Enum):
    CELL_TO_CELL = "c2c"
    TEMPERATURE = "temperature"
    AGING = "aging"
    CYCLE_RATE = "crate"
    CURVE_FIT = "curvefit"
    MEAS_EST = "meas"


_KIND_ORDER = {k: i for i, k in enumerate(SourceKind)}


@dataclass(frozen=True, eq=False)
class ErrorSource:
    """One Gaussian OCV error channel: ``N(mean(s), sd(s)**2)`` volts."""

    kind: SourceKind
    soc_knots: np.ndarray
    mean_v: np.ndarray
    sd_v: np.ndarray

    def __post_init__(self):
        kind = SourceKind(self.kind)
        knots = np.array(self.soc_knots, dtype=float)
        mean = np.array(self.mean_v, dtype=float)
        sd = np.array(self.sd_v, dtype=float)
        if knots.ndim != 1 or knots.size < 2:
            raise ValueError("an error source needs at least 2 SOC knots")
        if mean.shape != knots.shape or sd.shape != knots.shape:
            raise ValueError("mean_v and sd_v must match soc_knots in length")
        if knots[0] != 0.0 or knots[-1] != 1.0 or np.any(np.diff(knots) <= 0):
            raise ValueError("soc_knots must increase strictly from 0 to 1")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(sd))):
            raise ValueError("mean_v and sd_v must be finite")
        if np.any(sd < 0):
            raise ValueError("sd_v must be non-negative")
        for arr in (knots, mean, sd):
            arr.flags.writeable = False
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "soc_knots", knots)
        object.__setattr__(self, "mean_v", mean)
        object.__setattr__(self, "sd_v", sd)

    @classmethod
    def constant(cls, kind, sd, mean=0.0):
        return cls(kind, [0.0, 1.0], [mean, mean], [sd, sd])

    def mean(self, s):
        return np.interp(check_soc(s), self.soc_knots, self.mean_v)

    def sd(self, s):
        return np.interp(check_soc(s), self.soc_knots, self.sd_v)

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "soc_knots": self.soc_knots.tolist(),
            "mean_v": self.mean_v.tolist(),
            "sd_v": self.sd_v.tolist(),
        }


class ErrorBudget:
    """At most one :class:`ErrorSource` per kind; missing kinds contribute nothing."""

    def __init__(self, sources=()):
        by_kind = {}
        for src in sources:
            if src.kind in by_kind:
                raise ValueError(f"duplicate error source kind {src.kind.value!r}")
            by_kind[src.kind] = src
        # canonical order keeps sampling independent of the caller's ordering
        self._sources = tuple(sorted(by_kind.values(), key=lambda x: _KIND_ORDER[x.kind]))

    @property
    def sources(self):
        return self._sources

    def __len__(self):
        return len(self._sources)

    def __iter__(self):
        return iter(self._sources)

    def __getitem__(self, kind):
        kind = SourceKind(kind)
        for src in self._sources:
            if src.kind == kind:
                return src
        raise KeyError(kind.value)

    def with_source(self, source):
        """New budget with ``source`` replacing any channel of the same kind."""
        return ErrorBudget([s for s in self._sources if s.kind != source.kind] + [source])

    def to_dict(self):
        return {"sources": [s.to_dict() for s in self._sources]}

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                ErrorSource(d["kind"], d["soc_knots"], d["mean_v"], d["sd_v"]) for d in data["sources"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed error budget: {exc}") from exc

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"budget is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def combined_variance(budget, s):
    """Sum of per-channel variances at SOC ``s`` (volts squared)."""
    s = check_soc(s)
    total = np.zeros(np.shape(s))
    for src in budget:
        total = total + src.sd(s) ** 2
    return float(total) if np.ndim(s) == 0 else total


def combined_sd(budget, s):
    """Total OCV standard deviation ``sqrt(sum sd_k(s)**2)``."""
    var = combined_variance(budget, s)
    return float(np.sqrt(var)) if np.ndim(var) == 0 else np.sqrt(var)


def combined_bias(budget, s):
    """Sum of channel means at ``s``; reported apart from the variance."""
    s = check_soc(s)
    total = np.zeros(np.shape(s))
    for src in budget:
        total = total + src.mean(s)
    return float(total) if np.ndim(s) == 0 else total


def sample(budget, s, rng, size=None):
    """Draw total OCV error(s) at SOC ``s``: independent Gaussian per channel, summed.

    ``rng`` is a :class:`numpy.random.Generator` owned by the caller.
    """
    s = check_soc(s)
    total = 0.0 if size is None else np.zeros(size)
    for src in budget:
        total = total + rng.normal(src.mean(s), src.sd(s), size)
    return float(total) if size is None else total


def soc_error_sd(model, budget, s):
    """SOC lookup error s.d. at ``s`` implied by the budget's total OCV variance."""
    from .estimation import soc_variance

    return np.sqrt(soc_variance(model, s, combined_sd(budget, s)))
