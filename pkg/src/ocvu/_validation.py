"""Small input-validation helpers used across the package."""

import math
import numbers

import numpy as np


def check_soc(s, name="s"):
    """Return ``s`` as float (or float array) after checking it lies in [0, 1]."""
    if isinstance(s, numbers.Real) and not isinstance(s, bool):
        value = float(s)
        if not (0.0 <= value <= 1.0):
            raise ValueError(f"{name} must be a SOC fraction in [0, 1], got {value!r}")
        return value
    arr = np.asarray(s, dtype=float)
    if arr.size and not (np.all(arr >= 0.0) and np.all(arr <= 1.0)):
        raise ValueError(f"{name} must contain SOC fractions in [0, 1]")
    return arr


def check_positive(x, name, strict=True):
    value = float(x)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    if strict and value <= 0.0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0.0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return value


def check_seed(seed):
    seed = int(seed)
    if not (0 <= seed < 2**64):
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed
