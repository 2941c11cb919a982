"""Input validation helpers shared by the public API."""

import numbers

import numpy as np

from .exceptions import DomainError


def check_vector(v, name="v", *, allow_empty=False):
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not allow_empty and arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_loss_matrix(losses, name="losses"):
    arr = np.asarray(losses, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a (T, n) matrix, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} must have at least one round and one coordinate")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return np.ascontiguousarray(arr)


def check_positive(x, name="x"):
    """Return ``x`` as a float array after checking every entry is > 0."""
    arr = check_vector(x, name)
    if np.any(arr <= 0.0):
        raise DomainError(f"{name} must be strictly positive (min entry {arr.min():.3g})")
    return arr


def check_scalar(value, name, *, low=None, high=None, low_open=True, high_open=False):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    value = float(value)
    if low is not None and (value <= low if low_open else value < low):
        raise ValueError(f"{name}={value} is below the allowed range")
    if high is not None and (value >= high if high_open else value > high):
        raise ValueError(f"{name}={value} is above the allowed range")
    return value


def check_rng(seed):
    """Turn ``None``, an int, a SeedSequence or a Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
