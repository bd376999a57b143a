"""Small input-validation helpers, sklearn ``check_*`` style.

These raise :class:`~continuous_words.errors.ConfigurationError` for bad
scalar parameters and ``ValueError`` for bad array arguments, so that the
caller-facing contracts stay uniform across modules.
"""

from __future__ import annotations

import math
from typing import Any

import torch

from .errors import ConfigurationError


def check_positive_int(value: Any, name: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
        raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
    return value


def check_positive(value: Any, name: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
        raise ConfigurationError(f"{name} must be a positive number, got {value!r}")
    return float(value)


def check_non_negative(value: Any, name: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not value >= 0:
        raise ConfigurationError(f"{name} must be a non-negative number, got {value!r}")
    return float(value)


def check_finite_scalar(value: Any, name: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise ValueError(f"{name} must be a finite number, got {value!r}")
    return float(value)


def check_unit_interval(value: float, name: str) -> float:
    value = check_finite_scalar(value, name)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def check_same_shape(a: torch.Tensor, b: torch.Tensor, what: str = "tensors") -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what} must have the same shape, got {tuple(a.shape)} vs {tuple(b.shape)}")


def check_finite_tensor(t: torch.Tensor, name: str) -> torch.Tensor:
    if not torch.isfinite(t).all():
        raise ValueError(f"{name} contains non-finite values")
    return t
