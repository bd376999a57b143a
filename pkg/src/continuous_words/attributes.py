"""Continuous attribute declarations and scalar encodings.

An attribute is a named continuous control (e.g. an orientation angle in
degrees) with a bounded domain, optionally periodic.  Values are normalized
to [0, 1] and lifted to a multi-frequency sin/cos feature vector before they
reach a word mapper.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import ConfigurationError, DomainViolationError
from .validation import check_finite_scalar, check_positive_int, check_unit_interval

# Names must be usable inside the `<attr:NAME>` placeholder grammar.
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class AttributeSpec:
    """A named continuous control with a bounded, optionally periodic domain."""

    name: str
    domain_min: float
    domain_max: float
    periodic: bool = False
    default_grid_size: int = 18

    def __post_init__(self):
        if not _NAME_RE.match(self.name):
            raise ConfigurationError(
                f"attribute name {self.name!r} is not a valid placeholder identifier"
            )
        if not self.domain_min < self.domain_max:
            raise ConfigurationError(
                f"attribute {self.name!r}: domain_min must be < domain_max "
                f"({self.domain_min} >= {self.domain_max})"
            )
        check_positive_int(self.default_grid_size, "default_grid_size")
        if self.default_grid_size < 2:
            raise ConfigurationError("default_grid_size must be >= 2")

    @property
    def span(self) -> float:
        return self.domain_max - self.domain_min

    def wrap(self, value: float) -> float:
        """Map a periodic value into [domain_min, domain_max)."""
        if not self.periodic:
            return value
        return self.domain_min + (value - self.domain_min) % self.span

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "min": self.domain_min,
            "max": self.domain_max,
            "periodic": self.periodic,
            "grid_size": self.default_grid_size,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AttributeSpec":
        return cls(
            name=d["name"],
            domain_min=float(d["min"]),
            domain_max=float(d["max"]),
            periodic=bool(d["periodic"]),
            default_grid_size=int(d.get("grid_size", 18)),
        )


def normalize(spec: AttributeSpec, value: float) -> float:
    """Map an in-domain value to [0, 1]; periodic values are wrapped first."""
    value = check_finite_scalar(value, f"value for {spec.name!r}")
    if spec.periodic:
        value = spec.wrap(value)
    elif not spec.domain_min <= value <= spec.domain_max:
        raise DomainViolationError(spec.name, value, spec.domain_min, spec.domain_max)
    return (value - spec.domain_min) / spec.span


def denormalize(spec: AttributeSpec, unit: float) -> float:
    """Inverse of :func:`normalize` for unit values in [0, 1]."""
    unit = check_unit_interval(unit, f"unit value for {spec.name!r}")
    return spec.domain_min + unit * spec.span


class AttributeRegistry:
    """Ordered collection of :class:`AttributeSpec` with unique names."""

    def __init__(self, specs: Iterable[AttributeSpec] = ()):
        self._specs: dict[str, AttributeSpec] = {}
        for spec in specs:
            self.add(spec)

    def add(self, spec: AttributeSpec) -> None:
        if spec.name in self._specs:
            raise ConfigurationError(f"attribute {spec.name!r} is already registered")
        self._specs[spec.name] = spec

    def get(self, name: str) -> AttributeSpec:
        try:
            return self._specs[name]
        except KeyError:
            raise ConfigurationError(f"attribute {name!r} is not registered") from None

    def names(self) -> list[str]:
        return list(self._specs)

    def specs(self) -> list[AttributeSpec]:
        return list(self._specs.values())

    def __contains__(self, name: str) -> bool:
        return name in self._specs

    def __len__(self) -> int:
        return len(self._specs)

    def __iter__(self) -> Iterator[AttributeSpec]:
        return iter(self._specs.values())

    def validate_values(self, values: Mapping[str, float]) -> dict[str, float]:
        """Check every assignment against its spec; returns wrapped values."""
        resolved = {}
        for name, value in values.items():
            spec = self.get(name)
            resolved[name] = denormalize(spec, normalize(spec, value))
        return resolved

    def to_list(self) -> list[dict]:
        return [spec.to_dict() for spec in self]

    @classmethod
    def from_list(cls, items: Iterable[Mapping]) -> "AttributeRegistry":
        return cls(AttributeSpec.from_dict(d) for d in items)


@dataclass(frozen=True)
class AttributeValue:
    """A concrete assignment of values to registered attributes."""

    assignments: Mapping[str, float] = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return self.assignments[name]

    def __contains__(self, name: str) -> bool:
        return name in self.assignments

    def as_dict(self) -> dict[str, float]:
        return dict(self.assignments)


@dataclass(frozen=True)
class PositionalEncodingConfig:
    """Multi-frequency sin/cos lift of a unit scalar.

    The default keeps the top frequency well inside the Nyquist limit of an
    18-point training grid; higher counts alias between grid points and the
    learned word stops interpolating smoothly."""

    num_frequencies: int = 3
    include_raw: bool = True

    def __post_init__(self):
        check_positive_int(self.num_frequencies, "num_frequencies")

    @property
    def width(self) -> int:
        """Encoded components per input scalar."""
        return 2 * self.num_frequencies + (1 if self.include_raw else 0)

    @property
    def frequencies(self) -> np.ndarray:
        return 2.0 ** np.arange(self.num_frequencies)

    def lipschitz_constant(self) -> float:
        """Upper bound on the Jacobian norm of the per-scalar encoding."""
        sq = float(np.sum((self.frequencies * math.pi) ** 2))
        if self.include_raw:
            sq += 1.0
        return math.sqrt(sq)

    def to_dict(self) -> dict:
        return {"num_frequencies": self.num_frequencies, "include_raw": self.include_raw}

    @classmethod
    def from_dict(cls, d: Mapping) -> "PositionalEncodingConfig":
        return cls(int(d["num_frequencies"]), bool(d["include_raw"]))


def positional_encode(x: float, cfg: PositionalEncodingConfig) -> np.ndarray:
    """Encode a unit scalar as [sin(2^0 pi x), cos(2^0 pi x), ..., (x)].

    All sin/cos components lie in [-1, 1]; the optional raw term is the
    input itself and lies in [0, 1].
    """
    x = check_unit_interval(x, "x")
    angles = math.pi * x * cfg.frequencies
    parts = np.empty(cfg.width, dtype=np.float64)
    parts[0 : 2 * cfg.num_frequencies : 2] = np.sin(angles)
    parts[1 : 2 * cfg.num_frequencies : 2] = np.cos(angles)
    if cfg.include_raw:
        parts[-1] = x
    return parts
