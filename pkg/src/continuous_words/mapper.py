"""Learnable mapping from continuous attribute values to token embeddings.

A :class:`WordMapper` normalizes each consumed attribute to [0, 1], lifts it
with a multi-frequency positional encoding, and pushes the concatenated
features through a 2-layer MLP whose output lives in the backbone's
token-embedding space.  One mapper emits exactly one token embedding; a
mapper may consume several attributes jointly.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import torch
from torch import nn

from .attributes import AttributeSpec, PositionalEncodingConfig, normalize
from .errors import DataError
from .validation import check_positive_int

# Upper bound on the derivative of SiLU (actual supremum ~= 1.0998).
SILU_LIPSCHITZ = 1.1


class WordMapper(nn.Module):
    """Positional encoding + 2-layer MLP from attribute values to one token."""

    def __init__(
        self,
        specs: Sequence[AttributeSpec],
        pe_config: PositionalEncodingConfig,
        hidden_dim: int,
        output_dim: int,
    ):
        super().__init__()
        if not specs:
            raise DataError("a WordMapper must consume at least one attribute")
        check_positive_int(hidden_dim, "hidden_dim")
        check_positive_int(output_dim, "output_dim")
        self.specs = tuple(specs)
        self.pe_config = pe_config
        self.hidden_dim = hidden_dim
        self.output_dim = output_dim
        in_dim = pe_config.width * len(self.specs)
        self.fc1 = nn.Linear(in_dim, hidden_dim)
        self.act = nn.SiLU()
        self.fc2 = nn.Linear(hidden_dim, output_dim)
        # Stored at full precision; cast at use so float64 runs stay exact.
        freqs = math.pi * torch.tensor(pe_config.frequencies, dtype=torch.float64)
        self.register_buffer("freqs", freqs, persistent=False)

    @property
    def attribute_names(self) -> list[str]:
        return [spec.name for spec in self.specs]

    @property
    def input_dim(self) -> int:
        return self.pe_config.width * len(self.specs)

    def normalize_values(self, values: Mapping[str, float]) -> torch.Tensor:
        """Collect and normalize the consumed attributes, in declaration order."""
        units = []
        for spec in self.specs:
            if spec.name not in values:
                raise DataError(f"missing value for attribute {spec.name!r}")
            units.append(normalize(spec, values[spec.name]))
        return torch.tensor(units, dtype=self.fc1.weight.dtype)

    def encode(self, unit: torch.Tensor) -> torch.Tensor:
        """Positionally encode unit values of shape (..., n_attributes)."""
        angles = unit.unsqueeze(-1) * self.freqs.to(dtype=unit.dtype)
        enc = torch.stack([angles.sin(), angles.cos()], dim=-1).flatten(-2)
        if self.pe_config.include_raw:
            enc = torch.cat([enc, unit.unsqueeze(-1)], dim=-1)
        return enc.flatten(-2)

    def forward(self, unit: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.act(self.fc1(self.encode(unit))))


def map_to_embedding(mapper: WordMapper, values: Mapping[str, float]) -> torch.Tensor:
    """Evaluate the mapper on a concrete attribute assignment."""
    if hasattr(values, "assignments"):
        values = values.assignments
    return mapper(mapper.normalize_values(values))


def init_mapper(
    specs: Sequence[AttributeSpec],
    pe_config: PositionalEncodingConfig,
    hidden_dim: int,
    output_dim: int,
    seed: int = 0,
    init_embedding: torch.Tensor | None = None,
) -> WordMapper:
    """Build a seeded mapper with small-magnitude weights.

    Weights are drawn with std 0.02 so initial outputs stay near the scale of
    existing token embeddings; the final bias starts at ``init_embedding``
    (typically the backbone embedding of a category-related word) when given,
    else at zero.
    """
    mapper = WordMapper(specs, pe_config, hidden_dim, output_dim)
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        mapper.fc1.weight.normal_(0.0, 0.02, generator=gen)
        mapper.fc1.bias.zero_()
        mapper.fc2.weight.normal_(0.0, 0.02, generator=gen)
        if init_embedding is None:
            mapper.fc2.bias.zero_()
        else:
            if init_embedding.shape != (output_dim,):
                raise DataError(
                    f"init_embedding must have shape ({output_dim},), "
                    f"got {tuple(init_embedding.shape)}"
                )
            mapper.fc2.bias.copy_(init_embedding)
    return mapper


def lipschitz_bound(mapper: WordMapper, normalized: bool = True) -> float:
    """Upper bound on the slope of the mapper seen as a function of its inputs.

    With ``normalized=True`` the bound applies to unit inputs in [0, 1]^n;
    otherwise it is rescaled to raw attribute units via the steepest
    normalization slope 1/span.
    """
    w1 = torch.linalg.matrix_norm(mapper.fc1.weight.detach().double(), ord=2).item()
    w2 = torch.linalg.matrix_norm(mapper.fc2.weight.detach().double(), ord=2).item()
    bound = w2 * SILU_LIPSCHITZ * w1 * mapper.pe_config.lipschitz_constant()
    if not normalized:
        bound *= max(1.0 / spec.span for spec in mapper.specs)
    return bound
