"""Low-rank adaptation of backbone linear layers.

Attachment wraps selected ``nn.Linear`` modules with an additive low-rank
delta ``(alpha/rank) * B @ A``.  ``B`` starts at zero, so a fresh attachment
never changes backbone outputs; training touches only the factor pairs while
every base parameter stays frozen.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import torch
from torch import nn

from .errors import ConfigurationError
from .validation import check_positive, check_positive_int


@dataclass(frozen=True)
class LoRAConfig:
    """Rank, scale, and the name patterns selecting target layers.

    The defaults select every attention projection: the text encoder's
    self-attention plus the denoiser's pooled and spatial cross-attention."""

    rank: int = 4
    alpha: float = 4.0
    targets: tuple[str, ...] = ("attn", "pool")
    seed: int = 0

    def __post_init__(self):
        check_positive_int(self.rank, "rank")
        check_positive(self.alpha, "alpha")
        if not self.targets:
            raise ConfigurationError("LoRAConfig.targets must not be empty")

    def to_dict(self) -> dict:
        return {"rank": self.rank, "alpha": self.alpha, "targets": list(self.targets), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "LoRAConfig":
        return cls(int(d["rank"]), float(d["alpha"]), tuple(d["targets"]), int(d.get("seed", 0)))


class LoRALinear(nn.Module):
    """A frozen linear layer plus a trainable low-rank delta."""

    def __init__(self, base: nn.Linear, rank: int, alpha: float, generator: torch.Generator):
        super().__init__()
        self.base = base
        self.base.requires_grad_(False)
        self.rank = rank
        self.scaling = alpha / rank
        in_features, out_features = base.in_features, base.out_features
        self.lora_a = nn.Parameter(torch.empty(rank, in_features))
        self.lora_b = nn.Parameter(torch.zeros(out_features, rank))
        with torch.no_grad():
            self.lora_a.normal_(0.0, in_features ** -0.5, generator=generator)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        delta = nn.functional.linear(nn.functional.linear(x, self.lora_a), self.lora_b)
        return self.base(x) + self.scaling * delta

    def merged_linear(self) -> nn.Linear:
        """A plain linear layer with the delta folded into the weight."""
        merged = nn.Linear(self.base.in_features, self.base.out_features, bias=self.base.bias is not None)
        with torch.no_grad():
            merged.weight.copy_(self.base.weight + self.scaling * (self.lora_b @ self.lora_a))
            if self.base.bias is not None:
                merged.bias.copy_(self.base.bias)
        merged.requires_grad_(False)
        return merged


class LoRAHandle:
    """Bookkeeping for one attachment: layer map, factors, merge/detach."""

    def __init__(self, backbone: nn.Module, config: LoRAConfig, layers: dict[str, LoRALinear]):
        self.backbone = backbone
        self.config = config
        self.layers = layers

    def parameters(self) -> Iterator[nn.Parameter]:
        for layer in self.layers.values():
            yield layer.lora_a
            yield layer.lora_b

    def parameter_count(self) -> int:
        """Trainable count, equal to sum of rank*(in+out) over targets."""
        return sum(p.numel() for p in self.parameters())

    def base_parameter_count(self) -> int:
        """Size of the full fine-tuning alternative: every backbone parameter."""
        lora_params = {id(p) for p in self.parameters()}
        return sum(p.numel() for p in self.backbone.parameters() if id(p) not in lora_params)

    def state_dict(self) -> dict[str, torch.Tensor]:
        out = {}
        for name, layer in self.layers.items():
            out[f"{name}.lora_a"] = layer.lora_a.detach().clone()
            out[f"{name}.lora_b"] = layer.lora_b.detach().clone()
        return out

    def load_state_dict(self, state: dict[str, torch.Tensor]) -> None:
        expected = {f"{n}.{f}" for n in self.layers for f in ("lora_a", "lora_b")}
        if set(state) != expected:
            raise ConfigurationError("LoRA state does not match the attached layer set")
        with torch.no_grad():
            for name, layer in self.layers.items():
                layer.lora_a.copy_(state[f"{name}.lora_a"])
                layer.lora_b.copy_(state[f"{name}.lora_b"])

    def merge_and_detach(self) -> nn.Module:
        """Fold every delta into its base weight and restore plain linears."""
        for name, layer in self.layers.items():
            _set_submodule(self.backbone, name, layer.merged_linear())
        self.layers = {}
        return self.backbone

    def detach(self) -> nn.Module:
        """Restore the original (unmerged) linear layers."""
        for name, layer in self.layers.items():
            _set_submodule(self.backbone, name, layer.base)
        self.layers = {}
        return self.backbone


def _set_submodule(root: nn.Module, dotted: str, module: nn.Module) -> None:
    parts = dotted.split(".")
    parent = root
    for p in parts[:-1]:
        parent = getattr(parent, p)
    setattr(parent, parts[-1], module)


def attach_lora(backbone: nn.Module, config: LoRAConfig = LoRAConfig()) -> LoRAHandle:
    """Freeze the backbone and wrap matching linear layers with LoRA deltas.

    Every pattern in ``config.targets`` must select at least one linear layer
    (substring match on the qualified module name), otherwise the pattern is
    reported as an unknown target.
    """
    if any(isinstance(m, LoRALinear) for m in backbone.modules()):
        raise ConfigurationError("backbone already has LoRA attached; detach first")
    backbone.requires_grad_(False)
    linears = {
        name: mod for name, mod in backbone.named_modules() if isinstance(mod, nn.Linear)
    }
    matched: dict[str, nn.Linear] = {}
    for pattern in config.targets:
        hits = {name: mod for name, mod in linears.items() if pattern in name}
        if not hits:
            raise ConfigurationError(f"LoRA target {pattern!r} matches no linear layer")
        matched.update(hits)

    gen = torch.Generator().manual_seed(config.seed)
    layers: dict[str, LoRALinear] = {}
    for name in sorted(matched):
        wrapped = LoRALinear(matched[name], config.rank, config.alpha, gen)
        _set_submodule(backbone, name, wrapped)
        layers[name] = wrapped
    return LoRAHandle(backbone, config, layers)
