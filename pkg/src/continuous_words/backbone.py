"""Text-conditioned diffusion backbone abstraction and a desk-scale toy model.

A backbone bundles a tokenizer, a token-embedding table, a text encoder, a
denoiser, and a noise schedule.  Real pretrained models plug in behind the
:class:`DiffusionBackbone` protocol; checkpoints created against one backbone
identifier reload against the same one.  The :class:`ToyBackbone` is a fully
deterministic, CPU-trainable stand-in used by the test and acceptance suites:
a 3x32x32 pixel-space sample, a 16-wide text pathway, and a small
coordinate-aware convolutional denoiser whose channels are modulated by an
attention-pooled conditioning vector.
"""

from __future__ import annotations

import math
import re
import zlib
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import torch
from torch import nn

from .errors import ConfigurationError, PromptLengthError
from .validation import check_same_shape


# --------------------------------------------------------------------------
# Noise schedule

class NoiseSchedule:
    """Per-timestep (alpha_t, sigma_t) pairs with alpha_t^2 + sigma_t^2 = 1.

    The signal coefficient alpha decreases linearly in signal power from
    nearly 1 to nearly 0, so alpha is non-increasing and sigma non-decreasing
    across the schedule.
    """

    def __init__(self, timesteps: int = 100, abar_start: float = 0.9999, abar_end: float = 1e-4):
        if timesteps < 1:
            raise ConfigurationError("timesteps must be >= 1")
        if not (0.0 < abar_end < abar_start < 1.0):
            raise ConfigurationError("need 0 < abar_end < abar_start < 1")
        self.timesteps = timesteps
        self.abar_start = abar_start
        self.abar_end = abar_end
        abar = torch.linspace(abar_start, abar_end, timesteps, dtype=torch.float64)
        self.alphas = abar.sqrt().to(torch.float32)
        self.sigmas = (1.0 - abar).sqrt().to(torch.float32)

    def coefficients(self, t: int) -> tuple[float, float]:
        if not 0 <= t < self.timesteps:
            raise ConfigurationError(f"timestep {t} outside [0, {self.timesteps})")
        return float(self.alphas[t]), float(self.sigmas[t])

    def to_dict(self) -> dict:
        return {
            "kind": "linear_vp",
            "timesteps": self.timesteps,
            "abar_start": self.abar_start,
            "abar_end": self.abar_end,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSchedule":
        return cls(int(d["timesteps"]), float(d["abar_start"]), float(d["abar_end"]))


def add_noise(schedule: NoiseSchedule, sample: torch.Tensor, noise: torch.Tensor, t: int) -> torch.Tensor:
    """Forward-diffuse: alpha_t * sample + sigma_t * noise."""
    check_same_shape(sample, noise, "sample and noise")
    alpha, sigma = schedule.coefficients(t)
    return alpha * sample + sigma * noise


# --------------------------------------------------------------------------
# Backbone protocol

@runtime_checkable
class DiffusionBackbone(Protocol):
    """Capabilities a denoising backbone must expose.

    ``tokenize`` maps text to token ids, ``embed`` looks those ids up in the
    input-embedding table, and ``encode`` runs the text encoder over a
    (possibly modified) input-embedding sequence.  Slot injection happens
    between ``embed`` and ``encode``.  ``denoise(sample, t, conditioning)``
    is deterministic given identical inputs and weights, and its output is
    interpreted according to ``prediction_kind`` ("sample" or "noise").
    """

    embedding_width: int
    max_sequence_length: int
    sample_shape: tuple[int, ...]
    schedule: NoiseSchedule
    prediction_kind: str

    def tokenize(self, text: str) -> list[int]: ...

    def embed(self, token_ids: list[int]) -> torch.Tensor: ...

    def encode(self, input_embeddings: torch.Tensor) -> torch.Tensor: ...

    def denoise(self, sample: torch.Tensor, t: int, conditioning: torch.Tensor) -> torch.Tensor: ...


# --------------------------------------------------------------------------
# Toy tokenizer

class HashWordTokenizer:
    """Whitespace tokenizer with a process-stable hashed vocabulary.

    Words map to ids via CRC32, so tokenization is identical across runs and
    processes without shipping a vocabulary file.  Ids 0..3 are reserved for
    PAD/BOS/EOS/SLOT.
    """

    PAD, BOS, EOS, SLOT = 0, 1, 2, 3
    RESERVED = 4

    def __init__(self, vocab_size: int = 512):
        if vocab_size <= self.RESERVED:
            raise ConfigurationError("vocab_size must exceed the reserved range")
        self.vocab_size = vocab_size

    def word_id(self, word: str) -> int:
        span = self.vocab_size - self.RESERVED
        return self.RESERVED + zlib.crc32(word.lower().encode("utf-8")) % span

    def encode_words(self, text: str) -> list[int]:
        words = re.findall(r"[^\s]+", text)
        return [self.word_id(w) for w in words]


class ToyTextEncoder(nn.Module):
    """One attention + MLP block over the padded token sequence."""

    def __init__(self, width: int, max_len: int):
        super().__init__()
        self.width = width
        self.pos_emb = nn.Parameter(torch.zeros(max_len, width))
        self.ln1 = nn.LayerNorm(width)
        self.attn = SelfAttention(width)
        self.ln2 = nn.LayerNorm(width)
        self.mlp = nn.Sequential(nn.Linear(width, 2 * width), nn.SiLU(), nn.Linear(2 * width, width))
        self.ln_f = nn.LayerNorm(width)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.pos_emb[: x.shape[-2]]
        x = x + self.attn(self.ln1(x))
        x = x + self.mlp(self.ln2(x))
        return self.ln_f(x)


class SelfAttention(nn.Module):
    """Single-head bidirectional self-attention."""

    def __init__(self, width: int):
        super().__init__()
        self.q_proj = nn.Linear(width, width)
        self.k_proj = nn.Linear(width, width)
        self.v_proj = nn.Linear(width, width)
        self.out_proj = nn.Linear(width, width)
        self.scale = width ** -0.5

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        q, k, v = self.q_proj(x), self.k_proj(x), self.v_proj(x)
        weights = torch.softmax(q @ k.transpose(-2, -1) * self.scale, dim=-1)
        return self.out_proj(weights @ v)


class PooledAttention(nn.Module):
    """Collapse the conditioning sequence into one vector via a learned query."""

    def __init__(self, width: int):
        super().__init__()
        self.query = nn.Parameter(torch.zeros(width))
        self.q_proj = nn.Linear(width, width)
        self.k_proj = nn.Linear(width, width)
        self.v_proj = nn.Linear(width, width)
        self.scale = width ** -0.5

    def forward(self, cond: torch.Tensor) -> torch.Tensor:
        # cond: (B, L, W) -> (B, W)
        q = self.q_proj(self.query)
        k, v = self.k_proj(cond), self.v_proj(cond)
        weights = torch.softmax(k @ q * self.scale, dim=-1)
        return (weights.unsqueeze(-1) * v).sum(dim=-2)


class SpatialCrossAttention(nn.Module):
    """Every pixel attends over the conditioning tokens (single head).

    This is the pathway that lets individual prompt tokens steer *where*
    things appear, mirroring how denoising U-Nets consume text.  Queries see
    a multi-frequency encoding of the pixel's coordinates alongside its
    features, so matching a token key against a location is linearly
    expressible."""

    def __init__(self, channels: int, width: int, resolution: int, num_freqs: int = 4):
        super().__init__()
        pe = _coordinate_encoding(resolution, num_freqs)  # (pe_dim, H, W)
        self.register_buffer("coord_pe", pe.flatten(1).T, persistent=False)  # (HW, pe_dim)
        self.q_proj = nn.Linear(channels + pe.shape[0], width)
        self.k_proj = nn.Linear(width, width)
        self.v_proj = nn.Linear(width, width)
        self.out_proj = nn.Linear(width, channels)
        self.scale = width ** -0.5

    def forward(self, h: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        b, c, height, width_px = h.shape
        pixels = h.flatten(2).transpose(1, 2)  # (B, HW, C)
        pe = self.coord_pe.unsqueeze(0).expand(b, -1, -1)
        q = self.q_proj(torch.cat([pixels, pe], dim=-1))
        k, v = self.k_proj(cond), self.v_proj(cond)
        attn = torch.softmax(q @ k.transpose(-2, -1) * self.scale, dim=-1)
        mixed = self.out_proj(attn @ v)  # (B, HW, C)
        return h + mixed.transpose(1, 2).reshape(b, c, height, width_px)


def _coordinate_encoding(resolution: int, num_freqs: int) -> torch.Tensor:
    """Per-pixel sin/cos features of (x, y) in [0, 1]: (4*num_freqs, H, W)."""
    axis = torch.linspace(0.0, 1.0, resolution)
    yy, xx = torch.meshgrid(axis, axis, indexing="ij")
    freqs = (2.0 ** torch.arange(num_freqs)) * math.pi
    feats = []
    for grid in (xx, yy):
        angles = grid.unsqueeze(0) * freqs[:, None, None]
        feats.extend([angles.sin(), angles.cos()])
    return torch.cat(feats, dim=0)


class FilmBlock(nn.Module):
    """Conv -> GroupNorm -> feature-wise scale/shift from the context vector."""

    def __init__(self, in_ch: int, out_ch: int, ctx_dim: int):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, out_ch, kernel_size=3, padding=1)
        self.norm = nn.GroupNorm(4, out_ch)
        self.film = nn.Linear(ctx_dim, 2 * out_ch)
        self.act = nn.SiLU()

    def forward(self, h: torch.Tensor, ctx: torch.Tensor) -> torch.Tensor:
        h = self.norm(self.conv(h))
        scale, shift = self.film(ctx).chunk(2, dim=-1)
        h = h * (1.0 + scale[:, :, None, None]) + shift[:, :, None, None]
        return self.act(h)


class ToyDenoiser(nn.Module):
    """Coordinate-aware convolutional denoiser.

    Conditioning enters twice: a pooled vector FiLM-modulates channel
    features (global content), and spatial cross-attention lets pixels read
    the tokens directly (spatial placement)."""

    def __init__(self, width: int, channels: int, resolution: int, timesteps: int):
        super().__init__()
        self.timesteps = timesteps
        self.pool = PooledAttention(width)
        self.time_mlp = nn.Sequential(nn.Linear(width, width), nn.SiLU(), nn.Linear(width, width))
        ctx_dim = 2 * width
        self.blocks = nn.ModuleList(
            [
                FilmBlock(5, channels, ctx_dim),
                FilmBlock(channels, channels, ctx_dim),
                FilmBlock(channels, channels, ctx_dim),
            ]
        )
        self.xattn = nn.ModuleList(
            [
                SpatialCrossAttention(channels, width, resolution),
                SpatialCrossAttention(channels, width, resolution),
            ]
        )
        self.out = nn.Conv2d(channels, 3, kernel_size=3, padding=1)
        coords = torch.linspace(-1.0, 1.0, resolution)
        yy, xx = torch.meshgrid(coords, coords, indexing="ij")
        self.register_buffer("coord_grid", torch.stack([xx, yy]), persistent=False)
        half = width // 2
        t_freqs = (2.0 ** torch.arange(half)) * math.pi
        self.register_buffer("t_freqs", t_freqs, persistent=False)

    def time_embedding(self, t: torch.Tensor) -> torch.Tensor:
        phase = (t.float() / max(self.timesteps - 1, 1)).unsqueeze(-1) * self.t_freqs
        return self.time_mlp(torch.cat([phase.sin(), phase.cos()], dim=-1))

    def forward(self, sample: torch.Tensor, t: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        batch = sample.shape[0]
        ctx = torch.cat([self.pool(cond), self.time_embedding(t)], dim=-1)
        coords = self.coord_grid.unsqueeze(0).expand(batch, -1, -1, -1)
        h = self.blocks[0](torch.cat([sample, coords], dim=1), ctx)
        h = self.xattn[0](h, cond)
        h = self.blocks[1](h, ctx)
        h = self.xattn[1](h, cond)
        h = self.blocks[2](h, ctx)
        return self.out(h)


@dataclass(frozen=True)
class ToyBackboneConfig:
    sample_shape: tuple[int, int, int] = (3, 32, 32)
    embedding_width: int = 16
    max_sequence_length: int = 16
    vocab_size: int = 512
    channels: int = 16
    timesteps: int = 100
    prediction_kind: str = "sample"
    seed: int = 0
    embedding_init_std: float = 0.01

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        d["sample_shape"] = list(self.sample_shape)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ToyBackboneConfig":
        d = dict(d)
        d["sample_shape"] = tuple(d["sample_shape"])
        return cls(**d)


class ToyBackbone(nn.Module):
    """Deterministic small backbone for desk-scale training and tests."""

    def __init__(self, config: ToyBackboneConfig = ToyBackboneConfig()):
        super().__init__()
        if config.prediction_kind not in ("sample", "noise"):
            raise ConfigurationError(f"unknown prediction_kind {config.prediction_kind!r}")
        self.config = config
        self.embedding_width = config.embedding_width
        self.max_sequence_length = config.max_sequence_length
        self.sample_shape = config.sample_shape
        self.prediction_kind = config.prediction_kind
        self.schedule = NoiseSchedule(timesteps=config.timesteps)
        self.tokenizer = HashWordTokenizer(config.vocab_size)
        self.tok_emb = nn.Embedding(config.vocab_size, config.embedding_width)
        self.encoder = ToyTextEncoder(config.embedding_width, config.max_sequence_length)
        self.denoiser = ToyDenoiser(
            config.embedding_width, config.channels, config.sample_shape[-1], config.timesteps
        )
        self._init_weights(config.seed)

    def _init_weights(self, seed: int) -> None:
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for name, p in sorted(self.named_parameters(), key=lambda kv: kv[0]):
                if p.dim() >= 2:
                    fan_in = p.shape[1] * (p[0, 0].numel() if p.dim() > 2 else 1)
                    p.normal_(0.0, fan_in ** -0.5, generator=gen)
                elif name.endswith("weight"):
                    # norm-layer scales
                    p.fill_(1.0)
                else:
                    p.zero_()
            self.tok_emb.weight.normal_(0.0, self.config.embedding_init_std, generator=gen)
            self.encoder.pos_emb.normal_(0.0, self.config.embedding_init_std, generator=gen)
            self.denoiser.pool.query.normal_(0.0, 1.0, generator=gen)

    # -- text pathway -------------------------------------------------------

    def tokenize(self, text: str) -> list[int]:
        """BOS + words + EOS, padded to max_sequence_length."""
        tk = self.tokenizer
        ids = [tk.BOS, *tk.encode_words(text), tk.EOS]
        if len(ids) > self.max_sequence_length:
            raise PromptLengthError(
                f"prompt needs {len(ids)} tokens but the backbone allows "
                f"{self.max_sequence_length}"
            )
        ids.extend([tk.PAD] * (self.max_sequence_length - len(ids)))
        return ids

    def embed(self, token_ids: list[int]) -> torch.Tensor:
        return self.tok_emb(torch.tensor(token_ids, dtype=torch.long))

    def encode(self, input_embeddings: torch.Tensor) -> torch.Tensor:
        return self.encoder(input_embeddings)

    def mean_embedding_norm(self) -> float:
        return self.tok_emb.weight.detach().norm(dim=-1).mean().item()

    # -- denoising ----------------------------------------------------------

    def denoise(self, sample: torch.Tensor, t: int | torch.Tensor, conditioning: torch.Tensor) -> torch.Tensor:
        """Predict (per ``prediction_kind``) from a noised sample.

        Accepts a single (C, H, W) sample with (L, W) conditioning or a
        batch (B, C, H, W) with (B, L, W).
        """
        single = sample.dim() == 3
        if single:
            sample = sample.unsqueeze(0)
            conditioning = conditioning.unsqueeze(0)
        if not torch.is_tensor(t):
            t = torch.full((sample.shape[0],), int(t), dtype=torch.long)
        out = self.denoiser(sample, t, conditioning)
        return out.squeeze(0) if single else out

    def add_noise(self, sample: torch.Tensor, noise: torch.Tensor, t: int) -> torch.Tensor:
        return add_noise(self.schedule, sample, noise, t)


def build_backbone(kind: str, config: dict | None = None) -> ToyBackbone:
    """Instantiate a backbone by identifier string.

    Only the toy backbone ships with weights; real pretrained backbones are
    accessed through adapter objects satisfying :class:`DiffusionBackbone`
    and are a deployment concern.
    """
    if kind != "toy":
        raise ConfigurationError(
            f"unknown backbone kind {kind!r}; only 'toy' can be constructed from scratch"
        )
    cfg = ToyBackboneConfig.from_dict(config) if config else ToyBackboneConfig()
    return ToyBackbone(cfg)
