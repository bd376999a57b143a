"""Classifier-free guidance and the deterministic sampling loop."""

from __future__ import annotations

import torch

from .backbone import DiffusionBackbone
from .conditioning import ConditioningBundle
from .errors import ConfigurationError

DEFAULT_STEPS = 50
DEFAULT_GUIDANCE_SCALE = 7.5


def cfg_predict(
    backbone: DiffusionBackbone,
    sample: torch.Tensor,
    t: int,
    positive: torch.Tensor,
    negative: torch.Tensor,
    scale: float,
) -> torch.Tensor:
    """Guided prediction: negative + scale * (positive - negative).

    The endpoints are exact: scale 0 returns the negative-conditioned
    prediction itself and scale 1 the positive one, with no arithmetic
    in between.
    """
    if scale < 0:
        raise ConfigurationError(f"guidance scale must be >= 0, got {scale}")
    if positive.shape != negative.shape:
        raise ValueError(
            f"mismatched conditioning lengths: {tuple(positive.shape)} vs {tuple(negative.shape)}"
        )
    if scale == 1.0:
        return backbone.denoise(sample, t, positive)
    if scale == 0.0:
        return backbone.denoise(sample, t, negative)
    pos_pred = backbone.denoise(sample, t, positive)
    neg_pred = backbone.denoise(sample, t, negative)
    return neg_pred + scale * (pos_pred - neg_pred)


def split_prediction(
    backbone: DiffusionBackbone, prediction: torch.Tensor, noised: torch.Tensor, t: int
) -> tuple[torch.Tensor, torch.Tensor]:
    """Recover (clean-sample estimate, noise estimate) from a prediction."""
    alpha, sigma = backbone.schedule.coefficients(t)
    if backbone.prediction_kind == "sample":
        x0 = prediction
        eps = (noised - alpha * x0) / max(sigma, 1e-4)
    elif backbone.prediction_kind == "noise":
        eps = prediction
        x0 = (noised - sigma * eps) / max(alpha, 1e-4)
    else:
        raise ConfigurationError(f"unknown prediction_kind {backbone.prediction_kind!r}")
    return x0, eps


def sampling_timesteps(schedule_steps: int, steps: int) -> list[int]:
    """Evenly spaced descending timesteps from the top of the schedule to 0."""
    if steps < 1:
        raise ConfigurationError("steps must be >= 1")
    if steps == 1:
        return [schedule_steps - 1]
    raw = torch.linspace(schedule_steps - 1, 0, steps).round().to(torch.long).tolist()
    seen, out = set(), []
    for t in raw:
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def sample_image(
    backbone: DiffusionBackbone,
    bundle: ConditioningBundle,
    steps: int = DEFAULT_STEPS,
    scale: float = DEFAULT_GUIDANCE_SCALE,
    seed: int = 0,
) -> torch.Tensor:
    """Deterministic guided sampling from seeded noise.

    Runs a DDIM-style update through evenly spaced schedule timesteps and
    clamps to the valid pixel range only at the very end.  A single step
    returns the one-shot denoising estimate.
    """
    gen = torch.Generator().manual_seed(seed)
    x = torch.randn(backbone.sample_shape, generator=gen)
    ts = sampling_timesteps(backbone.schedule.timesteps, steps)
    with torch.no_grad():
        for i, t in enumerate(ts):
            pred = cfg_predict(backbone, x, t, bundle.positive, bundle.negative, scale)
            x0, eps = split_prediction(backbone, pred, x, t)
            if i + 1 == len(ts):
                x = x0
            else:
                alpha_next, sigma_next = backbone.schedule.coefficients(ts[i + 1])
                x = alpha_next * x0 + sigma_next * eps
    return x.clamp(0.0, 1.0)
