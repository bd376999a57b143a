"""Conditioner-driven training-set augmentation.

Each rendered record is re-imagined by an image conditioner (a ControlNet
stand-in): the structural condition map (depth or lineart) pins the object
while prompt and seed vary background and texture.  Attribute annotations are
copied from the parent untouched, so augmented images teach the trainer that
backgrounds are free but attributes are not.
"""

from __future__ import annotations

import itertools
import logging
import re
import zlib
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np
from scipy import ndimage

from .conditioning import AttrSlot, parse_template
from .data import Manifest, SampleRecord, extend_manifest
from .errors import ConfigurationError, DataError
from .render import lineart_extract, load_image, save_image

logger = logging.getLogger(__name__)

# Default lineart conditioning strength; weaker guidance keeps shading cues
# from dominating the generated object.
DEFAULT_LINEART_STRENGTH = 0.6
DEFAULT_DEPTH_STRENGTH = 1.0

# Shipped prompt-pool patterns; {a, b} groups expand to all combinations.
PROMPT_POOL_PATTERNS = {
    "wing_pose": "a bird {with two wings, flying} on a {rainy, sunny} day",
    "dolly_zoom": "a chair {in the Acropolis, in a forest, under the snow, on a beach, in Times Square, in a department store}",
    "illumination": "a {white, gray, brown} dog",
}

_GROUP_RE = re.compile(r"\{([^{}]*)\}")


def expand_prompt_pattern(pattern: str) -> list[str]:
    """Expand every ``{a, b, c}`` group into its alternatives, Cartesian-style."""
    groups = _GROUP_RE.findall(pattern)
    if not groups:
        return [pattern]
    options = [[opt.strip() for opt in g.split(",")] for g in groups]
    template = _GROUP_RE.sub("{}", pattern)
    return [template.format(*combo) for combo in itertools.product(*options)]


def default_prompt_pool(kind: str) -> list[str]:
    if kind not in PROMPT_POOL_PATTERNS:
        raise ConfigurationError(f"no shipped prompt pool named {kind!r}")
    return expand_prompt_pattern(PROMPT_POOL_PATTERNS[kind])


@dataclass(frozen=True)
class AugmentationPolicy:
    conditioner_kind: str  # "depth" | "lineart"
    prompt_pool: tuple[str, ...]
    guidance_strength: float | None = None
    augment_ratio: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.conditioner_kind not in ("depth", "lineart"):
            raise ConfigurationError(f"unknown conditioner kind {self.conditioner_kind!r}")
        if not self.prompt_pool:
            raise ConfigurationError("prompt_pool must not be empty")
        if self.augment_ratio < 0:
            raise ConfigurationError("augment_ratio must be >= 0")
        strength = self.resolved_strength
        if not 0.0 < strength <= 1.0:
            raise ConfigurationError(f"guidance_strength must lie in (0, 1], got {strength}")

    @property
    def resolved_strength(self) -> float:
        if self.guidance_strength is not None:
            return self.guidance_strength
        return DEFAULT_LINEART_STRENGTH if self.conditioner_kind == "lineart" else DEFAULT_DEPTH_STRENGTH


@runtime_checkable
class ImageConditioner(Protocol):
    """Turns a structural condition map plus a prompt into an image."""

    def generate(
        self, condition: np.ndarray, prompt: str, strength: float, seed: int
    ) -> np.ndarray: ...


class ToyConditioner:
    """Deterministic conditioner: recolors the conditioned shape over a fresh
    cluttered background chosen by (prompt, seed).

    Backgrounds carry a tinted gradient, texture noise, and a few dimmer
    distractor blobs, so training sees appearance variation the model must
    learn to separate from the conditioned object."""

    PALETTE = (
        (0.95, 0.70, 0.55),
        (0.65, 0.95, 0.65),
        (0.65, 0.75, 0.98),
        (0.95, 0.92, 0.60),
        (0.92, 0.70, 0.92),
    )
    DISTRACTOR_PALETTE = (
        (0.55, 0.65, 0.70),
        (0.68, 0.58, 0.50),
        (0.52, 0.70, 0.58),
    )

    def __init__(self, mask_threshold: float = 0.15, noise_amplitude: float = 0.03):
        self.mask_threshold = mask_threshold
        self.noise_amplitude = noise_amplitude

    def generate(self, condition: np.ndarray, prompt: str, strength: float, seed: int) -> np.ndarray:
        cond = np.asarray(condition, dtype=np.float64)
        if cond.ndim != 2:
            raise DataError("condition map must be single-channel")
        rng = np.random.default_rng([seed, zlib.crc32(prompt.encode("utf-8"))])

        raw = cond > self.mask_threshold
        mask = ndimage.binary_erosion(
            ndimage.binary_fill_holes(ndimage.binary_dilation(raw))
        )

        h, w = cond.shape
        ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
        base = rng.uniform(0.15, 0.35)
        slope_x, slope_y = rng.uniform(-0.10, 0.10, size=2)
        tint = rng.uniform(0.85, 1.15, size=3)
        background = np.empty((3, h, w), dtype=np.float64)
        gradient = base + slope_x * xs / w + slope_y * ys / h
        gradient = gradient + rng.normal(0.0, self.noise_amplitude, size=cond.shape)
        for c in range(3):
            background[c] = np.clip(gradient * tint[c], 0.0, 1.0)

        for _ in range(int(rng.integers(1, 3))):
            bx, by = rng.uniform(0, w - 1), rng.uniform(0, h - 1)
            radius = rng.uniform(2.0, 3.5)
            blob = np.clip(radius + 0.5 - np.hypot(xs - bx, ys - by), 0.0, 1.0)
            blob_color = self.DISTRACTOR_PALETTE[rng.integers(len(self.DISTRACTOR_PALETTE))]
            for c in range(3):
                background[c] += blob * (blob_color[c] - background[c])

        color = self.PALETTE[rng.integers(len(self.PALETTE))]
        img = np.empty((3, h, w), dtype=np.float64)
        for c in range(3):
            structured = np.where(mask, color[c], background[c])
            img[c] = strength * structured + (1.0 - strength) * background[c]
        return np.clip(img, 0.0, 1.0).astype(np.float32)


def _condition_map(manifest: Manifest, record: SampleRecord, kind: str) -> np.ndarray:
    if kind == "depth":
        if record.depth_path is None:
            raise DataError(f"record {record.id!r} has no depth map")
        return load_image(manifest.resolve(record.depth_path))
    if record.lineart_path is not None:
        return load_image(manifest.resolve(record.lineart_path))
    return lineart_extract(load_image(manifest.resolve(record.rgb_path)))


def _attr_slot_prefix(template_str: str, registry_names: list[str]) -> str:
    template = parse_template(template_str, registry_names)
    return " ".join(f"<attr:{s.name}>" for s in template.segments if isinstance(s, AttrSlot))


def augment(
    manifest: Manifest,
    policy: AugmentationPolicy,
    conditioner: ImageConditioner,
) -> Manifest:
    """Extend a manifest with conditioner-generated variants of rendered records.

    Per rendered record, ``round(augment_ratio)`` images are generated with
    prompts drawn (seeded) from the policy pool.  Augmented records train
    with that prompt, prefixed by the parent's attribute slots; they carry
    the parent id and bitwise-identical attribute values.  Conditioner
    failures skip the record with a warning and are summarized at the end.
    """
    per_record = round(policy.augment_ratio)
    rng = np.random.default_rng(policy.seed)
    strength = policy.resolved_strength
    names = manifest.registry.names()

    new_records: list[SampleRecord] = []
    failures: list[str] = []
    for record in sorted(manifest.rendered(), key=lambda r: r.id):
        prefix = _attr_slot_prefix(record.prompt_template, names)
        for k in range(per_record):
            prompt = policy.prompt_pool[rng.integers(len(policy.prompt_pool))]
            item_seed = int(rng.integers(2**31 - 1))
            try:
                condition = _condition_map(manifest, record, policy.conditioner_kind)
                image = conditioner.generate(condition, prompt, strength, item_seed)
            except Exception as e:  # a single bad item must not kill the run
                logger.warning("augmentation failed for %s: %s", record.id, e)
                failures.append(record.id)
                continue
            aug_id = f"{record.id}-aug{k:02d}"
            rel = f"images/{aug_id}.png"
            save_image(image, manifest.resolve(rel))
            new_records.append(
                SampleRecord(
                    id=aug_id,
                    rgb_path=rel,
                    attributes=dict(record.attributes),
                    prompt_template=f"{prefix} {prompt}".strip(),
                    source="augmented",
                    parent_id=record.id,
                )
            )
    if failures:
        logger.warning(
            "augmentation skipped %d item(s): %s", len(failures), ", ".join(sorted(set(failures)))
        )
    return extend_manifest(manifest, new_records)
