"""Estimator-style front door for the whole pipeline.

:class:`ContinuousWordsModel` follows the scikit-learn estimator protocol:
constructor arguments are hyperparameters (``get_params``/``set_params``
work, the object is ``clone``-able), ``fit`` consumes a dataset manifest and
returns ``self`` with trailing-underscore fitted state, and generation plays
the role of inference.  Under the hood it drives the two-stage trainer and
the deterministic sampler.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .attributes import PositionalEncodingConfig
from .backbone import ToyBackbone
from .checkpoint import ModelBundle, bundle_from_result, load_checkpoint, save_checkpoint
from .data import Manifest, load_manifest
from .lora import LoRAConfig
from .sampling import DEFAULT_GUIDANCE_SCALE, DEFAULT_STEPS
from .training import StageConfig, train


class ContinuousWordsModel(BaseEstimator):
    """Learn continuous attribute words from a rendered + augmented manifest.

    Parameters mirror the two stage configs plus the adaptation settings;
    ``fit`` runs stage 1 (identity) then stage 2 (mappers + LoRA) on the toy
    backbone and keeps the resulting model in ``bundle_``.
    """

    def __init__(
        self,
        stage1_steps: int = 500,
        stage2_steps: int = 1500,
        learning_rate_lora: float = 1e-2,
        learning_rate_embedding: float = 5e-3,
        learning_rate_mapper: float = 1e-2,
        batch_size: int = 4,
        lora_rank: int = 4,
        lora_alpha: float = 4.0,
        pe_frequencies: int = 3,
        seed: int = 0,
    ):
        self.stage1_steps = stage1_steps
        self.stage2_steps = stage2_steps
        self.learning_rate_lora = learning_rate_lora
        self.learning_rate_embedding = learning_rate_embedding
        self.learning_rate_mapper = learning_rate_mapper
        self.batch_size = batch_size
        self.lora_rank = lora_rank
        self.lora_alpha = lora_alpha
        self.pe_frequencies = pe_frequencies
        self.seed = seed

    def _stage_config(self, steps: int) -> StageConfig:
        return StageConfig(
            steps=steps,
            learning_rate_lora=self.learning_rate_lora,
            learning_rate_embedding=self.learning_rate_embedding,
            learning_rate_mapper=self.learning_rate_mapper,
            batch_size=self.batch_size,
            seed=self.seed,
        )

    def fit(self, manifest: Manifest | str | Path, y=None) -> "ContinuousWordsModel":
        """Run the two-stage training over a manifest (object or path)."""
        if not isinstance(manifest, Manifest):
            manifest = load_manifest(manifest)
        result = train(
            manifest,
            stage1=self._stage_config(self.stage1_steps),
            stage2=self._stage_config(self.stage2_steps),
            backbone=ToyBackbone(),
            lora_config=LoRAConfig(rank=self.lora_rank, alpha=self.lora_alpha, seed=self.seed),
            pe_config=PositionalEncodingConfig(num_frequencies=self.pe_frequencies),
        )
        self.bundle_ = bundle_from_result(result, manifest.registry)
        self.training_log_ = result.log
        return self

    def _require_fitted(self) -> ModelBundle:
        if not hasattr(self, "bundle_"):
            raise NotFittedError("this ContinuousWordsModel is not fitted; call fit() or load()")
        return self.bundle_

    def generate(
        self,
        template: str,
        values: Mapping[str, float] | None = None,
        seed: int = 0,
        steps: int = DEFAULT_STEPS,
        guidance_scale: float = DEFAULT_GUIDANCE_SCALE,
        negative_mode: str = "null_text",
    ) -> np.ndarray:
        """Generate one image as a (3, H, W) float array in [0, 1]."""
        image, _ = self._require_fitted().generate(
            template,
            values,
            seed=seed,
            steps=steps,
            guidance_scale=guidance_scale,
            negative_mode=negative_mode,
        )
        return image.numpy()

    def save(self, path: str | Path) -> Path:
        bundle = self._require_fitted()
        result_like = _BundleResult(bundle)
        return save_checkpoint(result_like, bundle.registry, path)

    def load(self, path: str | Path) -> "ContinuousWordsModel":
        """Populate fitted state from a checkpoint archive."""
        self.bundle_ = load_checkpoint(path)
        self.training_log_ = []
        return self


class _BundleResult:
    """Adapts a ModelBundle to the TrainResult field set save_checkpoint uses."""

    def __init__(self, bundle: ModelBundle):
        self.backbone = bundle.backbone
        self.lora = bundle.lora
        self.identity = bundle.identity
        self.mappers = bundle.mappers
        self.log = []
