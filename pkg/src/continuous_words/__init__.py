"""Continuous attribute words for text-conditioned diffusion models."""

from .attributes import (
    AttributeRegistry,
    AttributeSpec,
    AttributeValue,
    PositionalEncodingConfig,
    denormalize,
    normalize,
    positional_encode,
)
from .augment import AugmentationPolicy, ToyConditioner, augment, default_prompt_pool
from .backbone import DiffusionBackbone, NoiseSchedule, ToyBackbone, ToyBackboneConfig, add_noise
from .checkpoint import ModelBundle, load_checkpoint, save_checkpoint
from .conditioning import (
    ConditioningBundle,
    IdentityToken,
    PromptTemplate,
    assemble_conditioning,
    negative_conditioning,
    parse_template,
)
from .data import (
    Manifest,
    SampleRecord,
    load_manifest,
    sample_attribute_grid,
    save_manifest,
    validate_manifest,
)
from .estimator import ContinuousWordsModel
from .lora import LoRAConfig, attach_lora
from .mapper import WordMapper, init_mapper, lipschitz_bound, map_to_embedding
from .render import ToyRenderer, lineart_extract, render_toy
from .sampling import cfg_predict, sample_image
from .training import StageConfig, compute_loss, train, train_single_stage

__version__ = "0.1.0"

__all__ = [
    "AttributeRegistry",
    "AttributeSpec",
    "AttributeValue",
    "AugmentationPolicy",
    "ConditioningBundle",
    "ContinuousWordsModel",
    "DiffusionBackbone",
    "IdentityToken",
    "LoRAConfig",
    "Manifest",
    "ModelBundle",
    "NoiseSchedule",
    "PositionalEncodingConfig",
    "PromptTemplate",
    "SampleRecord",
    "StageConfig",
    "ToyBackbone",
    "ToyBackboneConfig",
    "ToyConditioner",
    "ToyRenderer",
    "WordMapper",
    "add_noise",
    "assemble_conditioning",
    "attach_lora",
    "augment",
    "cfg_predict",
    "compute_loss",
    "default_prompt_pool",
    "denormalize",
    "init_mapper",
    "lineart_extract",
    "lipschitz_bound",
    "load_checkpoint",
    "load_manifest",
    "map_to_embedding",
    "negative_conditioning",
    "normalize",
    "parse_template",
    "positional_encode",
    "render_toy",
    "sample_attribute_grid",
    "sample_image",
    "save_checkpoint",
    "save_manifest",
    "train",
    "train_single_stage",
    "validate_manifest",
]
