"""Two-stage disentanglement training.

Stage 1 ties every rendered image to one identity token: only the LoRA
factors and the identity embedding receive gradients, under a fixed
identity-only prompt.  Stage 2 freezes the identity and learns the word
mappers together with the LoRA factors, conditioning each sample on its
stored template with the attribute words injected.  Keeping the stages
separate prevents the degenerate solution where every attribute value is
absorbed as a new object identity.

A merged single-stage variant (everything trained jointly from scratch) is
provided as the ablation baseline.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import torch
from torch import nn

from .attributes import PositionalEncodingConfig
from .backbone import ToyBackbone, add_noise
from .conditioning import IdentityToken, PromptTemplate, build_input_embeddings, parse_template
from .data import Manifest, SampleRecord, validate_manifest
from .errors import DataError, StageViolationError
from .lora import LoRAConfig, LoRAHandle, attach_lora
from .mapper import WordMapper, init_mapper
from .render import load_image
from .validation import check_non_negative, check_positive_int, check_same_shape

logger = logging.getLogger(__name__)

DEFAULT_IDENTITY_TOKEN = "sks"
IDENTITY_ONLY_TEMPLATE = "a photo of <obj>"


@dataclass(frozen=True)
class StageConfig:
    steps: int
    learning_rate_lora: float = 1e-2
    learning_rate_embedding: float = 5e-3
    learning_rate_mapper: float = 1e-2
    batch_size: int = 4
    seed: int = 0

    def __post_init__(self):
        check_positive_int(self.steps, "steps")
        check_positive_int(self.batch_size, "batch_size")
        # Zero disables updates for a group while still computing the loss.
        for name in ("learning_rate_lora", "learning_rate_embedding", "learning_rate_mapper"):
            check_non_negative(getattr(self, name), name)

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "StageConfig":
        return cls(**d)


# Desk-scale defaults; full-scale runs use far more steps (see README).
TOY_STAGE1 = StageConfig(steps=500)
TOY_STAGE2 = StageConfig(steps=1500)


def compute_loss(prediction: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean squared error over all elements."""
    check_same_shape(prediction, target, "prediction and target")
    return ((prediction - target) ** 2).mean()


@dataclass
class TrainItem:
    record_id: str
    image: torch.Tensor
    template: PromptTemplate
    values: dict[str, float]


@dataclass
class TrainState:
    backbone: ToyBackbone
    lora: LoRAHandle
    identity: IdentityToken
    mappers: dict[str, WordMapper]
    optimizer: torch.optim.Optimizer
    noise_generator: torch.Generator
    stage: int
    step: int = 0


class _BatchSampler:
    """Seed-determined epoch shuffling, cycled for a fixed step budget."""

    def __init__(self, n_items: int, batch_size: int, seed: int):
        self.n = n_items
        self.batch_size = min(batch_size, n_items)
        self.gen = torch.Generator().manual_seed(seed)
        self._order: list[int] = []

    def next_indices(self) -> list[int]:
        while len(self._order) < self.batch_size:
            self._order.extend(torch.randperm(self.n, generator=self.gen).tolist())
        batch, self._order = self._order[: self.batch_size], self._order[self.batch_size :]
        return batch


def _assemble_positive(state: TrainState, item: TrainItem) -> torch.Tensor:
    identity = state.identity if item.template.has_obj_slot else None
    injected, _ = build_input_embeddings(
        item.template, identity, item.values, state.mappers, state.backbone
    )
    return state.backbone.encode(injected)


def _step_batch(state: TrainState, batch: Sequence[TrainItem]) -> float:
    backbone = state.backbone
    timesteps = torch.randint(
        0, backbone.schedule.timesteps, (len(batch),), generator=state.noise_generator
    )
    noised, targets, conds = [], [], []
    for item, t in zip(batch, timesteps.tolist()):
        noise = torch.randn(item.image.shape, generator=state.noise_generator)
        noised.append(add_noise(backbone.schedule, item.image, noise, t))
        targets.append(item.image if backbone.prediction_kind == "sample" else noise)
        conds.append(_assemble_positive(state, item))
    prediction = backbone.denoise(torch.stack(noised), timesteps, torch.stack(conds))
    loss = compute_loss(prediction, torch.stack(targets))
    if not torch.isfinite(loss):
        raise DataError(f"non-finite loss at step {state.step + 1}")
    state.optimizer.zero_grad()
    loss.backward()
    state.optimizer.step()
    state.step += 1
    return loss.item()


def stage1_step(state: TrainState, batch: Sequence[TrainItem]) -> float:
    """One identity-learning step; mappers must stay untouched."""
    if state.stage != 1:
        raise StageViolationError(f"stage1_step called in stage {state.stage}")
    for item in batch:
        if item.template.attr_names:
            raise StageViolationError(
                f"stage 1 batch contains attribute slots (record {item.record_id!r})"
            )
        if not item.template.has_obj_slot:
            raise StageViolationError(
                f"stage 1 prompts must carry the identity slot (record {item.record_id!r})"
            )
    return _step_batch(state, batch)


def stage2_step(state: TrainState, batch: Sequence[TrainItem]) -> float:
    """One attribute-learning step; the identity embedding must stay frozen."""
    if state.stage != 2:
        raise StageViolationError(f"stage2_step called in stage {state.stage}")
    for item in batch:
        if not item.template.attr_names:
            raise StageViolationError(
                f"stage 2 batch item has no attribute slots (record {item.record_id!r})"
            )
        for name in item.template.attr_names:
            if name not in item.values:
                raise DataError(
                    f"record {item.record_id!r} is missing a value for attribute {name!r}"
                )
    if state.identity.embedding.requires_grad:
        raise StageViolationError("identity embedding must be frozen in stage 2")
    return _step_batch(state, batch)


# --------------------------------------------------------------------------
# Loop drivers

@dataclass
class TrainLogEntry:
    step: int
    stage: int
    loss: float
    timestamp: float

    def to_json(self) -> str:
        return json.dumps(
            {"step": self.step, "stage": self.stage, "loss": self.loss, "timestamp": self.timestamp}
        )


@dataclass
class TrainResult:
    backbone: ToyBackbone
    lora: LoRAHandle
    identity: IdentityToken
    mappers: dict[str, WordMapper]
    log: list[TrainLogEntry] = field(default_factory=list)


def _load_items(manifest: Manifest, records: Iterable[SampleRecord]) -> list[TrainItem]:
    names = manifest.registry.names()
    items = []
    for rec in records:
        image = torch.from_numpy(load_image(manifest.resolve(rec.rgb_path))).float()
        items.append(
            TrainItem(
                record_id=rec.id,
                image=image,
                template=parse_template(rec.prompt_template, names),
                values=dict(rec.attributes),
            )
        )
    return items


def _init_components(
    manifest: Manifest,
    backbone: ToyBackbone,
    lora_config: LoRAConfig,
    seed: int,
    pe_config: PositionalEncodingConfig,
    identity_token: str,
) -> tuple[LoRAHandle, IdentityToken, dict[str, WordMapper]]:
    handle = attach_lora(backbone, lora_config)
    gen = torch.Generator().manual_seed(seed)
    embedding = nn.Parameter(
        torch.empty(backbone.embedding_width).normal_(
            0.0, backbone.config.embedding_init_std, generator=gen
        )
    )
    identity = IdentityToken(identity_token, embedding)
    identity.validate(backbone)
    mappers = {
        spec.name: init_mapper(
            [spec],
            pe_config,
            hidden_dim=backbone.embedding_width,
            output_dim=backbone.embedding_width,
            seed=seed + 1 + i,
        )
        for i, spec in enumerate(manifest.registry)
    }
    return handle, identity, mappers


def _run_stage(
    state: TrainState,
    items: list[TrainItem],
    cfg: StageConfig,
    log: list[TrainLogEntry],
    step_fn,
    log_every: int = 50,
) -> None:
    sampler = _BatchSampler(len(items), cfg.batch_size, cfg.seed)
    for _ in range(cfg.steps):
        batch = [items[i] for i in sampler.next_indices()]
        loss = step_fn(state, batch)
        entry = TrainLogEntry(step=state.step, stage=state.stage, loss=loss, timestamp=time.time())
        log.append(entry)
        if state.step % log_every == 0 or state.step == 1:
            logger.info("stage %d step %d loss %.5f", state.stage, state.step, loss)


def _validated_items(manifest: Manifest) -> None:
    if not manifest.records:
        raise DataError("manifest contains no records")
    violations = validate_manifest(manifest)
    if violations:
        raise DataError("invalid manifest:\n" + "\n".join(violations))


def _make_optimizer(groups: list[dict]) -> torch.optim.Optimizer:
    return torch.optim.AdamW(groups, betas=(0.9, 0.999))


def train(
    manifest: Manifest,
    stage1: StageConfig = TOY_STAGE1,
    stage2: StageConfig = TOY_STAGE2,
    backbone: ToyBackbone | None = None,
    lora_config: LoRAConfig = LoRAConfig(),
    pe_config: PositionalEncodingConfig = PositionalEncodingConfig(),
    identity_token: str = DEFAULT_IDENTITY_TOKEN,
    log_path: str | Path | None = None,
) -> TrainResult:
    """Run the full two-stage procedure over a validated manifest."""
    _validated_items(manifest)
    backbone = backbone or ToyBackbone()
    handle, identity, mappers = _init_components(
        manifest, backbone, lora_config, stage1.seed, pe_config, identity_token
    )
    log: list[TrainLogEntry] = []

    # Stage 1: identity only, over rendered records with a fixed identity prompt.
    identity_template = parse_template(IDENTITY_ONLY_TEMPLATE)
    stage1_items = [
        TrainItem(it.record_id, it.image, identity_template, {})
        for it in _load_items(manifest, manifest.rendered())
    ]
    optimizer = _make_optimizer(
        [
            {"params": list(handle.parameters()), "lr": stage1.learning_rate_lora, "weight_decay": 1e-2},
            {"params": [identity.embedding], "lr": stage1.learning_rate_embedding, "weight_decay": 0.0},
        ]
    )
    state = TrainState(
        backbone=backbone,
        lora=handle,
        identity=identity,
        mappers=mappers,
        optimizer=optimizer,
        noise_generator=torch.Generator().manual_seed(stage1.seed),
        stage=1,
    )
    _run_stage(state, stage1_items, stage1, log, stage1_step)

    # Stage 2: freeze identity, learn mappers + LoRA over all records.
    identity.embedding.requires_grad_(False)
    mapper_params = [p for m in mappers.values() for p in m.parameters()]
    state.optimizer = _make_optimizer(
        [
            {"params": list(handle.parameters()), "lr": stage2.learning_rate_lora, "weight_decay": 1e-2},
            {"params": mapper_params, "lr": stage2.learning_rate_mapper, "weight_decay": 0.0},
        ]
    )
    state.stage = 2
    state.noise_generator = torch.Generator().manual_seed(stage2.seed + 1)
    stage2_items = _load_items(manifest, manifest.records)
    _run_stage(state, stage2_items, stage2, log, stage2_step)

    if log_path is not None:
        write_training_log(log, log_path)
    return TrainResult(backbone=backbone, lora=handle, identity=identity, mappers=mappers, log=log)


def train_single_stage(
    manifest: Manifest,
    total: StageConfig,
    backbone: ToyBackbone | None = None,
    lora_config: LoRAConfig = LoRAConfig(),
    pe_config: PositionalEncodingConfig = PositionalEncodingConfig(),
    identity_token: str = DEFAULT_IDENTITY_TOKEN,
    log_path: str | Path | None = None,
) -> TrainResult:
    """Ablation baseline: identity, LoRA, and mappers optimized jointly.

    Uses the same attribute-slot conditioning as stage 2 but starts from
    scratch, spending the whole step budget in one merged stage.
    """
    _validated_items(manifest)
    backbone = backbone or ToyBackbone()
    handle, identity, mappers = _init_components(
        manifest, backbone, lora_config, total.seed, pe_config, identity_token
    )
    mapper_params = [p for m in mappers.values() for p in m.parameters()]
    optimizer = _make_optimizer(
        [
            {"params": list(handle.parameters()), "lr": total.learning_rate_lora, "weight_decay": 1e-2},
            {"params": [identity.embedding], "lr": total.learning_rate_embedding, "weight_decay": 0.0},
            {"params": mapper_params, "lr": total.learning_rate_mapper, "weight_decay": 0.0},
        ]
    )
    state = TrainState(
        backbone=backbone,
        lora=handle,
        identity=identity,
        mappers=mappers,
        optimizer=optimizer,
        noise_generator=torch.Generator().manual_seed(total.seed),
        stage=2,
    )
    # Merged objective: accept any template, no stage checks beyond data sanity.
    items = _load_items(manifest, manifest.records)
    log: list[TrainLogEntry] = []
    _run_stage(state, items, total, log, lambda s, b: _step_batch(s, b))
    if log_path is not None:
        write_training_log(log, log_path)
    return TrainResult(backbone=backbone, lora=handle, identity=identity, mappers=mappers, log=log)


def write_training_log(log: Sequence[TrainLogEntry], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for entry in log:
            fh.write(entry.to_json() + "\n")
