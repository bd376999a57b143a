"""Self-describing checkpoint archives and the loaded-model runtime bundle.

A checkpoint stores everything needed to regenerate images: the backbone
identifier and config (toy backbones rebuild their frozen base weights from
the stored seed), the noise-schedule metadata, the attribute registry, the
identity token and embedding, per-slot mapper weights, and per-layer LoRA
factors.  One ``torch.save`` archive, one version field.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
import torch

from .attributes import AttributeRegistry, AttributeSpec, PositionalEncodingConfig, normalize
from .backbone import ToyBackbone, build_backbone
from .conditioning import IdentityToken, assemble_conditioning, parse_template
from .errors import CheckpointError, DataError
from .lora import LoRAConfig, LoRAHandle, attach_lora
from .mapper import WordMapper
from .sampling import DEFAULT_GUIDANCE_SCALE, DEFAULT_STEPS, sample_image
from .training import TrainResult

CHECKPOINT_VERSION = 1


def save_checkpoint(result: TrainResult, registry: AttributeRegistry, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    backbone = result.backbone
    doc = {
        "version": CHECKPOINT_VERSION,
        "backbone": {"kind": "toy", "config": backbone.config.to_dict()},
        "schedule": backbone.schedule.to_dict(),
        "registry": registry.to_list(),
        "identity": {
            "token": result.identity.token_string,
            "embedding": result.identity.embedding.detach().clone(),
        },
        "mappers": {
            slot: {
                "attributes": [spec.to_dict() for spec in mapper.specs],
                "pe": mapper.pe_config.to_dict(),
                "hidden_dim": mapper.hidden_dim,
                "output_dim": mapper.output_dim,
                "state": {k: v.detach().clone() for k, v in mapper.state_dict().items()},
            }
            for slot, mapper in result.mappers.items()
        },
        "lora": {"config": result.lora.config.to_dict(), "state": result.lora.state_dict()},
    }
    torch.save(doc, path)
    return path


@dataclass
class ModelBundle:
    """A checkpoint materialized in memory, ready for generation."""

    backbone: ToyBackbone
    lora: LoRAHandle
    identity: IdentityToken
    mappers: dict[str, WordMapper]
    registry: AttributeRegistry
    version: int
    backbone_kind: str

    def generate(
        self,
        template: str,
        values: Mapping[str, float] | None = None,
        seed: int = 0,
        steps: int = DEFAULT_STEPS,
        guidance_scale: float = DEFAULT_GUIDANCE_SCALE,
        negative_mode: str = "null_text",
    ) -> tuple[torch.Tensor, dict[str, float]]:
        """Render one image; returns (image, resolved attribute values)."""
        parsed = parse_template(template, self.registry.names())
        values = dict(values or {})
        resolved = self.registry.validate_values(values)
        for name in parsed.attr_names:
            if name not in self.mappers:
                raise DataError(f"checkpoint has no mapper for attribute {name!r}")
            for consumed in self.mappers[name].attribute_names:
                if consumed not in resolved:
                    raise DataError(f"missing value for attribute {consumed!r}")
        identity = self.identity if parsed.has_obj_slot else None
        bundle = assemble_conditioning(
            parsed,
            identity,
            resolved,
            self.mappers,
            self.backbone,
            negative_mode=negative_mode,
            negative_identity=self.identity,
        )
        image = sample_image(self.backbone, bundle, steps=steps, scale=guidance_scale, seed=seed)
        return image, resolved

    def sweep(
        self,
        template: str,
        values: Mapping[str, float] | None = None,
        sweep_attribute: str = "",
        start: float = 0.0,
        stop: float = 1.0,
        frames: int = 2,
        seed: int = 0,
        steps: int = DEFAULT_STEPS,
        guidance_scale: float = DEFAULT_GUIDANCE_SCALE,
        negative_mode: str = "null_text",
    ) -> list[tuple[float, torch.Tensor]]:
        """Generate frames along one attribute, same seed for every frame."""
        if frames < 2:
            raise DataError("a sweep needs at least 2 frames")
        spec = self.registry.get(sweep_attribute)
        for endpoint in (start, stop):
            normalize(spec, endpoint)  # raises DomainViolationError when outside
        out = []
        for value in np.linspace(start, stop, frames):
            frame_values = dict(values or {})
            frame_values[sweep_attribute] = float(value)
            image, _ = self.generate(
                template,
                frame_values,
                seed=seed,
                steps=steps,
                guidance_scale=guidance_scale,
                negative_mode=negative_mode,
            )
            out.append((float(value), image))
        return out

    def lora_parameter_count(self) -> int:
        return self.lora.parameter_count()

    def base_parameter_count(self) -> int:
        return self.lora.base_parameter_count()


def bundle_from_result(result: TrainResult, registry: AttributeRegistry) -> ModelBundle:
    return ModelBundle(
        backbone=result.backbone,
        lora=result.lora,
        identity=result.identity,
        mappers=dict(result.mappers),
        registry=registry,
        version=CHECKPOINT_VERSION,
        backbone_kind="toy",
    )


def load_checkpoint(path: str | Path) -> ModelBundle:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint {path} does not exist")
    try:
        doc = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise CheckpointError(f"cannot load checkpoint {path}: {e}") from e
    if not isinstance(doc, dict) or doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version in {path}")

    backbone = build_backbone(doc["backbone"]["kind"], doc["backbone"]["config"])
    handle = attach_lora(backbone, LoRAConfig.from_dict(doc["lora"]["config"]))
    handle.load_state_dict(doc["lora"]["state"])

    identity = IdentityToken(doc["identity"]["token"], doc["identity"]["embedding"].clone())
    identity.validate(backbone)

    mappers = {}
    for slot, m in doc["mappers"].items():
        mapper = WordMapper(
            [AttributeSpec.from_dict(d) for d in m["attributes"]],
            PositionalEncodingConfig.from_dict(m["pe"]),
            hidden_dim=int(m["hidden_dim"]),
            output_dim=int(m["output_dim"]),
        )
        mapper.load_state_dict(m["state"])
        mapper.requires_grad_(False)
        mappers[slot] = mapper

    registry = AttributeRegistry.from_list(doc["registry"])
    return ModelBundle(
        backbone=backbone,
        lora=handle,
        identity=identity,
        mappers=mappers,
        registry=registry,
        version=doc["version"],
        backbone_kind=doc["backbone"]["kind"],
    )
