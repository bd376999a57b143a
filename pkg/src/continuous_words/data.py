"""Dataset manifests and attribute-grid sampling.

A manifest is a single JSON document holding an attribute-registry snapshot
and a list of sample records with paths relative to the manifest location.
Rendered records come from a renderer and carry an ``<obj>`` template;
augmented records point back at their rendered parent and share its
attribute values exactly.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .attributes import AttributeRegistry, AttributeSpec, AttributeValue, normalize
from .conditioning import parse_template
from .errors import ContinuousWordsError, DataError

MANIFEST_VERSION = 1


@dataclass(frozen=True)
class SampleRecord:
    id: str
    rgb_path: str
    attributes: dict[str, float]
    prompt_template: str
    source: str  # "rendered" | "augmented"
    depth_path: str | None = None
    lineart_path: str | None = None
    parent_id: str | None = None

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "rgb_path": self.rgb_path,
            "attributes": self.attributes,
            "prompt_template": self.prompt_template,
            "source": self.source,
        }
        if self.depth_path is not None:
            d["depth_path"] = self.depth_path
        if self.lineart_path is not None:
            d["lineart_path"] = self.lineart_path
        if self.parent_id is not None:
            d["parent_id"] = self.parent_id
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SampleRecord":
        return cls(
            id=d["id"],
            rgb_path=d["rgb_path"],
            attributes={k: float(v) for k, v in d["attributes"].items()},
            prompt_template=d["prompt_template"],
            source=d["source"],
            depth_path=d.get("depth_path"),
            lineart_path=d.get("lineart_path"),
            parent_id=d.get("parent_id"),
        )


@dataclass
class Manifest:
    registry: AttributeRegistry
    records: list[SampleRecord] = field(default_factory=list)
    version: int = MANIFEST_VERSION
    root: Path | None = None

    def resolve(self, rel_path: str) -> Path:
        if self.root is None:
            raise DataError("manifest has no root directory; save or load it first")
        return self.root / rel_path

    def rendered(self) -> list[SampleRecord]:
        return [r for r in self.records if r.source == "rendered"]

    def by_id(self) -> dict[str, SampleRecord]:
        return {r.id: r for r in self.records}


def save_manifest(manifest: Manifest, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "version": manifest.version,
        "attributes": manifest.registry.to_list(),
        "records": [r.to_dict() for r in manifest.records],
    }
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    manifest.root = path.parent
    return path


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise DataError(f"cannot read manifest {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise DataError(f"manifest {path} is not valid JSON: {e}") from e
    if doc.get("version") != MANIFEST_VERSION:
        raise DataError(f"unsupported manifest version {doc.get('version')!r}")
    return Manifest(
        registry=AttributeRegistry.from_list(doc["attributes"]),
        records=[SampleRecord.from_dict(r) for r in doc["records"]],
        version=doc["version"],
        root=path.parent,
    )


def sample_attribute_grid(specs: Sequence[AttributeSpec], n: int) -> list[AttributeValue]:
    """Evenly spaced grid over each attribute domain, Cartesian across specs.

    Non-periodic attributes include both endpoints; periodic ones drop the
    duplicate endpoint so the grid tiles the circle evenly.
    """
    if n < 2:
        raise DataError("grid size must be >= 2")
    axes = []
    for spec in specs:
        if spec.periodic:
            values = spec.domain_min + spec.span * np.arange(n) / n
        else:
            values = np.linspace(spec.domain_min, spec.domain_max, n)
        axes.append([float(v) for v in values])
    names = [spec.name for spec in specs]
    return [
        AttributeValue(dict(zip(names, combo)))
        for combo in itertools.product(*axes)
    ]


def validate_manifest(manifest: Manifest) -> list[str]:
    """Collect consistency violations; an empty list means the manifest is valid."""
    violations: list[str] = []
    seen: set[str] = set()
    for rec in manifest.records:
        if rec.id in seen:
            violations.append(f"duplicate record id {rec.id!r}")
        seen.add(rec.id)

    registry = manifest.registry
    by_id = {}
    for rec in manifest.records:
        by_id.setdefault(rec.id, rec)

    for rec in manifest.records:
        for rel in (rec.rgb_path, rec.depth_path, rec.lineart_path):
            if rel is not None and manifest.root is not None and not manifest.resolve(rel).exists():
                violations.append(f"record {rec.id!r}: missing file {rel!r}")
        for name, value in rec.attributes.items():
            if name not in registry:
                violations.append(f"record {rec.id!r}: attribute {name!r} not registered")
            else:
                try:
                    normalize(registry.get(name), value)
                except ContinuousWordsError:
                    violations.append(f"record {rec.id!r}: value {value} outside domain of {name!r}")
        try:
            template = parse_template(rec.prompt_template, registry.names())
        except ContinuousWordsError as e:
            violations.append(f"record {rec.id!r}: bad template: {e}")
            continue
        if rec.source == "rendered":
            if not template.has_obj_slot:
                violations.append(f"record {rec.id!r}: rendered record lacks an <obj> slot")
            if rec.parent_id is not None:
                violations.append(f"record {rec.id!r}: rendered record must not have a parent")
        elif rec.source == "augmented":
            parent = by_id.get(rec.parent_id) if rec.parent_id else None
            if parent is None:
                violations.append(f"record {rec.id!r}: augmented record has no valid parent")
            else:
                if parent.source != "rendered":
                    violations.append(f"record {rec.id!r}: parent {rec.parent_id!r} is not rendered")
                if parent.attributes != rec.attributes:
                    violations.append(
                        f"record {rec.id!r}: attributes differ from parent {rec.parent_id!r}"
                    )
        else:
            violations.append(f"record {rec.id!r}: unknown source {rec.source!r}")
    return violations


def extend_manifest(manifest: Manifest, new_records: Sequence[SampleRecord]) -> Manifest:
    """A copy of the manifest with extra records appended, ordered by id."""
    records = sorted([*manifest.records, *new_records], key=lambda r: r.id)
    return replace(manifest, records=records)
