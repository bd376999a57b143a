"""Command-line pipeline: render-toy, augment, train, generate, sweep, serve, inspect.

Human-readable text goes to stdout, logs to stderr; every command accepts
``--json`` for machine-readable output and is deterministic for a fixed
``--seed``.  Config files are YAML; explicit flags override file values,
which override built-in defaults.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
import yaml

from .attributes import AttributeRegistry, AttributeSpec
from .augment import AugmentationPolicy, ToyConditioner, augment, default_prompt_pool
from .checkpoint import load_checkpoint, save_checkpoint
from .data import load_manifest, sample_attribute_grid, save_manifest
from .errors import ConfigurationError, ContinuousWordsError
from .render import render_toy, save_image
from .sampling import DEFAULT_GUIDANCE_SCALE, DEFAULT_STEPS
from .training import StageConfig, train


def _emit(payload: dict, as_json: bool, human: str) -> None:
    if as_json:
        click.echo(json.dumps(payload))
    else:
        click.echo(human)


def _load_yaml(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as e:
        raise ConfigurationError(f"cannot read config {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"config {path} must be a mapping")
    return data


def _parse_assignments(pairs: tuple[str, ...]) -> dict[str, float]:
    values = {}
    for pair in pairs:
        name, sep, raw = pair.partition("=")
        if not sep:
            raise ConfigurationError(f"--set expects name=value, got {pair!r}")
        try:
            values[name.strip()] = float(raw)
        except ValueError:
            raise ConfigurationError(f"--set value for {name!r} is not a number: {raw!r}") from None
    return values


def _stage_config(file_path: str | None, overrides: dict) -> StageConfig:
    data = _load_yaml(file_path)
    known = {"steps", "learning_rate_lora", "learning_rate_embedding",
             "learning_rate_mapper", "batch_size", "seed"}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown stage-config keys: {sorted(unknown)}")
    merged = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    if "steps" not in merged:
        raise ConfigurationError("stage config needs 'steps' (file key or flag)")
    return StageConfig(**merged)


def _registry_from_file(path: str) -> AttributeRegistry:
    data = _load_yaml(path)
    items = data.get("attributes")
    if not items:
        raise ConfigurationError(f"attribute spec {path!r} has no 'attributes' list")
    specs = [
        AttributeSpec(
            name=item["name"],
            domain_min=float(item["min"]),
            domain_max=float(item["max"]),
            periodic=bool(item.get("periodic", False)),
            default_grid_size=int(item.get("grid_size", 18)),
        )
        for item in items
    ]
    return AttributeRegistry(specs)


@click.group()
def main():
    """Continuous attribute words for text-to-image generation."""
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")


def _wrap_errors(fn):
    """Map package errors to clean CLI failures (nonzero exit, stderr)."""
    import functools

    @functools.wraps(fn)
    def inner(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ContinuousWordsError as e:
            raise click.ClickException(str(e)) from e

    return inner


@main.command("render-toy")
@click.option("--attributes", "attributes_file", required=True, type=click.Path(exists=True),
              help="YAML file declaring the attribute registry.")
@click.option("--grid", type=int, default=None, help="Grid points per attribute (default: each spec's grid size).")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output dataset directory.")
@click.option("--json", "as_json", is_flag=True)
@_wrap_errors
def render_toy_cmd(attributes_file, grid, out_dir, as_json):
    """Render the toy disc dataset over an attribute grid."""
    registry = _registry_from_file(attributes_file)
    specs = registry.specs()
    n = grid if grid is not None else max(spec.default_grid_size for spec in specs)
    points = sample_attribute_grid(specs, n)
    manifest = render_toy(specs, points, out_dir)
    payload = {"manifest": str(Path(out_dir) / "manifest.json"), "records": len(manifest.records)}
    _emit(payload, as_json, f"rendered {payload['records']} records -> {payload['manifest']}")


@main.command("augment")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--policy", "policy_file", type=click.Path(exists=True),
              help="YAML policy (conditioner_kind, prompt_pool or prompt_pool_name, ...).")
@click.option("--kind", type=click.Choice(["depth", "lineart"]), default=None,
              help="Conditioner kind; overrides the policy file.")
@click.option("--ratio", type=float, default=None, help="Augmented images per rendered record.")
@click.option("--seed", type=int, default=None)
@click.option("--json", "as_json", is_flag=True)
@_wrap_errors
def augment_cmd(manifest_path, policy_file, kind, ratio, seed, as_json):
    """Extend a manifest with conditioner-generated variants."""
    data = _load_yaml(policy_file)
    if kind is not None:
        data["conditioner_kind"] = kind
    if ratio is not None:
        data["augment_ratio"] = ratio
    if seed is not None:
        data["seed"] = seed
    if "conditioner_kind" not in data:
        raise ConfigurationError("augmentation needs a conditioner kind (--kind or policy file)")
    pool = data.pop("prompt_pool", None)
    pool_name = data.pop("prompt_pool_name", None)
    if pool is None:
        pool = default_prompt_pool(pool_name) if pool_name else default_prompt_pool("illumination")
    policy = AugmentationPolicy(prompt_pool=tuple(pool), **data)
    manifest = load_manifest(manifest_path)
    before = len(manifest.records)
    extended = augment(manifest, policy, ToyConditioner())
    save_manifest(extended, manifest_path)
    payload = {"records_before": before, "records_after": len(extended.records)}
    _emit(payload, as_json, f"augmented: {before} -> {payload['records_after']} records")


@main.command("train")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--stage1", "stage1_file", type=click.Path(exists=True), help="Stage-1 YAML config.")
@click.option("--stage2", "stage2_file", type=click.Path(exists=True), help="Stage-2 YAML config.")
@click.option("--backbone", "backbone_kind", type=click.Choice(["toy"]), default="toy")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--stage1-steps", type=int, default=None, help="Override stage-1 steps.")
@click.option("--stage2-steps", type=int, default=None, help="Override stage-2 steps.")
@click.option("--batch-size", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--lora-rank", type=int, default=4)
@click.option("--log", "log_path", type=click.Path(), default=None,
              help="Training log (JSONL); default <out>.log.jsonl")
@click.option("--json", "as_json", is_flag=True)
@_wrap_errors
def train_cmd(manifest_path, stage1_file, stage2_file, backbone_kind, out_path,
              stage1_steps, stage2_steps, batch_size, seed, lora_rank, log_path, as_json):
    """Run two-stage training and write a checkpoint."""
    from .backbone import build_backbone
    from .lora import LoRAConfig

    overrides = {"batch_size": batch_size, "seed": seed}
    stage1 = _stage_config(stage1_file, {**overrides, "steps": stage1_steps or (None if stage1_file else 500)})
    stage2 = _stage_config(stage2_file, {**overrides, "steps": stage2_steps or (None if stage2_file else 1500)})
    manifest = load_manifest(manifest_path)
    log_path = log_path or f"{out_path}.log.jsonl"
    result = train(
        manifest,
        stage1=stage1,
        stage2=stage2,
        backbone=build_backbone(backbone_kind),
        lora_config=LoRAConfig(rank=lora_rank, alpha=float(lora_rank), seed=stage1.seed),
        log_path=log_path,
    )
    path = save_checkpoint(result, manifest.registry, out_path)
    payload = {
        "checkpoint": str(path),
        "log": str(log_path),
        "final_loss": result.log[-1].loss,
        "steps": result.log[-1].step,
    }
    _emit(payload, as_json, f"trained {payload['steps']} steps -> {path} (final loss {payload['final_loss']:.5f})")


@main.command("generate")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--template", required=True)
@click.option("--set", "assignments", multiple=True, help="Attribute value as name=value (repeatable).")
@click.option("--seed", type=int, default=0)
@click.option("--steps", type=int, default=DEFAULT_STEPS)
@click.option("--scale", type=float, default=DEFAULT_GUIDANCE_SCALE)
@click.option("--negative-mode", type=click.Choice(["null_text", "identity"]), default="null_text")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--json", "as_json", is_flag=True)
@_wrap_errors
def generate_cmd(ckpt_path, template, assignments, seed, steps, scale, negative_mode, out_path, as_json):
    """Generate one image from a trained checkpoint."""
    bundle = load_checkpoint(ckpt_path)
    values = _parse_assignments(assignments)
    image, resolved = bundle.generate(
        template, values, seed=seed, steps=steps, guidance_scale=scale, negative_mode=negative_mode
    )
    save_image(image.numpy(), out_path)
    payload = {"image": str(out_path), "seed": seed, "attributes": resolved}
    _emit(payload, as_json, f"wrote {out_path} (seed {seed}, attributes {resolved})")


@main.command("sweep")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--attr", "attr_name", required=True)
@click.option("--from", "start", type=float, required=True)
@click.option("--to", "stop", type=float, required=True)
@click.option("--frames", type=int, required=True)
@click.option("--template", default=None, help="Default: identity template with the swept attribute slot.")
@click.option("--set", "assignments", multiple=True)
@click.option("--seed", type=int, default=0)
@click.option("--steps", type=int, default=DEFAULT_STEPS)
@click.option("--scale", type=float, default=DEFAULT_GUIDANCE_SCALE)
@click.option("--negative-mode", type=click.Choice(["null_text", "identity"]), default="null_text")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--json", "as_json", is_flag=True)
@_wrap_errors
def sweep_cmd(ckpt_path, attr_name, start, stop, frames, template, assignments,
              seed, steps, scale, negative_mode, out_dir, as_json):
    """Generate a filmstrip along one attribute, same seed per frame."""
    bundle = load_checkpoint(ckpt_path)
    template = template or f"a <attr:{attr_name}> photo of <obj>"
    results = bundle.sweep(
        template,
        _parse_assignments(assignments),
        sweep_attribute=attr_name,
        start=start,
        stop=stop,
        frames=frames,
        seed=seed,
        steps=steps,
        guidance_scale=scale,
        negative_mode=negative_mode,
    )
    out_dir = Path(out_dir)
    frame_files = []
    for i, (value, image) in enumerate(results):
        path = out_dir / f"frame-{i:03d}.png"
        save_image(image.numpy(), path)
        frame_files.append({"value": value, "image": str(path)})
    payload = {"frames": frame_files, "seed": seed, "attribute": attr_name}
    _emit(payload, as_json, "\n".join(f"{f['value']:.6g} -> {f['image']}" for f in frame_files))


@main.command("serve")
@click.option("--checkpoint", "ckpt_path", required=True, envvar="CW_CHECKPOINT",
              type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", envvar="CW_HOST", show_default=True)
@click.option("--port", type=int, default=8000, envvar="CW_PORT", show_default=True)
@click.option("--queue-depth", type=int, default=8, envvar="CW_QUEUE_DEPTH", show_default=True)
@_wrap_errors
def serve_cmd(ckpt_path, host, port, queue_depth):
    """Serve the inference API over one checkpoint."""
    from .service import serve

    serve(ckpt_path, host=host, port=port, queue_depth=queue_depth)


@main.command("inspect")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True)
@_wrap_errors
def inspect_cmd(ckpt_path, as_json):
    """Print checkpoint metadata: registry, LoRA shape, parameter counts."""
    bundle = load_checkpoint(ckpt_path)
    payload = {
        "version": bundle.version,
        "backbone": bundle.backbone_kind,
        "identity_token": bundle.identity.token_string,
        "attributes": bundle.registry.to_list(),
        "lora_rank": bundle.lora.config.rank,
        "lora_parameters": bundle.lora_parameter_count(),
        "backbone_parameters": bundle.base_parameter_count(),
        "mappers": {
            slot: {
                "attributes": mapper.attribute_names,
                "hidden_dim": mapper.hidden_dim,
                "output_dim": mapper.output_dim,
            }
            for slot, mapper in bundle.mappers.items()
        },
    }
    lines = [
        f"version: {payload['version']}",
        f"backbone: {payload['backbone']}",
        f"identity token: {payload['identity_token']}",
        f"lora rank: {payload['lora_rank']}",
        f"lora parameters: {payload['lora_parameters']}",
        f"backbone parameters: {payload['backbone_parameters']}",
        "attributes:",
    ]
    for spec in payload["attributes"]:
        lines.append(
            f"  - {spec['name']}: [{spec['min']}, {spec['max']}]"
            f"{' periodic' if spec['periodic'] else ''} grid={spec['grid_size']}"
        )
    _emit(payload, as_json, "\n".join(lines))


if __name__ == "__main__":
    main()
