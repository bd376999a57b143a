from __future__ import annotations

import pytest
import torch

from continuous_words.attributes import AttributeSpec, PositionalEncodingConfig
from continuous_words.augment import AugmentationPolicy, ToyConditioner, augment, default_prompt_pool
from continuous_words.backbone import ToyBackbone
from continuous_words.checkpoint import bundle_from_result, save_checkpoint
from continuous_words.conditioning import IdentityToken
from continuous_words.data import sample_attribute_grid
from continuous_words.mapper import init_mapper
from continuous_words.render import render_toy
from continuous_words.training import StageConfig, train


@pytest.fixture()
def backbone():
    return ToyBackbone()


@pytest.fixture()
def pose_spec():
    return AttributeSpec("pose", 0.0, 1.0, periodic=False, default_grid_size=18)


@pytest.fixture()
def pose_mapper(pose_spec, backbone):
    return init_mapper(
        [pose_spec], PositionalEncodingConfig(), backbone.embedding_width, backbone.embedding_width, seed=11
    )


@pytest.fixture()
def identity(backbone):
    gen = torch.Generator().manual_seed(99)
    emb = torch.empty(backbone.embedding_width).normal_(0.0, 0.01, generator=gen)
    return IdentityToken("sks", emb)


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """A small rendered + augmented manifest on disk."""
    spec = AttributeSpec("pose", 0.0, 1.0, periodic=False, default_grid_size=18)
    out = tmp_path_factory.mktemp("toyset")
    manifest = render_toy([spec], sample_attribute_grid([spec], 6), out)
    policy = AugmentationPolicy(
        "depth", tuple(default_prompt_pool("illumination")), augment_ratio=1.0, seed=7
    )
    return augment(manifest, policy, ToyConditioner())


@pytest.fixture(scope="session")
def mini_result(toy_dataset):
    """A briefly trained model, enough for contract tests (not for quality)."""
    return train(
        toy_dataset,
        stage1=StageConfig(steps=40, seed=123),
        stage2=StageConfig(steps=80, seed=123),
    )


@pytest.fixture(scope="session")
def mini_bundle(mini_result, toy_dataset):
    return bundle_from_result(mini_result, toy_dataset.registry)


@pytest.fixture(scope="session")
def mini_checkpoint(mini_result, toy_dataset, tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "mini.pt"
    save_checkpoint(mini_result, toy_dataset.registry, path)
    return path
