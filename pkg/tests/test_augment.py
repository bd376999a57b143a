import numpy as np
import pytest

from continuous_words.attributes import AttributeSpec
from continuous_words.augment import (
    AugmentationPolicy,
    DEFAULT_LINEART_STRENGTH,
    PROMPT_POOL_PATTERNS,
    ToyConditioner,
    augment,
    default_prompt_pool,
    expand_prompt_pattern,
)
from continuous_words.data import sample_attribute_grid
from continuous_words.errors import ConfigurationError
from continuous_words.render import ToyRenderer, load_image, render_toy


class TestPromptPools:
    def test_patterns_ship_verbatim(self):
        assert PROMPT_POOL_PATTERNS["wing_pose"] == (
            "a bird {with two wings, flying} on a {rainy, sunny} day"
        )
        assert PROMPT_POOL_PATTERNS["dolly_zoom"] == (
            "a chair {in the Acropolis, in a forest, under the snow, on a beach, "
            "in Times Square, in a department store}"
        )
        assert PROMPT_POOL_PATTERNS["illumination"] == "a {white, gray, brown} dog"

    def test_expansions(self):
        assert expand_prompt_pattern("a {white, gray, brown} dog") == [
            "a white dog",
            "a gray dog",
            "a brown dog",
        ]
        wing = default_prompt_pool("wing_pose")
        assert len(wing) == 4
        assert "a bird flying on a sunny day" in wing
        assert len(default_prompt_pool("dolly_zoom")) == 6

    def test_unknown_pool_rejected(self):
        with pytest.raises(ConfigurationError):
            default_prompt_pool("nonexistent")


class TestPolicy:
    def test_lineart_default_strength(self):
        policy = AugmentationPolicy("lineart", ("p",))
        assert policy.resolved_strength == DEFAULT_LINEART_STRENGTH == 0.6

    def test_depth_default_strength(self):
        assert AugmentationPolicy("depth", ("p",)).resolved_strength == 1.0

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigurationError):
            AugmentationPolicy("canny", ("p",))

    def test_empty_pool_rejected(self):
        with pytest.raises(ConfigurationError):
            AugmentationPolicy("depth", ())

    def test_bad_strength_rejected(self):
        with pytest.raises(ConfigurationError):
            AugmentationPolicy("depth", ("p",), guidance_strength=1.5)


class TestToyConditioner:
    def test_deterministic(self):
        cond = np.zeros((16, 16), dtype=np.float32)
        cond[4:10, 4:10] = 1.0
        c = ToyConditioner()
        a = c.generate(cond, "a white dog", 0.8, seed=3)
        b = c.generate(cond, "a white dog", 0.8, seed=3)
        assert np.array_equal(a, b)

    def test_prompt_changes_output(self):
        cond = np.zeros((16, 16), dtype=np.float32)
        cond[4:10, 4:10] = 1.0
        c = ToyConditioner()
        a = c.generate(cond, "a white dog", 0.8, seed=3)
        b = c.generate(cond, "a brown dog", 0.8, seed=3)
        assert not np.array_equal(a, b)

    def test_fills_lineart_ring(self, pose_spec):
        renderer = ToyRenderer.for_specs([pose_spec])
        rgb, _ = renderer.render({"pose": 0.3})
        from continuous_words.render import lineart_extract

        ring = lineart_extract(rgb)
        out = ToyConditioner().generate(ring, "a gray dog", 1.0, seed=0)
        est = renderer.estimate_position(out)
        assert abs(est - 0.3) <= 0.05


def _rendered_manifest(tmp_path, n=6):
    spec = AttributeSpec("pose", 0.0, 1.0)
    return render_toy([spec], sample_attribute_grid([spec], n), tmp_path), spec


class TestAugment:
    def test_ratio_one_doubles(self, tmp_path):
        manifest, _ = _rendered_manifest(tmp_path)
        policy = AugmentationPolicy("depth", tuple(default_prompt_pool("illumination")), seed=1)
        out = augment(manifest, policy, ToyConditioner())
        assert len(out.records) == 2 * len(manifest.records)

    def test_ratio_two_triples(self, tmp_path):
        manifest, _ = _rendered_manifest(tmp_path, n=3)
        policy = AugmentationPolicy(
            "depth", tuple(default_prompt_pool("illumination")), augment_ratio=2.0, seed=1
        )
        out = augment(manifest, policy, ToyConditioner())
        assert len(out.records) == 9

    def test_attributes_copied_bitwise(self, tmp_path):
        manifest, _ = _rendered_manifest(tmp_path)
        policy = AugmentationPolicy("depth", tuple(default_prompt_pool("illumination")), seed=2)
        out = augment(manifest, policy, ToyConditioner())
        parents = out.by_id()
        for rec in out.records:
            if rec.source == "augmented":
                assert rec.attributes == parents[rec.parent_id].attributes

    def test_rendered_records_untouched(self, tmp_path):
        manifest, _ = _rendered_manifest(tmp_path)
        before = [r.to_dict() for r in manifest.records]
        policy = AugmentationPolicy("lineart", tuple(default_prompt_pool("illumination")), seed=2)
        augment(manifest, policy, ToyConditioner())
        assert [r.to_dict() for r in manifest.records] == before

    def test_prompt_draw_reproducible(self, tmp_path):
        manifest, _ = _rendered_manifest(tmp_path)
        policy = AugmentationPolicy("depth", tuple(default_prompt_pool("wing_pose")), seed=9)
        a = augment(manifest, policy, ToyConditioner())
        b = augment(manifest, policy, ToyConditioner())
        assert [r.prompt_template for r in a.records] == [r.prompt_template for r in b.records]

    def test_augmented_template_prepends_slots(self, tmp_path):
        manifest, _ = _rendered_manifest(tmp_path)
        policy = AugmentationPolicy("depth", ("a white dog",), seed=0)
        out = augment(manifest, policy, ToyConditioner())
        for rec in out.records:
            if rec.source == "augmented":
                assert rec.prompt_template == "<attr:pose> a white dog"

    def test_conditioner_failure_skips_with_warning(self, tmp_path, caplog):
        manifest, _ = _rendered_manifest(tmp_path, n=3)

        class Flaky:
            def __init__(self):
                self.calls = 0

            def generate(self, condition, prompt, strength, seed):
                self.calls += 1
                if self.calls == 2:
                    raise RuntimeError("boom")
                return ToyConditioner().generate(condition, prompt, strength, seed)

        policy = AugmentationPolicy("depth", ("a white dog",), seed=0)
        with caplog.at_level("WARNING"):
            out = augment(manifest, policy, Flaky())
        assert len(out.records) == 3 + 2
        assert any("augmentation failed" in r.message for r in caplog.records)
        assert any("skipped" in r.message for r in caplog.records)
