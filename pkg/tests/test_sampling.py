import pytest
import torch

from continuous_words.backbone import ToyBackbone, ToyBackboneConfig
from continuous_words.conditioning import ConditioningBundle, parse_template, assemble_conditioning
from continuous_words.errors import ConfigurationError
from continuous_words.sampling import cfg_predict, sample_image, sampling_timesteps, split_prediction


@pytest.fixture()
def bundle(backbone):
    t = parse_template("a bright disc")
    return assemble_conditioning(t, None, {}, {}, backbone)


def guidance_fixture(backbone):
    gen = torch.Generator().manual_seed(11)
    x = torch.randn(3, 32, 32, generator=gen)
    pos = torch.randn(16, 16, generator=gen)
    neg = torch.randn(16, 16, generator=gen)
    return x, pos, neg


class TestCfg:
    def test_scale_one_is_positive_prediction(self, backbone):
        x, pos, neg = guidance_fixture(backbone)
        with torch.no_grad():
            direct = backbone.denoise(x, 20, pos)
            guided = cfg_predict(backbone, x, 20, pos, neg, 1.0)
        assert torch.equal(direct, guided)

    def test_scale_zero_is_negative_prediction(self, backbone):
        x, pos, neg = guidance_fixture(backbone)
        with torch.no_grad():
            direct = backbone.denoise(x, 20, neg)
            guided = cfg_predict(backbone, x, 20, pos, neg, 0.0)
        assert torch.equal(direct, guided)

    def test_linearity_in_scale(self, backbone):
        x, pos, neg = guidance_fixture(backbone)
        with torch.no_grad():
            p0 = cfg_predict(backbone, x, 20, pos, neg, 0.0)
            p1 = cfg_predict(backbone, x, 20, pos, neg, 1.0)
            p2 = cfg_predict(backbone, x, 20, pos, neg, 2.0)
        assert (p2 - (2 * p1 - p0)).abs().max().item() < 1e-6

    def test_negative_scale_rejected(self, backbone):
        x, pos, neg = guidance_fixture(backbone)
        with pytest.raises(ConfigurationError):
            cfg_predict(backbone, x, 20, pos, neg, -0.5)

    def test_mismatched_lengths_rejected(self, backbone):
        x, pos, neg = guidance_fixture(backbone)
        with pytest.raises(ValueError):
            cfg_predict(backbone, x, 20, pos, neg[:8], 2.0)

    def test_identity_negative_at_scale_one_is_pure_conditional(self, backbone, identity):
        # The negative swap must be inert at guidance scale 1.
        from continuous_words.mapper import init_mapper
        from continuous_words.attributes import AttributeSpec, PositionalEncodingConfig

        spec = AttributeSpec("wing", 0.0, 1.0)
        mapper = init_mapper([spec], PositionalEncodingConfig(), 16, 16, seed=2)
        t = parse_template("a <attr:wing> photo of <obj>", ["wing"])
        bundle = assemble_conditioning(
            t, identity, {"wing": 0.4}, {"wing": mapper}, backbone, negative_mode="identity"
        )
        gen = torch.Generator().manual_seed(31)
        x = torch.randn(3, 32, 32, generator=gen)
        with torch.no_grad():
            guided = cfg_predict(backbone, x, 15, bundle.positive, bundle.negative, 1.0)
            conditional = backbone.denoise(x, 15, bundle.positive)
        assert torch.equal(guided, conditional)


class TestTimesteps:
    def test_counts_and_bounds(self):
        ts = sampling_timesteps(100, 10)
        assert len(ts) == 10 and ts[0] == 99 and ts[-1] == 0
        assert ts == sorted(ts, reverse=True)

    def test_single_step(self):
        assert sampling_timesteps(100, 1) == [99]

    def test_oversampling_dedupes(self):
        ts = sampling_timesteps(10, 50)
        assert len(ts) == 10 and len(set(ts)) == 10


class TestSplitPrediction:
    def test_sample_kind_roundtrip(self, backbone):
        gen = torch.Generator().manual_seed(12)
        x0 = torch.rand(3, 32, 32, generator=gen)
        eps = torch.randn(3, 32, 32, generator=gen)
        t = 44
        noised = backbone.add_noise(x0, eps, t)
        got_x0, got_eps = split_prediction(backbone, x0, noised, t)
        assert torch.equal(got_x0, x0)
        assert (got_eps - eps).abs().max().item() < 1e-4

    def test_noise_kind_roundtrip(self):
        backbone = ToyBackbone(ToyBackboneConfig(prediction_kind="noise"))
        gen = torch.Generator().manual_seed(13)
        x0 = torch.rand(3, 32, 32, generator=gen)
        eps = torch.randn(3, 32, 32, generator=gen)
        t = 44
        noised = backbone.add_noise(x0, eps, t)
        got_x0, got_eps = split_prediction(backbone, eps, noised, t)
        assert torch.equal(got_eps, eps)
        assert (got_x0 - x0).abs().max().item() < 1e-4


class TestSampleImage:
    def test_deterministic(self, backbone, bundle):
        a = sample_image(backbone, bundle, steps=8, scale=3.0, seed=21)
        b = sample_image(backbone, bundle, steps=8, scale=3.0, seed=21)
        assert torch.equal(a, b)

    def test_seed_changes_output(self, backbone, bundle):
        a = sample_image(backbone, bundle, steps=8, scale=3.0, seed=21)
        b = sample_image(backbone, bundle, steps=8, scale=3.0, seed=22)
        assert not torch.equal(a, b)

    def test_single_step_is_one_denoise(self, backbone, bundle):
        out = sample_image(backbone, bundle, steps=1, scale=1.0, seed=5)
        gen = torch.Generator().manual_seed(5)
        x = torch.randn(backbone.sample_shape, generator=gen)
        with torch.no_grad():
            pred = backbone.denoise(x, backbone.schedule.timesteps - 1, bundle.positive)
        assert torch.equal(out, pred.clamp(0.0, 1.0))

    def test_output_in_pixel_range(self, backbone, bundle):
        out = sample_image(backbone, bundle, steps=6, scale=7.5, seed=1)
        assert out.min().item() >= 0.0 and out.max().item() <= 1.0

    def test_trained_beats_untrained_on_constant_target(self):
        # Train on a constant image; the sampler must land closer to it than
        # the untrained backbone does.
        target = torch.full((3, 32, 32), 0.25)
        bundles = {}
        errors = {}
        for trained in (False, True):
            backbone = ToyBackbone()
            cond_seq = backbone.encode(backbone.embed(backbone.tokenize("a flat image")))
            bundle = ConditioningBundle(
                positive=cond_seq.detach(),
                negative=backbone.encode(backbone.embed(backbone.tokenize(""))).detach(),
                slot_positions=(),
                input_embeddings=backbone.embed(backbone.tokenize("a flat image")).detach(),
            )
            if trained:
                opt = torch.optim.Adam(backbone.parameters(), lr=3e-3)
                gen = torch.Generator().manual_seed(14)
                for _ in range(150):
                    cond = backbone.encode(backbone.embed(backbone.tokenize("a flat image")))
                    t = int(torch.randint(0, 100, (1,), generator=gen))
                    noise = torch.randn(backbone.sample_shape, generator=gen)
                    pred = backbone.denoise(backbone.add_noise(target, noise, t), t, cond)
                    loss = ((pred - target) ** 2).mean()
                    opt.zero_grad()
                    loss.backward()
                    opt.step()
            out = sample_image(backbone, bundle, steps=10, scale=1.0, seed=3)
            errors[trained] = ((out - target) ** 2).mean().item()
            bundles[trained] = bundle
        assert errors[True] < errors[False]
