import time

import pytest
import torch

from continuous_words.backbone import (
    HashWordTokenizer,
    NoiseSchedule,
    ToyBackbone,
    ToyBackboneConfig,
    add_noise,
    build_backbone,
)
from continuous_words.errors import ConfigurationError, PromptLengthError


class TestSchedule:
    def test_monotonicity(self):
        s = NoiseSchedule()
        alphas, sigmas = s.alphas, s.sigmas
        assert torch.all(alphas[1:] <= alphas[:-1])
        assert torch.all(sigmas[1:] >= sigmas[:-1])

    def test_energy_bounded(self):
        s = NoiseSchedule()
        energy = s.alphas**2 + s.sigmas**2
        assert torch.allclose(energy, torch.ones_like(energy), atol=1e-6)

    def test_bad_timestep_rejected(self):
        s = NoiseSchedule(timesteps=10)
        with pytest.raises(ConfigurationError):
            s.coefficients(10)


class TestAddNoise:
    def test_zero_noise_timestep(self):
        s = NoiseSchedule(abar_start=0.999999999)
        sample = torch.randn(3, 4, 4, generator=torch.Generator().manual_seed(0))
        out = add_noise(s, sample, torch.zeros_like(sample), 0)
        assert torch.allclose(out, sample, atol=1e-4)

    def test_zero_sample_returns_scaled_noise(self):
        s = NoiseSchedule()
        noise = torch.randn(3, 4, 4, generator=torch.Generator().manual_seed(1))
        t = 60
        out = add_noise(s, torch.zeros_like(noise), noise, t)
        _, sigma = s.coefficients(t)
        assert torch.allclose(out, sigma * noise)

    def test_algebraic_inversion_recovers_noise(self):
        # (noised - alpha*sample) / sigma must reproduce the input noise.
        s = NoiseSchedule()
        gen = torch.Generator().manual_seed(2)
        sample = torch.rand(3, 8, 8, generator=gen)
        noise = torch.randn(3, 8, 8, generator=gen)
        for t in (0, 25, 50, 99):
            alpha, sigma = s.coefficients(t)
            noised = add_noise(s, sample, noise, t)
            recovered = (noised - alpha * sample) / sigma
            assert (recovered - noise).abs().max().item() < 1e-5

    def test_shape_mismatch_rejected(self):
        s = NoiseSchedule()
        with pytest.raises(ValueError):
            add_noise(s, torch.zeros(3, 4, 4), torch.zeros(3, 4, 5), 0)


class TestTokenizer:
    def test_stable_across_instances(self):
        a, b = HashWordTokenizer(), HashWordTokenizer()
        assert a.encode_words("a bright disc on gray") == b.encode_words("a bright disc on gray")

    def test_single_token_words(self):
        tk = HashWordTokenizer()
        assert len(tk.encode_words("sks")) == 1

    def test_reserved_ids_untouched(self):
        tk = HashWordTokenizer()
        assert all(i >= tk.RESERVED for i in tk.encode_words("any words at all"))


class TestToyBackbone:
    def test_seeded_weights_reproducible(self):
        a, b = ToyBackbone(), ToyBackbone()
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)

    def test_different_seed_differs(self):
        a = ToyBackbone()
        b = ToyBackbone(ToyBackboneConfig(seed=1))
        assert not torch.equal(a.tok_emb.weight, b.tok_emb.weight)

    def test_tokenize_pads_to_max(self, backbone):
        ids = backbone.tokenize("a short prompt")
        assert len(ids) == backbone.max_sequence_length

    def test_tokenize_rejects_overlong(self, backbone):
        with pytest.raises(PromptLengthError):
            backbone.tokenize(" ".join(["w"] * 40))

    def test_denoise_deterministic(self, backbone):
        gen = torch.Generator().manual_seed(3)
        x = torch.randn(3, 32, 32, generator=gen)
        cond = torch.randn(16, 16, generator=gen)
        with torch.no_grad():
            a = backbone.denoise(x, 10, cond)
            b = backbone.denoise(x, 10, cond)
        assert torch.equal(a, b)
        assert a.shape == (3, 32, 32)

    def test_denoise_under_10ms(self, backbone):
        gen = torch.Generator().manual_seed(4)
        x = torch.randn(3, 32, 32, generator=gen)
        cond = torch.randn(16, 16, generator=gen)
        with torch.no_grad():
            backbone.denoise(x, 10, cond)  # warmup
            t0 = time.perf_counter()
            for _ in range(20):
                backbone.denoise(x, 10, cond)
        assert (time.perf_counter() - t0) / 20 < 0.010

    def test_conditioning_changes_output(self, backbone):
        gen = torch.Generator().manual_seed(5)
        x = torch.randn(3, 32, 32, generator=gen)
        c1 = torch.randn(16, 16, generator=gen)
        c2 = torch.randn(16, 16, generator=gen)
        with torch.no_grad():
            assert not torch.equal(backbone.denoise(x, 10, c1), backbone.denoise(x, 10, c2))

    def test_trainable_end_to_end(self):
        # A few optimizer steps on "reproduce a constant image" must cut the loss.
        backbone = ToyBackbone()
        target = torch.full(backbone.sample_shape, 0.25)
        opt = torch.optim.Adam(backbone.parameters(), lr=3e-3)
        gen = torch.Generator().manual_seed(6)
        losses = []
        for _ in range(60):
            cond = backbone.encode(backbone.embed(backbone.tokenize("a flat image")))
            t = int(torch.randint(0, 100, (1,), generator=gen))
            noise = torch.randn(backbone.sample_shape, generator=gen)
            noised = backbone.add_noise(target, noise, t)
            pred = backbone.denoise(noised, t, cond)
            loss = ((pred - target) ** 2).mean()
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(loss.item())
        assert sum(losses[-10:]) < sum(losses[:10]) * 0.5

    def test_build_backbone_rejects_unknown(self):
        with pytest.raises(ConfigurationError):
            build_backbone("sd21")
