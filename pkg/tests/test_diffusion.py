import numpy as np
import pytest
import torch
from torch import nn

from brainvidpy._tools.tools import finite_difference_check
from brainvidpy.diffusion.attention import causal_band_mask, temporal_attention
from brainvidpy.diffusion.codec import IdentityCodec, LatentCodec, codec_train, round_trip_psnr, tensor_to_video, video_to_tensor
from brainvidpy.diffusion.denoiser import DenoiserConfig, PseudoUNet
from brainvidpy.diffusion.export import export_video, inter_frame_difference
from brainvidpy.diffusion.noise import DependentNoiseSpec, dependent_noise
from brainvidpy.diffusion.sampling import ddim_coefficients, ddim_timesteps, sample
from brainvidpy.diffusion.schedule import forward_diffuse, make_schedule
from brainvidpy.diffusion.training import Phase2Config, train_phase2
from brainvidpy.errors import ConfigError, TimestepError

TINY_DENOISER = DenoiserConfig(latent_channels=4, channels=(8, 16), cond_dim=8, heads=2, time_dim=16, groups=4)


class PointwiseDenoiser(nn.Module):
    """Predicts eps = scale * z, the same rule for every frame."""

    def __init__(self, scale: float=0.3):
        super().__init__()
        self.scale = nn.Parameter(torch.tensor(scale))

    def forward(self, z, t, cond):
        return self.scale * z


def test_linear_schedule_endpoints():
    schedule = make_schedule(1000, 'linear')
    assert schedule.alpha_bar[0] == pytest.approx(0.9999)
    assert schedule.betas[-1] == pytest.approx(0.02)


@pytest.mark.parametrize("kind", ["linear", "cosine"])
def test_alpha_bar_is_positive_and_non_increasing(kind):
    ab = make_schedule(200, kind).alpha_bar
    assert np.all(ab > 0)
    assert np.all(np.diff(ab) <= 0)


def test_schedule_validation():
    with pytest.raises(ConfigError):
        make_schedule(1)
    with pytest.raises(ConfigError):
        make_schedule(10, 'quadratic')


@pytest.mark.parametrize("beta", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_dependent_noise_statistics(beta):
    noise = dependent_noise(DependentNoiseSpec(beta=beta, frames=2), (10 ** 6,), generator=torch.Generator().manual_seed(0),
                            dtype=torch.float64).numpy()
    assert np.all(np.abs(noise.mean(axis=1)) < 0.01)
    assert noise.var(axis=1) == pytest.approx([1.0, 1.0], abs=0.02)
    assert np.corrcoef(noise[0], noise[1])[0, 1] == pytest.approx(beta, abs=0.02)


def test_independent_noise_is_a_plain_draw_per_frame():
    generator = torch.Generator().manual_seed(4)
    noise = dependent_noise(DependentNoiseSpec(beta=0.0, frames=3), (2, 4, 4), generator=generator, batch=2)
    reference = torch.Generator().manual_seed(4)
    torch.randn(2, 1, 2, 4, 4, generator=reference)
    assert torch.equal(noise, torch.randn(2, 3, 2, 4, 4, generator=reference))


def test_full_dependence_gives_identical_frames():
    noise = dependent_noise(DependentNoiseSpec(beta=1.0, frames=4), (3, 4, 4), generator=torch.Generator().manual_seed(0), batch=2)
    assert noise.shape == (2, 4, 3, 4, 4)
    for j in range(1, 4):
        assert torch.equal(noise[:, j], noise[:, 0])


def test_noise_spec_validation():
    with pytest.raises(ConfigError):
        DependentNoiseSpec(beta=1.2)


def test_forward_diffuse_limits():
    schedule = make_schedule(1000)
    z0 = torch.ones(2, 3, 4, 4, dtype=torch.float64)
    noise = torch.randn(2, 3, 4, 4, generator=torch.Generator().manual_seed(0), dtype=torch.float64)
    near_clean = forward_diffuse(z0, 0, noise, schedule)
    assert torch.allclose(near_clean, z0, atol=0.05)
    pure = forward_diffuse(z0, 999, noise, schedule)
    assert torch.allclose(pure, noise, atol=0.02)


def test_forward_diffuse_keeps_unit_variance():
    schedule = make_schedule(100)
    generator = torch.Generator().manual_seed(3)
    z0 = torch.randn(1, 4, 500, 500, generator=generator, dtype=torch.float64)
    noise = torch.randn(1, 4, 500, 500, generator=generator, dtype=torch.float64)
    for t in (0, 50, 99):
        assert float(forward_diffuse(z0, t, noise, schedule).var()) == pytest.approx(1.0, rel=0.02)


def test_forward_diffuse_rejects_bad_steps():
    schedule = make_schedule(10)
    z = torch.zeros(1, 1, 2, 2)
    with pytest.raises(TimestepError):
        forward_diffuse(z, 10, z, schedule)
    with pytest.raises(TimestepError):
        forward_diffuse(z[None], torch.tensor([-1]), z[None], schedule)


def test_causal_band_mask():
    expected = torch.tensor([
        [1, 0, 0, 0],
        [1, 1, 0, 0],
        [1, 1, 1, 0],
        [0, 1, 1, 1],
    ], dtype=torch.bool)
    assert torch.equal(causal_band_mask(4, 2), expected)


def test_single_frame_attention_returns_values(rng):
    x = torch.as_tensor(rng.normal(size=(2, 1, 5, 4)))
    w_q, w_k, w_v = (torch.as_tensor(rng.normal(size=(4, 4))) for _ in range(3))
    out, attn = temporal_attention(x, w_q, w_k, w_v, heads=2)
    torch.testing.assert_close(out, x @ w_v)
    assert torch.all(attn == 1.0)


def test_identical_frames_attend_to_their_own_values(rng):
    frame = rng.normal(size=(2, 1, 5, 4))
    x = torch.as_tensor(np.repeat(frame, 4, axis=1))
    w_q, w_k, w_v = (torch.as_tensor(rng.normal(size=(4, 4))) for _ in range(3))
    out, _ = temporal_attention(x, w_q, w_k, w_v, heads=2, window=2)
    torch.testing.assert_close(out, x @ w_v)


def test_temporal_attention_never_looks_ahead(rng):
    x = torch.as_tensor(rng.normal(size=(1, 5, 3, 4)))
    w_q, w_k, w_v = (torch.as_tensor(rng.normal(size=(4, 4))) for _ in range(3))
    out, attn = temporal_attention(x, w_q, w_k, w_v, window=2)
    changed = x.clone()
    changed[:, 4] += 10.0
    out2, _ = temporal_attention(changed, w_q, w_k, w_v, window=2)
    torch.testing.assert_close(out[:, :4], out2[:, :4])
    assert torch.all(attn[..., 4, :2] == 0.0)
    torch.testing.assert_close(attn.sum(-1), torch.ones_like(attn.sum(-1)))


def test_denoiser_keeps_shape():
    torch.manual_seed(0)
    model = PseudoUNet(TINY_DENOISER)
    z = torch.randn(2, 3, 4, 8, 8)
    out = model(z, torch.tensor([1, 5]), torch.randn(2, 4, 8))
    assert out.shape == z.shape


def test_zero_output_layer_predicts_zero():
    model = PseudoUNet(TINY_DENOISER)
    nn.init.zeros_(model.conv_out.weight)
    nn.init.zeros_(model.conv_out.bias)
    out = model(torch.randn(1, 2, 4, 8, 8), torch.tensor([3]), torch.randn(1, 4, 8))
    assert not out.any()


def test_denoiser_input_validation():
    model = PseudoUNet(TINY_DENOISER)
    with pytest.raises(ConfigError):
        model(torch.zeros(1, 2, 4, 7, 8), torch.tensor([0]), torch.zeros(1, 4, 8))
    with pytest.raises(ConfigError):
        model(torch.zeros(1, 2, 4, 8, 8), torch.tensor([0]), torch.zeros(1, 4, 5))


def test_freeze_attention_only():
    model = PseudoUNet(TINY_DENOISER)
    model.apply_freeze('attention')
    trainable = {id(p) for p in model.parameters() if p.requires_grad}
    assert trainable == {id(p) for p in model.attention_parameters()}
    with pytest.raises(ConfigError):
        model.apply_freeze('all')


def test_denoiser_gradients_match_finite_differences():
    torch.manual_seed(0)
    model = PseudoUNet(TINY_DENOISER).double()
    generator = torch.Generator().manual_seed(1)
    z = torch.randn(1, 2, 4, 4, 4, generator=generator, dtype=torch.float64)
    cond = torch.randn(1, 2, 8, generator=generator, dtype=torch.float64)
    target = torch.randn(1, 2, 4, 4, 4, generator=generator, dtype=torch.float64)

    def loss_fn():
        return ((model(z, torch.tensor([2]), cond) - target) ** 2).mean()

    assert finite_difference_check(loss_fn, list(model.parameters()), n=10, eps=1e-5) < 1e-3


def test_ddim_timesteps():
    steps = ddim_timesteps(1000, 50)
    assert len(steps) == 50
    assert steps[0] == 999 and steps[-1] == 0
    assert np.all(np.diff(steps) < 0)
    assert ddim_timesteps(10, 1).tolist() == [9]
    with pytest.raises(ConfigError):
        ddim_timesteps(10, 11)


def test_deterministic_ddim_coefficients():
    c_x0, c_eps, sigma = ddim_coefficients(0.25, 0.64, 0.0)
    assert (c_x0, sigma) == (pytest.approx(0.8), 0.0)
    assert c_eps == pytest.approx(0.6)
    _, _, sigma = ddim_coefficients(0.25, 0.64, 1.0)
    assert sigma > 0


def test_full_stochasticity_matches_the_ancestral_step():
    # One step from alpha_bar 0.5 to 0.8: alpha_t = 0.625, beta_t = 0.375.
    ab_t, ab_prev = 0.5, 0.8
    alpha_t, beta_t = ab_t / ab_prev, 1 - ab_t / ab_prev
    c_x0, c_eps, sigma = ddim_coefficients(ab_t, ab_prev, 1.0)
    # z_prev = c_x0 x0 + c_eps (z_t - sqrt(ab_t) x0) / sqrt(1 - ab_t) + sigma noise
    weight_zt = c_eps / (1 - ab_t) ** 0.5
    weight_x0 = c_x0 - c_eps * ab_t ** 0.5 / (1 - ab_t) ** 0.5
    assert sigma ** 2 == pytest.approx((1 - ab_prev) / (1 - ab_t) * beta_t)
    assert weight_zt == pytest.approx(alpha_t ** 0.5 * (1 - ab_prev) / (1 - ab_t))
    assert weight_x0 == pytest.approx(ab_prev ** 0.5 * beta_t / (1 - ab_t))
    assert (sigma ** 2, weight_zt, weight_x0) == (pytest.approx(0.15), pytest.approx(0.316228), pytest.approx(0.670820))


def test_sampling_is_deterministic():
    torch.manual_seed(0)
    model = PseudoUNet(TINY_DENOISER)
    schedule = make_schedule(20)
    cond = torch.randn(2, 4, 8)
    runs = [
        sample(model, cond, schedule, frames=3, latent_shape=(4, 4, 4), steps_ddim=4, eta=0.5,
               generator=torch.Generator().manual_seed(7))
        for _ in range(2)
    ]
    assert runs[0].shape == (2, 3, 4, 4, 4)
    assert torch.equal(runs[0], runs[1])


def test_full_dependence_with_frame_agnostic_denoiser_gives_static_clip():
    out = sample(PointwiseDenoiser(), torch.zeros(4, 2), make_schedule(20), frames=4, latent_shape=(3, 4, 4),
                 steps_ddim=5, beta=1.0, generator=torch.Generator().manual_seed(0))
    assert out.shape == (4, 3, 4, 4)
    for j in range(1, 4):
        assert torch.equal(out[j], out[0])


def test_more_shared_noise_means_smoother_clips():
    schedule = make_schedule(20)
    differences = []
    for beta in (0.0, 0.25, 0.5, 0.75, 1.0):
        z = sample(PointwiseDenoiser(), torch.zeros(2, 4, 2), schedule, frames=4, latent_shape=(3, 4, 4), steps_ddim=5,
                   beta=beta, generator=torch.Generator().manual_seed(0))
        differences.append(inter_frame_difference(tensor_to_video(z)))
    assert all(a > b for a, b in zip(differences, differences[1:]))
    assert differences[-1] == 0.0


def test_identity_codec_is_exact_on_block_images(rng):
    blocks = rng.random((2, 3, 4, 4, 3)).astype(np.float32)
    video = blocks.repeat(4, axis=2).repeat(4, axis=3)
    codec = IdentityCodec()
    latents = codec.encode(video_to_tensor(video))
    assert latents.shape == (2, 3, 3, 4, 4)
    np.testing.assert_allclose(tensor_to_video(codec.decode(latents)), video, atol=1e-6)
    assert round_trip_psnr(codec, video) > 100


def test_identity_codec_rejects_odd_frames():
    with pytest.raises(ConfigError):
        IdentityCodec().encode(torch.zeros(1, 3, 6, 8))


def test_latent_codec_shapes_and_validation():
    codec = LatentCodec(latent_channels=6, hidden=8)
    latents = codec.encode(torch.rand(2, 3, 3, 16, 16))
    assert latents.shape == (2, 3, 6, 4, 4)
    assert codec.decode(latents).shape == (2, 3, 3, 16, 16)
    with pytest.raises(ConfigError):
        LatentCodec(latent_channels=3)


def test_trained_codec_reproduces_flat_frames(tiny_dataset, rng):
    train = tiny_dataset[0]
    codec, curve = codec_train(LatentCodec(latent_channels=6, hidden=16), train.video[:8], steps=30, batch_size=16)
    assert len(curve) == 30
    flat = np.ones((5, 2, 16, 16, 3), dtype=np.float32) * rng.random((5, 1, 1, 1, 3)).astype(np.float32)
    with torch.no_grad():
        decoded = tensor_to_video(codec.decode(codec.encode(video_to_tensor(flat))))
    assert np.abs(decoded - flat).max() < 0.05


@pytest.mark.slow
def test_trained_codec_round_trip_on_held_out_frames(tiny_dataset):
    train, val, _, _ = tiny_dataset
    codec, curve = codec_train(LatentCodec(), train.video, steps=1500, seed=0)
    assert curve["loss"].iloc[-100:].mean() < curve["loss"].iloc[:100].mean()
    assert round_trip_psnr(codec, val.video) >= 25.0


def test_phase2_training_lowers_the_loss(tiny_dataset, tiny_encoder):
    train = tiny_dataset[0]
    torch.manual_seed(0)
    denoiser = PseudoUNet(DenoiserConfig(latent_channels=3, channels=(8, 16), cond_dim=8, heads=2, time_dim=16, groups=4))
    config = Phase2Config(beta=0.5, steps=300, lr=2e-3, batch_size=8, log_every=100)
    denoiser, curve = train_phase2(denoiser, IdentityCodec(), tiny_encoder, train.clips, train.fmri, make_schedule(50), config)
    assert list(curve.columns) == ["step", "loss"] and len(curve) == 300
    assert curve["loss"].iloc[-50:].mean() < curve["loss"].iloc[:50].mean()


def test_export_writes_frames_and_gif(tmp_path, rng):
    video = rng.random((3, 8, 8, 3))
    paths = export_video(video, tmp_path / "clips", "clip000", upscale=2)
    assert [p.name for p in paths] == ["clip000_00.png", "clip000_01.png", "clip000_02.png", "clip000.gif"]
    assert all(p.exists() for p in paths)


def test_inter_frame_difference():
    static = np.ones((2, 4, 8, 8, 3))
    assert inter_frame_difference(static) == 0.0
    flicker = np.zeros((4, 2, 2, 3))
    flicker[1::2] = 1.0
    assert inter_frame_difference(flicker) == 1.0
