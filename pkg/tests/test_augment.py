import numpy as np
import pytest
import torch

from brainvidpy.core.windows import FmriWindow
from brainvidpy.errors import ConfigError, InvalidWindowError
from brainvidpy.phase1.augment import (
    AugmentConfig,
    interpolation_matrix,
    ratio_count,
    spatial_mask,
    spatial_mask_batch,
    temporal_interpolate,
    temporal_interpolate_batch,
)


def _window(rng, w=3, p=4, b=8):
    return FmriWindow(tokens=rng.normal(size=(w, p, b)).astype(np.float32), window_start=2, subject_id=1)


@pytest.mark.parametrize("ratio,n,count", [(0.2, 8, 2), (0.25, 2, 1), (0.1, 4, 0), (1.0, 5, 5), (0.0, 5, 0), (1 / 3, 3, 1)])
def test_ratio_count(ratio, n, count):
    assert ratio_count(ratio, n) == count


def test_zero_ratios_are_identity(rng):
    window = _window(rng)
    assert np.array_equal(spatial_mask(window, 0.0, rng).tokens, window.tokens)
    assert np.array_equal(temporal_interpolate(window, 0.0, rng).tokens, window.tokens)


def test_zero_count_grid_leaves_window_unchanged(rng):
    for b in range(1, 9):
        for gamma in (0.0, 0.01, 0.04):
            if ratio_count(gamma, b) == 0:
                window = _window(rng, b=b)
                assert np.array_equal(spatial_mask(window, gamma, rng).tokens, window.tokens)


def test_full_spatial_mask_zeroes_everything(rng):
    assert not spatial_mask(_window(rng), 1.0, rng).tokens.any()


def test_spatial_mask_hits_same_channels_everywhere(rng):
    masked = spatial_mask(_window(rng, b=10), 0.3, rng).tokens
    zero_channels = np.all(masked == 0.0, axis=(0, 1))
    assert zero_channels.sum() == 3
    assert np.all(masked[:, :, ~zero_channels] != 0.0)


def test_spatial_mask_token_mode(rng):
    masked = spatial_mask(_window(rng, p=4), 0.5, rng, mode='tokens').tokens
    assert np.all(masked == 0.0, axis=(0, 2)).sum() == 2


def test_spatial_mask_keeps_window_metadata(rng):
    masked = spatial_mask(_window(rng), 0.5, rng)
    assert (masked.window_start, masked.subject_id) == (2, 1)


def test_interpolation_formula_oracle():
    tokens = np.stack([np.full((1, 2), v) for v in (1.0, 2.0, 4.0)]).astype(np.float32)
    matrix = interpolation_matrix(3, [1])
    out = np.einsum('ij,j...->i...', matrix, tokens)
    assert out[1, 0, 0] == pytest.approx(2 / 3 * 1.0 + 2 / 3 * 4.0)
    assert out[0, 0, 0] == 1.0 and out[2, 0, 0] == 4.0


def test_interpolating_a_constant_pair_halves_it(rng):
    window = FmriWindow(tokens=np.full((2, 3, 4), 6.0, dtype=np.float32))
    out = temporal_interpolate(window, 0.5, rng).tokens
    halved = [bool(np.allclose(frame, 3.0)) for frame in out]
    assert sorted(halved) == [False, True]


def test_normalized_interpolation_preserves_constants(rng):
    window = FmriWindow(tokens=np.full((4, 2, 2), 5.0, dtype=np.float32))
    out = temporal_interpolate(window, 1.0, rng, normalize=True).tokens
    np.testing.assert_allclose(out, 5.0, rtol=1e-6)


def test_interpolation_uses_original_frames():
    matrix = interpolation_matrix(3, [0, 1])
    assert matrix[1, 0] == pytest.approx(2 / 3)
    assert matrix[2].tolist() == [0.0, 0.0, 1.0]


def test_single_frame_window_is_invalid(rng):
    with pytest.raises(InvalidWindowError):
        temporal_interpolate(_window(rng, w=1), 0.5, rng)
    with pytest.raises(InvalidWindowError):
        temporal_interpolate_batch(torch.zeros(2, 1, 3, 4), 0.5, torch.Generator().manual_seed(0))


def test_batch_versions_mask_per_element():
    tokens = torch.ones(6, 2, 4, 10)
    generator = torch.Generator().manual_seed(0)
    masked = spatial_mask_batch(tokens, 0.2, generator)
    assert torch.all((masked == 0).all(dim=(1, 2)).sum(dim=1) == 2)
    interp = temporal_interpolate_batch(tokens, 0.5, generator)
    halved = torch.isclose(interp, torch.tensor(0.5)).all(dim=(2, 3))
    assert torch.all(halved.sum(dim=1) == 1)


def test_config_validation():
    with pytest.raises(ConfigError):
        AugmentConfig(gamma_spa=1.5)
    with pytest.raises(ConfigError):
        AugmentConfig(mode='pixels')
