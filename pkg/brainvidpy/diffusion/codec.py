"""
### codec.py
#### Functions:
    - video_to_tensor
    - tensor_to_video
    - IdentityCodec
    - LatentCodec
    - codec_train
    - round_trip_psnr

Pixel clips [n, m, H, W, 3] in [0, 1] <-> latent clips [n, m, c, H/4, W/4].
"""

import logging

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F
from torch import nn

from brainvidpy._tools.tools import counter_rng
from brainvidpy.errors import ConfigError, NumericalAbortError

LOGGER = logging.getLogger(__name__)

FACTOR = 4


def video_to_tensor(video: np.ndarray) -> torch.Tensor:
    """[..., m, H, W, 3] array → [..., m, 3, H, W] float32 tensor."""
    return torch.as_tensor(np.asarray(video, dtype=np.float32)).movedim(-1, -3)


def tensor_to_video(x: torch.Tensor) -> np.ndarray:
    return x.detach().movedim(-3, -1).cpu().numpy().astype(np.float32)


def _check_frame(x: torch.Tensor) -> None:
    if x.shape[-1] % FACTOR or x.shape[-2] % FACTOR:
        raise ConfigError(f"frame size {x.shape[-2]}x{x.shape[-1]} is not divisible by {FACTOR}")


def _upsample(z: torch.Tensor) -> torch.Tensor:
    return z.repeat_interleave(FACTOR, dim=-2).repeat_interleave(FACTOR, dim=-1)


def _conv(c_in: int, c_out: int, kernel: int, *, stride: int=1) -> nn.Conv2d:
    return nn.Conv2d(c_in, c_out, kernel, stride=stride, padding=kernel // 2, bias=False, padding_mode='replicate')


class IdentityCodec(nn.Module):
    """Latents are 4x4 block averages of the pixels; decoding repeats each latent pixel."""

    latent_channels = 3

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        """[..., 3, H, W] → [..., 3, H/4, W/4]"""
        _check_frame(x)
        lead = x.shape[:-3]
        return F.avg_pool2d(x.reshape(-1, *x.shape[-3:]), FACTOR).reshape(*lead, *x.shape[-3:-2], x.shape[-2] // FACTOR, x.shape[-1] // FACTOR)

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        return _upsample(z)


class LatentCodec(nn.Module):
    """Small convolutional autoencoder over a block-mean base.

    The first 3 latent channels are the 4x4 block means of the pixels (as in IdentityCodec); the
    remaining ones encode the detail ``x - upsample(mean)``. The detail path has no biases,
    replicate padding and zero-preserving activations, so a flat frame has zero detail latents and
    decodes exactly. Latents are divided by `scale` to have unit variance.
    """

    def __init__(self, latent_channels: int=8, hidden: int=32):
        super().__init__()
        if latent_channels <= 3:
            raise ConfigError(f"latent_channels must be > 3 (3 block-mean channels plus detail), got {latent_channels}")
        self.latent_channels = latent_channels
        detail = latent_channels - 3
        self.encoder = nn.Sequential(
            _conv(3, hidden, 3, stride=2), nn.SiLU(),
            _conv(hidden, hidden, 3, stride=2), nn.SiLU(),
            _conv(hidden, detail, 1),
        )
        self.decoder = nn.Sequential(
            _conv(detail, hidden, 1), nn.SiLU(),
            nn.Upsample(scale_factor=2, mode='nearest'), _conv(hidden, hidden, 3), nn.SiLU(),
            nn.Upsample(scale_factor=2, mode='nearest'), _conv(hidden, 3, 3),
        )
        self.register_buffer('scale', torch.ones(()))

    def encode_raw(self, x: torch.Tensor) -> torch.Tensor:
        """[b, 3, H, W] → unscaled latents [b, c, H/4, W/4]"""
        base = F.avg_pool2d(x, FACTOR)
        return torch.cat([base, self.encoder(x - _upsample(base))], dim=1)

    def decode_raw(self, z: torch.Tensor) -> torch.Tensor:
        return _upsample(z[:, :3]) + self.decoder(z[:, 3:])

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        _check_frame(x)
        lead = x.shape[:-3]
        z = self.encode_raw(x.reshape(-1, *x.shape[-3:])) / self.scale
        return z.reshape(*lead, *z.shape[1:])

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        lead = z.shape[:-3]
        x = self.decode_raw(z.reshape(-1, *z.shape[-3:]) * self.scale)
        return x.reshape(*lead, *x.shape[1:])


def codec_train(codec: LatentCodec, videos: np.ndarray, *, steps: int=1000, lr: float=2e-3, batch_size: int=64, seed: int=0, log_every: int=100) -> tuple[LatentCodec, pd.DataFrame]:
    """Fits the autoencoder on individual frames, then sets `scale` to the latent std.

    #### Args:
        codec (LatentCodec)
        videos (np.ndarray): [N, m, H, W, 3] in [0, 1]
        steps, lr, batch_size, seed, log_every: training knobs

    #### Returns:
        (codec, curve): curve columns step, loss
    """
    frames = video_to_tensor(np.asarray(videos).reshape(-1, *np.asarray(videos).shape[-3:]))
    _check_frame(frames)
    torch.manual_seed(seed)
    codec.scale.fill_(1.0)
    optimizer = torch.optim.Adam(codec.parameters(), lr=lr)
    batch_size = min(batch_size, frames.shape[0])
    rows = []
    codec.train()
    for step in range(steps):
        idx = counter_rng(seed, 41, step).choice(frames.shape[0], size=batch_size, replace=False)
        batch = frames[idx]
        loss = F.mse_loss(codec.decode_raw(codec.encode_raw(batch)), batch)
        if not torch.isfinite(loss):
            raise NumericalAbortError("codec loss diverged", step=step, last_good_state=None)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        rows.append({"step": step, "loss": float(loss)})
        if step % log_every == 0 or step == steps - 1:
            LOGGER.info("codec step", extra={"stage": "codec", "step": step, "loss": float(loss)})
    codec.eval()
    with torch.no_grad():
        std = float(codec.encode_raw(frames[:512]).std())
        codec.scale.fill_(max(std, 1e-6))
    return codec, pd.DataFrame(rows, columns=["step", "loss"])


@torch.no_grad()
def round_trip_psnr(codec: nn.Module, videos: np.ndarray) -> float:
    """PSNR [dB] of decode(encode(x)) against x for pixel values in [0, 1]."""
    x = video_to_tensor(videos)
    mse = float(F.mse_loss(codec.decode(codec.encode(x)).clamp(0, 1), x))
    return float('inf') if mse == 0 else 10.0 * np.log10(1.0 / mse)
