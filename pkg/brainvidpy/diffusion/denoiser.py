"""
### denoiser.py
#### Functions:
    - sinusoidal_embedding
    - PseudoUNet

Noise predictor eps(z_t, t, c) over latent clips [n, m, c, h, w]. Convolutions run per frame
(2D kernels on frames folded into the batch); each attention stage applies spatial
self-attention, cross-attention to the fMRI condition and causal temporal attention, in that
order. Two resolutions with one skip connection.
"""

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from brainvidpy.diffusion.attention import CrossAttention, SpatialSelfAttention, TemporalAttention
from brainvidpy.errors import ConfigError

FREEZE_MODES = ('none', 'attention')


@dataclass(frozen=True)
class DenoiserConfig:
    latent_channels: int = 4
    channels: tuple[int, int] = (32, 64)
    cond_dim: int = 32
    heads: int = 4
    temporal_window: int = 2
    time_dim: int = 64
    groups: int = 8

    def __post_init__(self):
        if self.temporal_window < 1:
            raise ConfigError(f"temporal_window must be >= 1, got {self.temporal_window}")
        for ch in self.channels:
            if ch % self.heads or ch % self.groups:
                raise ConfigError(f"channel width {ch} must be divisible by heads ({self.heads}) and groups ({self.groups})")


def sinusoidal_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(-torch.log(torch.tensor(10000.0, dtype=torch.float64)) * torch.arange(half, dtype=torch.float64) / half)
    args = t.to(torch.float64)[:, None] * freqs[None]
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=-1)
    return F.pad(emb, (0, dim - 2 * half))


class ResBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, time_dim: int, groups: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(min(groups, c_in), c_in)
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.time = nn.Linear(time_dim, c_out)
        self.norm2 = nn.GroupNorm(groups, c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.skip = nn.Conv2d(c_in, c_out, 1) if c_in != c_out else nn.Identity()

    def forward(self, x: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.time(temb)[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return self.skip(x) + h


class AttentionStage(nn.Module):
    def __init__(self, dim: int, cond_dim: int, heads: int, window: int):
        super().__init__()
        self.spatial = SpatialSelfAttention(dim, heads)
        self.cross = CrossAttention(dim, cond_dim, heads)
        self.temporal = TemporalAttention(dim, heads, window)

    def forward(self, x: torch.Tensor, cond: torch.Tensor, frames: int) -> torch.Tensor:
        nm, c, h, w = x.shape
        tokens = x.flatten(2).transpose(1, 2)
        tokens = self.spatial(tokens)
        tokens = self.cross(tokens, cond)
        tokens = self.temporal(tokens.reshape(nm // frames, frames, h * w, c)).reshape(nm, h * w, c)
        return tokens.transpose(1, 2).reshape(nm, c, h, w)


class PseudoUNet(nn.Module):
    def __init__(self, config: DenoiserConfig=DenoiserConfig()):
        super().__init__()
        self.config = config
        c0, c1 = config.channels
        td, g = config.time_dim, config.groups
        self.time_mlp = nn.Sequential(nn.Linear(td, td), nn.SiLU(), nn.Linear(td, td))
        self.conv_in = nn.Conv2d(config.latent_channels, c0, 3, padding=1)
        self.down_res = ResBlock(c0, c0, td, g)
        self.down_attn = AttentionStage(c0, config.cond_dim, config.heads, config.temporal_window)
        self.downsample = nn.Conv2d(c0, c0, 3, stride=2, padding=1)
        self.mid_res = ResBlock(c0, c1, td, g)
        self.mid_attn = AttentionStage(c1, config.cond_dim, config.heads, config.temporal_window)
        self.up_res = ResBlock(c1 + c0, c0, td, g)
        self.up_attn = AttentionStage(c0, config.cond_dim, config.heads, config.temporal_window)
        self.norm_out = nn.GroupNorm(g, c0)
        self.conv_out = nn.Conv2d(c0, config.latent_channels, 3, padding=1)

    def attention_parameters(self) -> list[nn.Parameter]:
        """Spatial self-attention, cross-attention and temporal attention weights."""
        return [p for stage in (self.down_attn, self.mid_attn, self.up_attn) for p in stage.parameters()]

    def apply_freeze(self, mode: str) -> None:
        """'none' trains everything; 'attention' trains only the attention weights."""
        if mode not in FREEZE_MODES:
            raise ConfigError(f"unknown freeze mode '{mode}', choose from {FREEZE_MODES}")
        trainable = {id(p) for p in self.attention_parameters()} if mode == 'attention' else None
        for p in self.parameters():
            p.requires_grad_(trainable is None or id(p) in trainable)

    def forward(self, z: torch.Tensor, t: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        """Predicts the noise in `z`.

        #### Args:
            z (torch.Tensor): [n, m, c, h, w] noisy latents, h and w even
            t (torch.Tensor): [n] diffusion steps
            cond (torch.Tensor): [n, q, cond_dim] fMRI embedding

        #### Returns:
            eps (torch.Tensor): same shape as z
        """
        cfg = self.config
        if z.ndim != 5 or z.shape[2] != cfg.latent_channels:
            raise ConfigError(f"expected latents [n, m, {cfg.latent_channels}, h, w], got {list(z.shape)}")
        if z.shape[3] % 2 or z.shape[4] % 2:
            raise ConfigError(f"latent height and width must be even, got {z.shape[3]}x{z.shape[4]}")
        if cond.ndim != 3 or cond.shape[0] != z.shape[0] or cond.shape[2] != cfg.cond_dim:
            raise ConfigError(f"expected condition [{z.shape[0]}, q, {cfg.cond_dim}], got {list(cond.shape)}")
        n, m = z.shape[:2]
        t = torch.as_tensor(t).reshape(-1).expand(n)
        temb = self.time_mlp(sinusoidal_embedding(t, cfg.time_dim).to(z.dtype)).repeat_interleave(m, dim=0)
        cond = cond.to(z.dtype).repeat_interleave(m, dim=0)

        x = self.conv_in(z.flatten(0, 1))
        skip = self.down_attn(self.down_res(x, temb), cond, m)
        x = self.mid_attn(self.mid_res(self.downsample(skip), temb), cond, m)
        x = F.interpolate(x, scale_factor=2, mode='nearest')
        x = self.up_attn(self.up_res(torch.cat([x, skip], dim=1), temb), cond, m)
        x = self.conv_out(F.silu(self.norm_out(x)))
        return x.reshape(z.shape)
