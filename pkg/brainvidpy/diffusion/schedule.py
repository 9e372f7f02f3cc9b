"""
### schedule.py
#### Functions:
    - linear_betas
    - cosine_betas
    - make_schedule
    - forward_diffuse

    z_t = sqrt(alpha_bar_t) * z_0 + sqrt(1 - alpha_bar_t) * noise
"""

from dataclasses import dataclass
from math import cos, pi

import numpy as np
import torch

from brainvidpy.errors import ConfigError, TimestepError


@dataclass(frozen=True)
class NoiseSchedule:
    kind: str
    betas: np.ndarray
    alpha_bar: np.ndarray

    @property
    def T(self) -> int:
        return int(self.betas.shape[0])

    def alpha_bar_at(self, t: torch.Tensor) -> torch.Tensor:
        return torch.as_tensor(self.alpha_bar, dtype=torch.float64)[t]


def linear_betas(T: int, *, beta_start: float=1e-4, beta_end: float=2e-2) -> np.ndarray:
    return np.linspace(beta_start, beta_end, T, dtype=np.float64)


def cosine_betas(T: int, *, s: float=0.008, max_beta: float=0.999) -> np.ndarray:
    """Betas of the squared-cosine alpha_bar curve, clipped at `max_beta`."""
    f = [cos((k / T + s) / (1 + s) * pi / 2) ** 2 for k in range(T + 1)]
    return np.array([min(1 - f[k + 1] / f[k], max_beta) for k in range(T)], dtype=np.float64)


SCHEDULES = {
    'linear': linear_betas,
    'cosine': cosine_betas,
}


def make_schedule(T: int, kind: str='linear') -> NoiseSchedule:
    """Noise schedule with T steps.

    #### Args:
        T (int): Number of diffusion steps, >= 2.
        kind (str, optional): 'linear' (betas 1e-4 .. 2e-2) or 'cosine'. Defaults to 'linear'.

    #### Returns:
        schedule (NoiseSchedule): alpha_bar positive and non-increasing
    """
    if T < 2:
        raise ConfigError(f"a schedule needs T >= 2, got {T}")
    if kind not in SCHEDULES:
        raise ConfigError(f"unknown schedule '{kind}', choose from {sorted(SCHEDULES)}")
    betas = SCHEDULES[kind](T)
    return NoiseSchedule(kind=kind, betas=betas, alpha_bar=np.cumprod(1.0 - betas))


def forward_diffuse(z0: torch.Tensor, t, noise: torch.Tensor, schedule: NoiseSchedule) -> torch.Tensor:
    """Corrupts clean latents to step t.

    #### Args:
        z0 (torch.Tensor): [m, c, h, w] or batched [n, m, c, h, w]
        t (int or torch.Tensor): step, or [n] steps for a batch; 0 <= t < T
        noise (torch.Tensor): same shape as z0
        schedule (NoiseSchedule)

    #### Returns:
        z_t (torch.Tensor)
    """
    if noise.shape != z0.shape:
        raise ConfigError(f"noise {list(noise.shape)} does not match latents {list(z0.shape)}")
    t = torch.as_tensor(t, dtype=torch.long)
    if bool((t < 0).any()) or bool((t >= schedule.T).any()):
        raise TimestepError(f"timestep outside 0..{schedule.T - 1}")
    ab = schedule.alpha_bar_at(t).to(z0.dtype)
    ab = ab.reshape(ab.shape + (1,) * (z0.ndim - ab.ndim))
    return ab.sqrt() * z0 + (1 - ab).sqrt() * noise
