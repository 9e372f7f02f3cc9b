"""
### sampling.py
#### Functions:
    - ddim_timesteps
    - ddim_coefficients
    - sample

DDIM update from step t to the previous kept step:

    x0_hat = (z_t - sqrt(1 - ab_t) * eps_hat) / sqrt(ab_t)
    z_prev = sqrt(ab_prev) * x0_hat + sqrt(1 - ab_prev - sigma^2) * eps_hat + sigma * noise
    sigma  = eta * sqrt((1 - ab_prev) / (1 - ab_t)) * sqrt(1 - ab_t / ab_prev)

Both the starting latents and the fresh noise of stochastic steps (eta > 0) come from the
dependent-noise prior.
"""

import logging

import numpy as np
import torch

from brainvidpy.diffusion.denoiser import PseudoUNet
from brainvidpy.diffusion.noise import DependentNoiseSpec, dependent_noise
from brainvidpy.diffusion.schedule import NoiseSchedule
from brainvidpy.errors import ConfigError

LOGGER = logging.getLogger(__name__)


def ddim_timesteps(T: int, steps: int) -> np.ndarray:
    """`steps` distinct steps from T - 1 down to 0."""
    if not 1 <= steps <= T:
        raise ConfigError(f"ddim steps must be in 1..{T}, got {steps}")
    if steps == 1:
        return np.array([T - 1])
    return np.unique(np.round(np.linspace(0, T - 1, steps)).astype(np.int64))[::-1].copy()


def ddim_coefficients(ab_t: float, ab_prev: float, eta: float) -> tuple[float, float, float]:
    """Weights of x0_hat, eps_hat and fresh noise in the DDIM update.

    #### Returns:
        (c_x0, c_eps, sigma)
    """
    sigma = eta * np.sqrt((1 - ab_prev) / (1 - ab_t)) * np.sqrt(1 - ab_t / ab_prev)
    c_eps = np.sqrt(max(1 - ab_prev - sigma ** 2, 0.0))
    return float(np.sqrt(ab_prev)), float(c_eps), float(sigma)


@torch.no_grad()
def sample(denoiser: PseudoUNet, condition: torch.Tensor, schedule: NoiseSchedule, *, frames: int, latent_shape, steps_ddim: int=50, beta: float=0.5, eta: float=0.0, generator: torch.Generator) -> torch.Tensor:
    """Generates latent clips for a batch of conditions.

    #### Args:
        denoiser (PseudoUNet): Trained noise predictor.
        condition (torch.Tensor): [n, q, d] or [q, d] fMRI embeddings.
        schedule (NoiseSchedule)
        frames (int): m latent frames per clip.
        latent_shape (tuple of int): (c, h, w) of one latent frame.
        steps_ddim (int, optional): Number of denoising steps, <= T. Defaults to 50.
        beta (float, optional): Dependent-noise share. Defaults to 0.5.
        eta (float, optional): 0 is deterministic. Defaults to 0.0.
        generator (torch.Generator): Source of all noise.

    #### Returns:
        z0 (torch.Tensor): [n, m, c, h, w] (no batch axis for an unbatched condition)
    """
    if eta < 0:
        raise ConfigError(f"eta must be >= 0, got {eta}")
    unbatched = condition.ndim == 2
    cond = condition[None] if unbatched else condition
    n = cond.shape[0]
    spec = DependentNoiseSpec(beta=beta, frames=frames)
    dtype = next(denoiser.parameters()).dtype
    cond = cond.to(dtype)
    z = dependent_noise(spec, latent_shape, batch=n, generator=generator, dtype=dtype)
    timesteps = ddim_timesteps(schedule.T, steps_ddim)

    denoiser.eval()
    for i, t in enumerate(timesteps):
        ab_t = float(schedule.alpha_bar[t])
        ab_prev = float(schedule.alpha_bar[timesteps[i + 1]]) if i + 1 < len(timesteps) else 1.0
        eps = denoiser(z, torch.full((n,), int(t), dtype=torch.long), cond)
        x0 = (z - (1 - ab_t) ** 0.5 * eps) / ab_t ** 0.5
        c_x0, c_eps, sigma = ddim_coefficients(ab_t, ab_prev, eta)
        z = c_x0 * x0 + c_eps * eps
        if sigma > 0:
            z = z + sigma * dependent_noise(spec, latent_shape, batch=n, generator=generator, dtype=dtype)
    LOGGER.debug("sampled", extra={"stage": "decode", "clips": n, "ddim_steps": len(timesteps), "eta": eta, "beta": beta})
    return z[0] if unbatched else z
