"""
### training.py
#### Functions:
    - encode_clips
    - train_phase2

Each step draws t uniformly, corrupts the clip latents with dependent noise and regresses the
denoiser output onto that noise (MSE).
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F
from torch import nn

from brainvidpy._tools.tools import counter_rng, torch_generator
from brainvidpy.diffusion.codec import video_to_tensor
from brainvidpy.diffusion.denoiser import FREEZE_MODES, PseudoUNet
from brainvidpy.diffusion.noise import DependentNoiseSpec, dependent_noise
from brainvidpy.diffusion.schedule import NoiseSchedule, forward_diffuse
from brainvidpy.errors import ConfigError, NumericalAbortError
from brainvidpy.phase1.encoder import FmriEncoder

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class Phase2Config:
    beta: float = 0.5
    steps: int = 2000
    lr: float = 1e-3
    batch_size: int = 8
    finetune_encoder: bool = False
    freeze: str = 'none'
    log_every: int = 100

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta must be in [0, 1], got {self.beta}")
        if self.freeze not in FREEZE_MODES:
            raise ConfigError(f"freeze must be one of {FREEZE_MODES}, got '{self.freeze}'")


@torch.no_grad()
def encode_clips(codec: nn.Module, clips: np.ndarray, *, batch_size: int=64) -> torch.Tensor:
    """[N, m, H, W, 3] pixels → [N, m, c, H/4, W/4] latents."""
    x = video_to_tensor(clips)
    return torch.cat([codec.encode(x[i:i + batch_size]) for i in range(0, x.shape[0], batch_size)])


def train_phase2(denoiser: PseudoUNet, codec: nn.Module, encoder: FmriEncoder, clips: np.ndarray, voxels: np.ndarray, schedule: NoiseSchedule, config: Phase2Config=Phase2Config(), *, seed: int=0) -> tuple[PseudoUNet, pd.DataFrame]:
    """Trains the denoiser conditioned on fMRI embeddings.

    #### Args:
        denoiser (PseudoUNet): Trained in place.
        codec (nn.Module): Trained `LatentCodec` or `IdentityCodec`; kept fixed.
        encoder (FmriEncoder): Phase 1 encoder; trained too when `config.finetune_encoder`.
        clips (np.ndarray): [N, m, H, W, 3] target frames.
        voxels (np.ndarray): [N, w, V] matching fMRI windows.
        schedule (NoiseSchedule)
        config (Phase2Config, optional): Defaults to Phase2Config().
        seed (int, optional): Defaults to 0.

    #### Returns:
        (denoiser, curve): curve columns step, loss
    """
    z0_all = encode_clips(codec, clips)
    voxels = torch.as_tensor(np.asarray(voxels, dtype=np.float32))
    if voxels.shape[0] != z0_all.shape[0]:
        raise ConfigError(f"{z0_all.shape[0]} clips but {voxels.shape[0]} fMRI windows")
    n_items, m = z0_all.shape[:2]
    spec = DependentNoiseSpec(beta=config.beta, frames=m)

    denoiser.apply_freeze(config.freeze)
    params = [p for p in denoiser.parameters() if p.requires_grad]
    if config.finetune_encoder:
        encoder.train()
        params += list(encoder.parameters())
        cond_all = None
    else:
        encoder.eval()
        with torch.no_grad():
            cond_all = encoder(voxels)
    optimizer = torch.optim.AdamW(params, lr=config.lr, weight_decay=0.0)
    batch_size = min(config.batch_size, n_items)

    denoiser.train()
    rows = []
    last_good = {k: v.clone() for k, v in denoiser.state_dict().items()}
    for step in range(config.steps):
        idx = torch.from_numpy(counter_rng(seed, 31, step).choice(n_items, size=batch_size, replace=False))
        generator = torch_generator(seed, 32, step)
        z0 = z0_all[idx]
        cond = encoder(voxels[idx]) if cond_all is None else cond_all[idx]
        t = torch.randint(0, schedule.T, (batch_size,), generator=generator)
        noise = dependent_noise(spec, z0.shape[2:], batch=batch_size, generator=generator)
        loss = F.mse_loss(denoiser(forward_diffuse(z0, t, noise, schedule), t, cond), noise)
        if not torch.isfinite(loss):
            denoiser.load_state_dict(last_good)
            raise NumericalAbortError("phase 2 loss diverged", step=step, last_good_state=last_good)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        last_good = {k: v.detach().clone() for k, v in denoiser.state_dict().items()}
        rows.append({"step": step, "loss": float(loss)})
        if step % config.log_every == 0 or step == config.steps - 1:
            LOGGER.info("phase 2 step", extra={"stage": "train-phase2", "step": step, "loss": float(loss), "beta": config.beta})
    denoiser.eval()
    encoder.eval()
    return denoiser, pd.DataFrame(rows, columns=["step", "loss"])
