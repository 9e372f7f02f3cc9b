"""
### pretrain.py
#### Functions:
    - random_token_mask
    - reconstruction_loss
    - mae_pretrain

Masked-token reconstruction pretraining of the encoder. A random share of the S tokens of
every window is swapped for the learned mask token; a linear decoder predicts the raw patch
voxels from the final hidden states and the loss is the MSE over the masked tokens.
"""

import logging

import numpy as np
import pandas as pd
import torch
from torch import nn

from brainvidpy._tools.tools import counter_rng, torch_generator
from brainvidpy.errors import ConfigError, NumericalAbortError
from brainvidpy.phase1.augment import ratio_count
from brainvidpy.phase1.encoder import FmriEncoder

LOGGER = logging.getLogger(__name__)


def random_token_mask(n: int, s: int, mask_ratio: float, generator: torch.Generator) -> torch.Tensor:
    """[n, s] bool mask with max(1, round(mask_ratio * s)) True entries per row."""
    if not 0.0 < mask_ratio < 1.0:
        raise ConfigError(f"mask_ratio must be in (0, 1), got {mask_ratio}")
    count = min(s - 1, max(1, ratio_count(mask_ratio, s)))
    order = torch.argsort(torch.rand(n, s, generator=generator), dim=1)
    mask = torch.zeros(n, s, dtype=torch.bool)
    mask.scatter_(1, order[:, :count], True)
    return mask


def reconstruction_loss(encoder: FmriEncoder, decoder: nn.Module, voxels: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    patches = encoder.patches(voxels)
    target = patches.reshape(patches.shape[0], -1, patches.shape[-1])
    pred = decoder(encoder.hidden(encoder.token_embed(patches), mask))
    per_token = ((pred - target) ** 2).mean(dim=-1)
    return (per_token * mask).sum() / mask.sum()


def mae_pretrain(encoder: FmriEncoder, voxels: np.ndarray, *, mask_ratio: float=0.75, steps: int=500, lr: float=1e-3, batch_size: int=32, seed: int=0, log_every: int=50) -> tuple[FmriEncoder, pd.DataFrame]:
    """Trains `encoder` in place on masked-token reconstruction.

    #### Args:
        encoder (FmriEncoder): Encoder to train.
        voxels (np.ndarray): [N, w, V] training windows.
        mask_ratio (float, optional): Share of tokens masked, in (0, 1). Defaults to 0.75.
        steps (int, optional): Optimizer steps. Defaults to 500.
        lr (float, optional): AdamW learning rate. Defaults to 1e-3.
        batch_size (int, optional): Defaults to 32.
        seed (int, optional): Decoder init, batches and masks derive from it. Defaults to 0.
        log_every (int, optional): Defaults to 50.

    #### Returns:
        (encoder, curve): curve has columns step, loss
    """
    voxels = np.asarray(voxels, dtype=np.float32)
    torch.manual_seed(seed)
    decoder = nn.Linear(encoder.config.embed_dim, encoder.config.patch_size)
    params = list(encoder.parameters()) + list(decoder.parameters())
    optimizer = torch.optim.AdamW(params, lr=lr, weight_decay=0.0)
    s = encoder.config.window * encoder.config.n_patches
    batch_size = min(batch_size, voxels.shape[0])

    encoder.train()
    rows = []
    last_good = {k: v.clone() for k, v in encoder.state_dict().items()}
    for step in range(steps):
        idx = counter_rng(seed, 11, step).choice(voxels.shape[0], size=batch_size, replace=False)
        batch = torch.from_numpy(voxels[idx])
        mask = random_token_mask(batch_size, s, mask_ratio, torch_generator(seed, 12, step))
        loss = reconstruction_loss(encoder, decoder, batch, mask)
        if not torch.isfinite(loss):
            encoder.load_state_dict(last_good)
            raise NumericalAbortError("masked reconstruction loss diverged", step=step, last_good_state=last_good)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        last_good = {k: v.detach().clone() for k, v in encoder.state_dict().items()}
        rows.append({"step": step, "loss": float(loss)})
        if step % log_every == 0 or step == steps - 1:
            LOGGER.info("pretrain step", extra={"stage": "pretrain", "step": step, "loss": float(loss)})
    encoder.eval()
    return encoder, pd.DataFrame(rows, columns=["step", "loss"])
