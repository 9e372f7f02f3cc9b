"""
### patching.py
#### Functions:
    - num_patches
    - pad_voxels
    - patchify
    - inverse_project
    - spread_tokens_to_voxels

Voxels are flattened to 1D, zero-padded to a multiple of the patch size and cut into
contiguous patches; each patch is projected to a b-dimensional token by one linear map
(the encoder's FC layer).
"""

from dataclasses import dataclass
from math import ceil

import numpy as np

from brainvidpy._tools.tools import require_finite
from brainvidpy.errors import ConfigError, NumericalError


@dataclass(frozen=True)
class PatchConfig:
    patch_size: int = 16
    embed_dim: int = 64
    pad_value: float = 0.0

    def __post_init__(self):
        if self.patch_size < 1:
            raise ConfigError(f"patch_size must be >= 1, got {self.patch_size}")
        if self.embed_dim < 1:
            raise ConfigError(f"embed_dim must be >= 1, got {self.embed_dim}")


@dataclass
class FmriFrame:
    voxels: np.ndarray
    timestamp_index: int = 0
    repetition_time_s: float = 2.0

    def __post_init__(self):
        self.voxels = np.asarray(self.voxels, dtype=np.float32).reshape(-1)
        if self.voxels.size == 0:
            raise ConfigError("FmriFrame needs at least one voxel")


def num_patches(n_voxels: int, patch_size: int) -> int:
    return ceil(n_voxels / patch_size)


def pad_voxels(voxels: np.ndarray, cfg: PatchConfig) -> np.ndarray:
    """Pads the last axis to a multiple of `cfg.patch_size` with `cfg.pad_value`.

    #### Returns:
        padded (np.ndarray): [..., p * patch_size]
    """
    voxels = np.asarray(voxels)
    extra = num_patches(voxels.shape[-1], cfg.patch_size) * cfg.patch_size - voxels.shape[-1]
    if extra == 0:
        return voxels
    width = [(0, 0)] * (voxels.ndim - 1) + [(0, extra)]
    return np.pad(voxels, width, constant_values=cfg.pad_value)


def _check_weights(cfg: PatchConfig, embed_weights: np.ndarray) -> np.ndarray:
    embed_weights = np.asarray(embed_weights)
    if embed_weights.shape != (cfg.patch_size, cfg.embed_dim):
        raise ConfigError(f"embed_weights must be [{cfg.patch_size}, {cfg.embed_dim}], got {list(embed_weights.shape)}")
    return embed_weights


@require_finite("frame.voxels", "embed_weights")
def patchify(frame: FmriFrame, cfg: PatchConfig, embed_weights: np.ndarray) -> np.ndarray:
    """Cuts a frame into contiguous patches and projects each one to a token.

    #### Args:
        frame (FmriFrame): Flattened fMRI frame with V voxels.
        cfg (PatchConfig): Patch size, embedding size and pad value.
        embed_weights (np.ndarray): [patch_size, b] projection.

    #### Returns:
        tokens (np.ndarray): [p, b] with p = ceil(V / patch_size)
    """
    embed_weights = _check_weights(cfg, embed_weights)
    patches = pad_voxels(frame.voxels, cfg).reshape(-1, cfg.patch_size)
    return (patches.astype(np.float64) @ embed_weights.astype(np.float64)).astype(np.float32)


def inverse_project(tokens: np.ndarray, cfg: PatchConfig, embed_weights: np.ndarray, *, n_voxels: int | None=None, policy: str='pinv', timestamp_index: int=0) -> FmriFrame:
    """Maps tokens back to voxels through the pseudo-inverse of the token projection.

    #### Args:
        tokens (np.ndarray): [p, b]
        cfg (PatchConfig): Patch geometry.
        embed_weights (np.ndarray): [patch_size, b] projection used by `patchify`.
        n_voxels (int, optional): Voxel count before padding. Defaults to p * patch_size.
        policy (str, optional): 'pinv' always uses the Moore-Penrose inverse; 'exact' first
            requires full row rank. Defaults to 'pinv'.

    #### Returns:
        frame (FmriFrame): Padding voxels stripped.
    """
    embed_weights = _check_weights(cfg, embed_weights).astype(np.float64)
    tokens = np.asarray(tokens, dtype=np.float64)
    if policy == 'exact':
        if np.linalg.matrix_rank(embed_weights) < cfg.patch_size:
            raise NumericalError("embed_weights is rank deficient; use policy='pinv'")
    elif policy != 'pinv':
        raise ConfigError(f"unknown inverse policy '{policy}'")
    voxels = (tokens @ np.linalg.pinv(embed_weights)).reshape(-1)
    if n_voxels is not None:
        voxels = voxels[:n_voxels]
    return FmriFrame(voxels=voxels.astype(np.float32), timestamp_index=timestamp_index)


def spread_tokens_to_voxels(scores: np.ndarray, cfg: PatchConfig, n_voxels: int) -> np.ndarray:
    """Spreads each token score uniformly over its patch's voxels.

    Scores of the same patch in different frames add up, so the total mass over all voxels
    equals the total token mass minus whatever lands on padding.

    #### Args:
        scores (np.ndarray): [w, p] or [p] per-token scores.
        cfg (PatchConfig): Patch geometry.
        n_voxels (int): Voxels before padding.

    #### Returns:
        per_voxel (np.ndarray): [n_voxels] float64
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 2:
        scores = scores.sum(axis=0)
    if scores.shape[0] != num_patches(n_voxels, cfg.patch_size):
        raise ConfigError(f"{scores.shape[0]} token scores do not match {n_voxels} voxels")
    return np.repeat(scores / cfg.patch_size, cfg.patch_size)[:n_voxels]
