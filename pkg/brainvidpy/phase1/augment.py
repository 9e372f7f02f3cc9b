"""
### augment.py
#### Functions:
    - ratio_count
    - spatial_mask
    - temporal_interpolate
    - interpolation_matrix
    - spatial_mask_batch
    - temporal_interpolate_batch

Two views of a window for the contrastive losses: spatially masked tokens and temporally
interpolated frames. The replacement for a selected frame i of a window of w frames is

    v_i <- sum_{j != i} (1 - |i - j| / w) * v_j

computed from the original frames. The weights are used as written and do not sum to one;
``normalize=True`` rescales them.
"""

from dataclasses import dataclass
from math import floor

import numpy as np
import torch

from brainvidpy.core.windows import FmriWindow
from brainvidpy.errors import ConfigError, InvalidWindowError

MASK_MODES = ('channels', 'tokens')


@dataclass(frozen=True)
class AugmentConfig:
    gamma_spa: float = 0.2
    gamma_tem: float = 1 / 3
    mode: str = 'channels'
    normalize: bool = False

    def __post_init__(self):
        for name in ('gamma_spa', 'gamma_tem'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        if self.mode not in MASK_MODES:
            raise ConfigError(f"mask mode must be one of {MASK_MODES}, got '{self.mode}'")


def ratio_count(ratio: float, n: int) -> int:
    """round(ratio * n) with halves rounded up."""
    if not 0.0 <= ratio <= 1.0:
        raise ConfigError(f"ratio must be in [0, 1], got {ratio}")
    return min(n, int(floor(ratio * n + 0.5)))


def interpolation_matrix(w: int, selected, *, normalize: bool=False) -> np.ndarray:
    """Row i of the returned [w, w] matrix builds output frame i from the original frames.

    #### Args:
        w (int): Window size, >= 2.
        selected (iterable of int): Frames to replace.
        normalize (bool, optional): Rescale each replaced row to sum to one. Defaults to False.

    #### Returns:
        matrix (np.ndarray): [w, w] float64; identity rows for unselected frames
    """
    if w < 2:
        raise InvalidWindowError(f"temporal interpolation needs w >= 2, got {w}")
    matrix = np.eye(w)
    idx = np.arange(w)
    for i in selected:
        row = 1.0 - np.abs(i - idx) / w
        row[i] = 0.0
        if normalize:
            row = row / row.sum()
        matrix[i] = row
    return matrix


def spatial_mask(window: FmriWindow, gamma_spa: float, rng: np.random.Generator, *, mode: str='channels') -> FmriWindow:
    """Zeroes round(gamma_spa * b) embedding channels, the same ones in every frame and token.

    With ``mode='tokens'`` whole tokens are zeroed instead: round(gamma_spa * p) patch
    positions, the same ones in every frame.

    #### Args:
        window (FmriWindow): tokens [w, p, b]
        gamma_spa (float): Mask ratio in [0, 1].
        rng (np.random.Generator): Draws the masked positions.

    #### Returns:
        masked (FmriWindow)
    """
    tokens = np.array(window.tokens, copy=True)
    axis = {'channels': 2, 'tokens': 1}.get(mode)
    if axis is None:
        raise ConfigError(f"unknown mask mode '{mode}'")
    n = tokens.shape[axis]
    chosen = rng.choice(n, size=ratio_count(gamma_spa, n), replace=False)
    if axis == 2:
        tokens[:, :, chosen] = 0.0
    else:
        tokens[:, chosen, :] = 0.0
    return FmriWindow(tokens=tokens, window_start=window.window_start, subject_id=window.subject_id)


def temporal_interpolate(window: FmriWindow, gamma_tem: float, rng: np.random.Generator, *, normalize: bool=False) -> FmriWindow:
    """Replaces round(gamma_tem * w) distinct frames by weighted sums of the other frames.

    #### Args:
        window (FmriWindow): tokens [w, p, b]
        gamma_tem (float): Interpolation ratio in [0, 1].
        rng (np.random.Generator): Draws the replaced frames.
        normalize (bool, optional): Defaults to False.

    #### Returns:
        interpolated (FmriWindow)
    """
    w = window.tokens.shape[0]
    if w < 2:
        raise InvalidWindowError(f"temporal interpolation needs w >= 2, got {w}")
    selected = rng.choice(w, size=ratio_count(gamma_tem, w), replace=False)
    matrix = interpolation_matrix(w, selected, normalize=normalize)
    tokens = np.einsum('ij,j...->i...', matrix, window.tokens.astype(np.float64)).astype(window.tokens.dtype)
    unselected = np.setdiff1d(np.arange(w), selected)
    tokens[unselected] = window.tokens[unselected]
    return FmriWindow(tokens=tokens, window_start=window.window_start, subject_id=window.subject_id)


def spatial_mask_batch(tokens: torch.Tensor, gamma_spa: float, generator: torch.Generator, *, mode: str='channels') -> torch.Tensor:
    """Batched `spatial_mask` on [n, w, p, b] tokens; positions re-drawn per batch element."""
    n, _, p, b = tokens.shape
    size = {'channels': b, 'tokens': p}.get(mode)
    if size is None:
        raise ConfigError(f"unknown mask mode '{mode}'")
    count = ratio_count(gamma_spa, size)
    if count == 0:
        return tokens
    order = torch.argsort(torch.rand(n, size, generator=generator), dim=1)
    keep = torch.ones(n, size)
    keep.scatter_(1, order[:, :count], 0.0)
    keep = keep.to(tokens.dtype)
    if mode == 'channels':
        return tokens * keep[:, None, None, :]
    return tokens * keep[:, None, :, None]


def temporal_interpolate_batch(tokens: torch.Tensor, gamma_tem: float, generator: torch.Generator, *, normalize: bool=False) -> torch.Tensor:
    """Batched `temporal_interpolate` on [n, w, p, b] tokens; frames re-drawn per batch element."""
    n, w = tokens.shape[:2]
    if w < 2:
        raise InvalidWindowError(f"temporal interpolation needs w >= 2, got {w}")
    count = ratio_count(gamma_tem, w)
    if count == 0:
        return tokens
    order = torch.argsort(torch.rand(n, w, generator=generator), dim=1)[:, :count]
    matrices = np.stack([interpolation_matrix(w, row.tolist(), normalize=normalize) for row in order])
    matrices = torch.from_numpy(matrices).to(tokens.dtype)
    return torch.einsum('nij,njpb->nipb', matrices, tokens)
