"""
### windows.py
#### Functions:
    - window_starts
    - stack_windows
    - make_windows

Sliding windows of w consecutive fMRI frames absorb the hemodynamic lag.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from brainvidpy.core.patching import FmriFrame, PatchConfig, patchify
from brainvidpy.errors import ConfigError, EmptyInputError


@dataclass
class FmriWindow:
    tokens: np.ndarray
    window_start: int = 0
    subject_id: int = 0

    @property
    def size(self) -> int:
        return self.tokens.shape[0]


def window_starts(length: int, w: int, stride: int=1) -> list[int]:
    """Start index of every window; count = floor((length - w) / stride) + 1."""
    if stride < 1 or w < 1:
        raise ConfigError(f"window size and stride must be >= 1, got w={w}, stride={stride}")
    if length < w:
        raise EmptyInputError(f"{length} frames cannot fill a window of {w}")
    return list(range(0, length - w + 1, stride))


def stack_windows(voxels: np.ndarray, w: int, stride: int=1) -> np.ndarray:
    """[T, V] frames → [K, w, V] windows in temporal order."""
    voxels = np.asarray(voxels)
    return np.stack([voxels[s:s + w] for s in window_starts(voxels.shape[0], w, stride)])


def make_windows(frames: Sequence[FmriFrame], w: int, stride: int=1, *, cfg: PatchConfig, embed_weights: np.ndarray, subject_id: int=0) -> list[FmriWindow]:
    """Windows of tokenized frames.

    #### Args:
        frames (sequence of FmriFrame): Scans in temporal order.
        w (int): Window size.
        stride (int, optional): Step between window starts. Defaults to 1.
        cfg (PatchConfig): Patch geometry.
        embed_weights (np.ndarray): [patch_size, b] token projection.
        subject_id (int, optional): Defaults to 0.

    #### Returns:
        windows (list of FmriWindow): tokens [w, p, b] each
    """
    tokens = [patchify(frame, cfg, embed_weights) for frame in frames]
    return [
        FmriWindow(tokens=np.stack(tokens[s:s + w]), window_start=s, subject_id=subject_id)
        for s in window_starts(len(frames), w, stride)
    ]
