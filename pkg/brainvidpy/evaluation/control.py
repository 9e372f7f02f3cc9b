"""
### control.py
#### Functions:
    - time_average_control

Replaces every frame of a window by the temporal mean of the window, which keeps what the
window shows and removes how it changes.
"""

import numpy as np

from brainvidpy.errors import InvalidWindowError
from brainvidpy.synthdata.generator import SynthSplit


def time_average_control(data: np.ndarray | SynthSplit) -> np.ndarray | SynthSplit:
    """Time-averaged copy of fMRI windows.

    #### Args:
        data (np.ndarray or SynthSplit): [N, w, V] windows, or a split

    #### Returns:
        averaged (same type as `data`): every frame equal to its window mean
    """
    if isinstance(data, SynthSplit):
        return data.with_fmri(time_average_control(data.fmri))
    voxels = np.asarray(data)
    if voxels.ndim != 3 or voxels.shape[1] < 2:
        raise InvalidWindowError(f"time averaging needs [N, w >= 2, V] windows, got {list(voxels.shape)}")
    return np.repeat(voxels.mean(axis=1, keepdims=True), voxels.shape[1], axis=1).astype(voxels.dtype)
