"""
### roi.py
#### Functions:
    - roi_aggregate
"""

import numpy as np

from brainvidpy.errors import UndefinedRoiError
from brainvidpy.synthdata.rois import RoiLayout


def roi_aggregate(summary, layout: RoiLayout) -> dict[str, float]:
    """Mean attention inside every ROI.

    #### Args:
        summary (AttentionSummary or np.ndarray): per-voxel map [V]
        layout (RoiLayout): Disjoint ROI masks.

    #### Returns:
        means (dict): roi name → mean
    """
    per_voxel = np.asarray(getattr(summary, 'per_voxel', summary), dtype=np.float64)
    if per_voxel.shape[0] != layout.n_voxels:
        raise UndefinedRoiError(f"map has {per_voxel.shape[0]} voxels, layout {layout.n_voxels}")
    coverage = np.zeros(layout.n_voxels, dtype=np.int64)
    means = {}
    for name, mask in layout.masks.items():
        if not mask.any():
            raise UndefinedRoiError(f"ROI '{name}' has no voxels")
        coverage += mask
        means[name] = float(per_voxel[mask].mean())
    if (coverage > 1).any():
        raise UndefinedRoiError("ROI masks overlap")
    return means
