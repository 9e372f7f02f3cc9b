"""
### rois.py
#### Functions:
    - make_roi_layout

Synthetic stand-ins for five Yeo17 networks, laid out as disjoint contiguous voxel blocks.
"""

from dataclasses import dataclass, field

import numpy as np

from brainvidpy.errors import ConfigError

ROI_NAMES = ('VisCent', 'VisPeri', 'DorsAttnA', 'DorsAttnB', 'DefaultA')
ROI_FRACTIONS = {'VisCent': 0.25, 'VisPeri': 0.1875, 'DorsAttnA': 0.125, 'DorsAttnB': 0.125, 'DefaultA': 0.1875}
VISUAL_ROIS = ('VisCent', 'VisPeri')
MOTION_ROIS = ('DorsAttnA', 'DorsAttnB')


@dataclass
class RoiLayout:
    masks: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_voxels(self) -> int:
        return int(next(iter(self.masks.values())).shape[0])

    def union(self, names=None) -> np.ndarray:
        names = names or tuple(self.masks)
        return np.logical_or.reduce([self.masks[n] for n in names])

    def labels(self) -> np.ndarray:
        """Per-voxel ROI index (position in `masks`), -1 where unassigned."""
        labels = np.full(self.n_voxels, -1, dtype=np.int64)
        for k, mask in enumerate(self.masks.values()):
            labels[mask] = k
        return labels


def make_roi_layout(n_voxels: int, *, patch_size: int=1) -> RoiLayout:
    """Contiguous, disjoint ROI blocks; the last ~12 % of voxels stay unassigned.

    Blocks are whole patches when there are at least eight patches, so every token then
    belongs to a single ROI.

    #### Args:
        n_voxels (int): V
        patch_size (int, optional): Alignment unit. Defaults to 1.

    #### Returns:
        layout (RoiLayout)
    """
    unit = patch_size if n_voxels // patch_size >= 8 else 1
    units = n_voxels // unit
    if units < len(ROI_NAMES):
        raise ConfigError(f"{n_voxels} voxels cannot hold {len(ROI_NAMES)} ROIs")
    masks, cursor = {}, 0
    for name in ROI_NAMES:
        size = max(1, int(ROI_FRACTIONS[name] * units)) * unit
        mask = np.zeros(n_voxels, dtype=bool)
        mask[cursor:cursor + size] = True
        masks[name] = mask
        cursor += size
    return RoiLayout(masks=masks)
