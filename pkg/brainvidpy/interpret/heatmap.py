"""
### heatmap.py
#### Functions:
    - voxel_grid
    - export_heatmap

Voxels are laid row-major on a near-square grid, coloured blue (low) to red (high) and ROI
borders are drawn in white. A JSON sidecar records the colour range.
"""

import json
from math import ceil, sqrt
from pathlib import Path

import matplotlib
import numpy as np
from PIL import Image

from brainvidpy._tools.tools import atomic_write_bytes
from brainvidpy.synthdata.rois import RoiLayout

BORDER = np.array([255, 255, 255], dtype=np.uint8)
EMPTY = np.array([0, 0, 0], dtype=np.uint8)


def voxel_grid(values: np.ndarray, fill=np.nan) -> np.ndarray:
    """[V] → [rows, cols] with cols = ceil(sqrt(V)); trailing cells hold `fill`."""
    values = np.asarray(values)
    cols = ceil(sqrt(values.size))
    rows = ceil(values.size / cols)
    grid = np.full(rows * cols, fill, dtype=np.result_type(values.dtype, np.asarray(fill).dtype))
    grid[:values.size] = values
    return grid.reshape(rows, cols)


def export_heatmap(summary, layout: RoiLayout, path: str | Path, *, cmap: str='coolwarm', scale: int=8) -> Path:
    """Writes the voxel map as a PNG plus ``<path>.json`` with vmin / vmax.

    #### Args:
        summary (AttentionSummary or np.ndarray): per-voxel map [V]
        layout (RoiLayout): ROI masks for the outlines.
        path (str or Path): PNG path.
        cmap (str, optional): Matplotlib colormap. Defaults to 'coolwarm'.
        scale (int, optional): Pixels per voxel side. Defaults to 8.

    #### Returns:
        path (Path)
    """
    path = Path(path)
    per_voxel = np.asarray(getattr(summary, 'per_voxel', summary), dtype=np.float64)
    vmin, vmax = float(per_voxel.min()), float(per_voxel.max())
    norm = (per_voxel - vmin) / (vmax - vmin) if vmax > vmin else np.full_like(per_voxel, 0.5)

    values = voxel_grid(norm)
    rgb = matplotlib.colormaps[cmap](np.nan_to_num(values, nan=0.0), bytes=True)[..., :3]
    rgb[np.isnan(values)] = EMPTY
    rgb = rgb.repeat(scale, axis=0).repeat(scale, axis=1)

    labels = voxel_grid(layout.labels(), fill=-2).repeat(scale, axis=0).repeat(scale, axis=1)
    edge = np.zeros(labels.shape, dtype=bool)
    edge[:, 1:] |= labels[:, 1:] != labels[:, :-1]
    edge[1:, :] |= labels[1:, :] != labels[:-1, :]
    rgb[edge] = BORDER

    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(rgb)).save(path, format="PNG")
    sidecar = {"vmin": vmin, "vmax": vmax, "cmap": cmap, "grid": list(values.shape), "scale": scale}
    if hasattr(summary, 'stage'):
        sidecar.update(stage=summary.stage, layer=summary.layer)
    atomic_write_bytes(path.with_suffix(".json"), json.dumps(sidecar, sort_keys=True, indent=2).encode("utf-8"))
    return path
