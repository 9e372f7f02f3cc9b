"""
### attention.py
#### Functions:
    - layer_indices
    - token_scores
    - attention_to_voxels
    - summarize
    - write_summaries
    - read_summaries

Attention maps of the encoder mapped back to voxel space. A token's score is the attention it
receives (column mean of the head-averaged map) or, with ``mode='paid'``, the attention its
query spends on other tokens. Scores are spread uniformly over the voxels of the token's patch.
"""

import logging
from dataclasses import dataclass
from math import ceil
from pathlib import Path

import numpy as np

from brainvidpy.core.archive import archive_read, archive_write
from brainvidpy.core.patching import spread_tokens_to_voxels
from brainvidpy.errors import ConfigError
from brainvidpy.phase1.encoder import FmriEncoder

LOGGER = logging.getLogger(__name__)

STAGES = ('init', 'post_mae', 'post_contrastive', 'post_full')
LAYER_NAMES = ('first', 'middle', 'last')


@dataclass
class AttentionSummary:
    per_voxel: np.ndarray
    layer: str
    layer_index: int
    stage: str
    n_samples: int

    @property
    def attention_sum(self) -> float:
        return float(np.sum(self.per_voxel))


def layer_indices(n_layers: int) -> dict[str, int]:
    """first = 0, middle = ceil(L / 2) - 1, last = L - 1."""
    if n_layers < 3:
        raise ConfigError(f"first/middle/last layers need L >= 3, got {n_layers}")
    return {'first': 0, 'middle': ceil(n_layers / 2) - 1, 'last': n_layers - 1}


def _received(attn: np.ndarray) -> np.ndarray:
    return attn.mean(axis=0)


def _paid(attn: np.ndarray) -> np.ndarray:
    return (1.0 - np.diag(attn)) / max(attn.shape[0] - 1, 1)


TOKEN_SCORES = {
    'received': _received,
    'paid': _paid,
}


def token_scores(maps: np.ndarray, *, mode: str='received') -> np.ndarray:
    """[heads, S, S] attention → [S] token scores (heads averaged first)."""
    if mode not in TOKEN_SCORES:
        raise ConfigError(f"unknown attention mode '{mode}', choose from {sorted(TOKEN_SCORES)}")
    return TOKEN_SCORES[mode](np.asarray(maps, dtype=np.float64).mean(axis=0))


def attention_to_voxels(encoder: FmriEncoder, window: np.ndarray, layer: int, *, mode: str='received') -> np.ndarray:
    """Per-voxel attention of one window at one layer.

    #### Args:
        encoder (FmriEncoder)
        window (np.ndarray): [w, V] voxels
        layer (int): Layer index.
        mode (str, optional): 'received' or 'paid'. Defaults to 'received'.

    #### Returns:
        per_voxel (np.ndarray): [V] float64, non-negative
    """
    return _voxel_maps(encoder, window, [layer], mode)[layer]


def _voxel_maps(encoder: FmriEncoder, window: np.ndarray, layers: list[int], mode: str) -> dict[int, np.ndarray]:
    cfg = encoder.config
    maps = encoder.all_attention_maps(np.asarray(window, dtype=np.float32), layers)
    return {
        layer: spread_tokens_to_voxels(token_scores(m, mode=mode).reshape(cfg.window, cfg.n_patches), cfg.patch, cfg.n_voxels)
        for layer, m in maps.items()
    }


def summarize(encoder: FmriEncoder, voxels: np.ndarray, *, stage: str, layers=LAYER_NAMES, mode: str='received') -> list[AttentionSummary]:
    """Voxel attention maps averaged over every window of a dataset.

    #### Args:
        encoder (FmriEncoder): Encoder at the given training stage.
        voxels (np.ndarray): [N, w, V] windows.
        stage (str): One of init, post_mae, post_contrastive, post_full.
        layers (iterable of str, optional): Subset of first, middle, last.

    #### Returns:
        summaries (list of AttentionSummary): one per layer
    """
    if stage not in STAGES:
        raise ConfigError(f"unknown stage '{stage}', choose from {STAGES}")
    voxels = np.asarray(voxels)
    if voxels.shape[0] == 0:
        raise ConfigError("cannot summarize an empty dataset")
    index = layer_indices(encoder.config.layers)
    wanted = {name: index[name] for name in layers}
    totals = {i: np.zeros(encoder.config.n_voxels) for i in set(wanted.values())}
    for window in voxels:
        for i, per_voxel in _voxel_maps(encoder, window, sorted(totals), mode).items():
            totals[i] += per_voxel
    n = voxels.shape[0]
    LOGGER.info("summarized attention", extra={"stage": stage, "samples": n, "layers": list(wanted)})
    return [AttentionSummary(totals[i] / n, name, i, stage, n) for name, i in wanted.items()]


def write_summaries(summaries: list[AttentionSummary], path: str | Path) -> None:
    """Stores summaries as ``attn/<stage>/<layer>`` with index and sample count alongside."""
    tensors = {}
    for s in summaries:
        key = f"{s.stage}/{s.layer}"
        tensors[f"attn/{key}"] = s.per_voxel
        tensors[f"attn_info/{key}"] = np.array([s.layer_index, s.n_samples])
    archive_write(path, tensors)


def read_summaries(path: str | Path) -> list[AttentionSummary]:
    tensors = archive_read(path)
    out = []
    for name, value in tensors.items():
        if not name.startswith("attn/"):
            continue
        stage, layer = name[len("attn/"):].split("/")
        layer_index, n = tensors[f"attn_info/{stage}/{layer}"]
        out.append(AttentionSummary(value.astype(np.float64), layer, int(layer_index), stage, int(n)))
    return out
