"""
### generator.py
#### Functions:
    - split_categories
    - mixing_matrix
    - target_tables
    - generate_split
    - generate_dataset
    - generate_classifier_set
    - semantic_overlap

fMRI scan k of a sample sees the scene at video frame ``frames_per_fmri * k - lag``:

    fmri_k = A @ features(scene, frames_per_fmri * k - lag) + eps,  eps ~ N(0, noise_sigma^2)

A sends semantic features (category, shape, colour) to the visual ROIs and position to the
dorsal-attention ROIs; DefaultA and unassigned voxels receive noise only.
"""

import logging
from dataclasses import dataclass, field, replace
from math import ceil
from typing import Iterable

import numpy as np

from brainvidpy._tools.tools import counter_rng
from brainvidpy.core.patching import FmriFrame
from brainvidpy.errors import ConfigError
from brainvidpy.synthdata.rois import MOTION_ROIS, VISUAL_ROIS, RoiLayout, make_roi_layout
from brainvidpy.synthdata.scenes import (
    DIRECTIONS,
    SHAPE_KINDS,
    SceneSpec,
    category_palette,
    motion_features,
    render_scene,
    sample_scene,
    semantic_features,
)

LOGGER = logging.getLogger(__name__)

SPLIT_CODES = {'train': 0, 'val': 1, 'test': 2, 'classifier': 3}
N_DIRECTIONS = len(DIRECTIONS)


@dataclass(frozen=True)
class Geometry:
    window: int = 2
    frames_per_fmri: int = 6
    height: int = 32
    width: int = 32

    @property
    def n_frames(self) -> int:
        return self.window * self.frames_per_fmri


@dataclass
class SynthSample:
    video: np.ndarray | None
    fmri: list[FmriFrame]
    category_id: int
    direction: int
    e_txt: np.ndarray
    e_img: np.ndarray


@dataclass
class SynthSplit:
    """Column-stored samples of one split; fmri is [N, w, V], video [N, F, H, W, 3]."""

    name: str
    fmri: np.ndarray
    category: np.ndarray
    direction: np.ndarray
    e_txt: np.ndarray
    e_img: np.ndarray
    scenes: list[SceneSpec]
    geometry: Geometry
    video: np.ndarray | None = None
    subject_id: int = 0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.fmri.shape[0])

    def __getitem__(self, i: int) -> SynthSample:
        frames = [FmriFrame(voxels=v, timestamp_index=k) for k, v in enumerate(self.fmri[i])]
        video = None if self.video is None else self.video[i]
        return SynthSample(video, frames, int(self.category[i]), int(self.direction[i]), self.e_txt[i], self.e_img[i])

    @property
    def pair_id(self) -> np.ndarray:
        """(category, direction) pair index: the identity of the target embeddings."""
        return self.category * N_DIRECTIONS + self.direction

    @property
    def clips(self) -> np.ndarray:
        """Decoding targets: the video frames covered by the first scan of each window."""
        if self.video is None:
            raise ConfigError(f"split '{self.name}' was generated without video")
        return self.video[:, :self.geometry.frames_per_fmri]

    def with_fmri(self, fmri: np.ndarray) -> "SynthSplit":
        return replace(self, fmri=np.asarray(fmri, dtype=np.float32))


def split_categories(n_categories: int, overlap: float) -> tuple[list[int], list[int]]:
    """Train and test category pools whose intersection/union is as close to `overlap` as C allows.

    #### Returns:
        (train_categories, test_categories)
    """
    if not 0.0 <= overlap <= 1.0:
        raise ConfigError(f"overlap must be in [0, 1], got {overlap}")
    shared = min(n_categories, max(0, round(overlap * n_categories)))
    rest = n_categories - shared
    train_only = ceil(rest / 2)
    if shared == 0 and (train_only == 0 or rest - train_only == 0):
        raise ConfigError(f"{n_categories} categories cannot give disjoint non-empty pools")
    categories = list(range(n_categories))
    train = categories[:shared + train_only]
    test = categories[:shared] + categories[shared + train_only:]
    return train, test


def mixing_matrix(layout: RoiLayout, n_categories: int, *, seed: int, subject_id: int=0) -> tuple[np.ndarray, np.ndarray]:
    """Per-subject routing of features to voxels.

    #### Returns:
        (A_sem, A_mot): [V, C + 6] and [V, 2], zero outside the visual / dorsal ROIs
    """
    rng = counter_rng(seed, 7919, subject_id)
    n_sem = n_categories + len(SHAPE_KINDS) + 3
    a_sem = np.zeros((layout.n_voxels, n_sem))
    a_mot = np.zeros((layout.n_voxels, 2))
    vis = layout.union(VISUAL_ROIS)
    mot = layout.union(MOTION_ROIS)
    a_sem[vis] = rng.normal(0.0, 1.0 / np.sqrt(3.0), size=(int(vis.sum()), n_sem))
    a_mot[mot] = rng.normal(0.0, 1.5, size=(int(mot.sum()), 2))
    return a_sem, a_mot


def target_tables(n_categories: int, rows: int, dim: int, *, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Frozen random unit embeddings per (category, direction) pair, standing in for text and image embeddings.

    #### Returns:
        (e_txt, e_img): [C * 4, rows, dim] each, every row unit-norm
    """
    rng = counter_rng(seed, 104729)
    tables = []
    for _ in range(2):
        table = rng.normal(size=(n_categories * N_DIRECTIONS, rows, dim))
        tables.append((table / np.linalg.norm(table, axis=-1, keepdims=True)).astype(np.float32))
    return tables[0], tables[1]


def generate_split(name: str, n_samples: int, categories: list[int], *, n_categories: int, layout: RoiLayout, geometry: Geometry, hemodynamic_lag: int, noise_sigma: float, seed: int, embed_rows: int, embed_dim: int, speed: float=1.0, subject_id: int=0, render_video: bool=True, index_offset: int=0, balanced: bool=False) -> SynthSplit:
    """Generates one split; sample i draws from its own stream (seed, split, i).

    With `balanced`, sample i takes category ``categories[i % len(categories)]`` instead of a random one.

    #### Returns:
        split (SynthSplit)
    """
    palette = category_palette(n_categories)
    a_sem, a_mot = mixing_matrix(layout, n_categories, seed=seed, subject_id=subject_id)
    e_txt_table, e_img_table = target_tables(n_categories, embed_rows, embed_dim, seed=seed)
    w, fpf = geometry.window, geometry.frames_per_fmri
    scan_times = [fpf * k - hemodynamic_lag for k in range(w)]
    t_span = (min(0, *scan_times), max(geometry.n_frames - 1, *scan_times))

    scenes, fmri, videos = [], [], []
    for i in range(n_samples):
        rng = counter_rng(seed, SPLIT_CODES[name], subject_id, index_offset + i)
        pick = (index_offset + i) % len(categories) if balanced else int(rng.integers(len(categories)))
        category = int(categories[pick])
        scene = sample_scene(rng, category, palette=palette, height=geometry.height, width=geometry.width, t_span=t_span, speed=speed)
        sem = semantic_features(scene, n_categories)
        scans = []
        for tau in scan_times:
            mot = motion_features(scene, tau, geometry.height, geometry.width)
            signal = a_sem @ sem + a_mot @ mot
            scans.append(signal + rng.normal(0.0, noise_sigma, size=signal.shape) if noise_sigma > 0 else signal)
        scenes.append(scene)
        fmri.append(np.stack(scans))
        if render_video:
            videos.append(render_scene(scene, geometry.n_frames, geometry.height, geometry.width))

    category = np.array([s.category_id for s in scenes], dtype=np.int64)
    direction = np.array([s.direction for s in scenes], dtype=np.int64)
    pair = category * N_DIRECTIONS + direction
    LOGGER.info("generated split", extra={"split": name, "samples": n_samples, "categories": len(set(category.tolist()))})
    return SynthSplit(
        name=name,
        fmri=np.asarray(fmri, dtype=np.float32).reshape(n_samples, w, layout.n_voxels),
        category=category,
        direction=direction,
        e_txt=e_txt_table[pair],
        e_img=e_img_table[pair],
        scenes=scenes,
        geometry=geometry,
        video=np.stack(videos) if render_video and videos else None,
        subject_id=subject_id,
        seed=seed,
        meta={
            "hemodynamic_lag": hemodynamic_lag, "index_offset": index_offset, "noise_sigma": noise_sigma,
            "n_categories": n_categories, "speed": speed,
        },
    )


def generate_dataset(n_samples: int, n_categories: int, n_voxels: int, geometry: Geometry=Geometry(), *, hemodynamic_lag: int=4, noise_sigma: float=0.5, seed: int=0, patch_size: int=16, embed_rows: int=8, embed_dim: int=32, overlap: float=0.56, val_fraction: float=0.2, test_fraction: float=0.2, speed: float=1.0, subject_id: int=0, render_video: bool=True) -> tuple[SynthSplit, SynthSplit, SynthSplit, RoiLayout]:
    """Synthetic paired (fMRI, video, category, target embedding) dataset.

    #### Args:
        n_samples (int): Total samples over the three splits.
        n_categories (int): C >= 2.
        n_voxels (int): V >= 4 * patch_size.
        geometry (Geometry, optional): Window size, frames per scan and frame size.
        hemodynamic_lag (int, optional): Delay of the fMRI response [video frames]. Defaults to 4.
        noise_sigma (float, optional): Std of the additive voxel noise. Defaults to 0.5.
        seed (int, optional): Defaults to 0.
        patch_size (int, optional): Used to validate V and align ROIs. Defaults to 16.
        embed_rows, embed_dim (int, optional): q x d of the target embeddings. Defaults to 8 x 32.
        overlap (float, optional): Requested train/test category intersection over union. Defaults to 0.56.
        val_fraction (float, optional): Share of the training part held out for validation. Defaults to 0.2.
        test_fraction (float, optional): Share of samples in the test split. Defaults to 0.2.
        speed (float, optional): Pixels per frame. Defaults to 1.0.
        subject_id (int, optional): Selects the mixing matrix. Defaults to 0.
        render_video (bool, optional): Skip rendering when only fMRI is needed. Defaults to True.

    #### Returns:
        (train, val, test, layout)
    """
    if n_categories < 2:
        raise ConfigError(f"need at least 2 categories, got {n_categories}")
    if n_voxels < 4 * patch_size:
        raise ConfigError(f"need V >= 4 * patch_size = {4 * patch_size}, got {n_voxels}")
    layout = make_roi_layout(n_voxels, patch_size=patch_size)
    train_cats, test_cats = split_categories(n_categories, overlap)

    n_test = max(1, round(test_fraction * n_samples))
    n_val = max(1, round(val_fraction * (n_samples - n_test)))
    n_train = n_samples - n_test - n_val
    if n_train < 1:
        raise ConfigError(f"{n_samples} samples leave no training data")

    common = dict(n_categories=n_categories, layout=layout, geometry=geometry, hemodynamic_lag=hemodynamic_lag,
                  noise_sigma=noise_sigma, seed=seed, embed_rows=embed_rows, embed_dim=embed_dim, speed=speed,
                  subject_id=subject_id, render_video=render_video)
    train = generate_split('train', n_train, train_cats, **common)
    val = generate_split('val', n_val, train_cats, **common)
    test = generate_split('test', n_test, test_cats, **common)
    return train, val, test, layout


def generate_classifier_set(n_per_class: int, n_categories: int, layout: RoiLayout, geometry: Geometry=Geometry(), *, seed: int=0, hemodynamic_lag: int=4, speed: float=1.0, embed_rows: int=8, embed_dim: int=32) -> SynthSplit:
    """Fresh scenes over every category, for training the stand-in classifiers."""
    return generate_split(
        'classifier', n_per_class * n_categories, list(range(n_categories)), n_categories=n_categories, layout=layout,
        geometry=geometry, hemodynamic_lag=hemodynamic_lag, noise_sigma=0.0, seed=seed, embed_rows=embed_rows,
        embed_dim=embed_dim, speed=speed, balanced=True,
    )


def _category_set(split) -> set[int]:
    if hasattr(split, 'category'):
        return set(np.asarray(split.category).tolist())
    return set(int(c) for c in split)


def semantic_overlap(train: SynthSplit | Iterable[int], test: SynthSplit | Iterable[int]) -> float:
    """Intersection over union of the category sets of two splits.

    #### Returns:
        overlap (float): in [0, 1]
    """
    a, b = _category_set(train), _category_set(test)
    if not a or not b:
        raise ConfigError("semantic_overlap needs two non-empty splits")
    return len(a & b) / len(a | b)
