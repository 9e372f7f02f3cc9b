"""
### scenes.py
#### Functions:
    - category_palette
    - sample_scene
    - scene_position
    - render_scene
    - semantic_features
    - motion_features

A scene is one coloured shape moving in a straight line at constant speed. The category fixes
shape and colour; the motion direction is drawn independently.
"""

from dataclasses import dataclass

import numpy as np
from matplotlib.colors import hsv_to_rgb

from brainvidpy.errors import GenerationError

SHAPE_KINDS = ('circle', 'square', 'bar')
DIRECTIONS = {'right': (1.0, 0.0), 'left': (-1.0, 0.0), 'down': (0.0, 1.0), 'up': (0.0, -1.0)}
DIRECTION_NAMES = tuple(DIRECTIONS)


@dataclass(frozen=True)
class SceneSpec:
    category_id: int
    shape_kind: str
    color: tuple[float, float, float]
    direction: int
    velocity: tuple[float, float]
    start: tuple[float, float]

    def as_row(self) -> list[float]:
        return [self.category_id, SHAPE_KINDS.index(self.shape_kind), *self.color, self.direction, *self.velocity, *self.start]

    @classmethod
    def from_row(cls, row) -> "SceneSpec":
        row = [float(v) for v in row]
        return cls(
            category_id=int(row[0]),
            shape_kind=SHAPE_KINDS[int(row[1])],
            color=(row[2], row[3], row[4]),
            direction=int(row[5]),
            velocity=(row[6], row[7]),
            start=(row[8], row[9]),
        )


def category_palette(n_categories: int) -> np.ndarray:
    """One colour per category: hues evenly spaced over the shape-kind groups.

    #### Returns:
        colors (np.ndarray): [C, 3] in [0, 1]
    """
    n_hues = -(-n_categories // len(SHAPE_KINDS))
    hues = (np.arange(n_categories) // len(SHAPE_KINDS)) / n_hues
    hsv = np.stack([hues, np.full(n_categories, 0.85), np.full(n_categories, 0.95)], axis=1)
    return hsv_to_rgb(hsv)


def half_extent(shape_kind: str, height: int, width: int) -> tuple[float, float]:
    """Half-size (x, y) of a shape in pixels, scaled to the frame."""
    unit = min(height, width) / 8
    extents = {
        'circle': (unit, unit),
        'square': (unit, unit),
        'bar': (unit / 2, unit * 1.5),
    }
    return extents[shape_kind]


def sample_scene(rng: np.random.Generator, category_id: int, *, palette: np.ndarray, height: int, width: int, t_span: tuple[int, int], speed: float=1.0) -> SceneSpec:
    """Draws a scene whose trajectory stays inside the frame for every t in `t_span`.

    #### Args:
        rng (np.random.Generator): Per-sample stream.
        category_id (int): Category of the scene.
        palette (np.ndarray): [C, 3] colours from `category_palette`.
        height, width (int): Frame size [px].
        t_span (tuple of int): First and last frame index (may be negative) the position
            is evaluated at.
        speed (float, optional): Pixels per frame. Defaults to 1.0.

    #### Returns:
        scene (SceneSpec)
    """
    shape_kind = SHAPE_KINDS[category_id % len(SHAPE_KINDS)]
    direction = int(rng.integers(len(DIRECTIONS)))
    vx, vy = (speed * c for c in DIRECTIONS[DIRECTION_NAMES[direction]])
    rx, ry = half_extent(shape_kind, height, width)
    t_lo, t_hi = t_span

    start = []
    for v, r, size in ((vx, rx, width), (vy, ry, height)):
        lo = r - min(v * t_lo, v * t_hi)
        hi = size - 1 - r - max(v * t_lo, v * t_hi)
        if lo > hi:
            raise GenerationError(
                f"{shape_kind} moving at {speed} px/frame over frames {t_lo}..{t_hi} leaves a {width}x{height} frame"
            )
        start.append(float(rng.uniform(lo, hi)))

    return SceneSpec(
        category_id=int(category_id),
        shape_kind=shape_kind,
        color=tuple(float(c) for c in palette[category_id]),
        direction=direction,
        velocity=(float(vx), float(vy)),
        start=(start[0], start[1]),
    )


def scene_position(scene: SceneSpec, t: float) -> tuple[float, float]:
    return (scene.start[0] + scene.velocity[0] * t, scene.start[1] + scene.velocity[1] * t)


def render_scene(scene: SceneSpec, n_frames: int, height: int, width: int) -> np.ndarray:
    """Renders frames 0..n_frames-1 on a black background.

    #### Returns:
        video (np.ndarray): [F, H, W, 3] float32 in [0, 1]
    """
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float32)
    rx, ry = half_extent(scene.shape_kind, height, width)
    color = np.asarray(scene.color, dtype=np.float32)
    video = np.zeros((n_frames, height, width, 3), dtype=np.float32)
    for t in range(n_frames):
        px, py = scene_position(scene, t)
        if scene.shape_kind == 'circle':
            mask = (xx - px) ** 2 + (yy - py) ** 2 <= rx ** 2
        else:
            mask = (np.abs(xx - px) <= rx) & (np.abs(yy - py) <= ry)
        video[t][mask] = color
    return video


def semantic_features(scene: SceneSpec, n_categories: int) -> np.ndarray:
    """Category one-hot, shape one-hot and colour: what the visual ROIs see."""
    category = np.zeros(n_categories)
    category[scene.category_id] = 1.0
    shape = np.zeros(len(SHAPE_KINDS))
    shape[SHAPE_KINDS.index(scene.shape_kind)] = 1.0
    return np.concatenate([category, shape, np.asarray(scene.color)])


def motion_features(scene: SceneSpec, t: float, height: int, width: int) -> np.ndarray:
    """Position at frame t scaled to [-1, 1]; direction only shows up as change over time."""
    px, py = scene_position(scene, t)
    return np.array([2 * px / (width - 1) - 1, 2 * py / (height - 1) - 1])
