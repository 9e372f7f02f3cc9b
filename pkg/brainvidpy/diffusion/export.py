"""
### export.py
#### Functions:
    - to_uint8
    - export_video
    - inter_frame_difference
"""

import logging
from pathlib import Path

import numpy as np
from PIL import Image

LOGGER = logging.getLogger(__name__)


def to_uint8(frames: np.ndarray) -> np.ndarray:
    return (np.clip(np.asarray(frames, dtype=np.float64), 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def export_video(video: np.ndarray, directory: str | Path, stem: str, *, frame_ms: int=250, upscale: int=1) -> list[Path]:
    """Writes ``<stem>_<k>.png`` for every frame plus an animated ``<stem>.gif``.

    #### Args:
        video (np.ndarray): [m, H, W, 3] in [0, 1]
        directory (str or Path): Created if missing.
        stem (str): File name stem.
        frame_ms (int, optional): GIF frame duration [ms]. Defaults to 250.
        upscale (int, optional): Nearest-neighbour enlargement factor. Defaults to 1.

    #### Returns:
        paths (list of Path): PNG paths followed by the GIF path
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    images = []
    for frame in to_uint8(video):
        image = Image.fromarray(frame)
        if upscale > 1:
            image = image.resize((image.width * upscale, image.height * upscale), Image.NEAREST)
        images.append(image)
    paths = []
    for k, image in enumerate(images):
        path = directory / f"{stem}_{k:02d}.png"
        image.save(path)
        paths.append(path)
    gif = directory / f"{stem}.gif"
    images[0].save(gif, save_all=True, append_images=images[1:], duration=frame_ms, loop=0)
    paths.append(gif)
    LOGGER.debug("exported video", extra={"path": str(gif), "frames": len(images)})
    return paths


def inter_frame_difference(videos: np.ndarray) -> float:
    """Mean absolute difference between consecutive frames of [n, m, H, W, 3] (or [m, H, W, 3]) clips."""
    videos = np.asarray(videos, dtype=np.float64)
    if videos.shape[-4] < 2:
        return 0.0
    return float(np.abs(np.diff(videos, axis=-4)).mean())
