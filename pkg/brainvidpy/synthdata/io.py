"""
### io.py
#### Functions:
    - sample_entries
    - write_split
    - read_split
    - write_layout
    - read_layout

A split is stored as ``<name>.nfta`` (tensor archive) plus ``<name>.yaml``: scalar metadata, the
shape of every archived tensor and one ``{id, category, direction}`` entry per sample.
"""

import logging
from pathlib import Path

import numpy as np
import yaml

from brainvidpy._tools.tools import atomic_write_bytes
from brainvidpy.core.archive import archive_read, archive_write
from brainvidpy.errors import ArchiveValidationError
from brainvidpy.synthdata.generator import Geometry, SynthSplit
from brainvidpy.synthdata.rois import RoiLayout
from brainvidpy.synthdata.scenes import SceneSpec

LOGGER = logging.getLogger(__name__)


def sample_entries(split: SynthSplit) -> list[dict]:
    """One ``{id, category, direction}`` entry per sample.

    Ids are ``<split>-<index>`` where index counts from the split's generator offset, so the
    id also names the random stream the sample was drawn from.
    """
    offset = int(split.meta.get("index_offset", 0))
    return [
        {"id": f"{split.name}-{offset + i:05d}", "category": int(c), "direction": int(d)}
        for i, (c, d) in enumerate(zip(split.category, split.direction))
    ]


def write_split(split: SynthSplit, directory: str | Path) -> Path:
    """Writes `split` into `directory`.

    #### Returns:
        path (Path): Path of the tensor archive.
    """
    directory = Path(directory)
    tensors = {
        "fmri": split.fmri,
        "category": split.category,
        "direction": split.direction,
        "e_txt": split.e_txt,
        "e_img": split.e_img,
        "scenes": np.array([s.as_row() for s in split.scenes], dtype=np.float32).reshape(len(split.scenes), 10),
    }
    if split.video is not None:
        tensors["video"] = split.video
    path = directory / f"{split.name}.nfta"
    archive_write(path, tensors)
    manifest = {
        "name": split.name,
        "samples": len(split),
        "subject_id": split.subject_id,
        "seed": split.seed,
        "geometry": {k: getattr(split.geometry, k) for k in ("window", "frames_per_fmri", "height", "width")},
        "shapes": {key: [int(s) for s in np.shape(value)] for key, value in tensors.items()},
        "sample_list": sample_entries(split),
        "meta": split.meta,
    }
    atomic_write_bytes(directory / f"{split.name}.yaml", yaml.safe_dump(manifest, sort_keys=True).encode("utf-8"))
    LOGGER.debug("wrote split", extra={"split": split.name, "path": str(path)})
    return path


def read_split(directory: str | Path, name: str) -> SynthSplit:
    directory = Path(directory)
    tensors = archive_read(directory / f"{name}.nfta")
    manifest = yaml.safe_load((directory / f"{name}.yaml").read_text(encoding="utf-8"))
    missing = {"fmri", "category", "direction", "e_txt", "e_img", "scenes"} - set(tensors)
    if missing:
        raise ArchiveValidationError(f"split '{name}' lacks {sorted(missing)}")
    for key, shape in (manifest.get("shapes") or {}).items():
        if key not in tensors or list(tensors[key].shape) != shape:
            raise ArchiveValidationError(f"split '{name}': manifest shape of '{key}' does not match the archive")
    listed = [entry["category"] for entry in manifest.get("sample_list") or []]
    if listed and listed != tensors["category"].astype(np.int64).tolist():
        raise ArchiveValidationError(f"split '{name}': manifest categories do not match the archive")
    return SynthSplit(
        name=manifest["name"],
        fmri=tensors["fmri"],
        category=tensors["category"].astype(np.int64),
        direction=tensors["direction"].astype(np.int64),
        e_txt=tensors["e_txt"],
        e_img=tensors["e_img"],
        scenes=[SceneSpec.from_row(row) for row in tensors["scenes"]],
        geometry=Geometry(**manifest["geometry"]),
        video=tensors.get("video"),
        subject_id=int(manifest["subject_id"]),
        seed=int(manifest["seed"]),
        meta=dict(manifest.get("meta") or {}),
    )


def write_layout(layout: RoiLayout, path: str | Path) -> None:
    archive_write(path, {f"roi/{name}": mask.astype(np.float32) for name, mask in layout.masks.items()})


def read_layout(path: str | Path) -> RoiLayout:
    tensors = archive_read(path)
    return RoiLayout(masks={name[len("roi/"):]: value > 0.5 for name, value in tensors.items() if name.startswith("roi/")})
