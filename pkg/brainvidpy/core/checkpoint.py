"""
### checkpoint.py
#### Functions:
    - module_tensors
    - save_module
    - load_module
    - module_hash

torch modules persist through the tensor archive under ``<prefix>/<param_path>``.
"""

from pathlib import Path

import numpy as np
import torch

from brainvidpy._tools.tools import sha256_bytes
from brainvidpy.core.archive import archive_read, archive_write, encode_archive
from brainvidpy.errors import ArchiveValidationError


def module_tensors(module: torch.nn.Module, prefix: str) -> dict[str, np.ndarray]:
    return {
        f"{prefix}/{key}": value.detach().cpu().to(torch.float32).numpy()
        for key, value in module.state_dict().items()
    }


def save_module(module: torch.nn.Module, path: str | Path, *, prefix: str, extra: dict | None=None) -> None:
    """Saves a state dict, plus optional extra tensors stored under ``<prefix>/_meta/``."""
    tensors = module_tensors(module, prefix)
    for key, value in (extra or {}).items():
        tensors[f"{prefix}/_meta/{key}"] = np.asarray(value, dtype=np.float32)
    archive_write(path, tensors)


def load_module(module: torch.nn.Module, path: str | Path, *, prefix: str) -> dict[str, np.ndarray]:
    """Loads weights in place and returns the ``_meta`` tensors."""
    tensors = archive_read(path)
    head = f"{prefix}/"
    state, meta = {}, {}
    for name, value in tensors.items():
        if not name.startswith(head):
            continue
        key = name[len(head):]
        if key.startswith("_meta/"):
            meta[key[len("_meta/"):]] = value
        else:
            state[key] = torch.from_numpy(value.copy())
    reference = module.state_dict()
    missing = sorted(set(reference) - set(state))
    if missing:
        raise ArchiveValidationError(f"checkpoint lacks {missing[:3]}{'...' if len(missing) > 3 else ''}")
    module.load_state_dict({k: v.to(reference[k].dtype) for k, v in state.items()})
    return meta


def module_hash(module: torch.nn.Module, *, prefix: str="m") -> str:
    """Content hash of the module's archive bytes (first 16 hex digits)."""
    return sha256_bytes(encode_archive(module_tensors(module, prefix)))[:16]
