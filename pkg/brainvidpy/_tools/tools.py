"""
### tools.py
#### Functions:
    - require_finite
    - counter_rng
    - torch_generator
    - seed_everything
    - finite_difference_check
    - sha256_bytes
    - sha256_file
    - atomic_write_bytes
"""

import functools
import hashlib
import inspect
import os
import random
import tempfile
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from brainvidpy.errors import RejectedInputError


def require_finite(*names: str):
    """Decorator rejecting non-finite array arguments.

    #### Args:
        names (str): Names of the arguments to check. Attributes are reached with dots,
            e.g. ``"frame.voxels"``.
    """
    def decorator(func):
        signature = inspect.signature(func)

        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            bound = signature.bind(*args, **kwargs)
            for name in names:
                root, *attrs = name.split(".")
                value = bound.arguments.get(root)
                for attr in attrs:
                    value = getattr(value, attr)
                if value is None:
                    continue
                if isinstance(value, torch.Tensor):
                    ok = bool(torch.isfinite(value).all())
                else:
                    ok = bool(np.isfinite(np.asarray(value)).all())
                if not ok:
                    raise RejectedInputError(f"{func.__name__}: '{name}' holds non-finite values")
            return func(*args, **kwargs)

        return wrapper

    return decorator


def counter_rng(seed: int, *counters: int) -> np.random.Generator:
    """Independent numpy stream for (seed, counters...).

    #### Returns:
        rng (np.random.Generator)
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, counters)]))


def torch_generator(seed: int, *counters: int) -> torch.Generator:
    """Independent torch stream derived from the same SeedSequence as `counter_rng`."""
    state = np.random.SeedSequence([int(seed), *map(int, counters)]).generate_state(1, dtype=np.uint64)[0]
    return torch.Generator().manual_seed(int(state) & 0x7FFF_FFFF_FFFF_FFFF)


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)


def finite_difference_check(loss_fn: Callable[[], torch.Tensor], params: Sequence[torch.nn.Parameter], *, n: int=10, eps: float=1e-4, seed: int=0) -> float:
    """Compares autograd gradients with central finite differences on `n` sampled weights.

    Run it on float64 modules; float32 round-off swamps eps=1e-4.

    #### Args:
        loss_fn (callable): Zero-argument closure returning a scalar loss.
        params (sequence): Parameters to sample from.
        n (int, optional): Number of scalar weights probed. Defaults to 10.
        eps (float, optional): Finite-difference step. Defaults to 1e-4.
        seed (int, optional): Sampling seed. Defaults to 0.

    #### Returns:
        max_rel_err (float): Largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
    """
    params = [p for p in params if p.requires_grad]
    for p in params:
        p.grad = None
    loss_fn().backward()
    params = [p for p in params if p.grad is not None]

    rng = counter_rng(seed)
    sizes = np.array([p.numel() for p in params])
    worst = 0.0
    for _ in range(n):
        which = int(rng.choice(len(params), p=sizes / sizes.sum()))
        param = params[which]
        index = int(rng.integers(param.numel()))
        analytic = float(param.grad.reshape(-1)[index])
        flat = param.data.reshape(-1)
        original = float(flat[index])
        with torch.no_grad():
            flat[index] = original + eps
            plus = float(loss_fn())
            flat[index] = original - eps
            minus = float(loss_fn())
            flat[index] = original
        numeric = (plus - minus) / (2 * eps)
        scale = max(abs(analytic), abs(numeric), 1e-6)
        worst = max(worst, abs(analytic - numeric) / scale)
    return worst


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str | Path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Writes `data` to a temporary sibling file, then renames it over `path`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
