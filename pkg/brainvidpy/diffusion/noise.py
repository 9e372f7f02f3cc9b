"""
### noise.py
#### Functions:
    - dependent_noise

Frame noise sharing one component across the clip:

    eps_j = sqrt(beta) * eps_shared + sqrt(1 - beta) * eps_own_j

Each eps_j is standard normal and two frames correlate with coefficient beta at every position.
"""

from dataclasses import dataclass

import torch

from brainvidpy.errors import ConfigError


@dataclass(frozen=True)
class DependentNoiseSpec:
    beta: float = 0.5
    frames: int = 6

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta must be in [0, 1], got {self.beta}")
        if self.frames < 1:
            raise ConfigError(f"frames must be >= 1, got {self.frames}")

    @property
    def ratio(self) -> float:
        """Weight of the shared component, sqrt(beta)."""
        return self.beta ** 0.5


def dependent_noise(spec: DependentNoiseSpec, frame_shape, *, generator: torch.Generator, batch: int | None=None, dtype: torch.dtype=torch.float32) -> torch.Tensor:
    """Draws the shared component once per clip, then one own component per frame.

    #### Args:
        spec (DependentNoiseSpec): beta and the number of frames m.
        frame_shape (tuple of int): Shape of one frame, e.g. (c, h, w).
        generator (torch.Generator): Stream the draws come from.
        batch (int, optional): Number of independent clips. Defaults to None (unbatched).

    #### Returns:
        noise (torch.Tensor): [m, *frame_shape] or [batch, m, *frame_shape]
    """
    lead = () if batch is None else (batch,)
    frame_shape = tuple(frame_shape)
    shared = torch.randn(lead + (1,) + frame_shape, generator=generator, dtype=dtype)
    own = torch.randn(lead + (spec.frames,) + frame_shape, generator=generator, dtype=dtype)
    if spec.beta == 0.0:
        return own
    if spec.beta == 1.0:
        return shared.expand_as(own).clone()
    return spec.ratio * shared + (1.0 - spec.beta) ** 0.5 * own
