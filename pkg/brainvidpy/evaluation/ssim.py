"""
### ssim.py
#### Functions:
    - gaussian_window
    - ssim
    - ssim_frames

Structural similarity with an 11 x 11 Gaussian window (sigma 1.5), C1 = (0.01 L)^2 and
C2 = (0.03 L)^2, evaluated at every valid window position and averaged over positions and
channels.
"""

import numpy as np
import torch
import torch.nn.functional as F

from brainvidpy.errors import ConfigError

WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
K1, K2 = 0.01, 0.03


def gaussian_window(size: int=WINDOW_SIZE, sigma: float=WINDOW_SIGMA) -> torch.Tensor:
    """[size, size] float64 kernel summing to one."""
    x = torch.arange(size, dtype=torch.float64) - (size - 1) / 2
    g = torch.exp(-x ** 2 / (2 * sigma ** 2))
    g = g / g.sum()
    return g[:, None] * g[None, :]


def _as_nchw(x: np.ndarray) -> torch.Tensor:
    t = torch.as_tensor(np.asarray(x, dtype=np.float64))
    if t.ndim == 2:
        t = t[..., None]
    return t.movedim(-1, -3).reshape(-1, 1, *t.shape[-3:-1])


def ssim_frames(a: np.ndarray, b: np.ndarray, *, data_range: float=1.0, window_size: int=WINDOW_SIZE, sigma: float=WINDOW_SIGMA) -> np.ndarray:
    """SSIM of every frame pair.

    #### Args:
        a, b (np.ndarray): [..., H, W, channels] images of identical shape
        data_range (float, optional): L, the value range. Defaults to 1.0.
        window_size (int, optional): Shrunk to the smaller image side for small images. Defaults to 11.
        sigma (float, optional): Defaults to 1.5.

    #### Returns:
        values (np.ndarray): [...] float64 in [-1, 1]
    """
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ConfigError(f"ssim needs equal shapes, got {a.shape} and {b.shape}")
    if a.ndim < 3:
        a, b = a[..., None], b[..., None]
    lead, (h, w, c) = a.shape[:-3], a.shape[-3:]
    size = min(window_size, h, w)
    kernel = gaussian_window(size, sigma)[None, None]
    x, y = _as_nchw(a), _as_nchw(b)

    def blur(t):
        return F.conv2d(t, kernel)

    c1, c2 = (K1 * data_range) ** 2, (K2 * data_range) ** 2
    mu_x, mu_y = blur(x), blur(y)
    sxx = blur(x * x) - mu_x ** 2
    syy = blur(y * y) - mu_y ** 2
    sxy = blur(x * y) - mu_x * mu_y
    smap = ((2 * mu_x * mu_y + c1) * (2 * sxy + c2)) / ((mu_x ** 2 + mu_y ** 2 + c1) * (sxx + syy + c2))
    per_channel = smap.mean(dim=(1, 2, 3)).reshape(-1, c)
    return per_channel.mean(dim=1).numpy().reshape(lead)


def ssim(a: np.ndarray, b: np.ndarray, *, data_range: float=1.0) -> float:
    """SSIM of two images [H, W] or [H, W, channels].

    #### Returns:
        value (float): 1.0 for identical images
    """
    if np.asarray(a).ndim > 3:
        raise ConfigError("ssim compares two images; use ssim_frames for stacks")
    return float(ssim_frames(a, b, data_range=data_range))
