"""
### encoder.py
#### Functions:
    - FmriEncoder
    - save_encoder
    - load_encoder

Transformer encoder from fMRI windows to [q, d] embeddings with unit-norm rows.

Voxels [n, w, V] are padded, cut into p patches per frame, projected to b-dim tokens by one
bias-free linear layer, given learned frame and patch position embeddings, flattened to a
sequence of S = w * p tokens and run through L pre-norm self-attention blocks. The head
mean-pools the final tokens and maps them to q * d values.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from brainvidpy.core.checkpoint import load_module, save_module
from brainvidpy.core.patching import PatchConfig, num_patches
from brainvidpy.core.windows import FmriWindow
from brainvidpy.errors import ConfigError, LayerIndexError

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class EncoderConfig:
    n_voxels: int = 256
    window: int = 2
    patch_size: int = 16
    layers: int = 6
    embed_dim: int = 64
    heads: int = 4
    mlp_ratio: float = 2.0
    proj_rows: int = 8
    proj_dim: int = 32
    mask_ratio_pretrain: float = 0.75

    def __post_init__(self):
        if self.layers < 1:
            raise ConfigError(f"layers must be >= 1, got {self.layers}")
        if self.embed_dim % self.heads:
            raise ConfigError(f"embed_dim {self.embed_dim} is not divisible by {self.heads} heads")
        if min(self.n_voxels, self.window, self.patch_size, self.proj_rows, self.proj_dim) < 1:
            raise ConfigError("encoder sizes must be positive")
        if not 0.0 < self.mask_ratio_pretrain < 1.0:
            raise ConfigError(f"mask_ratio_pretrain must be in (0, 1), got {self.mask_ratio_pretrain}")

    @property
    def n_patches(self) -> int:
        return num_patches(self.n_voxels, self.patch_size)

    @property
    def patch(self) -> PatchConfig:
        return PatchConfig(patch_size=self.patch_size, embed_dim=self.embed_dim)


class SelfAttention(nn.Module):
    """Multi-head self-attention that keeps its last post-softmax map when `capture` is set."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.out = nn.Linear(dim, dim)
        self.capture = False
        self.last_attention: torch.Tensor | None = None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        n, s, dim = x.shape
        q, k, v = self.qkv(x).reshape(n, s, 3, self.heads, dim // self.heads).permute(2, 0, 3, 1, 4)
        attn = torch.softmax(q @ k.transpose(-2, -1) / (dim // self.heads) ** 0.5, dim=-1)
        if self.capture:
            self.last_attention = attn.detach()
        return self.out((attn @ v).transpose(1, 2).reshape(n, s, dim))


class Block(nn.Module):
    def __init__(self, dim: int, heads: int, mlp_ratio: float):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = SelfAttention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        hidden = int(dim * mlp_ratio)
        self.mlp = nn.Sequential(nn.Linear(dim, hidden), nn.GELU(), nn.Linear(hidden, dim))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class FmriEncoder(nn.Module):
    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        b = config.embed_dim
        self.token_embed = nn.Linear(config.patch_size, b, bias=False)
        self.frame_pos = nn.Parameter(torch.randn(config.window, 1, b) * 0.02)
        self.patch_pos = nn.Parameter(torch.randn(1, config.n_patches, b) * 0.02)
        self.mask_token = nn.Parameter(torch.zeros(b))
        self.blocks = nn.ModuleList(Block(b, config.heads, config.mlp_ratio) for _ in range(config.layers))
        self.norm = nn.LayerNorm(b)
        self.head = nn.Linear(b, config.proj_rows * config.proj_dim)

    @property
    def embed_weights(self) -> np.ndarray:
        """[patch_size, b] projection in the layout `patchify` expects."""
        return self.token_embed.weight.detach().cpu().numpy().T.astype(np.float32)

    def patches(self, voxels: torch.Tensor) -> torch.Tensor:
        """[n, w, V] voxels → [n, w, p, patch_size] zero-padded patches."""
        cfg = self.config
        if voxels.ndim != 3 or tuple(voxels.shape[1:]) != (cfg.window, cfg.n_voxels):
            raise ConfigError(f"expected voxels [n, {cfg.window}, {cfg.n_voxels}], got {list(voxels.shape)}")
        pad = cfg.n_patches * cfg.patch_size - cfg.n_voxels
        if pad:
            voxels = F.pad(voxels, (0, pad))
        return voxels.reshape(voxels.shape[0], cfg.window, cfg.n_patches, cfg.patch_size)

    def tokenize(self, voxels: torch.Tensor) -> torch.Tensor:
        """[n, w, V] → [n, w, p, b] tokens (the FC layer only, no positions)."""
        return self.token_embed(self.patches(voxels))

    def hidden(self, tokens: torch.Tensor, mask: torch.Tensor | None=None) -> torch.Tensor:
        """Final-layer token states [n, S, b].

        #### Args:
            tokens (torch.Tensor): [n, w, p, b]
            mask (torch.Tensor, optional): [n, S] bool; True tokens are replaced by the mask token.
        """
        cfg = self.config
        if tuple(tokens.shape[1:]) != (cfg.window, cfg.n_patches, cfg.embed_dim):
            raise ConfigError(f"expected tokens [n, {cfg.window}, {cfg.n_patches}, {cfg.embed_dim}], got {list(tokens.shape)}")
        n = tokens.shape[0]
        x = tokens.reshape(n, -1, cfg.embed_dim)
        if mask is not None:
            x = torch.where(mask[..., None], self.mask_token.to(x.dtype).expand_as(x), x)
        x = x + (self.frame_pos + self.patch_pos).reshape(1, -1, cfg.embed_dim)
        for block in self.blocks:
            x = block(x)
        return self.norm(x)

    def project(self, hidden: torch.Tensor) -> torch.Tensor:
        out = self.head(hidden.mean(dim=1)).reshape(-1, self.config.proj_rows, self.config.proj_dim)
        return F.normalize(out, dim=-1)

    def encode_tokens(self, tokens: torch.Tensor) -> torch.Tensor:
        """[n, w, p, b] tokens → [n, q, d] embeddings."""
        return self.project(self.hidden(tokens))

    def forward(self, voxels: torch.Tensor) -> torch.Tensor:
        """[n, w, V] voxels → [n, q, d] embeddings with unit-norm rows."""
        return self.encode_tokens(self.tokenize(voxels))

    @torch.no_grad()
    def encode(self, window: FmriWindow) -> np.ndarray:
        """Embeds one tokenized window.

        #### Returns:
            embedding (np.ndarray): [q, d]
        """
        tokens = torch.as_tensor(np.asarray(window.tokens), dtype=self.token_embed.weight.dtype)
        return self.encode_tokens(tokens[None]).squeeze(0).cpu().numpy()

    @torch.no_grad()
    def attention_maps(self, window: FmriWindow | torch.Tensor, layer_index: int) -> np.ndarray:
        """Post-softmax attention of one layer for one window.

        #### Args:
            window (FmriWindow or torch.Tensor): tokenized window, or voxels [w, V]
            layer_index (int): 0 <= layer_index < L

        #### Returns:
            maps (np.ndarray): [heads, S, S], rows sum to one
        """
        return self.all_attention_maps(window, [layer_index])[layer_index]

    @torch.no_grad()
    def all_attention_maps(self, window: FmriWindow | torch.Tensor, layers) -> dict[int, np.ndarray]:
        for layer in layers:
            if not 0 <= layer < self.config.layers:
                raise LayerIndexError(f"layer {layer} outside 0..{self.config.layers - 1}")
        dtype = self.token_embed.weight.dtype
        if isinstance(window, FmriWindow):
            tokens = torch.as_tensor(np.asarray(window.tokens), dtype=dtype)[None]
        else:
            tokens = self.tokenize(torch.as_tensor(window, dtype=dtype)[None])
        for block in self.blocks:
            block.attn.capture = True
        try:
            self.hidden(tokens)
            return {layer: self.blocks[layer].attn.last_attention[0].cpu().numpy() for layer in layers}
        finally:
            for block in self.blocks:
                block.attn.capture = False
                block.attn.last_attention = None


def save_encoder(encoder: FmriEncoder, path: str | Path, *, step: int=0, seed: int=0) -> None:
    save_module(encoder, path, prefix="enc", extra={"step": step, "seed": seed})


def load_encoder(path: str | Path, config: EncoderConfig) -> tuple[FmriEncoder, int]:
    """Rebuilds an encoder from its checkpoint.

    #### Returns:
        (encoder, step)
    """
    encoder = FmriEncoder(config)
    meta = load_module(encoder, path, prefix="enc")
    encoder.eval()
    step = int(meta["step"]) if "step" in meta else 0
    LOGGER.debug("loaded encoder", extra={"path": str(path), "step": step})
    return encoder, step

