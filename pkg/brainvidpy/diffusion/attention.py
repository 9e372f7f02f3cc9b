"""
### attention.py
#### Functions:
    - causal_band_mask
    - temporal_attention
    - SpatialSelfAttention
    - CrossAttention
    - TemporalAttention

At every spatial location, frame i queries frames max(0, i - window) .. i:

    out_i = softmax(Q_i K^T / sqrt(d_k)) V
"""

import torch
from torch import nn


def causal_band_mask(frames: int, window: int=2) -> torch.Tensor:
    """[m, m] bool, True where frame i may attend to frame j."""
    i = torch.arange(frames)[:, None]
    j = torch.arange(frames)[None, :]
    return (j <= i) & (j >= i - window)


def _split_heads(x: torch.Tensor, heads: int) -> torch.Tensor:
    n, s, c = x.shape
    return x.reshape(n, s, heads, c // heads).transpose(1, 2)


def _attend(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor, mask: torch.Tensor | None=None) -> tuple[torch.Tensor, torch.Tensor]:
    scores = q @ k.transpose(-2, -1) / q.shape[-1] ** 0.5
    if mask is not None:
        scores = scores.masked_fill(~mask, float('-inf'))
    attn = torch.softmax(scores, dim=-1)
    return attn @ v, attn


def temporal_attention(x: torch.Tensor, w_q: torch.Tensor, w_k: torch.Tensor, w_v: torch.Tensor, *, heads: int=1, window: int=2) -> tuple[torch.Tensor, torch.Tensor]:
    """Causal look-back attention across frames, independently at each spatial location.

    #### Args:
        x (torch.Tensor): [n, m, s, c] tokens of m frames with s spatial locations each
        w_q, w_k, w_v (torch.Tensor): [c, heads * d_k] projections
        heads (int, optional): Defaults to 1.
        window (int, optional): Frames looked back, >= 1. Defaults to 2.

    #### Returns:
        (out, attn): out [n, m, s, heads * d_k], attn [n * s, heads, m, m]
    """
    n, m, s, c = x.shape
    seq = x.permute(0, 2, 1, 3).reshape(n * s, m, c)
    q, k, v = (_split_heads(seq @ w, heads) for w in (w_q, w_k, w_v))
    out, attn = _attend(q, k, v, causal_band_mask(m, window).to(x.device))
    out = out.transpose(1, 2).reshape(n, s, m, -1).permute(0, 2, 1, 3)
    return out, attn


class SpatialSelfAttention(nn.Module):
    """Self-attention over the h * w positions of each frame."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.norm = nn.LayerNorm(dim)
        self.qkv = nn.Linear(dim, 3 * dim, bias=False)
        self.out = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """x: [n * m, s, c]"""
        q, k, v = self.qkv(self.norm(x)).chunk(3, dim=-1)
        out, _ = _attend(*(_split_heads(t, self.heads) for t in (q, k, v)))
        return x + self.out(out.transpose(1, 2).reshape(x.shape))


class CrossAttention(nn.Module):
    """Spatial tokens query the rows of the fMRI condition."""

    def __init__(self, dim: int, cond_dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.norm = nn.LayerNorm(dim)
        self.q = nn.Linear(dim, dim, bias=False)
        self.kv = nn.Linear(cond_dim, 2 * dim, bias=False)
        self.out = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        """x: [n * m, s, c]; cond: [n * m, q, cond_dim]"""
        k, v = self.kv(cond).chunk(2, dim=-1)
        q = self.q(self.norm(x))
        out, _ = _attend(*(_split_heads(t, self.heads) for t in (q, k, v)))
        return x + self.out(out.transpose(1, 2).reshape(x.shape))


class TemporalAttention(nn.Module):
    def __init__(self, dim: int, heads: int, window: int=2):
        super().__init__()
        self.heads = heads
        self.window = window
        self.norm = nn.LayerNorm(dim)
        self.w_q = nn.Parameter(torch.empty(dim, dim))
        self.w_k = nn.Parameter(torch.empty(dim, dim))
        self.w_v = nn.Parameter(torch.empty(dim, dim))
        self.out = nn.Linear(dim, dim)
        for w in (self.w_q, self.w_k, self.w_v):
            nn.init.xavier_uniform_(w)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """x: [n, m, s, c]"""
        out, _ = temporal_attention(self.norm(x), self.w_q, self.w_k, self.w_v, heads=self.heads, window=self.window)
        return x + self.out(out)

