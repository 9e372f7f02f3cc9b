"""
### contrastive.py
#### Functions:
    - info_nce
    - phase1_losses
    - train_phase1
    - retrieval_batches
    - retrieval_top1

The encoder objective is

    L_total = mu_spa * L_spa + mu_tem * L_tem + L_emb

with L_spa = nce(E(v), E(v_spa)), L_tem = nce(E(v), E(v_tem)) and
L_emb = nce(E(v), e_txt) + nce(E(v), e_img). ``literal_pairing=True`` pairs L_spa with the
temporal view and L_tem with the spatial one.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F

from brainvidpy._tools.tools import counter_rng, torch_generator
from brainvidpy.errors import ConfigError, DegenerateBatchError, NumericalAbortError
from brainvidpy.phase1.augment import AugmentConfig, spatial_mask_batch, temporal_interpolate_batch
from brainvidpy.phase1.encoder import FmriEncoder

LOGGER = logging.getLogger(__name__)

LOSS_COLUMNS = ["step", "L_spa", "L_tem", "L_emb", "L_total"]


@dataclass(frozen=True)
class Phase1Config:
    mu_spa: float = 1.0
    mu_tem: float = 1.0
    temperature: float = 0.07
    batch_size: int = 16
    steps: int = 2000
    lr: float = 1e-3
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    literal_pairing: bool = False
    shuffle_pairing: bool = False
    log_every: int = 100

    def __post_init__(self):
        if self.temperature <= 0:
            raise ConfigError(f"temperature must be > 0, got {self.temperature}")
        if self.mu_spa < 0 or self.mu_tem < 0:
            raise ConfigError("loss weights must be >= 0")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")


def info_nce(anchors: torch.Tensor, positives: torch.Tensor, temperature: float=0.07, *, symmetric: bool=True) -> torch.Tensor:
    """Contrastive cross-entropy over cosine-similarity logits; row i of both inputs is a positive pair.

    #### Args:
        anchors (torch.Tensor): [n, ...] flattened to [n, q * d]
        positives (torch.Tensor): [n, ...] same shape
        temperature (float, optional): Logit scale 1 / temperature. Defaults to 0.07.
        symmetric (bool, optional): Average both directions. Defaults to True.

    #### Returns:
        loss (torch.Tensor): scalar >= 0
    """
    n = anchors.shape[0]
    if n < 2:
        raise DegenerateBatchError(f"contrastive loss needs a batch of >= 2, got {n}")
    if positives.shape[0] != n:
        raise ConfigError(f"batch sizes differ: {n} vs {positives.shape[0]}")
    a = F.normalize(anchors.reshape(n, -1), dim=-1)
    p = F.normalize(positives.reshape(n, -1), dim=-1)
    logits = a @ p.T / temperature
    labels = torch.arange(n, device=logits.device)
    loss = F.cross_entropy(logits, labels)
    if symmetric:
        loss = (loss + F.cross_entropy(logits.T, labels)) / 2
    return loss


def phase1_losses(encoder: FmriEncoder, voxels: torch.Tensor, e_txt: torch.Tensor, e_img: torch.Tensor, config: Phase1Config, generator: torch.Generator) -> dict[str, torch.Tensor]:
    """The four Phase 1 losses for one batch.

    #### Args:
        encoder (FmriEncoder): Encoder being trained.
        voxels (torch.Tensor): [n, w, V]
        e_txt, e_img (torch.Tensor): [n, q, d] target embeddings.
        config (Phase1Config): Weights, temperature and augmentation ratios.
        generator (torch.Generator): Draws the augmentation positions.

    #### Returns:
        losses (dict): L_spa, L_tem, L_emb, L_total
    """
    aug = config.augment
    tokens = encoder.tokenize(voxels)
    z = encoder.encode_tokens(tokens)
    z_spa = encoder.encode_tokens(spatial_mask_batch(tokens, aug.gamma_spa, generator, mode=aug.mode))
    z_tem = encoder.encode_tokens(temporal_interpolate_batch(tokens, aug.gamma_tem, generator, normalize=aug.normalize))
    if config.literal_pairing:
        z_spa, z_tem = z_tem, z_spa
    tau = config.temperature
    losses = {
        "L_spa": info_nce(z, z_spa, tau),
        "L_tem": info_nce(z, z_tem, tau),
        "L_emb": info_nce(z, e_txt.to(z.dtype), tau) + info_nce(z, e_img.to(z.dtype), tau),
    }
    losses["L_total"] = config.mu_spa * losses["L_spa"] + config.mu_tem * losses["L_tem"] + losses["L_emb"]
    return losses


def train_phase1(encoder: FmriEncoder, voxels: np.ndarray, e_txt: np.ndarray, e_img: np.ndarray, config: Phase1Config=Phase1Config(), *, seed: int=0) -> tuple[FmriEncoder, pd.DataFrame]:
    """Trains `encoder` in place with the combined contrastive objective.

    #### Args:
        encoder (FmriEncoder): Random or pretrained encoder.
        voxels (np.ndarray): [N, w, V] training windows.
        e_txt, e_img (np.ndarray): [N, q, d] targets.
        config (Phase1Config, optional): Defaults to Phase1Config().
        seed (int, optional): Batches, augmentations and the pairing shuffle derive from it. Defaults to 0.

    #### Returns:
        (encoder, curve): curve columns step, L_spa, L_tem, L_emb, L_total
    """
    voxels = np.asarray(voxels, dtype=np.float32)
    e_txt = np.asarray(e_txt, dtype=np.float32)
    e_img = np.asarray(e_img, dtype=np.float32)
    n = voxels.shape[0]
    if n < 2:
        raise DegenerateBatchError(f"need at least 2 training windows, got {n}")
    if config.shuffle_pairing:
        perm = counter_rng(seed, 31337).permutation(n)
        e_txt, e_img = e_txt[perm], e_img[perm]
    batch_size = min(config.batch_size, n)
    optimizer = torch.optim.AdamW(encoder.parameters(), lr=config.lr, weight_decay=0.0)

    encoder.train()
    rows = []
    last_good = {k: v.clone() for k, v in encoder.state_dict().items()}
    for step in range(config.steps):
        idx = counter_rng(seed, 21, step).choice(n, size=batch_size, replace=False)
        losses = phase1_losses(
            encoder,
            torch.from_numpy(voxels[idx]),
            torch.from_numpy(e_txt[idx]),
            torch.from_numpy(e_img[idx]),
            config,
            torch_generator(seed, 22, step),
        )
        if not torch.isfinite(losses["L_total"]):
            encoder.load_state_dict(last_good)
            raise NumericalAbortError("phase 1 loss diverged", step=step, last_good_state=last_good)
        optimizer.zero_grad()
        losses["L_total"].backward()
        optimizer.step()
        last_good = {k: v.detach().clone() for k, v in encoder.state_dict().items()}
        row = {"step": step, **{k: float(v) for k, v in losses.items()}}
        rows.append(row)
        if step % config.log_every == 0 or step == config.steps - 1:
            LOGGER.info("phase 1 step", extra={"stage": "train-phase1", **row})
    encoder.eval()
    return encoder, pd.DataFrame(rows, columns=LOSS_COLUMNS)


def retrieval_batches(pair_ids: np.ndarray, batch_size: int=16) -> list[np.ndarray]:
    """Splits item indices into batches whose pair ids are all distinct.

    Items are placed in order into the first open batch that lacks their pair id. Batches hold
    min(batch_size, distinct pairs) items, so a random guess hits with probability exactly
    1 / len(batch). Items left in unfilled batches are not scored.
    """
    pair_ids = np.asarray(pair_ids)
    size = min(batch_size, len(np.unique(pair_ids)))
    if size < 2:
        return []
    full, open_batches = [], []
    for i, pair in enumerate(pair_ids.tolist()):
        target = next((b for b in open_batches if pair not in b), None)
        if target is None:
            target = {}
            open_batches.append(target)
        target[pair] = i
        if len(target) == size:
            open_batches.remove(target)
            full.append(np.fromiter(target.values(), dtype=np.int64))
    return full


@torch.no_grad()
def retrieval_top1(encoder: FmriEncoder, voxels: np.ndarray, targets: np.ndarray, pair_ids: np.ndarray, *, batch_size: int=16) -> float:
    """Share of windows whose most similar target (cosine) within their batch is their own.

    Batches come from `retrieval_batches`, so no two targets in a batch belong to the same pair.

    #### Returns:
        accuracy (float): chance is 1 / batch_size when there are at least batch_size distinct pairs
    """
    encoder.eval()
    voxels = torch.as_tensor(np.asarray(voxels), dtype=torch.float32)
    targets = torch.as_tensor(np.asarray(targets), dtype=torch.float32)
    batches = retrieval_batches(pair_ids, batch_size)
    if not batches:
        raise DegenerateBatchError("retrieval needs at least 2 windows with distinct pairs")
    hits, total = 0, 0
    for idx in batches:
        z = F.normalize(encoder(voxels[idx]).reshape(len(idx), -1), dim=-1)
        t = F.normalize(targets[idx].reshape(len(idx), -1), dim=-1)
        best = (z @ t.T).argmax(dim=1).numpy()
        hits += int((best == np.arange(len(idx))).sum())
        total += len(idx)
    return hits / total
