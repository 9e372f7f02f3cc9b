import math

import numpy as np
import pytest
import torch

from brainvidpy.errors import ConfigError, DegenerateBatchError
from brainvidpy.phase1.augment import AugmentConfig
from brainvidpy.phase1.contrastive import (
    Phase1Config,
    info_nce,
    phase1_losses,
    retrieval_batches,
    retrieval_top1,
    train_phase1,
)
from brainvidpy.phase1.encoder import EncoderConfig, FmriEncoder
from brainvidpy.synthdata.generator import Geometry, generate_dataset


def test_info_nce_closed_form():
    x = torch.eye(2)
    expected = -math.log(math.e / (math.e + 1))
    assert float(info_nce(x, x, 1.0)) == pytest.approx(expected, abs=1e-6)
    assert float(info_nce(x, x, 1.0, symmetric=False)) == pytest.approx(0.3133, abs=1e-4)


def test_info_nce_is_non_negative(rng):
    for _ in range(20):
        a = torch.as_tensor(rng.normal(size=(6, 3, 4)), dtype=torch.float32)
        p = torch.as_tensor(rng.normal(size=(6, 3, 4)), dtype=torch.float32)
        assert float(info_nce(a, p, 0.07)) >= 0.0


def test_info_nce_is_permutation_invariant(rng):
    a = torch.as_tensor(rng.normal(size=(5, 8)), dtype=torch.float64)
    p = torch.as_tensor(rng.normal(size=(5, 8)), dtype=torch.float64)
    perm = torch.as_tensor(rng.permutation(5))
    assert float(info_nce(a[perm], p[perm], 0.5)) == pytest.approx(float(info_nce(a, p, 0.5)), rel=1e-10)


def test_info_nce_rejects_single_pair():
    with pytest.raises(DegenerateBatchError):
        info_nce(torch.ones(1, 4), torch.ones(1, 4))


def _batch(tiny_dataset, n=6):
    train = tiny_dataset[0]
    return (torch.from_numpy(train.fmri[:n]), torch.from_numpy(train.e_txt[:n]), torch.from_numpy(train.e_img[:n]))


def test_zero_weights_leave_embedding_loss(tiny_encoder, tiny_dataset):
    config = Phase1Config(mu_spa=0.0, mu_tem=0.0)
    losses = phase1_losses(tiny_encoder, *_batch(tiny_dataset), config, torch.Generator().manual_seed(0))
    assert float(losses["L_total"]) == float(losses["L_emb"])


def test_total_is_linear_in_weights(tiny_encoder, tiny_dataset):
    batch = _batch(tiny_dataset)
    base = phase1_losses(tiny_encoder, *batch, Phase1Config(mu_spa=1.0, mu_tem=1.0), torch.Generator().manual_seed(4))
    scaled = phase1_losses(tiny_encoder, *batch, Phase1Config(mu_spa=2.0, mu_tem=0.5), torch.Generator().manual_seed(4))
    expected = 2.0 * base["L_spa"] + 0.5 * base["L_tem"] + base["L_emb"]
    assert float(scaled["L_total"]) == pytest.approx(float(expected), rel=1e-5)


def test_identity_augmentation_gives_minimal_view_losses(tiny_encoder, tiny_dataset):
    config = Phase1Config(augment=AugmentConfig(gamma_spa=0.0, gamma_tem=0.0))
    losses = phase1_losses(tiny_encoder, *_batch(tiny_dataset), config, torch.Generator().manual_seed(0))
    assert float(losses["L_spa"]) == pytest.approx(float(losses["L_tem"]))


def test_config_validation():
    with pytest.raises(ConfigError):
        Phase1Config(temperature=0.0)
    with pytest.raises(ConfigError):
        Phase1Config(batch_size=1)


def test_training_curve_and_determinism(tiny_encoder_config, tiny_dataset):
    train = tiny_dataset[0]
    config = Phase1Config(steps=3, batch_size=6, log_every=1)
    curves = []
    for _ in range(2):
        torch.manual_seed(1)
        _, curve = train_phase1(FmriEncoder(tiny_encoder_config), train.fmri, train.e_txt, train.e_img, config, seed=8)
        curves.append(curve)
    assert list(curves[0].columns) == ["step", "L_spa", "L_tem", "L_emb", "L_total"]
    assert len(curves[0]) == 3
    assert curves[0]["L_total"].tolist() == curves[1]["L_total"].tolist()


def test_retrieval_needs_two_windows(tiny_encoder, tiny_dataset):
    train = tiny_dataset[0]
    with pytest.raises(DegenerateBatchError):
        retrieval_top1(tiny_encoder, train.fmri[:1], train.e_txt[:1], train.pair_id[:1])


def test_retrieval_batches_hold_distinct_pairs():
    pair_ids = np.array([0, 0, 1, 2, 1, 0, 2, 3])
    batches = retrieval_batches(pair_ids, batch_size=3)
    assert [b.tolist() for b in batches] == [[0, 2, 3], [1, 4, 6]]
    assert all(len(set(pair_ids[b].tolist())) == len(b) for b in batches)
    assert retrieval_batches(np.zeros(5, dtype=int)) == []


def test_retrieval_chance_for_an_uninformative_encoder(tiny_encoder, rng):
    pair_ids = np.tile(np.arange(16), 40)
    targets = rng.normal(size=(640, 4, 8)).astype(np.float32)
    voxels = np.zeros((640, 2, 64), dtype=np.float32)
    # Every window encodes to the same vector, so exactly one target per batch is ranked first.
    assert retrieval_top1(tiny_encoder, voxels, targets, pair_ids) == pytest.approx(1 / 16)


@pytest.mark.slow
def test_contrastive_retrieval_beats_chance_and_shuffled_pairing():
    geometry = Geometry(window=2, frames_per_fmri=6, height=32, width=32)
    train, val, _, _ = generate_dataset(1000, 6, 128, geometry, patch_size=8, embed_rows=4, embed_dim=16,
                                        overlap=1.0, val_fraction=0.5, seed=0)
    config = EncoderConfig(n_voxels=128, window=2, patch_size=8, layers=3, embed_dim=32, heads=4, proj_rows=4, proj_dim=16)
    scores, curves = {}, {}
    for shuffle in (False, True):
        torch.manual_seed(0)
        encoder = FmriEncoder(config)
        phase1 = Phase1Config(steps=2000, batch_size=16, lr=1e-3, shuffle_pairing=shuffle, log_every=500)
        _, curves[shuffle] = train_phase1(encoder, train.fmri, train.e_txt, train.e_img, phase1, seed=0)
        scores[shuffle] = retrieval_top1(encoder, val.fmri, val.e_img, val.pair_id, batch_size=16)
    assert scores[False] >= 3 / 16
    assert abs(scores[True] - 1 / 16) <= 0.05
    moving = curves[False]["L_total"].rolling(100).mean()
    assert moving.iloc[-1] < moving.iloc[99]
