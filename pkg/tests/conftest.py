import numpy as np
import pytest
import torch

from brainvidpy.cli.config import RunConfig
from brainvidpy.phase1.encoder import EncoderConfig, FmriEncoder
from brainvidpy.synthdata.generator import Geometry, generate_dataset

TINY_GEOMETRY = Geometry(window=2, frames_per_fmri=6, height=16, width=16)

# Small enough that every stage finishes in seconds; the classifier gate is off.
TINY_RUN = {
    'name': 'tiny',
    'seed': 3,
    'data': {'n_samples': 40, 'n_categories': 4, 'n_voxels': 64, 'height': 16, 'width': 16, 'speed': 0.5,
             'classifier_per_class': 2},
    'encoder': {'patch_size': 8, 'layers': 3, 'embed_dim': 16, 'heads': 2, 'mlp_ratio': 2.0, 'proj_rows': 4, 'proj_dim': 8},
    'pretrain': {'steps': 2, 'batch_size': 8},
    'phase1': {'steps': 2, 'batch_size': 8, 'log_every': 1},
    'codec': {'kind': 'identity'},
    'diffusion': {'T': 10, 'steps': 2, 'batch_size': 4, 'channels': [8, 16], 'heads': 2, 'groups': 4, 'time_dim': 16, 'log_every': 1},
    'decode': {'ddim_steps': 2, 'export_clips': 1},
    'eval': {'n_way': 2, 'video_n_way': 2, 'trials': 5, 'classifier_steps': 2, 'gate': 0.0},
    'interpret': {'max_samples': 2},
}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_dataset():
    return generate_dataset(40, 4, 64, TINY_GEOMETRY, patch_size=8, embed_rows=4, embed_dim=8, speed=0.5, seed=5)


@pytest.fixture
def tiny_encoder_config():
    return EncoderConfig(n_voxels=64, window=2, patch_size=8, layers=3, embed_dim=16, heads=2, proj_rows=4, proj_dim=8)


@pytest.fixture
def tiny_encoder(tiny_encoder_config):
    torch.manual_seed(0)
    return FmriEncoder(tiny_encoder_config).eval()


@pytest.fixture
def tiny_run_config():
    return RunConfig.from_dict(TINY_RUN)
