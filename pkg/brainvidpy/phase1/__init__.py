import brainvidpy.phase1.augment as augment
import brainvidpy.phase1.contrastive as contrastive
import brainvidpy.phase1.encoder as encoder
import brainvidpy.phase1.pretrain as pretrain

from brainvidpy.phase1.augment import AugmentConfig
from brainvidpy.phase1.contrastive import Phase1Config, info_nce, train_phase1
from brainvidpy.phase1.encoder import EncoderConfig, FmriEncoder
from brainvidpy.phase1.pretrain import mae_pretrain

__all__ = [
    'augment',
    'contrastive',
    'encoder',
    'pretrain',
    'AugmentConfig',
    'Phase1Config',
    'EncoderConfig',
    'FmriEncoder',
    'info_nce',
    'train_phase1',
    'mae_pretrain',
]
