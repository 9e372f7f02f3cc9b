import brainvidpy.diffusion.attention as attention
import brainvidpy.diffusion.codec as codec
import brainvidpy.diffusion.denoiser as denoiser
import brainvidpy.diffusion.export as export
import brainvidpy.diffusion.noise as noise
import brainvidpy.diffusion.sampling as sampling
import brainvidpy.diffusion.schedule as schedule
import brainvidpy.diffusion.training as training

from brainvidpy.diffusion.denoiser import DenoiserConfig, PseudoUNet
from brainvidpy.diffusion.noise import DependentNoiseSpec, dependent_noise
from brainvidpy.diffusion.sampling import sample
from brainvidpy.diffusion.schedule import NoiseSchedule, forward_diffuse, make_schedule
from brainvidpy.diffusion.training import Phase2Config, train_phase2

__all__ = [
    'attention',
    'codec',
    'denoiser',
    'export',
    'noise',
    'sampling',
    'schedule',
    'training',
    'DenoiserConfig',
    'PseudoUNet',
    'DependentNoiseSpec',
    'NoiseSchedule',
    'Phase2Config',
    'dependent_noise',
    'forward_diffuse',
    'make_schedule',
    'sample',
    'train_phase2',
]
