"""
## BrainVidPy

Decodes short video clips from windows of synthetic fMRI. An fMRI window is patched into tokens,
encoded by a transformer trained with contrastive objectives against text and image targets,
and the resulting embedding conditions a small video diffusion model whose per-frame noise
shares a common component.

### Modules:

- core: fMRI frames, windows, patch tokens, the tensor archive and module checkpoints.
- synthdata: Synthetic scenes, ROI layout and paired fMRI/video datasets.
- phase1: Augmentations, the fMRI encoder, masked pretraining and contrastive training.
- diffusion: Noise schedules, dependent noise, the pseudo-3D denoiser, training and DDIM sampling.
- evaluation: SSIM, N-way top-K classification accuracy and the reports built from them.
- interpret: Encoder attention projected back to voxels, ROI statistics and heatmaps.
- cli: Run configuration, pipeline stages, ablations and the `brainvidpy` command.
- _tools: Seeding, hashing and file helpers shared by the modules above.

### Example:

    from brainvidpy import synthdata, phase1

    train, val, test, layout = synthdata.generate_dataset(200, 10, 256)
    encoder = phase1.FmriEncoder(phase1.EncoderConfig(n_voxels=256))
    encoder, curve = phase1.train_phase1(encoder, train.fmri, train.e_txt, train.e_img)

    $ brainvidpy run --config run.yaml --beta 0.25
"""

from brainvidpy import cli, core, diffusion, evaluation, interpret, phase1, synthdata
from brainvidpy._tools import tools

__all__ = ['cli', 'core', 'diffusion', 'evaluation', 'interpret', 'phase1', 'synthdata', 'tools']
