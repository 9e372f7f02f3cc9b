import brainvidpy.cli.ablate as ablate
import brainvidpy.cli.config as config
import brainvidpy.cli.logs as logs
import brainvidpy.cli.main as main
import brainvidpy.cli.pipeline as pipeline

from brainvidpy.cli.config import RunConfig, load_config
from brainvidpy.cli.pipeline import PIPELINE, RunContext, run_pipeline, run_stage

__all__ = [
    'ablate',
    'config',
    'logs',
    'main',
    'pipeline',
    'RunConfig',
    'load_config',
    'PIPELINE',
    'RunContext',
    'run_pipeline',
    'run_stage',
]
