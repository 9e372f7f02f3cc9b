import brainvidpy.synthdata.generator as generator
import brainvidpy.synthdata.io as io
import brainvidpy.synthdata.rois as rois
import brainvidpy.synthdata.scenes as scenes

from brainvidpy.synthdata.generator import Geometry, SynthSplit, generate_dataset, semantic_overlap
from brainvidpy.synthdata.rois import RoiLayout

__all__ = [
    'generator',
    'io',
    'rois',
    'scenes',
    'Geometry',
    'SynthSplit',
    'RoiLayout',
    'generate_dataset',
    'semantic_overlap',
]
