import brainvidpy.core.archive as archive
import brainvidpy.core.checkpoint as checkpoint
import brainvidpy.core.patching as patching
import brainvidpy.core.windows as windows

from brainvidpy.core.patching import FmriFrame, PatchConfig
from brainvidpy.core.windows import FmriWindow

__all__ = ['archive', 'checkpoint', 'patching', 'windows', 'FmriFrame', 'PatchConfig', 'FmriWindow']
