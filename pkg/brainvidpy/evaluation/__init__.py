import brainvidpy.evaluation.classifiers as classifiers
import brainvidpy.evaluation.control as control
import brainvidpy.evaluation.nway as nway
import brainvidpy.evaluation.report as report
import brainvidpy.evaluation.ssim as ssim
import brainvidpy.evaluation.stats as stats

from brainvidpy.evaluation.control import time_average_control
from brainvidpy.evaluation.nway import nway_topk, video_nway_topk
from brainvidpy.evaluation.report import MetricReport, evaluate_run

__all__ = [
    'classifiers',
    'control',
    'nway',
    'report',
    'ssim',
    'stats',
    'MetricReport',
    'evaluate_run',
    'nway_topk',
    'video_nway_topk',
    'time_average_control',
]
