import brainvidpy.interpret.attention as attention
import brainvidpy.interpret.heatmap as heatmap
import brainvidpy.interpret.roi as roi
import brainvidpy.interpret.stats as stats

from brainvidpy.interpret.attention import AttentionSummary, attention_to_voxels, summarize
from brainvidpy.interpret.heatmap import export_heatmap
from brainvidpy.interpret.roi import roi_aggregate
from brainvidpy.interpret.stats import TTestResult, compare_stages, ttest_two_sample

__all__ = [
    'attention',
    'heatmap',
    'roi',
    'stats',
    'AttentionSummary',
    'TTestResult',
    'attention_to_voxels',
    'compare_stages',
    'export_heatmap',
    'roi_aggregate',
    'summarize',
    'ttest_two_sample',
]
