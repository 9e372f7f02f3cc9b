"""
### stats.py
#### Functions:
    - welch_df
    - ttest_two_sample
    - compare_stages
    - attention_sums
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats

from brainvidpy.errors import ConfigError, RejectedInputError
from brainvidpy.interpret.attention import AttentionSummary
from brainvidpy.synthdata.rois import RoiLayout

STAGE_COLUMNS = ["roi", "stage", "layer", "mean", "t", "p"]


@dataclass(frozen=True)
class TTestResult:
    t_stat: float
    p_value: float
    df: float
    mean_a: float
    mean_b: float
    n_a: int
    n_b: int


def welch_df(a: np.ndarray, b: np.ndarray) -> float:
    """Welch-Satterthwaite degrees of freedom."""
    va, vb = a.var(ddof=1) / a.size, b.var(ddof=1) / b.size
    if va + vb == 0:
        return float(a.size + b.size - 2)
    return float((va + vb) ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1)))


def ttest_two_sample(group_a, group_b, *, alternative: str='two-sided') -> TTestResult:
    """Welch's unequal-variance t-test.

    Two constant groups give t = 0, p = 1 when their means agree and t = +-inf, p = 0 otherwise.

    #### Args:
        group_a, group_b (array-like): >= 2 finite values each
        alternative (str, optional): 'two-sided', 'greater' (a > b) or 'less'. Defaults to 'two-sided'.

    #### Returns:
        result (TTestResult)
    """
    a = np.asarray(group_a, dtype=np.float64).reshape(-1)
    b = np.asarray(group_b, dtype=np.float64).reshape(-1)
    if a.size < 2 or b.size < 2:
        raise RejectedInputError(f"each group needs >= 2 values, got {a.size} and {b.size}")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise RejectedInputError("t-test groups hold non-finite values")
    if alternative not in ('two-sided', 'greater', 'less'):
        raise ConfigError(f"unknown alternative '{alternative}'")
    df = welch_df(a, b)
    if a.var() == 0 and b.var() == 0:
        diff = a.mean() - b.mean()
        if diff == 0:
            t, p = 0.0, 1.0
        else:
            t = float(np.copysign(np.inf, diff))
            p = 0.0 if alternative == 'two-sided' or (alternative == 'greater') == (diff > 0) else 1.0
    else:
        res = stats.ttest_ind(a, b, equal_var=False, alternative=alternative)
        t, p = float(res.statistic), float(res.pvalue)
    return TTestResult(t, min(max(p, 0.0), 1.0), df, float(a.mean()), float(b.mean()), a.size, b.size)


def compare_stages(summaries_a: list[AttentionSummary], summaries_b: list[AttentionSummary], layout: RoiLayout) -> pd.DataFrame:
    """Per ROI and layer, tests the voxel values of stage b against stage a.

    #### Returns:
        table (pd.DataFrame): columns roi, stage, layer, mean, t, p; ``stage`` reads "a->b" and
            ``mean`` is the ROI mean at stage b
    """
    by_layer = {s.layer: s for s in summaries_a}
    rows = []
    for sb in summaries_b:
        sa = by_layer.get(sb.layer)
        if sa is None:
            continue
        for name, mask in layout.masks.items():
            if mask.sum() < 2:
                continue
            res = ttest_two_sample(sb.per_voxel[mask], sa.per_voxel[mask])
            rows.append([name, f"{sa.stage}->{sb.stage}", sb.layer, res.mean_a, res.t_stat, res.p_value])
    return pd.DataFrame(rows, columns=STAGE_COLUMNS)


def attention_sums(summaries: list[AttentionSummary]) -> pd.DataFrame:
    """Total voxel attention per (stage, layer)."""
    return pd.DataFrame(
        [[s.stage, s.layer, s.layer_index, s.attention_sum] for s in summaries],
        columns=["stage", "layer", "layer_index", "attention_sum"],
    )
