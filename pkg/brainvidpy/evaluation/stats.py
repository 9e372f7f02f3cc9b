"""
### stats.py
#### Functions:
    - binomial_pvalue
    - sign_test
"""

import numpy as np
from scipy import stats


def binomial_pvalue(successes: int, trials: int, chance: float) -> float:
    """One-sided p-value of observing at least `successes` when the success rate is `chance`."""
    return float(stats.binomtest(int(successes), int(trials), chance, alternative='greater').pvalue)


def sign_test(a, b) -> float:
    """One-sided paired sign test of a > b; ties are dropped.

    #### Returns:
        p_value (float): 1.0 when every pair ties
    """
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    wins, losses = int((diff > 0).sum()), int((diff < 0).sum())
    if wins + losses == 0:
        return 1.0
    return float(stats.binomtest(wins, wins + losses, 0.5, alternative='greater').pvalue)
