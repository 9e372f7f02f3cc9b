"""
### nway.py
#### Functions:
    - nway_trial
    - nway_topk
    - image_nway_topk
    - video_nway_topk

N-way top-K classification: each trial draws N - 1 distractor classes uniformly without
replacement, adds the ground-truth class and succeeds when the ground truth ranks within the
top K of the classifier probabilities restricted to those N classes. Ties are broken uniformly
at random.
"""

from typing import Callable

import numpy as np

from brainvidpy.errors import ConfigError


def _check(n_classes: int, gt: int, n_way: int, top_k: int) -> None:
    if n_way > n_classes:
        raise ConfigError(f"{n_way}-way needs at least {n_way} classes, classifier has {n_classes}")
    if n_way < 2 or not 1 <= top_k <= n_way:
        raise ConfigError(f"need 2 <= N and 1 <= K <= N, got N={n_way}, K={top_k}")
    if not 0 <= gt < n_classes:
        raise ConfigError(f"ground-truth class {gt} outside 0..{n_classes - 1}")


def nway_trial(probs: np.ndarray, gt: int, n_way: int, top_k: int, rng: np.random.Generator) -> bool:
    others = np.delete(np.arange(probs.shape[0]), gt)
    classes = np.concatenate([[gt], rng.choice(others, size=n_way - 1, replace=False)])
    scores = probs[classes]
    greater = int((scores > scores[0]).sum())
    ties = int((scores == scores[0]).sum()) - 1
    return greater + int(rng.integers(ties + 1)) < top_k


def nway_topk(probs: np.ndarray, gt: int, *, n_way: int=50, top_k: int=1, trials: int=100, rng: np.random.Generator) -> float:
    """Success rate of repeated N-way top-K trials for one prediction.

    #### Args:
        probs (np.ndarray): [C] class probabilities of the predicted frame or clip
        gt (int): Ground-truth class.
        n_way (int, optional): N <= C. Defaults to 50.
        top_k (int, optional): K. Defaults to 1.
        trials (int, optional): Repetitions. Defaults to 100.
        rng (np.random.Generator): Draws distractors and tie-breaks.

    #### Returns:
        accuracy (float): successes / trials
    """
    probs = np.asarray(probs, dtype=np.float64).reshape(-1)
    _check(probs.shape[0], int(gt), n_way, top_k)
    return sum(nway_trial(probs, int(gt), n_way, top_k, rng) for _ in range(trials)) / trials


def image_nway_topk(classifier: Callable[[np.ndarray], np.ndarray], frame: np.ndarray, gt: int, **kwargs) -> float:
    """`nway_topk` on the probabilities a frame classifier assigns to one [H, W, 3] frame."""
    return nway_topk(classifier(np.asarray(frame)[None])[0], gt, **kwargs)


def video_nway_topk(classifier: Callable[[np.ndarray], np.ndarray], clip: np.ndarray, gt: int, **kwargs) -> float:
    """`nway_topk` on the probabilities a clip classifier assigns to one [m, H, W, 3] clip."""
    return nway_topk(classifier(np.asarray(clip)[None])[0], gt, **kwargs)
