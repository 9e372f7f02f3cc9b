"""
### report.py
#### Functions:
    - evaluate_run
    - write_report
    - read_report

A run's metrics are written as ``report.yaml`` (summary) and ``metrics.csv`` with one row per
decoded frame: clip_id, frame_id, ssim, img_acc, vid_acc, N, K, trials, seed, classifier_hash.
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
import yaml

from brainvidpy._tools.tools import atomic_write_bytes, counter_rng
from brainvidpy.errors import ConfigError
from brainvidpy.evaluation.nway import nway_topk
from brainvidpy.evaluation.ssim import K1, K2, WINDOW_SIGMA, WINDOW_SIZE, ssim_frames

LOGGER = logging.getLogger(__name__)

CSV_COLUMNS = ["clip_id", "frame_id", "ssim", "img_acc", "vid_acc", "N", "K", "trials", "seed", "classifier_hash"]


@dataclass
class MetricReport:
    ssim_mean: float
    ssim_per_frame: list[float]
    nway_image: dict
    nway_video: dict
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "MetricReport":
        return cls(**data)


def _summary(values: np.ndarray, n_way: int, top_k: int, trials: int) -> dict:
    values = np.asarray(values, dtype=np.float64)
    stderr = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
    return {"N": n_way, "K": top_k, "trials": trials, "accuracy": float(values.mean()), "stderr": stderr}


def evaluate_run(decoded: np.ndarray, ground_truth: np.ndarray, categories: np.ndarray, pair_ids: np.ndarray, *, frame_classifier: Callable[[np.ndarray], np.ndarray], clip_classifier: Callable[[np.ndarray], np.ndarray], n_way: int=50, top_k: int=1, video_n_way: int | None=None, trials: int=100, seed: int=0, classifier_hash: str="", metadata: dict | None=None) -> tuple[MetricReport, pd.DataFrame]:
    """SSIM and N-way top-K accuracy of decoded clips against their ground truth.

    #### Args:
        decoded, ground_truth (np.ndarray): [n, m, H, W, 3] aligned clips in [0, 1]
        categories (np.ndarray): [n] category of each clip (frame classifier classes)
        pair_ids (np.ndarray): [n] (category, direction) class of each clip (clip classifier classes)
        frame_classifier, clip_classifier (callable): numpy batch → [batch, classes] probabilities
        n_way, top_k (int, optional): Defaults to 50-way top-1.
        video_n_way (int, optional): N for clips. Defaults to `n_way`.
        trials (int, optional): Trials per frame and per clip. Defaults to 100.
        seed (int, optional): Trial streams are (seed, clip, frame). Defaults to 0.
        classifier_hash (str, optional): Content hash of the classifiers used.

    #### Returns:
        (report, frames): the summary and the per-frame table
    """
    decoded, ground_truth = np.asarray(decoded), np.asarray(ground_truth)
    if decoded.shape != ground_truth.shape:
        raise ConfigError(f"decoded {decoded.shape} and ground truth {ground_truth.shape} are misaligned")
    n, m = decoded.shape[:2]
    if len(categories) != n or len(pair_ids) != n:
        raise ConfigError(f"{n} clips but {len(categories)} categories and {len(pair_ids)} pair labels")
    video_n_way = video_n_way or n_way

    ssim_values = ssim_frames(decoded, ground_truth)
    frame_probs = frame_classifier(decoded.reshape(n * m, *decoded.shape[2:])).reshape(n, m, -1)
    clip_probs = clip_classifier(decoded)

    rows = []
    vid_acc = np.zeros(n)
    for i in range(n):
        vid_acc[i] = nway_topk(clip_probs[i], int(pair_ids[i]), n_way=video_n_way, top_k=top_k, trials=trials, rng=counter_rng(seed, 1, i))
        for j in range(m):
            img_acc = nway_topk(frame_probs[i, j], int(categories[i]), n_way=n_way, top_k=top_k, trials=trials, rng=counter_rng(seed, 0, i, j))
            rows.append([i, j, float(ssim_values[i, j]), img_acc, float(vid_acc[i]), n_way, top_k, trials, seed, classifier_hash])
    frames = pd.DataFrame(rows, columns=CSV_COLUMNS)

    report = MetricReport(
        ssim_mean=float(ssim_values.mean(axis=1).mean()),
        ssim_per_frame=[float(v) for v in ssim_values.mean(axis=0)],
        nway_image=_summary(frames["img_acc"].to_numpy(), n_way, top_k, trials),
        nway_video=_summary(vid_acc, video_n_way, top_k, trials),
        metadata={
            "seed": seed,
            "classifier_hash": classifier_hash,
            "clips": n,
            "ssim": {"window": WINDOW_SIZE, "sigma": WINDOW_SIGMA, "k1": K1, "k2": K2},
            **(metadata or {}),
        },
    )
    LOGGER.info("evaluated run", extra={"stage": "evaluate", "ssim": report.ssim_mean,
                                         "img_acc": report.nway_image["accuracy"], "vid_acc": report.nway_video["accuracy"]})
    return report, frames


def write_report(report: MetricReport, frames: pd.DataFrame, directory: str | Path) -> tuple[Path, Path]:
    directory = Path(directory)
    summary, table = directory / "report.yaml", directory / "metrics.csv"
    atomic_write_bytes(summary, yaml.safe_dump(report.to_dict(), sort_keys=True).encode("utf-8"))
    atomic_write_bytes(table, frames.to_csv(index=False, columns=CSV_COLUMNS).encode("utf-8"))
    return summary, table


def read_report(directory: str | Path) -> tuple[MetricReport, pd.DataFrame]:
    directory = Path(directory)
    report = MetricReport.from_dict(yaml.safe_load((directory / "report.yaml").read_text(encoding="utf-8")))
    frames = pd.read_csv(directory / "metrics.csv", dtype={"classifier_hash": str}, keep_default_na=False)
    return report, frames
