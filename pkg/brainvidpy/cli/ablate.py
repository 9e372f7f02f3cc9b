"""
### ablate.py
#### Functions:
    - point_config
    - run_point
    - ablate
    - report

Each ablation point is a full run under ``<run>/ablate/<axis>/<value>/``. The point starts from a
copy of the base run, so the stages its override does not touch are recognised as up to date and
skipped; only the affected stages and everything downstream of them are retrained.
"""

import logging
import shutil
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path

import pandas as pd

from brainvidpy._tools.tools import atomic_write_bytes
from brainvidpy.cli.config import RunConfig, apply_overrides
from brainvidpy.cli.logs import setup_logging
from brainvidpy.cli.pipeline import PIPELINE, STAGE_DIRS, RunContext, run_pipeline
from brainvidpy.errors import ConfigError
from brainvidpy.evaluation.report import read_report

LOGGER = logging.getLogger(__name__)

AXES = {
    'gamma_spa': 'augment.gamma_spa',
    'gamma_tem': 'augment.gamma_tem',
    'mu_spa': 'phase1.mu_spa',
    'mu_tem': 'phase1.mu_tem',
    'dependent_noise': 'diffusion.dependent_noise',
    'beta': 'diffusion.beta',
}

DEFAULT_VALUES = {
    'gamma_spa': [0.0, 0.1, 0.2, 0.4],
    'gamma_tem': [0.0, 1 / 3, 2 / 3],
    'mu_spa': [0.0, 1.0],
    'mu_tem': [0.0, 1.0],
    'dependent_noise': [False, True],
    'beta': [0.0, 0.25, 0.5, 0.75],
}

TABLE_COLUMNS = ['experiment', 'gamma_spa', 'gamma_tem', 'mu_spa', 'mu_tem', 'dependent_noise', 'beta',
                 'ssim', 'img_acc', 'vid_acc']

# Interpretation does not feed the table.
ABLATION_STAGES = tuple(s for s in PIPELINE if s != 'interpret')


def _parse_value(axis: str, value):
    if axis == 'dependent_noise':
        if isinstance(value, str):
            lowered = value.strip().lower()
            if lowered not in ('true', 'false', '1', '0'):
                raise ConfigError(f"dependent_noise values must be true/false, got {value!r}")
            return lowered in ('true', '1')
        return bool(value)
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{axis} values must be numbers, got {value!r}") from exc


def point_config(base: RunConfig, axis: str, value) -> RunConfig:
    """The base config with a single ablation axis moved to `value`."""
    if axis not in AXES:
        raise ConfigError(f"unknown ablation axis '{axis}'; choose from {sorted(AXES)}")
    value = _parse_value(axis, value)
    data = apply_overrides(base.to_dict(), [f"{AXES[axis]}={str(value).lower() if isinstance(value, bool) else value!r}"])
    return RunConfig.from_dict(data)


def point_dir(base_root: Path, axis: str, value) -> Path:
    return base_root / "ablate" / axis / f"{_parse_value(axis, value)}"


def _seed_from_base(base_root: Path, target: Path) -> None:
    if (target / "manifest.jsonl").exists():
        return
    target.mkdir(parents=True, exist_ok=True)
    for stage in ABLATION_STAGES:
        source = base_root / STAGE_DIRS[stage]
        if source.exists():
            shutil.copytree(source, target / STAGE_DIRS[stage], dirs_exist_ok=True)
    shutil.copy2(base_root / "manifest.jsonl", target / "manifest.jsonl")


def table_row(experiment: str, config: RunConfig, root: Path) -> dict:
    report, _ = read_report(root / "evaluate")
    return {
        'experiment': experiment,
        'gamma_spa': config.augment.gamma_spa,
        'gamma_tem': config.augment.gamma_tem,
        'mu_spa': config.phase1.mu_spa,
        'mu_tem': config.phase1.mu_tem,
        'dependent_noise': config.diffusion.dependent_noise,
        'beta': config.diffusion.effective_beta,
        'ssim': report.ssim_mean,
        'img_acc': report.nway_image["accuracy"],
        'vid_acc': report.nway_video["accuracy"],
    }


def run_point(base_root: Path, config_data: dict, axis: str, value, force: bool=False, log_level: str | None=None) -> dict:
    """Runs one grid point and returns its table row. Top level so worker processes can pickle it."""
    if log_level:
        setup_logging(log_level)
    base = RunConfig.from_dict(config_data)
    config = point_config(base, axis, value)
    root = point_dir(Path(base_root), axis, value)
    _seed_from_base(Path(base_root), root)
    run_pipeline(RunContext(config, root), ABLATION_STAGES, force=force)
    return table_row(f"{axis}={_parse_value(axis, value)}", config, root)


def ablate(ctx: RunContext, axis: str, values=None, *, workers: int=1, force: bool=False, log_level: str | None=None) -> pd.DataFrame:
    """Sweeps one axis over `values` and writes ``ablate/<axis>/rows.csv``.

    #### Args:
        ctx (RunContext): The base run; it is brought up to date first.
        axis (str): One of AXES.
        values (list, optional): Defaults to DEFAULT_VALUES[axis].
        workers (int, optional): Grid points run in this many processes. Defaults to 1.

    #### Returns:
        rows (pd.DataFrame): one row per value, in the order given
    """
    if axis not in AXES:
        raise ConfigError(f"unknown ablation axis '{axis}'; choose from {sorted(AXES)}")
    values = list(DEFAULT_VALUES[axis] if values is None else values)
    if not values:
        raise ConfigError("ablation needs at least one value")
    run_pipeline(ctx, ABLATION_STAGES)
    data = ctx.config.to_dict()

    rows = {}
    if workers <= 1:
        for i, value in enumerate(values):
            rows[i] = run_point(ctx.root, data, axis, value, force)
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = {executor.submit(run_point, ctx.root, data, axis, v, force, log_level): i for i, v in enumerate(values)}
            for future in as_completed(futures):
                rows[futures[future]] = future.result()
                LOGGER.info("ablation point done", extra={"axis": axis, "experiment": rows[futures[future]]["experiment"]})
    frame = pd.DataFrame([rows[i] for i in range(len(values))], columns=TABLE_COLUMNS)
    atomic_write_bytes(ctx.path(f"ablate/{axis}/rows.csv"), frame.to_csv(index=False).encode("utf-8"))
    return frame


def report(ctx: RunContext) -> pd.DataFrame:
    """Collects the base run and every ablation sweep into ``report/table.csv``."""
    frames = []
    if (ctx.path("evaluate") / "report.yaml").exists():
        frames.append(pd.DataFrame([table_row("base", ctx.config, ctx.root)], columns=TABLE_COLUMNS))
    for axis in AXES:
        rows = ctx.path(f"ablate/{axis}/rows.csv")
        if rows.exists():
            frames.append(pd.read_csv(rows))
    if not frames:
        raise ConfigError(f"nothing to report under {ctx.root}; run evaluate or ablate first")
    table = pd.concat(frames, ignore_index=True)[TABLE_COLUMNS]
    atomic_write_bytes(ctx.path("report/table.csv"), table.to_csv(index=False).encode("utf-8"))
    LOGGER.info("report written", extra={"rows": len(table)})
    return table
