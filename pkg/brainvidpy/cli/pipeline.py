"""
### pipeline.py
#### Functions:
    - RunContext
    - run_stage
    - run_pipeline
    - gen_data
    - pretrain
    - train_phase1
    - train_phase2
    - decode
    - evaluate
    - interpret

Every stage reads its inputs from and writes its artifacts to ``<run root>/<name>/``, then
appends one JSON line to ``manifest.jsonl``: stage, config hash of the sections it depends on,
input and output file hashes and wall time. A stage whose config hash, inputs and outputs all
match its last manifest line is skipped unless forced.
"""

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import torch
import yaml

from brainvidpy._tools.tools import atomic_write_bytes, counter_rng, seed_everything, sha256_bytes, sha256_file, torch_generator
from brainvidpy.cli.config import RunConfig, dump_config, section_hash
from brainvidpy.core.archive import archive_read, archive_write
from brainvidpy.core.checkpoint import load_module, module_hash, save_module
from brainvidpy.diffusion.codec import IdentityCodec, LatentCodec, codec_train, tensor_to_video
from brainvidpy.diffusion.denoiser import DenoiserConfig, PseudoUNet
from brainvidpy.diffusion.export import export_video
from brainvidpy.diffusion.sampling import sample
from brainvidpy.diffusion.schedule import make_schedule
from brainvidpy.diffusion.training import Phase2Config, train_phase2 as fit_denoiser
from brainvidpy.errors import DependencyError, NumericalAbortError
from brainvidpy.evaluation.classifiers import ClipClassifier, FrameClassifier, prob_fn, train_classifier
from brainvidpy.evaluation.control import time_average_control
from brainvidpy.evaluation.report import evaluate_run, write_report
from brainvidpy.evaluation.stats import binomial_pvalue, sign_test
from brainvidpy.interpret.attention import summarize, write_summaries
from brainvidpy.interpret.heatmap import export_heatmap
from brainvidpy.interpret.roi import roi_aggregate
from brainvidpy.interpret.stats import attention_sums, compare_stages
from brainvidpy.phase1.augment import AugmentConfig
from brainvidpy.phase1.contrastive import Phase1Config, retrieval_batches, retrieval_top1, train_phase1 as fit_encoder
from brainvidpy.phase1.encoder import EncoderConfig, FmriEncoder, load_encoder, save_encoder
from brainvidpy.phase1.pretrain import mae_pretrain
from brainvidpy.synthdata.generator import Geometry, generate_classifier_set, generate_dataset, semantic_overlap
from brainvidpy.synthdata.io import read_layout, read_split, write_layout, write_split

LOGGER = logging.getLogger(__name__)

PIPELINE = ('gen-data', 'pretrain', 'train-phase1', 'train-phase2', 'decode', 'evaluate', 'interpret')

STAGE_SECTIONS = {
    'gen-data': ('seed', 'data', 'encoder'),
    'pretrain': ('seed', 'encoder', 'pretrain'),
    'train-phase1': ('seed', 'encoder', 'augment', 'phase1'),
    'train-phase2': ('seed', 'codec', 'diffusion'),
    'decode': ('seed', 'diffusion', 'decode', 'eval'),
    'evaluate': ('seed', 'eval'),
    'interpret': ('seed', 'interpret'),
}

STAGE_DIRS = {
    'gen-data': 'data',
    'pretrain': 'pretrain',
    'train-phase1': 'phase1',
    'train-phase2': 'phase2',
    'decode': 'decode',
    'evaluate': 'evaluate',
    'interpret': 'interpret',
}

STAGE_INPUTS = {
    'gen-data': [],
    'pretrain': [('gen-data', 'data/train.nfta')],
    'train-phase1': [('pretrain', 'pretrain/encoder.nfta'), ('gen-data', 'data/train.nfta'), ('gen-data', 'data/val.nfta')],
    'train-phase2': [('train-phase1', 'phase1/encoder.nfta'), ('gen-data', 'data/train.nfta')],
    'decode': [('train-phase2', 'phase2/denoiser.nfta'), ('train-phase2', 'phase2/codec.nfta'),
               ('train-phase2', 'phase2/encoder.nfta'), ('gen-data', 'data/test.nfta')],
    'evaluate': [('decode', 'decode/decoded.nfta'), ('gen-data', 'data/test.nfta'), ('gen-data', 'data/classifier.nfta')],
    'interpret': [('pretrain', 'pretrain/init.nfta'), ('pretrain', 'pretrain/encoder.nfta'),
                  ('train-phase1', 'phase1/encoder.nfta'), ('train-phase2', 'phase2/encoder.nfta'),
                  ('gen-data', 'data/test.nfta'), ('gen-data', 'data/rois.nfta')],
}


@dataclass
class RunContext:
    config: RunConfig
    root: Path

    def path(self, relative: str) -> Path:
        return self.root / relative

    @property
    def manifest(self) -> Path:
        return self.root / "manifest.jsonl"

    def write_config(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        atomic_write_bytes(self.path("config.yaml"), dump_config(self.config).encode("utf-8"))


def read_manifest(path: Path) -> list[dict]:
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def append_manifest(path: Path, entry: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(json.dumps(entry, sort_keys=True) + "\n")


def stage_inputs(ctx: RunContext, stage: str) -> dict[str, str]:
    """Hashes of the stage's inputs, raising DependencyError for the first missing one."""
    wanted = list(STAGE_INPUTS[stage])
    if stage == 'evaluate' and ctx.config.eval.time_average:
        wanted.append(('decode', 'decode/control.nfta'))
    hashes = {}
    for producer, relative in wanted:
        path = ctx.path(relative)
        if not path.exists():
            raise DependencyError(producer, relative)
        hashes[relative] = sha256_file(path)
    return hashes


def _is_current(ctx: RunContext, stage: str, chash: str, inputs: dict) -> bool:
    entries = [e for e in read_manifest(ctx.manifest) if e["stage"] == stage]
    if not entries:
        return False
    last = entries[-1]
    if last["config_hash"] != chash or last["inputs"] != inputs:
        return False
    return all(ctx.path(p).exists() and sha256_file(ctx.path(p)) == h for p, h in last["outputs"].items())


def run_stage(ctx: RunContext, stage: str, *, force: bool=False) -> bool:
    """Runs one stage unless it is up to date.

    #### Returns:
        ran (bool): False when the stage was skipped
    """
    chash = section_hash(ctx.config, STAGE_SECTIONS[stage])
    inputs = stage_inputs(ctx, stage)
    if not force and _is_current(ctx, stage, chash, inputs):
        LOGGER.info("stage up to date", extra={"stage": stage})
        return False
    ctx.write_config()
    start = time.perf_counter()
    outputs = STAGES[stage](ctx)
    entry = {
        "stage": stage,
        "config_hash": chash,
        "inputs": inputs,
        "outputs": {p: sha256_file(ctx.path(p)) for p in outputs},
        "wall_time_s": round(time.perf_counter() - start, 3),
    }
    append_manifest(ctx.manifest, entry)
    LOGGER.info("stage done", extra={"stage": stage, "wall_time_s": entry["wall_time_s"]})
    return True


def run_pipeline(ctx: RunContext, stages=PIPELINE, *, force: bool=False) -> None:
    for stage in stages:
        run_stage(ctx, stage, force=force)


def encoder_config(config: RunConfig) -> EncoderConfig:
    e = config.encoder
    return EncoderConfig(
        n_voxels=config.data.n_voxels, window=config.data.window, patch_size=e.patch_size, layers=e.layers,
        embed_dim=e.embed_dim, heads=e.heads, mlp_ratio=e.mlp_ratio, proj_rows=e.proj_rows, proj_dim=e.proj_dim,
        mask_ratio_pretrain=config.pretrain.mask_ratio,
    )


def _write_csv(ctx: RunContext, relative: str, frame: pd.DataFrame) -> str:
    atomic_write_bytes(ctx.path(relative), frame.to_csv(index=False).encode("utf-8"))
    return relative


def _write_yaml(ctx: RunContext, relative: str, data: dict) -> str:
    atomic_write_bytes(ctx.path(relative), yaml.safe_dump(data, sort_keys=True).encode("utf-8"))
    return relative


def gen_data(ctx: RunContext) -> list[str]:
    cfg, d = ctx.config, ctx.config.data
    geometry = Geometry(window=d.window, frames_per_fmri=d.frames_per_fmri, height=d.height, width=d.width)
    train, val, test, layout = generate_dataset(
        d.n_samples, d.n_categories, d.n_voxels, geometry, hemodynamic_lag=d.hemodynamic_lag,
        noise_sigma=d.noise_sigma, seed=cfg.seed, patch_size=cfg.encoder.patch_size,
        embed_rows=cfg.encoder.proj_rows, embed_dim=cfg.encoder.proj_dim, overlap=d.overlap,
        val_fraction=d.val_fraction, test_fraction=d.test_fraction, speed=d.speed, subject_id=d.subject_id,
    )
    classifier = generate_classifier_set(
        d.classifier_per_class, d.n_categories, layout, geometry, seed=cfg.seed, hemodynamic_lag=d.hemodynamic_lag,
        speed=d.speed, embed_rows=cfg.encoder.proj_rows, embed_dim=cfg.encoder.proj_dim,
    )
    outputs = []
    for split in (train, val, test, classifier):
        write_split(split, ctx.path("data"))
        outputs += [f"data/{split.name}.nfta", f"data/{split.name}.yaml"]
    write_layout(layout, ctx.path("data/rois.nfta"))
    LOGGER.info("dataset ready", extra={"stage": "gen-data", "overlap": semantic_overlap(train, test)})
    return outputs + ["data/rois.nfta"]


def pretrain(ctx: RunContext) -> list[str]:
    cfg, p = ctx.config, ctx.config.pretrain
    seed_everything(cfg.seed)
    encoder = FmriEncoder(encoder_config(cfg))
    save_encoder(encoder, ctx.path("pretrain/init.nfta"), seed=cfg.seed)
    curve = pd.DataFrame(columns=["step", "loss"])
    if p.enabled:
        train = read_split(ctx.path("data"), "train")
        encoder, curve = mae_pretrain(encoder, train.fmri, mask_ratio=p.mask_ratio, steps=p.steps, lr=p.lr,
                                      batch_size=p.batch_size, seed=cfg.seed)
    save_encoder(encoder, ctx.path("pretrain/encoder.nfta"), step=len(curve), seed=cfg.seed)
    return ["pretrain/init.nfta", "pretrain/encoder.nfta", _write_csv(ctx, "pretrain/loss.csv", curve)]


def train_phase1(ctx: RunContext) -> list[str]:
    cfg = ctx.config
    encoder, _ = load_encoder(ctx.path("pretrain/encoder.nfta"), encoder_config(cfg))
    train = read_split(ctx.path("data"), "train")
    val = read_split(ctx.path("data"), "val")
    p1 = cfg.phase1
    config = Phase1Config(
        mu_spa=p1.mu_spa, mu_tem=p1.mu_tem, temperature=p1.temperature, batch_size=p1.batch_size, steps=p1.steps,
        lr=p1.lr, augment=AugmentConfig(**vars(cfg.augment)), literal_pairing=p1.literal_pairing,
        shuffle_pairing=p1.shuffle_pairing, log_every=p1.log_every,
    )
    try:
        encoder, curve = fit_encoder(encoder, train.fmri, train.e_txt, train.e_img, config, seed=cfg.seed)
    except NumericalAbortError as exc:
        save_encoder(encoder, ctx.path("phase1/encoder.last_good.nfta"), step=exc.step, seed=cfg.seed)
        raise
    save_encoder(encoder, ctx.path("phase1/encoder.nfta"), step=p1.steps, seed=cfg.seed)
    top1 = retrieval_top1(encoder, val.fmri, val.e_img, val.pair_id, batch_size=16)
    batches = retrieval_batches(val.pair_id, 16)
    chance = len(batches) / sum(len(b) for b in batches)
    LOGGER.info("validation retrieval", extra={"stage": "train-phase1", "top1": top1})
    return [
        "phase1/encoder.nfta",
        _write_csv(ctx, "phase1/loss.csv", curve),
        _write_yaml(ctx, "phase1/retrieval.yaml", {"top1": top1, "batch_size": 16, "chance": chance}),
    ]


def load_codec(path: Path):
    tensors = archive_read(path)
    if "codec/_meta/identity" in tensors:
        return IdentityCodec()
    codec = LatentCodec(latent_channels=int(tensors["codec/_meta/latent_channels"]), hidden=int(tensors["codec/_meta/hidden"]))
    load_module(codec, path, prefix="codec")
    return codec.eval()


def denoiser_config(config: RunConfig, latent_channels: int) -> DenoiserConfig:
    df = config.diffusion
    return DenoiserConfig(
        latent_channels=latent_channels, channels=tuple(df.channels), cond_dim=config.encoder.proj_dim,
        heads=df.heads, temporal_window=df.temporal_window, time_dim=df.time_dim, groups=df.groups,
    )


def train_phase2(ctx: RunContext) -> list[str]:
    cfg, c, df = ctx.config, ctx.config.codec, ctx.config.diffusion
    encoder, _ = load_encoder(ctx.path("phase1/encoder.nfta"), encoder_config(cfg))
    train = read_split(ctx.path("data"), "train")
    outputs = ["phase2/codec.nfta"]
    if c.kind == 'identity':
        codec = IdentityCodec()
        archive_write(ctx.path("phase2/codec.nfta"), {"codec/_meta/identity": np.ones(1)})
    else:
        codec, codec_curve = codec_train(LatentCodec(c.latent_channels, c.hidden), train.video, steps=c.steps, lr=c.lr,
                                         batch_size=c.batch_size, seed=cfg.seed)
        save_module(codec, ctx.path("phase2/codec.nfta"), prefix="codec",
                    extra={"latent_channels": c.latent_channels, "hidden": c.hidden})
        outputs.append(_write_csv(ctx, "phase2/codec_loss.csv", codec_curve))

    seed_everything(cfg.seed)
    denoiser = PseudoUNet(denoiser_config(cfg, codec.latent_channels))
    config = Phase2Config(beta=df.effective_beta, steps=df.steps, lr=df.lr, batch_size=df.batch_size,
                          finetune_encoder=df.finetune_encoder, freeze=df.freeze, log_every=df.log_every)
    try:
        denoiser, curve = fit_denoiser(denoiser, codec, encoder, train.clips, train.fmri,
                                       make_schedule(df.T, df.schedule), config, seed=cfg.seed)
    except NumericalAbortError as exc:
        save_module(denoiser, ctx.path("phase2/denoiser.last_good.nfta"), prefix="den", extra={"step": exc.step})
        raise
    save_module(denoiser, ctx.path("phase2/denoiser.nfta"), prefix="den", extra={"step": df.steps})
    save_encoder(encoder, ctx.path("phase2/encoder.nfta"), step=df.steps, seed=cfg.seed)
    return outputs + ["phase2/denoiser.nfta", "phase2/encoder.nfta", _write_csv(ctx, "phase2/loss.csv", curve)]


@torch.no_grad()
def decode_voxels(ctx: RunContext, voxels: np.ndarray, encoder: FmriEncoder, denoiser: PseudoUNet, codec) -> np.ndarray:
    """Decodes fMRI windows [N, w, V] into clips [N, m, H, W, 3]."""
    cfg = ctx.config
    d, dec, df = cfg.data, cfg.decode, cfg.diffusion
    schedule = make_schedule(df.T, df.schedule)
    latent_shape = (codec.latent_channels, d.height // 4, d.width // 4)
    videos = []
    for b, start in enumerate(range(0, voxels.shape[0], dec.batch_size)):
        cond = encoder(torch.as_tensor(voxels[start:start + dec.batch_size], dtype=torch.float32))
        z = sample(denoiser, cond, schedule, frames=d.frames_per_fmri, latent_shape=latent_shape,
                   steps_ddim=dec.ddim_steps, beta=df.effective_beta, eta=dec.eta,
                   generator=torch_generator(cfg.seed, 61, b))
        videos.append(tensor_to_video(codec.decode(z).clamp(0, 1)))
    return np.concatenate(videos)


def decode(ctx: RunContext) -> list[str]:
    cfg = ctx.config
    test = read_split(ctx.path("data"), "test")
    encoder, _ = load_encoder(ctx.path("phase2/encoder.nfta"), encoder_config(cfg))
    codec = load_codec(ctx.path("phase2/codec.nfta"))
    denoiser = PseudoUNet(denoiser_config(cfg, codec.latent_channels))
    load_module(denoiser, ctx.path("phase2/denoiser.nfta"), prefix="den")
    denoiser.eval()

    sets = {"decoded": test.fmri}
    if cfg.eval.time_average:
        sets["control"] = time_average_control(test.fmri)
    outputs = []
    for name, voxels in sets.items():
        videos = decode_voxels(ctx, voxels, encoder, denoiser, codec)
        archive_write(ctx.path(f"decode/{name}.nfta"), {"video": videos})
        outputs.append(f"decode/{name}.nfta")
        if name == "decoded":
            for i in range(min(cfg.decode.export_clips, len(videos))):
                export_video(videos[i], ctx.path("decode/samples"), f"clip{i:03d}", upscale=4)
                export_video(test.clips[i], ctx.path("decode/samples"), f"clip{i:03d}_truth", upscale=4)
    return outputs


def _fit_classifiers(ctx: RunContext) -> tuple[FrameClassifier, ClipClassifier, dict]:
    cfg, ev = ctx.config, ctx.config.eval
    split = read_split(ctx.path("data"), "classifier")
    n_categories = cfg.data.n_categories
    order = counter_rng(cfg.seed, 71).permutation(len(split))
    n_val = max(1, len(split) // 5)
    val_idx, train_idx = order[:n_val], order[n_val:]
    n_frames = split.video.shape[1]

    def frames(idx):
        return split.video[idx].reshape(-1, *split.video.shape[2:]), np.repeat(split.category[idx], n_frames)

    seed_everything(cfg.seed)
    frame_model, _, frame_acc = train_classifier(
        FrameClassifier(n_categories), *frames(train_idx), val_inputs=frames(val_idx)[0], val_labels=frames(val_idx)[1],
        steps=ev.classifier_steps, seed=cfg.seed, gate=ev.gate,
    )
    clips, pairs = split.clips, split.pair_id
    clip_model, _, clip_acc = train_classifier(
        ClipClassifier(4 * n_categories), clips[train_idx], pairs[train_idx], val_inputs=clips[val_idx],
        val_labels=pairs[val_idx], steps=ev.classifier_steps, seed=cfg.seed, gate=ev.gate,
    )
    save_module(frame_model, ctx.path("evaluate/frame_classifier.nfta"), prefix="clf")
    save_module(clip_model, ctx.path("evaluate/clip_classifier.nfta"), prefix="clf")
    digest = sha256_bytes((module_hash(frame_model) + module_hash(clip_model)).encode("ascii"))[:16]
    return frame_model, clip_model, {"frame_val_accuracy": frame_acc, "clip_val_accuracy": clip_acc, "classifier_hash": digest}


def evaluate(ctx: RunContext) -> list[str]:
    cfg, ev = ctx.config, ctx.config.eval
    test = read_split(ctx.path("data"), "test")
    frame_model, clip_model, info = _fit_classifiers(ctx)
    kwargs = dict(
        frame_classifier=prob_fn(frame_model), clip_classifier=prob_fn(clip_model), n_way=ev.n_way,
        top_k=ev.top_k, video_n_way=ev.video_n_way, trials=ev.trials, seed=cfg.seed,
        classifier_hash=info["classifier_hash"], metadata={"subject": cfg.data.subject_id, "run": cfg.name},
    )
    decoded = archive_read(ctx.path("decode/decoded.nfta"))["video"]
    report, frames = evaluate_run(decoded, test.clips, test.category, test.pair_id, **kwargs)
    outputs = [str(p.relative_to(ctx.root)) for p in write_report(report, frames, ctx.path("evaluate"))]
    successes = int(round(frames["img_acc"].sum() * ev.trials))
    summary = {
        "ssim": report.ssim_mean,
        "img_acc": report.nway_image["accuracy"],
        "vid_acc": report.nway_video["accuracy"],
        "img_pvalue": binomial_pvalue(successes, len(frames) * ev.trials, ev.top_k / ev.n_way),
        **info,
    }
    if ev.time_average:
        control = archive_read(ctx.path("decode/control.nfta"))["video"]
        control_report, control_frames = evaluate_run(control, test.clips, test.category, test.pair_id, **kwargs)
        outputs += [str(p.relative_to(ctx.root)) for p in write_report(control_report, control_frames, ctx.path("evaluate/control"))]
        per_clip = frames.groupby("clip_id")["vid_acc"].first().to_numpy()
        per_clip_control = control_frames.groupby("clip_id")["vid_acc"].first().to_numpy()
        summary.update(control_vid_acc=control_report.nway_video["accuracy"],
                       control_sign_pvalue=sign_test(per_clip, per_clip_control))
    return outputs + ["evaluate/frame_classifier.nfta", "evaluate/clip_classifier.nfta",
                      _write_yaml(ctx, "evaluate/summary.yaml", summary)]


INTERPRET_CHECKPOINTS = {
    'init': "pretrain/init.nfta",
    'post_mae': "pretrain/encoder.nfta",
    'post_contrastive': "phase1/encoder.nfta",
    'post_full': "phase2/encoder.nfta",
}


def interpret(ctx: RunContext) -> list[str]:
    cfg = ctx.config
    test = read_split(ctx.path("data"), "test")
    layout = read_layout(ctx.path("data/rois.nfta"))
    voxels = test.fmri[:cfg.interpret.max_samples]
    by_stage = {}
    for stage, relative in INTERPRET_CHECKPOINTS.items():
        encoder, _ = load_encoder(ctx.path(relative), encoder_config(cfg))
        by_stage[stage] = summarize(encoder, voxels, stage=stage, mode=cfg.interpret.mode)
    everything = [s for group in by_stage.values() for s in group]
    write_summaries(everything, ctx.path("interpret/summaries.nfta"))

    roi_rows = [[s.stage, s.layer, roi, mean] for s in everything for roi, mean in roi_aggregate(s, layout).items()]
    comparisons = pd.concat([compare_stages(by_stage['init'], by_stage[stage], layout) for stage in list(by_stage)[1:]],
                            ignore_index=True)
    outputs = [
        "interpret/summaries.nfta",
        _write_csv(ctx, "interpret/roi_means.csv", pd.DataFrame(roi_rows, columns=["stage", "layer", "roi", "mean"])),
        _write_csv(ctx, "interpret/roi_stats.csv", comparisons),
        _write_csv(ctx, "interpret/attention_sums.csv", attention_sums(everything)),
    ]
    for s in everything:
        relative = f"interpret/heatmaps/{s.stage}_{s.layer}.png"
        export_heatmap(s, layout, ctx.path(relative))
        outputs.append(relative)
    return outputs


STAGES = {
    'gen-data': gen_data,
    'pretrain': pretrain,
    'train-phase1': train_phase1,
    'train-phase2': train_phase2,
    'decode': decode,
    'evaluate': evaluate,
    'interpret': interpret,
}
