"""Batch entry points: synth, train, eval, localize, serve.

Every randomized subcommand requires an explicit --seed so experiments are
replayable; a --config JSON file can pre-set any flag (explicit flags win).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .augment import AugmentConfig
from .synth import GridSpec, SynthConfig


def _load_config_defaults(ctx, param, value):
    """--config <json>: entries become defaults for the remaining flags."""
    if value is None:
        return None
    data = json.loads(Path(value).read_text())
    if not isinstance(data, dict):
        raise click.BadParameter("config file must hold a JSON object")
    ctx.default_map = {**(ctx.default_map or {}), **data}
    return value


_config_option = click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    callback=_load_config_defaults,
    is_eager=True,
    expose_value=False,
    help="JSON file with default values for any flag of this subcommand.",
)


@click.group()
def main():
    """Overhead depth-map pedestrian localization pipeline."""


@main.command()
@_config_option
@click.option("--grid", "s", type=int, default=5, show_default=True, help="Cells per grid side.")
@click.option("--q", type=float, default=0.5, show_default=True, help="Per-cell pedestrian probability.")
@click.option("--lam", type=float, default=3.0, show_default=True, help="Poisson mean of distractor count.")
@click.option("--noise-sigma", type=float, default=0.01, show_default=True)
@click.option("--count", type=int, required=True, help="Number of scenes.")
@click.option("--seed", type=int, required=True, help="Base seed; scene i uses seed+i.")
@click.option("--patches", "patches_root", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
def synth(s, q, lam, noise_sigma, count, seed, patches_root, out_dir):
    """Generate an annotated synthetic dataset."""
    from .patchlib import PatchLibrary
    from .synth import generate_dataset

    if count < 1:
        raise click.UsageError("--count must be >= 1")
    lib = PatchLibrary.load(patches_root)
    cfg = SynthConfig(
        grid=GridSpec(s=s), q=q, lam=lam, augment=AugmentConfig(), noise_sigma=noise_sigma
    )
    manifest = generate_dataset(cfg, lib, seed, count, out_dir)
    counts = manifest["pedestrian_counts"]
    click.echo(
        f"wrote {count} scenes to {out_dir}; pedestrians/scene "
        f"mean {np.mean(counts):.2f} min {min(counts)} max {max(counts)}"
    )


@main.command()
@_config_option
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--val-dataset", "val_dir", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--epochs", type=int, default=10, show_default=True)
@click.option("--batch-size", type=int, default=64, show_default=True)
@click.option("--learning-rate", type=float, default=1e-3, show_default=True)
@click.option("--optimizer", type=click.Choice(["adam", "sgd"]), default="adam", show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--conv-channels", type=(int, int), default=(16, 32), show_default=True)
@click.option("--dense", "dense_widths", type=int, multiple=True, default=(256,), show_default=True)
@click.option("--lambda-h", type=float, default=1.0, show_default=True)
@click.option("--lambda-l2", type=float, default=5.0, show_default=True)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(dir_okay=False), required=True,
              help="Output checkpoint; '<name>.resume.npz' alongside enables --resume.")
@click.option("--checkpoint-every", type=int, default=10, show_default=True, help="Epoch interval.")
@click.option("--resume", is_flag=True, help="Continue from the checkpoint's resume state.")
@click.option("--history", "history_path", type=click.Path(dir_okay=False), default=None,
              help="Write per-epoch loss history CSV here.")
def train(dataset_dir, val_dir, epochs, batch_size, learning_rate, optimizer, seed,
          conv_channels, dense_widths, lambda_h, lambda_l2, checkpoint_path,
          checkpoint_every, resume, history_path):
    """Train the grid detector on a generated dataset."""
    from .net.checkpoint import (
        load_checkpoint, load_resume_state, save_checkpoint, save_resume_state,
    )
    from .net.model import LossWeights, NetArch, init
    from .net.training import TrainConfig, train as train_loop
    from .synth import load_dataset

    manifest, scenes = load_dataset(dataset_dir)
    val_scenes = load_dataset(val_dir)[1] if val_dir else None
    grid = scenes[0].truth.grid
    arch = NetArch(
        input_w=grid.width,
        input_h=grid.height,
        conv_channels=tuple(conv_channels),
        dense_widths=tuple(dense_widths),
        s=grid.s,
    )
    cfg = TrainConfig(
        epochs=epochs,
        batch_size=batch_size,
        learning_rate=learning_rate,
        optimizer=optimizer,
        seed=seed,
        loss_weights=LossWeights(lambda_h=lambda_h, lambda_l2=lambda_l2),
    )
    resume_path = Path(str(checkpoint_path) + ".resume.npz")
    start_epoch, opt_state, history = 0, None, None
    if resume:
        if not resume_path.exists():
            raise click.UsageError(f"--resume requires {resume_path}")
        params = load_checkpoint(checkpoint_path)
        start_epoch, opt_state, history = load_resume_state(resume_path)
        click.echo(f"resuming at epoch {start_epoch}")
    else:
        params = init(arch, seed)

    def on_epoch(epoch, p, st, hist):
        if (epoch + 1) % checkpoint_every == 0 or epoch + 1 == epochs:
            save_checkpoint(checkpoint_path, p)
            save_resume_state(resume_path, epoch + 1, st, hist)

    trained, history = train_loop(
        params, scenes, cfg, val_scenes=val_scenes,
        start_epoch=start_epoch, opt_state=opt_state, history=history,
        on_epoch=on_epoch,
    )
    save_checkpoint(checkpoint_path, trained)
    if history_path:
        from .net.training import history_to_csv

        Path(history_path).write_text(history_to_csv(history))
    last = history[-1] if history else {"train_loss": float("nan")}
    click.echo(f"trained {epochs} epochs; final train loss {last['train_loss']:.4f}")


def _detections_for_scene(scene_image, method, checkpoint_params, grid, threshold, cluster_cfg):
    from .clusterloc import localize
    from .net.decode import decode
    from .net.model import forward

    if method == "cluster":
        return localize(scene_image, cluster_cfg)
    return decode(forward(checkpoint_params, scene_image), grid, threshold)


@main.command(name="eval")
@_config_option
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--method", "methods", type=click.Choice(["cnn", "cluster"]), multiple=True,
              default=("cnn", "cluster"), show_default=True)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--cutoff", type=float, default=0.45, show_default=True)
@click.option("--n-samples", type=int, default=400, show_default=True)
@click.option("--min-cluster-size", type=int, default=5, show_default=True)
@click.option("--seed", type=int, required=True, help="Seed for cluster sampling.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
def eval_cmd(dataset_dir, methods, checkpoint_path, threshold, cutoff, n_samples,
             min_cluster_size, seed, out_dir):
    """Evaluate localizers on a dataset; writes report JSON/CSV per method."""
    from .clusterloc import ClusterConfig
    from .evalkit import evaluate
    from .synth import load_dataset

    manifest, scenes = load_dataset(dataset_dir)
    grid = scenes[0].truth.grid
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    params = None
    if "cnn" in methods:
        if checkpoint_path is None:
            raise click.UsageError("--method cnn requires --checkpoint")
        from .net.checkpoint import load_checkpoint

        params = load_checkpoint(checkpoint_path)
    for method in methods:
        frames = []
        for i, sc in enumerate(scenes):
            ccfg = ClusterConfig(
                depth_threshold=sc.image.floor_depth - 0.3,
                n_samples=n_samples,
                cutoff=cutoff,
                min_cluster_size=min_cluster_size,
                seed=seed + i,
            )
            frames.append(
                (_detections_for_scene(sc.image, method, params, grid, threshold, ccfg), sc.truth)
            )
        report = evaluate(frames, grid, threshold)
        (out_dir / f"report_{method}.json").write_text(report.to_json())
        (out_dir / f"report_{method}.csv").write_text(report.to_csv())
        o = report.overall
        click.echo(
            f"{method}: frames {o.n_frames} precision {o.precision} "
            f"recall {o.recall} mean_iou {o.mean_iou}"
        )


@main.command()
@_config_option
@click.option("--frame", "frame_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--frames-dir", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--method", type=click.Choice(["cnn", "cluster"]), default="cluster", show_default=True)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--cutoff", type=float, default=0.45, show_default=True)
@click.option("--n-samples", type=int, default=400, show_default=True)
@click.option("--min-cluster-size", type=int, default=5, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True,
              help="Detections JSONL output.")
def localize(frame_path, frames_dir, method, checkpoint_path, threshold, cutoff,
             n_samples, min_cluster_size, seed, out_path):
    """Localize pedestrians in one frame or a directory of frames."""
    from .clusterloc import ClusterConfig
    from .depthmap import load_dfm
    from .synth import GridSpec

    if (frame_path is None) == (frames_dir is None):
        raise click.UsageError("provide exactly one of --frame or --frames-dir")
    paths = [Path(frame_path)] if frame_path else sorted(Path(frames_dir).glob("*.dfm"))

    params = None
    if method == "cnn":
        if checkpoint_path is None:
            raise click.UsageError("--method cnn requires --checkpoint")
        from .net.checkpoint import load_checkpoint

        params = load_checkpoint(checkpoint_path)
    lines = []
    for i, p in enumerate(paths):
        m = load_dfm(p)
        ccfg = ClusterConfig(
            depth_threshold=m.floor_depth - 0.3,
            n_samples=n_samples,
            cutoff=cutoff,
            min_cluster_size=min_cluster_size,
            seed=seed + i,
        )
        grid = None
        if params is not None:
            grid = GridSpec(
                s=params.arch.s,
                width=params.arch.input_w,
                height=params.arch.input_h,
                extent_w=m.width * m.pixel_pitch,
                extent_h=m.height * m.pixel_pitch,
            )
        dets = _detections_for_scene(m, method, params, grid, threshold, ccfg)
        lines.extend(d.to_jsonl(p.stem) for d in dets)
    Path(out_path).write_text("\n".join(lines) + ("\n" if lines else ""))
    click.echo(f"{len(lines)} detections -> {out_path}")


@main.command()
@_config_option
@click.option("--port", type=int, default=8008, show_default=True)
@click.option("--frames", "frame_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--patches", "patches_root", type=click.Path(file_okay=False), required=True)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--ui", "ui_dir", type=click.Path(file_okay=False), default=None,
              help="Static directory with the built curator UI, served at /ui.")
def serve(port, frame_dir, patches_root, checkpoint_path, ui_dir):
    """Run the curation service."""
    import uvicorn

    from .service.app import create_app

    app = create_app(frame_dir, patches_root, checkpoint_path, ui_dir)
    uvicorn.run(app, host="127.0.0.1", port=port)


if __name__ == "__main__":
    sys.exit(main())
