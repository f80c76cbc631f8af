"""Command-line entry points: synth, pretrain, sweep, serve, bench."""

from __future__ import annotations

import logging
from pathlib import Path

import click
import numpy as np

from .acquisition import AcquisitionKind
from .bench import bench_report
from .data import Dataset, SynthConfig, load_ndjson, save_ndjson, synth_generate, zscore_normalize
from .loop import ALConfig, CANONICAL_KINDS, Seeds, eta_sweep, evaluate, pretrain as pretrain_model
from .network import load as load_blob, save as save_blob
from .optimizer import OptimizerHyper
from .seeding import stable_seed
from .service import OracleService, create_app
from .window import Window

KIND_CHOICES = [k.value for k in AcquisitionKind]


@click.group()
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--n", "n_windows", type=int, default=1200, show_default=True)
@click.option("--length", type=int, default=32, show_default=True)
@click.option("--sep", type=float, default=1.0, show_default=True)
@click.option("--noise", type=float, default=20.0, show_default=True)
@click.option("--balance", type=float, default=0.5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--id-prefix", default="w", show_default=True,
              help="Window id prefix; keep prefixes distinct across files you combine.")
@click.option("--normalize", is_flag=True, help="Z-score channels using the file's own statistics.")
@click.option("--unlabeled", is_flag=True, help="Strip labels (pool-style file).")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def synth(n_windows, length, sep, noise, balance, seed, id_prefix, normalize, unlabeled, out):
    """Generate a synthetic two-channel stress dataset as NDJSON."""
    ds = synth_generate(SynthConfig(n_windows, length, sep, noise, balance, seed, id_prefix))
    if normalize:
        ds.tag_splits([w.id for w in ds.windows])
        ds = zscore_normalize(ds)
    if unlabeled:
        ds = Dataset([w.without_label() for w in ds.windows], channel_names=ds.channel_names)
    save_ndjson(ds, out)
    click.echo(f"wrote {len(ds)} windows to {out}")


@main.command("pretrain")
@click.option("--data", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--test", type=click.Path(exists=True, dir_okay=False))
@click.option("--epochs", type=int, default=10, show_default=True)
@click.option("--passes", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def pretrain_cmd(data, test, epochs, passes, seed, out):
    """Train a fresh model on a labeled NDJSON file and save the blob."""
    train = [w for w in load_ndjson(data).windows if w.label is not None]
    if not train:
        raise click.ClickException(f"{data} contains no labeled windows")
    seeds = Seeds.from_root(seed)
    config = ALConfig(eta=0.0, pretrain_epochs=epochs, n_passes=passes, seeds=seeds)
    if test:
        test_windows = [w for w in load_ndjson(test).windows if w.label is not None]
        params, baseline = pretrain_model(train, test_windows, config)
        click.echo(f"baseline accuracy: {baseline:.2f}%")
    else:
        from .network import Architecture, init_params
        from .optimizer import fit

        arch = Architecture(c_in=train[0].n_channels, length=train[0].length)
        params, trace = fit(init_params(arch, seeds.init), train, epochs,
                            config.optimizer, seeds.train)
        click.echo(f"final epoch loss: {trace[-1]:.4f}" if trace else "no epochs run")
    Path(out).write_bytes(save_blob(params))
    click.echo(f"saved model ({Path(out).stat().st_size} bytes) to {out}")


@main.command()
@click.option("--data", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Labeled NDJSON used for the train/pool split.")
@click.option("--test", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--etas", default="0.0,0.2,0.4,0.6,0.8,1.0", show_default=True)
@click.option("--kinds", default="all", show_default=True,
              help='Comma-separated kinds or "all".')
@click.option("--seeds", default="1,2,3,4,5", show_default=True)
@click.option("--passes", type=int, default=10, show_default=True)
@click.option("--wa", "windows_per_iteration", type=int, default=32, show_default=True)
@click.option("--epochs", type=int, default=10, show_default=True)
@click.option("--pretrain-epochs", type=int, default=10, show_default=True)
@click.option("--ratio", type=float, default=0.3, show_default=True)
@click.option("--normalize/--no-normalize", default=True, show_default=True,
              help="Z-score with statistics from --data before running.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def sweep(data, test, etas, kinds, seeds, passes, windows_per_iteration, epochs,
          pretrain_epochs, ratio, normalize, out):
    """Run the (eta x kind) accuracy grid and write the CSV report."""
    data_windows = [w for w in load_ndjson(data).windows if w.label is not None]
    test_windows = [w for w in load_ndjson(test).windows if w.label is not None]
    if normalize:
        data_windows, test_windows = _normalize_pair(data_windows, test_windows)
    eta_values = [float(v) for v in etas.split(",") if v.strip()]
    kind_values = (
        list(CANONICAL_KINDS)
        if kinds.strip() == "all"
        else [AcquisitionKind(k.strip()) for k in kinds.split(",")]
    )
    seed_values = [int(v) for v in seeds.split(",") if v.strip()]
    config = ALConfig(
        eta=0.0, n_passes=passes, windows_per_iteration=windows_per_iteration,
        epochs_per_iteration=epochs, pretrain_epochs=pretrain_epochs, split_ratio=ratio,
    )
    report = eta_sweep(data_windows, test_windows, kind_values, eta_values, seed_values, config)
    mean_path, std_path = report.to_csv(out)
    click.echo(Path(mean_path).read_text().rstrip())
    click.echo(f"wrote {mean_path} and {std_path}")


def _normalize_pair(data_windows, test_windows):
    combined = Dataset(list(data_windows) + list(test_windows))
    combined.tag_splits([w.id for w in data_windows], test_ids=[w.id for w in test_windows])
    norm = zscore_normalize(combined)
    return norm.by_split("train"), norm.by_split("test")


@main.command()
@click.option("--model", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--pool", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--acq", type=click.Choice(KIND_CHOICES), default="variation_ratios",
              show_default=True)
@click.option("--passes", type=int, default=10, show_default=True)
@click.option("--auto-retrain-every", type=int, default=None,
              help="Fire a retrain whenever this many new labels accumulate.")
@click.option("--train", type=click.Path(exists=True, dir_okay=False),
              help="Labeled NDJSON included in every retrain.")
@click.option("--test", type=click.Path(exists=True, dir_okay=False),
              help="Labeled NDJSON used to report accuracy after retrains.")
@click.option("--epochs", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--ui", type=click.Path(exists=True, file_okay=False),
              help="Static directory served at /.")
@click.option("--checkpoint-dir", type=click.Path(file_okay=False))
def serve(model, pool, port, host, acq, passes, auto_retrain_every, train, test,
          epochs, seed, ui, checkpoint_dir):
    """Serve the query queue and labeling API for a human oracle."""
    import uvicorn

    params = load_blob(Path(model).read_bytes())
    pool_windows = load_ndjson(pool).windows
    train_windows = (
        [w for w in load_ndjson(train).windows if w.label is not None] if train else ()
    )
    test_windows = (
        [w for w in load_ndjson(test).windows if w.label is not None] if test else None
    )
    service = OracleService(
        params, pool_windows, AcquisitionKind(acq), n_passes=passes, seed=seed,
        epochs_per_retrain=epochs, auto_retrain_every=auto_retrain_every,
        train_windows=train_windows, test_windows=test_windows,
        checkpoint_dir=Path(checkpoint_dir) if checkpoint_dir else None,
    )
    app = create_app(service, ui_dir=Path(ui) if ui else None)
    click.echo(f"serving {len(pool_windows)}-window pool on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--model", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--data", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--passes", type=int, default=10, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def bench(model, data, passes, out):
    """Measure inference/training/scoring latency and model size."""
    params = load_blob(Path(model).read_bytes())
    windows = load_ndjson(data).windows
    report = bench_report(params, windows, n_passes=passes)
    report.to_csv(out)
    click.echo(report.table())
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
