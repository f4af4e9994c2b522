"""Command-line interface: benchmark experiments, the service, and a thin client.

Experiment commands (run / compare-na / choices) execute locally; the session
commands talk to a running service over HTTP.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import GraphActiveError
from .experiments import ExperimentConfig, run_experiment, run_na_comparison

_LAPLACIAN_NAMES = {"u": "unnormalized", "n": "normalized"}


def _experiment_options(fn):
    opts = [
        click.option("--dataset", type=click.Choice(["checkerboard", "mnist"]), default="checkerboard", show_default=True),
        click.option("--model", type=click.Choice(["hf", "gr", "probit"]), default="probit", show_default=True),
        click.option("--acq", type=click.Choice(["mc", "vopt", "sigmaopt", "mbr", "unc", "random"]), default="mc", show_default=True),
        click.option("--queries", type=int, default=None, help="Queries per trial (default: 200 checkerboard, 100 mnist)."),
        click.option("--trials", type=int, default=5, show_default=True),
        click.option("--update", type=click.Choice(["retrain", "na"]), default="na", show_default=True),
        click.option("--out", type=click.Path(path_type=Path), required=True, help="Output directory for CSV artifacts."),
        click.option("--tau", type=float, default=1.0, show_default=True, help="Prior regularization scale."),
        click.option("--gamma", type=float, default=0.1, show_default=True, help="Label-noise scale."),
        click.option("--seed", type=int, default=0, show_default=True, help="Base seed; trial t uses seed + t."),
        click.option("--knn", type=int, default=15, show_default=True, help="Neighbors for k-NN graphs."),
        click.option("--scale", type=float, default=None, help="Kernel length scale (default: 0.05 checkerboard, 380 mnist)."),
        click.option("--laplacian", type=click.Choice(["u", "n"]), default=None, help="Laplacian kind (default: u checkerboard, n mnist)."),
        click.option("--refresh-every", type=int, default=0, show_default=True, help="Full retrain cadence in na mode (0 = never)."),
        click.option("--n", type=int, default=2000, show_default=True, help="Checkerboard point count."),
        click.option("--mnist-images", type=click.Path(exists=True, path_type=Path), default=None, help="IDX image file (mnist only)."),
        click.option("--mnist-labels", type=click.Path(exists=True, path_type=Path), default=None, help="IDX label file (mnist only)."),
        click.option("--mnist-dir", type=click.Path(exists=True, path_type=Path), default=None, envvar="GRAPHACTIVE_MNIST_DIR", help="Directory with standard IDX files (mnist only)."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _config_from_flags(**kw) -> ExperimentConfig:
    return ExperimentConfig(
        dataset=kw["dataset"],
        model=kw["model"],
        acquisition=kw["acq"],
        n_queries=kw["queries"],
        n_trials=kw["trials"],
        update_mode=kw["update"],
        refresh_every=kw["refresh_every"],
        seed=kw["seed"],
        tau=kw["tau"],
        gamma=kw["gamma"],
        knn_k=kw["knn"],
        length_scale=kw["scale"],
        checkerboard_n=kw["n"],
        laplacian_kind=_LAPLACIAN_NAMES[kw["laplacian"]] if kw["laplacian"] else None,
        mnist_images=str(kw["mnist_images"]) if kw["mnist_images"] else None,
        mnist_labels=str(kw["mnist_labels"]) if kw["mnist_labels"] else None,
        mnist_dir=str(kw["mnist_dir"]) if kw["mnist_dir"] else None,
    )


@click.group()
def main():
    """Graph-based active learning: experiments and annotation service."""


@main.command()
@_experiment_options
def run(**kw):
    """Run one experiment (model x acquisition x dataset) and write curves."""
    cfg = _config_from_flags(**kw)
    try:
        curve = run_experiment(cfg, kw["out"])
    except GraphActiveError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"wrote {kw['out']}")
    click.echo(f"final mean accuracy: {curve.final_mean_accuracy:.4f}")


@main.command("compare-na")
@_experiment_options
def compare_na(**kw):
    """Matched-seed comparison: rank-one updates vs full retraining (probit)."""
    cfg = _config_from_flags(**kw)
    try:
        comp = run_na_comparison(cfg, kw["out"])
    except GraphActiveError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"wrote {kw['out']}")
    click.echo(f"final mean accuracy  na: {comp.na.final_mean_accuracy:.4f}")
    click.echo(f"final mean accuracy  retrain: {comp.retrain.final_mean_accuracy:.4f}")
    click.echo(f"per-step mean |diff|: {comp.mean_abs_diff:.4f}")


@main.command()
@_experiment_options
def choices(**kw):
    """Run trials and dump per-trial query coordinates for choice maps."""
    cfg = _config_from_flags(**kw)
    try:
        run_experiment(cfg, kw["out"])
    except GraphActiveError as exc:
        raise click.ClickException(str(exc)) from exc
    out = Path(kw["out"])
    files = sorted(p.name for p in out.glob("choices_trial_*.csv"))
    click.echo(f"wrote {len(files)} choice logs to {out}:")
    for name in files:
        click.echo(f"  {name}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--data-dir", type=click.Path(path_type=Path), default="graphactive-sessions", show_default=True, envvar="GRAPHACTIVE_DATA_DIR")
@click.option("--frontend-dir", type=click.Path(path_type=Path), default=None, help="Serve this directory as the UI at /.")
def serve(host, port, data_dir, frontend_dir):
    """Start the annotation service."""
    import uvicorn

    from .service import create_app
    from .sessions import SessionManager

    app = create_app(SessionManager(data_dir), frontend_dir=str(frontend_dir) if frontend_dir else None)
    uvicorn.run(app, host=host, port=port)


@main.group()
@click.option("--url", default="http://127.0.0.1:8000", show_default=True, envvar="GRAPHACTIVE_URL")
@click.pass_context
def session(ctx, url):
    """Talk to a running annotation service."""
    ctx.obj = url


def _client(ctx):
    from .client import SessionClient

    return SessionClient(ctx.obj)


@session.command()
@click.option("--dataset", default="checkerboard", show_default=True)
@click.option("--n", type=int, default=2000, show_default=True)
@click.option("--model", type=click.Choice(["hf", "gr", "probit"]), default="probit", show_default=True)
@click.option("--acq", type=click.Choice(["mc", "vopt", "sigmaopt", "mbr", "unc", "random"]), default="mc", show_default=True)
@click.option("--per-class", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def create(ctx, dataset, n, model, acq, per_class, seed):
    """Create a session on built-in data with per-class seed labels."""
    payload = {
        "dataset": {"name": dataset, "n": n, "seed": seed},
        "model": model,
        "acquisition": acq,
        "seed_labels": {"per_class": per_class, "seed": seed},
    }
    with _client(ctx) as c:
        out = c.create_session(payload)
    click.echo(json.dumps({k: v for k, v in out.items() if k != "display_coords"}, indent=2))


@session.command("next")
@click.argument("session_id")
@click.pass_context
def next_cmd(ctx, session_id):
    """Propose the next query point."""
    with _client(ctx) as c:
        out = c.next_query(session_id)
    slim = {k: v for k, v in out.items() if k not in ("predictions", "probabilities", "image_b64")}
    click.echo(json.dumps(slim, indent=2))


@session.command()
@click.argument("session_id")
@click.argument("index", type=int)
@click.argument("label", type=click.Choice(["+1", "-1", "1"]))
@click.pass_context
def label(ctx, session_id, index, label):
    """Submit a label for the pending query.

    Negative labels need the option terminator: `session label ID 5 -- -1`.
    """
    with _client(ctx) as c:
        out = c.submit_label(session_id, index, int(label))
    click.echo(json.dumps(out, indent=2))


@session.command()
@click.argument("session_id")
@click.pass_context
def state(ctx, session_id):
    """Show a compact session snapshot."""
    with _client(ctx) as c:
        out = c.get_state(session_id)
    slim = {
        k: v
        for k, v in out.items()
        if k not in ("predictions", "probabilities", "dataset")
    }
    slim["n_nodes"] = out["dataset"]["n"]
    click.echo(json.dumps(slim, indent=2))


@session.command()
@click.argument("session_id")
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Write CSV here instead of stdout.")
@click.pass_context
def export(ctx, session_id, out):
    """Download the session CSV (history and predictions)."""
    with _client(ctx) as c:
        csv = c.export_csv(session_id)
    if out:
        Path(out).write_text(csv)
        click.echo(f"wrote {out}")
    else:
        sys.stdout.write(csv)


if __name__ == "__main__":
    main()
