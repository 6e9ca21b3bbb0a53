"""Command-line entry points for the evaluation pipeline."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .pipeline import STAGES, MissingStage, Pipeline, RunConfig


def _pipeline(ctx: click.Context) -> Pipeline:
    opts = ctx.obj
    if opts["config"]:
        cfg = RunConfig.from_file(opts["config"])
    else:
        cfg = RunConfig()
    if opts["run_id"]:
        cfg.run_id = opts["run_id"]
    if opts["workers"]:
        cfg.workers = opts["workers"]
    if opts["offline"] and (cfg.predictor == "live"
                            or cfg.judge_source == "live"
                            or cfg.order_source == "live"):
        raise click.ClickException("live sources configured but --offline given")
    return Pipeline(cfg)


@click.group()
@click.option("--config", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Run configuration file (YAML).")
@click.option("--run-id", default=None, help="Run directory name.")
@click.option("--workers", type=int, default=None, help="Request concurrency.")
@click.option("--force", is_flag=True, help="Recompute completed stages.")
@click.option("--offline", is_flag=True,
              help="Refuse configurations that would hit the network.")
@click.pass_context
def main(ctx, config, run_id, workers, force, offline):
    """Slide extraction-quality evaluation pipeline.

    Credentials are read from the environment variable named in the endpoint
    configuration; they are never written to disk.
    """
    ctx.obj = {"config": config, "run_id": run_id, "workers": workers,
               "force": force, "offline": offline}


def _stage_command(stage: str, doc: str):
    @main.command(name=stage, help=doc)
    @click.pass_context
    def _cmd(ctx):
        pipe = _pipeline(ctx)
        try:
            getattr(pipe, f"stage_{stage}")(force=ctx.obj["force"])
        except MissingStage as missing:
            raise click.ClickException(
                f"stage {missing} has not run yet; run it first") from None
        click.echo(f"{stage}: done ({pipe.stage_dir(stage)})")

    return _cmd


_stage_command("ingest", "Extract ground-truth slides from the deck corpus.")
_stage_command("render", "Rasterize ground-truth slides to PNG.")
_stage_command("perturb", "Synthesize the severity-graded degradation suite.")
_stage_command("extract", "Collect structured-extraction predictions.")
_stage_command("judge", "Collect quality scores for perturbed slides.")
_stage_command("order", "Collect deck-ordering predictions.")
_stage_command("match", "Align predictions with ground truth.")
_stage_command("score", "Aggregate matching and error metrics.")
_stage_command("analyze", "Compute judge-reliability and ordering analytics.")
_stage_command("report", "Emit the human-readable report and plots.")


@main.command(name="run")
@click.option("--stages", default=",".join(STAGES),
              help="Comma-separated stage list, in order.")
@click.pass_context
def run_all(ctx, stages):
    """Run the full pipeline (or a prefix of it)."""
    pipe = _pipeline(ctx)
    names = [s.strip() for s in stages.split(",") if s.strip()]
    unknown = [s for s in names if s not in STAGES]
    if unknown:
        raise click.ClickException(f"unknown stages: {', '.join(unknown)}")
    try:
        pipe.run(stages=names, force=ctx.obj["force"])
    except MissingStage as missing:
        raise click.ClickException(f"stage {missing} has not run yet") from None
    click.echo(f"run complete: {pipe.run_dir}")


@main.command()
@click.pass_context
def status(ctx):
    """Show which stages of the run have completed."""
    pipe = _pipeline(ctx)
    for stage in STAGES:
        done = (pipe.stage_dir(stage) / "manifest.json").exists()
        click.echo(f"{stage:10s} {'done' if done else '-'}")


@main.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
def validate(path):
    """Validate one slide JSON document against the strict schema."""
    from .schema import ValidationError, slide_from_json

    try:
        slide = slide_from_json(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, ValidationError) as exc:
        click.echo(f"invalid: {exc}", err=True)
        sys.exit(1)
    from .schema import complexity

    click.echo(f"valid: {complexity(slide)} elements")


if __name__ == "__main__":
    main()
