"""CLI entry point for the vickd lab."""

import functools
import logging
from pathlib import Path

import click

from .config import get_log_level, load_config, load_suite_config
from .errors import ConfigError, DataError, FormatError, NumericError, ShapeError
from .types import Profile, Recipe, ReportFormat, TrainMode

DOMAIN_ERRORS = (ConfigError, DataError, FormatError, NumericError, ShapeError)


def _domain_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DOMAIN_ERRORS as e:
            raise click.ClickException(f"{type(e).__name__}: {e}") from e

    return wrapper


def _config_options(fn):
    fn = click.option("--paper-scale", is_flag=True, help="Use the paper-scale profile (16 kHz, long schedules)")(fn)
    fn = click.option("--set", "sets", multiple=True, metavar="KEY=VALUE", help="Override a config key")(fn)
    fn = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
                      default=None, help="JSON or key=value config file")(fn)
    return fn


def _load(config_path, sets, paper_scale, extra=()):
    profile = Profile.paper if paper_scale else None
    return load_config(config_path, [*sets, *extra], profile=profile)


def _read_rows(path: Path):
    from .pipeline.report import read_csv, read_json
    from .types import ReportRow

    if path.suffix == ".csv":
        return read_csv(path)
    if path.suffix == ".json":
        return read_json(path)
    rows = []
    for n, line in enumerate(path.read_text().splitlines(), 1):
        if line.strip():
            try:
                rows.append(ReportRow.model_validate_json(line))
            except ValueError as e:
                raise FormatError(f"{path}:{n}: {e}") from e
    return rows


@click.group()
@click.version_option(package_name="vickd-lab")
def main():
    """Robust keyword-spotting distillation lab."""
    logging.basicConfig(
        level=get_log_level(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@main.command("synth-data")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True, help="Cache file to write")
@_config_options
@_domain_errors
def synth_data(out, config_path, sets, paper_scale):
    """Build the configured dataset and cache it to a file."""
    from .data import save_dataset
    from .pipeline import load_data

    cfg = _load(config_path, sets, paper_scale)
    ds = load_data(cfg)
    save_dataset(ds, out)
    click.echo(f"{len(ds)} items, {ds.num_classes} classes, {ds.sample_rate} Hz x {ds.length} -> {out}")
    for name, count in ds.histogram().items():
        click.echo(f"  {name:<10} {count}")


@main.command("train-baseline")
@click.option("--mode", type=click.Choice([m.value for m in TrainMode]), default="natural",
              help="natural (plain CE) or trades (robust training)")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None, help="Run directory")
@_config_options
@_domain_errors
def train_baseline_cmd(mode, out, config_path, sets, paper_scale):
    """Train the student preset on its own."""
    from .pipeline import train_baseline

    result = train_baseline(_load(config_path, sets, paper_scale), TrainMode(mode), out_dir=out)
    click.echo(str(result.checkpoint))


@main.command("finetune-teacher")
@click.option("--robust", is_flag=True, help="Train the teacher with TRADES")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None, help="Run directory")
@_config_options
@_domain_errors
def finetune_teacher_cmd(robust, out, config_path, sets, paper_scale):
    """Train the teacher with its classification head."""
    from .pipeline import finetune_teacher

    extra = ["teacher.robust=true"] if robust else []
    result = finetune_teacher(_load(config_path, sets, paper_scale, extra), out_dir=out)
    click.echo(str(result.checkpoint))


@main.command("distill")
@click.option("--teacher", "teacher_ckpt", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              required=True, help="Teacher checkpoint")
@click.option("--recipe", type=click.Choice([r.value for r in Recipe]), default=None,
              help="Distillation recipe (default from config)")
@click.option("--multi-view", is_flag=True, help="Feed differently augmented views to teacher and student")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None, help="Run directory")
@_config_options
@_domain_errors
def distill_cmd(teacher_ckpt, recipe, multi_view, out, config_path, sets, paper_scale):
    """Distill a student from a teacher checkpoint."""
    from .pipeline import distill

    extra = []
    if recipe:
        extra.append(f"recipe={recipe}")
    if multi_view:
        extra.append("multi_view=true")
    result = distill(_load(config_path, sets, paper_scale, extra), teacher_ckpt, out_dir=out)
    click.echo(str(result.checkpoint))


@main.command("evaluate")
@click.argument("ckpt", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--rows", "rows_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Append the result row to this JSONL file")
@_config_options
@_domain_errors
def evaluate_cmd(ckpt, rows_path, config_path, sets, paper_scale):
    """Clean and robust accuracy of a checkpoint."""
    from .pipeline import evaluate

    row = evaluate(_load(config_path, sets, paper_scale), ckpt)
    line = row.model_dump_json()
    if rows_path:
        rows_path.parent.mkdir(parents=True, exist_ok=True)
        with rows_path.open("a") as f:
            f.write(line + "\n")
    click.echo(line)


@main.command("report")
@click.argument("inputs", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--format", "fmt", type=click.Choice([f.value for f in ReportFormat]), default="all")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=Path("."), help="Output directory")
@_domain_errors
def report_cmd(inputs, fmt, out):
    """Merge result rows (JSONL, CSV or JSON) into report files."""
    from .pipeline import report

    rows = [row for path in inputs for row in _read_rows(path)]
    for path in report(rows, fmt, out):
        click.echo(str(path))


@main.command("run-suite")
@click.option("--jobs", type=int, default=None, help="Parallel worker processes")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None, help="Report directory")
@_config_options
@_domain_errors
def run_suite_cmd(jobs, out, config_path, sets, paper_scale):
    """Run the experiment grid and write the consolidated report."""
    from .pipeline import run_suite

    extra = [f"suite.jobs={jobs}"] if jobs else []
    suite = load_suite_config(config_path, [*sets, *extra], profile=Profile.paper if paper_scale else None)
    for path in run_suite(suite, out_dir=out):
        click.echo(str(path))


@main.command("info")
@click.argument("ckpt", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@_domain_errors
def info(ckpt):
    """Tensor names, shapes and parameter count of a checkpoint."""
    import numpy as np

    from .models import checkpoint_meta, read_tensors
    from .models.checkpoint import read_sidecar

    tensors = read_tensors(ckpt)
    for name, arr in tensors.items():
        click.echo(f"{name:<40} {'x'.join(map(str, arr.shape)) or 'scalar'}")
    click.echo(f"parameters: {sum(int(np.prod(a.shape)) for a in tensors.values())}")
    model = read_sidecar(ckpt).get("model", {})
    if model:
        click.echo(f"model: {model.get('role')} {model.get('preset')} ({model.get('classes')} classes)")
    for key, value in sorted(checkpoint_meta(ckpt).items()):
        click.echo(f"{key}: {value}")
