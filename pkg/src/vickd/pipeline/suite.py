"""Experiment grid: teachers, baselines and every distillation cell, then one report."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from multiprocessing import Pool
from pathlib import Path

from ..types import DataSource, ExperimentConfig, ReportFormat, ReportRow, SuiteConfig, TrainMode
from .common import derive_seed
from .evaluate import evaluate
from .report import report, write_figures
from .train import CHECKPOINT_NAME, distill, finetune_teacher, train_baseline

log = logging.getLogger("vickd.pipeline")


@dataclass(frozen=True)
class Cell:
    kind: str                      # teacher | baseline | distill
    name: str                      # relative run directory, unique in the grid
    config: ExperimentConfig
    replicate: int                 # the suite seed this cell belongs to
    mode: TrainMode | None = None
    teacher: str | None = None     # name of the teacher cell a distill cell reads


def _cell_config(base: ExperimentConfig, name: str, replicate: int, update: dict) -> ExperimentConfig:
    data = base.model_dump()
    for dotted, value in update.items():
        node = data
        *parents, leaf = dotted.split(".")
        for p in parents:
            node = node[p]
        node[leaf] = value
    data["seed"] = derive_seed(replicate, name)
    return ExperimentConfig.model_validate(data)


def plan_cells(suite: SuiteConfig) -> list[Cell]:
    """Every cell of the grid; teacher cells come first."""
    base = suite.base
    teachers: list[Cell] = []
    others: list[Cell] = []
    for classes in suite.class_counts:
        for rep in suite.seeds:
            prefix = f"c{classes}/seed{rep}"
            data = {"dataset.classes": classes, "dataset.seed": rep}
            if base.dataset.source == DataSource.synth:
                data["dataset.scheme"] = base.dataset.scheme if classes == base.dataset.classes else None

            for robust in suite.teacher_robust:
                name = f"{prefix}/teacher-{'robust' if robust else 'standard'}"
                cfg = _cell_config(base, name, rep, {**data, "teacher.robust": robust})
                teachers.append(Cell("teacher", name, cfg, rep))

            for student in suite.students:
                if suite.baselines:
                    for mode in TrainMode:
                        name = f"{prefix}/baseline-{mode.value}-{student}"
                        cfg = _cell_config(base, name, rep, {**data, "student": student})
                        others.append(Cell("baseline", name, cfg, rep, mode=mode))
                for robust in suite.teacher_robust:
                    teacher = f"{prefix}/teacher-{'robust' if robust else 'standard'}"
                    for recipe in suite.recipes:
                        for mv in suite.multi_view:
                            name = (f"{prefix}/{recipe.value}{'-mv' if mv else ''}-{student}"
                                    f"-t{'robust' if robust else 'standard'}")
                            cfg = _cell_config(base, name, rep, {
                                **data, "student": student, "recipe.recipe": recipe, "recipe.multi_view": mv,
                            })
                            others.append(Cell("distill", name, cfg, rep, teacher=teacher))
    return teachers + others


def _cell_dir(cell: Cell) -> Path:
    return Path(cell.config.output_dir) / cell.config.name / cell.name


def _run_cell(cell: Cell) -> tuple[str, Path, ReportRow | None]:
    out = _cell_dir(cell)
    if cell.kind == "teacher":
        result = finetune_teacher(cell.config, out_dir=out)
        return cell.name, result.checkpoint, None
    if cell.kind == "baseline":
        result = train_baseline(cell.config, cell.mode, out_dir=out)
    else:
        teacher_dir = Path(cell.config.output_dir) / cell.config.name / cell.teacher
        result = distill(cell.config, teacher_dir / CHECKPOINT_NAME, out_dir=out)
    row = evaluate(cell.config, result.checkpoint)
    return cell.name, result.checkpoint, row.model_copy(update={"seed": cell.replicate})


def _run_all(cells: list[Cell], jobs: int) -> list[tuple[str, Path, ReportRow | None]]:
    if jobs <= 1 or len(cells) <= 1:
        return [_run_cell(c) for c in cells]
    with Pool(min(jobs, len(cells))) as pool:
        return pool.map(_run_cell, cells)


def run_suite(suite: SuiteConfig, out_dir: Path | None = None) -> list[Path]:
    """Run every cell (teachers first), evaluate the students and write the reports."""
    cells = plan_cells(suite)
    teachers = [c for c in cells if c.kind == "teacher"]
    students = [c for c in cells if c.kind != "teacher"]
    log.info("suite %s: %d teacher cells, %d student cells, %d jobs",
             suite.base.name, len(teachers), len(students), suite.jobs)
    _run_all(teachers, suite.jobs)
    rows = [row for _, _, row in _run_all(students, suite.jobs) if row is not None]

    out = Path(out_dir) if out_dir else Path(suite.base.output_dir) / suite.base.name
    written = [p for fmt in (ReportFormat.csv, ReportFormat.json, ReportFormat.md) for p in report(rows, fmt, out)]
    if suite.figures:
        written.extend(write_figures(rows, out / "figures"))
    return written
