"""Report emission: CSV, schema-versioned JSON, markdown tables and SVG figures."""

from __future__ import annotations

import csv
import json
import logging
from collections import defaultdict
from pathlib import Path
from typing import Iterable

import numpy as np

from ..errors import FormatError
from ..types import ReportFormat, ReportRow

log = logging.getLogger("vickd.pipeline")

SCHEMA_VERSION = 1
RECIPE_ORDER = ("natural", "trades-baseline", "kd", "ard", "rslad", "trades", "vic_kd")
BASELINE_RECIPE = "trades-baseline"
# Recipes whose robustness is compared against the TRADES baseline.
ROBUST_RECIPES = ("ard", "rslad", "trades", "vic_kd")
BASE_COLUMNS = (
    "recipe", "teacher", "student", "multi_view", "classes", "clean_acc", "ensemble_acc",
    "params", "epochs", "seed", "train_seconds", "robust_delta_pct",
)
_FLOATS = {"clean_acc", "ensemble_acc", "train_seconds", "robust_delta_pct"}
_INTS = {"classes", "params", "epochs", "seed"}
ROBUST_PREFIX = "robust_"


def _recipe_rank(recipe: str) -> int:
    return RECIPE_ORDER.index(recipe) if recipe in RECIPE_ORDER else len(RECIPE_ORDER)


def sort_rows(rows: Iterable[ReportRow]) -> list[ReportRow]:
    return sorted(
        rows,
        key=lambda r: (_recipe_rank(r.recipe), r.recipe, r.teacher, r.student, r.multi_view, r.classes, r.seed),
    )


def attack_columns(rows: Iterable[ReportRow]) -> list[str]:
    return sorted({f"{ROBUST_PREFIX}{name}" for r in rows for name in r.robust_acc})


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _record(row: ReportRow, attacks: list[str]) -> dict[str, str]:
    data = row.model_dump()
    out = {col: _fmt(data[col]) for col in BASE_COLUMNS}
    for col in attacks:
        out[col] = _fmt(row.robust_acc.get(col[len(ROBUST_PREFIX):]))
    return out


def write_csv(rows: list[ReportRow], path: Path) -> Path:
    """One line per row; fixed base columns, then ``robust_<attack>`` sorted by name."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    attacks = attack_columns(rows)
    with path.open("w", encoding="utf-8", newline="") as f:
        w = csv.DictWriter(f, fieldnames=[*BASE_COLUMNS, *attacks], lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(_record(row, attacks))
    return path


def _parse(col: str, raw: str):
    if raw == "":
        return None
    if col in _FLOATS:
        return float(raw)
    if col in _INTS:
        return int(raw)
    if col == "multi_view":
        if raw not in ("true", "false"):
            raise FormatError(f"multi_view must be true or false, got {raw!r}")
        return raw == "true"
    return raw


def read_csv(path: Path) -> list[ReportRow]:
    rows = []
    with Path(path).open(encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        missing = set(BASE_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise FormatError(f"{path}: missing columns {sorted(missing)}")
        for n, rec in enumerate(reader, 2):
            try:
                data = {col: _parse(col, rec[col]) for col in BASE_COLUMNS}
                data["robust_acc"] = {
                    col[len(ROBUST_PREFIX):]: float(v)
                    for col, v in rec.items()
                    if col.startswith(ROBUST_PREFIX) and v != ""
                }
                rows.append(ReportRow.model_validate(data))
            except ValueError as e:
                raise FormatError(f"{path}:{n}: {e}") from e
    return rows


def write_json(rows: list[ReportRow], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"schema_version": SCHEMA_VERSION, "rows": [r.model_dump(mode="json") for r in rows]}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def read_json(path: Path) -> list[ReportRow]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON: {e}") from e
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise FormatError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    try:
        return [ReportRow.model_validate(r) for r in doc.get("rows", [])]
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from e


def to_markdown(rows: list[ReportRow]) -> str:
    """A single table, rows grouped by recipe in the canonical order."""
    rows = sort_rows(rows)
    attacks = [c[len(ROBUST_PREFIX):] for c in attack_columns(rows)]
    header = ["Recipe", "Teacher", "Student", "MV", "Classes", "Seed", "Clean",
              *attacks, "Ensemble", "Delta %", "Params"]
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join("---" for _ in header) + "|",
    ]
    for r in rows:
        cells = [
            r.recipe, r.teacher, r.student, "yes" if r.multi_view else "no", str(r.classes), str(r.seed),
            f"{r.clean_acc:.2f}",
            *(f"{r.robust_acc[a]:.2f}" if a in r.robust_acc else "" for a in attacks),
            f"{r.ensemble_acc:.2f}",
            "" if r.robust_delta_pct is None else f"{r.robust_delta_pct:+.2f}",
            str(r.params),
        ]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def write_markdown(rows: list[ReportRow], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_markdown(rows))
    return path


def attach_deltas(rows: list[ReportRow]) -> list[ReportRow]:
    """Relative ensemble-robust change vs the TRADES baseline of the same student, classes and seed."""
    baselines = {
        (r.student, r.classes, r.seed): r.ensemble_acc for r in rows if r.recipe == BASELINE_RECIPE
    }
    out = []
    for r in rows:
        base = baselines.get((r.student, r.classes, r.seed))
        delta = None
        if r.recipe in ROBUST_RECIPES and base:
            delta = 100.0 * (r.ensemble_acc - base) / base
        out.append(r.model_copy(update={"robust_delta_pct": delta}))
    return out


def _medians(rows: list[ReportRow], key) -> dict:
    groups: dict = defaultdict(list)
    for r in rows:
        groups[key(r)].append(r)
    return {
        k: (float(np.median([r.clean_acc for r in g])), float(np.median([r.ensemble_acc for r in g])))
        for k, g in groups.items()
    }


def _bar_panel(ax, labels: list[str], series: dict[str, list[float]], baseline: float | None, title: str) -> None:
    width = 0.8 / max(len(series), 1)
    xs = np.arange(len(labels))
    for i, (name, values) in enumerate(series.items()):
        ax.bar(xs + (i - (len(series) - 1) / 2) * width, values, width, label=name)
    if baseline is not None:
        ax.axhline(baseline, linestyle="--", color="black", linewidth=1, label="TRADES baseline")
    ax.set_xticks(xs)
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylim(0.0, 100.0)
    ax.set_ylabel("Accuracy (%)")
    ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend(loc="best", fontsize=8)


def _baseline_level(rows: list[ReportRow]) -> float | None:
    accs = [r.ensemble_acc for r in rows if r.recipe == BASELINE_RECIPE]
    return float(np.median(accs)) if accs else None


def write_figures(rows: list[ReportRow], out_dir: Path) -> list[Path]:
    """Grouped clean/robust bars per recipe, the multi-view ablation and class scaling.

    Skipped with a warning when matplotlib is missing or plotting fails.
    """
    if not rows:
        return []
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib not installed; skipping figures (install the 'figures' extra)")
        return []

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    rows = sort_rows(rows)

    def save(fig, name: str) -> None:
        path = out_dir / name
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)

    try:
        single = [r for r in rows if not r.multi_view]
        stats = _medians(single, lambda r: r.recipe)
        labels = list(stats)
        fig, ax = plt.subplots(figsize=(8, 4), constrained_layout=True)
        _bar_panel(ax, labels, {"clean": [stats[k][0] for k in labels], "robust": [stats[k][1] for k in labels]},
                   _baseline_level(rows), "Clean vs robust accuracy by recipe")
        save(fig, "main.svg")

        if any(r.multi_view for r in rows):
            distilled = [r for r in rows if r.recipe not in ("natural", BASELINE_RECIPE)]
            mv = _medians(distilled, lambda r: (r.recipe, r.multi_view))
            labels = list(dict.fromkeys(k[0] for k in mv))
            fig, ax = plt.subplots(figsize=(8, 4), constrained_layout=True)
            _bar_panel(ax, labels, {
                "single view": [mv.get((k, False), (0.0, 0.0))[1] for k in labels],
                "multi view": [mv.get((k, True), (0.0, 0.0))[1] for k in labels],
            }, _baseline_level(rows), "Robust accuracy with and without multi-view")
            save(fig, "multiview.svg")

        counts = sorted({r.classes for r in rows})
        if len(counts) > 1:
            fig, axes = plt.subplots(1, len(counts), figsize=(6 * len(counts), 4), constrained_layout=True)
            for ax, c in zip(np.atleast_1d(axes), counts):
                subset = [r for r in single if r.classes == c]
                stats = _medians(subset, lambda r: r.recipe)
                labels = list(stats)
                _bar_panel(ax, labels,
                           {"clean": [stats[k][0] for k in labels], "robust": [stats[k][1] for k in labels]},
                           _baseline_level([r for r in rows if r.classes == c]), f"{c} classes")
            save(fig, "classes.svg")
    except Exception as e:
        log.warning("figure generation failed: %s", e)
    return written


def report(rows: list[ReportRow], fmt: ReportFormat | str, out_dir: Path) -> list[Path]:
    """Write ``rows`` as ``report.<ext>`` under ``out_dir``; ``all`` writes every format."""
    fmt = ReportFormat(fmt)
    out_dir = Path(out_dir)
    rows = attach_deltas(sort_rows(rows))
    written: list[Path] = []
    if fmt in (ReportFormat.csv, ReportFormat.all):
        written.append(write_csv(rows, out_dir / "report.csv"))
    if fmt in (ReportFormat.json, ReportFormat.all):
        written.append(write_json(rows, out_dir / "report.json"))
    if fmt in (ReportFormat.md, ReportFormat.all):
        written.append(write_markdown(rows, out_dir / "report.md"))
    if fmt in (ReportFormat.svg, ReportFormat.all):
        written.extend(write_figures(rows, out_dir / "figures"))
    log.info("wrote %d report files for %d rows to %s", len(written), len(rows), out_dir)
    return written
