from .common import derive_seed, load_data, prepare_data
from .evaluate import evaluate
from .report import attach_deltas, read_csv, read_json, report, to_markdown, write_csv, write_json
from .suite import plan_cells, run_suite
from .train import TrainResult, distill, finetune_teacher, train_baseline

__all__ = [
    "TrainResult",
    "attach_deltas",
    "derive_seed",
    "distill",
    "evaluate",
    "finetune_teacher",
    "load_data",
    "plan_cells",
    "prepare_data",
    "read_csv",
    "read_json",
    "report",
    "run_suite",
    "to_markdown",
    "train_baseline",
    "write_csv",
    "write_json",
]
