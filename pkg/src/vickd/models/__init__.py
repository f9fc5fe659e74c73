from .checkpoint import (
    checkpoint_meta,
    load_checkpoint,
    read_tensors,
    save_checkpoint,
    write_tensors,
)
from .layers import Module
from .student import PARAM_BUDGET, STUDENT_PRESETS, Student, build_model
from .teacher import TEACHER_PRESETS, Teacher

__all__ = [
    "PARAM_BUDGET",
    "STUDENT_PRESETS",
    "TEACHER_PRESETS",
    "Module",
    "Student",
    "Teacher",
    "build_model",
    "checkpoint_meta",
    "load_checkpoint",
    "read_tensors",
    "save_checkpoint",
    "write_tensors",
]
