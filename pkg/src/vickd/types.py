from __future__ import annotations

from enum import Enum
from pathlib import Path

from pydantic import BaseModel, Field, field_validator, model_validator


class TransformKind(str, Enum):
    clean = "clean"
    noise = "noise"
    reverb = "reverb"
    noise_reverb = "noise_reverb"
    chunk_drop = "chunk_drop"
    speed_perturb = "speed_perturb"

    @classmethod
    def from_str(cls, s: str) -> "TransformKind | None":
        try:
            return cls(s.lower().replace("-", "_"))
        except ValueError:
            return None


class AttackFamily(str, Enum):
    fgsm = "fgsm"
    pgd = "pgd"
    apgd_ce = "apgd_ce"
    apgd_t = "apgd_t"

    @classmethod
    def from_str(cls, s: str) -> "AttackFamily | None":
        try:
            return cls(s.lower().replace("-", "_"))
        except ValueError:
            return None


class Recipe(str, Enum):
    kd = "kd"
    ard = "ard"
    rslad = "rslad"
    trades = "trades"
    vic_kd = "vic_kd"

    @classmethod
    def from_str(cls, s: str) -> "Recipe | None":
        try:
            return cls(s.lower().replace("-", "_"))
        except ValueError:
            return None


class TrainMode(str, Enum):
    natural = "natural"    # plain CE
    trades = "trades"      # robust training


class LabelScheme(str, Enum):
    v12 = "v12"
    v35 = "v35"


class Profile(str, Enum):
    desk = "desk"
    paper = "paper"


class ModelRole(str, Enum):
    teacher = "teacher"
    student = "student"


class ReportFormat(str, Enum):
    csv = "csv"
    json = "json"
    md = "md"
    svg = "svg"
    all = "all"


# ---- attacks ----


class AttackSpec(BaseModel):
    family: AttackFamily = AttackFamily.pgd
    epsilon: float = Field(default=1.5e-3, ge=0.0)
    step_size: float = Field(default=3e-4, gt=0.0)
    steps: int = Field(default=10, ge=0)
    restarts: int = Field(default=0, ge=0)
    random_init: bool = True
    targeted_classes: int = Field(default=3, ge=1)

    @property
    def label(self) -> str:
        return self.family.value

    @classmethod
    def training_default(cls) -> "AttackSpec":
        """10-step PGD used as the inner maximization during training."""
        return cls(family=AttackFamily.pgd, epsilon=1.5e-3, step_size=3e-4, steps=10)

    @classmethod
    def evaluation_defaults(cls, epsilon: float = 1.5e-3) -> list["AttackSpec"]:
        """The autoattack-lite ensemble: APGD-CE, APGD-T, PGD-CE."""
        return [
            cls(family=AttackFamily.apgd_ce, epsilon=epsilon, step_size=2 * epsilon,
                steps=100, restarts=1),
            cls(family=AttackFamily.apgd_t, epsilon=epsilon, step_size=2 * epsilon,
                steps=100, restarts=1, targeted_classes=3),
            cls(family=AttackFamily.pgd, epsilon=epsilon, step_size=epsilon / 4,
                steps=40, restarts=2),
        ]


class EnsembleResult(BaseModel):
    """Per-sample robustness flags under each attack and under all of them."""

    clean: list[bool]
    per_attack: dict[str, list[bool]]
    overall: list[bool]

    @model_validator(mode="after")
    def _overall_is_and(self) -> "EnsembleResult":
        for i, flag in enumerate(self.overall):
            if flag and not (self.clean[i] and all(v[i] for v in self.per_attack.values())):
                raise ValueError(f"sample {i} marked robust without surviving every attack")
        return self

    @staticmethod
    def _pct(flags: list[bool]) -> float:
        return 100.0 * sum(flags) / len(flags) if flags else 0.0

    @property
    def clean_accuracy(self) -> float:
        return self._pct(self.clean)

    @property
    def robust_accuracy(self) -> float:
        return self._pct(self.overall)

    def attack_accuracy(self) -> dict[str, float]:
        return {name: self._pct(flags) for name, flags in self.per_attack.items()}


# ---- losses ----


class VicregWeights(BaseModel):
    lambda_var: float = Field(default=1.0, ge=0.0)
    lambda_inv: float = Field(default=1.0, ge=0.0)
    lambda_cov: float = Field(default=1.0, ge=0.0)
    gamma: float = Field(default=1.0, ge=0.0)
    eps: float = Field(default=1e-4, ge=0.0)


class RecipeConfig(BaseModel):
    recipe: Recipe = Recipe.vic_kd
    alpha: float = Field(default=0.5, ge=0.0, le=1.0)
    beta_trades: float = Field(default=6.0, ge=0.0)
    kd_temperature: float = Field(default=4.0, gt=0.0)
    kd_weight: float = Field(default=0.5, ge=0.0, le=1.0)
    ard_temperature: float = Field(default=1.0, gt=0.0)
    rslad_weight: float = Field(default=5.0 / 6.0, ge=0.0, le=1.0)
    vicreg: VicregWeights = Field(default_factory=VicregWeights)
    multi_view: bool = False
    views: list[TransformKind] = Field(default_factory=lambda: list(TransformKind))
    attack: AttackSpec = Field(default_factory=AttackSpec.training_default)

    @field_validator("views")
    @classmethod
    def _distinct_views(cls, v: list[TransformKind]) -> list[TransformKind]:
        if len(set(v)) != len(v):
            raise ValueError("views must not repeat a transform kind")
        return v


# ---- data ----


class SplitSpec(BaseModel):
    train: float = Field(default=0.8, ge=0.0, le=1.0)
    valid: float = Field(default=0.1, ge=0.0, le=1.0)
    test: float = Field(default=0.1, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _sums_to_one(self) -> "SplitSpec":
        if abs(self.train + self.valid + self.test - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        return self


class DataSource(str, Enum):
    synth = "synth"
    wav = "wav"
    cache = "cache"


class DatasetSpec(BaseModel):
    source: DataSource = DataSource.synth
    path: Path | None = None
    classes: int = Field(default=12, ge=2)
    per_class: int = Field(default=100, ge=1)
    scheme: LabelScheme | None = None
    sample_rate: int = Field(default=4000, gt=0)
    length: int = Field(default=2000, gt=0)
    seed: int | None = None    # defaults to the experiment seed


# ---- models / training ----


class ModelSpec(BaseModel):
    """Architecture record stored next to every checkpoint."""

    role: ModelRole
    preset: str
    classes: int = Field(ge=2)
    length: int = Field(gt=0)
    d_t: int = Field(default=64, gt=0)
    seed: int = 0


class OptimConfig(BaseModel):
    epochs: int = Field(ge=1)
    batch_size: int = Field(default=32, ge=1)
    lr_start: float = Field(default=1e-3, ge=0.0)
    lr_end: float = Field(default=1e-4, ge=0.0)


class TeacherConfig(BaseModel):
    preset: str = "resconv"
    robust: bool = False
    optim: OptimConfig = Field(
        default_factory=lambda: OptimConfig(epochs=10, lr_start=5e-4, lr_end=5e-5)
    )


class ExperimentConfig(BaseModel):
    name: str = "default"
    profile: Profile = Profile.desk
    dataset: DatasetSpec = Field(default_factory=DatasetSpec)
    split: SplitSpec = Field(default_factory=SplitSpec)
    teacher: TeacherConfig = Field(default_factory=TeacherConfig)
    student: str = "tcresnet-mini"
    baseline: OptimConfig = Field(default_factory=lambda: OptimConfig(epochs=40))
    distill: OptimConfig = Field(default_factory=lambda: OptimConfig(epochs=60))
    recipe: RecipeConfig = Field(default_factory=RecipeConfig)
    eval_attacks: list[AttackSpec] = Field(default_factory=AttackSpec.evaluation_defaults)
    eval_samples: int | None = Field(default=500, ge=1)
    eval_batch_size: int = Field(default=64, ge=1)
    seed: int = 0
    output_dir: Path = Path("runs")

    @field_validator("eval_attacks")
    @classmethod
    def _shared_eps(cls, v: list[AttackSpec]) -> list[AttackSpec]:
        if len({a.epsilon for a in v}) > 1:
            raise ValueError("all evaluation attacks must share epsilon")
        return v


class EpochRecord(BaseModel):
    epoch: int
    loss: float
    train_acc: float
    lr: float
    terms: dict[str, float] = Field(default_factory=dict)


class ReportRow(BaseModel):
    recipe: str
    teacher: str
    student: str
    multi_view: bool = False
    classes: int
    clean_acc: float = Field(ge=0.0, le=100.0)
    robust_acc: dict[str, float] = Field(default_factory=dict)
    ensemble_acc: float = Field(ge=0.0, le=100.0)
    params: int = Field(ge=0)
    epochs: int = Field(ge=0)
    seed: int
    train_seconds: float = Field(default=0.0, ge=0.0)
    robust_delta_pct: float | None = None

    @field_validator("robust_acc")
    @classmethod
    def _pct_range(cls, v: dict[str, float]) -> dict[str, float]:
        for name, acc in v.items():
            if not 0.0 <= acc <= 100.0:
                raise ValueError(f"robust_acc[{name}]={acc} outside [0, 100]")
        return v

    @model_validator(mode="after")
    def _ensemble_bound(self) -> "ReportRow":
        bound = min([self.clean_acc, *self.robust_acc.values()])
        if self.ensemble_acc > bound + 1e-9:
            raise ValueError(
                f"ensemble robust acc {self.ensemble_acc} exceeds per-attack bound {bound}"
            )
        return self


class SuiteConfig(BaseModel):
    base: ExperimentConfig = Field(default_factory=ExperimentConfig)
    recipes: list[Recipe] = Field(default_factory=lambda: list(Recipe))
    students: list[str] = Field(default_factory=lambda: ["tcresnet-mini", "xvector-mini"])
    teacher_robust: list[bool] = Field(default_factory=lambda: [False, True])
    multi_view: list[bool] = Field(default_factory=lambda: [False, True])
    class_counts: list[int] = Field(default_factory=lambda: [12])
    seeds: list[int] = Field(default_factory=lambda: [0, 1, 2])
    baselines: bool = True
    jobs: int = Field(default=1, ge=1)
    figures: bool = True
