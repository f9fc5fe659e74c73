import json
import logging
import os
from pathlib import Path
from typing import Any, Iterable

from dotenv import load_dotenv
from pydantic import ValidationError

from .errors import ConfigError
from .types import ExperimentConfig, Profile, SuiteConfig

load_dotenv()

log = logging.getLogger("vickd")

# Short keys accepted on the command line and in key=value files.
KEY_ALIASES = {
    "recipe": "recipe.recipe",
    "alpha": "recipe.alpha",
    "beta": "recipe.beta_trades",
    "multi_view": "recipe.multi_view",
    "kd.temperature": "recipe.kd_temperature",
    "kd.weight": "recipe.kd_weight",
    "vicreg.var": "recipe.vicreg.lambda_var",
    "vicreg.inv": "recipe.vicreg.lambda_inv",
    "vicreg.cov": "recipe.vicreg.lambda_cov",
    "attack.family": "recipe.attack.family",
    "attack.eps": "recipe.attack.epsilon",
    "attack.step": "recipe.attack.step_size",
    "attack.steps": "recipe.attack.steps",
    "attack.restarts": "recipe.attack.restarts",
    "classes": "dataset.classes",
    "per_class": "dataset.per_class",
}

PROFILES: dict[Profile, dict[str, Any]] = {
    Profile.desk: {
        "dataset": {"sample_rate": 4000, "length": 2000},
        "teacher": {"optim": {"epochs": 10, "batch_size": 32, "lr_start": 5e-4, "lr_end": 5e-5}},
        "baseline": {"epochs": 40, "batch_size": 32},
        "distill": {"epochs": 60, "batch_size": 32},
    },
    Profile.paper: {
        "dataset": {"sample_rate": 16000, "length": 16000},
        "teacher": {"optim": {"epochs": 10, "batch_size": 32, "lr_start": 5e-4, "lr_end": 5e-5}},
        "baseline": {"epochs": 100, "batch_size": 32},
        "distill": {"epochs": 250, "batch_size": 32},
    },
}


def get_seed_override() -> int | None:
    val = os.getenv("VICKD_SEED", "").strip()
    if not val:
        return None
    try:
        return int(val)
    except ValueError:
        raise ConfigError(f"VICKD_SEED must be an integer, got {val!r}") from None


def get_output_dir() -> Path:
    return Path(os.getenv("VICKD_OUTPUT_DIR", "runs"))


def get_log_level() -> str:
    return os.getenv("VICKD_LOG_LEVEL", "INFO").upper()


def get_profile() -> Profile:
    raw = os.getenv("VICKD_PROFILE", "desk").strip().lower()
    try:
        return Profile(raw)
    except ValueError:
        log.warning("unknown VICKD_PROFILE %r, using desk", raw)
        return Profile.desk


def _parse_value(raw: str) -> Any:
    raw = raw.strip()
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _set_dotted(target: dict, key: str, value: Any) -> None:
    key = KEY_ALIASES.get(key, key)
    parts = key.split(".")
    node = target
    for part in parts[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            child = node[part] = {}
        node = child
    node[parts[-1]] = value


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def parse_assignments(lines: Iterable[str], source: str = "--set") -> dict:
    """Turn ``key=value`` lines into a nested dict (``#`` starts a comment)."""
    data: dict = {}
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        _set_dotted(data, key.strip(), _parse_value(value))
    return data


def read_config_file(path: Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    if text.lstrip().startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}") from e
        data: dict = {}
        for key, value in raw.items():
            if key in KEY_ALIASES:
                _set_dotted(data, key, value)
            else:
                data = _merge(data, {key: value})
        return data
    return parse_assignments(text.splitlines(), source=str(path))


def _validation_message(err: ValidationError) -> str:
    first = err.errors()[0]
    where = ".".join(str(p) for p in first["loc"]) or "<root>"
    return f"invalid config value for {where}: {first['msg']}"


def _build(file_data: dict, overrides: Iterable[str], profile: Profile | None) -> ExperimentConfig:
    try:
        chosen = profile or Profile(file_data.get("profile", get_profile()))
    except ValueError:
        raise ConfigError(f"unknown profile {file_data.get('profile')!r}") from None
    data = _merge(PROFILES[chosen], file_data)
    data = _merge(data, parse_assignments(overrides))
    data["profile"] = chosen.value
    data.setdefault("output_dir", str(get_output_dir()))
    seed = get_seed_override()
    if seed is not None:
        log.info("seed overridden from VICKD_SEED: %d", seed)
        data["seed"] = seed
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_validation_message(e)) from e


def load_config(
    path: Path | None = None,
    overrides: Iterable[str] = (),
    profile: Profile | None = None,
) -> ExperimentConfig:
    """Build an ExperimentConfig from profile defaults, a file, overrides and env.

    Later layers win: profile < file < ``--set`` overrides < ``VICKD_SEED``.
    """
    return _build(read_config_file(path) if path else {}, overrides, profile)


def load_suite_config(
    path: Path | None = None,
    overrides: Iterable[str] = (),
    profile: Profile | None = None,
) -> SuiteConfig:
    """Suite files nest the experiment under ``base``; other keys are grid axes.

    Overrides prefixed with ``suite.`` set grid axes, the rest go to ``base``.
    """
    raw = read_config_file(path) if path else {}
    base_raw = raw.pop("base", {})
    overrides = list(overrides)
    base_over = [o for o in overrides if not o.strip().startswith("suite.")]
    suite_over = [o.strip().split(".", 1)[1] for o in overrides if o.strip().startswith("suite.")]
    base = _build(base_raw, base_over, profile)
    data = _merge(raw, parse_assignments(suite_over))
    data["base"] = base.model_dump(mode="json")
    try:
        return SuiteConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_validation_message(e)) from e
