"""Run configuration: defaults, flat key-value config files, environment
overrides for paths, and the per-stage run manifest.

Precedence, lowest to highest: built-in defaults, config file, environment
variables (paths only), command-line flags.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .corpus import SCHEME_NAMES
from .errors import ValidationError

SCORER_KINDS = ("native", "uniform", "random", "external")

# Path settings that may come from the environment.
ENV_VARS = {
    "REGIOLEX_OUT_DIR": "out_dir",
    "REGIOLEX_INPUT": "input",
    "REGIOLEX_GAZETTEER": "gazetteer",
}


@dataclass
class RunConfig:
    scheme: str = "countries3"
    input: str | None = None  # raw corpus to ingest; None -> synthesize
    out_dir: str = "out"
    gazetteer: str | None = None
    seed: int = 7
    workers: int = 1
    # classifier hyperparameters
    epochs: int = 10
    batch_size: int = 64
    max_len: int = 256
    learning_rate: float = 0.1
    l2: float = 1e-6
    min_count: int = 2
    # explanation and aggregation
    top_words: int = 5
    lexicon_size: int = 100
    min_support: int = 2
    # split sizes
    train_per_class: int = 2000
    dev_per_class: int = 500
    test_per_class: int = 500
    # synthetic corpus
    synth_classes: int = 3
    synth_shared_vocab: int = 200
    synth_markers_per_class: int = 20
    synth_marker_prob: float = 0.3
    synth_place_names_per_class: int = 3
    synth_posts_per_class: int = 3000
    synth_mean_length: float = 12.0
    # scorer selection
    scorer: str = "native"
    scorer_cmd: str | None = None
    scorer_address: str | None = None

    def validate(self) -> None:
        if self.scheme not in SCHEME_NAMES:
            raise ValidationError(
                f"unknown scheme {self.scheme!r}; expected one of {sorted(SCHEME_NAMES)}"
            )
        if self.scorer not in SCORER_KINDS:
            raise ValidationError(
                f"unknown scorer {self.scorer!r}; expected one of {list(SCORER_KINDS)}"
            )
        if self.scorer == "external" and not (self.scorer_cmd or self.scorer_address):
            raise ValidationError("scorer 'external' requires scorer_cmd or scorer_address")
        if self.scorer_cmd and self.scorer_address:
            raise ValidationError("scorer_cmd and scorer_address are mutually exclusive")
        for name in (
            "workers", "epochs", "batch_size", "max_len", "min_count", "top_words",
            "lexicon_size", "min_support", "train_per_class", "dev_per_class",
            "test_per_class", "synth_classes", "synth_shared_vocab",
            "synth_markers_per_class", "synth_place_names_per_class",
            "synth_posts_per_class",
        ):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be > 0")
        if self.l2 < 0:
            raise ValidationError("l2 must be >= 0")
        if not 0 < self.synth_marker_prob <= 1:
            raise ValidationError("synth_marker_prob must be in (0, 1]")
        if self.synth_mean_length <= 0:
            raise ValidationError("synth_mean_length must be > 0")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}

_OPTIONAL_STR = {"input", "gazetteer", "scorer_cmd", "scorer_address"}


def _convert(key: str, raw: str):
    ftype = _FIELD_TYPES[key]
    if key in _OPTIONAL_STR:
        return raw or None
    if ftype == "int":
        try:
            return int(raw)
        except ValueError:
            raise ValidationError(f"config key {key!r} expects an integer, got {raw!r}") from None
    if ftype == "float":
        try:
            return float(raw)
        except ValueError:
            raise ValidationError(f"config key {key!r} expects a number, got {raw!r}") from None
    return raw


def parse_config_file(path: str | Path) -> dict:
    """Parse a flat `key = value` file. Blank lines and lines starting with `#`
    are ignored. Unknown keys are rejected."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValidationError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in _FIELD_TYPES:
                raise ValidationError(f"{path}:{lineno}: unknown config key {key!r}")
            if key in values:
                raise ValidationError(f"{path}:{lineno}: duplicate config key {key!r}")
            values[key] = _convert(key, raw)
    return values


def load_config(path: str | Path) -> RunConfig:
    cfg = RunConfig(**parse_config_file(path))
    cfg.validate()
    return cfg


def resolve_config(
    file_path: str | Path | None = None,
    overrides: dict | None = None,
    env: dict | None = None,
) -> RunConfig:
    """Merge defaults, config file, environment path overrides, and explicit
    flag overrides (in that order) into a validated RunConfig."""
    values: dict = {}
    if file_path is not None:
        values.update(parse_config_file(file_path))
    env_map = os.environ if env is None else env
    for var, key in sorted(ENV_VARS.items()):
        if var in env_map:
            values[key] = env_map[var] or None
    for key, value in (overrides or {}).items():
        if key not in _FIELD_TYPES:
            raise ValidationError(f"unknown config key {key!r}")
        if value is not None:
            values[key] = value
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def write_run_manifest(
    cfg: RunConfig,
    path: str | Path,
    command: str,
    files: list[str | Path],
) -> Path:
    """Record the resolved configuration and every file the stage emitted.
    Output is byte-stable for a given config. File paths are stored relative
    to the manifest's directory."""
    path = Path(path)
    base = path.parent
    rel = []
    for f in files:
        f = Path(f)
        try:
            rel.append(f.relative_to(base).as_posix())
        except ValueError:
            rel.append(f.as_posix())
    payload = {
        "command": command,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "files": sorted(rel),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
    return path
