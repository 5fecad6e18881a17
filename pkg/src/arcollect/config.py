"""Run configuration: a JSON document with strict keys, overridable from the command line."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Any, Optional

from arcollect.domain import ConfigError, GracePolicy
from arcollect.models import KINDS, resolve_hyperparameters
from arcollect.rank import GREEDY_BASES
from arcollect.split import DEFAULT_SPLIT, SplitError, SplitSpec
from arcollect.synth import GeneratorConfig

TOP_LEVEL_KEYS = {
    "seed",
    "out",
    "input",
    "model_path",
    "window_months",
    "grace_days",
    "include_ratios",
    "strict",
    "threshold",
    "model",
    "split",
    "snapshots",
    "generator",
    "sweep",
    "rank",
    "plotdata",
}
SNAPSHOT_KEYS = {"data_start", "data_end", "train_months", "val_months", "step_months", "count", "kind"}


def _only(section: str, data: Any, allowed: set[str]) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{section} must be a JSON object")
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {', '.join(sorted(unknown))}")
    return data


@dataclass
class SnapshotConfig:
    data_start: Optional[str] = None
    data_end: Optional[str] = None
    train_months: int = 6
    val_months: int = 4
    step_months: int = 3
    count: int = 5
    kind: Optional[str] = None


@dataclass
class RunConfig:
    seed: int = 20190630
    out: str = "out"
    input: Optional[str] = None
    model_path: Optional[str] = None
    window_months: int = 3
    grace_days: int = 5
    include_ratios: bool = False
    strict: bool = False
    threshold: float = 0.5
    kind: str = "ensemble"
    hyperparameters: dict[str, Any] = field(default_factory=dict)
    split: SplitSpec = DEFAULT_SPLIT
    snapshots: SnapshotConfig = field(default_factory=SnapshotConfig)
    generator: dict[str, Any] = field(default_factory=dict)
    sweep_windows: list[int] = field(default_factory=lambda: list(range(2, 13)))
    sweep_kinds: list[str] = field(default_factory=lambda: list(KINDS))
    as_of: Optional[date] = None
    greedy_basis: str = "mean"
    plot_month: Optional[str] = None

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    @property
    def input_path(self) -> Path:
        return Path(self.input) if self.input else self.out_dir / "invoices.csv"

    @property
    def model_file(self) -> Path:
        return Path(self.model_path) if self.model_path else self.out_dir / "model.json"

    @property
    def policy(self) -> GracePolicy:
        return GracePolicy(self.grace_days)

    def generator_config(self, seed_from_flag: bool = False) -> GeneratorConfig:
        data = dict(self.generator)
        if seed_from_flag or "seed" not in data:
            data["seed"] = self.seed
        data.setdefault("grace_days", self.grace_days)
        return GeneratorConfig.from_dict(data)

    def validate(self) -> None:
        if not isinstance(self.window_months, int) or self.window_months < 1:
            raise ConfigError("window_months must be an integer >= 1")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        GracePolicy(self.grace_days)
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        try:
            resolve_hyperparameters(self.kind, self.hyperparameters)
        except Exception as exc:
            raise ConfigError(str(exc)) from None
        for k in self.sweep_kinds:
            if k not in KINDS:
                raise ConfigError(f"unknown model kind {k!r} in sweep")
        if not self.sweep_windows or any(not isinstance(w, int) or w < 1 for w in self.sweep_windows):
            raise ConfigError("sweep windows must be a non-empty list of integers >= 1")
        if self.snapshots.kind is not None and self.snapshots.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.snapshots.kind!r} in snapshots")
        if self.greedy_basis not in GREEDY_BASES:
            raise ConfigError(f"greedy_basis must be one of {', '.join(GREEDY_BASES)}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError("threshold must be within [0, 1]")


def from_dict(data: dict[str, Any]) -> RunConfig:
    data = _only("config", data, TOP_LEVEL_KEYS)
    cfg = RunConfig()
    for key in ("seed", "out", "input", "model_path", "window_months", "grace_days", "include_ratios", "strict", "threshold"):
        if key in data:
            setattr(cfg, key, data[key])
    if "model" in data:
        model = _only("model", data["model"], {"kind", "hyperparameters"})
        cfg.kind = model.get("kind", cfg.kind)
        cfg.hyperparameters = dict(model.get("hyperparameters") or {})
    if "split" in data:
        try:
            cfg.split = SplitSpec.from_dict(data["split"])
        except (SplitError, ValueError) as exc:
            raise ConfigError(f"invalid split: {exc}") from None
    if "snapshots" in data:
        cfg.snapshots = SnapshotConfig(**_only("snapshots", data["snapshots"], SNAPSHOT_KEYS))
    if "generator" in data:
        cfg.generator = dict(_only("generator", data["generator"], set(GeneratorConfig.__dataclass_fields__)))
    if "sweep" in data:
        sweep = _only("sweep", data["sweep"], {"windows", "kinds"})
        cfg.sweep_windows = list(sweep.get("windows", cfg.sweep_windows))
        cfg.sweep_kinds = list(sweep.get("kinds", cfg.sweep_kinds))
    if "rank" in data:
        rank = _only("rank", data["rank"], {"as_of", "greedy_basis"})
        if rank.get("as_of"):
            cfg.as_of = _parse_date(rank["as_of"])
        cfg.greedy_basis = rank.get("greedy_basis", cfg.greedy_basis)
    if "plotdata" in data:
        cfg.plot_month = _only("plotdata", data["plotdata"], {"month"}).get("month")
    cfg.validate()
    return cfg


def _parse_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid date {text!r}, expected YYYY-MM-DD") from None


def load(path: Optional[str | Path]) -> RunConfig:
    if path is None:
        return from_dict({})
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return from_dict(data)
