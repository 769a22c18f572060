"""Run configuration: one versioned declarative file plus CLI overrides.

Config file (JSON, version 1):

    {
      "version": 1,
      "mode": "full-analysis" | "design-review",
      "k": 3,
      "critic_threshold": 7.0,
      "time_budget_secs": null,
      "cache_dir": ".schemreview-cache",
      "backend": {"kind": "mock", "fixture_path": "fixtures", ...},
      "libraries": [{"kind": "csv-table", "priority": 1, "path": "parts.csv"}],
      "sink": {"kind": "file", "out_dir": "out"},
      "base_schematic": null,
      "pages_override": null,
      "trace_out": null,
      "page_parallelism": 1,
      "checklist_dir": null
    }
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .gateway import BackendConfig
from .libraries import LibrarySource, library_from_config
from .reporting import FileSink, HttpSink, sink_from_config


class Mode(enum.Enum):
    DESIGN_REVIEW = "design-review"
    FULL_ANALYSIS = "full-analysis"


@dataclass
class RunConfig:
    mode: Mode = Mode.FULL_ANALYSIS
    k: int = 3
    critic_threshold: float = 7.0
    time_budget_s: float | None = None
    backend: BackendConfig = field(default_factory=BackendConfig)
    libraries: list[LibrarySource] = field(default_factory=list)
    sink: object = field(default_factory=lambda: FileSink("out"))
    cache_dir: str = ".schemreview-cache"
    base_schematic: str | None = None
    pages_override: list[str] | None = None
    trace_out: str | None = None
    page_parallelism: int = 1
    checklist_dir: str | None = None
    max_attempts: int = 5

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigError("k (review run count) must be >= 1")
        if not 0 <= self.critic_threshold <= 10:
            raise ConfigError("critic_threshold must be within [0, 10]")
        if self.time_budget_s is not None and self.time_budget_s <= 0:
            raise ConfigError("time_budget_secs must be positive when set")
        if self.page_parallelism < 1:
            raise ConfigError("page_parallelism must be >= 1")
        if self.mode is Mode.DESIGN_REVIEW and not (
                self.base_schematic or self.pages_override):
            raise ConfigError(
                "design-review mode needs base_schematic or pages_override")
        if not isinstance(self.sink, (FileSink, HttpSink)):
            raise ConfigError(f"unknown sink {self.sink!r}")
        self.backend.validate()


def _backend_from_config(doc: dict) -> BackendConfig:
    known = {f for f in BackendConfig.__dataclass_fields__}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown backend fields: {sorted(unknown)}")
    return BackendConfig(**doc)


def load_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg}") from exc
    if doc.get("version") != 1:
        raise ConfigError(f"config {path}: unsupported version {doc.get('version')!r}")

    cfg = RunConfig()
    if "mode" in doc:
        try:
            cfg.mode = Mode(doc["mode"])
        except ValueError:
            raise ConfigError(f"unknown mode {doc['mode']!r}") from None
    for key in ("k", "page_parallelism", "max_attempts"):
        if key in doc:
            setattr(cfg, key, int(doc[key]))
    if "critic_threshold" in doc:
        cfg.critic_threshold = float(doc["critic_threshold"])
    if doc.get("time_budget_secs") is not None:
        cfg.time_budget_s = float(doc["time_budget_secs"])
    if "backend" in doc:
        cfg.backend = _backend_from_config(doc["backend"])
    if "libraries" in doc:
        cfg.libraries = [library_from_config(lib) for lib in doc["libraries"]]
    if "sink" in doc:
        cfg.sink = sink_from_config(doc["sink"])
    for key in ("cache_dir", "base_schematic", "trace_out", "checklist_dir"):
        if doc.get(key) is not None:
            setattr(cfg, key, doc[key])
    if doc.get("pages_override") is not None:
        cfg.pages_override = [str(p) for p in doc["pages_override"]]
    return cfg


def apply_cli_overrides(cfg: RunConfig, args) -> RunConfig:
    """argparse namespace wins over the config file, flag by flag."""
    if getattr(args, "mode", None):
        cfg.mode = Mode(args.mode)
    if getattr(args, "base", None):
        cfg.base_schematic = args.base
    if getattr(args, "time_limit_secs", None) is not None:
        cfg.time_budget_s = float(args.time_limit_secs)
    if getattr(args, "runs", None) is not None:
        cfg.k = int(args.runs)
    if getattr(args, "threshold", None) is not None:
        cfg.critic_threshold = float(args.threshold)
    if getattr(args, "out", None):
        cfg.sink = FileSink(args.out)
    if getattr(args, "cache_dir", None):
        cfg.cache_dir = args.cache_dir
    if getattr(args, "trace_out", None):
        cfg.trace_out = args.trace_out
    return cfg
