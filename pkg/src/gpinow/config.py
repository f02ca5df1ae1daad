"""Run configuration loaded from a JSON file.

Example::

    {
      "seed": 7,
      "events": ["data/20180201.export.CSV"],
      "layout": "58",
      "gpi": "data/gpi.csv",
      "output_dir": "out",
      "countries": ["US"],
      "learners": ["gbt", "elastic-net"],
      "grids": {"gbt": {"n_estimators": [100], "max_depth": [2, 4]}},
      "window": 72,
      "horizons": 6
    }

Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from .errors import ConfigError
from .ingest import LAYOUTS, ColumnMap
from .models.registry import LEARNERS
from .months import Month
from .rolling import RollingConfig
from .tuning import DEFAULT_GRIDS, Grid

_KNOWN = {
    "seed", "events", "layout", "column_map", "gpi", "panel", "output_dir", "countries",
    "learners", "grids", "window", "horizons", "folds", "tune_once", "start_month",
    "end_month", "explain",
}


@dataclass(frozen=True)
class RunConfig:
    seed: int
    output_dir: Path
    events: tuple[Path, ...] = ()
    gpi: Optional[Path] = None
    panel: Optional[Path] = None
    column_map: ColumnMap = field(default_factory=ColumnMap)
    countries: Optional[tuple[str, ...]] = None
    learners: tuple[str, ...] = ("gbt",)
    grids: dict[str, Grid] = field(default_factory=dict)
    window: int = 72
    horizons: int = 6
    folds: int = 10
    tune_once: bool = False
    start_month: Optional[Month] = None
    end_month: Optional[Month] = None
    explain: bool = True

    @property
    def panel_path(self) -> Path:
        return self.panel if self.panel is not None else self.output_dir / "panel.csv"

    def grid(self, learner: str) -> Grid:
        return self.grids.get(learner) or Grid.default(learner)

    def rolling(self, learner: str) -> RollingConfig:
        return RollingConfig(learner=learner, grid=self.grid(learner), window=self.window,
                             horizons=self.horizons, folds=self.folds, seed=self.seed,
                             tune_once=self.tune_once)

    def with_overrides(self, seed=None, countries=None, learners=None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if countries is not None:
            cfg = replace(cfg, countries=tuple(countries))
        if learners is not None:
            cfg = replace(cfg, learners=tuple(learners))
        return cfg


def _int(doc, key, default=None, minimum=None):
    value = doc.get(key, default)
    if value is None:
        return None
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"{key} must be an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{key} must be >= {minimum}")
    return value


def parse_config(doc: dict[str, Any], base_dir: Path) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _KNOWN
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if "seed" not in doc:
        raise ConfigError("config must set a seed")
    seed = _int(doc, "seed", minimum=0)
    if seed >= 2 ** 64:
        raise ConfigError("seed must fit in 64 bits")

    def path(value):
        if not isinstance(value, str):
            raise ConfigError(f"expected a path string, got {value!r}")
        p = Path(value)
        return p if p.is_absolute() else base_dir / p

    events = doc.get("events", [])
    if isinstance(events, str):
        events = [events]
    layout = str(doc.get("layout", "58"))
    if layout not in LAYOUTS:
        raise ConfigError(f"layout must be one of {sorted(LAYOUTS)}")
    column_map = ColumnMap.from_mapping(doc.get("column_map", {}), LAYOUTS[layout])

    learners = doc.get("learners", ["gbt"])
    if isinstance(learners, str):
        learners = [learners]
    for tag in learners:
        if tag not in LEARNERS:
            raise ConfigError(f"unknown learner {tag!r}")
    grids = {}
    for tag, spec in (doc.get("grids") or {}).items():
        if tag not in LEARNERS:
            raise ConfigError(f"grid for unknown learner {tag!r}")
        if not isinstance(spec, dict):
            raise ConfigError(f"grid for {tag} must map parameter names to value lists")
        grids[tag] = Grid.from_lists(tag, spec)

    countries = doc.get("countries")
    if countries is not None:
        if isinstance(countries, str):
            countries = [countries]
        countries = tuple(countries)

    def month(key):
        v = doc.get(key)
        if v is None:
            return None
        try:
            return Month.parse(str(v))
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None

    window = _int(doc, "window", 72, 12)
    horizons = _int(doc, "horizons", 6, 1)
    if horizons > 12:
        raise ConfigError("horizons must be <= 12")
    return RunConfig(
        seed=seed,
        output_dir=path(doc.get("output_dir", "out")),
        events=tuple(path(e) for e in events),
        gpi=path(doc["gpi"]) if doc.get("gpi") else None,
        panel=path(doc["panel"]) if doc.get("panel") else None,
        column_map=column_map,
        countries=countries,
        learners=tuple(learners),
        grids=grids,
        window=window,
        horizons=horizons,
        folds=_int(doc, "folds", 10, 2),
        tune_once=bool(doc.get("tune_once", False)),
        start_month=month("start_month"),
        end_month=month("end_month"),
        explain=bool(doc.get("explain", True)),
    )


def load_config(path: Path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    return parse_config(doc, path.parent)


__all__ = ["RunConfig", "load_config", "parse_config", "DEFAULT_GRIDS"]
