"""Command line: ``gpinow {ingest,backtest,explain,report} --config run.json``.

Exit codes: 0 success, 2 usage or configuration error, 3 data validation error.
"""

from __future__ import annotations

import argparse
import io
import logging
import os
import sys
import tempfile
from collections import Counter
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import explain as xp
from .config import RunConfig, load_config
from .errors import (
    ConfigError,
    ContractError,
    DataValidationError,
    DomainError,
    NotFoundError,
    UnsupportedModelError,
)
from .ingest import (
    EventScan,
    FeatureMatrix,
    MonthlyGpiSeries,
    PanelCube,
    build_design_matrix,
    load_gpi_annual,
    read_panel_csv,
    upsample_gpi,
    write_panel_csv,
)
from .models import TREE_LEARNERS
from .months import Month
from .rolling import (
    HorizonReport,
    evaluate_horizons,
    read_predictions,
    refit_for_target,
    rolling_backtest,
    write_metrics,
    write_predictions,
)

logger = logging.getLogger("gpinow")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

LOCAL_ACCURACY_TOL = 1e-9


def atomic_write(path: Path, writer: Callable[[io.TextIOBase], None]) -> None:
    """Render into a temp file in the target directory, then rename over ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _require(path: Optional[Path], what: str) -> Path:
    if path is None:
        raise ConfigError(f"config does not set {what}")
    if not path.exists():
        raise ConfigError(f"{what} not found: {path}")
    return path


# -- ingest --------------------------------------------------------------------

def cmd_ingest(cfg: RunConfig, out=None) -> PanelCube:
    out = out or sys.stdout
    if not cfg.events:
        raise ConfigError("config lists no events files")
    paths = [_require(p, "events file") for p in cfg.events]
    counts: Counter = Counter()
    lines = malformed = out_of_range = 0
    for p in paths:
        with open(p, encoding="utf-8", errors="replace", newline="") as fh:
            scan = EventScan(fh, cfg.column_map)
            for rec in scan:
                if (cfg.start_month and rec.month < cfg.start_month) or (
                        cfg.end_month and rec.month > cfg.end_month):
                    out_of_range += 1
                    continue
                counts[(rec.country, rec.month, rec.event_base_code)] += 1
            lines += scan.lines
            malformed += scan.malformed
    cube = PanelCube(dict(counts))
    atomic_write(cfg.panel_path, lambda fh: write_panel_csv(cube, fh))
    print(f"lines read: {lines}", file=out)
    print(f"malformed: {malformed}", file=out)
    if out_of_range:
        print(f"outside month range: {out_of_range}", file=out)
    print(f"events counted: {cube.total()}", file=out)
    print(f"countries: {len(cube.countries())}", file=out)
    print(f"event codes: {len(cube.codes())}", file=out)
    print(f"panel: {cfg.panel_path}", file=out)
    return cube


# -- shared loading ------------------------------------------------------------

def _load_inputs(cfg: RunConfig):
    panel_path = _require(cfg.panel_path, "panel file (run ingest first)")
    gpi_path = _require(cfg.gpi, "GPI file")
    with open(panel_path, encoding="utf-8", newline="") as fh:
        cube = read_panel_csv(fh)
    with open(gpi_path, encoding="utf-8", newline="") as fh:
        annual = load_gpi_annual(fh)
    if cfg.countries is not None:
        countries = sorted(cfg.countries)
    else:
        countries = sorted(set(cube.countries()) & set(annual.countries()))
    return cube, annual, countries


def _country_inputs(cfg: RunConfig, cube: PanelCube, annual, country: str
                    ) -> tuple[FeatureMatrix, MonthlyGpiSeries]:
    series = upsample_gpi(annual, country)
    start = cfg.start_month or series.start_month
    end = cfg.end_month or cube.month_span(country)[1]
    if end < start:
        raise DataValidationError(f"{country}: no event months at or after {start}")
    return build_design_matrix(cube, country, (start, end)), series


def _file_tag(*parts) -> str:
    return "_".join(str(p) for p in parts)


# -- backtest ------------------------------------------------------------------

def cmd_backtest(cfg: RunConfig, out=None) -> dict[str, dict[str, HorizonReport]]:
    out = out or sys.stdout
    cube, annual, countries = _load_inputs(cfg)
    results: dict[str, dict[str, HorizonReport]] = {}
    for learner in cfg.learners:
        rcfg = cfg.rolling(learner)
        preds = []
        reports: dict[str, HorizonReport] = {}
        explain_here = cfg.explain and learner in TREE_LEARNERS
        for country in countries:
            try:
                features, series = _country_inputs(cfg, cube, annual, country)
                res = rolling_backtest(features, series, rcfg, keep_windows=explain_here)
            except (NotFoundError, ContractError, DataValidationError) as exc:
                logger.warning("skipping %s for %s: %s", country, learner, exc)
                continue
            preds.extend(res.predictions)
            reports[country] = evaluate_horizons(res.predictions)
            if explain_here and res.windows:
                _explain_last_window(cfg, learner, country, features, rcfg, res)
            print(f"{learner} {country}: {len(res.predictions)} predictions", file=out)
        atomic_write(cfg.output_dir / f"predictions_{learner}.csv",
                     lambda fh: write_predictions(preds, fh))
        atomic_write(cfg.output_dir / f"metrics_{learner}.csv",
                     lambda fh: write_metrics(reports, cfg.horizons, fh))
        results[learner] = reports
    return results


def _checked_doc(model, x, background, meta) -> dict:
    doc = xp.explain_prediction(model, x, background, meta)
    total = doc["base_value"] + sum(c["phi"] for c in doc["contributions"])
    gap = abs(total - doc["output_value"])
    if gap > LOCAL_ACCURACY_TOL * max(1.0, abs(doc["output_value"])):
        raise DomainError(f"explanation is not locally accurate (gap {gap:.3g})")
    return doc


def _window_importance(wf) -> xp.GlobalImportance:
    exps = [xp.tree_shap(wf.model, row, wf.train) for row in wf.train.X]
    return xp.global_importance(exps)


def _explain_last_window(cfg, learner, country, features, rcfg, res) -> None:
    wf = res.windows[-1]
    last = [p for p in res.predictions if p.window_start == wf.train_months[0]]
    first = last[0]
    row = features.months.index(first.target_month)
    x = features.rows(row, row + 1).select(wf.codes).astype(float)[0]
    meta = {"country": country, "target_month": first.target_month, "horizon": first.horizon,
            "learner": learner, "window_start": wf.train_months[0]}
    doc = _checked_doc(wf.model, x, wf.train, meta)
    atomic_write(cfg.output_dir / f"explanation_{_file_tag(learner, country)}.json",
                 lambda fh: xp.dump_explanation(doc, fh))
    imp = _window_importance(wf)
    atomic_write(cfg.output_dir / f"importance_{_file_tag(learner, country)}.csv",
                 lambda fh: xp.write_importance(imp, fh))


# -- explain -------------------------------------------------------------------

def cmd_explain(cfg: RunConfig, country: str, target: Month, horizon: int, learner: str,
                out=None) -> dict:
    out = out or sys.stdout
    if learner not in TREE_LEARNERS:
        raise UnsupportedModelError(f"explanations are available for {', '.join(TREE_LEARNERS)}")
    cube, annual, _ = _load_inputs(cfg)
    features, series = _country_inputs(cfg, cube, annual, country)
    rcfg = cfg.rolling(learner)
    wf, x, actual = refit_for_target(features, series, rcfg, target, horizon)
    meta = {"country": country, "target_month": target, "horizon": horizon,
            "learner": learner, "window_start": wf.train_months[0]}
    doc = _checked_doc(wf.model, x, wf.train, meta)
    doc["actual"] = actual
    tag = _file_tag(learner, country, target, f"h{horizon}")
    atomic_write(cfg.output_dir / f"explanation_{tag}.json", lambda fh: xp.dump_explanation(doc, fh))
    imp = _window_importance(wf)
    atomic_write(cfg.output_dir / f"importance_{_file_tag(learner, country, wf.train_months[0])}.csv",
                 lambda fh: xp.write_importance(imp, fh))
    print(f"output {doc['output_value']:.4f} base {doc['base_value']:.4f}", file=out)
    for code, value in imp.ranking[:10]:
        print(f"  {code}\t{value:.6g}", file=out)
    return doc


# -- report --------------------------------------------------------------------

def cmd_report(cfg: RunConfig, out=None) -> dict[str, dict[str, HorizonReport]]:
    out = out or sys.stdout
    results = {}
    for learner in cfg.learners:
        path = _require(cfg.output_dir / f"predictions_{learner}.csv", "predictions file")
        with open(path, encoding="utf-8", newline="") as fh:
            preds = read_predictions(fh)
        by_country: dict[str, list] = {}
        for p in preds:
            if cfg.countries is None or p.country in cfg.countries:
                by_country.setdefault(p.country, []).append(p)
        reports = {c: evaluate_horizons(ps) for c, ps in by_country.items()}
        atomic_write(cfg.output_dir / f"metrics_{learner}.csv",
                     lambda fh: write_metrics(reports, cfg.horizons, fh))
        buf = io.StringIO()
        write_metrics(reports, cfg.horizons, buf)
        print(f"# {learner}", file=out)
        out.write(buf.getvalue())
        results[learner] = reports
    return results


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpinow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("ingest", "parse event files into a count panel"),
                        ("backtest", "rolling-window backtest and metrics"),
                        ("explain", "explain one prediction of a tree model"),
                        ("report", "recompute metrics from prediction files")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--country", action="append", help="restrict to a country (repeatable)")
        p.add_argument("--learner", action="append", help="restrict to a learner (repeatable)")
        p.add_argument("--seed", type=int)
        if name == "explain":
            p.add_argument("--month", required=True, help="target month YYYY-MM")
            p.add_argument("--horizon", type=int, default=1)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = load_config(args.config).with_overrides(args.seed, args.country, args.learner)
        if args.learner:
            for tag in args.learner:
                cfg.rolling(tag)
        if args.command == "ingest":
            cmd_ingest(cfg)
        elif args.command == "backtest":
            cmd_backtest(cfg)
        elif args.command == "report":
            cmd_report(cfg)
        else:
            if not args.country or len(args.country) != 1:
                raise ConfigError("explain needs exactly one --country")
            try:
                target = Month.parse(args.month)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            learner = args.learner[0] if args.learner else cfg.learners[0]
            cmd_explain(cfg, args.country[0], target, args.horizon, learner)
    except (ConfigError, UnsupportedModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataValidationError, ContractError, NotFoundError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
