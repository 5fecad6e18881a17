"""``arcollect`` command line: generate, featurize, train, evaluate, rank, sweep, snapshots, plotdata."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from collections import defaultdict
from datetime import date
from decimal import Decimal
from typing import Optional, Sequence

import numpy as np

from arcollect import config as config_mod
from arcollect import experiments, models
from arcollect.domain import ArcollectError, ConfigError, format_month, month_end, month_of, parse_month
from arcollect.evaluation import write_json, write_monthly_csv, write_roc_csv
from arcollect.features import ImputationStats, extract_all, extract_features, impute, write_feature_csv
from arcollect.ingest import InvoiceDataset, format_amount, parse_csv, write_csv
from arcollect.rank import build_ranked_list, write_ranking_csv
from arcollect.split import make_snapshots
from arcollect.synth import generate

log = logging.getLogger("arcollect")

COMMANDS = ("generate", "featurize", "train", "evaluate", "rank", "sweep", "snapshots", "plotdata")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--input", help="invoice CSV (default: <out>/invoices.csv)")
    common.add_argument("--model", dest="model_path", help="model file (default: <out>/model.json)")
    common.add_argument("--window", type=int, dest="window_months", help="history window in months")
    common.add_argument("--kind", help="model kind: " + ", ".join(models.KINDS))
    common.add_argument("--as-of", dest="as_of", help="ranking date, YYYY-MM-DD")
    common.add_argument("--month", dest="plot_month", help="plot data month, YYYY-MM")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="arcollect", description="Invoice late-payment prediction pipeline.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "generate": "write a seeded synthetic invoice CSV",
        "featurize": "write per-invoice history features",
        "train": "fit a model on the train partition",
        "evaluate": "score the test partition",
        "rank": "rank customers with open invoices by risk",
        "sweep": "test accuracy per window size and model",
        "snapshots": "train and test on rolling snapshots",
        "plotdata": "per-day invoice totals for one month",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def resolve_config(args: argparse.Namespace) -> config_mod.RunConfig:
    cfg = config_mod.load(args.config)
    for key in ("out", "seed", "input", "model_path", "window_months", "plot_month"):
        value = getattr(args, key)
        if value is not None:
            setattr(cfg, key, value)
    if args.kind is not None:
        if args.kind != cfg.kind:
            cfg.hyperparameters = {}
        cfg.kind = args.kind
    if args.as_of is not None:
        cfg.as_of = config_mod._parse_date(args.as_of)
    cfg.validate()
    return cfg


# -- helpers -------------------------------------------------------------------


def _load_dataset(cfg: config_mod.RunConfig) -> InvoiceDataset:
    ds, report = parse_csv(cfg.input_path, strict=cfg.strict)
    if not ds.invoices:
        raise ArcollectError(f"{cfg.input_path}: no valid invoices")
    log.info("loaded %d invoices (%d rejected)", report.accepted, report.rejected)
    return ds


def _prepared(cfg: config_mod.RunConfig, ds: InvoiceDataset) -> experiments.PreparedData:
    rows = extract_all(ds, cfg.window_months, cfg.policy, cfg.include_ratios)
    return experiments.prepare(rows, cfg.window_months, cfg.split, cfg.include_ratios)


def _model_for(cfg: config_mod.RunConfig) -> models.TrainedModel:
    if not cfg.model_file.exists():
        raise ArcollectError(f"model file {cfg.model_file} not found; run `arcollect train` first")
    return models.load_model(cfg.model_file)


def _check_model_matches(cfg: config_mod.RunConfig, model: models.TrainedModel) -> None:
    meta = model.metadata
    if meta.get("window_months", cfg.window_months) != cfg.window_months:
        raise ArcollectError(
            f"model was trained with window_months={meta['window_months']}, config has {cfg.window_months}"
        )
    if meta.get("grace_days", cfg.grace_days) != cfg.grace_days:
        raise ArcollectError(f"model was trained with grace_days={meta['grace_days']}, config has {cfg.grace_days}")


# -- commands ------------------------------------------------------------------


def cmd_generate(cfg: config_mod.RunConfig, seed_from_flag: bool = False) -> None:
    gen = cfg.generator_config(seed_from_flag)
    invoices = generate(gen)
    write_csv(invoices, cfg.out_dir / "invoices.csv")
    log.info("wrote %d invoices", len(invoices))


def cmd_featurize(cfg: config_mod.RunConfig) -> None:
    ds = _load_dataset(cfg)
    rows = extract_all(ds, cfg.window_months, cfg.policy, cfg.include_ratios)
    write_feature_csv(rows, cfg.out_dir / "features.csv", cfg.include_ratios)


def cmd_train(cfg: config_mod.RunConfig) -> None:
    ds = _load_dataset(cfg)
    data = _prepared(cfg, ds)
    model = experiments.fit_model(data, cfg.kind, cfg.hyperparameters, cfg.seed, cfg.grace_days)
    models.save_model(model, cfg.model_file)
    metrics = {
        "kind": cfg.kind,
        "window_months": cfg.window_months,
        "ratios": data.ratios(),
        "train": experiments.evaluate_partition(model, data, "train", cfg.threshold).report.to_dict(),
        "validation": experiments.evaluate_partition(model, data, "validation", cfg.threshold).report.to_dict(),
    }
    write_json(metrics, cfg.out_dir / "train_metrics.json")


def cmd_evaluate(cfg: config_mod.RunConfig) -> None:
    model = _model_for(cfg)
    _check_model_matches(cfg, model)
    ds = _load_dataset(cfg)
    data = _prepared(cfg, ds)
    result = experiments.evaluate_partition(model, data, "test", cfg.threshold)
    doc = result.report.to_dict()
    doc["kind"] = model.kind
    write_json(doc, cfg.out_dir / "metrics.json")
    if result.roc is not None:
        write_roc_csv(result.roc, cfg.out_dir / "roc.csv")
    write_monthly_csv(result.report.monthly, cfg.out_dir / "monthly.csv")
    log.info("test accuracy %.4f (baseline %.4f)", result.report.accuracy, result.report.baseline)


def cmd_rank(cfg: config_mod.RunConfig) -> None:
    model = _model_for(cfg)
    _check_model_matches(cfg, model)
    ds = _load_dataset(cfg)
    as_of = cfg.as_of or date(*cfg.split.test_start, 1)
    ranked = build_ranked_list(ds, model, as_of, cfg.window_months, cfg.policy, greedy_basis=cfg.greedy_basis)
    write_ranking_csv(ranked, cfg.out_dir / "ranking.csv")
    tau = ranked.tau()
    report = {"as_of": as_of.isoformat(), "greedy_basis": cfg.greedy_basis, "n_customers": len(ranked), "tau": tau}
    (cfg.out_dir / "tau.json").write_text(json.dumps(report, sort_keys=True) + "\n", encoding="utf-8")


def cmd_sweep(cfg: config_mod.RunConfig) -> None:
    ds = _load_dataset(cfg)
    hyper = {cfg.kind: cfg.hyperparameters} if cfg.hyperparameters else None
    cells = experiments.window_sweep(
        ds, cfg.sweep_windows, cfg.sweep_kinds, cfg.split, cfg.policy, hyper, cfg.seed, cfg.include_ratios
    )
    experiments.write_sweep_csv(cells, cfg.out_dir / "sweep.csv")


def cmd_snapshots(cfg: config_mod.RunConfig) -> None:
    ds = _load_dataset(cfg)
    sc = cfg.snapshots
    start = sc.data_start or format_month(month_of(ds.invoices[0].creation_date))
    end = sc.data_end or format_month(month_of(ds.invoices[-1].creation_date))
    try:
        specs = make_snapshots(start, end, sc.train_months, sc.val_months, sc.step_months, sc.count)
    except ValueError as exc:
        raise ConfigError(f"invalid snapshot layout: {exc}") from None
    kind = sc.kind or cfg.kind
    hyper = cfg.hyperparameters if kind == cfg.kind else None
    reports = experiments.snapshot_sweep(
        ds, specs, kind, cfg.window_months, cfg.policy, hyper, cfg.seed, cfg.include_ratios
    )
    experiments.write_snapshot_csv(reports, cfg.out_dir / "snapshots.csv")
    for k, rep in enumerate(reports, start=1):
        write_monthly_csv(rep.monthly, cfg.out_dir / f"monthly_set{k}.csv")


def cmd_plotdata(cfg: config_mod.RunConfig) -> None:
    """Invoices due in one month, grouped by due date and predicted label."""
    model = _model_for(cfg)
    _check_model_matches(cfg, model)
    ds = _load_dataset(cfg)
    try:
        month = parse_month(cfg.plot_month) if cfg.plot_month else cfg.split.test_start
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    first, last = date(*month, 1), month_end(month)
    due = [inv for inv in ds.invoices if first <= inv.due_date <= last]
    groups: dict[tuple[date, str], list[Decimal]] = defaultdict(list)
    if due:
        rows = [extract_features(ds, inv, cfg.window_months, cfg.policy, cfg.include_ratios) for inv in due]
        if "imputation" in model.metadata:
            stats = ImputationStats.from_dict(model.metadata["imputation"])
            rows = [impute(r, stats) for r in rows]
        X = [[float(getattr(r, n)) for n in model.feature_names] for r in rows]
        probs = models.predict_proba(model, np.asarray(X, dtype=float))
        for inv, p in zip(due, probs):
            label = models.label_from_score(float(p), cfg.threshold).value
            groups[(inv.due_date, label)].append(inv.amount)
    with open(cfg.out_dir / "plotdata.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "invoice_count", "total_amount", "predicted_label"])
        for (day, label) in sorted(groups):
            amounts = groups[(day, label)]
            w.writerow([day.isoformat(), len(amounts), format_amount(sum(amounts, Decimal(0))), label])


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = resolve_config(args)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "generate":
            cmd_generate(cfg, seed_from_flag=args.seed is not None)
        else:
            globals()[f"cmd_{args.command}"](cfg)
    except ConfigError as exc:
        print(f"arcollect: configuration error: {exc}", file=sys.stderr)
        return 2
    except (ArcollectError, OSError, ValueError) as exc:
        print(f"arcollect: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
