"""Command-line pipeline: ingest, synth, split, train, tune, forecast, evaluate.

Every stage reads and writes on-disk artifacts only, so any stage can be
re-run in isolation.  All randomness flows from seeds recorded in the
manifest files.  SF_THREADS caps worker parallelism (training restarts).
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import (
    baselines,
    containers,
    metadata,
    metrics,
    predictor,
    profile_matrix,
    scenarios,
    trainer,
    tuning,
)
from .errors import SfcastError
from .model import ModelSpec


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("SF_THREADS", "1")))
    except ValueError:
        return 1


def read_config(path) -> tuple[ModelSpec, trainer.TrainConfig]:
    """Sectioned key-value config: [model] and [train]."""
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise SfcastError(f"cannot read config {path}")
    md = cp["model"] if "model" in cp else {}
    spec = ModelSpec(
        regression_variant=md.get("variant", "low_rank"),
        regression_rank=int(md.get("k", 5)),
        knots=int(md.get("knots", 8)),
        hidden=int(md.get("hidden", 100)),
        mf_enabled=str(md.get("mf", "true")).lower() in ("1", "true", "yes"),
        mf_rank=int(md.get("kprime", 5)),
    )
    tr = cp["train"] if "train" in cp else {}
    cfg = trainer.TrainConfig(
        lambda1=float(tr.get("lambda1", 1.0)),
        lambda2=float(tr.get("lambda2", 1.0)),
        minibatch=int(tr.get("minibatch", 300)),
        iterations=int(tr.get("iterations", 1000)),
        step_size=float(tr.get("step_size", 1e-2)),
        restarts=int(tr.get("restarts", 1)),
        seed=int(tr.get("seed", 0)),
        mode=tr.get("mode", "stochastic"),
    )
    return spec, cfg


def _apply_overrides(cfg, args):
    fields = ("lambda1", "lambda2", "minibatch", "iterations", "step_size", "restarts", "seed", "mode")
    updates = {f: getattr(args, f) for f in fields if getattr(args, f, None) is not None}
    return replace(cfg, **updates) if updates else cfg


# ------------------------------------------------------------- subcommands

def cmd_ingest(args):
    series = profile_matrix.read_long_format(args.series, args.offsets)
    stats = {}
    if args.standardize:
        kept = []
        for s in series:
            try:
                std_s, st = profile_matrix.standardize(s)
            except SfcastError as exc:
                print(f"warning: dropping series: {exc}", file=sys.stderr)
                continue
            kept.append(std_s)
            stats[s.id] = {"mean": st.mean, "std": st.std}
        series = kept
    pm = profile_matrix.reorganize(series, args.period)
    os.makedirs(args.out_dir, exist_ok=True)
    containers.save_profile_matrix(os.path.join(args.out_dir, "matrix.sfpm"), pm)
    if stats:
        containers.atomic_write(
            os.path.join(args.out_dir, "stats.json"),
            (json.dumps(stats, sort_keys=True) + "\n").encode(),
        )
    if args.metadata:
        docs = metadata.read_jsonl(args.metadata)
        per_series = metadata.tfidf_featurize(docs)
        meta = metadata.replicate_for_years(per_series, pm.index)
        containers.save_metadata_matrix(os.path.join(args.out_dir, "meta.sfsm"), meta)
        containers.save_metadata_matrix(
            os.path.join(args.out_dir, "meta_series.sfsm"), per_series
        )
        metadata.write_vocab(os.path.join(args.out_dir, "vocab.txt"), per_series)
    print(f"ingested {len(series)} series -> {pm.shape[1]} columns")
    return 0


def cmd_synth(args):
    data = scenarios.generate_synthetic(
        (args.T, args.N, args.m, args.k, args.kprime),
        noise_std=args.noise_std,
        seed=args.seed,
        years_per_series=args.years_per_series,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    containers.save_profile_matrix(os.path.join(args.out_dir, "matrix.sfpm"), data.pm)
    containers.save_metadata_matrix(os.path.join(args.out_dir, "meta.sfsm"), data.meta)
    containers.save_metadata_matrix(
        os.path.join(args.out_dir, "meta_series.sfsm"), data.per_series_meta
    )
    containers.save_model(os.path.join(args.out_dir, "truth.sfmd"), data.params)
    scenarios.write_manifest(
        os.path.join(args.out_dir, "manifest.json"),
        {
            "command": "synth",
            "dims": [args.T, args.N, args.m, args.k, args.kprime],
            "noise_std": args.noise_std,
            "seed": args.seed,
            "years_per_series": args.years_per_series,
        },
    )
    print(f"synthetic dataset: {data.pm.shape[0]}x{data.pm.shape[1]}, m={args.m}")
    return 0


def cmd_split(args):
    pm = containers.load_profile_matrix(args.matrix)
    os.makedirs(args.out_dir, exist_ok=True)
    manifest = {"command": "split", "scenario": args.scenario, "seed": args.seed}
    if args.scenario == "long_range":
        train, eval_mask = scenarios.split_long_range(pm)
        if args.missing_fraction:
            train = scenarios.mask_uniform(train, args.missing_fraction, args.seed)
            manifest["missing_fraction"] = args.missing_fraction
    elif args.scenario == "missing_uniform":
        train = scenarios.mask_uniform(pm, args.missing_fraction or 0.2, args.seed)
        eval_mask = pm.mask & ~train.mask
        manifest["missing_fraction"] = args.missing_fraction or 0.2
    elif args.scenario == "missing_contiguous":
        train, eval_mask = scenarios.mask_contiguous(pm, args.mean_len, args.seed)
        manifest["mean_len"] = args.mean_len
    else:
        raise SfcastError(f"unknown scenario {args.scenario!r}")
    containers.save_profile_matrix(os.path.join(args.out_dir, "train.sfpm"), train)
    np.save(os.path.join(args.out_dir, "eval_mask.npy"), eval_mask)
    scenarios.write_manifest(os.path.join(args.out_dir, "manifest.json"), manifest)
    print(f"{args.scenario}: {int(eval_mask.sum())} evaluation cells")
    return 0


def cmd_train(args):
    pm = containers.load_profile_matrix(args.matrix)
    meta = containers.load_metadata_matrix(args.metadata)
    spec, cfg = read_config(args.config)
    cfg = _apply_overrides(cfg, args)
    params, report = trainer.fit(spec, pm, meta, cfg, workers=_workers())
    containers.save_model(args.out, params)
    if args.trace:
        report.write_trace(args.trace)
    print(f"final loss {report.final_loss:.6g} over {cfg.restarts} restart(s)")
    return 0


def cmd_tune(args):
    pm = containers.load_profile_matrix(args.matrix)
    meta = containers.load_metadata_matrix(args.metadata)
    spec, cfg = read_config(args.config)
    cfg = _apply_overrides(cfg, args)
    cp = configparser.ConfigParser()
    if not cp.read(args.grid):
        raise SfcastError(f"cannot read grid {args.grid}")
    g = cp["grid"]

    def floats(key):
        return tuple(float(x) for x in g.get(key, "").split(",") if x.strip())

    grid = tuning.Grid(
        lambda1=floats("lambda1"),
        lambda2=floats("lambda2"),
        knots=tuple(int(x) for x in g.get("knots", "").split(",") if x.strip()),
    )
    result = tuning.two_stage_cv(
        spec,
        pm,
        meta,
        grid,
        cfg,
        folds=args.folds,
        rho=args.rho if args.rho else math.inf,
        holdout_fraction=args.holdout,
    )
    tuning.write_cv_report(args.report, result)
    containers.atomic_write(
        args.chosen, (json.dumps(result.chosen, sort_keys=True) + "\n").encode()
    )
    print(f"chosen: {result.chosen}")
    return 0


def cmd_forecast(args):
    params = containers.load_model(args.model)
    os.makedirs(args.out_dir, exist_ok=True)
    files = []
    if args.mode == "cold":
        meta = containers.load_metadata_matrix(args.metadata)
        if params.spec.regression_variant == "none":
            print(
                "warning: MF-alone model has no regression component; "
                "cold forecasts are the bias vector only",
                file=sys.stderr,
            )
        for c, sid in enumerate(meta.ids):
            vals = predictor.forecast_cold(params, meta.column(c))
            path = os.path.join(args.out_dir, f"forecast_{sid}.csv")
            predictor.write_forecast(path, sid, vals)
            files.append(path)
        n = len(meta.ids)
    elif args.mode == "warm":
        meta = containers.load_metadata_matrix(args.metadata)
        obs = _read_observations(args.observations)
        for c, sid in enumerate(meta.ids):
            warm = predictor.WarmObservations(meta.column(c), tuple(obs.get(sid, ())))
            vals = predictor.forecast_warm(params, warm, args.lambda2)
            path = os.path.join(args.out_dir, f"forecast_{sid}.csv")
            predictor.write_forecast(path, sid, vals)
            files.append(path)
        n = len(meta.ids)
    elif args.mode == "impute":
        pm = containers.load_profile_matrix(args.matrix)
        meta = containers.load_metadata_matrix(args.metadata)
        pred = predictor.impute(params, meta, pm)
        out = profile_matrix.ProfileMatrix(
            pred, np.ones_like(pred, dtype=bool), pm.period, pm.index, dict(pm.offsets)
        )
        path = os.path.join(args.out_dir, "imputed.sfpm")
        containers.save_profile_matrix(path, out)
        files.append(path)
        n = pm.shape[1]
    else:
        raise SfcastError(f"unknown forecast mode {args.mode!r}")
    predictor.write_summary(os.path.join(args.out_dir, "summary.json"), args.mode, n, files)
    return 0


def _read_observations(path):
    obs: dict[str, list] = {}
    with open(path) as fh:
        fh.readline()
        for line in fh:
            line = line.strip()
            if not line:
                continue
            sid, t, v = line.split(",")
            obs.setdefault(sid, []).append((int(t), float(v)))
    return obs


def cmd_evaluate(args):
    truth = containers.load_profile_matrix(args.truth)
    pred = containers.load_profile_matrix(args.pred)
    eval_mask = np.load(args.eval_mask) if args.eval_mask else truth.mask
    cfg = metrics.MetricConfig(
        rho=args.rho if args.rho else math.inf, kind=args.kind, eval_mask=eval_mask
    )
    rep = metrics.report(truth.data, pred.data, cfg)
    metrics.write_report(args.out, rep)
    print(json.dumps(rep, sort_keys=True))
    return 0


def cmd_baseline(args):
    pm = containers.load_profile_matrix(args.matrix)
    os.makedirs(args.out_dir, exist_ok=True)
    files = []
    if args.mode == "avg_py":
        for sid in pm.index.series_ids:
            vals = baselines.avg_py(pm, sid)
            path = os.path.join(args.out_dir, f"forecast_{sid}.csv")
            predictor.write_forecast(path, sid, vals)
            files.append(path)
        n = len(pm.index.series_ids)
    elif args.mode == "knn":
        train_meta = containers.load_metadata_matrix(args.metadata)
        query_meta = containers.load_metadata_matrix(args.query_metadata)
        for c, sid in enumerate(query_meta.ids):
            vals = baselines.knn_forecast(query_meta.column(c), train_meta, pm, args.k)
            path = os.path.join(args.out_dir, f"forecast_{sid}.csv")
            predictor.write_forecast(path, sid, vals)
            files.append(path)
        n = len(query_meta.ids)
    else:
        raise SfcastError(f"unknown baseline {args.mode!r}")
    predictor.write_summary(os.path.join(args.out_dir, "summary.json"), args.mode, n, files)
    return 0


# ------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sfcast", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("ingest", help="long-format series (+ metadata) -> containers")
    q.add_argument("--series", required=True)
    q.add_argument("--offsets")
    q.add_argument("--metadata")
    q.add_argument("--period", type=int, required=True)
    q.add_argument("--standardize", action="store_true")
    q.add_argument("--out-dir", required=True)
    q.set_defaults(func=cmd_ingest)

    q = sub.add_parser("synth", help="generate a planted synthetic dataset")
    q.add_argument("--T", type=int, required=True)
    q.add_argument("--N", type=int, required=True)
    q.add_argument("--m", type=int, required=True)
    q.add_argument("--k", type=int, default=4)
    q.add_argument("--kprime", type=int, default=0)
    q.add_argument("--noise-std", type=float, default=0.0)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--years-per-series", type=int, default=1)
    q.add_argument("--out-dir", required=True)
    q.set_defaults(func=cmd_synth)

    q = sub.add_parser("split", help="emit train matrix + evaluation mask")
    q.add_argument("scenario", choices=["long_range", "missing_uniform", "missing_contiguous"])
    q.add_argument("--matrix", required=True)
    q.add_argument("--missing-fraction", type=float, default=0.0)
    q.add_argument("--mean-len", type=float)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out-dir", required=True)
    q.set_defaults(func=cmd_split)

    def train_like(q):
        q.add_argument("--matrix", required=True)
        q.add_argument("--metadata", required=True)
        q.add_argument("--config", required=True)
        for f in ("lambda1", "lambda2", "step_size"):
            q.add_argument(f"--{f.replace('_', '-')}", type=float, dest=f)
        for f in ("minibatch", "iterations", "restarts", "seed"):
            q.add_argument(f"--{f}", type=int, dest=f)
        q.add_argument("--mode", choices=["stochastic", "full_batch"], dest="mode")

    q = sub.add_parser("train", help="fit a model from a config file")
    train_like(q)
    q.add_argument("--out", required=True)
    q.add_argument("--trace")
    q.set_defaults(func=cmd_train)

    q = sub.add_parser("tune", help="two-stage cross-validation over a grid")
    train_like(q)
    q.add_argument("--grid", required=True)
    q.add_argument("--folds", type=int, default=5)
    q.add_argument("--rho", type=float)
    q.add_argument("--holdout", type=float)
    q.add_argument("--report", required=True)
    q.add_argument("--chosen", required=True)
    q.set_defaults(func=cmd_tune)

    q = sub.add_parser("forecast", help="cold / warm / impute predictions")
    q.add_argument("mode", choices=["cold", "warm", "impute"])
    q.add_argument("--model", required=True)
    q.add_argument("--metadata")
    q.add_argument("--matrix")
    q.add_argument("--observations")
    q.add_argument("--lambda2", type=float, default=1.0)
    q.add_argument("--out-dir", required=True)
    q.set_defaults(func=cmd_forecast)

    q = sub.add_parser("baseline", help="avg-PY and k-NN reference forecasts")
    q.add_argument("mode", choices=["avg_py", "knn"])
    q.add_argument("--matrix", required=True)
    q.add_argument("--metadata")
    q.add_argument("--query-metadata")
    q.add_argument("--k", type=int, default=10)
    q.add_argument("--out-dir", required=True)
    q.set_defaults(func=cmd_baseline)

    q = sub.add_parser("evaluate", help="score predictions against truth")
    q.add_argument("--truth", required=True)
    q.add_argument("--pred", required=True)
    q.add_argument("--eval-mask")
    q.add_argument("--rho", type=float)
    q.add_argument("--kind", choices=["MSE", "MAE"], default="MSE")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_evaluate)

    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SfcastError as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return 1


def main():
    raise SystemExit(run())


if __name__ == "__main__":
    main()
