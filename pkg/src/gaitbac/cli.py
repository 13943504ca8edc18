"""Command-line interface: one executable exposing every pipeline stage.

Subcommands: synth, ingest, ebac, features, train, sweep, evaluate, and
reproduce (the full synth -> ingest -> features -> train -> evaluate
chain emitting comparison tables). Exit codes: 0 success, 1 runtime or
numeric failure, 2 usage/config error; failures also emit a
machine-readable error JSON naming the stage. Every command echoes its
effective configuration (seeds included) next to its outputs so a run can
be replayed from the echo alone. No timestamps are written, so fixed-seed
runs are byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, ebac, features, ingest, synth
from .baselines import SvrParams, fit_linreg, fit_svr
from .errors import GaitbacError
from .evaluation import (
    evaluate,
    format_five_metric_table,
    format_mse_r_table,
    write_histogram_csv,
    write_metrics_json,
    write_scatter_csv,
)
from .mlp import Dataset, fit_scaling, init_model
from .modelio import load_model, save_model
from .train import LmConfig, split, sweep_hidden, train_br, train_cg, train_lm

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class StageError(Exception):
    """Wraps a failure with the pipeline stage it happened in."""

    def __init__(self, stage: str, cause: Exception, exit_code: int):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = exit_code


def _emit_error(stage: str, exc: Exception, out_dir: Path | None) -> None:
    doc = {
        "stage": stage,
        "error": type(exc).__name__,
        "message": str(exc),
    }
    text = json.dumps(doc, indent=2)
    print(text, file=sys.stderr)
    if out_dir is not None:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "error.json").write_text(text + "\n")
        except OSError:
            pass


def _classify(exc: Exception) -> int:
    if isinstance(exc, (FileNotFoundError, NotADirectoryError, ValueError, KeyError)):
        return EXIT_USAGE
    return EXIT_RUNTIME


def _echo_config(doc: dict, out_dir: Path, name: str = "config_echo.json") -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path) -> Path:
    """List every file under out_dir (except the manifest) with its hash."""
    entries = []
    for p in sorted(out_dir.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            entries.append({
                "path": p.relative_to(out_dir).as_posix(),
                "sha256": _sha256(p),
                "bytes": p.stat().st_size,
            })
    path = out_dir / "manifest.json"
    path.write_text(json.dumps({"files": entries}, indent=2) + "\n")
    return path


# --- run configuration --------------------------------------------------------

@dataclass
class RunConfig:
    """Effective configuration of the reproduce pipeline. Values come from
    an optional JSON config file with command-line flags overriding."""

    seed: int = 0
    subjects: int = 10
    sessions: int = 8
    hidden: int = 45
    train_frac: float = 0.7
    split_mode: str = "random_window"
    algorithms: tuple[str, ...] = ("br", "lm", "cg", "linreg", "svr")
    lm_max_iters: int = 60
    cg_max_iters: int = 300
    br_max_outer: int = 6
    br_inner_iters: int = 25
    svr_max_train: int = 3000
    svr_c: float = 1.0
    svr_epsilon: float = 1e-3
    bins: int = 20
    threads: int = 1

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["algorithms"] = list(self.algorithms)
        return out


def _load_run_config(args) -> RunConfig:
    doc: dict = {}
    if args.config is not None:
        doc = json.loads(Path(args.config).read_text())
    cfg = RunConfig(**{k: v for k, v in doc.items() if k in RunConfig.__dataclass_fields__})
    for flag, attr in [("seed", "seed"), ("subjects", "subjects"),
                       ("sessions", "sessions"), ("hidden", "hidden"),
                       ("train_frac", "train_frac"), ("threads", "threads")]:
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, attr, value)
    if getattr(args, "split", None) is not None:
        cfg.split_mode = "by_episode" if args.split == "episode" else "random_window"
    return cfg


# --- subcommands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = synth.SynthConfig(seed=args.seed, n_subjects=args.subjects,
                            sessions_per_subject=args.sessions) \
        if args.config is None else synth.config_from_dict(json.loads(Path(args.config).read_text()))
    out_dir = Path(args.out_dir)
    data = synth.generate_dataset(cfg)
    paths = synth.write_dataset(data, out_dir)
    _echo_config({"command": "synth", "config": synth.config_to_dict(cfg)}, out_dir)
    write_manifest(out_dir)
    print(f"wrote {len(data.recordings)} recordings under {paths['sensors']}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    recordings = ingest.scan_sensor_dir(args.in_dir)
    pairs = ingest.parse_ema(args.ema)
    aligned = ingest.align(recordings, pairs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    echo = json.dumps({"command": "ingest", "in_dir": str(args.in_dir),
                       "ema": str(args.ema)}, sort_keys=True)
    with out.open("w", newline="") as fh:
        fh.write(f"# config: {echo}\n")
        fh.write("subject_id,session_date,hour,n_samples,duration_s,sample_rate_hz,label,flags\n")
        for lr in aligned.labeled:
            r = lr.recording
            fh.write(f"{r.subject_id},{r.session_date},{r.hour_slot},{r.n_samples},"
                     f"{r.duration_s!r},{r.sample_rate_hz!r},{lr.label!r},"
                     f"{'|'.join(sorted(r.flags))}\n")
    print(f"aligned {len(aligned.labeled)} recordings, dropped {aligned.n_dropped}")
    return EXIT_OK


def cmd_ebac(args) -> int:
    pairs = ingest.parse_ema(args.ema)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    echo = json.dumps({"command": "ebac", "ema": str(args.ema)}, sort_keys=True)
    with out.open("w", newline="") as fh:
        fh.write(f"# config: {echo}\n")
        fh.write("subject_id,session_date,hour,ebac\n")
        for profile, timeline in pairs:
            trace = ebac.ebac_timeline(timeline, profile)
            for hour in sorted(trace.values):
                fh.write(f"{profile.subject_id},{timeline.session_date},"
                         f"{hour},{trace.values[hour]!r}\n")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_features(args) -> int:
    cfg = features.WindowConfig(window_len=args.window, hop=args.hop)
    recordings = ingest.scan_sensor_dir(args.in_dir)
    pairs = ingest.parse_ema(args.ema)
    aligned = ingest.align(recordings, pairs)
    vectors = []
    for lr in aligned.labeled:
        vectors.extend(features.extract(lr.recording, lr.label, cfg))
    echo = json.dumps({"command": "features", "in_dir": str(args.in_dir),
                       "ema": str(args.ema), "window": cfg.window_len,
                       "hop": cfg.hop}, sort_keys=True)
    features.write_features_csv(vectors, args.out, config_echo=echo)
    print(f"wrote {len(vectors)} windows from {len(aligned.labeled)} recordings "
          f"({aligned.n_dropped} dropped)")
    return EXIT_OK


def _train_one(algorithm: str, train_set: Dataset, run: RunConfig,
               hidden: int, seed: int):
    """Fit one algorithm; returns (model, training metadata dict)."""
    lm_cfg = LmConfig(max_iters=run.lm_max_iters)
    meta: dict = {"algorithm": algorithm, "seed": seed}
    algo_stream = {"cg": 1, "lm": 2, "br": 3}
    if algorithm in ("lm", "br", "cg"):
        rng = np.random.default_rng(np.random.SeedSequence((seed, algo_stream[algorithm])))
        in_scale, out_scale = fit_scaling(train_set)
        model = init_model(train_set.n_features, hidden, rng, in_scale, out_scale)
        if algorithm == "lm":
            fitted, report = train_lm(model, train_set, lm_cfg, seed=seed)
        elif algorithm == "cg":
            fitted, report = train_cg(model, train_set, max_iters=run.cg_max_iters, seed=seed)
        else:
            inner = LmConfig(max_iters=run.br_inner_iters)
            fitted, state, report = train_br(model, train_set, inner, seed=seed,
                                             max_outer=run.br_max_outer)
            meta.update(alpha=state.alpha, beta=state.beta, gamma=state.gamma)
        meta.update(iterations=report.iterations, final_train_mse=report.final_mse,
                    stop_reason=report.stop_reason, hidden=hidden)
        return fitted, meta, report
    if algorithm == "linreg":
        return fit_linreg(train_set), meta, None
    if algorithm == "svr":
        svr_train = train_set
        if run.svr_max_train and train_set.n > run.svr_max_train:
            rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5A)))
            rows = rng.permutation(train_set.n)[:run.svr_max_train]
            svr_train = train_set.subset(np.sort(rows))
            meta["svr_train_rows"] = int(run.svr_max_train)
        params = SvrParams(C=run.svr_c, epsilon=run.svr_epsilon,
                           gamma=1.0 / train_set.n_features)
        return fit_svr(svr_train, params), meta, None
    raise ValueError(f"unknown algorithm {algorithm!r}")


def cmd_train(args) -> int:
    vectors = features.read_features_csv(args.features)
    data = Dataset.from_feature_vectors(vectors)
    mode = "by_episode" if args.split == "episode" else "random_window"
    train_set, test_set = split(data, args.train_frac, mode=mode, seed=args.seed)
    run = RunConfig(seed=args.seed, hidden=args.hidden,
                    lm_max_iters=args.max_iters, cg_max_iters=args.max_iters,
                    br_inner_iters=max(args.max_iters // 4, 10),
                    svr_max_train=args.svr_max_train)
    model, meta, report = _train_one(args.algo, train_set, run, args.hidden, args.seed)
    meta.update(train_frac=args.train_frac, split=args.split,
                n_train=train_set.n, n_test=test_set.n)
    save_model(model, args.out, args.algo, training_meta=meta)
    if args.report is not None:
        doc = {"config": meta}
        if report is not None:
            doc["training"] = report.to_dict()
        test_err = test_set.targets - model.predict(test_set.inputs)
        doc["test_mse"] = float(test_err @ test_err) / test_set.n
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"saved {args.algo} model to {args.out}")
    return EXIT_OK


def _parse_hidden_spec(spec: str) -> list[int]:
    """Accept '5:60:5' (inclusive range), '2,4,8', or a single integer."""
    if ":" in spec:
        parts = [int(p) for p in spec.split(":")]
        if len(parts) == 2:
            lo, hi, step = parts[0], parts[1], 1
        elif len(parts) == 3:
            lo, hi, step = parts
        else:
            raise ValueError(f"bad hidden spec {spec!r}")
        return list(range(lo, hi + 1, step))
    if "," in spec:
        return [int(p) for p in spec.split(",") if p]
    return [int(spec)]


def cmd_sweep(args) -> int:
    vectors = features.read_features_csv(args.features)
    data = Dataset.from_feature_vectors(vectors)
    candidates = _parse_hidden_spec(args.hidden)
    cfg = LmConfig(max_iters=args.max_iters)
    result = sweep_hidden(data, candidates, folds=args.folds, trainer=args.algo,
                          seed=args.seed, cfg=cfg, threads=args.threads)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    echo = json.dumps({"command": "sweep", "hidden": candidates, "folds": args.folds,
                       "algo": args.algo, "seed": args.seed,
                       "max_iters": args.max_iters}, sort_keys=True)
    with out.open("w", newline="") as fh:
        fh.write(f"# config: {echo}\n")
        fh.write("hidden,cv_mse,failed\n")
        for row in result.rows:
            fh.write(f"{row.hidden},{row.cv_mse!r},{int(row.failed)}\n")
    print(f"selected hidden = {result.selected}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    test_vectors = features.read_features_csv(args.features)
    test_set = Dataset.from_feature_vectors(test_vectors)
    if args.train_features is not None:
        train_set = Dataset.from_feature_vectors(
            features.read_features_csv(args.train_features))
    else:
        train_set = test_set
    result = evaluate(model, train_set, test_set, bins=args.bins)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_metrics_json(result, out_dir / "metrics.json")
    write_histogram_csv(result.histogram, out_dir / "histogram.csv")
    write_scatter_csv(result, out_dir / "scatter.csv")
    table = format_five_metric_table(
        {"model": result.metrics["test"]}, "Held-out metrics")
    (out_dir / "table.txt").write_text(table)
    _echo_config({"command": "evaluate", "model": str(args.model),
                  "features": str(args.features),
                  "train_features": str(args.train_features) if args.train_features else None,
                  "bins": args.bins}, out_dir)
    print(table)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    run = _load_run_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stage = "config"
    try:
        _echo_config({"command": "reproduce", "config": run.to_dict(),
                      "version": __version__}, out_dir)

        stage = "synth"
        syn_cfg = synth.SynthConfig(seed=run.seed, n_subjects=run.subjects,
                                    sessions_per_subject=run.sessions)
        data_dir = out_dir / "data"
        synth.write_dataset(synth.generate_dataset(syn_cfg), data_dir)

        stage = "ingest"
        recordings = ingest.scan_sensor_dir(data_dir / "sensors")
        pairs = ingest.parse_ema(data_dir / "ema.json")
        aligned = ingest.align(recordings, pairs)

        stage = "features"
        wcfg = features.WindowConfig()
        vectors = []
        for lr in aligned.labeled:
            vectors.extend(features.extract(lr.recording, lr.label, wcfg))
        features.write_features_csv(vectors, out_dir / "features.csv")
        dataset = Dataset.from_feature_vectors(vectors)

        stage = "split"
        train_set, test_set = split(dataset, run.train_frac,
                                    mode=run.split_mode, seed=run.seed)

        stage = "train"
        models = {}
        for algo in run.algorithms:
            model, meta, report = _train_one(algo, train_set, run, run.hidden, run.seed)
            models[algo] = model
            save_model(model, out_dir / f"model_{algo}.json", algo, training_meta=meta)
            if report is not None:
                (out_dir / f"report_{algo}.json").write_text(
                    json.dumps(report.to_dict(), indent=2) + "\n")
            print(f"trained {algo}")

        stage = "evaluate"
        test_reports = {}
        for algo, model in models.items():
            result = evaluate(model, train_set, test_set, bins=run.bins)
            algo_dir = out_dir / "eval" / algo
            write_metrics_json(result, algo_dir / "metrics.json")
            write_histogram_csv(result.histogram, algo_dir / "histogram.csv")
            write_scatter_csv(result, algo_dir / "scatter.csv")
            test_reports[algo] = result.metrics["test"]

        stage = "tables"
        net_algos = {a: r for a, r in test_reports.items() if a in ("cg", "lm", "br")}
        mse_r = format_mse_r_table(net_algos, "Training algorithms on held-out data")
        five = format_five_metric_table(
            {("mlp(br)" if a == "br" else a): r for a, r in test_reports.items()},
            "Regression techniques on held-out data")
        (out_dir / "table_mse_r.txt").write_text(mse_r)
        (out_dir / "table_metrics.txt").write_text(five)
        with (out_dir / "comparison.csv").open("w", newline="") as fh:
            fh.write("algorithm,test_mse,test_r,test_mae,test_rmse,test_rae_percent,"
                     "test_rrse_percent\n")
            for algo, rep in test_reports.items():
                fh.write(f"{algo},{rep.mse!r},{rep.r!r},{rep.mae!r},{rep.rmse!r},"
                         f"{rep.rae_percent!r},{rep.rrse_percent!r}\n")
        print(mse_r)
        print(five)

        stage = "manifest"
        write_manifest(out_dir)
    except GaitbacError as exc:
        _emit_error(stage, exc, out_dir)
        return EXIT_RUNTIME
    except (OSError, ValueError, KeyError) as exc:
        _emit_error(stage, exc, out_dir)
        return EXIT_USAGE
    return EXIT_OK


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaitbac",
        description="Blood alcohol estimation from smartphone gait recordings",
    )
    parser.add_argument("--version", action="version",
                        version=f"gaitbac {__version__} (numpy {np.__version__})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", default=None, help="synth config JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--subjects", type=int, default=10)
    p.add_argument("--sessions", type=int, default=8)
    p.set_defaults(func=cmd_synth, stage="synth")

    p = sub.add_parser("ingest", help="parse and align recordings with eBAC labels")
    p.add_argument("--in", dest="in_dir", required=True, help="sensor CSV directory")
    p.add_argument("--ema", required=True, help="EMA JSON file")
    p.add_argument("--out", required=True, help="aligned summary CSV")
    p.set_defaults(func=cmd_ingest, stage="ingest")

    p = sub.add_parser("ebac", help="hourly eBAC per subject-session")
    p.add_argument("--ema", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ebac, stage="ebac")

    p = sub.add_parser("features", help="extract windowed gait features")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--ema", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=128)
    p.add_argument("--hop", type=int, default=64)
    p.set_defaults(func=cmd_features, stage="features")

    p = sub.add_parser("train", help="fit one model on a feature CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--algo", choices=["cg", "lm", "br", "linreg", "svr"], required=True)
    p.add_argument("--hidden", type=int, default=45)
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--split", choices=["random", "episode"], default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--svr-max-train", type=int, default=3000)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--report", default=None, help="training report JSON path")
    p.set_defaults(func=cmd_train, stage="train")

    p = sub.add_parser("sweep", help="hidden-size cross-validation sweep")
    p.add_argument("--features", required=True)
    p.add_argument("--hidden", required=True, help="e.g. 5:60:5 or 2,4,8")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--algo", choices=["cg", "lm", "br"], default="lm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, help="result table CSV")
    p.set_defaults(func=cmd_sweep, stage="sweep")

    p = sub.add_parser("evaluate", help="metrics, histogram and scatter for a model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True, help="held-out feature CSV")
    p.add_argument("--train-features", default=None)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_evaluate, stage="evaluate")

    p = sub.add_parser("reproduce", help="full pipeline on synthetic data")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", default=None, help="run config JSON")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--subjects", type=int, default=None)
    p.add_argument("--sessions", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--train-frac", dest="train_frac", type=float, default=None)
    p.add_argument("--split", choices=["random", "episode"], default=None)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_reproduce, stage="reproduce")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.func is cmd_reproduce:  # manages its own error reporting
        return args.func(args)
    out_dir = Path(args.out_dir) if getattr(args, "out_dir", None) else None
    try:
        return args.func(args)
    except GaitbacError as exc:
        _emit_error(args.stage, exc, out_dir)
        return EXIT_RUNTIME
    except (OSError, ValueError, KeyError) as exc:
        _emit_error(args.stage, exc, out_dir)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
