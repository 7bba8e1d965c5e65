"""Batch command-line front end.

Commands: simulate, estimate, validate, bench, report. Every command reads
a TOML config (see :mod:`longsurrogate.config`), writes JSON and CSV to the
output directory, and exits with 0 on success, 2 on configuration errors,
3 on data errors, and 4 on estimation or inference errors.

Reports are byte-identical for a fixed config and seed regardless of
``--threads``; wall-clock timings go to a separate ``timings.json``.
"""

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .errors import ConfigError, LongSurrogateError
from .estimators.metrics import compute_metrics
from .estimators.registry import ESTIMATORS, Estimator
from .inference import permutation_test, randomization_bootstrap, subsample_bootstrap
from .numerics.rng import RandomStream
from .panel import (ExperimentWindow, arm_mean_differences, load_panel,
                    pretreatment_balance, save_panel)
from .synthgen import SynthSpec, generate
from .validation import (ValidationReport, comparability_test, parallel_trends_test,
                         sensitivity_omitted_surrogate, sensitivity_surrogate_subsets)

log = logging.getLogger("longsurrogate.cli")

REPORT_KEYS = ("config", "trajectories", "metrics", "validation", "timings", "provenance")
DEFAULT_ESTIMATORS = ("lsm", "ceb", "var")


class Timer:
    def __init__(self):
        self.sections = {}

    def section(self, name):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.start = time.perf_counter()

            def __exit__(self, *exc):
                timer.sections[name] = time.perf_counter() - self.start

        return _Ctx()


def _dump_json(obj, path):
    text = json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _report(cfg, trajectories=None, metrics=None, validation=None, provenance=None,
            extra=None):
    report = {
        "config": cfg.effective() if cfg is not None else None,
        "trajectories": trajectories or {},
        "metrics": metrics or {},
        "validation": validation or {},
        "timings": {"file": "timings.json"},
        "provenance": {"package": "longsurrogate", "version": __version__,
                       "items": provenance or {}},
    }
    if extra:
        report.update(extra)
    return report


def _synth_spec(cfg, fields=None):
    fields = dict(cfg.data["synth"] if fields is None else fields)
    fields.setdefault("seed", cfg.seed)
    fields.setdefault("algorithm", cfg.rng)
    for key, value in cfg.window.items():
        fields[key] = value
    for key in ("weights", "decay", "means", "scales", "mean_prior", "scale_prior"):
        if key in fields and fields[key] is not None:
            fields[key] = tuple(fields[key])
    try:
        return SynthSpec(**fields)
    except TypeError as exc:
        raise ConfigError(f"bad [data.synth] table: {exc}", module="cli") from exc


def resolve_panel(cfg):
    """Load or simulate the configured panel.

    Returns ``(panel, truth or None, source description)``.
    """
    if not cfg.data:
        raise ConfigError("no [data] table in the config", module="cli")
    if "synth" in cfg.data:
        spec = _synth_spec(cfg)
        panel, oracle = generate(spec, threads=cfg.threads)
        return panel, oracle.effects, {"source": "synth", "spec": spec.to_dict(),
                                       "truth": oracle.to_dict()}
    if set(cfg.window) != {"t_experimental", "t_total"}:
        raise ConfigError("[window] needs t_experimental and t_total for file input",
                          module="cli")
    window = ExperimentWindow(cfg.window["t_experimental"], cfg.window["t_total"])
    panel = load_panel(cfg.data["path"], window)
    truth = None
    if panel.has_ground_truth:
        truth = arm_mean_differences(panel, 1, panel.t_total)
    return panel, truth, {"source": "file", "path": str(cfg.data["path"]),
                          "ground_truth": truth is not None}


def _estimators(cfg):
    names = cfg.estimate.get("estimators", list(DEFAULT_ESTIMATORS))
    options = cfg.estimate.get("options", {})
    out = []
    for name in names:
        if name not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {name!r}; choose from {ESTIMATORS}",
                              module="cli")
        opts = dict(options.get(name, {}))
        if name == "knn":
            opts.setdefault("workers", cfg.threads)
        try:
            out.append(Estimator(name, opts))
        except LongSurrogateError as exc:
            raise ConfigError(str(exc), module="cli") from exc
    return out


def _fingerprint_options(est):
    return {k: v for k, v in est.options.items() if k != "workers"}


def _out_dir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(cfg, dump_replicates=False):
    """Write a synthetic panel CSV and its spec/truth sidecar."""
    if "synth" not in cfg.data:
        raise ConfigError("simulate needs a [data.synth] table", module="cli")
    timer = Timer()
    spec = _synth_spec(cfg)
    with timer.section("generate"):
        panel, oracle = generate(spec, threads=cfg.threads)
    out = _out_dir(cfg)
    with timer.section("write"):
        save_panel(panel, out / "panel.csv")
    sidecar = {"spec": spec.to_dict(), "parameters": panel.meta["parameters"],
               "truth": oracle.to_dict()}
    _dump_json(sidecar, out / "panel.spec.json")
    _dump_json(timer.sections, out / "timings.json")
    return sidecar


def _inference(cfg, panel, est, stream, dump):
    inf = cfg.inference
    method = inf.get("method", "none")
    level = float(inf.get("level", 0.95))
    replicas = int(inf.get("replicas", 100))
    if method == "subsample_bootstrap":
        band = subsample_bootstrap(panel, est, replicas=replicas,
                                   fraction=float(inf.get("fraction", 0.5)), seed=stream,
                                   level=level, threads=cfg.threads)
        return band.apply(), band.replicate_estimates, {"band": band.to_dict(dump)}
    if method == "randomization_bootstrap":
        band = randomization_bootstrap(panel, est, M=replicas, seed=stream, level=level,
                                       threads=cfg.threads)
        return band.apply(), None, {"band": band.to_dict(dump)}
    traj = est(panel, stream.substream(0))
    if method == "permutation":
        res = permutation_test(panel, est, M=replicas, seed=stream,
                               period=inf.get("period"), threads=cfg.threads)
        return traj, None, {"permutation": res.to_dict(dump)}
    return traj, None, {}


def cmd_estimate(cfg, dump_replicates=False):
    """Estimate effect trajectories (with optional inference) and score them."""
    timer = Timer()
    with timer.section("data"):
        panel, truth, source = resolve_panel(cfg)
    root = RandomStream(cfg.seed, cfg.rng)
    trajectories, metrics, provenance = {}, {}, {"data": source}
    out = _out_dir(cfg)
    for k, est in enumerate(_estimators(cfg)):
        stream = root.substream(100, k)
        with timer.section(f"estimate.{est.name}"):
            traj, reps, inference = _inference(cfg, panel, est, stream, dump_replicates)
        traj = replace(traj, options={**traj.options, **_fingerprint_options(est)})
        block = traj.to_dict()
        block.update(inference)
        trajectories[est.name] = block
        traj.to_csv(out / f"trajectory_{est.name}.csv")
        if truth is not None:
            metrics[est.name] = compute_metrics(traj, truth, replicas=reps).to_dict()
        provenance[f"trajectories.{est.name}"] = {
            "module": "estimators", "operation": est.name, "seed": cfg.seed,
            "substream": [100, k], "inference": cfg.inference.get("method", "none")}
    if truth is not None:
        metrics["truth"] = [float(v) for v in np.asarray(truth)]
    report = _report(cfg, trajectories, metrics, provenance=provenance)
    _dump_json(report, out / "report.json")
    _dump_json(timer.sections, out / "timings.json")
    return report


def run_validation(cfg, panel, truth, root):
    val = cfg.validation
    n_bins = int(val.get("n_bins", 5))
    rep = ValidationReport()
    if val.get("balance", True):
        rep.balance = pretreatment_balance(panel, float(val.get("expected_treated_fraction", 0.5)))
    for item in val.get("comparability", []):
        rep.comparability += comparability_test(panel, item["t"], item["t_prime"],
                                                item.get("delta", 1), n_bins=n_bins)
    for j, item in enumerate(val.get("parallel_trends", [])):
        rep.parallel_trends.append(parallel_trends_test(
            panel, item["t"], item["t_prime"], item.get("delta", 1), n_bins=n_bins,
            seed=root.substream(200, j), level=float(item.get("level", 0.05))))
    sens_est = Estimator(val.get("sensitivity_estimator", "lsm"))
    if "theta_grid" in val or "subsets" in val:
        if truth is None:
            raise ConfigError("sensitivity analyses need a known truth (synthetic data or "
                              "future outcomes in the file)", module="cli")
    if "theta_grid" in val:
        rep.sensitivity.append(sensitivity_omitted_surrogate(
            panel, sens_est, val["theta_grid"], truth, seed=root.substream(300)))
    if "subsets" in val:
        rep.sensitivity.append(sensitivity_surrogate_subsets(
            panel, sens_est, val["subsets"], truth, seed=root.substream(301)))
    return rep


def cmd_validate(cfg, dump_replicates=False):
    """Run balance, comparability, parallel-trends and sensitivity checks."""
    timer = Timer()
    with timer.section("data"):
        panel, truth, source = resolve_panel(cfg)
    root = RandomStream(cfg.seed, cfg.rng)
    with timer.section("validate"):
        rep = run_validation(cfg, panel, truth, root)
    out = _out_dir(cfg)
    report = _report(cfg, validation=rep.to_dict(),
                     provenance={"data": source,
                                 "validation": {"module": "validation", "seed": cfg.seed}})
    _dump_json(report, out / "validation.json")
    rep.to_csv(out / "validation.csv")
    _dump_json(timer.sections, out / "timings.json")
    return report


def cmd_bench(cfg, dump_replicates=False):
    """Sweep T_E and seeds for a synthetic family and tabulate bias/MSE.

    With ``gammas`` set, also sweeps the comparability-violation family
    through both validation tests.
    """
    bench = cfg.bench
    timer = Timer()
    kind = bench.get("kind", "stabilized1")
    seeds = bench.get("seeds", list(range(int(bench.get("n_seeds", 5)))))
    te_list = [int(v) for v in bench.get("t_experimental", [2, 3, 4])]
    t_total = int(bench.get("t_total", 10))
    n_per_arm = int(bench.get("n_per_arm", 100_000))
    replicas = int(bench.get("replicas", 0))
    fraction = float(bench.get("fraction", 0.5))
    names = bench.get("estimators", list(DEFAULT_ESTIMATORS))
    ests = [Estimator(n, dict(bench.get("options", {}).get(n, {}))) for n in names]
    if not te_list or min(te_list) < 2 or max(te_list) >= t_total:
        raise ConfigError("bench.t_experimental values must lie in 2..t_total-1", module="cli")
    per_seed = {e.name: {te: [] for te in te_list} for e in ests}
    trajectories = {}
    with timer.section("sweep"):
        for seed in seeds:
            spec = SynthSpec(kind=kind, n_per_arm=n_per_arm, t_total=t_total,
                             t_experimental=min(te_list), seed=int(seed),
                             algorithm=cfg.rng, **bench.get("synth", {}))
            panel, oracle = generate(spec, threads=cfg.threads)
            root = RandomStream(int(seed), cfg.rng)
            for te in te_list:
                ds = panel.with_window(te)
                for k, est in enumerate(ests):
                    stream = root.substream(100, k, te)
                    reps = None
                    if replicas:
                        band = subsample_bootstrap(ds, est, replicas=replicas,
                                                   fraction=fraction, seed=stream,
                                                   threads=cfg.threads)
                        traj, reps = band.apply(), band.replicate_estimates
                    else:
                        traj = est(ds, stream.substream(0))
                    m = compute_metrics(traj, oracle, replicas=reps).to_dict()
                    m["seed"] = int(seed)
                    per_seed[est.name][te].append(m)
                    trajectories[f"{est.name}/te{te}/seed{seed}"] = [
                        float(v) for v in traj.estimates]
    table = []
    for est in ests:
        for te in te_list:
            rows = per_seed[est.name][te]
            table.append({
                "estimator": est.name, "t_experimental": te, "n_seeds": len(rows),
                "bias": float(np.mean([r["bias"] for r in rows])),
                "signed_bias": float(np.mean([r["signed_bias"] for r in rows])),
                "mse": float(np.mean([r["mse"] for r in rows])),
                "bias_sd": float(np.std([r["bias"] for r in rows])),
            })
    validation = {}
    if "gammas" in bench:
        with timer.section("gamma_sweep"):
            validation = _gamma_sweep(cfg, bench, seeds)
    out = _out_dir(cfg)
    report = _report(cfg, trajectories, {"table": table, "per_seed": per_seed},
                     validation,
                     provenance={"bench": {"module": "cli", "operation": "bench",
                                           "kind": kind, "seeds": list(map(int, seeds))}})
    _dump_json(report, out / "bench.json")
    with open(out / "bench.csv", "w", encoding="utf-8") as fh:
        fh.write("estimator,t_experimental,n_seeds,bias,signed_bias,mse\n")
        for row in table:
            fh.write(f"{row['estimator']},{row['t_experimental']},{row['n_seeds']},"
                     f"{row['bias']!r},{row['signed_bias']!r},{row['mse']!r}\n")
    _dump_json(timer.sections, out / "timings.json")
    return report


def _gamma_sweep(cfg, bench, seeds):
    pt = bench.get("parallel_trends", {})
    n_per_arm = int(pt.get("n_per_arm", 2000))
    n_bins = int(pt.get("n_bins", 10))
    rows = []
    for gamma in bench["gammas"]:
        for seed in seeds:
            spec = SynthSpec(kind="comparability_violation", n_per_arm=n_per_arm,
                             t_experimental=3, seed=int(seed), gamma=float(gamma),
                             algorithm=cfg.rng)
            panel, _ = generate(spec, threads=cfg.threads)
            res = parallel_trends_test(panel, 2, 3, 1, n_bins=n_bins,
                                       seed=RandomStream(int(seed), cfg.rng).substream(200))
            comp = comparability_test(panel, 2, 3, 1, n_bins=n_bins)
            rows.append({"gamma": float(gamma), "seed": int(seed),
                         "parallel_trends": res.to_dict(),
                         "comparability": [s.to_dict() for s in comp]})
    return {"gamma_sweep": rows, "n_per_arm": n_per_arm, "n_bins": n_bins}


def cmd_report(inputs, out):
    """Merge several JSON reports into one, keyed by input file stem."""
    merged = {key: {} for key in REPORT_KEYS}
    for path in inputs:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"report input not found: {path}", module="cli") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"report input is not JSON: {path}", module="cli") from exc
        stem = Path(path).stem
        label = stem if stem not in merged["config"] else str(path)
        for key in REPORT_KEYS:
            merged[key][label] = data.get(key)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    _dump_json(merged, outdir / "merged_report.json")
    return merged


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "validate": cmd_validate,
            "bench": cmd_bench}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="longsurrogate",
        description="Long-term treatment effects from short-term experiment panels.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "report"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, help="worker threads (results do not change)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--dump-replicates", action="store_true",
                       help="include raw replicate estimates in reports")
        if name == "report":
            p.add_argument("inputs", nargs="+", help="report JSON files to merge")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            cmd_report(args.inputs, args.out or ".")
            return 0
        cfg = load_config(args.config, {"seed": args.seed, "threads": args.threads,
                                        "out": args.out})
        COMMANDS[args.command](cfg, dump_replicates=args.dump_replicates)
    except LongSurrogateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
