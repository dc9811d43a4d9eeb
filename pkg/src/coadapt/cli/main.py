"""Command-line entry point: ``coadapt <subcommand> [options]``."""

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from coadapt.agents.qnetwork import QNetwork
from coadapt.agents.trainer import _next_features, backup_weights, train_run
from coadapt.analysis.stability import FeaturePair, simulate_linear_td, stability_spectrum
from coadapt.analysis.trace import MetricTrace
from coadapt.cli.config import (
    PRESET_DOCS,
    PRESETS,
    ExperimentConfig,
    format_flat,
    load_config,
    resolve_config,
)
from coadapt.envdata.dataset import OfflineDataset, collect_dataset, read_dataset, write_dataset
from coadapt.envdata.grid import GridSpec, make_behavior_policy, value_iteration
from coadapt.envdata.observe import observation_table
from coadapt.exceptions import ConfigError, DomainError, NumericError, ShapeError
from coadapt.numerics.mlp import MlpParams
from coadapt.numerics.optim import adam_init
from coadapt.stats import RunScores, iqm, percentile_bootstrap_ci, prob_improvement

__all__ = ["main", "EXIT_OK", "EXIT_CONFIG", "EXIT_NUMERIC", "EXIT_IO"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("coadapt")


class InputError(Exception):
    """Unreadable or malformed input or output file."""


def _setup_logging():
    level_name = os.environ.get("COADAPT_LOG", "info").strip().lower() or "info"
    if level_name not in LOG_LEVELS:
        raise ConfigError(f"COADAPT_LOG must be one of {sorted(LOG_LEVELS)}, got {level_name!r}")
    log.setLevel(LOG_LEVELS[level_name])
    if not log.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
        log.addHandler(handler)


def _experiment(args):
    flat = load_config(args.config) if args.config else {}
    flat = resolve_config(args.preset, flat)
    return ExperimentConfig.from_flat(flat, seeds=args.seed)


def _out_dir(args):
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc.strerror or exc}") from None
    return out


def _write(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror or exc}") from None


def _behavior(grid, p_opt):
    return make_behavior_policy(value_iteration(grid), p_opt)


def _generate(exp):
    policy = _behavior(exp.grid, exp.p_opt)
    ds = collect_dataset(exp.grid, exp.obs_map, policy, exp.data_n, exp.max_episode_len, exp.data_seed)
    meta = dict(ds.metadata, p_opt=exp.p_opt)
    return OfflineDataset(ds.transitions, ds.episode_starts, meta), policy


def _load_dataset(path):
    try:
        return read_dataset(path)
    except OSError as exc:
        raise InputError(f"cannot read dataset {path}: {exc.strerror or exc}") from None
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(str(exc)) from None


def _dataset_behavior(ds):
    meta = ds.metadata
    try:
        grid = GridSpec.from_strings(meta["grid"], tuple(meta["start"]), meta["gamma"], meta.get("env", "custom"))
        p_opt = float(meta["p_opt"])
    except KeyError as exc:
        raise ConfigError(f"dataset metadata lacks {exc}; cannot rebuild the behavior policy") from None
    return grid, _behavior(grid, p_opt)


def cmd_gen_data(args):
    exp = _experiment(args)
    out = _out_dir(args)
    ds, _ = _generate(exp)
    path = out / "dataset.txt"
    try:
        write_dataset(ds, path)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror or exc}") from None
    rewards = sum(t.reward for t in ds.transitions)
    print(f"wrote {path}")
    print(f"transitions: {len(ds)}  episodes: {len(ds.episode_starts)}  total reward: {rewards:g}")
    print(f"env: {ds.metadata['env']}  policy: {ds.metadata['policy']}  gamma: {ds.metadata['gamma']}")
    return EXIT_OK


def _save_params(net, path):
    arrays = {f"w{k}": w for k, w in enumerate(net.params.weights)}
    arrays.update({f"b{k}": b for k, b in enumerate(net.params.biases)})
    meta = json.dumps({"head_mode": net.head_mode, "n_actions": net.n_actions, "n_heads": net.n_heads, "step": net.step})
    try:
        np.savez(path, meta=np.array(meta), **arrays)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror or exc}") from None


def load_params(path):
    """Read a parameter file written by ``train`` into a :class:`QNetwork`."""
    try:
        with np.load(path) as z:
            meta = json.loads(str(z["meta"]))
            n = sum(1 for k in z.files if k.startswith("w"))
            weights = tuple(z[f"w{k}"] for k in range(n))
            biases = tuple(z[f"b{k}"] for k in range(n))
    except (OSError, KeyError, ValueError) as exc:
        raise InputError(f"cannot read parameters {path}: {exc}") from None
    params = MlpParams(weights, biases, meta["head_mode"])
    return QNetwork(params, params.copy(), adam_init(params), meta["n_actions"], meta["n_heads"], meta["step"])


def _check_compatible(ds, exp):
    dim = ds.arrays["obs"].shape[1]
    expected = observation_table(exp.obs_map, exp.grid).shape[1]
    if dim != expected:
        raise ConfigError(f"dataset observations have width {dim} but the config produces {expected}")


def _file_label(label, seed):
    safe = label.replace("=", "-").replace(",", "_").replace("/", "_")
    return f"{safe}_seed{seed}"


def cmd_train(args):
    exp = _experiment(args)
    if args.data:
        ds = _load_dataset(args.data)
        _check_compatible(ds, exp)
        grid, policy = _dataset_behavior(ds)
    else:
        ds, policy = _generate(exp)
        grid = exp.grid
    out = _out_dir(args)
    if not args.data:
        write_dataset(ds, out / "dataset.txt")
    jobs = [(v, s) for v in exp.variants for s in exp.seeds]

    def run(job):
        variant, seed = job
        cfg = replace(variant.train, seed=seed)
        log.info("training %s seed %d for %d steps", variant.label, seed, cfg.total_steps)
        net, trace = train_run(ds, cfg, policy, grid, exp.obs_map)
        trace.metadata.update({"variant": variant.label, "seed": seed, "preset": exp.preset,
                               "experiment": format_flat(variant.flat)})
        name = _file_label(variant.label, seed)
        _write(out / f"{name}.csv", trace.to_csv())
        _save_params(net, out / f"{name}.params.npz")
        if trace.diverged:
            log.warning("%s seed %d diverged at step %d", variant.label, seed, trace.records[-1].step)
        return trace

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            traces = list(pool.map(run, jobs))
    else:
        traces = [run(j) for j in jobs]
    print(f"wrote {len(traces)} traces to {out}")
    if traces and all(t.diverged for t in traces):
        log.error("every run diverged")
        return EXIT_NUMERIC
    return EXIT_OK


def _read_trace(path):
    try:
        return MetricTrace.from_csv(Path(path))
    except OSError as exc:
        raise InputError(f"cannot read trace {path}: {exc.strerror or exc}") from None
    except (ValueError, json.JSONDecodeError) as exc:
        raise InputError(str(exc)) from None


def _csv_text(header, rows, meta):
    buf = io.StringIO()
    buf.write("# meta " + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def cmd_analyze(args):
    if not args.traces:
        raise ConfigError("analyze needs at least one trace file")
    groups = {}
    for path in args.traces:
        trace = _read_trace(path)
        if not trace.records:
            log.warning("%s has no checkpoints; skipped", path)
            continue
        task = (trace.metadata.get("dataset") or {}).get("env") or "task"
        alg = trace.metadata.get("variant") or Path(path).stem
        if args.algorithm_from == "file":
            alg = Path(path).stem.rsplit("_seed", 1)[0]
        final = float(trace.final(args.metric))
        avg = float(trace.average(args.metric))
        groups.setdefault(alg, {}).setdefault(task, []).append((final, avg))
    if not groups:
        raise ConfigError("no trace had any checkpoint")
    out = _out_dir(args)
    summary = []
    finals = {}
    for alg in sorted(groups):
        finals[alg] = {}
        for task in sorted(groups[alg]):
            pairs = groups[alg][task]
            f = np.array([p[0] for p in pairs])
            a = np.array([p[1] for p in pairs])
            ok = np.isfinite(f)
            finals[alg][task] = f[ok]
            if ok.any():
                lo, hi = percentile_bootstrap_ci(f[ok], args.resamples, args.level, rng=args.bootstrap_seed)
                stats_f = (float(np.mean(f[ok])), iqm(f[ok]), lo, hi)
            else:
                stats_f = (float("nan"),) * 4
            a_ok = a[np.isfinite(a)]
            avg_stats = (float(np.mean(a_ok)), iqm(a_ok)) if a_ok.size else (float("nan"),) * 2
            summary.append((task, alg, len(pairs), *stats_f, *avg_stats))
    meta = {"metric": args.metric, "bootstrap": "percentile, non-stratified", "resamples": args.resamples,
            "level": args.level, "bootstrap_seed": args.bootstrap_seed}
    header = ("task", "algorithm", "n", "mean", "iqm", "ci_lo", "ci_hi", "avg_mean", "avg_iqm")
    _write(out / "summary.csv", _csv_text(header, summary, meta))
    rows = []
    algs = sorted(groups)
    for a in algs:
        for b in algs:
            if a == b:
                continue
            xa = {t: v for t, v in finals[a].items() if v.size}
            xb = {t: v for t, v in finals[b].items() if v.size}
            if set(xa) != set(xb) or not xa:
                log.warning("skipping %s vs %s: task sets differ", a, b)
                continue
            rows.append((a, b, prob_improvement(RunScores(xa), RunScores(xb))))
    _write(out / "comparison.csv", _csv_text(("alg_a", "alg_b", "p_improve"), rows, meta))
    for row in summary:
        print(f"{row[1]:<40} n={row[2]:<3} mean={row[3]:.6g} iqm={row[4]:.6g} ci=[{row[5]:.6g}, {row[6]:.6g}]")
    return EXIT_OK


def _load_matrix(path):
    p = Path(path)
    try:
        if p.suffix == ".npy":
            return np.load(p)
        return np.loadtxt(p, delimiter=",", ndmin=2, comments="#")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def _pair_from_args(args):
    if args.features:
        try:
            with np.load(args.features) as z:
                phi, phi_next = z["phi"], z["phi_next"]
                gamma = float(z["gamma"]) if "gamma" in z.files and args.gamma is None else args.gamma
                rewards = z["rewards"] if "rewards" in z.files else None
        except (OSError, KeyError, ValueError) as exc:
            raise InputError(f"cannot read features {args.features}: {exc}") from None
        return phi, phi_next, gamma, rewards
    if args.phi and args.phi_next:
        rewards = _load_matrix(args.rewards).reshape(-1) if args.rewards else None
        return _load_matrix(args.phi), _load_matrix(args.phi_next), args.gamma, rewards
    if args.data and args.params:
        ds = _load_dataset(args.data)
        net = load_params(args.params)
        arrays = ds.arrays
        gamma = args.gamma if args.gamma is not None else float(ds.gamma)
        policy = _dataset_behavior(ds)[1] if args.selector == "expected" else None
        n = len(ds)
        try:
            target_q = net.evaluate(arrays["next_obs"], target=True).q.mean(axis=1)
            w = backup_weights(args.selector, arrays, target_q, policy)
            feats = net.evaluate(np.concatenate([arrays["obs"], arrays["next_obs"]])).features
        except ShapeError as exc:
            raise ConfigError(f"dataset and parameters disagree: {exc}") from None
        phi = feats[np.arange(n), arrays["action"]]
        return phi, _next_features(feats[n:], w), gamma, arrays["reward"]
    raise ConfigError("stability needs --features, --phi with --phi-next, or --data with --params")


def cmd_stability(args):
    phi, phi_next, gamma, rewards = _pair_from_args(args)
    if gamma is None:
        raise ConfigError("stability needs --gamma")
    try:
        pair = FeaturePair(phi, phi_next, gamma)
    except (ShapeError, DomainError) as exc:
        raise ConfigError(f"invalid features: {exc}") from None
    report = stability_spectrum(pair, args.tol)
    lines = [f"instances: {pair.n} rows, {pair.dim} features, gamma {gamma!r}", *report.summary_lines()]
    if args.simulate:
        r = np.ones(pair.n) if rewards is None else np.asarray(rewards, dtype=np.float64)
        sim = simulate_linear_td(pair, r, args.eta, args.steps)
        outcome = "converged" if sim.converged else "diverged" if sim.diverged else "inconclusive"
        agrees = (report.verdict == "stable") == sim.converged if report.verdict != "borderline" else None
        lines += [
            f"simulation: {outcome} after {args.steps} steps at eta {args.eta!r}",
            f"simulation_final_error: {sim.final_error!r}",
            f"agreement: {'n/a' if agrees is None else str(agrees).lower()}",
        ]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        out = _out_dir(args)
        rows = [(float(v.real), float(v.imag)) for v in report.eigenvalues]
        meta = {"verdict": report.verdict, "trace_condition": report.trace_condition_holds, "gamma": gamma,
                "tolerance": report.tol}
        _write(out / "stability.csv", _csv_text(("real", "imag"), rows, meta))
        _write(out / "stability.txt", text)
    return EXIT_OK


def cmd_list_presets(args):
    for name in sorted(PRESETS):
        print(f"{name}: {PRESET_DOCS[name]}")
        if args.verbose:
            for key, value in sorted(PRESETS[name].items()):
                print(f"    {key} = {value}")
    return EXIT_OK


def _common(p, out_default="runs"):
    p.add_argument("--config", metavar="PATH", help="flat key = value config file")
    p.add_argument("--preset", metavar="NAME", help="built-in preset (see list-presets)")
    p.add_argument("--seed", metavar="S", type=int, action="append", help="training seed; repeatable")
    p.add_argument("--out", metavar="DIR", default=out_default, help="output directory")
    p.add_argument("--jobs", metavar="K", type=int, default=1, help="parallel runs")


def build_parser():
    parser = argparse.ArgumentParser(prog="coadapt", description="Feature co-adaptation experiments for offline TD learning.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="collect an offline dataset")
    _common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train every variant and seed; one trace CSV each")
    _common(p)
    p.add_argument("--data", metavar="PATH", help="existing dataset file (generated from the config otherwise)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("analyze", help="summarise trace CSVs")
    _common(p, "analysis")
    p.add_argument("traces", nargs="*", metavar="TRACE")
    p.add_argument("--metric", default="eval_return", help="trace column to score")
    p.add_argument("--resamples", type=int, default=10_000)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--bootstrap-seed", type=int, default=0)
    p.add_argument("--algorithm-from", choices=("metadata", "file"), default="metadata")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("stability", help="spectral convergence test for linear TD on fixed features")
    _common(p, "")
    p.add_argument("--features", metavar="NPZ", help="archive with phi, phi_next and optional gamma, rewards")
    p.add_argument("--phi", metavar="CSV")
    p.add_argument("--phi-next", metavar="CSV")
    p.add_argument("--rewards", metavar="CSV")
    p.add_argument("--data", metavar="PATH", help="dataset file, used with --params")
    p.add_argument("--params", metavar="NPZ", help="parameter file written by train")
    p.add_argument("--selector", default="sarsa", choices=("sarsa", "expected", "max", "mc"))
    p.add_argument("--gamma", type=float)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--simulate", action="store_true", help="also run linear TD and report agreement")
    p.add_argument("--eta", type=float, default=1e-3)
    p.add_argument("--steps", type=int, default=200_000)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("list-presets", help="show the built-in presets")
    _common(p)
    p.add_argument("--verbose", "-v", action="store_true")
    p.set_defaults(func=cmd_list_presets)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _setup_logging()
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InputError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
