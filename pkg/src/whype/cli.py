"""Command-line entry point: ``whype optimize | experiment | cost``.

Every output file gets a ``<name>.meta.json`` sidecar with the resolved
configuration, its hash, the seed and the hashes of all input files. Nothing
in the outputs depends on wall-clock time or worker count, so identical
invocations write identical bytes. All inputs are parsed and validated before
any computation starts and outputs are only written once everything has run.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .channel import ChannelModel, PackageGeometry, channel_csv, load_channel, synth_channel
from .coding import EXHAUSTIVE_MAX_M, BerReport, PhaseAssignment, evaluate, optimize_phases
from .cost import CostTables, SystemConfig, compare, sweep_rx
from .experiments import (EncodedClassSet, EpisodeConfig, SessionConfig, SyntheticClassSet,
                          ber_accuracy_sweep, results_csv, run_continual, run_few_shot, traces_csv)

SEED_ENV = "WHYPE_SEED"


class UsageError(ValueError):
    pass


# -- helpers --

def resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None


def parse_range(text: str, kind=float) -> list:
    """``start:stop:step`` inclusive of ``stop`` (within rounding)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"expected start:stop:step, got {text!r}")
    try:
        start, stop, step = (kind(p) for p in parts)
    except ValueError:
        raise UsageError(f"bad number in range {text!r}") from None
    if step <= 0 or stop < start:
        raise UsageError(f"range {text!r} needs step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [kind(round(start + i * step, 12)) for i in range(count)]


def parse_rx_sweep(text: str) -> list[int]:
    """``lo:hi`` doubles from ``lo`` up to ``hi``; ``lo:hi:step`` is linear."""
    parts = text.split(":")
    if len(parts) == 3:
        return parse_range(text, int)
    if len(parts) != 2:
        raise UsageError(f"expected lo:hi or lo:hi:step, got {text!r}")
    try:
        lo, hi = int(parts[0]), int(parts[1])
    except ValueError:
        raise UsageError(f"bad receiver range {text!r}") from None
    if lo < 1 or hi < lo:
        raise UsageError(f"receiver range {text!r} needs 1 <= lo <= hi")
    out = [lo]
    while out[-1] * 2 <= hi:
        out.append(out[-1] * 2)
    return out


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _existing(path: str | None, what: str) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} file not found: {path}")
    return p


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def write_outputs(out_dir: Path, files: dict[str, str], config: dict, seed: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    h = config_hash(config)
    for name, text in files.items():
        (out_dir / name).write_text(text)
        meta = {"file": name, "config_hash": h, "seed": seed, "version": __version__,
                "sha256": hashlib.sha256(text.encode()).hexdigest(), "config": config}
        (out_dir / f"{name}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _base_config(args, seed: int, inputs: dict[str, Path | None]) -> dict:
    skip = {"func", "out", "workers", "seed"} | set(inputs)
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    cfg["seed"] = seed
    cfg["inputs"] = {k: (_file_hash(p) if p is not None else None) for k, p in inputs.items()}
    return cfg


# -- optimize --

def cmd_optimize(args) -> int:
    seed = resolve_seed(args.seed)
    channel_path = _existing(args.channel, "channel")
    geometry_path = _existing(args.geometry, "geometry")
    assignment_path = _existing(args.assignment, "assignment")
    if channel_path and geometry_path:
        raise UsageError("give either --channel or --geometry, not both")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")

    if channel_path:
        ch = load_channel(channel_path)
        synthesized = False
    else:
        if geometry_path:
            geom = PackageGeometry.load(geometry_path)
        else:
            if args.tx is None or args.rx is None:
                raise UsageError("need --channel, --geometry, or both --tx and --rx")
            geom = PackageGeometry.default(args.tx, args.rx, jitter_mm=args.jitter, seed=seed)
        model = ChannelModel(args.path_loss_exp, args.reflections, args.reflection_loss)
        synthesized = True
    M, N = (ch.M, ch.N) if channel_path else (geom.M, geom.N)
    if args.tx is not None and args.tx != M:
        raise UsageError(f"--tx {args.tx} but the channel has {M} transmitters")
    if args.rx is not None and args.rx != N:
        raise UsageError(f"--rx {args.rx} but the channel has {N} receivers")
    assignment = PhaseAssignment.load(assignment_path) if assignment_path else None
    if assignment is not None and assignment.M != M:
        raise UsageError(f"assignment has {assignment.M} transmitters, channel has {M}")
    if assignment is None and args.method == "exhaustive" and M > EXHAUSTIVE_MAX_M:
        raise UsageError(f"exhaustive search is limited to {EXHAUSTIVE_MAX_M} transmitters "
                         f"((8*7)^{M} candidates); use --method greedy or --method random")
    if args.noise_psd is not None and args.noise_psd <= 0:
        raise UsageError("--noise-psd must be positive")
    if synthesized:
        ch, _ = synth_channel(geom, model, noise_psd=args.noise_psd)
    elif args.noise_psd is not None:
        ch = type(ch)(ch.gains, ch.freq_hz, ch.tx_power_dbm, args.noise_psd)

    if assignment is None:
        assignment, report = optimize_phases(ch, args.method, k=args.k, seed=seed, workers=args.workers,
                                             regions=args.regions)
    else:
        report = evaluate(ch, assignment, args.regions, seed=seed)

    files = {"assignment.json": assignment.to_json(), "ber.csv": report.to_csv()}
    if synthesized:
        files["channel.csv"] = channel_csv(ch)
    config = _base_config(args, seed, {"channel": channel_path, "geometry": geometry_path,
                                       "assignment": assignment_path})
    write_outputs(Path(args.out), files, config, seed)
    consistent = int(np.count_nonzero(report.consistent)) if report.consistent is not None else N
    print(f"assignment {[list(p) for p in assignment.pairs]}")
    print(f"average BER {report.average:.6e} ({consistent}/{N} receivers consistent)")
    return 0


# -- experiment --

def _class_set(args, seed: int, dataset: Path | None):
    if dataset is not None:
        return EncodedClassSet.load(dataset)
    return SyntheticClassSet(class_count=args.class_count, intra_class_flip=args.flip, seed=seed)


def _receiver_bers(args, ber_report: Path | None):
    if args.channel_model == "ideal":
        if args.ber is not None or ber_report is not None:
            raise UsageError("--ber/--ber-report need --channel-model wireless")
        return None
    if (args.ber is None) == (ber_report is None):
        raise UsageError("--channel-model wireless needs exactly one of --ber or --ber-report")
    if ber_report is not None:
        return BerReport.from_csv(ber_report).per_rx
    if not 0 <= args.ber <= 0.5:
        raise UsageError(f"--ber {args.ber} outside [0, 0.5]")
    return args.ber


def cmd_experiment(args) -> int:
    seed = resolve_seed(args.seed)
    dataset = _existing(args.dataset, "dataset")
    ber_report = _existing(args.ber_report, "BER report")
    bers = _receiver_bers(args, ber_report)
    config = _base_config(args, seed, {"dataset": dataset, "ber_report": ber_report})
    class_set = _class_set(args, seed, dataset)
    common = dict(classes_per_episode=args.classes, episodes=args.episodes, mode=args.mode,
                  channel=args.channel_model, ber_per_rx=bers, rx_count=args.rx_count,
                  capacity=args.capacity, support=args.support, stride=args.stride, seed=seed)

    files: dict[str, str] = {}
    if args.kind == "few-shot":
        bundles = parse_int_list(args.bundle)
        if not bundles:
            raise UsageError("--bundle needs at least one value")
        cfgs = [EpisodeConfig(bundle=m, shots=args.shots or 20, **common) for m in bundles]
        for c in cfgs:
            _check_episode(c, class_set)
        rows, traces = [], []
        for c in cfgs:
            res = run_few_shot(c, class_set, trace_episodes=args.traces)
            rows.append({**res.meta, "accuracy": res.accuracy, "stderr": res.stderr})
            traces += res.traces
            print(f"M={c.bundle} {c.mode} {c.channel}: accuracy {res.accuracy:.4f} +- {res.stderr:.4f}")
        files["few_shot.csv"] = results_csv(rows)
        if args.traces:
            files["traces.csv"] = traces_csv(traces)
    elif args.kind == "sweep-ber":
        points = parse_range(args.points)
        if points[0] < 0 or points[-1] > 0.5:
            raise UsageError("BER points must lie in [0, 0.5]")
        cfg = EpisodeConfig(bundle=1, shots=args.shots or 20,
                            **{**common, "channel": "ideal", "ber_per_rx": None})
        _check_episode(cfg, class_set)
        results = ber_accuracy_sweep(cfg, class_set, points)
        lines = ["ber,accuracy,stderr"] + [f"{float(p)!r},{float(r.accuracy)!r},{float(r.stderr)!r}" for p, r in zip(points, results)]
        files["ber_sweep.csv"] = "\n".join(lines) + "\n"
        for p, r in zip(points, results):
            print(f"BER {p:.3f}: accuracy {r.accuracy:.4f}")
    else:
        bundles = parse_int_list(args.bundle)
        if len(bundles) != 1:
            raise UsageError("continual learning takes a single --bundle value")
        if args.sessions < 1:
            raise UsageError("--sessions must be >= 1")
        scfg = SessionConfig(initial_classes=args.initial_classes, classes_per_session=args.per_session,
                             shots=args.shots or 5, sessions=args.sessions, queries_per_session=args.queries)
        last = scfg.initial_classes + (scfg.sessions - 1) * scfg.classes_per_session
        if last > class_set.class_count:
            raise UsageError(f"{scfg.sessions} sessions need {last} classes, dataset has {class_set.class_count}")
        if math.ceil(last / args.rx_count) > args.capacity:
            raise UsageError(f"{last} classes exceed {args.rx_count} engines x {args.capacity} entries")
        curve = run_continual(scfg, class_set, bundle=bundles[0], mode=args.mode, channel=args.channel_model,
                              ber_per_rx=bers, rx_count=args.rx_count, capacity=args.capacity,
                              stride=args.stride, seed=seed)
        lines = ["session,classes,accuracy,stderr"]
        lines += [f"{r['session']},{r['classes']},{float(r['accuracy'])!r},{float(r['stderr'])!r}" for r in curve]
        files["continual.csv"] = "\n".join(lines) + "\n"
        for r in curve:
            print(f"session {r['session']} ({r['classes']} classes): accuracy {r['accuracy']:.4f}")
    write_outputs(Path(args.out), files, config, seed)
    return 0


def _check_episode(cfg: EpisodeConfig, class_set) -> None:
    if cfg.bundle < 1 or cfg.bundle % 2 == 0:
        raise UsageError(f"bundle size must be odd, got {cfg.bundle}")
    if cfg.classes_per_episode > class_set.class_count:
        raise UsageError(f"{cfg.classes_per_episode} classes per episode but the dataset has "
                         f"{class_set.class_count}")
    if cfg.bundle > cfg.classes_per_episode:
        raise UsageError(f"cannot bundle {cfg.bundle} distinct classes out of {cfg.classes_per_episode}")
    per_class = cfg.shots if cfg.support == "per-shot" else 1
    need = math.ceil(cfg.classes_per_episode / cfg.rx_count) * per_class
    if need > cfg.capacity:
        raise UsageError(f"{cfg.classes_per_episode} classes x {per_class} entries over {cfg.rx_count} "
                         f"engines need {need} entries per engine, capacity is {cfg.capacity}")
    if cfg.episodes < 1:
        raise UsageError("--episodes must be >= 1")
    cfg.receiver_bers()


# -- cost --

def cmd_cost(args) -> int:
    seed = resolve_seed(args.seed)
    tables_path = _existing(args.tables, "cost tables")
    tables = CostTables.load(tables_path) if tables_path else CostTables()
    n_values = parse_rx_sweep(args.sweep_rx) if args.sweep_rx else None
    cfg = SystemConfig(M=args.tx, N=args.rx, d=args.dim)
    config = _base_config(args, seed, {"tables": tables_path})

    cmp = compare(cfg, tables)
    wired, wireless = cmp["wired"], cmp["wireless"]
    files = {"cost_breakdown.csv": wired.to_csv() + "".join(wireless.to_csv().splitlines(True)[1:])}
    lines = ["metric,wired,wireless,ratio"]
    metrics = [
        ("interconnect_area_mm2", wired.area("interconnect"), wireless.area("interconnect"), "interconnect_area"),
        ("interconnect_energy_pj", wired.energy("interconnect"), wireless.energy("interconnect"),
         "interconnect_energy"),
        ("total_area_mm2", wired.area(), wireless.area(), "total_area"),
        ("total_energy_pj", wired.energy(), wireless.energy(), "total_energy"),
        ("latency_ns", wired.latency_ns, wireless.latency_ns, "latency"),
        ("throughput_gbps", wired.throughput_gbps, wireless.throughput_gbps, "throughput"),
    ]
    lines += [f"{name},{float(a)!r},{float(b)!r},{float(cmp['ratios'][key])!r}" for name, a, b, key in metrics]
    files["cost_compare.csv"] = "\n".join(lines) + "\n"
    if n_values:
        rows = sweep_rx(args.tx, n_values, tables, d=args.dim)
        keys = list(rows[0])
        files["cost_sweep.csv"] = "\n".join([",".join(keys)] + [",".join(str(r[k]) if k == "N" else repr(float(r[k])) for k in keys)
                                                                  for r in rows]) + "\n"
    write_outputs(Path(args.out), files, config, seed)
    print(wired.pretty())
    print(wireless.pretty())
    print(f"interconnect area ratio {cmp['ratios']['interconnect_area']:.2f}x, "
          f"energy ratio {cmp['ratios']['interconnect_energy']:.2f}x")
    return 0


# -- parser --

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="whype", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help=f"master seed (default ${SEED_ENV} or 0)")
        sp.add_argument("--out", default="results", help="output directory")
        sp.add_argument("--workers", type=int, default=1)

    op = sub.add_parser("optimize", help="choose per-transmitter phase pairs for a channel")
    common(op)
    op.add_argument("--geometry", help="geometry JSON")
    op.add_argument("--channel", help="channel CSV (overrides synthesis)")
    op.add_argument("--assignment", help="evaluate this assignment JSON instead of optimizing")
    op.add_argument("--method", choices=["exhaustive", "random", "greedy"], default="exhaustive")
    op.add_argument("--regions", choices=["supervised", "kmeans"], default="supervised")
    op.add_argument("--k", type=int, default=1000, help="candidates for --method random")
    op.add_argument("--tx", type=int)
    op.add_argument("--rx", type=int)
    op.add_argument("--jitter", type=float, default=0.0, help="antenna jitter (mm) for the default layout")
    op.add_argument("--reflections", type=int, default=0)
    op.add_argument("--reflection-loss", type=float, default=0.5)
    op.add_argument("--path-loss-exp", type=float, default=1.0)
    op.add_argument("--noise-psd", type=float, default=None, help="noise power (W); default thermal")
    op.set_defaults(func=cmd_optimize)

    ep = sub.add_parser("experiment", help="few-shot, BER sweep and continual-learning runs")
    ep.add_argument("kind", choices=["few-shot", "sweep-ber", "continual"])
    common(ep)
    ep.add_argument("--bundle", default="1", help="bundle size, or comma list for few-shot")
    ep.add_argument("--mode", choices=["baseline", "permuted"], default="permuted")
    ep.add_argument("--channel-model", choices=["ideal", "wireless"], default="ideal")
    ep.add_argument("--ber", type=float, help="BER applied at every receiver")
    ep.add_argument("--ber-report", help="per-receiver BER CSV from optimize")
    ep.add_argument("--dataset", help="encoded hypervectors, one '<label>,<bits>' per line")
    ep.add_argument("--class-count", type=int, default=659, help="synthetic classes")
    ep.add_argument("--flip", type=float, default=0.05, help="synthetic intra-class flip rate")
    ep.add_argument("--classes", type=int, default=100, help="classes per episode")
    ep.add_argument("--episodes", type=int, default=1000)
    ep.add_argument("--shots", type=int, default=None, help="default 20 (few-shot) or 5 (continual)")
    ep.add_argument("--support", choices=["prototype", "per-shot"], default="prototype")
    ep.add_argument("--rx-count", type=int, default=64)
    ep.add_argument("--capacity", type=int, default=64)
    ep.add_argument("--stride", type=int, default=1)
    ep.add_argument("--traces", type=int, default=0, help="episodes to trace (few-shot)")
    ep.add_argument("--points", default="0:0.5:0.02", help="BER grid start:stop:step")
    ep.add_argument("--sessions", type=int, default=10)
    ep.add_argument("--initial-classes", type=int, default=64)
    ep.add_argument("--per-session", type=int, default=64)
    ep.add_argument("--queries", type=int, default=300, help="queries per session")
    ep.set_defaults(func=cmd_experiment)

    cp = sub.add_parser("cost", help="wired vs wireless area, energy, latency and throughput")
    common(cp)
    cp.add_argument("--tx", type=int, default=3)
    cp.add_argument("--rx", type=int, default=8)
    cp.add_argument("--dim", type=int, default=512)
    cp.add_argument("--tables", help="JSON overriding component cost tables")
    cp.add_argument("--sweep-rx", help="receiver counts, lo:hi (doubling) or lo:hi:step")
    cp.set_defaults(func=cmd_cost)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"whype {args.command}: error: {exc}", file=sys.stderr)
        return 2
