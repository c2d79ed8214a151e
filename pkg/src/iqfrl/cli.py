"""``iqfrl`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 run failure (incomplete laps).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .classify import confusion_and_kappa, train_classifier
from .data import CC, CX, SW, DataFormatError, load_config, load_dataset, save_dataset
from .fusion import FUSION_TRACE_FIELDS, run_scenario, scenario_from_json
from .learn import LearnerConfig, match_rate, train
from .rules import QFRParseError, load_kb, save_kb
from .selection import ils_select, score_mask
from .sim.bench import (METRIC_FIELDS, FuzzyController, SimConfig, metrics_report, quality,
                        simulate, trace_to_csv)
from .sim.datagen import MissingSituationError, SamplingConfig, supervisor_dataset
from .sim.world import FIXTURES, EnvFormatError, LaserConfig, load_env

log = logging.getLogger("iqfrl")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUN = 0, 1, 2, 3
DATA_ERRORS = (DataFormatError, QFRParseError, EnvFormatError, MissingSituationError,
               FileNotFoundError, IsADirectoryError, json.JSONDecodeError, ValueError)
SITUATION_FILES = {SW: "sw", CX: "cx", CC: "cc"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- helpers

def _env(name: str):
    if name in FIXTURES:
        return FIXTURES[name]()
    return load_env(name)


def _learner_config(args) -> LearnerConfig:
    cfg = load_config(args.config, LearnerConfig) if args.config else LearnerConfig()
    return replace(cfg, rng_seed=args.seed) if args.seed is not None else cfg


def _counts(text: str) -> dict:
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != 3:
        raise UsageError("--counts takes three comma-separated integers: SW,CX,CC")
    try:
        vals = [int(p) for p in parts]
    except ValueError:
        raise UsageError("--counts values must be integers") from None
    if min(vals) < 0:
        raise UsageError("--counts values must be non-negative")
    return dict(zip((SW, CX, CC), vals))


def _write_manifest(path: Path, args, inputs, outputs, started: float) -> None:
    manifest = {
        "command": args.command,
        "version": __version__,
        "config": getattr(args, "config", None),
        "seed": getattr(args, "seed", None),
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    path.write_text(json.dumps(manifest, indent=2) + "\n")


def _manifest_for(out: Path) -> Path:
    return out / "manifest.json" if out.is_dir() else out.with_name(out.name + ".manifest.json")


def _kbs(args):
    kbs = {}
    for sit, attr in ((SW, "kb_sw"), (CX, "kb_cx"), (CC, "kb_cc")):
        path = getattr(args, attr)
        if path:
            kbs[sit] = load_kb(path)
    if not kbs:
        raise UsageError("at least one of --kb-sw/--kb-cx/--kb-cc is required")
    classifier = load_kb(args.kb_class) if args.kb_class else None
    beams = {kb.variables.n_beams for kb in list(kbs.values()) + ([classifier] if classifier else [])}
    if len(beams) != 1:
        raise DataFormatError("knowledge bases disagree on the beam count")
    return kbs, classifier, beams.pop()


def _inputs(args, *names):
    return [getattr(args, n) for n in names if getattr(args, n, None)]


# ---------------------------------------------------------------- commands

def cmd_gen_data(args) -> int:
    started = time.time()
    env = _env(args.env)
    counts = _counts(args.counts)
    sim = SimConfig(laser=LaserConfig(n_beams=args.beams))
    per, cls = supervisor_dataset(env, counts, np.random.default_rng(args.seed or 0), sim, SamplingConfig())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for sit, name in SITUATION_FILES.items():
        save_dataset(per[sit], out / f"{name}.data")
        written.append(out / f"{name}.data")
    save_dataset(cls, out / "class.data")
    written.append(out / "class.data")
    _write_manifest(out / "manifest.json", args, [args.env], written, started)
    print(" ".join(f"{SITUATION_FILES[s]}={len(per[s])}" for s in per), f"class={len(cls)}")
    return EXIT_OK


def _train_common(args, classifier: bool) -> int:
    started = time.time()
    data = load_dataset(args.dataset)
    cfg = _learner_config(args)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    log_path = out.with_name(out.name + ".log")
    with open(log_path, "w") as fh:
        fh.write("epoch best_fitness uncovered\n")

        def on_epoch(n, fit, uncovered):
            fh.write(f"{n} {fit!r} {uncovered}\n")
            log.info("epoch %d fitness %.6f uncovered %d", n, fit, uncovered)

        if classifier:
            if not data.is_classification:
                raise DataFormatError("train-classifier needs a class dataset")
            kb = train_classifier(data, cfg, on_epoch=on_epoch)
        else:
            if data.is_classification:
                raise DataFormatError("train needs a regression dataset")
            kb = train(data, cfg, on_epoch=on_epoch)
    save_kb(kb, out)
    _write_manifest(_manifest_for(out), args, [args.dataset], [out, log_path], started)
    if classifier:
        _, acc, kappa = confusion_and_kappa(kb, data)
        print(f"rules={len(kb.rules)} accuracy={acc:.4f} kappa={kappa:.4f}")
    else:
        print(f"rules={len(kb.rules)} match_rate={match_rate(kb, data, cfg):.4f}")
    return EXIT_OK


def cmd_train(args) -> int:
    return _train_common(args, classifier=False)


def cmd_train_classifier(args) -> int:
    return _train_common(args, classifier=True)


def cmd_select_rules(args) -> int:
    started = time.time()
    kb = load_kb(args.kb)
    data = load_dataset(args.dataset)
    rng = np.random.default_rng(args.seed or 0)
    sel = ils_select(kb, data, args.radius, args.restarts, rng)
    out = Path(args.out)
    save_kb(sel, out)
    _write_manifest(_manifest_for(out), args, [args.kb, args.dataset], [out], started)
    full = score_mask(kb, np.ones(len(kb.rules), dtype=bool), data) if kb.rules else float("nan")
    kept = score_mask(sel, np.ones(len(sel.rules), dtype=bool), data) if sel.rules else float("nan")
    print(f"rules {len(kb.rules)} -> {len(sel.rules)} score {full:.6f} -> {kept:.6f}")
    return EXIT_OK


def _sim_config(args, n_beams: int) -> SimConfig:
    return SimConfig(laser=LaserConfig(n_beams=n_beams), max_time=args.max_time)


def cmd_simulate(args, write_trace: bool = True) -> int:
    started = time.time()
    kbs, classifier, n_beams = _kbs(args)
    env = _env(args.env)
    sim = _sim_config(args, n_beams)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed or 0)
    controller = FuzzyController(kbs, classifier)
    inputs = [args.env] + _inputs(args, "kb_sw", "kb_cx", "kb_cc", "kb_class")
    if args.scenario:
        scenario = scenario_from_json(Path(args.scenario).read_text())
        res = run_scenario(env, scenario, controller, sim=sim)
        (out / "fusion_trace.csv").write_text(_csv(FUSION_TRACE_FIELDS, res.trace))
        summary = {"collisions": res.collisions, "switches": res.switches,
                   "final_distance": res.final_distance, "min_clearance": res.min_clearance}
        (out / "fusion.json").write_text(json.dumps(summary, indent=2) + "\n")
        _write_manifest(out / "manifest.json", args, inputs + [args.scenario],
                        [out / "fusion_trace.csv", out / "fusion.json"], started)
        print(json.dumps(summary))
        return EXIT_OK
    res = simulate(env, controller, args.laps, sim, rng)
    report = res.report()
    report["environment"] = env.name
    report["uncovered_cycles"] = res.uncovered
    written = [out / "metrics.json"]
    (out / "metrics.json").write_text(json.dumps(report, indent=2) + "\n")
    if write_trace:
        (out / "trace.csv").write_text(trace_to_csv(res.trace))
        written.append(out / "trace.csv")
    _write_manifest(out / "manifest.json", args, inputs, written, started)
    print(format_report(report))
    if res.status != "complete":
        log.error("run incomplete: %d of %d laps", len(res.laps), args.laps)
        return EXIT_RUN
    return EXIT_OK


def cmd_evaluate(args) -> int:
    return cmd_simulate(args, write_trace=False)


def _csv(fields, rows) -> str:
    lines = [",".join(fields)]
    lines += [",".join(repr(x) if isinstance(x, float) else str(x) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


TABLE_COLUMNS = (("Dist", "mean_right_dist"), ("Vel", "mean_vel"), ("Vel.ch", "mean_vel_change"),
                 ("Time", "time"), ("Blockades", "blockades"))


def format_report(report: dict) -> str:
    agg = report["aggregate"]
    cells = [f"{name} {agg[key]['mean']:.2f}±{agg[key]['std']:.2f}" for name, key in TABLE_COLUMNS]
    return f"{report.get('environment', '')} {report['status']} laps={len(report['laps'])} " + \
        " ".join(cells) + f" quality {report['quality']:.4f}"


def aggregate_reports(reports) -> dict:
    """Cross-environment mean and population std of each environment's lap means."""
    if not reports:
        raise ValueError("no metrics reports")
    out = {}
    for key in METRIC_FIELDS:
        vals = np.array([r["aggregate"][key]["mean"] for r in reports], dtype=float)
        out[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
    q = np.array([r["quality"] for r in reports], dtype=float)
    out["quality"] = {"mean": float(q.mean()), "std": float(q.std())}
    return {"environments": [r.get("environment", "") for r in reports], "aggregate": out}


def cmd_quality_report(args) -> int:
    started = time.time()
    reports = [json.loads(Path(p).read_text()) for p in args.metrics]
    table = aggregate_reports(reports)
    header = "metric mean std"
    rows = [f"{name} {table['aggregate'][key]['mean']:.4f} {table['aggregate'][key]['std']:.4f}"
            for name, key in TABLE_COLUMNS + (("Quality", "quality"),)]
    text = "\n".join([header] + rows) + "\n"
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.write_text(json.dumps(table, indent=2) + "\n")
        _write_manifest(_manifest_for(out), args, args.metrics, [out], started)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="iqfrl", description="Quantified fuzzy rule learning workbench")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("gen-data", help="supervisor datasets for an environment")
    g.add_argument("--env", required=True, help="fixture name (%s) or environment file" % ", ".join(FIXTURES))
    g.add_argument("--counts", default="572,540,594", help="SW,CX,CC example counts")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--beams", type=int, default=722)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gen_data)

    for name, func, hlp in (("train", cmd_train, "learn a regression KB"),
                            ("train-classifier", cmd_train_classifier, "learn a situation classifier")):
        t = sub.add_parser(name, help=hlp)
        t.add_argument("dataset")
        t.add_argument("--config")
        t.add_argument("--seed", type=int)
        t.add_argument("--out", required=True, help="output .qfr file")
        t.set_defaults(func=func)

    s = sub.add_parser("select-rules", help="rule subset selection by iterated local search")
    s.add_argument("kb")
    s.add_argument("dataset")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--radius", type=int, default=1)
    s.add_argument("--restarts", type=int, default=2)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_select_rules)

    for name, func, hlp in (("simulate", cmd_simulate, "closed-loop run with trace and metrics"),
                            ("evaluate", cmd_evaluate, "closed-loop run, metrics only")):
        r = sub.add_parser(name, help=hlp)
        r.add_argument("--env", required=True)
        r.add_argument("--kb-sw")
        r.add_argument("--kb-cx")
        r.add_argument("--kb-cc")
        r.add_argument("--kb-class")
        r.add_argument("--laps", type=int, default=1)
        r.add_argument("--seed", type=int, default=0)
        r.add_argument("--max-time", type=float, default=1800.0)
        r.add_argument("--scenario", help="tracking scenario JSON; runs behavior fusion instead of laps")
        r.add_argument("--out", required=True, help="output directory")
        r.set_defaults(func=func)

    q = sub.add_parser("quality-report", help="aggregate metrics across environments")
    q.add_argument("metrics", nargs="+")
    q.add_argument("--out")
    q.set_defaults(func=cmd_quality_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s %(message)s")
        return args.func(args)
    except UsageError as e:
        print(f"iqfrl: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as e:
        print(f"iqfrl: data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
