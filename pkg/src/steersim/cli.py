"""``steersim`` command line.

Every command reads one JSON run config (``--config``), writes into ``--out``
and leaves a ``*.manifest.json`` beside its artifacts carrying the config hash
and record counts. Re-running with the same config reproduces every file
byte for byte.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .config import RunConfig
from .errors import SteersimError
from .flowdata import VOLUME_THRESHOLDS, read_flows, write_flows
from .flowgen import gen_flows
from .mobility import evaluate_mobility, mine_trajectories
from .predictors import (
    load_coverage_predictor,
    load_traffic_predictor,
    save_coverage_predictor,
    save_traffic_predictor,
    threshold_tag,
    train_coverage_predictor,
    train_traffic_predictor,
)
from .radioenv import (
    calibrate_environment,
    gen_radio_samples,
    gen_trajectories,
    read_samples,
    read_trajectories,
    write_samples,
    write_trajectories,
)
from .report import roc_svg, steering_svg, write_svg
from .steering import (
    RANDOM,
    ScenarioGenerator,
    curves_csv,
    measurement_savings,
    run_steering,
    savings_csv,
)

log = logging.getLogger("steersim")

HELD_OUT_ID_BASE = 1_000_000
_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class CommandError(SteersimError):
    """A command could not run with the inputs it was given."""


def _setup_logging() -> None:
    name = os.environ.get("STEERSIM_LOG", "error").lower()
    level = _LEVELS.get(name)
    logging.basicConfig(level=level or logging.ERROR, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr, force=True)
    if level is None:
        log.error("STEERSIM_LOG=%r not recognised; using 'error'", name)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_manifest(out: Path, name: str, cfg: RunConfig, command: str, **fields) -> Path:
    path = out / f"{name}.manifest.json"
    path.write_text(_dump({"command": command, "config_hash": cfg.hash, "seed": cfg.seed, **fields}),
                    encoding="utf-8")
    return path


def _require(path: Path, what: str) -> Path:
    if not path.is_file():
        raise CommandError(f"{what} not found: {path}")
    return path


# -- commands ----------------------------------------------------------------

def cmd_gen_flows(cfg: RunConfig, out: Path, args) -> int:
    flows = gen_flows(cfg.flows)
    write_flows(flows, out / "flows.jsonl")
    heavy = sum(f.total_volume > 10_000 for f in flows)
    _write_manifest(out, "flows", cfg, "gen-flows", file="flows.jsonl", records=len(flows),
                    heavy_10kB=heavy)
    log.info("wrote %d flows", len(flows))
    return 0


def cmd_gen_radio(cfg: RunConfig, out: Path, args) -> int:
    env = calibrate_environment(cfg.env)
    samples = gen_radio_samples(env, cfg.radio.n_samples)
    write_samples(samples, out / "radio.jsonl")
    covered = sum(s.covered for s in samples)
    _write_manifest(out, "radio", cfg, "gen-radio", file="radio.jsonl", records=len(samples),
                    covered=covered, coverage_threshold_dBm=env.coverage_threshold_dBm)
    log.info("wrote %d radio samples (%d covered)", len(samples), covered)
    return 0


def cmd_gen_trajectories(cfg: RunConfig, out: Path, args) -> int:
    t = cfg.trajectories
    kw = dict(samples_per_trajectory=t.samples_per_trajectory, jitter_m=t.jitter_m, period_s=t.period_s)
    train = gen_trajectories(cfg.env, t.routes, t.devices_per_route, **kw)
    held = gen_trajectories(cfg.env, t.routes, t.held_out_per_route, first_device_id=HELD_OUT_ID_BASE, **kw)
    write_trajectories(train, out / "trajectories.jsonl")
    write_trajectories(held, out / "trajectories_heldout.jsonl")
    _write_manifest(out, "trajectories", cfg, "gen-trajectories",
                    files={"train": "trajectories.jsonl", "held_out": "trajectories_heldout.jsonl"},
                    records={"train": len(train), "held_out": len(held)})
    return 0


def cmd_train_traffic(cfg: RunConfig, out: Path, args) -> int:
    data = _require(Path(args.data or out / "flows.jsonl"), "flow file")
    flows = read_flows(data)
    result = train_traffic_predictor(flows, cfg.forest, seed=cfg.stage_seed("train-traffic"))
    aucs = {}
    for threshold in VOLUME_THRESHOLDS:
        tag = threshold_tag(threshold)
        if threshold in result.starved:
            print(f"traffic {tag}: skipped ({result.starved[threshold]})")
            continue
        roc = result.rocs[threshold]
        roc.write_csv(out / f"roc_traffic_{tag}.csv")
        aucs[tag] = round(roc.auc, 6)
        print(f"traffic AUC {tag}: {roc.auc:.3f}")
    write_svg(roc_svg({threshold_tag(t): r for t, r in result.rocs.items()}), out / "roc_traffic.svg")
    save_traffic_predictor(result.predictor, out, extra={"config_hash": cfg.hash})
    _write_manifest(out, "train_traffic", cfg, "train-traffic", data=data.name, records=len(flows),
                    auc=aucs, starved=sorted(threshold_tag(t) for t in result.starved))
    return 0


def cmd_train_coverage(cfg: RunConfig, out: Path, args) -> int:
    data = _require(Path(args.data or out / "radio.jsonl"), "radio sample file")
    samples = read_samples(data)
    result = train_coverage_predictor(samples, cfg.forest, seed=cfg.stage_seed("train-coverage"))
    result.roc.write_csv(out / "roc_coverage.csv")
    write_svg(roc_svg({"coverage": result.roc}), out / "roc_coverage.svg")
    save_coverage_predictor(result.predictor, out, extra={"config_hash": cfg.hash})
    _write_manifest(out, "train_coverage", cfg, "train-coverage", data=data.name, records=len(samples),
                    auc=round(result.roc.auc, 6))
    print(f"coverage AUC: {result.roc.auc:.3f}")
    return 0


def _print_savings(result) -> None:
    table = measurement_savings(result)
    grid = list(next(iter(table.values())))
    print("unnecessary measurements (mean rate)")
    print(f"{'strategy':<16}" + "".join(f"{f:>8g}" for f in grid))
    for strategy, row in table.items():
        print(f"{strategy:<16}" + "".join(f"{row[f]:>8.1%}" for f in grid))
    rnd = table.get(RANDOM)
    if rnd:
        print(f"Random unnecessary_rate (grid mean): {sum(rnd.values()) / len(rnd):.1%}")


def cmd_steer(cfg: RunConfig, out: Path, args) -> int:
    models = Path(args.models or out)
    traffic = load_traffic_predictor(_require(models / "traffic_manifest.json", "traffic model manifest"))
    coverage = load_coverage_predictor(_require(models / "coverage_manifest.json", "coverage model manifest"))
    if coverage.n_cells != cfg.env.n_primary:
        raise CommandError(f"coverage model expects {coverage.n_cells} primary cells, "
                           f"config has {cfg.env.n_primary}")
    s = cfg.steering
    generator = ScenarioGenerator(cfg.env, cfg.flows, traffic, coverage, n_devices=s.n_devices, combine=s.combine)
    result = run_steering(generator, s.fractions, s.replications, seed=cfg.stage_seed("steer"))
    (out / "steering_curves.csv").write_text(curves_csv(result), encoding="utf-8")
    (out / "steering_savings.csv").write_text(savings_csv(result), encoding="utf-8")
    write_svg(steering_svg(result), out / "steering.svg")
    _write_manifest(out, "steer", cfg, "steer", replications=s.replications, devices=s.n_devices,
                    strategies=sorted(result.curves),
                    files=["steering_curves.csv", "steering_savings.csv", "steering.svg"])
    _print_savings(result)
    return 0


def cmd_mobility(cfg: RunConfig, out: Path, args) -> int:
    data = _require(Path(args.data or out / "trajectories.jsonl"), "trajectory file")
    train = read_trajectories(data)
    held_path = Path(args.held_out) if args.held_out else data.with_name("trajectories_heldout.jsonl")
    held = read_trajectories(_require(held_path, "held-out trajectory file"))
    k = cfg.mobility.k_routes
    if len(train) < k:
        raise CommandError(f"{len(train)} trajectories cannot form {k} routes")
    model = mine_trajectories(train, k, cfg.mobility_params())
    model.save(out / "trajectory_model.json")
    report = evaluate_mobility(model, train, held, cfg.mobility.prefix_fraction) if held else None
    body = report.to_dict() if report else {}
    (out / "mobility_report.json").write_text(_dump({"config_hash": cfg.hash, **body}), encoding="utf-8")
    _write_manifest(out, "mobility", cfg, "mobility", records={"train": len(train), "held_out": len(held)},
                    files=["trajectory_model.json", "mobility_report.json"])
    if report:
        print(f"cluster agreement (ARI): {report.cluster_agreement:.3f}")
        print(f"route top-1 accuracy: {report.route_top1_accuracy:.3f}")
        print(f"handover within 1 step: {report.handover_within_1_accuracy:.3f}")
    return 0


def cmd_report(cfg: RunConfig, out: Path, args) -> int:
    """Run the whole pipeline into one directory."""
    args.data = args.models = args.held_out = None
    for step in (cmd_gen_flows, cmd_gen_radio, cmd_gen_trajectories, cmd_train_traffic,
                 cmd_train_coverage, cmd_steer):
        step(cfg, out, args)
    cmd_mobility(cfg, out, args)
    _write_manifest(out, "report", cfg, "report", config=cfg.to_dict())
    return 0


COMMANDS = {
    "gen-flows": (cmd_gen_flows, "generate the synthetic flow corpus"),
    "gen-radio": (cmd_gen_radio, "generate static radio samples"),
    "gen-trajectories": (cmd_gen_trajectories, "generate route trajectories"),
    "train-traffic": (cmd_train_traffic, "train the flow-volume forests"),
    "train-coverage": (cmd_train_coverage, "train the secondary-coverage forest"),
    "steer": (cmd_steer, "run the steering experiment"),
    "mobility": (cmd_mobility, "mine trajectories and evaluate route prediction"),
    "report": (cmd_report, "run every stage end to end"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steersim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run config (defaults apply when omitted)")
    common.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, help="override the global seed")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_)
        if name in ("train-traffic", "train-coverage", "mobility"):
            p.add_argument("--data", help="input file (default: the file written by the matching gen command)")
        if name == "mobility":
            p.add_argument("--held-out", dest="held_out", help="held-out trajectory file")
        if name == "steer":
            p.add_argument("--models", help="directory holding the model manifests (default: --out)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging()
    try:
        cfg = RunConfig.load(_require(args.config, "config file")) if args.config else RunConfig.from_dict({})
        if args.seed is not None:
            if args.seed < 0:
                raise CommandError("--seed must be nonnegative")
            cfg = cfg.with_seed(args.seed)
        out = args.out or Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        fn, _ = COMMANDS[args.command]
        return fn(cfg, out, args)
    except (SteersimError, OSError, ValueError, KeyError) as exc:
        print(f"steersim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
