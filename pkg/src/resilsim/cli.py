"""Command-line interface.

Subcommands front the library operations one-to-one:

    resilsim evaluate          system failure probability of the configured tree
    resilsim sweep             sweep one topology axis, with significance column
    resilsim sensitivity       leaf/layer sensitivity ranking
    resilsim simulate          temporal failure injection, event log + chains
    resilsim compare-policies  none / always-on / on-demand comparison

Every command validates its full configuration before computing, writes a
tabular report plus a run manifest into the output directory, and exits 0
on success, 1 on validation errors, 2 on runtime errors.  Identical inputs
produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__, kernels
from .config import (
    ConfigError,
    RunConfig,
    default_config_path,
    default_rates_path,
    ingest_rates,
    load_run_config,
)
from .controller import METRIC_FIELDS, compare_policies
from .reliability import evaluate, sensitivity
from .reports import (
    FORMAT_CSV,
    FORMATS,
    write_manifest,
    write_report,
)
from .simulation import (
    KIND_CHAIN_MARKER,
    TreeIndex,
    extract_chains,
    simulate,
    snapshot_monte_carlo,
)
from .topology import ConfigurationError, SWEEP_AXES, build_fat_tree, sweep_axis

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        type=Path,
        default=None,
        help=f"run configuration file (default: bundled {default_config_path().name})",
    )
    common.add_argument(
        "--rates",
        type=Path,
        default=None,
        help=f"rates table file (default: bundled {default_rates_path().name})",
    )
    common.add_argument("--seed", type=int, default=None, help="override config seeds with one seed")
    common.add_argument("--trials", type=int, default=None, help="Monte Carlo trial count override")
    common.add_argument("--output", type=Path, default=None, help="report output directory (default: from config)")
    common.add_argument(
        "--epsilon",
        type=float,
        default=None,
        help="relative-improvement significance threshold (default: from config)",
    )
    common.add_argument(
        "--format",
        choices=FORMATS,
        default=FORMAT_CSV,
        help="report format (default: csv)",
    )

    parser = argparse.ArgumentParser(
        prog="resilsim",
        description="Failure-probability modeling and resilience-policy "
        "simulation for fat-tree HPC systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("evaluate", parents=[common], help="analytic system failure probability")

    p_sweep = sub.add_parser("sweep", parents=[common], help="sweep one topology axis")
    p_sweep.add_argument("--axis", choices=SWEEP_AXES, default=None, help="axis to sweep (default: from config)")
    p_sweep.add_argument(
        "--values",
        type=str,
        default=None,
        help="comma-separated strictly increasing values (default: from config)",
    )

    sub.add_parser("sensitivity", parents=[common], help="leaf/layer sensitivity ranking")

    p_sim = sub.add_parser("simulate", parents=[common], help="temporal failure injection")
    p_sim.add_argument("--horizon", type=int, default=None, help="timestep count override")

    sub.add_parser("compare-policies", parents=[common], help="compare configured protection policies")
    return parser


def _manifest_payload(args, config: RunConfig, rates: dict, extra: dict) -> dict:
    return {
        "command": args.command,
        "package_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "config": config.raw,
        "rates": rates,
        "overrides": {
            "seed": args.seed,
            "trials": args.trials,
            "epsilon": args.epsilon,
        },
        **extra,
    }


def _cmd_evaluate(args, config: RunConfig, rates: dict, outdir: Path) -> None:
    tree = build_fat_tree(config.topology)
    probability = evaluate(tree)
    row = {
        "config": config.topology.summary(),
        "system_failure_probability": probability,
    }
    fields = ["config", "system_failure_probability"]
    if args.trials is not None:
        seed = args.seed if args.seed is not None else config.seeds[0]
        estimate, stderr = snapshot_monte_carlo(tree, args.trials, seed)
        row.update(
            mc_trials=args.trials, mc_seed=seed, mc_estimate=estimate, mc_stderr=stderr
        )
        fields += ["mc_trials", "mc_seed", "mc_estimate", "mc_stderr"]
    write_report(outdir, "evaluate_report", "evaluate", fields, [row], args.format)
    write_manifest(
        outdir, "evaluate_manifest", _manifest_payload(args, config, rates, {})
    )


def _cmd_sweep(args, config: RunConfig, rates: dict, outdir: Path) -> None:
    axis = args.axis or config.sweep_axis
    if axis is None:
        raise ConfigError("no sweep axis given (use --axis or the config sweep block)")
    if args.values is not None:
        try:
            values = tuple(int(v) for v in args.values.split(","))
        except ValueError:
            raise ConfigError(f"--values {args.values!r} is not a comma-separated int list") from None
    else:
        values = config.sweep_values
    if not values:
        raise ConfigError("no sweep values given (use --values or the config sweep block)")
    epsilon = args.epsilon if args.epsilon is not None else config.epsilon
    result = sweep_axis(config.topology, axis, values)
    rows = []
    for r in result.rows:
        rows.append(
            {
                "axis": axis,
                "value": r.value,
                "config": r.label,
                "system_failure_probability": r.probability,
                "relative_improvement": r.improvement,
                "significant": ""
                if r.improvement is None
                else str(r.improvement >= epsilon).lower(),
            }
        )
    write_report(
        outdir,
        "sweep_report",
        "sweep",
        [
            "axis",
            "value",
            "config",
            "system_failure_probability",
            "relative_improvement",
            "significant",
        ],
        rows,
        args.format,
    )
    write_manifest(
        outdir,
        "sweep_manifest",
        _manifest_payload(
            args, config, rates, {"axis": axis, "values": list(values), "epsilon": epsilon}
        ),
    )


def _cmd_sensitivity(args, config: RunConfig, rates: dict, outdir: Path) -> None:
    tree = build_fat_tree(config.topology)
    report = sensitivity(tree)
    rows = []
    for entry in report.layers:
        rows.append(
            {"scope": "layer", "label": entry.label, "derivative": entry.derivative, "rank": entry.rank}
        )
    for entry in report.leaves:
        rows.append(
            {"scope": "leaf", "label": entry.label, "derivative": entry.derivative, "rank": entry.rank}
        )
    write_report(
        outdir,
        "sensitivity_report",
        "sensitivity",
        ["scope", "label", "derivative", "rank"],
        rows,
        args.format,
    )
    write_manifest(
        outdir, "sensitivity_manifest", _manifest_payload(args, config, rates, {})
    )


def _cmd_simulate(args, config: RunConfig, rates: dict, outdir: Path) -> None:
    horizon = args.horizon if args.horizon is not None else config.horizon
    seed = args.seed if args.seed is not None else config.seeds[0]
    tree = build_fat_tree(config.topology)
    index = TreeIndex(tree)
    trace = simulate(
        index,
        horizon,
        zone_params=config.zones,
        repair_time=config.repair_time,
        seed=seed,
    )
    chains = extract_chains(trace)
    chain_of: dict[tuple[int, str], int] = {}
    for ci, chain in enumerate(chains):
        for event in chain.events:
            chain_of[(event.time, event.unit_id)] = ci

    rows = []
    for event in trace.events:
        chain_id = chain_of.get((event.time, event.unit_id), "")
        rows.append(
            {
                "time": event.time,
                "unit_id": event.unit_id,
                "kind": event.kind,
                "cause": event.cause,
                "chain_id": chain_id,
            }
        )
    # chain-membership markers for multi-event chains
    for ci, chain in enumerate(chains):
        if len(chain.events) < 2:
            continue
        for event in chain.events:
            rows.append(
                {
                    "time": event.time,
                    "unit_id": event.unit_id,
                    "kind": KIND_CHAIN_MARKER,
                    "cause": None,
                    "chain_id": ci,
                }
            )
    payload = {
        "seed": seed,
        "horizon": horizon,
        "final_system_state": trace.final_system_state,
        "zone_params": asdict(trace.zone_params),
        "repair_time": trace.repair_time,
        "events": rows,
        "chains": [
            {
                "id": ci,
                "length": len(chain.events),
                "events": [
                    {"time": e.time, "unit_id": e.unit_id} for e in chain.events
                ],
                "linkage": [
                    None if z is None else z.origin_unit for z in chain.linkage
                ],
            }
            for ci, chain in enumerate(chains)
        ],
    }
    write_report(
        outdir,
        "simulate_report",
        "trace",
        ["time", "unit_id", "kind", "cause", "chain_id"],
        rows,
        args.format,
        structured_payload=payload,
    )
    write_manifest(
        outdir,
        "simulate_manifest",
        _manifest_payload(args, config, rates, {"horizon": horizon, "seed": seed}),
    )


def _cmd_compare_policies(args, config: RunConfig, rates: dict, outdir: Path) -> None:
    if not config.policies:
        raise ConfigError("config has no policies to compare")
    seeds = (args.seed,) if args.seed is not None else config.seeds
    tree = build_fat_tree(config.topology)
    stats = compare_policies(
        tree,
        config.horizon,
        config.zones,
        config.policies,
        seeds,
        config.workload,
        repair_time=config.repair_time,
        base_energy_per_step=config.base_energy_per_step,
    )
    fields = ["policy"]
    for name in METRIC_FIELDS:
        fields += [f"mean_{name}", f"std_{name}"]
    rows = []
    for s in stats:
        row: dict = {"policy": s.policy.mode}
        for name in METRIC_FIELDS:
            row[f"mean_{name}"] = s.means[name]
            row[f"std_{name}"] = s.stds[name]
        rows.append(row)
    write_report(outdir, "compare_policies_report", "policy-comparison", fields, rows, args.format)
    write_manifest(
        outdir,
        "compare_policies_manifest",
        _manifest_payload(args, config, rates, {"seeds": list(seeds), "horizon": config.horizon}),
    )


_COMMANDS = {
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "sensitivity": _cmd_sensitivity,
    "simulate": _cmd_simulate,
    "compare-policies": _cmd_compare_policies,
}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        rates_path = args.rates if args.rates is not None else default_rates_path()
        config_path = args.config if args.config is not None else default_config_path()
        rates = ingest_rates(rates_path)
        config = load_run_config(config_path, rates)
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be >= 0")
        if args.trials is not None and args.trials < 1:
            raise ConfigError("--trials must be >= 1")
        if args.epsilon is not None and args.epsilon <= 0:
            raise ConfigError("--epsilon must be > 0")
        outdir = args.output if args.output is not None else Path(config.output_dir)
        build_fat_tree(config.topology)  # fail fast on rate/count problems
    except (ConfigError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        _COMMANDS[args.command](args, config, rates, outdir)
    except (ConfigError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
