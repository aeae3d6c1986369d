"""Command-line front end.

Each verb consumes and produces files so the pipeline stages stay
independently runnable and testable:

    gen        draw a scenario file from a seed
    coalition  form coalitions on a scenario (association stage)
    allocate   solve bandwidth and power for a partition
    simulate   toy hierarchical training on a partition
    report     recompute and emit the metrics for a saved plan
    compare    full pipeline against the baselines, one report

The default output directory comes from the LEAPSIM_OUT environment
variable (falling back to the working directory).  With --strict,
compare exits nonzero when any requested method misses the deadline.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .alloc import GPConfig, plan_full
from .experiment import (
    METHODS,
    TrainOptions,
    emit_report,
    run_experiment,
)
from .game import Partition, run_coalition_formation
from .hfl import SyntheticDataset, run_hfl
from .netmodel import AllocationPlan
from .scenario import (
    Scenario,
    generate_scenario,
    label_count_matrix,
    load_scenario,
    save_scenario,
    shard_grouped_partition,
)

PARTITION_SCHEMA = "leapsim.partition.v1"
PLAN_SCHEMA = "leapsim.plan.v1"
METRICS_SCHEMA = "leapsim.metrics.v1"


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get("LEAPSIM_OUT", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _load_partition(path: str, scenario: Scenario) -> Partition:
    data = json.loads(Path(path).read_text())
    if data.get("schema") != PARTITION_SCHEMA:
        raise ValueError(f"unexpected partition schema {data.get('schema')!r}")
    return Partition(
        np.asarray(data["assignment"], dtype=np.int64),
        label_count_matrix(scenario),
        data["num_edges"],
        data.get("denominator", "M"),
    )


def cmd_gen(args) -> int:
    scenario = generate_scenario(
        seed=args.seed,
        n_clients=args.clients,
        n_edges=args.edges,
        n_classes=args.classes,
        shards=None if args.dirichlet is not None else args.shards,
        dirichlet_alpha=args.dirichlet,
        data_size=args.data_size,
        deadline=args.deadline,
        deadline_slack=args.deadline_slack,
        tau_c=args.tau_c,
        tau_e=args.tau_e,
        tau_g=args.tau_g,
        gain_mode=args.gain_mode,
    )
    path = _out_dir(args) / "scenario.json"
    save_scenario(scenario, path)
    print(f"wrote {path}")
    return 0


def cmd_coalition(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.grouped_start:
        start = shard_grouped_partition(scenario, args.denominator)
    else:
        from .game import random_partition

        start = random_partition(
            label_count_matrix(scenario),
            scenario.num_edges,
            np.random.default_rng(args.seed),
            args.denominator,
        )
    max_iters = args.max_iters or max(2000, 200 * scenario.n_clients)
    partition, trace = run_coalition_formation(
        start, max_iters=max_iters, rng_seed=args.seed
    )
    out = _out_dir(args)
    _dump_json(
        {
            "schema": PARTITION_SCHEMA,
            "assignment": [int(a) for a in partition.assignment],
            "num_edges": partition.num_coalitions,
            "denominator": partition.denominator,
            "avg_js": partition.avg_js(),
            "initial_avg_js": start.avg_js(),
            "converged": trace.converged,
            "iterations_used": trace.iterations_used,
            "seed": args.seed,
        },
        out / "partition.json",
    )
    trace.to_csv(out / "game_trace.csv")
    print(f"avg_js {start.avg_js():.6f} -> {partition.avg_js():.6f} "
          f"in {trace.iterations_used} iterations (converged={trace.converged})")
    print(f"wrote {out / 'partition.json'} and {out / 'game_trace.csv'}")
    return 0


def cmd_allocate(args) -> int:
    scenario = load_scenario(args.scenario)
    partition = _load_partition(args.partition, scenario)
    gp = GPConfig(
        step_size=args.step,
        tolerance=args.gp_tol,
        max_iters=args.gp_max_iters,
        min_bandwidth_floor=args.floor,
    )
    plan, trace = plan_full(
        partition, scenario.clients, scenario.config, gp, avg_js=partition.avg_js()
    )
    out = _out_dir(args)
    _dump_json({"schema": PLAN_SCHEMA, **plan.to_dict()}, out / "plan.json")
    trace.to_csv(out / "gp_trace.csv")
    print(
        f"objective {trace.objective_values[0]:.6g} -> {trace.objective_values[-1]:.6g} "
        f"in {trace.iterations_used} iterations, feasible={plan.feasible}"
    )
    print(f"wrote {out / 'plan.json'} and {out / 'gp_trace.csv'}")
    if args.strict and not plan.feasible:
        return 2
    return 0


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    partition = _load_partition(args.partition, scenario)
    dataset = SyntheticDataset.generate(
        label_counts=label_count_matrix(scenario).tolist(),
        n_features=args.features,
        seed=args.seed,
        class_sep=args.class_sep,
        noise=args.noise,
    )
    _, curve = run_hfl(
        partition,
        dataset,
        tau_c=args.tau_c or scenario.config.tau_c,
        tau_e=args.tau_e or scenario.config.tau_e,
        tau_g=args.tau_g or scenario.config.tau_g,
        lr=args.lr,
        seed=args.seed,
    )
    out = _out_dir(args)
    path = out / "accuracy.csv"
    with open(path, "w", newline="") as fh:
        fh.write("# schema=leapsim.accuracy.v1\n")
        writer = csv.writer(fh)
        writer.writerow(["round", "accuracy", "avg_js"])
        avg_js = partition.avg_js()
        for i, acc in enumerate(curve):
            writer.writerow([i, repr(acc), repr(avg_js)])
    print(f"final accuracy {curve[-1]:.4f}; wrote {path}")
    return 0


def cmd_report(args) -> int:
    scenario = load_scenario(args.scenario)
    partition = _load_partition(args.partition, scenario)
    data = json.loads(Path(args.plan).read_text())
    if data.get("schema") != PLAN_SCHEMA:
        raise ValueError(f"unexpected plan schema {data.get('schema')!r}")
    data.pop("schema")
    plan = AllocationPlan.from_dict(data)
    out = _out_dir(args)
    formats = set(args.format.split(","))

    payload = {
        "schema": METRICS_SCHEMA,
        "weights": {
            "lambda1": scenario.config.lambda1,
            "lambda2": scenario.config.lambda2,
        },
        "per_client": {
            "comp_latency": [float(x) for x in plan.comp_latency],
            "tx_latency": [float(x) for x in plan.tx_latency],
            "latency": [float(x) for x in plan.client_latency],
            "comp_energy": [float(x) for x in plan.comp_energy],
            "tx_energy": [float(x) for x in plan.tx_energy],
            "power": [float(x) for x in plan.power],
            "bandwidth_share": [float(x) for x in plan.client_bandwidth],
            "deadline_ok": [bool(x) for x in plan.per_client_feasible],
        },
        "per_coalition": {
            "bandwidth": [float(x) for x in plan.bandwidth],
            "latency": [float(x) for x in plan.coalition_latency],
            "energy": [float(x) for x in plan.coalition_energy],
            "size": [len(members) for members in partition.coalitions],
        },
        "system": {
            "avg_js": plan.avg_js,
            "total_latency": plan.total_latency,
            "total_energy": plan.total_energy,
            "uplink_energy": plan.uplink_energy,
            "utility": plan.utility,
            "feasible": plan.feasible,
        },
    }
    if "json" in formats:
        _dump_json(payload, out / "metrics.json")
        print(f"wrote {out / 'metrics.json'}")
    if "csv" in formats:
        path = out / "metrics.csv"
        with open(path, "w", newline="") as fh:
            fh.write("# schema=leapsim.metrics.v1\n")
            writer = csv.writer(fh)
            writer.writerow(
                ["client", "coalition", "comp_latency", "tx_latency",
                 "comp_energy", "tx_energy", "power", "bandwidth_share", "deadline_ok"]
            )
            for n in range(len(plan.power)):
                writer.writerow(
                    [
                        n,
                        int(partition.assignment[n]),
                        repr(float(plan.comp_latency[n])),
                        repr(float(plan.tx_latency[n])),
                        repr(float(plan.comp_energy[n])),
                        repr(float(plan.tx_energy[n])),
                        repr(float(plan.power[n])),
                        repr(float(plan.client_bandwidth[n])),
                        bool(plan.per_client_feasible[n]),
                    ]
                )
        print(f"wrote {path}")
    if args.strict and not plan.feasible:
        return 2
    return 0


def cmd_compare(args) -> int:
    scenario = load_scenario(args.scenario)
    gp = GPConfig(
        step_size=args.step,
        tolerance=args.gp_tol,
        max_iters=args.gp_max_iters,
        min_bandwidth_floor=args.floor,
    )
    report = run_experiment(
        scenario,
        methods=args.methods,
        gp=gp,
        master_seed=args.seed,
        game_max_iters=args.max_iters,
        js_denominator=args.denominator,
        train=args.train,
        train_options=TrainOptions(
            n_features=args.features,
            lr=args.lr,
            tau_c=args.tau_c,
            tau_e=args.tau_e,
            tau_g=args.tau_g,
        ),
    )
    out = _out_dir(args)
    written = emit_report(report, out, formats=tuple(args.format.split(",")))
    for path in written:
        print(f"wrote {path}")
    for name, m in report.methods.items():
        print(
            f"{name:>13}: avg_js={m.avg_js:.4f} uplink_energy={m.plan['uplink_energy']:.6g} "
            f"feasible={m.feasible}"
        )
    if args.strict and not all(m.feasible for m in report.methods.values()):
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leapsim",
        description="Coalition, bandwidth and power planning for hierarchical FL",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out", default=None, help="output directory (default $LEAPSIM_OUT or .)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--strict", action="store_true",
                       help="exit nonzero when a plan misses the deadline")

    gen = sub.add_parser("gen", help="generate a scenario file")
    add_common(gen)
    gen.add_argument("--clients", type=int, default=20)
    gen.add_argument("--edges", type=int, default=4)
    gen.add_argument("--classes", type=int, default=10)
    group = gen.add_mutually_exclusive_group()
    group.add_argument("--shards", type=int, default=2, help="classes held per client")
    group.add_argument("--dirichlet", type=float, default=None,
                       help="Dirichlet concentration for the label mix")
    gen.add_argument("--data-size", type=int, default=200)
    gen.add_argument("--deadline", type=float, default=None)
    gen.add_argument("--deadline-slack", type=float, default=1.5)
    gen.add_argument("--tau-c", type=int, default=5)
    gen.add_argument("--tau-e", type=int, default=12)
    gen.add_argument("--tau-g", type=int, default=100)
    gen.add_argument("--gain-mode", choices=("pair", "client"), default="pair")
    gen.set_defaults(func=cmd_gen)

    coalition = sub.add_parser("coalition", help="run the coalition formation game")
    add_common(coalition)
    coalition.add_argument("--scenario", required=True)
    coalition.add_argument("--max-iters", type=int, default=None)
    coalition.add_argument("--denominator", choices=("M", "pairs"), default="M")
    coalition.add_argument("--grouped-start", action="store_true",
                           help="start from the label-grouped adversarial partition")
    coalition.set_defaults(func=cmd_coalition)

    def add_gp(p):
        p.add_argument("--step", type=float, default=None, help="gradient step size")
        p.add_argument("--gp-tol", type=float, default=1e-8)
        p.add_argument("--gp-max-iters", type=int, default=10000)
        p.add_argument("--floor", type=float, default=None,
                       help="per-coalition bandwidth floor in Hz")

    allocate = sub.add_parser("allocate", help="solve bandwidth and power")
    add_common(allocate)
    allocate.add_argument("--scenario", required=True)
    allocate.add_argument("--partition", required=True)
    add_gp(allocate)
    allocate.set_defaults(func=cmd_allocate)

    def add_train(p):
        p.add_argument("--features", type=int, default=16)
        p.add_argument("--lr", type=float, default=0.2)
        p.add_argument("--tau-c", type=int, default=None)
        p.add_argument("--tau-e", type=int, default=None)
        p.add_argument("--tau-g", type=int, default=None)

    simulate = sub.add_parser("simulate", help="toy hierarchical training run")
    add_common(simulate)
    simulate.add_argument("--scenario", required=True)
    simulate.add_argument("--partition", required=True)
    add_train(simulate)
    simulate.add_argument("--class-sep", type=float, default=2.0)
    simulate.add_argument("--noise", type=float, default=1.0)
    simulate.set_defaults(func=cmd_simulate)

    report = sub.add_parser("report", help="emit metrics for a saved plan")
    add_common(report)
    report.add_argument("--scenario", required=True)
    report.add_argument("--partition", required=True)
    report.add_argument("--plan", required=True)
    report.add_argument("--format", default="json,csv")
    report.set_defaults(func=cmd_report)

    compare = sub.add_parser("compare", help="run methods side by side")
    add_common(compare)
    compare.add_argument("--scenario", required=True)
    compare.add_argument("--methods", nargs="+", default=list(METHODS),
                         choices=METHODS)
    compare.add_argument("--max-iters", type=int, default=None)
    compare.add_argument("--denominator", choices=("M", "pairs"), default="M")
    compare.add_argument("--format", default="json,csv")
    compare.add_argument("--train", action="store_true")
    add_gp(compare)
    add_train(compare)
    compare.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
