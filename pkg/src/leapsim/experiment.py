"""Experiment orchestration: optimized pipeline versus baselines.

The full pipeline ("leap") chains the three solvers: coalition
formation for the association, gradient projection for the bandwidth
split, closed-form deadline power per client.  Baselines replace one
stage at a time on top of the formed coalitions:

    random_assoc  random association, bandwidth/power still optimized
    equal_split   equal bandwidth split, optimized power
    rb            bandwidth drawn uniformly on the simplex
    rp            power drawn uniformly on (0, p_max] per client
    rb_rp         both draws combined

Deadline violations are reported per client, never repaired.  Every
random stream derives from one master seed in a fixed order, so a
report is a pure function of (scenario, methods, master seed).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .alloc import GPConfig, build_plan, deadline_powers, gp_solve, plan_full
from .game import GameTrace, Partition, random_partition, run_coalition_formation
from .hfl import SyntheticDataset, run_hfl
from .netmodel import AllocationPlan
from .scenario import Scenario, label_count_matrix

__all__ = [
    "REPORT_SCHEMA",
    "METHODS",
    "TrainOptions",
    "MethodResult",
    "ExperimentReport",
    "run_experiment",
    "emit_report",
    "load_report",
    "recompute_plan",
]

REPORT_SCHEMA = "leapsim.report.v1"

METHODS = ("leap", "random_assoc", "equal_split", "rb", "rp", "rb_rp")


@dataclass
class TrainOptions:
    """Knobs for the toy training comparison; None defers to the scenario."""

    n_features: int = 16
    class_sep: float = 2.0
    noise: float = 1.0
    lr: float = 0.2
    tau_c: int | None = None
    tau_e: int | None = None
    tau_g: int | None = None
    test_per_class: int = 100


@dataclass
class MethodResult:
    name: str
    seeds: dict
    assignment: list[int]
    avg_js: float
    plan: dict
    feasible: bool
    game_trace: dict | None = None
    gp_trace: dict | None = None
    accuracy: list[float] | None = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seeds": self.seeds,
            "assignment": self.assignment,
            "avg_js": self.avg_js,
            "plan": self.plan,
            "feasible": self.feasible,
            "game_trace": self.game_trace,
            "gp_trace": self.gp_trace,
            "accuracy": self.accuracy,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MethodResult":
        return cls(**data)


@dataclass
class ExperimentReport:
    scenario_meta: dict
    master_seed: int
    js_denominator: str
    weights: dict
    methods: dict[str, MethodResult] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "scenario_meta": self.scenario_meta,
            "master_seed": self.master_seed,
            "js_denominator": self.js_denominator,
            "weights": self.weights,
            "methods": {name: m.to_dict() for name, m in self.methods.items()},
            "summary": self.summary,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentReport":
        return cls(
            scenario_meta=data["scenario_meta"],
            master_seed=data["master_seed"],
            js_denominator=data["js_denominator"],
            weights=data["weights"],
            methods={
                name: MethodResult.from_dict(m) for name, m in data["methods"].items()
            },
            summary=data["summary"],
        )


def _trace_to_dict(trace: GameTrace) -> dict:
    return {
        "entries": [
            [it, client, src, tgt, js] for (it, client, src, tgt, js) in trace.entries
        ],
        "iterations_used": trace.iterations_used,
        "converged": trace.converged,
        "seed": trace.seed,
        "generator": trace.generator,
    }


def run_experiment(
    scenario: Scenario,
    methods: list[str] | tuple[str, ...] = METHODS,
    gp: GPConfig | None = None,
    master_seed: int = 0,
    game_max_iters: int | None = None,
    js_denominator: str = "M",
    train: bool = False,
    train_options: TrainOptions | None = None,
) -> ExperimentReport:
    """Run the requested methods on one scenario and collect the report."""
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}; expected a subset of {METHODS}")

    counts = label_count_matrix(scenario)
    config = scenario.config
    clients = scenario.clients
    n_edges = scenario.num_edges
    if game_max_iters is None:
        game_max_iters = max(2000, 200 * scenario.n_clients)

    # fixed-order seed block so each stream is independent of which
    # methods were requested
    seed_rng = np.random.default_rng(master_seed)
    names = (
        "init_partition",
        "game",
        "random_assoc",
        "rb_bandwidth",
        "rp_power",
        "rb_rp_bandwidth",
        "rb_rp_power",
        "training_data",
    )
    seeds = {name: int(s) for name, s in zip(names, seed_rng.integers(2**62, size=len(names)))}

    report = ExperimentReport(
        scenario_meta=dict(scenario.meta),
        master_seed=master_seed,
        js_denominator=js_denominator,
        weights={"lambda1": config.lambda1, "lambda2": config.lambda2},
    )

    # the formed coalition structure is shared by every bandwidth/power
    # baseline; compute it once even when "leap" itself is not reported
    base_partition: Partition | None = None
    base_trace: GameTrace | None = None
    base_plan: AllocationPlan | None = None
    base_gp_trace = None

    def formed_partition() -> tuple[Partition, GameTrace]:
        nonlocal base_partition, base_trace
        if base_partition is None:
            start = random_partition(
                counts, n_edges, np.random.default_rng(seeds["init_partition"]), js_denominator
            )
            base_partition, base_trace = run_coalition_formation(
                start, max_iters=game_max_iters, rng_seed=seeds["game"]
            )
        return base_partition, base_trace

    def formed_plan():
        nonlocal base_plan, base_gp_trace
        partition, _ = formed_partition()
        if base_plan is None:
            base_plan, base_gp_trace = plan_full(
                partition, clients, config, gp, avg_js=partition.avg_js()
            )
        return base_plan, base_gp_trace

    dataset: SyntheticDataset | None = None
    opts = train_options or TrainOptions()

    def train_curve(partition: Partition) -> list[float]:
        nonlocal dataset
        if dataset is None:
            dataset = SyntheticDataset.generate(
                label_counts=counts.tolist(),
                n_features=opts.n_features,
                seed=seeds["training_data"],
                class_sep=opts.class_sep,
                noise=opts.noise,
                test_per_class=opts.test_per_class,
            )
        _, curve = run_hfl(
            partition,
            dataset,
            tau_c=opts.tau_c or config.tau_c,
            tau_e=opts.tau_e or config.tau_e,
            tau_g=opts.tau_g or config.tau_g,
            lr=opts.lr,
            seed=master_seed,
        )
        return curve

    for name in methods:
        if name == "leap":
            partition, trace = formed_partition()
            plan, gp_trace = formed_plan()
            result = MethodResult(
                name=name,
                seeds={"init_partition": seeds["init_partition"], "game": seeds["game"]},
                assignment=[int(a) for a in partition.assignment],
                avg_js=partition.avg_js(),
                plan=plan.to_dict(),
                feasible=plan.feasible,
                game_trace=_trace_to_dict(trace),
                gp_trace={
                    "objective_values": gp_trace.objective_values,
                    "iterations_used": gp_trace.iterations_used,
                    "converged": gp_trace.converged,
                    "projected_gradient_norm": gp_trace.projected_gradient_norm,
                },
            )
            if train:
                result.accuracy = train_curve(partition)

        elif name == "random_assoc":
            partition = random_partition(
                counts, n_edges, np.random.default_rng(seeds["random_assoc"]), js_denominator
            )
            plan, gp_trace = plan_full(
                partition, clients, config, gp, avg_js=partition.avg_js()
            )
            result = MethodResult(
                name=name,
                seeds={"association": seeds["random_assoc"]},
                assignment=[int(a) for a in partition.assignment],
                avg_js=partition.avg_js(),
                plan=plan.to_dict(),
                feasible=plan.feasible,
                gp_trace={
                    "objective_values": gp_trace.objective_values,
                    "iterations_used": gp_trace.iterations_used,
                    "converged": gp_trace.converged,
                    "projected_gradient_norm": gp_trace.projected_gradient_norm,
                },
            )
            if train:
                result.accuracy = train_curve(partition)

        else:
            partition, _ = formed_partition()
            used_seeds: dict[str, int] = {}
            if name == "equal_split":
                bandwidth = np.full(n_edges, config.total_bandwidth / n_edges)
            elif name in ("rb", "rb_rp"):
                key = "rb_bandwidth" if name == "rb" else "rb_rp_bandwidth"
                rng = np.random.default_rng(seeds[key])
                bandwidth = rng.dirichlet(np.ones(n_edges)) * config.total_bandwidth
                used_seeds[key] = seeds[key]
            else:  # rp keeps the optimized bandwidth
                plan_opt, _ = formed_plan()
                bandwidth = np.asarray(plan_opt.bandwidth)

            if name in ("rp", "rb_rp"):
                key = "rp_power" if name == "rp" else "rb_rp_power"
                rng = np.random.default_rng(seeds[key])
                power = np.array(
                    [c.p_max * (1.0 - rng.random()) for c in clients]
                )
                used_seeds[key] = seeds[key]
                notes: list[str] = []
            else:
                power, notes = deadline_powers(
                    partition.coalitions, clients, config, bandwidth
                )

            plan = build_plan(
                partition.coalitions,
                clients,
                config,
                bandwidth,
                power,
                avg_js=partition.avg_js(),
                notes=notes,
            )
            result = MethodResult(
                name=name,
                seeds=used_seeds,
                assignment=[int(a) for a in partition.assignment],
                avg_js=partition.avg_js(),
                plan=plan.to_dict(),
                feasible=plan.feasible,
            )

        report.methods[name] = result

    uplink = {name: m.plan["uplink_energy"] for name, m in report.methods.items()}
    summary: dict = {
        "uplink_energy": uplink,
        "total_energy": {name: m.plan["total_energy"] for name, m in report.methods.items()},
        "avg_js": {name: m.avg_js for name, m in report.methods.items()},
        "deadline_feasible": {name: m.feasible for name, m in report.methods.items()},
    }
    if "leap" in uplink and uplink["leap"] > 0:
        summary["uplink_energy_ratio_vs_leap"] = {
            name: value / uplink["leap"] for name, value in uplink.items()
        }
    report.summary = summary
    return report


def emit_report(
    report: ExperimentReport,
    out_dir: str | Path,
    formats: tuple[str, ...] = ("json", "csv"),
) -> list[Path]:
    """Write the report and its CSV projections; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if "json" in formats:
        path = out / "report.json"
        path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
        written.append(path)

    if "csv" in formats:
        path = out / "summary.csv"
        with open(path, "w", newline="") as fh:
            fh.write("# schema=leapsim.summary.v1\n")
            writer = csv.writer(fh)
            writer.writerow(
                ["method", "avg_js", "total_latency", "total_energy",
                 "uplink_energy", "utility", "feasible"]
            )
            for name, m in report.methods.items():
                writer.writerow(
                    [
                        name,
                        repr(m.avg_js),
                        repr(m.plan["total_latency"]),
                        repr(m.plan["total_energy"]),
                        repr(m.plan["uplink_energy"]),
                        repr(m.plan["utility"]),
                        m.feasible,
                    ]
                )
        written.append(path)

        for name, m in report.methods.items():
            if m.game_trace is not None:
                path = out / f"{name}_game_trace.csv"
                with open(path, "w", newline="") as fh:
                    fh.write("# schema=leapsim.game-trace.v1\n")
                    writer = csv.writer(fh)
                    writer.writerow(["iteration", "client", "from", "to", "avg_js"])
                    for it, client, src, tgt, js in m.game_trace["entries"]:
                        writer.writerow(
                            [it, client, src, "" if tgt is None else tgt, repr(js)]
                        )
                written.append(path)
            if m.gp_trace is not None:
                path = out / f"{name}_gp_trace.csv"
                with open(path, "w", newline="") as fh:
                    fh.write("# schema=leapsim.gp-trace.v1\n")
                    writer = csv.writer(fh)
                    writer.writerow(["iteration", "objective"])
                    for i, value in enumerate(m.gp_trace["objective_values"]):
                        writer.writerow([i, repr(value)])
                written.append(path)
            if m.accuracy is not None:
                path = out / f"{name}_accuracy.csv"
                with open(path, "w", newline="") as fh:
                    fh.write("# schema=leapsim.accuracy.v1\n")
                    writer = csv.writer(fh)
                    writer.writerow(["round", "accuracy", "avg_js"])
                    for i, acc in enumerate(m.accuracy):
                        writer.writerow([i, repr(acc), repr(m.avg_js)])
                written.append(path)
    return written


def load_report(path: str | Path) -> ExperimentReport:
    data = json.loads(Path(path).read_text())
    if data.get("schema") != REPORT_SCHEMA:
        raise ValueError(f"unexpected report schema {data.get('schema')!r}")
    return ExperimentReport.from_dict(data)


def recompute_plan(
    scenario: Scenario,
    assignment: list[int],
    bandwidth: list[float],
    power: list[float],
    js_denominator: str = "M",
) -> AllocationPlan:
    """Rebuild every metric from the serialized allocation state.

    Used to audit emitted reports: the returned plan must match the
    stored one within numerical tolerance.
    """
    partition = Partition(
        np.asarray(assignment, dtype=np.int64),
        label_count_matrix(scenario),
        scenario.num_edges,
        js_denominator,
    )
    return build_plan(
        partition.coalitions,
        scenario.clients,
        scenario.config,
        np.asarray(bandwidth, dtype=float),
        np.asarray(power, dtype=float),
        avg_js=partition.avg_js(),
    )
