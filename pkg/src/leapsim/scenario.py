"""Scenario synthesis: clients, channels, label skew and task constants.

A scenario bundles the shared task constants with one profile per
client.  Hardware is drawn from configurable ranges (channel gains
log-uniformly, everything else uniformly); label histograms come from
either a label-shard scheme, where client n holds ``shards`` classes
tiled as (n * shards + k) mod n_classes, or a Dirichlet scheme drawing
each client's class mix from Dirichlet(alpha).  The shard tiling makes
balanced instances exact: when n_clients * shards is a multiple of
n_classes, a partition with identical per-edge label mixes exists.

Every draw goes through one seeded generator in a fixed order, so a
seed fully determines the scenario and its serialized bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .game import Partition
from .netmodel import ClientProfile, NetworkConfig

__all__ = [
    "SCENARIO_SCHEMA",
    "HardwareRanges",
    "Scenario",
    "shard_label_counts",
    "dirichlet_label_counts",
    "generate_scenario",
    "save_scenario",
    "load_scenario",
    "label_count_matrix",
    "shard_grouped_partition",
]

SCENARIO_SCHEMA = "leapsim.scenario.v1"


@dataclass(frozen=True)
class HardwareRanges:
    """Sampling ranges for client hardware, in SI units."""

    cpu_freq: tuple[float, float] = (1e9, 2e9)          # cycles/s
    cycles_per_item: tuple[float, float] = (1e5, 5e5)   # cycles/item
    channel_gain: tuple[float, float] = (1e-8, 1e-6)    # linear, log-uniform
    p_max: tuple[float, float] = (0.1, 1.0)             # Watts


@dataclass
class Scenario:
    """One solvable instance: task constants plus client population."""

    config: NetworkConfig
    clients: list[ClientProfile]
    num_edges: int
    meta: dict = field(default_factory=dict)

    @property
    def n_clients(self) -> int:
        return len(self.clients)

    @property
    def n_classes(self) -> int:
        return len(self.clients[0].label_counts)

    def to_dict(self) -> dict:
        return {
            "schema": SCENARIO_SCHEMA,
            "num_edges": self.num_edges,
            "config": {
                "total_bandwidth": self.config.total_bandwidth,
                "noise_power": self.config.noise_power,
                "model_size": self.config.model_size,
                "tau_c": self.config.tau_c,
                "tau_e": self.config.tau_e,
                "tau_g": self.config.tau_g,
                "deadline": self.config.deadline,
                "capacitance": self.config.capacitance,
                "lambda1": self.config.lambda1,
                "lambda2": self.config.lambda2,
            },
            "clients": [
                {
                    "data_size": c.data_size,
                    "cycles_per_item": c.cycles_per_item,
                    "cpu_freq": c.cpu_freq,
                    "channel_gains": list(c.channel_gains),
                    "p_max": c.p_max,
                    "label_counts": list(c.label_counts),
                }
                for c in self.clients
            ],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        config = NetworkConfig(**data["config"])
        clients = [
            ClientProfile(
                data_size=entry["data_size"],
                cycles_per_item=entry["cycles_per_item"],
                cpu_freq=entry["cpu_freq"],
                channel_gains=tuple(entry["channel_gains"]),
                p_max=entry["p_max"],
                label_counts=tuple(entry["label_counts"]),
            )
            for entry in data["clients"]
        ]
        return cls(
            config=config,
            clients=clients,
            num_edges=data["num_edges"],
            meta=data.get("meta", {}),
        )


def shard_label_counts(
    n_clients: int, n_classes: int, shards: int, data_size: int
) -> np.ndarray:
    """Label-shard histograms: client n holds ``shards`` tiled classes.

    The data size splits as evenly as possible across the client's
    shard classes, so with data_size divisible by ``shards`` every
    client of the same tile position holds an identical histogram.
    """
    if not 1 <= shards <= n_classes:
        raise ValueError("shards must lie in [1, n_classes]")
    counts = np.zeros((n_clients, n_classes), dtype=np.int64)
    base, extra = divmod(data_size, shards)
    for n in range(n_clients):
        for k in range(shards):
            cls_index = (n * shards + k) % n_classes
            counts[n, cls_index] += base + (1 if k < extra else 0)
    return counts


def dirichlet_label_counts(
    rng: np.random.Generator,
    n_clients: int,
    n_classes: int,
    alpha: float,
    data_size: int,
) -> np.ndarray:
    """Per-client multinomial draws from Dirichlet(alpha) class mixes."""
    if alpha <= 0:
        raise ValueError("alpha must be strictly positive")
    counts = np.zeros((n_clients, n_classes), dtype=np.int64)
    for n in range(n_clients):
        mix = rng.dirichlet(np.full(n_classes, alpha))
        counts[n] = rng.multinomial(data_size, mix)
    return counts


def generate_scenario(
    seed: int,
    n_clients: int,
    n_edges: int,
    n_classes: int = 10,
    shards: int | None = 2,
    dirichlet_alpha: float | None = None,
    data_size: int = 200,
    ranges: HardwareRanges | None = None,
    total_bandwidth: float = 1e7,
    noise_power: float = 1e-13,
    model_size: float = 1e6,
    tau_c: int = 5,
    tau_e: int = 12,
    tau_g: int = 100,
    deadline: float | None = None,
    deadline_slack: float = 1.5,
    capacitance: float = 1e-28,
    lambda1: float = 1.0,
    lambda2: float = 1.0,
    gain_mode: str = "pair",
) -> Scenario:
    """Deterministic scenario draw.

    Exactly one of ``shards`` / ``dirichlet_alpha`` selects the label
    scheme.  When ``deadline`` is None it is derived from the draw
    itself: ``deadline_slack`` times the task latency of the slowest
    client transmitting at full power on a uniform per-client share,
    which leaves every client feasible at p_max with margin.
    ``gain_mode`` "pair" draws one gain per (client, edge); "client"
    draws a single gain reused for every edge.
    """
    if n_clients < n_edges or n_edges < 2:
        raise ValueError("need n_clients >= n_edges >= 2")
    if (shards is None) == (dirichlet_alpha is None):
        raise ValueError("choose exactly one of shards or dirichlet_alpha")
    if gain_mode not in ("pair", "client"):
        raise ValueError("gain_mode must be 'pair' or 'client'")
    ranges = ranges or HardwareRanges()

    rng = np.random.default_rng(seed)
    freqs = rng.uniform(*ranges.cpu_freq, size=n_clients)
    cycles = rng.uniform(*ranges.cycles_per_item, size=n_clients)
    p_caps = rng.uniform(*ranges.p_max, size=n_clients)
    gain_lo, gain_hi = np.log(ranges.channel_gain[0]), np.log(ranges.channel_gain[1])
    n_gains = n_edges if gain_mode == "pair" else 1
    gains = np.exp(rng.uniform(gain_lo, gain_hi, size=(n_clients, n_gains)))

    if shards is not None:
        counts = shard_label_counts(n_clients, n_classes, shards, data_size)
        scheme = {"scheme": "shards", "shards": shards}
    else:
        counts = dirichlet_label_counts(rng, n_clients, n_classes, dirichlet_alpha, data_size)
        scheme = {"scheme": "dirichlet", "alpha": dirichlet_alpha}

    clients = [
        ClientProfile(
            data_size=data_size,
            cycles_per_item=float(cycles[n]),
            cpu_freq=float(freqs[n]),
            channel_gains=tuple(gains[n]),
            p_max=float(p_caps[n]),
            label_counts=tuple(int(c) for c in counts[n]),
        )
        for n in range(n_clients)
    ]

    if deadline is None:
        # slowest client at full power on a uniform per-client share;
        # worst gain per client in case re-association lands anywhere
        share = total_bandwidth / n_clients
        worst = 0.0
        for c in clients:
            t_comp = tau_c * c.cycles_per_item * c.data_size / c.cpu_freq
            gain = min(c.channel_gains)
            snr = c.p_max * gain / (share * noise_power)
            rate = share * np.log1p(snr) / np.log(2.0)
            worst = max(worst, t_comp + model_size / rate)
        deadline = deadline_slack * tau_e * tau_g * worst

    config = NetworkConfig(
        total_bandwidth=total_bandwidth,
        noise_power=noise_power,
        model_size=model_size,
        tau_c=tau_c,
        tau_e=tau_e,
        tau_g=tau_g,
        deadline=float(deadline),
        capacitance=capacitance,
        lambda1=lambda1,
        lambda2=lambda2,
    )
    meta = {
        "seed": seed,
        "n_clients": n_clients,
        "n_edges": n_edges,
        "n_classes": n_classes,
        "data_size": data_size,
        "gain_mode": gain_mode,
        "deadline_slack": deadline_slack,
        **scheme,
    }
    return Scenario(config=config, clients=clients, num_edges=n_edges, meta=meta)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(scenario.to_dict(), sort_keys=True, indent=2) + "\n"
    )


def load_scenario(path: str | Path) -> Scenario:
    data = json.loads(Path(path).read_text())
    if data.get("schema") != SCENARIO_SCHEMA:
        raise ValueError(f"unexpected scenario schema {data.get('schema')!r}")
    return Scenario.from_dict(data)


def label_count_matrix(scenario: Scenario) -> np.ndarray:
    return np.array([c.label_counts for c in scenario.clients], dtype=np.int64)


def shard_grouped_partition(scenario: Scenario, denominator: str = "M") -> Partition:
    """Adversarial start: clients with similar label support sit together.

    Clients are ordered by their label-support signature and dealt to
    edges in contiguous blocks, so each edge initially sees as few
    distinct classes as possible (the worst case for cross-edge
    similarity).  Blocks are sized to keep every edge non-empty.
    """
    signatures = [
        tuple(np.nonzero(np.asarray(c.label_counts))[0].tolist())
        for c in scenario.clients
    ]
    order = sorted(range(scenario.n_clients), key=lambda n: (signatures[n], n))
    m = scenario.num_edges
    assignment = np.empty(scenario.n_clients, dtype=np.int64)
    block = scenario.n_clients / m
    for position, client in enumerate(order):
        assignment[client] = min(int(position / block), m - 1)
    return Partition(assignment, label_count_matrix(scenario), m, denominator)
