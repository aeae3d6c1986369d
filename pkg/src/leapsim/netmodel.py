"""Latency, rate, energy and utility model for one training task.

Per client n in coalition m, with share s = B_m / |G_m| of the
coalition's bandwidth:

    compute latency   t_comp = tau_c * cycles_per_item * data_size / cpu_freq
    uplink rate       rate   = s * log2(1 + p * h / (s * noise_power))
    upload latency    t_tx   = model_size / rate
    round latency     t      = t_comp + t_tx
    coalition latency = tau_e * max over members of t   (synchronous rounds)
    task latency      = tau_g * max over coalitions
    compute energy    e_comp = tau_c * capacitance * cycles_per_item * data_size * cpu_freq^2
    upload energy     e_tx   = t_tx * p
    coalition energy  = sum over members of tau_g * tau_e * (e_comp + e_tx)

Downlink, aggregation compute and server-link costs are all zero in
this model; the deadline applies per edge iteration as
t <= deadline / (tau_e * tau_g).  Units are Hz, bits, seconds, Watts
and Joules; channel gains are linear power gains, stored per
(client, edge) pair so re-association can change the channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ClientProfile",
    "NetworkConfig",
    "AllocationPlan",
    "comp_latency",
    "uplink_rate",
    "tx_latency",
    "round_and_total_latency",
    "energies",
    "EnergyBreakdown",
    "network_utility",
    "check_deadline",
]

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class ClientProfile:
    """Static hardware and data description of one client.

    ``channel_gains`` holds one linear gain per edge server; a scalar
    is broadcast to every edge (the client-only gain mode).
    ``label_counts`` must sum to ``data_size``.
    """

    data_size: int
    cycles_per_item: float
    cpu_freq: float
    channel_gains: tuple[float, ...]
    p_max: float
    label_counts: tuple[int, ...]

    def __post_init__(self):
        if isinstance(self.channel_gains, (int, float)):
            object.__setattr__(self, "channel_gains", (float(self.channel_gains),))
        else:
            object.__setattr__(
                self, "channel_gains", tuple(float(g) for g in self.channel_gains)
            )
        object.__setattr__(self, "label_counts", tuple(int(c) for c in self.label_counts))
        for name in ("data_size", "cycles_per_item", "cpu_freq", "p_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if any(g <= 0 for g in self.channel_gains):
            raise ValueError("channel gains must be strictly positive")
        if any(c < 0 for c in self.label_counts):
            raise ValueError("label counts must be non-negative")
        if sum(self.label_counts) != self.data_size:
            raise ValueError("label counts must sum to data_size")

    def gain(self, edge: int) -> float:
        """Linear channel gain toward the given edge server."""
        if len(self.channel_gains) == 1:
            return self.channel_gains[0]
        return self.channel_gains[edge]


@dataclass(frozen=True)
class NetworkConfig:
    """Shared task constants.

    tau_c, tau_e and tau_g are the local-round, edge-iteration and
    global-round counts; ``deadline`` caps the task execution latency
    and ``capacitance`` is the effective switched-capacitance
    coefficient of the compute chipset.  lambda1 and lambda2 weight
    distribution similarity against energy in the network utility.
    """

    total_bandwidth: float
    noise_power: float
    model_size: float
    tau_c: int
    tau_e: int
    tau_g: int
    deadline: float
    capacitance: float
    lambda1: float = 1.0
    lambda2: float = 1.0

    def __post_init__(self):
        for name in (
            "total_bandwidth",
            "noise_power",
            "model_size",
            "tau_c",
            "tau_e",
            "tau_g",
            "deadline",
            "capacitance",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("utility weights must be non-negative")

    @property
    def iteration_budget(self) -> float:
        """Per-edge-iteration latency cap deadline / (tau_e * tau_g)."""
        return self.deadline / (self.tau_e * self.tau_g)


def comp_latency(client: ClientProfile, config: NetworkConfig) -> float:
    """Local training latency for one edge iteration (tau_c passes)."""
    return config.tau_c * client.cycles_per_item * client.data_size / client.cpu_freq


def uplink_rate(
    bandwidth_share: float, power: float, gain: float, config: NetworkConfig
) -> float:
    """Shannon rate over the client's bandwidth share, bits per second."""
    if bandwidth_share <= 0:
        raise ValueError("bandwidth share must be strictly positive")
    if power <= 0:
        raise ValueError("transmit power must be strictly positive")
    snr = power * gain / (bandwidth_share * config.noise_power)
    return bandwidth_share * math.log1p(snr) / _LN2


def tx_latency(
    bandwidth_share: float, power: float, gain: float, config: NetworkConfig
) -> float:
    """Model upload time, seconds."""
    rate = uplink_rate(bandwidth_share, power, gain, config)
    if rate <= 0:
        raise ValueError("uplink rate is zero")
    return config.model_size / rate


def _coalition_sets(partition) -> list[set[int]]:
    """Accept either a Partition-like object or a plain list of member sets."""
    sets = getattr(partition, "coalitions", partition)
    return [set(s) for s in sets]


def round_and_total_latency(
    partition,
    clients: Sequence[ClientProfile],
    bandwidth_share: Iterable[float],
    power: Iterable[float],
    config: NetworkConfig,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Per-client, per-coalition and task latency.

    Returns (t_client, t_coalition, t_task) where t_client[n] is the
    client's per-edge-iteration latency, t_coalition[m] the straggler
    latency summed over tau_e iterations and t_task the tau_g-round
    total.  The per-iteration straggler maxima are constant under this
    static model, so the sums collapse to products.
    """
    coalitions = _coalition_sets(partition)
    share = np.asarray(list(bandwidth_share), dtype=float)
    pwr = np.asarray(list(power), dtype=float)
    t_client = np.empty(len(clients), dtype=float)
    for m, members in enumerate(coalitions):
        for n in members:
            c = clients[n]
            t_client[n] = comp_latency(c, config) + tx_latency(
                share[n], pwr[n], c.gain(m), config
            )
    t_coalition = np.array(
        [config.tau_e * max(t_client[n] for n in members) for members in coalitions]
    )
    t_task = config.tau_g * float(t_coalition.max())
    return t_client, t_coalition, t_task


@dataclass
class EnergyBreakdown:
    """Energy terms at client, coalition and system granularity."""

    comp: np.ndarray      # per client, one edge iteration
    tx: np.ndarray        # per client, one edge iteration
    client: np.ndarray    # comp + tx, one edge iteration
    coalition: np.ndarray  # per coalition, whole task
    total: float           # whole task
    total_tx: float        # transmission part of total, whole task


def energies(
    partition,
    clients: Sequence[ClientProfile],
    bandwidth_share: Iterable[float],
    power: Iterable[float],
    config: NetworkConfig,
) -> EnergyBreakdown:
    """Per-client and aggregated energy for the whole task."""
    coalitions = _coalition_sets(partition)
    share = np.asarray(list(bandwidth_share), dtype=float)
    pwr = np.asarray(list(power), dtype=float)
    e_comp = np.empty(len(clients), dtype=float)
    e_tx = np.empty(len(clients), dtype=float)
    for m, members in enumerate(coalitions):
        for n in members:
            c = clients[n]
            e_comp[n] = (
                config.tau_c
                * config.capacitance
                * c.cycles_per_item
                * c.data_size
                * c.cpu_freq**2
            )
            e_tx[n] = tx_latency(share[n], pwr[n], c.gain(m), config) * pwr[n]
    e_client = e_comp + e_tx
    rounds = config.tau_g * config.tau_e
    e_coalition = np.array(
        [rounds * sum(e_client[n] for n in members) for members in coalitions]
    )
    total = float(e_coalition.sum())
    total_tx = rounds * float(e_tx.sum())
    return EnergyBreakdown(
        comp=e_comp,
        tx=e_tx,
        client=e_client,
        coalition=e_coalition,
        total=total,
        total_tx=total_tx,
    )


def network_utility(avg_js: float, total_energy: float, config: NetworkConfig) -> float:
    """lambda1 * (1 - avg_js) - lambda2 * total_energy."""
    return config.lambda1 * (1.0 - avg_js) - config.lambda2 * total_energy


def check_deadline(
    t_client: Iterable[float], config: NetworkConfig, rel_tol: float = 1e-9
) -> tuple[np.ndarray, bool]:
    """Flag clients whose per-edge-iteration latency fits the budget.

    The bound is inclusive, with a small relative allowance so the
    closed-form deadline power, which lands exactly on the budget up to
    float rounding, is recognized as feasible.
    """
    t = np.asarray(list(t_client), dtype=float)
    ok = t <= config.iteration_budget * (1.0 + rel_tol)
    return ok, bool(ok.all())


@dataclass
class AllocationPlan:
    """Solved bandwidth/power assignment plus every derived metric.

    ``bandwidth`` is per coalition and sums to the configured total;
    ``client_bandwidth`` is the equal within-coalition share each
    member transmits on.  ``surrogate_objective`` is the worst-case
    coalition energy surrogate the bandwidth solver minimized, kept
    alongside the true per-client energies because the surrogate
    overestimates non-worst members.
    """

    bandwidth: np.ndarray
    client_bandwidth: np.ndarray
    power: np.ndarray
    comp_latency: np.ndarray
    tx_latency: np.ndarray
    client_latency: np.ndarray
    coalition_latency: np.ndarray
    total_latency: float
    comp_energy: np.ndarray
    tx_energy: np.ndarray
    coalition_energy: np.ndarray
    total_energy: float
    uplink_energy: float
    avg_js: float
    utility: float
    surrogate_objective: float
    per_client_feasible: np.ndarray
    feasible: bool
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "bandwidth": [float(b) for b in self.bandwidth],
            "client_bandwidth": [float(b) for b in self.client_bandwidth],
            "power": [float(p) for p in self.power],
            "comp_latency": [float(x) for x in self.comp_latency],
            "tx_latency": [float(x) for x in self.tx_latency],
            "client_latency": [float(x) for x in self.client_latency],
            "coalition_latency": [float(x) for x in self.coalition_latency],
            "total_latency": float(self.total_latency),
            "comp_energy": [float(x) for x in self.comp_energy],
            "tx_energy": [float(x) for x in self.tx_energy],
            "coalition_energy": [float(x) for x in self.coalition_energy],
            "total_energy": float(self.total_energy),
            "uplink_energy": float(self.uplink_energy),
            "avg_js": float(self.avg_js),
            "utility": float(self.utility),
            "surrogate_objective": float(self.surrogate_objective),
            "per_client_feasible": [bool(x) for x in self.per_client_feasible],
            "feasible": bool(self.feasible),
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AllocationPlan":
        return cls(
            bandwidth=np.asarray(data["bandwidth"], dtype=float),
            client_bandwidth=np.asarray(data["client_bandwidth"], dtype=float),
            power=np.asarray(data["power"], dtype=float),
            comp_latency=np.asarray(data["comp_latency"], dtype=float),
            tx_latency=np.asarray(data["tx_latency"], dtype=float),
            client_latency=np.asarray(data["client_latency"], dtype=float),
            coalition_latency=np.asarray(data["coalition_latency"], dtype=float),
            total_latency=float(data["total_latency"]),
            comp_energy=np.asarray(data["comp_energy"], dtype=float),
            tx_energy=np.asarray(data["tx_energy"], dtype=float),
            coalition_energy=np.asarray(data["coalition_energy"], dtype=float),
            total_energy=float(data["total_energy"]),
            uplink_energy=float(data["uplink_energy"]),
            avg_js=float(data["avg_js"]),
            utility=float(data["utility"]),
            surrogate_objective=float(data["surrogate_objective"]),
            per_client_feasible=np.asarray(data["per_client_feasible"], dtype=bool),
            feasible=bool(data["feasible"]),
            notes=list(data.get("notes", [])),
        )
