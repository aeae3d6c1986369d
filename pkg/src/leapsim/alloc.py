"""Bandwidth allocation by projected gradient and closed-form power.

Bandwidth is split across coalitions by minimizing a worst-case
transmission-energy surrogate: each coalition is represented by its
worst member (smallest p_max * gain, which maximizes upload time at any
common share) transmitting at full power, scaled by the coalition size.
With per-member share s = B_m / |G_m| and a = p_max * h / noise_power,
the per-coalition term is

    K / g(s),   g(s) = s * log2(1 + a / s),
    K = lambda2 * |G_m| * tau_g * tau_e * p_max * model_size

g is increasing and concave in s, so every term is convex and
decreasing in B_m; the objective blows up as any share approaches zero,
which keeps the solution interior.  The analytic gradient follows from

    g'(s) = [ln(1 + x) - x / (1 + x)] / ln 2,  x = a / s  (> 0 for x > 0)

as d(term)/dB_m = -K * g'(s) / (g(s)^2 * |G_m|).

Power is then set per client in closed form: upload energy is strictly
increasing in transmit power, so the optimum is the smallest power that
meets the per-iteration deadline budget, clipped at p_max.  A client
whose deadline power exceeds p_max is flagged infeasible rather than
silently clamped.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Collection, Sequence

import numpy as np

from .netmodel import (
    AllocationPlan,
    ClientProfile,
    NetworkConfig,
    check_deadline,
    comp_latency,
    energies,
    network_utility,
    round_and_total_latency,
)

__all__ = [
    "InfeasibleError",
    "DeadlineError",
    "GPConfig",
    "GPTrace",
    "worst_client",
    "p3_objective",
    "p3_gradient",
    "project_to_simplex",
    "gp_solve",
    "optimal_power",
    "deadline_power",
    "deadline_powers",
    "build_plan",
    "plan_full",
]

_LN2 = math.log(2.0)


class InfeasibleError(ValueError):
    """The feasible set of the requested problem is empty."""


class DeadlineError(InfeasibleError):
    """Computation alone exceeds the per-iteration deadline budget."""


@dataclass
class GPConfig:
    """Projected-gradient solver knobs.

    ``step_size`` is the base step wrapped by backtracking; None picks
    a scale-aware default from the initial gradient.  ``tolerance`` is
    the relative objective change that counts as converged.
    ``min_bandwidth_floor`` closes the open constraint B_m > 0; None
    defaults to 1e-6 of the total bandwidth.
    """

    step_size: float | None = None
    tolerance: float = 1e-8
    max_iters: int = 10000
    min_bandwidth_floor: float | None = None

    def __post_init__(self):
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step_size must be strictly positive")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be strictly positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")

    def floor_for(self, config: NetworkConfig) -> float:
        floor = (
            1e-6 * config.total_bandwidth
            if self.min_bandwidth_floor is None
            else self.min_bandwidth_floor
        )
        return float(floor)


@dataclass
class GPTrace:
    """Objective trace of one projected-gradient run."""

    objective_values: list[float] = field(default_factory=list)
    iterations_used: int = 0
    converged: bool = False
    projected_gradient_norm: float = float("nan")

    def to_csv(self, path: str | Path, schema: str = "leapsim.gp-trace.v1") -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# schema={schema}\n")
            writer = csv.writer(fh)
            writer.writerow(["iteration", "objective"])
            for i, value in enumerate(self.objective_values):
                writer.writerow([i, repr(value)])


def _sets(partition) -> list[set[int]]:
    sets = getattr(partition, "coalitions", partition)
    return [set(s) for s in sets]


def worst_client(
    members: Collection[int],
    clients: Sequence[ClientProfile],
    edge: int,
) -> int:
    """Member with the weakest transmission, argmin of p_max * gain.

    At a common bandwidth share the upload time is decreasing in
    p_max * gain, so this member is the coalition's straggler bound.
    Ties resolve to the lowest client id.
    """
    if not members:
        raise ValueError("coalition has no members")
    return min(members, key=lambda n: (clients[n].p_max * clients[n].gain(edge), n))


def _worst_params(
    coalitions: list[set[int]], clients: Sequence[ClientProfile]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(size, p_max, gain) of each coalition's worst member."""
    sizes = np.array([len(members) for members in coalitions], dtype=float)
    p = np.empty(len(coalitions))
    h = np.empty(len(coalitions))
    for m, members in enumerate(coalitions):
        n = worst_client(members, clients, m)
        p[m] = clients[n].p_max
        h[m] = clients[n].gain(m)
    return sizes, p, h


def p3_objective(
    bandwidth: np.ndarray,
    partition,
    clients: Sequence[ClientProfile],
    config: NetworkConfig,
) -> float:
    """Worst-case transmission-energy surrogate at full power."""
    coalitions = _sets(partition)
    b = np.asarray(bandwidth, dtype=float)
    if np.any(b <= 0):
        raise ValueError("every coalition bandwidth must be strictly positive")
    sizes, p, h = _worst_params(coalitions, clients)
    share = b / sizes
    x = p * h / (share * config.noise_power)
    g = share * np.log1p(x) / _LN2
    terms = config.lambda2 * sizes * config.tau_g * config.tau_e * p * config.model_size / g
    return float(terms.sum())


def p3_gradient(
    bandwidth: np.ndarray,
    partition,
    clients: Sequence[ClientProfile],
    config: NetworkConfig,
) -> np.ndarray:
    """Analytic gradient of the surrogate; every component is negative."""
    coalitions = _sets(partition)
    b = np.asarray(bandwidth, dtype=float)
    if np.any(b <= 0):
        raise ValueError("every coalition bandwidth must be strictly positive")
    sizes, p, h = _worst_params(coalitions, clients)
    share = b / sizes
    x = p * h / (share * config.noise_power)
    g = share * np.log1p(x) / _LN2
    g_prime = (np.log1p(x) - x / (1.0 + x)) / _LN2
    k = config.lambda2 * sizes * config.tau_g * config.tau_e * p * config.model_size
    return -k * g_prime / (g**2 * sizes)


def project_to_simplex(v: np.ndarray, total: float, floor: float = 0.0) -> np.ndarray:
    """Euclidean projection onto {x : sum x = total, x_m >= floor}.

    Shifts by the floor, projects onto the scaled probability simplex
    with the exact sorting-based finite algorithm, and shifts back.
    """
    v = np.asarray(v, dtype=float)
    m = v.size
    mass = total - m * floor
    if mass <= 0:
        raise InfeasibleError("floor * M leaves no bandwidth to distribute")
    w = v - floor
    u = np.sort(w)[::-1]
    excess = np.cumsum(u) - mass
    ranks = np.arange(1, m + 1)
    support = np.nonzero(u - excess / ranks > 0)[0]
    rho = support[-1]
    theta = excess[rho] / (rho + 1)
    return np.maximum(w - theta, 0.0) + floor


def _pg_norm(b, grad, total, floor, step) -> float:
    """Norm of the projected step, a first-order stationarity measure."""
    return float(
        np.linalg.norm(project_to_simplex(b - step * grad, total, floor) - b) / step
    )


def gp_solve(
    partition,
    clients: Sequence[ClientProfile],
    config: NetworkConfig,
    gp: GPConfig | None = None,
    b_init: np.ndarray | None = None,
) -> tuple[np.ndarray, GPTrace]:
    """Minimize the surrogate over the bandwidth simplex.

    Runs projected gradient steps with backtracking (the base step is
    halved while the objective fails to decrease, and relaxed again
    after clean steps) until the relative objective change drops below
    the tolerance or the iteration cap is hit.  The returned trace is
    non-increasing and ends with the projected-gradient norm at the
    solution; the surrogate is convex, so a near-zero norm certifies
    global optimality.
    """
    gp = gp or GPConfig()
    coalitions = _sets(partition)
    m = len(coalitions)
    total = config.total_bandwidth
    floor = gp.floor_for(config)
    if not 0 < floor * m < total:
        raise InfeasibleError("bandwidth floor is infeasible for this coalition count")

    if b_init is None:
        b = np.full(m, total / m)
    else:
        b = np.asarray(b_init, dtype=float).copy()
        if b.shape != (m,):
            raise ValueError("b_init has the wrong length")
        if abs(b.sum() - total) > 1e-9 * total or np.any(b < floor - 1e-12 * total):
            raise InfeasibleError("b_init violates the bandwidth constraints")

    value = p3_objective(b, coalitions, clients, config)
    if not math.isfinite(value):
        raise InfeasibleError("objective is not finite at the starting point")
    trace = GPTrace(objective_values=[value])

    grad = p3_gradient(b, coalitions, clients, config)
    base_step = gp.step_size
    if base_step is None:
        # first step may move a coordinate by a quarter of the mean share
        base_step = 0.25 * (total / m) / max(float(np.abs(grad).max()), 1e-300)
    step = base_step

    converged = False
    iterations = 0
    for _ in range(gp.max_iters):
        iterations += 1
        candidate = project_to_simplex(b - step * grad, total, floor)
        candidate_value = p3_objective(candidate, coalitions, clients, config)
        halvings = 0
        while candidate_value > value and halvings < 80:
            step *= 0.5
            candidate = project_to_simplex(b - step * grad, total, floor)
            candidate_value = p3_objective(candidate, coalitions, clients, config)
            halvings += 1
        if not math.isfinite(candidate_value):
            raise InfeasibleError("objective became non-finite during the solve")
        if candidate_value > value:
            converged = True  # no descent left along the gradient
            break
        drop = value - candidate_value
        b, value = candidate, candidate_value
        trace.objective_values.append(value)
        grad = p3_gradient(b, coalitions, clients, config)
        if halvings == 0:
            step = min(step * 2.0, 1e9 * base_step)
        if drop < gp.tolerance * max(abs(value), 1e-300):
            converged = True
            break

    trace.iterations_used = iterations
    trace.converged = converged
    trace.projected_gradient_norm = _pg_norm(b, grad, total, floor, base_step)
    return b, trace


def deadline_power(
    client: ClientProfile,
    bandwidth_share: float,
    edge: int,
    config: NetworkConfig,
) -> float:
    """Smallest transmit power that exactly meets the deadline budget.

    Inverts the rate formula at t_tx = budget; the value can exceed
    p_max, in which case no feasible power exists for this share.
    Raises DeadlineError when computation alone exceeds the budget.
    """
    if bandwidth_share <= 0:
        raise ValueError("bandwidth share must be strictly positive")
    budget = config.iteration_budget - comp_latency(client, config)
    if budget <= 0:
        raise DeadlineError(
            "computation latency exceeds the per-iteration deadline budget"
        )
    exponent = config.model_size / (bandwidth_share * budget)
    with np.errstate(over="ignore"):
        growth = float(np.expm1(exponent * _LN2))  # 2**exponent - 1
    return bandwidth_share * config.noise_power * growth / client.gain(edge)


def optimal_power(
    client: ClientProfile,
    bandwidth_share: float,
    edge: int,
    config: NetworkConfig,
) -> float:
    """Energy-optimal transmit power under the deadline, min(p_max, p_deadline).

    Upload energy is strictly increasing in power, so the optimum sits
    at the deadline power whenever that is attainable; otherwise the
    client transmits at p_max and the deadline check will flag it.
    """
    return min(client.p_max, deadline_power(client, bandwidth_share, edge, config))


def deadline_powers(
    partition,
    clients: Sequence[ClientProfile],
    config: NetworkConfig,
    bandwidth: np.ndarray,
) -> tuple[np.ndarray, list[str]]:
    """Energy-optimal power for every client at its equal coalition share.

    Clients whose computation alone exceeds the deadline budget fall
    back to p_max and are listed in the returned notes; the deadline
    check on the assembled plan flags them.
    """
    coalitions = _sets(partition)
    bandwidth = np.asarray(bandwidth, dtype=float)
    power = np.empty(len(clients), dtype=float)
    notes: list[str] = []
    for m, members in enumerate(coalitions):
        share = bandwidth[m] / len(members)
        for n in members:
            try:
                power[n] = optimal_power(clients[n], share, m, config)
            except DeadlineError:
                power[n] = clients[n].p_max
                notes.append(f"client {n}: computation alone exceeds the deadline budget")
    return power, notes


def build_plan(
    partition,
    clients: Sequence[ClientProfile],
    config: NetworkConfig,
    bandwidth: np.ndarray,
    power: np.ndarray,
    avg_js: float,
    surrogate_objective: float | None = None,
    notes: list[str] | None = None,
) -> AllocationPlan:
    """Assemble an AllocationPlan with every derived metric filled in."""
    coalitions = _sets(partition)
    bandwidth = np.asarray(bandwidth, dtype=float)
    power = np.asarray(power, dtype=float)
    share = np.empty(len(clients), dtype=float)
    for m, members in enumerate(coalitions):
        for n in members:
            share[n] = bandwidth[m] / len(members)

    t_client, t_coalition, t_total = round_and_total_latency(
        coalitions, clients, share, power, config
    )
    t_comp = np.array([comp_latency(c, config) for c in clients])
    breakdown = energies(coalitions, clients, share, power, config)
    ok, all_ok = check_deadline(t_client, config)
    if surrogate_objective is None:
        surrogate_objective = p3_objective(bandwidth, coalitions, clients, config)
    return AllocationPlan(
        bandwidth=bandwidth,
        client_bandwidth=share,
        power=power,
        comp_latency=t_comp,
        tx_latency=t_client - t_comp,
        client_latency=t_client,
        coalition_latency=t_coalition,
        total_latency=t_total,
        comp_energy=breakdown.comp,
        tx_energy=breakdown.tx,
        coalition_energy=breakdown.coalition,
        total_energy=breakdown.total,
        uplink_energy=breakdown.total_tx,
        avg_js=avg_js,
        utility=network_utility(avg_js, breakdown.total, config),
        surrogate_objective=float(surrogate_objective),
        per_client_feasible=ok,
        feasible=all_ok,
        notes=notes or [],
    )


def plan_full(
    partition,
    clients: Sequence[ClientProfile],
    config: NetworkConfig,
    gp: GPConfig | None = None,
    avg_js: float = 0.0,
) -> tuple[AllocationPlan, GPTrace]:
    """Bandwidth by gradient projection, then per-client deadline power.

    The bandwidth solve assumes full power (upload time is minimized at
    p_max); each member then gets the energy-optimal power for its
    equal share.  Clients that cannot meet the deadline even at p_max
    stay at p_max and are flagged in the plan instead of raising.
    """
    coalitions = _sets(partition)
    bandwidth, trace = gp_solve(coalitions, clients, config, gp)
    power, notes = deadline_powers(coalitions, clients, config, bandwidth)
    plan = build_plan(
        coalitions, clients, config, bandwidth, power, avg_js, notes=notes
    )
    return plan, trace
