"""Coalition formation game over client-to-edge associations.

Clients are repeatedly offered the chance to leave their edge coalition
for another one; a move is accepted only when it strictly lowers the
average cross-coalition Jensen-Shannon divergence (the coalition-friendly
preference).  The improvement loop samples clients uniformly at random
and applies the best admissible switch, so it is a randomized local
search whose state is the partition itself.

The game is an exact potential game: the un-normalized pairwise JS sum
acts as a potential whose change under any unilateral switch equals the
change in the switching client's coalition-level utility.  Every
accepted switch therefore strictly decreases the potential, which
guarantees termination in a Nash-stable partition (no single client can
improve by deviating alone).

Partitions keep exact integer label counts per coalition plus cached
coalition distributions and a cached pairwise JS matrix, so evaluating a
candidate switch only touches the two affected rows/columns.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dist import (
    LabelDistribution,
    avg_pairwise_js,
    js_divergence,
    pairwise_js_matrix,
)

__all__ = [
    "SWITCH_TOLERANCE",
    "InvalidPartitionError",
    "InvalidSwitchError",
    "SwitchProposal",
    "GameTrace",
    "Partition",
    "evaluate_switch",
    "best_switch",
    "run_coalition_formation",
    "potential",
    "coalition_utility",
    "verify_exact_potential",
    "certify_stability",
    "random_partition",
]

# Switches must improve avg JS by more than this to be accepted; a strict
# margin keeps the potential strictly decreasing despite float rounding,
# which is what guarantees termination.
SWITCH_TOLERANCE = 1e-10


class InvalidPartitionError(ValueError):
    """Assignment and coalition sets are inconsistent or leave an edge empty."""


class InvalidSwitchError(ValueError):
    """Requested switch is inadmissible (same coalition, or empties the source)."""


@dataclass(frozen=True)
class SwitchProposal:
    """A candidate single-client move and its effect on the average JS.

    ``delta_js`` is avg JS after the move minus avg JS before, computed
    incrementally over the pairs that touch the source and target
    coalitions only.
    """

    client: int
    source: int
    target: int
    delta_js: float


@dataclass
class GameTrace:
    """Iteration log of one improvement run.

    ``entries`` holds one row per sampled iteration:
    (iteration, client, source, accepted target or None, avg_js after).
    """

    entries: list[tuple[int, int, int, int | None, float]] = field(default_factory=list)
    iterations_used: int = 0
    converged: bool = False
    seed: int | None = None
    generator: str = "numpy.default_rng"

    def accepted(self) -> list[tuple[int, int, int, int, float]]:
        return [
            (it, c, src, tgt, js)
            for (it, c, src, tgt, js) in self.entries
            if tgt is not None
        ]

    def to_csv(self, path: str | Path, schema: str = "leapsim.game-trace.v1") -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# schema={schema}\n")
            writer = csv.writer(fh)
            writer.writerow(["iteration", "client", "from", "to", "avg_js"])
            for it, client, src, tgt, js in self.entries:
                writer.writerow([it, client, src, "" if tgt is None else tgt, repr(js)])


class Partition:
    """Disjoint assignment of clients to M edge coalitions.

    State is the per-client coalition index; the coalition member sets,
    per-coalition integer label counts, coalition distributions and the
    pairwise JS matrix are maintained incrementally as switches are
    applied.  ``denominator`` fixes the avg-JS normalization for every
    operation on this partition.
    """

    def __init__(
        self,
        assignment: np.ndarray,
        client_label_counts: np.ndarray,
        num_coalitions: int,
        denominator: str = "M",
    ):
        assignment = np.asarray(assignment, dtype=np.int64)
        client_label_counts = np.asarray(client_label_counts, dtype=np.int64)
        if assignment.ndim != 1:
            raise InvalidPartitionError("assignment must be a 1-D index vector")
        if client_label_counts.ndim != 2 or client_label_counts.shape[0] != assignment.shape[0]:
            raise InvalidPartitionError("label counts must be (n_clients, n_classes)")
        if assignment.size and (assignment.min() < 0 or assignment.max() >= num_coalitions):
            raise InvalidPartitionError("assignment index out of range")

        self.assignment = assignment.copy()
        self.client_counts = client_label_counts
        self.num_coalitions = int(num_coalitions)
        self.denominator = denominator

        self.coalitions: list[set[int]] = [set() for _ in range(num_coalitions)]
        for client, coalition in enumerate(self.assignment):
            self.coalitions[int(coalition)].add(client)
        for m, members in enumerate(self.coalitions):
            if not members:
                raise InvalidPartitionError(f"coalition {m} is empty")

        self.counts = np.zeros((num_coalitions, client_label_counts.shape[1]), dtype=np.int64)
        np.add.at(self.counts, self.assignment, self.client_counts)
        self.dists = [LabelDistribution.from_counts(row) for row in self.counts]
        self.js_matrix = pairwise_js_matrix(self.dists)

    # -- properties ------------------------------------------------------

    @property
    def n_clients(self) -> int:
        return int(self.assignment.shape[0])

    def pair_denominator(self) -> float:
        m = self.num_coalitions
        return float(m) if self.denominator == "M" else m * (m - 1) / 2.0

    def avg_js(self) -> float:
        total = float(np.sum(np.triu(self.js_matrix, k=1)))
        return total / self.pair_denominator()

    def copy(self) -> "Partition":
        clone = object.__new__(Partition)
        clone.assignment = self.assignment.copy()
        clone.client_counts = self.client_counts
        clone.num_coalitions = self.num_coalitions
        clone.denominator = self.denominator
        clone.coalitions = [set(s) for s in self.coalitions]
        clone.counts = self.counts.copy()
        clone.dists = list(self.dists)
        clone.js_matrix = self.js_matrix.copy()
        return clone

    def validate(self, tol: float = 1e-12) -> None:
        """Check disjoint cover and cache consistency against a rebuild."""
        seen: set[int] = set()
        for m, members in enumerate(self.coalitions):
            if not members:
                raise InvalidPartitionError(f"coalition {m} is empty")
            if seen & members:
                raise InvalidPartitionError("coalitions overlap")
            seen |= members
            for client in members:
                if self.assignment[client] != m:
                    raise InvalidPartitionError("assignment/coalition mismatch")
        if seen != set(range(self.n_clients)):
            raise InvalidPartitionError("coalitions do not cover the client set")
        fresh = Partition(
            self.assignment, self.client_counts, self.num_coalitions, self.denominator
        )
        for cached, rebuilt in zip(self.dists, fresh.dists):
            if not cached.allclose(rebuilt, tol):
                raise InvalidPartitionError("cached coalition distribution is stale")
        if np.any(np.abs(self.js_matrix - fresh.js_matrix) > tol):
            raise InvalidPartitionError("cached JS matrix is stale")

    # -- mutation --------------------------------------------------------

    def apply(self, proposal: SwitchProposal) -> None:
        """Execute an accepted switch and refresh the touched caches."""
        client, src, tgt = proposal.client, proposal.source, proposal.target
        if self.assignment[client] != src:
            raise InvalidSwitchError("proposal is stale: client moved already")
        if src == tgt:
            raise InvalidSwitchError("source and target coalitions are equal")
        if len(self.coalitions[src]) == 1:
            raise InvalidSwitchError("switch would empty the source coalition")

        self.coalitions[src].discard(client)
        self.coalitions[tgt].add(client)
        self.assignment[client] = tgt
        self.counts[src] -= self.client_counts[client]
        self.counts[tgt] += self.client_counts[client]
        for m in (src, tgt):
            self.dists[m] = LabelDistribution.from_counts(self.counts[m])
        for m in (src, tgt):
            for k in range(self.num_coalitions):
                value = 0.0 if k == m else js_divergence(self.dists[m], self.dists[k])
                self.js_matrix[m, k] = value
                self.js_matrix[k, m] = value


def evaluate_switch(partition: Partition, client: int, target: int) -> SwitchProposal:
    """Price a single-client move without mutating the partition.

    Only the JS pairs touching the source and target coalitions are
    recomputed; every other pair is unaffected by the move.
    """
    src = int(partition.assignment[client])
    if target == src:
        raise InvalidSwitchError("target equals the client's current coalition")
    if not 0 <= target < partition.num_coalitions:
        raise InvalidSwitchError("target coalition index out of range")
    if len(partition.coalitions[src]) == 1:
        raise InvalidSwitchError("switch would empty the source coalition")

    moved = partition.client_counts[client]
    new_src = LabelDistribution.from_counts(partition.counts[src] - moved)
    new_tgt = LabelDistribution.from_counts(partition.counts[target] + moved)

    delta = js_divergence(new_src, new_tgt) - partition.js_matrix[src, target]
    for k in range(partition.num_coalitions):
        if k == src or k == target:
            continue
        other = partition.dists[k]
        delta += js_divergence(new_src, other) - partition.js_matrix[src, k]
        delta += js_divergence(new_tgt, other) - partition.js_matrix[target, k]
    return SwitchProposal(
        client=client,
        source=src,
        target=target,
        delta_js=delta / partition.pair_denominator(),
    )


def best_switch(
    partition: Partition, client: int, tolerance: float = SWITCH_TOLERANCE
) -> SwitchProposal | None:
    """Best admissible move for one client, or None when staying wins.

    All target coalitions are priced; the proposal with the strictly
    smallest resulting avg JS is returned provided it beats staying by
    more than ``tolerance``.  Equal deltas resolve to the lowest
    coalition index, which keeps runs reproducible.
    """
    src = int(partition.assignment[client])
    if len(partition.coalitions[src]) == 1:
        return None
    best: SwitchProposal | None = None
    for target in range(partition.num_coalitions):
        if target == src:
            continue
        proposal = evaluate_switch(partition, client, target)
        if best is None or proposal.delta_js < best.delta_js:
            best = proposal
    if best is not None and best.delta_js < -tolerance:
        return best
    return None


def run_coalition_formation(
    initial: Partition,
    max_iters: int,
    rng_seed: int | None = 0,
    tolerance: float = SWITCH_TOLERANCE,
) -> tuple[Partition, GameTrace]:
    """Randomized improvement loop over single-client switches.

    Each iteration samples a client uniformly at random and applies its
    best improving switch, if any.  The loop stops once no switch has
    been accepted for n_clients consecutive samples and an exhaustive
    deviation check confirms stability (random sampling alone can miss
    an improving client), or when ``max_iters`` is reached.  The
    returned trace records every sampled iteration, so its avg JS
    column is non-increasing.
    """
    initial.validate()
    partition = initial.copy()
    rng = np.random.default_rng(rng_seed)
    trace = GameTrace(seed=rng_seed)

    n = partition.n_clients
    quiet = 0
    iteration = 0
    converged = False
    while iteration < max_iters:
        client = int(rng.integers(n))
        src = int(partition.assignment[client])
        proposal = best_switch(partition, client, tolerance)
        if proposal is not None:
            partition.apply(proposal)
            quiet = 0
            trace.entries.append(
                (iteration, client, src, proposal.target, partition.avg_js())
            )
        else:
            quiet += 1
            trace.entries.append((iteration, client, src, None, partition.avg_js()))
        iteration += 1
        if quiet >= n:
            if certify_stability(partition, tolerance):
                converged = True
                break
            quiet = 0  # sampling missed an improving client; keep going

    trace.iterations_used = iteration
    trace.converged = converged or certify_stability(partition, tolerance)
    return partition, trace


def potential(partition: Partition) -> float:
    """Un-normalized pairwise JS sum over all coalition pairs."""
    dists = [LabelDistribution.from_counts(row) for row in partition.counts]
    total = 0.0
    for i in range(partition.num_coalitions):
        for j in range(i + 1, partition.num_coalitions):
            total += js_divergence(dists[i], dists[j])
    return total


def coalition_utility(partition: Partition, first: int, second: int) -> float:
    """JS sum restricted to pairs touching the two given coalitions.

    This is the switching client's coalition-level utility: the pairs
    among the untouched coalitions drop out of any switch between
    ``first`` and ``second``, so the utility change under that switch
    equals the potential change exactly.
    """
    affected = {first, second}
    total = 0.0
    for i in range(partition.num_coalitions):
        for j in range(i + 1, partition.num_coalitions):
            if i in affected or j in affected:
                total += js_divergence(partition.dists[i], partition.dists[j])
    return total


def verify_exact_potential(
    partition: Partition, proposal: SwitchProposal, tol: float = 1e-9
) -> bool:
    """Check the exact-potential identity for one admissible switch.

    The potential difference is evaluated from full pairwise sums on
    fresh pre/post partitions, while the utility difference only sums
    the pairs touching the source and target coalitions; the two must
    agree within ``tol``.
    """
    post = partition.copy()
    post.apply(proposal)
    delta_potential = potential(post) - potential(partition)
    delta_utility = coalition_utility(
        post, proposal.source, proposal.target
    ) - coalition_utility(partition, proposal.source, proposal.target)
    return abs(delta_potential - delta_utility) <= tol


def certify_stability(
    partition: Partition, tolerance: float = SWITCH_TOLERANCE
) -> bool:
    """Exhaustively confirm that no single-client switch improves avg JS."""
    for client in range(partition.n_clients):
        src = int(partition.assignment[client])
        if len(partition.coalitions[src]) == 1:
            continue
        for target in range(partition.num_coalitions):
            if target == src:
                continue
            if evaluate_switch(partition, client, target).delta_js < -tolerance:
                return False
    return True


def random_partition(
    client_label_counts: np.ndarray,
    num_coalitions: int,
    rng: np.random.Generator,
    denominator: str = "M",
) -> Partition:
    """Random client-to-edge association with every edge non-empty.

    One client is dealt to each coalition first (divergences are
    undefined on an empty coalition), the rest are assigned uniformly.
    """
    n = np.asarray(client_label_counts).shape[0]
    if n < num_coalitions:
        raise InvalidPartitionError("fewer clients than coalitions")
    assignment = np.empty(n, dtype=np.int64)
    order = rng.permutation(n)
    for m in range(num_coalitions):
        assignment[order[m]] = m
    assignment[order[num_coalitions:]] = rng.integers(
        num_coalitions, size=n - num_coalitions
    )
    return Partition(assignment, client_label_counts, num_coalitions, denominator)
