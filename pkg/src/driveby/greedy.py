"""Greedy subset selection with a brute-force oracle and property checks.

Eager greedy evaluates every remaining candidate each round. Lazy greedy
reuses stale marginals as upper bounds (valid under submodularity) and
produces the identical selection, usually with far fewer evaluations.
Ties always break toward the lowest bus id.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .occupancy import OccupancyTensor

logger = logging.getLogger(__name__)

BRUTE_FORCE_BUDGET = 10**6


@dataclass
class SelectionResult:
    """Ordered picks with the objective value reached after each one."""

    chosen: list[int]
    gain_trajectory: list[float]
    objective_kind: str
    rho: float | None
    k: int
    n_evaluations: int = 0


@dataclass
class PropertyReport:
    """Outcome of randomized monotonicity / diminishing-returns sampling."""

    passed: bool
    trials: int
    worst_monotonicity_slack: float
    worst_submodularity_slack: float
    witness: dict | None = None


def _check_k(k: int, B: int) -> None:
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if k > B:
        raise ValueError(f"k={k} exceeds fleet size B={B}")


def greedy_select(tensor: OccupancyTensor, objective, k: int) -> SelectionResult:
    """Pick k buses, each round committing the candidate with the best marginal."""
    _check_k(k, tensor.B)
    state = objective.new_state(tensor)
    remaining = list(range(tensor.B))
    chosen: list[int] = []
    trajectory: list[float] = []
    evals = 0
    for _ in range(k):
        best_bus = -1
        best_m = -math.inf
        for b in remaining:
            m = objective.marginal(state, b)
            evals += 1
            if m > best_m:
                best_m = m
                best_bus = b
        objective.add(state, best_bus)
        remaining.remove(best_bus)
        chosen.append(best_bus)
        trajectory.append(objective.state_gain(state))
    return SelectionResult(chosen, trajectory, objective.kind, getattr(objective, "rho", None), k, evals)


def lazy_greedy_select(tensor: OccupancyTensor, objective, k: int) -> SelectionResult:
    """Greedy selection via a stale-upper-bound priority queue.

    A popped entry is committed only if its marginal was computed this
    round; otherwise it is refreshed and pushed back. Stale bounds never
    underestimate under submodularity, so the output matches
    greedy_select, including the lowest-id tie-break (the heap orders
    equal bounds by bus id). A stale bound within rounding noise of the
    committing value is refreshed first: an exact tie whose stale float
    landed a few ulps low must still be resolved on fresh marginals.
    """
    _check_k(k, tensor.B)
    state = objective.new_state(tensor)
    heap = [(-math.inf, b, -1) for b in range(tensor.B)]
    chosen: list[int] = []
    trajectory: list[float] = []
    evals = 0
    for rnd in range(k):
        while True:
            neg_bound, b, stamp = heapq.heappop(heap)
            if stamp != rnd:
                m = objective.marginal(state, b)
                evals += 1
                heapq.heappush(heap, (-m, b, rnd))
                continue
            slack = 1e-12 * max(1.0, -neg_bound)
            stale_near = []
            fresh_near = []
            while heap and heap[0][0] <= neg_bound + slack:
                entry = heapq.heappop(heap)
                (fresh_near if entry[2] == rnd else stale_near).append(entry)
            for entry in fresh_near:
                heapq.heappush(heap, entry)
            if not stale_near:
                break
            for _, b2, _ in stale_near:
                m2 = objective.marginal(state, b2)
                evals += 1
                heapq.heappush(heap, (-m2, b2, rnd))
            heapq.heappush(heap, (neg_bound, b, stamp))
        objective.add(state, b)
        chosen.append(b)
        trajectory.append(objective.state_gain(state))
    return SelectionResult(chosen, trajectory, objective.kind, getattr(objective, "rho", None), k, evals)


def brute_force_select(tensor: OccupancyTensor, objective, k: int) -> SelectionResult:
    """Exhaustive optimum over all k-subsets; ties keep the lexicographically first.

    Refuses instances with more than BRUTE_FORCE_BUDGET subsets.
    """
    _check_k(k, tensor.B)
    n_subsets = math.comb(tensor.B, k)
    if n_subsets > BRUTE_FORCE_BUDGET:
        raise ValueError(
            f"brute force over C({tensor.B},{k}) = {n_subsets} subsets exceeds the budget of {BRUTE_FORCE_BUDGET}"
        )
    best_subset = None
    best_gain = -math.inf
    evals = 0
    for subset in itertools.combinations(range(tensor.B), k):
        g = objective.evaluate(tensor, subset)
        evals += 1
        if g > best_gain:
            best_gain = g
            best_subset = subset
    chosen = list(best_subset)
    trajectory = [objective.evaluate(tensor, chosen[: i + 1]) for i in range(k)]
    return SelectionResult(chosen, trajectory, objective.kind, getattr(objective, "rho", None), k, evals)


def random_select(tensor: OccupancyTensor, k: int, seed: int) -> SelectionResult:
    """Uniform k-subset baseline, reproducible by seed."""
    _check_k(k, tensor.B)
    rng = np.random.default_rng(seed)
    chosen = sorted(rng.choice(tensor.B, size=k, replace=False).tolist())
    return SelectionResult(chosen, [], "random", None, k, 0)


def check_monotone_submodular(objective, tensor: OccupancyTensor, trials: int, seed: int) -> PropertyReport:
    """Sample random chains C subset-of D and outsiders b, checking that gains
    never shrink along the chain and that marginals diminish.

    Slacks are gain(D) - gain(C) and
    (gain(C+b) - gain(C)) - (gain(D+b) - gain(D)); the report passes when
    the worst of each stays above -1e-12. Only objective.evaluate is used,
    so any object exposing it can be checked.
    """
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    rng = np.random.default_rng(seed)
    B = tensor.B
    worst_mono = math.inf
    worst_sub = math.inf
    witness = None
    tol = -1e-12
    for _ in range(trials):
        d_size = int(rng.integers(0, B))  # leave at least one outsider
        D = np.sort(rng.choice(B, size=d_size, replace=False))
        c_size = int(rng.integers(0, d_size + 1))
        C = np.sort(rng.choice(D, size=c_size, replace=False)) if c_size else np.array([], dtype=int)
        outsiders = np.setdiff1d(np.arange(B), D)
        b = int(rng.choice(outsiders))

        g_c = objective.evaluate(tensor, C)
        g_d = objective.evaluate(tensor, D)
        g_cb = objective.evaluate(tensor, np.append(C, b))
        g_db = objective.evaluate(tensor, np.append(D, b))

        mono = g_d - g_c
        sub = (g_cb - g_c) - (g_db - g_d)
        if mono < worst_mono or sub < worst_sub:
            if min(mono, sub) < tol:
                witness = {
                    "C": C.tolist(),
                    "D": D.tolist(),
                    "b": b,
                    "gain_C": g_c,
                    "gain_D": g_d,
                    "gain_C_plus_b": g_cb,
                    "gain_D_plus_b": g_db,
                }
        worst_mono = min(worst_mono, mono)
        worst_sub = min(worst_sub, sub)
    passed = worst_mono >= tol and worst_sub >= tol
    if not passed:
        logger.warning(
            "property check failed: worst monotonicity %.3e, worst submodularity %.3e",
            worst_mono, worst_sub,
        )
    return PropertyReport(passed, trials, worst_mono, worst_sub, witness)
