"""Set functions over bus subsets used to score and drive subset selection.

Five objectives: percentage coverage (pc), percentage stop coverage (psc),
spatial facility location (fls), its space-time extension with a causal
decay kernel (flst, quadratic-time reference), and the regressive
facility-location recursion (rfl) that computes the same value in linear
time per location. pc/psc are percentages in [0, 100]; the facility
objectives are normalized to [0, 1].

All gains accumulate in a fixed order (locations inner, slots outer), so
repeated runs are bit-identical and rfl at rho=0 reproduces fls exactly.
Coverage marginals are computed from the fresh-cell count alone, so a
marginal that is unchanged since an earlier round reproduces the identical
float; the lazy selector's stale upper bounds rely on that.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .occupancy import OccupancyTensor, sampling_matrix
from .similarity import causal_kernel

__all__ = [
    "pc_gain",
    "psc_gain",
    "fls_gain",
    "flst_gain_reference",
    "rfl_gain",
    "incremental_gain",
    "make_objective",
    "GainState",
]


def _check_similarity(S: np.ndarray, L: int) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.shape != (L, L):
        raise ValueError(f"similarity matrix shape {S.shape} does not match L={L}")
    if np.min(S) < 0.0 or np.max(S) > 1.0:
        raise ValueError("similarity entries must lie in [0, 1]")
    return S


def _check_rho(rho: float) -> float:
    if not (0.0 <= rho <= 1.0):
        raise ValueError(f"rho must be in [0, 1], got {rho}")
    return float(rho)


def _spatial_profile(tensor: OccupancyTensor, buses, S: np.ndarray) -> np.ndarray:
    """(L, T) profile: column t holds max similarity to any location sampled at t.

    Slots where the subset samples nothing are all-zero columns; every
    similarity is nonnegative, so zero encodes the absent spatial term.
    """
    prof = np.zeros((tensor.L, tensor.T))
    buses = list(buses)
    if not buses:
        return prof
    flat = np.unique(np.concatenate([tensor.cells(b) for b in buses]))
    if flat.size == 0:
        return prof
    t_idx = flat // tensor.L
    l_idx = flat % tensor.L
    # flat indices are sorted, so cells of one slot form a contiguous group
    starts = np.flatnonzero(np.r_[True, t_idx[1:] != t_idx[:-1]])
    prof[:, t_idx[starts]] = np.maximum.reduceat(S[:, l_idx], starts, axis=1)
    return prof


def _plain_total(prof: np.ndarray) -> float:
    total = 0.0
    for t in range(prof.shape[1]):
        total += float(prof[:, t].sum())
    return total


def _regressive(prof: np.ndarray, rho: float) -> tuple[np.ndarray, float]:
    """Run the decay recursion over a spatial profile; returns (pi, total)."""
    L, T = prof.shape
    pi = np.empty((L, T))
    prev = np.zeros(L)
    total = 0.0
    for t in range(T):
        prev = np.maximum(prof[:, t], rho * prev)
        pi[:, t] = prev
        total += float(prev.sum())
    return pi, total


def pc_gain(tensor: OccupancyTensor, buses) -> float:
    """Percentage of (location, slot) cells sampled by the subset."""
    theta = sampling_matrix(tensor, buses)
    return 100.0 * int(theta.sum()) / float(tensor.L * tensor.T)


def psc_gain(tensor: OccupancyTensor, buses) -> float:
    """Percentage of locations sampled during at least one slot."""
    theta = sampling_matrix(tensor, buses)
    return 100.0 * int(theta.any(axis=1).sum()) / float(tensor.L)


def fls_gain(tensor: OccupancyTensor, buses, S: np.ndarray) -> float:
    """Mean over cells of the best similarity to a location sampled in the same slot."""
    S = _check_similarity(S, tensor.L)
    prof = _spatial_profile(tensor, buses, S)
    return _plain_total(prof) / float(tensor.L * tensor.T)


def flst_gain_reference(tensor: OccupancyTensor, buses, S: np.ndarray, rho: float) -> float:
    """Space-time facility gain by direct scan over all earlier slots.

    For each target slot t the maximum of rho**(t-j) * similarity runs over
    every sampled slot j <= t. Quadratic in T by construction; kept as the
    slow oracle the recursive form is checked against.
    """
    S = _check_similarity(S, tensor.L)
    rho = _check_rho(rho)
    prof = _spatial_profile(tensor, buses, S)
    L, T = prof.shape
    total = 0.0
    best = np.empty(L)
    for t in range(T):
        best.fill(0.0)
        for j in range(t + 1):
            np.maximum(best, causal_kernel(rho, t, j) * prof[:, j], out=best)
        total += float(best.sum())
    return total / float(L * T)


def rfl_gain(tensor: OccupancyTensor, buses, S: np.ndarray, rho: float) -> float:
    """Space-time facility gain via the forward recursion.

    pi_t = max(spatial term at t, rho * pi_{t-1}) with pi_0 = 0; one pass
    over slots replaces the quadratic scan of flst_gain_reference and
    yields the identical value. rho=0 reduces to fls_gain exactly.
    """
    S = _check_similarity(S, tensor.L)
    rho = _check_rho(rho)
    prof = _spatial_profile(tensor, buses, S)
    _, total = _regressive(prof, rho)
    return total / float(tensor.L * tensor.T)


class _ObjectiveBase:
    """Stateful counterpart of a gain function, for greedy selection.

    evaluate() recomputes from scratch; new_state/marginal/add maintain an
    incremental state whose gain stays bit-identical to evaluate() on the
    same subset.
    """

    kind: str = ""

    def evaluate(self, tensor: OccupancyTensor, buses) -> float:
        raise NotImplementedError

    def new_state(self, tensor: OccupancyTensor):
        raise NotImplementedError

    def marginal(self, state, candidate: int) -> float:
        """gain(selected + candidate) - gain(selected), without mutating state."""
        raise NotImplementedError

    def add(self, state, bus: int) -> None:
        raise NotImplementedError

    def state_gain(self, state) -> float:
        raise NotImplementedError


@dataclass
class _CellCoverState:
    objective: "_ObjectiveBase"
    tensor: OccupancyTensor
    selected: list[int] = field(default_factory=list)
    covered: np.ndarray = None  # flat length L*T boolean
    count: int = 0


class PercentCoverage(_ObjectiveBase):
    kind = "pc"

    def evaluate(self, tensor, buses):
        return pc_gain(tensor, buses)

    def new_state(self, tensor):
        return _CellCoverState(self, tensor, [], np.zeros(tensor.L * tensor.T, dtype=bool), 0)

    def _gain(self, state, count):
        t = state.tensor
        return 100.0 * count / float(t.L * t.T)

    def marginal(self, state, candidate):
        # The fresh-cell count alone determines the marginal, so equal
        # marginals compare equal across rounds (no subtraction noise).
        new = int(np.count_nonzero(~state.covered[state.tensor.cells(candidate)]))
        return self._gain(state, new)

    def add(self, state, bus):
        cells = state.tensor.cells(bus)
        state.count += int(np.count_nonzero(~state.covered[cells]))
        state.covered[cells] = True
        state.selected.append(bus)

    def state_gain(self, state):
        return self._gain(state, state.count)


@dataclass
class _StopCoverState:
    objective: "_ObjectiveBase"
    tensor: OccupancyTensor
    selected: list[int] = field(default_factory=list)
    covered: np.ndarray = None  # length L boolean
    count: int = 0


class PercentStopCoverage(_ObjectiveBase):
    kind = "psc"

    def evaluate(self, tensor, buses):
        return psc_gain(tensor, buses)

    def new_state(self, tensor):
        return _StopCoverState(self, tensor, [], np.zeros(tensor.L, dtype=bool), 0)

    def _gain(self, state, count):
        return 100.0 * count / float(state.tensor.L)

    def _bus_locs(self, state, bus):
        return np.unique(state.tensor.cells(bus) % state.tensor.L)

    def marginal(self, state, candidate):
        new = int(np.count_nonzero(~state.covered[self._bus_locs(state, candidate)]))
        return self._gain(state, new)

    def add(self, state, bus):
        locs = self._bus_locs(state, bus)
        state.count += int(np.count_nonzero(~state.covered[locs]))
        state.covered[locs] = True
        state.selected.append(bus)

    def state_gain(self, state):
        return self._gain(state, state.count)


@dataclass
class _FacilityState:
    objective: "_ObjectiveBase"
    tensor: OccupancyTensor
    selected: list[int] = field(default_factory=list)
    spatial: np.ndarray = None  # (L, T) running profile


@dataclass
class GainState:
    """Running facility values of the decay recursion over the selected subset."""

    objective: "_ObjectiveBase"
    tensor: OccupancyTensor
    rho: float
    selected: list[int] = field(default_factory=list)
    spatial: np.ndarray = None  # (L, T) running profile
    pi: np.ndarray = None  # (L, T) recursion values
    gain_sum: float = 0.0  # sum of pi before normalization


class _SimilarityObjective(_ObjectiveBase):
    def __init__(self, S: np.ndarray):
        self.S = np.asarray(S, dtype=float)

    def _patched(self, state, candidate):
        """Copy of the state profile with the candidate's slots folded in."""
        prof = state.spatial.copy()
        S = self.S
        for t, locs in state.tensor.slot_locations(candidate):
            np.maximum(prof[:, t], S[:, locs].max(axis=1), out=prof[:, t])
        return prof

    def _fold(self, prof, tensor, bus):
        for t, locs in tensor.slot_locations(bus):
            np.maximum(prof[:, t], self.S[:, locs].max(axis=1), out=prof[:, t])


class SpatialFacilityLocation(_SimilarityObjective):
    kind = "fls"

    def evaluate(self, tensor, buses):
        return fls_gain(tensor, buses, self.S)

    def new_state(self, tensor):
        _check_similarity(self.S, tensor.L)
        return _FacilityState(self, tensor, [], np.zeros((tensor.L, tensor.T)))

    def marginal(self, state, candidate):
        t = state.tensor
        denom = float(t.L * t.T)
        new_total = _plain_total(self._patched(state, candidate))
        return new_total / denom - _plain_total(state.spatial) / denom

    def add(self, state, bus):
        self._fold(state.spatial, state.tensor, bus)
        state.selected.append(bus)

    def state_gain(self, state):
        t = state.tensor
        return _plain_total(state.spatial) / float(t.L * t.T)


class RegressiveFacilityLocation(_SimilarityObjective):
    kind = "rfl"

    def __init__(self, S: np.ndarray, rho: float):
        super().__init__(S)
        self.rho = _check_rho(rho)

    def evaluate(self, tensor, buses):
        return rfl_gain(tensor, buses, self.S, self.rho)

    def new_state(self, tensor):
        _check_similarity(self.S, tensor.L)
        state = GainState(self, tensor, self.rho, [], np.zeros((tensor.L, tensor.T)))
        state.pi, state.gain_sum = _regressive(state.spatial, self.rho)
        return state

    def marginal(self, state, candidate):
        t = state.tensor
        denom = float(t.L * t.T)
        _, new_total = _regressive(self._patched(state, candidate), self.rho)
        return new_total / denom - state.gain_sum / denom

    def add(self, state, bus):
        self._fold(state.spatial, state.tensor, bus)
        state.pi, state.gain_sum = _regressive(state.spatial, self.rho)
        state.selected.append(bus)

    def state_gain(self, state):
        t = state.tensor
        return state.gain_sum / float(t.L * t.T)


def make_objective(kind: str, S: np.ndarray | None = None, rho: float | None = None) -> _ObjectiveBase:
    """Objective factory keyed by kind: pc, psc, fls, or rfl.

    fls and rfl require a similarity matrix; rfl additionally takes the
    decay rate rho.
    """
    if kind == "pc":
        return PercentCoverage()
    if kind == "psc":
        return PercentStopCoverage()
    if kind == "fls":
        if S is None:
            raise ValueError("fls objective requires a similarity matrix")
        return SpatialFacilityLocation(S)
    if kind == "rfl":
        if S is None or rho is None:
            raise ValueError("rfl objective requires a similarity matrix and rho")
        return RegressiveFacilityLocation(S, rho)
    raise ValueError(f"unknown objective kind {kind!r}")


def incremental_gain(state, tensor: OccupancyTensor, buses, candidate: int) -> float:
    """Marginal gain of adding one bus to the subset the state was built for.

    Pure with respect to ``state``; returns gain(buses + candidate) -
    gain(buses). The facility objectives match the from-scratch difference
    bitwise; the coverage objectives compute the gain from the fresh-cell
    count, which can differ from the two-term subtraction in its last bit.
    """
    if state.tensor is not tensor:
        raise ValueError("state was built for a different tensor")
    if sorted(state.selected) != sorted(buses):
        raise ValueError(f"state tracks subset {sorted(state.selected)}, not {sorted(buses)}")
    if candidate in state.selected:
        raise ValueError(f"candidate bus {candidate} already selected")
    return state.objective.marginal(state, candidate)
