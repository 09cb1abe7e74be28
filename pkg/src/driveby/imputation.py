"""Dense-map reconstruction from partially observed entries.

Alternating low-rank completion with two extensions aimed at drive-by
sampling: a similarity side-information factor that gives never-observed
(cold) rows a usable estimate, and an optional temporal coupling that ties
consecutive column factors through a learned linear transition.

The scheme is deterministic: precisions are re-estimated from residuals
at the top of each outer iteration, factor updates carry the per-column
covariance corrections alongside the means, and the only randomness is
the seeded initialization.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .errors import DataError, DegenerateInputError, NumericalError
from .simgen import SpatioTemporalMatrix

logger = logging.getLogger(__name__)

GAMMA = 1e-6  # fixed ridge weight on all factors (broad prior)
PRECISION_CAP = 1e15
TEMPORAL_CAP = 1e12
INIT_STD = 0.1
MONOTONE_TOL = 1e-9
# The transition penalty weight is kept below this fraction of the average
# data-term curvature in the column update. A least-squares F nearly
# interpolates the factors early on (they are still noise), and an unchecked
# precision estimate would lock them into those junk dynamics before the
# data precision has grown.
TEMPORAL_FRACTION = 0.1


@dataclass(frozen=True)
class ObservationSet:
    """Observed (row, column, value) entries of an L x T matrix.

    Rows with no observation at all are the cold-start rows; they are
    recoverable only through side information.
    """

    L: int
    T: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", values)
        if not (len(rows) == len(cols) == len(values)):
            raise DataError("rows, cols, and values must have equal length")
        if len(rows) and (rows.min() < 0 or rows.max() >= self.L or cols.min() < 0 or cols.max() >= self.T):
            raise DataError(f"observation indices outside the {self.L} x {self.T} grid")
        if not np.all(np.isfinite(values)):
            raise DataError("observed values must be finite")
        flat = rows * self.T + cols
        if len(np.unique(flat)) != len(flat):
            raise DataError("duplicate (row, col) observations")

    @classmethod
    def from_sampling(cls, truth: np.ndarray, theta: np.ndarray) -> "ObservationSet":
        """Keep the entries of ``truth`` where the sampling matrix is nonzero."""
        truth = np.asarray(truth, dtype=float)
        theta = np.asarray(theta)
        if truth.shape != theta.shape:
            raise DataError(f"truth shape {truth.shape} does not match sampling shape {theta.shape}")
        rows, cols = np.nonzero(theta)
        return cls(truth.shape[0], truth.shape[1], rows, cols, truth[rows, cols])

    def __len__(self) -> int:
        return len(self.values)

    def cold_rows(self) -> np.ndarray:
        """Indices of rows with zero observations, ascending."""
        observed = np.zeros(self.L, dtype=bool)
        observed[self.rows] = True
        return np.flatnonzero(~observed)

    def mask(self) -> np.ndarray:
        out = np.zeros((self.L, self.T), dtype=bool)
        out[self.rows, self.cols] = True
        return out


@dataclass
class CompletionFactors:
    """Factor state of one completion run (means plus covariance corrections)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    F: np.ndarray
    beta: float
    beta1: float
    Xi_A: np.ndarray  # (L, r, r)
    Xi_B: np.ndarray  # (T, r, r)
    Xi_C: np.ndarray  # (r, r)


def mre(truth, estimate) -> float:
    """Relative Frobenius error ||truth - estimate|| / ||truth|| as a fraction."""
    t = np.asarray(getattr(truth, "values", truth), dtype=float)
    e = np.asarray(getattr(estimate, "values", estimate), dtype=float)
    if t.shape != e.shape:
        raise ValueError(f"shape mismatch: truth {t.shape} vs estimate {e.shape}")
    denom = float(np.linalg.norm(t))
    if denom <= 0.0:
        raise DegenerateInputError("truth matrix has zero norm; relative error is undefined")
    return float(np.linalg.norm(t - e)) / denom


def _batched_spd_solve(M: np.ndarray, rhs: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    """Solve a stack of small SPD systems, returning solutions and inverses.

    Singular batches get one diagonal-jitter retry before giving up.
    """
    try:
        sol = np.linalg.solve(M, rhs[..., None])[..., 0]
        inv = np.linalg.inv(M)
    except np.linalg.LinAlgError:
        jitter = 1e-8 * max(float(np.mean(np.trace(M, axis1=-2, axis2=-1))) / M.shape[-1], 1.0)
        M = M + jitter * np.eye(M.shape[-1])
        try:
            sol = np.linalg.solve(M, rhs[..., None])[..., 0]
            inv = np.linalg.inv(M)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular normal equations in the {what} update") from exc
    if not (np.all(np.isfinite(sol)) and np.all(np.isfinite(inv))):
        raise NumericalError(f"non-finite solution in the {what} update")
    return sol, inv


def _omega_residual_sq(obs: ObservationSet, A: np.ndarray, B: np.ndarray) -> float:
    pred = np.einsum("ij,ij->i", A[obs.rows], B[obs.cols])
    diff = obs.values - pred
    return float(diff @ diff)


def _temporal_residual_sq(B: np.ndarray, F: np.ndarray) -> float:
    if B.shape[0] < 2:
        return 0.0
    diff = B[1:] - B[:-1] @ F.T
    return float(np.sum(diff * diff))


def _objective(obs, G, A, B, C, F, beta, beta1, lam_f) -> float:
    val = beta * _omega_residual_sq(obs, A, B)
    val += GAMMA * (float(np.sum(A * A)) + float(np.sum(B * B)) + float(np.sum(C * C)))
    if beta1 > 0.0:
        side = G - A @ C.T
        val += beta1 * float(np.sum(side * side))
    if lam_f > 0.0:
        val += lam_f * _temporal_residual_sq(B, F)
    return val


def _descent_check(quad_old: float, lin_old: float, quad_new: float, lin_new: float, what: str) -> None:
    """Verify a block update did not increase its own normal-equation objective.

    Each sweep solves M x = rhs exactly, so x^T M x - 2 x^T rhs must not
    rise; tolerance is scaled by the quadratic-form magnitude because the
    two terms cancel near the optimum.
    """
    q_old = quad_old - 2.0 * lin_old
    q_new = quad_new - 2.0 * lin_new
    scale = max(abs(quad_old), abs(quad_new), 1.0)
    if q_new > q_old + MONOTONE_TOL * scale:
        raise NumericalError(
            f"{what} update increased its normal-equation objective: {q_old:.6e} -> {q_new:.6e}"
        )


def _alternate(
    obs: ObservationSet,
    G: np.ndarray,
    r: int,
    max_iters: int,
    tol: float,
    seed: int,
    side_weight: float,
    temporal: bool,
    transition: np.ndarray | None,
    truth: np.ndarray | None,
    method: str,
) -> SpatioTemporalMatrix:
    L, T = obs.L, obs.T
    if not (1 <= r <= min(L, T)):
        raise ValueError(f"rank r={r} must be in [1, min(L, T)={min(L, T)}]")
    if max_iters < 1:
        raise ValueError(f"max_iters must be at least 1, got {max_iters}")
    if side_weight < 0:
        raise ValueError(f"side_weight must be nonnegative, got {side_weight}")
    G = np.asarray(G, dtype=float)
    if G.shape != (L, L):
        raise ValueError(f"similarity shape {G.shape} does not match L={L}")
    if len(obs) < r:
        warnings.warn(f"only {len(obs)} observations for rank {r}; expect a poor fit")

    # Per-row and per-column observation slices, resolved once.
    order_r = np.argsort(obs.rows, kind="stable")
    row_splits = np.searchsorted(obs.rows[order_r], np.arange(L + 1))
    order_c = np.argsort(obs.cols, kind="stable")
    col_splits = np.searchsorted(obs.cols[order_c], np.arange(T + 1))
    # Rows with at least one observation.  Only these may inform the side
    # factor: an unobserved row's latent vector is a pure function of C, so
    # letting it vote on C closes a feedback loop that slowly inflates both
    # along weak directions of C (the update approaches an unregularized
    # pseudo-inverse there).  With full row coverage the restriction is a
    # no-op.
    anchored = np.setdiff1d(np.arange(L), obs.cold_rows())

    rng = np.random.default_rng(seed)
    A = INIT_STD * rng.standard_normal((L, r))
    B = INIT_STD * rng.standard_normal((T, r))
    C = INIT_STD * rng.standard_normal((L, r))
    F = np.eye(r) if transition is None else np.asarray(transition, dtype=float).copy()
    if F.shape != (r, r):
        raise ValueError(f"transition shape {F.shape} does not match rank {r}")
    Xi_B = np.zeros((T, r, r))
    Xi_C = np.zeros((r, r))
    eye = np.eye(r)

    n_obs = len(obs)
    objective_track: list[float] = []
    mre_track: list[float] = []
    converged = False
    iterations = 0
    prev_estimate = A @ B.T
    beta = beta1 = lam_f = 0.0

    for iterations in range(1, max_iters + 1):
        # Precisions from current residuals; fixed for the rest of the iteration.
        beta = min(n_obs / max(_omega_residual_sq(obs, A, B), 1e-30), PRECISION_CAP) if n_obs else 1.0
        if side_weight > 0.0:
            side = G - A @ C.T
            beta1 = min(side_weight * L * L / max(float(np.sum(side * side)), 1e-30), PRECISION_CAP)
        else:
            beta1 = 0.0
        if temporal and T > 1:
            lam_nat = r * (T - 1) / max(_temporal_residual_sq(B, F), 1e-30)
            mean_sq_a = float(np.mean(np.sum(A * A, axis=1)))
            data_scale = TEMPORAL_FRACTION * beta * n_obs * mean_sq_a / (T * r)
            lam_f = min(lam_nat, data_scale, TEMPORAL_CAP)
        else:
            lam_f = 0.0
        # Row factors: per-row normal equations over observed columns plus side term.
        bbT = B[:, :, None] * B[:, None, :] + Xi_B
        side_term = beta1 * (C.T @ C + Xi_C)
        M_rows = np.empty((L, r, r))
        rhs_rows = np.empty((L, r))
        for i in range(L):
            sl = order_r[row_splits[i]:row_splits[i + 1]]
            cols_i = obs.cols[sl]
            M_rows[i] = GAMMA * eye + beta * bbT[cols_i].sum(axis=0) + side_term
            rhs_rows[i] = beta * (B[cols_i].T @ obs.values[sl])
        if beta1 > 0.0:
            rhs_rows += beta1 * (G @ C)
        quad_o = float(np.einsum("ij,ijk,ik->", A, M_rows, A))
        lin_o = float(np.sum(A * rhs_rows))
        A, Xi_A = _batched_spd_solve(M_rows, rhs_rows, "row-factor")
        _descent_check(quad_o, lin_o, float(np.einsum("ij,ijk,ik->", A, M_rows, A)),
                       float(np.sum(A * rhs_rows)), "row-factor")

        # Column factors.
        aaT = A[:, :, None] * A[:, None, :] + Xi_A
        data_blocks = np.empty((T, r, r))
        rhs_cols = np.empty((T, r))
        for t in range(T):
            sl = order_c[col_splits[t]:col_splits[t + 1]]
            rows_t = obs.rows[sl]
            data_blocks[t] = GAMMA * eye + beta * aaT[rows_t].sum(axis=0)
            rhs_cols[t] = beta * (A[rows_t].T @ obs.values[sl])
        if lam_f > 0.0:
            B, Xi_B = _solve_temporal_chain(data_blocks, rhs_cols, F, lam_f, B)
        else:
            quad_o = float(np.einsum("ij,ijk,ik->", B, data_blocks, B))
            lin_o = float(np.sum(B * rhs_cols))
            B, Xi_B = _batched_spd_solve(data_blocks, rhs_cols, "column-factor")
            _descent_check(quad_o, lin_o, float(np.einsum("ij,ijk,ik->", B, data_blocks, B)),
                           float(np.sum(B * rhs_cols)), "column-factor")

        # Side factor, fitted against anchored rows only.
        if beta1 > 0.0:
            A_anch = A[anchored] if anchored.size < L else A
            G_anch = G[:, anchored] if anchored.size < L else G
            M_c = beta1 * (A_anch.T @ A_anch) + GAMMA * eye
            try:
                Xi_C = np.linalg.inv(M_c)
            except np.linalg.LinAlgError as exc:
                raise NumericalError("singular normal equations in the side-factor update") from exc
            rhs_c = beta1 * (G_anch @ A_anch)
            quad_o = float(np.sum((C @ M_c) * C))
            lin_o = float(np.sum(C * rhs_c))
            C = rhs_c @ Xi_C
            _descent_check(quad_o, lin_o, float(np.sum((C @ M_c) * C)),
                           float(np.sum(C * rhs_c)), "side-factor")
        else:
            C = np.zeros((L, r))
            Xi_C = eye / GAMMA

        # Transition refit from the fresh column factors.
        if temporal and transition is None and T > 1:
            S_xx = B[:-1].T @ B[:-1]
            S_xy = B[:-1].T @ B[1:]
            eps = 1e-8 * max(float(np.trace(S_xx)) / r, 1e-12)
            M_f = S_xx + eps * eye
            quad_o = float(np.sum((F @ M_f) * F))
            lin_o = float(np.sum(F * S_xy.T))
            F = np.linalg.solve(M_f, S_xy).T
            _descent_check(quad_o, lin_o, float(np.sum((F @ M_f) * F)),
                           float(np.sum(F * S_xy.T)), "transition")

        after = _objective(obs, G, A, B, C, F, beta, beta1, lam_f)
        if objective_track and after > objective_track[-1] * (1.0 + 1e-6):
            # Precision re-estimation rescales the objective between iterations,
            # so a rise here is informational rather than an error.
            logger.debug("penalized objective rose at iteration %d: %.6e -> %.6e",
                         iterations, objective_track[-1], after)
        objective_track.append(after)

        estimate = A @ B.T
        if truth is not None:
            mre_track.append(mre(truth, estimate))
        change = float(np.linalg.norm(estimate - prev_estimate)) / max(float(np.linalg.norm(prev_estimate)), 1e-30)
        prev_estimate = estimate
        if change <= tol:
            converged = True
            break

    logger.info(
        "%s finished after %d iterations (converged=%s, final objective %.4e)",
        method, iterations, converged, objective_track[-1],
    )
    provenance = {
        "method": method,
        "r": int(r),
        "seed": int(seed),
        "side_weight": float(side_weight),
        "iterations": int(iterations),
        "converged": bool(converged),
        "objective_trajectory": objective_track,
        "mre_trajectory": mre_track if truth is not None else None,
        "beta": float(beta),
        "beta1": float(beta1),
        "cold_rows": obs.cold_rows().tolist(),
    }
    return SpatioTemporalMatrix(prev_estimate, provenance)


def _solve_temporal_chain(
    data_blocks: np.ndarray, rhs: np.ndarray, F: np.ndarray, lam_f: float, B_old: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Joint solve of all column factors under the transition penalty.

    The penalty lam_f * sum_t ||b_t - F b_{t-1}||^2 couples neighbouring
    columns, giving a symmetric block-tridiagonal system. Covariances are
    approximated by the inverses of the diagonal blocks.
    """
    T, r = rhs.shape
    diag = data_blocks.copy()
    diag[1:] += lam_f * np.eye(r)
    diag[:-1] += lam_f * (F.T @ F)
    off = -lam_f * F  # block (t, t-1); its transpose couples (t-1, t)
    blocks = [[None] * T for _ in range(T)]
    for t in range(T):
        blocks[t][t] = diag[t]
        if t >= 1:
            blocks[t][t - 1] = off
            blocks[t - 1][t] = off.T
    system = scipy.sparse.bmat(blocks, format="csc")
    rhs_flat = rhs.reshape(-1)
    try:
        flat = scipy.sparse.linalg.spsolve(system, rhs_flat)
    except RuntimeError as exc:
        raise NumericalError("temporal chain solve failed") from exc
    if not np.all(np.isfinite(flat)):
        jitter = 1e-8 * max(float(np.mean([np.trace(d) for d in diag])) / r, 1.0)
        system = system + jitter * scipy.sparse.eye(T * r, format="csc")
        flat = scipy.sparse.linalg.spsolve(system, rhs_flat)
        if not np.all(np.isfinite(flat)):
            raise NumericalError("temporal chain solve produced non-finite factors")
    old_flat = B_old.reshape(-1)
    _descent_check(float(old_flat @ (system @ old_flat)), float(old_flat @ rhs_flat),
                   float(flat @ (system @ flat)), float(flat @ rhs_flat), "column-chain")
    B = flat.reshape(T, r)
    try:
        Xi_B = np.linalg.inv(diag)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular diagonal block in the temporal chain") from exc
    return B, Xi_B


def impute_vbmc_cs(
    obs: ObservationSet,
    G: np.ndarray,
    r: int,
    max_iters: int = 200,
    tol: float = 1e-5,
    seed: int = 0,
    side_weight: float = 1.0,
    truth: np.ndarray | None = None,
) -> SpatioTemporalMatrix:
    """Cold-start matrix completion without temporal coupling.

    Minimizes beta * ||P(Y - A B^T)||^2 + beta1 * ||G - A C^T||^2 plus
    ridge terms by alternating row, column, and side-factor updates.
    ``side_weight`` scales the side-information precision
    beta1 = side_weight * L^2 / ||G - A C^T||^2; zero disables the side
    factor entirely. Returns the dense estimate with a provenance record
    of iterations, convergence, and objective trajectory.
    """
    return _alternate(obs, G, r, max_iters, tol, seed, side_weight, False, None, truth, "vbmc_cs")


def impute_vbsf_cs(
    obs: ObservationSet,
    G: np.ndarray,
    r: int,
    max_iters: int = 200,
    tol: float = 1e-5,
    seed: int = 0,
    side_weight: float = 1.0,
    transition: np.ndarray | None = None,
    truth: np.ndarray | None = None,
) -> SpatioTemporalMatrix:
    """Cold-start completion with a temporal transition penalty on column factors.

    Adds lam_f * sum_t ||b_t - F b_{t-1}||^2 to the column update, where F
    is refit by least squares each outer iteration (or pinned via
    ``transition``) and lam_f is re-estimated from the transition
    residuals like the other precisions.
    """
    return _alternate(obs, G, r, max_iters, tol, seed, side_weight, True, transition, truth, "vbsf_cs")
