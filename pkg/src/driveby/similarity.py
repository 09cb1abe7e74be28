"""Spatial and temporal similarity structure between monitoring locations.

Spatial similarity is either a normalized complement of pairwise distance
or an exponential distance decay whose rate can be fit from reference
station data. Temporal similarity is the correlation between time slots
estimated across stations, or a stationary autoregressive profile.
"""

from __future__ import annotations

import logging
import warnings

import numpy as np

from .errors import DegenerateInputError, InsufficientDataError
from .geo import pairwise_distances_m

logger = logging.getLogger(__name__)

# Exponential decay rate per km fit from urban PM2.5 reference stations.
DEFAULT_LAMBDA_PER_KM = 0.07676


def distance_matrix(locations) -> np.ndarray:
    """Pairwise great-circle distances in metres between monitoring locations."""
    coords = locations.coords() if hasattr(locations, "coords") else np.asarray(locations, dtype=float)
    return pairwise_distances_m(coords[:, 0], coords[:, 1])


def normalized_similarity(distances: np.ndarray) -> np.ndarray:
    """Similarity 1 - d/max(d), so the farthest pair scores 0 and self scores 1."""
    d = np.asarray(distances, dtype=float)
    dmax = float(np.max(d))
    if dmax <= 0.0:
        raise DegenerateInputError("all pairwise distances are zero; similarity is undefined")
    return 1.0 - d / dmax


def exponential_similarity(distances_m: np.ndarray, lam_per_km: float = DEFAULT_LAMBDA_PER_KM) -> np.ndarray:
    """Similarity exp(-lambda * d) with d in kilometres."""
    if lam_per_km < 0:
        raise ValueError(f"decay rate must be nonnegative, got {lam_per_km}")
    return np.exp(-lam_per_km * np.asarray(distances_m, dtype=float) / 1000.0)


def _pearson(x: np.ndarray, y: np.ndarray, min_overlap: int) -> float | None:
    """Pearson correlation over jointly finite entries; None when undefined."""
    mask = np.isfinite(x) & np.isfinite(y)
    if int(mask.sum()) < min_overlap:
        return None
    xs = x[mask]
    ys = y[mask]
    xs = xs - xs.mean()
    ys = ys - ys.mean()
    denom = np.sqrt((xs * xs).sum() * (ys * ys).sum())
    if denom <= 0.0:
        return None
    return float((xs * ys).sum() / denom)


def fit_lambda(readings: np.ndarray, coords: np.ndarray, min_overlap: int = 3) -> float:
    """Fit the exponential decay rate (per km) from station readings.

    For every station pair the Pearson correlation of their reading series
    is clamped to [1e-6, 1] and regressed through the origin against
    distance: least squares on ln(corr) = -lambda * d_km.

    Args:
        readings: (n_stations, n_samples) array; NaN marks missing samples.
        coords: (n_stations, 2) latitude/longitude in degrees.
        min_overlap: minimum jointly observed samples for a usable pair.

    Raises:
        InsufficientDataError: fewer than two usable station pairs.
        DegenerateInputError: all usable pairs are at zero distance.
    """
    X = np.asarray(readings, dtype=float)
    coords = np.asarray(coords, dtype=float)
    if X.ndim != 2 or coords.ndim != 2 or X.shape[0] != coords.shape[0]:
        raise ValueError(f"readings {X.shape} and coords {coords.shape} disagree on station count")
    n = X.shape[0]
    d_km = pairwise_distances_m(coords[:, 0], coords[:, 1]) / 1000.0

    dists = []
    logs = []
    for i in range(n):
        for j in range(i + 1, n):
            r = _pearson(X[i], X[j], min_overlap)
            if r is None:
                continue
            dists.append(d_km[i, j])
            logs.append(np.log(np.clip(r, 1e-6, 1.0)))
    if len(dists) < 2:
        raise InsufficientDataError(f"only {len(dists)} usable station pairs; need at least 2 to fit a decay rate")
    dists = np.array(dists)
    logs = np.array(logs)
    denom = float((dists * dists).sum())
    if denom <= 0.0:
        raise DegenerateInputError("all usable station pairs coincide; cannot fit a distance decay")
    lam = -float((dists * logs).sum()) / denom
    lam = max(lam, 0.0)
    logger.info("fit decay rate %.5f per km from %d station pairs", lam, len(dists))
    return lam


def temporal_similarity_from_data(readings: np.ndarray, min_overlap: int = 2) -> np.ndarray:
    """Slot-by-slot similarity: Pearson correlation across stations, clamped to [0, 1].

    Columns of ``readings`` are time slots. A constant or undefined column
    gets zero similarity to every other slot (diagonal stays 1) and a warning.
    """
    X = np.asarray(readings, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InsufficientDataError("need readings from at least two stations to correlate time slots")
    T = X.shape[1]
    H = np.eye(T)
    degenerate = []
    for t in range(T):
        for u in range(t + 1, T):
            r = _pearson(X[:, t], X[:, u], min_overlap)
            if r is None:
                continue
            H[t, u] = H[u, t] = np.clip(r, 0.0, 1.0)
    col_std = np.nanstd(X, axis=0)
    degenerate = [t for t in range(T) if not col_std[t] > 0]
    if degenerate:
        warnings.warn(f"time slots {degenerate} are constant across stations; their similarity is zero")
    return H


def causal_kernel(rho: float, t: int, j: int) -> float:
    """Causal temporal similarity rho**(t - j) for t >= j, zero otherwise."""
    if not (0.0 <= rho <= 1.0):
        raise ValueError(f"rho must be in [0, 1], got {rho}")
    if t < j:
        return 0.0
    return float(rho) ** (t - j)


def autoregressive_temporal_similarity(T: int, coef: float) -> np.ndarray:
    """Stationary AR(1) correlation profile H[t, u] = coef**|t - u|."""
    if not (0.0 <= coef <= 1.0):
        raise ValueError(f"autoregressive coefficient must be in [0, 1], got {coef}")
    if T < 1:
        raise ValueError(f"T must be positive, got {T}")
    idx = np.arange(T)
    return coef ** np.abs(idx[:, None] - idx[None, :]).astype(float)
