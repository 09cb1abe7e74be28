"""Synthetic ground-truth fields that are smooth in space and time.

Both generators restrict the spatial signal to the leading eigenvectors of
a similarity matrix, so columns live in a low-frequency subspace. One
draws a factored low-rank matrix with smooth row and column factors; the
other evolves a latent state with a scalar autoregressive carryover.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

logger = logging.getLogger(__name__)

# Factor entries are drawn with this standard deviation in both generators.
FACTOR_STD = 0.5


@dataclass(frozen=True)
class SpectralBasis:
    """Leading eigenvectors of a symmetric similarity matrix.

    ``vectors`` holds the first m columns by descending eigenvalue;
    ``eigenvalues`` keeps the full sorted spectrum.
    """

    vectors: np.ndarray
    eigenvalues: np.ndarray

    @property
    def m(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class SpatioTemporalMatrix:
    """A dense L x T field plus the recipe that generated it."""

    values: np.ndarray
    provenance: dict


def spectral_basis(G: np.ndarray, m: int) -> SpectralBasis:
    """First m eigenvectors of a symmetric matrix, largest eigenvalues first."""
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {G.shape}")
    if not np.allclose(G, G.T, atol=1e-10):
        raise ValueError("matrix must be symmetric to eigendecompose")
    n = G.shape[0]
    if not (1 <= m <= n):
        raise ValueError(f"m must be in [1, {n}], got {m}")
    eigenvalues, vectors = np.linalg.eigh(G)
    if not np.all(np.isfinite(eigenvalues)):
        raise NumericalError("eigendecomposition produced non-finite eigenvalues")
    order = np.argsort(eigenvalues)[::-1]
    return SpectralBasis(vectors[:, order[:m]].copy(), eigenvalues[order].copy())


def _streams(seed: int, n: int) -> list[np.random.Generator]:
    """Independent generators split from one seed, one per draw role."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def simulate_factored(
    G: np.ndarray,
    H: np.ndarray,
    m: int,
    n: int,
    r: int,
    noise_std: float,
    seed: int,
) -> SpatioTemporalMatrix:
    """Low-rank field with smooth factors on both axes.

    Row factors are U_(m) times an m x r normal draw (std 0.5) from the
    spatial basis of G; column factors come analogously from the first n
    eigenvectors of the temporal similarity H. The product gets dense
    Gaussian noise of the given std. Deterministic per seed.
    """
    if r < 1:
        raise ValueError(f"r must be at least 1, got {r}")
    if noise_std < 0:
        raise ValueError(f"noise_std must be nonnegative, got {noise_std}")
    U = spectral_basis(G, m).vectors
    V = spectral_basis(H, n).vectors
    L = U.shape[0]
    T = V.shape[0]
    rng_a, rng_b, rng_n = _streams(seed, 3)
    A = U @ (FACTOR_STD * rng_a.standard_normal((m, r)))
    B = V @ (FACTOR_STD * rng_b.standard_normal((n, r)))
    Y = A @ B.T
    if noise_std > 0:
        Y = Y + noise_std * rng_n.standard_normal((L, T))
    provenance = {
        "generator": "factored",
        "seed": int(seed),
        "m": int(m),
        "n": int(n),
        "r": int(r),
        "noise_std": float(noise_std),
        "factor_std": FACTOR_STD,
        "rng": "pcg64/seedseq-spawn(a,b,noise)",
    }
    return SpatioTemporalMatrix(Y, provenance)


def simulate_ar(
    G: np.ndarray,
    m: int,
    r: int,
    c: float,
    T: int,
    noise_std: float,
    seed: int,
) -> SpatioTemporalMatrix:
    """Autoregressive field: z_t = c * z_{t-1} + U_(m) a_t, observed with noise.

    The carryover is a single scalar applied to every location (z_0 = 0),
    innovations are smooth draws (std 0.5) in the spatial basis of G.
    ``r`` does not enter the generation; it is recorded for downstream
    rank choices only.
    """
    if T < 1:
        raise ValueError(f"T must be at least 1, got {T}")
    if not np.isfinite(c):
        raise ValueError(f"carryover coefficient must be finite, got {c}")
    if noise_std < 0:
        raise ValueError(f"noise_std must be nonnegative, got {noise_std}")
    U = spectral_basis(G, m).vectors
    L = U.shape[0]
    rng_a, rng_n = _streams(seed, 2)
    innovations = U @ (FACTOR_STD * rng_a.standard_normal((m, T)))
    Y = np.empty((L, T))
    z = np.zeros(L)
    for t in range(T):
        z = c * z + innovations[:, t]
        Y[:, t] = z
    if noise_std > 0:
        Y = Y + noise_std * rng_n.standard_normal((L, T))
    provenance = {
        "generator": "autoregressive",
        "seed": int(seed),
        "m": int(m),
        "r": int(r),
        "c": float(c),
        "T": int(T),
        "noise_std": float(noise_std),
        "factor_std": FACTOR_STD,
        "rng": "pcg64/seedseq-spawn(innovations,noise)",
    }
    return SpatioTemporalMatrix(Y, provenance)
