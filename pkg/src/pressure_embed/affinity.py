"""Input-space attraction and repulsion weights."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    AffinityGraph,
    CalibrationError,
    ConfigurationError,
    Dataset,
    pairwise_sqdist,
)

MAX_BISECTION_ITER = 200


@dataclass(frozen=True)
class AffinityConfig:
    """How to build an :class:`AffinityGraph`.

    Exactly one of ``sigma`` (fixed Gaussian bandwidth) or ``perplexity``
    (per-point calibrated bandwidths) must be given.
    """

    sigma: Optional[float] = None
    perplexity: Optional[float] = None
    lam: float = 1.0
    w_minus_mode: str = "sqdist"

    def __post_init__(self):
        if (self.sigma is None) == (self.perplexity is None):
            raise ConfigurationError("give exactly one of sigma or perplexity")
        if self.sigma is not None and not self.sigma > 0:
            raise ConfigurationError("sigma must be positive")
        if self.perplexity is not None and not self.perplexity > 1:
            raise ConfigurationError("perplexity must exceed 1")
        if not self.lam >= 0:
            raise ConfigurationError("lambda must be nonnegative")
        if self.w_minus_mode not in ("sqdist", "uniform"):
            raise ConfigurationError(f"unknown w_minus_mode {self.w_minus_mode!r}")

    @property
    def mode(self) -> str:
        return "fixed_sigma" if self.sigma is not None else "perplexity"


def gaussian_affinities(sqdist: np.ndarray, sigma: float) -> np.ndarray:
    w = np.exp(-sqdist / (2.0 * sigma**2))
    np.fill_diagonal(w, 0.0)
    return w


def row_perplexity(p: np.ndarray) -> np.ndarray:
    """exp of the Shannon entropy (natural log) of each row of a stochastic matrix."""
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(p), 0.0)
    return np.exp(-plogp.sum(axis=1))


def _conditional(sqdist, beta):
    # shift by the row minimum (off-diagonal) for stability
    n = sqdist.shape[0]
    d = sqdist.copy()
    np.fill_diagonal(d, np.inf)
    d -= d.min(axis=1, keepdims=True)
    p = np.exp(-beta[:, None] * d)
    p /= p.sum(axis=1, keepdims=True)
    p[np.arange(n), np.arange(n)] = 0.0
    return p


def calibrate_perplexity(sqdist: np.ndarray, perplexity: float, tol=1e-5):
    """Row-stochastic Gaussian affinities with entropy-perplexity ``perplexity``.

    Bisection on the precision ``beta = 1 / (2 sigma_i^2)`` of every row at
    once, expanding the upper bracket by doubling until it is found.

    Returns
    -------
    p : (N, N) array
        Row-normalized conditional affinities, zero diagonal.
    beta : (N,) array
        Calibrated precisions.
    """
    n = sqdist.shape[0]
    if not 1 < perplexity < n:
        raise ConfigurationError(f"perplexity must lie in (1, {n}), got {perplexity}")
    target = np.log(perplexity)
    off = sqdist[~np.eye(n, dtype=bool)].reshape(n, n - 1)
    spread = np.median(off, axis=1) - off.min(axis=1)
    beta = 1.0 / np.where(spread > 0, spread, 1.0)
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    done = np.zeros(n, dtype=bool)
    for _ in range(MAX_BISECTION_ITER):
        p = _conditional(sqdist, beta)
        h = np.log(row_perplexity(p))
        done = np.abs(np.exp(h) - perplexity) < tol
        if done.all():
            return p, beta
        # entropy decreases with beta
        too_flat = h > target
        lo = np.where(too_flat & ~done, beta, lo)
        hi = np.where(~too_flat & ~done, beta, hi)
        beta = np.where(
            done, beta, np.where(np.isinf(hi), 2.0 * beta, 0.5 * (lo + hi))
        )
    bad = np.flatnonzero(~done)
    raise CalibrationError(
        f"perplexity bisection did not converge for point {int(bad[0])}"
        + (f" (and {bad.size - 1} others)" if bad.size > 1 else "")
    )


def build_affinities(data, cfg: AffinityConfig) -> AffinityGraph:
    """Build W+, W- and the attraction degrees for ``data``.

    ``data`` may be a :class:`Dataset` or an (N, D) array.
    """
    points = data.points if isinstance(data, Dataset) else Dataset(data).points
    sq = pairwise_sqdist(points)
    n = sq.shape[0]
    if cfg.sigma is not None:
        w_plus = gaussian_affinities(sq, cfg.sigma)
    else:
        p, _ = calibrate_perplexity(sq, cfg.perplexity)
        w_plus = (p + p.T) / (2.0 * n)
    if cfg.w_minus_mode == "sqdist":
        w_minus = sq
    else:
        w_minus = np.ones((n, n))
    return AffinityGraph(w_plus, w_minus, cfg.lam)
