"""Shared records, error types and numeric conventions.

All matrices are dense float64 arrays indexed by point. Pairwise weight
matrices carry a zero diagonal, so every "sum over pairs" below runs over
ordered pairs ``i != j``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

MAX_POINTS = 5000
METHODS = ("EE", "SNE", "TSNE", "UMAP")


class ValidationError(ValueError):
    """Input data or configuration violates a documented precondition."""


class CalibrationError(RuntimeError):
    """Perplexity bandwidth search failed for some point."""


class EvaluationError(FloatingPointError):
    """An objective or gradient produced a non-finite value."""


class ConfigurationError(ValueError):
    pass


def as_points(points, name="points", max_points=MAX_POINTS) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be a 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    if max_points is not None and arr.shape[0] > max_points:
        raise ValidationError(
            f"{name} has {arr.shape[0]} rows; dense O(N^2) limit is {max_points}"
        )
    return arr


def coords_of(x) -> np.ndarray:
    """Accept an :class:`Embedding` or a raw array."""
    return np.asarray(getattr(x, "coords", x), dtype=np.float64)


def pairwise_sqdist(points) -> np.ndarray:
    """Squared Euclidean distances between all rows.

    Each pair is computed from coordinate differences, so the result is
    exactly symmetric with a zero diagonal and never negative.
    """
    x = as_points(points, max_points=None)
    return cdist(x, x, "sqeuclidean")


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = as_points(self.points)
        if pts.shape[0] < 2:
            raise ValidationError("a dataset needs at least 2 points")
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.asarray(self.labels).astype(np.int64)
            if lab.shape != (pts.shape[0],):
                raise ValidationError(
                    f"labels have length {lab.size}, expected {pts.shape[0]}"
                )
            object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class AffinityGraph:
    """Attraction/repulsion weights of the input space.

    ``d_plus`` is recomputed from ``w_plus`` on construction, so it always
    matches the column sums.
    """

    w_plus: np.ndarray
    w_minus: np.ndarray
    lam: float = 1.0
    d_plus: np.ndarray = field(init=False)

    def __post_init__(self):
        wp = _symmetric_weights(self.w_plus, "w_plus")
        wm = _symmetric_weights(self.w_minus, "w_minus")
        if wp.shape != wm.shape:
            raise ValidationError("w_plus and w_minus shapes differ")
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ValidationError("lambda must be a nonnegative real")
        object.__setattr__(self, "w_plus", wp)
        object.__setattr__(self, "w_minus", wm)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "d_plus", wp.sum(axis=0))

    @property
    def n(self) -> int:
        return self.w_plus.shape[0]

    def subgraph(self, idx) -> "AffinityGraph":
        idx = np.asarray(idx)
        sel = np.ix_(idx, idx)
        return AffinityGraph(self.w_plus[sel], self.w_minus[sel], self.lam)


def _symmetric_weights(w, name) -> np.ndarray:
    w = np.array(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValidationError(f"{name} must be square")
    if not np.all(np.isfinite(w)):
        raise ValidationError(f"{name} contains non-finite values")
    scale = max(np.abs(w).max(initial=0.0), 1.0)
    if np.abs(w - w.T).max(initial=0.0) > 1e-12 * scale:
        raise ValidationError(f"{name} is not symmetric")
    w = 0.5 * w + 0.5 * w.T
    np.fill_diagonal(w, 0.0)
    return w


@dataclass(frozen=True)
class Embedding:
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", as_points(self.coords, "coords", None))

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @property
    def n(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class PressureReport:
    """Per-point pressure values; ``pressure[k] > 0`` marks point k as pressured."""

    pressure: np.ndarray
    method: str
    warnings: tuple = ()

    def __post_init__(self):
        p = np.asarray(self.pressure, dtype=np.float64)
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValidationError("pressure values must be finite and nonnegative")
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}")
        object.__setattr__(self, "pressure", p)

    @property
    def mask(self) -> np.ndarray:
        return self.pressure > 0

    @property
    def pressured_set(self) -> frozenset:
        return frozenset(int(i) for i in np.flatnonzero(self.mask))

    @property
    def fraction(self) -> float:
        return float(self.mask.mean()) if self.pressure.size else 0.0


@dataclass(frozen=True)
class AugmentedState:
    """Embedding plus one extra coordinate usable only by pressured points."""

    embedding: Embedding
    z: np.ndarray
    pressured: np.ndarray  # boolean mask
    mu: float = 0.0

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.float64).copy()
        mask = np.asarray(self.pressured, dtype=bool).copy()
        n = self.embedding.n
        if z.shape != (n,) or mask.shape != (n,):
            raise ValidationError("z and pressured mask must have length N")
        if np.any(z[~mask] != 0.0):
            raise ValidationError("z must be exactly zero outside the pressured set")
        if not (self.mu >= 0):
            raise ValidationError("mu must be nonnegative")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "pressured", mask)
        object.__setattr__(self, "mu", float(self.mu))

    @classmethod
    def from_arrays(cls, x, z=None, pressured=None, mu=0.0) -> "AugmentedState":
        x = coords_of(x)
        n = x.shape[0]
        if pressured is None:
            pressured = np.zeros(n, dtype=bool)
        pressured = np.asarray(pressured)
        if pressured.dtype != bool:
            mask = np.zeros(n, dtype=bool)
            mask[pressured.astype(int)] = True
            pressured = mask
        z = np.zeros(n) if z is None else np.where(pressured, z, 0.0)
        return cls(Embedding(x), z, pressured, mu)

    @property
    def x(self) -> np.ndarray:
        return self.embedding.coords

    @property
    def pressured_set(self) -> frozenset:
        return frozenset(int(i) for i in np.flatnonzero(self.pressured))

    def lifted(self) -> np.ndarray:
        """Coordinates in d+1 dimensions, ``[X | z]``."""
        return np.column_stack([self.x, self.z])


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    objective: float
    step: float
    pressured_fraction: float
    mu: float = 0.0
    # Bumped whenever the minimized function or its free variables change
    # (new mu, pressured-set update); descent is only guaranteed within a phase.
    phase: int = 0

    def __post_init__(self):
        if not (0.0 <= self.pressured_fraction <= 1.0):
            raise ValidationError("pressured_fraction must lie in [0, 1]")


@dataclass
class OptimRun:
    trace: list
    final_embedding: Embedding
    final_objective: float
    converged: bool
    warnings: list = field(default_factory=list)
    initial_objective: float = float("nan")
    mu_steps: int = 0

    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.trace])

    def descent_violations(self, rtol=1e-12) -> int:
        """Count objective increases between consecutive records of the same phase."""
        bad = 0
        for prev, cur in zip(self.trace, self.trace[1:]):
            if cur.phase != prev.phase:
                continue
            slack = rtol * max(1.0, abs(prev.objective))
            if cur.objective > prev.objective + slack:
                bad += 1
        return bad
