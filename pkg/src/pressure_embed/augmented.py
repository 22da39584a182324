"""Objective in d+1 dimensions where only pressured points may leave the plane.

The augmented value is the base objective evaluated on ``[X | z]`` plus the
penalty ``mu * sum_{i in P} z_i^2``. Points outside P keep ``z_i = 0`` exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import count
from typing import Iterator

import numpy as np

from .core import AffinityGraph, AugmentedState, ConfigurationError, Embedding, ValidationError
from .objectives import as_method, objective, value_and_gradient
from .pressure import compute_pressure

Z_EPS = 1e-6
MU_STRATEGIES = ("mean", "max", "min")


def _check_method(m):
    m = as_method(m)
    if m.tag not in ("EE", "SNE"):
        raise ValidationError("the augmented objective is defined for EE and SNE only")
    return m


def augmented_objective(m, g: AffinityGraph, s: AugmentedState) -> float:
    m = _check_method(m)
    total = objective(m, g, s.lifted())[0]
    return total + s.mu * float(np.sum(s.z[s.pressured] ** 2))


def augmented_value_and_gradient(m, g: AffinityGraph, s: AugmentedState):
    """Return ``(value, grad_x, grad_z)``; ``grad_z`` is exactly 0 off the pressured set."""
    m = _check_method(m)
    total, grad = value_and_gradient(m, g, s.lifted())
    zp = np.where(s.pressured, s.z, 0.0)
    value = total + s.mu * float(np.sum(zp**2))
    grad_z = np.where(s.pressured, grad[:, -1] + 2.0 * s.mu * zp, 0.0)
    return value, grad[:, :-1], grad_z


def augmented_gradient(m, g: AffinityGraph, s: AugmentedState):
    _, gx, gz = augmented_value_and_gradient(m, g, s)
    return gx, gz


def update_pressured_set(m, g: AffinityGraph, s: AugmentedState, report=None) -> AugmentedState:
    """Add newly pressured points and drop members that stopped being pressured.

    Classification uses the current X with every point at z = 0 and includes
    the state's penalty ``mu z^2`` in each point's slice. Entrants start at
    their pressure value. A non-pressured member leaves once ``|z_i| < Z_EPS``;
    members still holding a larger lift are snapped to z = 0 together only if
    that does not raise the augmented objective.
    """
    m = _check_method(m)
    if report is None:
        report = compute_pressure(m, g, s.x, mu=s.mu)
    now = report.mask
    stale = s.pressured & ~now
    leaving = stale & (np.abs(s.z) < Z_EPS)
    entering = now & ~s.pressured
    held = stale & ~leaving
    if held.any():
        current = augmented_objective(m, g, s)
        z_try = np.where(held, 0.0, s.z)
        trial = AugmentedState(s.embedding, z_try, s.pressured, s.mu)
        if augmented_objective(m, g, trial) <= current:
            leaving = stale
    if not (leaving.any() or entering.any()):
        return s
    mask = (s.pressured & ~leaving) | entering
    z = s.z.copy()
    z[leaving] = 0.0
    z[entering] = report.pressure[entering]
    return AugmentedState(s.embedding, z, mask, s.mu)


def initial_state(m, g: AffinityGraph, x, mu=0.0) -> AugmentedState:
    m = _check_method(m)
    report = compute_pressure(m, g, x)
    return AugmentedState(Embedding(x), report.pressure.copy(), report.mask, mu)


@dataclass(frozen=True)
class MuSchedule:
    """``0, step, 2 step, ...``; values are produced lazily."""

    strategy: str
    step: float
    cap: int = 50

    def __post_init__(self):
        if self.strategy not in MU_STRATEGIES:
            raise ConfigurationError(f"unknown mu strategy {self.strategy!r}")
        if not (self.step > 0 and np.isfinite(self.step)):
            raise ConfigurationError("mu step must be positive")

    def __iter__(self) -> Iterator[float]:
        for t in count():
            if t >= self.cap:
                return
            yield t * self.step

    def values(self, n: int) -> np.ndarray:
        return np.arange(min(n, self.cap)) * self.step


def make_mu_schedule(g, strategy: str = "mean", cap: int = 50) -> MuSchedule:
    """Step from the attraction degrees: their mean, max or min.

    ``g`` may be an :class:`AffinityGraph` or a vector of degrees.
    """
    d = np.asarray(getattr(g, "d_plus", g), dtype=np.float64)
    if d.size == 0 or not np.any(d > 0):
        raise ConfigurationError("all attraction degrees are zero")
    if strategy == "mean":
        step = d.mean()
    elif strategy == "max":
        step = d.max()
    elif strategy == "min":
        step = d.min()
        if step <= 0:
            raise ConfigurationError("min strategy needs every degree positive")
    else:
        raise ConfigurationError(f"unknown mu strategy {strategy!r}")
    return MuSchedule(strategy, float(step), cap)
