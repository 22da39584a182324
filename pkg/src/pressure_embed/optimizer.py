"""Spectral Direction minimization and the pressured-points outer loop."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .augmented import MuSchedule, _check_method, make_mu_schedule, update_pressured_set
from .core import (
    AffinityGraph,
    AugmentedState,
    Embedding,
    EvaluationError,
    OptimRun,
    TraceRecord,
    ValidationError,
    coords_of,
    pairwise_sqdist,
)
from .objectives import as_method, energy_terms, laplacian_apply, pair_coefficients
from .pressure import compute_pressure, pressured_mask

log = logging.getLogger(__name__)

THREADS_ENV = "PRESSURE_EMBED_THREADS"


@dataclass(frozen=True)
class OptimConfig:
    max_iter: int = 2000
    conv_tol: float = 1e-5
    eps: Optional[float] = None  # None: 1e-10 * trace(4 L+) / N
    ls_backtrack: float = 0.8
    ls_armijo: float = 1e-4
    min_step: float = 1e-12
    seed: int = 0
    init_scale: float = 1e-2
    track_pressure: bool = True

    def __post_init__(self):
        if not self.conv_tol > 0:
            raise ValidationError("conv_tol must be positive")
        if not 0 < self.ls_backtrack < 1:
            raise ValidationError("ls_backtrack must lie in (0, 1)")
        if not 0 < self.ls_armijo < 1:
            raise ValidationError("ls_armijo must lie in (0, 1)")
        if self.max_iter < 0:
            raise ValidationError("max_iter must be nonnegative")


def graph_laplacian(g: AffinityGraph) -> np.ndarray:
    return np.diag(g.d_plus) - g.w_plus


def default_eps(lap: np.ndarray) -> float:
    n = lap.shape[0]
    scale = 4.0 * np.trace(lap) / n
    return 1e-10 * scale if scale > 0 else 1.0


class SpectralSolver:
    """Solves ``(4 L+ + eps I) P = G`` with one cached Cholesky factor.

    The extra coordinate of the pressured points uses the principal block of
    the same matrix with ``2 mu`` added to its diagonal; that factor is
    rebuilt only when the pressured set or ``mu`` changes.
    """

    def __init__(self, lap: np.ndarray, eps: Optional[float] = None):
        self.lap = np.asarray(lap, dtype=np.float64)
        self.eps = default_eps(self.lap) if eps is None else float(eps)
        self.warnings = []
        self._hess = 4.0 * self.lap + self.eps * np.eye(self.lap.shape[0])
        self._factor = self._factorize(self._hess)
        self._z_key = None
        self._z_factor = None

    def _factorize(self, a):
        try:
            return cho_factor(a, lower=True, check_finite=False)
        except LinAlgError:
            self.warnings.append("Cholesky factorization failed; using the plain gradient")
            log.warning(self.warnings[-1])
            return None

    def solve_x(self, grad_x):
        if self._factor is None:
            return grad_x.copy()
        return cho_solve(self._factor, grad_x, check_finite=False)

    def solve_z(self, grad_z, mu, mask):
        out = np.zeros_like(grad_z)
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            return out
        key = (idx.tobytes(), float(mu))
        if key != self._z_key:
            block = self._hess[np.ix_(idx, idx)] + 2.0 * mu * np.eye(idx.size)
            self._z_factor = self._factorize(block)
            self._z_key = key
        if self._z_factor is None:
            out[idx] = grad_z[idx]
        else:
            out[idx] = cho_solve(self._z_factor, grad_z[idx], check_finite=False)
        return out


def spectral_direction(lap, eps, grad_x, grad_z=None, mu=0.0, pressured=None):
    """One-shot version of :class:`SpectralSolver`; returns ``(dir_x, dir_z)``.

    Directions are returned un-negated; the step is ``X - alpha * dir_x``.
    """
    solver = SpectralSolver(lap, eps)
    n = solver.lap.shape[0]
    grad_z = np.zeros(n) if grad_z is None else np.asarray(grad_z, dtype=np.float64)
    mask = np.zeros(n, dtype=bool) if pressured is None else np.asarray(pressured, dtype=bool)
    return solver.solve_x(np.asarray(grad_x, dtype=np.float64)), solver.solve_z(grad_z, mu, mask)


class _Problem:
    """Objective on lifted coordinates with cached squared distances."""

    def __init__(self, m, g):
        self.m = m
        self.g = g

    def value(self, coords, z, mu, mask):
        lifted = coords if z is None else np.column_stack([coords, z])
        sq = pairwise_sqdist(lifted)
        a, r = energy_terms(self.m, self.g, sq)
        f = float(a + r)
        if z is not None:
            f += mu * float(np.sum(z[mask] ** 2))
        if not np.isfinite(f):
            raise EvaluationError(f"{self.m.tag} objective is not finite")
        return f, (lifted, sq)

    def gradient(self, cache, z, mu, mask):
        lifted, sq = cache
        grad = laplacian_apply(pair_coefficients(self.m, self.g, sq), lifted)
        if z is None:
            return grad, None
        gz = np.where(mask, grad[:, -1] + 2.0 * mu * z, 0.0)
        return grad[:, :-1], gz


def _line_search(problem, cfg, x, z, mu, mask, f, px, pz, slope):
    """Armijo backtracking from a unit step; returns ``(alpha, x, z, f, cache)`` or None."""
    alpha = 1.0
    while alpha >= cfg.min_step:
        x_new = x - alpha * px
        z_new = None if z is None else np.where(mask, z - alpha * pz, 0.0)
        try:
            f_new, cache = problem.value(x_new, z_new, mu, mask)
        except EvaluationError:
            f_new = np.inf
        if f_new <= f - cfg.ls_armijo * alpha * slope:
            return alpha, x_new, z_new, f_new, cache
        alpha *= cfg.ls_backtrack
    return None


def _fraction(m, g, x, cfg):
    if not cfg.track_pressure:
        return 0.0
    return float(pressured_mask(m, g, x).mean())


def minimize(m, g: AffinityGraph, x0, cfg: OptimConfig = OptimConfig(),
             callback: Optional[Callable[[TraceRecord], None]] = None,
             solver: Optional[SpectralSolver] = None) -> OptimRun:
    """Spectral Direction with Armijo backtracking.

    Stops once an iteration lowers the objective by less than ``cfg.conv_tol``.
    """
    m = as_method(m)
    x = coords_of(x0).copy()
    if x.shape[0] != g.n:
        raise ValidationError(f"x0 has {x.shape[0]} points, graph has {g.n}")
    if solver is None:
        solver = SpectralSolver(graph_laplacian(g), cfg.eps)
    problem = _Problem(m, g)
    f, cache = problem.value(x, None, 0.0, None)
    f_init = f
    trace = []
    warnings = list(solver.warnings)
    converged = False
    for it in range(1, cfg.max_iter + 1):
        grad, _ = problem.gradient(cache, None, 0.0, None)
        px = solver.solve_x(grad)
        slope = float(np.sum(grad * px))
        if not slope > 0:
            converged = True
            break
        step = _line_search(problem, cfg, x, None, 0.0, None, f, px, None, slope)
        if step is None:
            warnings.append(f"line search failed at iteration {it}")
            log.warning(warnings[-1])
            break
        alpha, x, _, f_new, cache = step
        decrease = f - f_new
        f = f_new
        rec = TraceRecord(it, f, alpha, _fraction(m, g, x, cfg), 0.0, 0)
        trace.append(rec)
        if callback is not None:
            callback(rec)
        if decrease < cfg.conv_tol:
            converged = True
            break
    return OptimRun(trace, Embedding(x), f, converged, warnings, f_init, 0)


def pp_optimize(m, g: AffinityGraph, x0, sched: Optional[MuSchedule] = None,
                cfg: OptimConfig = OptimConfig(),
                callback: Optional[Callable[[TraceRecord], None]] = None,
                solver: Optional[SpectralSolver] = None) -> OptimRun:
    """Pressured-points optimization on top of Spectral Direction.

    For each mu of the schedule, joint SD steps on the augmented objective in
    (X, z) alternate with pressured-set updates until the per-iteration
    decrease falls below ``cfg.conv_tol``. The schedule stops at the first mu
    whose converged state has no pressured points and z = 0.

    Raising mu adds ``d mu * sum z^2`` to the augmented objective, so the
    d-dimensional objective can end above its start. The returned embedding is
    the best iterate that had no pressured points, ``x0`` included.
    """
    m = _check_method(m)
    if sched is None:
        sched = make_mu_schedule(g, "mean")
    x = coords_of(x0).copy()
    if x.shape[0] != g.n:
        raise ValidationError(f"x0 has {x.shape[0]} points, graph has {g.n}")
    if solver is None:
        solver = SpectralSolver(graph_laplacian(g), cfg.eps)
    problem = _Problem(m, g)
    f_init = problem.value(x, None, 0.0, None)[0]
    best_x, best_f = x, f_init

    report = compute_pressure(m, g, x)
    mask = report.mask.copy()
    z = np.where(mask, report.pressure, 0.0)
    trace = []
    warnings = list(solver.warnings)
    phase = 0
    it = 0
    done = False
    mu_steps = 0
    for mu in sched:
        mu_steps += 1
        phase += 1
        f, cache = problem.value(x, z, mu, mask)
        for _ in range(cfg.max_iter):
            gx, gz = problem.gradient(cache, z, mu, mask)
            px = solver.solve_x(gx)
            pz = solver.solve_z(gz, mu, mask)
            slope = float(np.sum(gx * px) + np.sum(gz * pz))
            if not slope > 0:
                break
            step = _line_search(problem, cfg, x, z, mu, mask, f, px, pz, slope)
            if step is None:
                warnings.append(f"line search failed at iteration {it + 1} (mu={mu:g})")
                log.warning(warnings[-1])
                break
            it += 1
            alpha, x, z, f_new, cache = step
            decrease = f - f_new
            f = f_new
            state = AugmentedState(Embedding(x), z, mask, mu)
            new_state = update_pressured_set(m, g, state)
            if new_state is not state:
                # the set update changes the objective; descent restarts here
                mask, z = new_state.pressured, new_state.z
                phase += 1
                f, cache = problem.value(x, z, mu, mask)
            rec = TraceRecord(it, f, alpha, float(mask.mean()), mu, phase)
            trace.append(rec)
            if callback is not None:
                callback(rec)
            if not mask.any() and f < best_f:
                # no pressured points, so f is the plain objective
                best_x, best_f = x, f
            if decrease < cfg.conv_tol:
                break
        if not mask.any() and not np.any(z):
            done = True
            break

    final = problem.value(x, None, 0.0, None)[0]
    if final > best_f:
        warnings.append(f"final objective {final:.10g} exceeds an earlier iterate's "
                        f"{best_f:.10g}; returning that iterate")
        log.info(warnings[-1])
        x, final = best_x, best_f
        trace.append(TraceRecord(it + 1, final, 0.0, 0.0, trace[-1].mu if trace else 0.0, phase + 1))
    if not done:
        warnings.append(f"mu schedule exhausted after {mu_steps} values with {int(mask.sum())} pressured points")
        log.warning(warnings[-1])
    return OptimRun(trace, Embedding(x), final, done, warnings, f_init, mu_steps)


def random_init(n, dim, rng, scale=1e-2) -> np.ndarray:
    return scale * rng.random((n, dim))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def restart_benchmark(m, g: AffinityGraph, n_restarts: int, cfg: OptimConfig = OptimConfig(),
                      dim: int = 2, mu_strategy: str = "mean"):
    """SD from random starts, each followed by PP initialized at the SD result.

    Returns a list of ``(sd_run, pp_run)`` in seed order. Restart ``i`` draws
    its initialization from ``default_rng([cfg.seed, i])``.
    """
    if n_restarts < 1:
        raise ValidationError("n_restarts must be at least 1")
    m = _check_method(m)
    sched = make_mu_schedule(g, mu_strategy)
    lap = graph_laplacian(g)

    def one(i):
        rng = np.random.default_rng([cfg.seed, i])
        x0 = random_init(g.n, dim, rng, cfg.init_scale)
        solver = SpectralSolver(lap, cfg.eps)
        sd = minimize(m, g, x0, replace(cfg, track_pressure=False), solver=solver)
        pp = pp_optimize(m, g, sd.final_embedding.coords, sched, cfg, solver=solver)
        return sd, pp

    workers = min(_threads(), n_restarts)
    if workers == 1:
        return [one(i) for i in range(n_restarts)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(n_restarts)))


def benchmark_summary(pairs):
    sd = np.array([p[0].final_objective for p in pairs])
    pp = np.array([p[1].final_objective for p in pairs])
    return {
        "sd_mean": float(sd.mean()), "sd_std": float(sd.std()),
        "pp_mean": float(pp.mean()), "pp_std": float(pp.std()),
        "improved": int(np.sum(pp < sd)), "n": len(pairs),
    }
