"""Pressured points: where an extra embedding dimension would pay off.

For a point k we lift it along a fresh coordinate z (all other points stay at
z = 0) and look at the objective as a function of z. That slice is even in z
and, for the methods here, has either a minimum at z = 0 or one nontrivial
minimum at ``z_hat > 0``. ``z_hat`` is the point's pressure.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import AffinityGraph, PressureReport, ValidationError, coords_of, pairwise_sqdist
from .objectives import (
    UMAP_MIN_SQDIST,
    Method,
    _neg_exp,
    as_method,
    energy_terms,
)

log = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
NEWTON_ZMAX = 50.0
UMAP_ZMAX = 10.0
UMAP_FD_STEP = 1e-4


@dataclass(frozen=True)
class NewtonConfig:
    init: float = 1e-3
    max_iter: int = 50
    tol: float = 1e-10

    def __post_init__(self):
        if not self.init > 0:
            raise ValidationError("Newton init must be positive")


def objective_slice(m, g: AffinityGraph, x, k: int, z):
    """Full objective with point ``k`` lifted to height ``z`` in a new dimension.

    ``z`` may be a scalar or an array; the result has the same shape.
    """
    m = as_method(m)
    x = coords_of(x)
    n = x.shape[0]
    if not 0 <= k < n:
        raise ValidationError(f"point index {k} out of range")
    zs = np.atleast_1d(np.asarray(z, dtype=np.float64))
    sq = pairwise_sqdist(x)
    lift = np.zeros((n, n))
    lift[k, :] = 1.0
    lift[:, k] = 1.0
    lift[k, k] = 0.0
    out = np.empty(zs.size)
    chunk = max(1, 2_000_000 // (n * n))
    flat = zs.ravel()
    for start in range(0, flat.size, chunk):
        zz = flat[start:start + chunk]
        stack = sq[None] + (zz**2)[:, None, None] * lift[None]
        a, r = energy_terms(m, g, stack)
        out[start:start + chunk] = a + r
    return out.reshape(np.shape(z)) if np.ndim(z) else float(out[0])


def golden_section(f, lo, hi, tol=1e-10, max_iter=200):
    """Minimize a unimodal scalar function on ``[lo, hi]``."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def grid_golden(f_vec, hi, n_grid=201):
    """Coarse grid on ``[0, hi]`` to bracket the minimum, then golden section."""
    zs = np.linspace(0.0, hi, n_grid)
    vals = f_vec(zs)
    i = int(np.argmin(vals))
    lo_z = zs[max(i - 1, 0)]
    hi_z = zs[min(i + 1, n_grid - 1)]
    return golden_section(lambda t: float(f_vec(np.array([t]))[0]), lo_z, hi_z)


def repulsive_degree_ee(g: AffinityGraph, sq: np.ndarray) -> np.ndarray:
    """``lam * sum_i w-_ik exp(-|x_i - x_k|^2)``; the repulsion row sums of the EE gradient."""
    return g.lam * np.sum(g.w_minus * _neg_exp(sq), axis=0)


def pressure_ee(g: AffinityGraph, x, mu: float = 0.0) -> PressureReport:
    """Closed-form EE pressure, ``sqrt(log(d-_k / d+_k))`` when positive.

    With ``mu > 0`` the slice carries the penalty ``mu z^2``, which acts as an
    extra ``mu / 2`` of attraction degree.
    """
    x = coords_of(x)
    sq = pairwise_sqdist(x)
    d_rep = repulsive_degree_ee(g, sq)
    d_att = g.d_plus + 0.5 * mu
    warnings = []
    isolated = d_att <= 0
    if isolated.any():
        warnings.append(f"isolated points treated as non-pressured: {np.flatnonzero(isolated).tolist()}")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(isolated, 0.0, d_rep / np.where(isolated, 1.0, d_att))
    pressured = ratio > 1.0
    z = np.zeros(x.shape[0])
    z[pressured] = np.sqrt(np.log(ratio[pressured]))
    return PressureReport(z, "EE", tuple(warnings))


def _sne_degrees(sq):
    n = sq.shape[0]
    off = ~np.eye(n, dtype=bool)
    # common factor e^{s0} cancels in every ratio below
    s0 = sq[off].min() if n > 1 else 0.0
    e = np.where(off, np.exp(-(sq - s0)), 0.0)
    d_rep = e.sum(axis=0)
    return e, d_rep


def pressure_sne(g: AffinityGraph, x, mu: float = 0.0) -> PressureReport:
    x = coords_of(x)
    sq = pairwise_sqdist(x)
    n = x.shape[0]
    e, d_rep = _sne_degrees(sq)
    total = d_rep.sum()
    d_att = g.d_plus + 0.5 * mu
    num = d_rep * (1.0 - 2.0 * d_att)
    den = d_att * (total - 2.0 * d_rep)
    z = np.zeros(n)
    warnings = []
    isolated = d_att <= 0
    if isolated.any():
        warnings.append(f"isolated points treated as non-pressured: {np.flatnonzero(isolated).tolist()}")
    regular = ~isolated & (den > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.where(regular, num / np.where(regular, den, 1.0), 0.0)
    # strict-minimum condition num < den; a tie counts as non-pressured
    hit = regular & (arg > 1.0)
    z[hit] = np.sqrt(np.log(arg[hit]))
    m = Method("SNE")
    for k in np.flatnonzero(~isolated & (den <= 0) & (num > 0)):
        warnings.append(f"point {k}: degenerate closed form, used grid search")
        z[k] = grid_golden(
            lambda t, k=k: _slice_delta(m, g, sq, k, t) + mu * t**2, 5.0, 2001)
    return PressureReport(z, "SNE", tuple(warnings))


def _slice_delta(m, g, sq, k, zs):
    n = sq.shape[0]
    lift = np.zeros((n, n))
    lift[k, :] = 1.0
    lift[:, k] = 1.0
    lift[k, k] = 0.0
    zs = np.atleast_1d(zs)
    a, r = energy_terms(m, g, sq[None] + (zs**2)[:, None, None] * lift[None])
    a0, r0 = energy_terms(m, g, sq)
    return (a - a0) + (r - r0)


class _TsneSlice:
    """Bracket term ``h(z)`` of the t-SNE slice derivative ``4 z h(z)``."""

    def __init__(self, g, sq, kernel_total, k):
        mask = np.arange(sq.shape[0]) != k
        self.kern = 1.0 + sq[k, mask]  # k(x_i, x_k)
        self.w = g.w_plus[k, mask]
        self.rest = kernel_total - 2.0 * np.sum(1.0 / self.kern)

    def h(self, z):
        u = 1.0 / (self.kern + z * z)
        a = np.sum(self.w * u)
        b = np.sum(u * u)
        c = self.rest + 2.0 * np.sum(u)
        return a - b / c

    def dh(self, z):
        u = 1.0 / (self.kern + z * z)
        b = np.sum(u * u)
        c = self.rest + 2.0 * np.sum(u)
        da = -np.sum(self.w * u * u)
        db = -2.0 * np.sum(u**3)
        dc = -2.0 * b
        return 2.0 * z * (da - (db * c - b * dc) / (c * c))

    def derivative(self, z):
        return 4.0 * z * self.h(z)


def tsne_second_derivative_at_zero(g: AffinityGraph, sq: np.ndarray) -> np.ndarray:
    """Sign test for t-SNE: ``sum_i w+_ik K_ik - sum_i K_ik^2 / sum_ij K_ij``."""
    n = sq.shape[0]
    kern = np.where(~np.eye(n, dtype=bool), 1.0 / (1.0 + sq), 0.0)
    return np.sum(g.w_plus * kern, axis=0) - np.sum(kern**2, axis=0) / kern.sum()


def _newton_root(s: _TsneSlice, cfg: NewtonConfig):
    """Positive root of ``h``; returns None when Newton fails to converge."""
    lo = cfg.init
    if s.h(lo) >= 0:
        # sign change lies below init: bisect on (0, init]
        lo, hi = 0.0, cfg.init
    else:
        hi = max(2.0 * lo, 1e-2)
        while s.h(hi) < 0:
            lo = hi
            hi *= 2.0
            if hi > NEWTON_ZMAX:
                return None
    z = lo if lo > 0 else 0.5 * hi
    for _ in range(cfg.max_iter):
        hz = s.h(z)
        if abs(s.derivative(z)) < cfg.tol:
            return z
        if hz < 0:
            lo = z
        else:
            hi = z
        slope = s.dh(z)
        step_ok = slope > 0
        z_new = z - hz / slope if step_ok else None
        if z_new is None or not (lo < z_new < hi):
            z_new = 0.5 * (lo + hi)
        z = z_new
        if hi - lo < 1e-15 * hi:
            return z
    return None


def pressure_tsne(g: AffinityGraph, x, cfg: NewtonConfig = NewtonConfig()) -> PressureReport:
    x = coords_of(x)
    sq = pairwise_sqdist(x)
    n = x.shape[0]
    curvature = tsne_second_derivative_at_zero(g, sq)
    kernel_total = np.sum(np.where(~np.eye(n, dtype=bool), 1.0 / (1.0 + sq), 0.0))
    z = np.zeros(n)
    warnings = []
    m = Method("TSNE")
    for k in np.flatnonzero(curvature < 0):
        s = _TsneSlice(g, sq, kernel_total, k)
        root = _newton_root(s, cfg)
        if root is None:
            warnings.append(f"point {k}: Newton did not converge, used grid search")
            root = grid_golden(lambda t, k=k: _slice_delta(m, g, sq, k, t), NEWTON_ZMAX, 2001)
        z[k] = root
    return PressureReport(z, "TSNE", tuple(warnings))


def _umap_slice_delta(m: Method, g: AffinityGraph, sq, k, zs):
    """Slice value minus its value at z = 0, computed without cancellation."""
    mask = np.arange(sq.shape[0]) != k
    s = sq[k, mask]
    w = g.w_plus[k, mask]
    a, b = m.umap_a, m.umap_b
    zs = np.atleast_1d(np.asarray(zs, dtype=np.float64))
    t = (zs**2)[:, None]
    # log(1+q') - log(1+q), q' = a (s+t)^b
    q = a * s**b
    with np.errstate(divide="ignore", invalid="ignore"):
        growth = np.where(s > 0, np.expm1(b * np.log1p(t / np.where(s > 0, s, 1.0))), np.inf)
        dq = np.where(s > 0, q * growth, a * t**b)
    dlog1p = np.log1p(dq / (1.0 + q))
    sc = np.maximum(s, UMAP_MIN_SQDIST)
    sc_t = np.maximum(s + t, UMAP_MIN_SQDIST)
    dlogq = b * np.log1p((sc_t - sc) / sc)
    per_pair = w * dlog1p + (w - 1.0) * (dlogq - dlog1p)
    return 2.0 * per_pair.sum(axis=1)


def pressure_umap(g: AffinityGraph, x, m: Method = Method("UMAP")) -> PressureReport:
    m = as_method(m)
    if m.tag != "UMAP":
        raise ValidationError("pressure_umap needs a UMAP method")
    x = coords_of(x)
    sq = pairwise_sqdist(x)
    n = x.shape[0]
    h = UMAP_FD_STEP
    z = np.zeros(n)
    for k in range(n):
        # f(h) - 2 f(0) + f(-h) with an even slice
        curvature = 2.0 * _umap_slice_delta(m, g, sq, k, h)[0] / h**2
        if curvature < 0:
            z[k] = grid_golden(lambda t, k=k: _umap_slice_delta(m, g, sq, k, t), UMAP_ZMAX)
    return PressureReport(z, "UMAP")


def compute_pressure(m, g: AffinityGraph, x, newton: NewtonConfig = NewtonConfig(),
                     mu: float = 0.0) -> PressureReport:
    """Dispatch on method. ``mu`` (EE and SNE only) adds the penalty ``mu z^2`` to the slice."""
    m = as_method(m)
    if m.tag == "EE":
        return pressure_ee(g, x, mu)
    if m.tag == "SNE":
        return pressure_sne(g, x, mu)
    if mu:
        raise ValidationError("a penalized slice is only defined for EE and SNE")
    if m.tag == "TSNE":
        return pressure_tsne(g, x, newton)
    return pressure_umap(g, x, m)


def pressured_mask(m, g: AffinityGraph, x) -> np.ndarray:
    """Classification only; cheap enough to run every iteration."""
    m = as_method(m)
    x = coords_of(x)
    if m.tag in ("EE", "SNE"):
        return compute_pressure(m, g, x).mask
    sq = pairwise_sqdist(x)
    if m.tag == "TSNE":
        return tsne_second_derivative_at_zero(g, sq) < 0
    return np.array([
        _umap_slice_delta(m, g, sq, k, UMAP_FD_STEP)[0] < 0 for k in range(x.shape[0])
    ])
