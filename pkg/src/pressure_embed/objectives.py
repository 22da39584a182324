"""EE, SNE, t-SNE and UMAP objectives and their gradients.

Every objective has the form ``E = E+ + E-`` with sums over ordered pairs
``i != j``. All four gradients share one shape::

    grad = 4 * L(C) @ X,    L(C) = diag(C.sum(1)) - C

where ``C[i, j] = dE/dS_ij`` is the derivative with respect to the squared
distance of an ordered pair. :func:`pair_coefficients` returns ``C``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from .core import AffinityGraph, EvaluationError, ValidationError, coords_of, pairwise_sqdist

EXP_FLOOR = -708.0
UMAP_MIN_SQDIST = 1e-16  # distance 1e-8
TINY_SQDIST = 1e-30


@dataclass(frozen=True)
class Method:
    tag: str = "EE"
    umap_a: float = 1.0
    umap_b: float = 1.0

    def __post_init__(self):
        tag = self.tag.upper().replace("-", "")
        if tag == "T_SNE":
            tag = "TSNE"
        if tag not in ("EE", "SNE", "TSNE", "UMAP"):
            raise ValidationError(f"unknown method {self.tag!r}")
        if not (self.umap_a > 0 and self.umap_b > 0):
            raise ValidationError("umap_a and umap_b must be positive")
        object.__setattr__(self, "tag", tag)


def as_method(m) -> Method:
    return m if isinstance(m, Method) else Method(str(m))


def _offdiag(n):
    return ~np.eye(n, dtype=bool)


def _neg_exp(s):
    # e^{-s} with arguments below -708 mapped to exactly 0
    return np.where(s > -EXP_FLOOR, 0.0, np.exp(-np.minimum(s, -EXP_FLOOR)))


def _offdiag_logsumexp(sq, mask):
    """``log sum_{i != j} exp(-sq_ij)`` per slice, shifted by the smallest off-diagonal entry."""
    shift = np.min(np.where(mask, sq, np.inf), axis=(-2, -1), keepdims=True)
    total = np.sum(np.where(mask, np.exp(shift - sq), 0.0), axis=(-2, -1))
    return np.log(total) - shift[..., 0, 0]


def energy_terms(m: Method, g: AffinityGraph, sq: np.ndarray):
    """Attractive and repulsive terms for squared distances ``sq``.

    ``sq`` may be a stack of shape ``(..., N, N)``; the diagonal of every
    slice is ignored. Returns two arrays of shape ``sq.shape[:-2]``.
    """
    n = g.n
    mask = _offdiag(n)
    axes = (-2, -1)
    wp = g.w_plus
    if m.tag == "EE":
        attract = np.sum(wp * sq, axis=axes)
        repulse = g.lam * np.sum(g.w_minus * _neg_exp(sq), axis=axes)
    elif m.tag == "SNE":
        attract = np.sum(wp * sq, axis=axes)
        repulse = _offdiag_logsumexp(sq, mask)
    elif m.tag == "TSNE":
        attract = np.sum(wp * np.log1p(sq), axis=axes)
        total = np.sum(np.where(mask, 1.0 / (1.0 + sq), 0.0), axis=axes)
        assert np.all(total > 0)
        repulse = np.log(total)
    else:
        a, b = m.umap_a, m.umap_b
        q = a * np.maximum(sq, 0.0) ** b
        attract = np.sum(wp * np.log1p(q), axis=axes)
        # log(1 - 1/(1+q)) = log q - log(1+q), with distance clamped at 1e-8
        sc = np.maximum(sq, UMAP_MIN_SQDIST)
        qc = a * sc**b
        log_term = np.log(a) + b * np.log(sc) - np.log1p(qc)
        repulse = np.sum(np.where(mask, (wp - 1.0) * log_term, 0.0), axis=axes)
    return attract, repulse


def objective(m, g: AffinityGraph, x):
    """Return ``(total, attract, repulse)`` for embedding ``x``."""
    m = as_method(m)
    x = coords_of(x)
    _check(g, x)
    with np.errstate(over="ignore", invalid="ignore"):
        # a non-finite total is reported below
        attract, repulse = energy_terms(m, g, pairwise_sqdist(x))
        total = float(attract + repulse)
    if not np.isfinite(total):
        raise EvaluationError(f"{m.tag} objective is not finite")
    return total, float(attract), float(repulse)


def pair_coefficients(m: Method, g: AffinityGraph, sq: np.ndarray) -> np.ndarray:
    """``C[i, j] = dE/dS_ij`` for a single (N, N) squared-distance matrix."""
    n = g.n
    mask = _offdiag(n)
    wp = g.w_plus
    if m.tag == "EE":
        c = wp - g.lam * g.w_minus * _neg_exp(sq)
    elif m.tag == "SNE":
        lse = _offdiag_logsumexp(sq, mask)
        c = wp - np.where(mask, np.exp(-sq - lse), 0.0)
    elif m.tag == "TSNE":
        k = 1.0 / (1.0 + sq)
        z = np.sum(np.where(mask, k, 0.0))
        c = wp * k - np.where(mask, k * k, 0.0) / z
    else:
        a, b = m.umap_a, m.umap_b
        s_inv = 1.0 / np.maximum(sq, TINY_SQDIST)
        q = a * sq**b
        c = wp * b * q / (1.0 + q) * s_inv
        clamped = sq < UMAP_MIN_SQDIST
        c += np.where(clamped | ~mask, 0.0, (wp - 1.0) * b / (1.0 + q) * s_inv)
    c = np.where(mask, c, 0.0)
    return c


def laplacian_apply(c: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``4 (diag(C 1) - C) x``."""
    return 4.0 * (c.sum(axis=1)[:, None] * x - c @ x)


def gradient(m, g: AffinityGraph, x) -> np.ndarray:
    m = as_method(m)
    x = coords_of(x)
    _check(g, x)
    grad = laplacian_apply(pair_coefficients(m, g, pairwise_sqdist(x)), x)
    if not np.all(np.isfinite(grad)):
        raise EvaluationError(f"{m.tag} gradient is not finite")
    return grad


def value_and_gradient(m, g: AffinityGraph, x):
    """Objective total and gradient sharing one distance computation."""
    m = as_method(m)
    x = coords_of(x)
    sq = pairwise_sqdist(x)
    attract, repulse = energy_terms(m, g, sq)
    total = float(attract + repulse)
    grad = laplacian_apply(pair_coefficients(m, g, sq), x)
    if not (np.isfinite(total) and np.all(np.isfinite(grad))):
        raise EvaluationError(f"{m.tag} objective or gradient is not finite")
    return total, grad


def _check(g, x):
    if x.shape[0] != g.n:
        raise ValidationError(f"embedding has {x.shape[0]} points, graph has {g.n}")
