"""scikit-learn style wrapper around affinity building and the optimizers."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .affinity import AffinityConfig, build_affinities
from .augmented import make_mu_schedule
from .core import MAX_POINTS, ConfigurationError, ValidationError
from .objectives import Method
from .optimizer import OptimConfig, minimize, pp_optimize, random_init
from .pressure import compute_pressure


class NonlinearEmbedding(TransformerMixin, BaseEstimator):
    """Embed the rows of ``X`` with EE, SNE, t-SNE or UMAP.

    Like :class:`sklearn.manifold.TSNE` the estimator is transductive: it has
    ``fit`` and ``fit_transform`` but no out-of-sample ``transform``.

    Parameters
    ----------
    method : {"ee", "sne", "tsne", "umap"}
    n_components : int
        Embedding dimension d.
    perplexity, sigma : float, optional
        Exactly one selects the affinity bandwidth. With neither given,
        ``perplexity=min(30, (n - 1) / 3)`` is used.
    lam : float
        EE repulsion weight.
    w_minus : {"sqdist", "uniform"}
    optimizer : {"sd", "pp"}
        ``"pp"`` runs Spectral Direction first and then pressured-points
        optimization from its result (EE and SNE only).
    mu_strategy : {"mean", "max", "min"}
    umap_a, umap_b : float
    max_iter : int
    tol : float
        Stop once an iteration lowers the objective by less than this.
    init : array of shape (n, n_components), optional
        Starting embedding; random (uniform, scale 1e-2) when omitted.
    random_state : int or None

    Attributes
    ----------
    embedding_ : ndarray of shape (n, n_components)
    graph_ : AffinityGraph
    run_ : OptimRun
        The last optimizer run (the PP run when ``optimizer="pp"``).
    sd_run_ : OptimRun
    pressure_ : PressureReport
        Pressure of every point at the final embedding.
    objective_ : float
    n_iter_ : int
    """

    def __init__(self, method="ee", n_components=2, perplexity=None, sigma=None, lam=1.0,
                 w_minus="sqdist", optimizer="sd", mu_strategy="mean", umap_a=1.0, umap_b=1.0,
                 max_iter=2000, tol=1e-5, init=None, random_state=None):
        self.method = method
        self.n_components = n_components
        self.perplexity = perplexity
        self.sigma = sigma
        self.lam = lam
        self.w_minus = w_minus
        self.optimizer = optimizer
        self.mu_strategy = mu_strategy
        self.umap_a = umap_a
        self.umap_b = umap_b
        self.max_iter = max_iter
        self.tol = tol
        self.init = init
        self.random_state = random_state

    def _affinity_config(self, n):
        perplexity = self.perplexity
        if perplexity is None and self.sigma is None:
            perplexity = min(30.0, (n - 1) / 3.0)
        return AffinityConfig(sigma=self.sigma, perplexity=perplexity, lam=self.lam,
                              w_minus_mode=self.w_minus)

    def _check_params(self):
        if not (isinstance(self.n_components, (int, np.integer)) and self.n_components >= 1):
            raise ConfigurationError("n_components must be a positive integer")
        if self.optimizer not in ("sd", "pp"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        m = Method(str(self.method), self.umap_a, self.umap_b)
        if self.optimizer == "pp" and m.tag not in ("EE", "SNE"):
            raise ConfigurationError("optimizer='pp' supports EE and SNE only")
        return m

    def fit(self, X, y=None):
        m = self._check_params()
        X = check_array(X, dtype=np.float64, ensure_min_samples=2)
        n = X.shape[0]
        if n > MAX_POINTS:
            raise ValidationError(f"at most {MAX_POINTS} points are supported, got {n}")
        g = build_affinities(X, self._affinity_config(n))
        cfg = OptimConfig(max_iter=self.max_iter, conv_tol=self.tol,
                          seed=0 if self.random_state is None else int(self.random_state))
        if self.init is None:
            x0 = random_init(n, self.n_components, np.random.default_rng(self.random_state))
        else:
            x0 = check_array(self.init, dtype=np.float64)
            if x0.shape != (n, self.n_components):
                raise ValidationError(f"init has shape {x0.shape}, expected {(n, self.n_components)}")
        sd = minimize(m, g, x0, cfg)
        run = sd
        if self.optimizer == "pp":
            run = pp_optimize(m, g, sd.final_embedding, make_mu_schedule(g, self.mu_strategy), cfg)
        self.graph_ = g
        self.sd_run_ = sd
        self.run_ = run
        self.embedding_ = run.final_embedding.coords
        self.objective_ = run.final_objective
        self.n_iter_ = len(sd.trace) + (len(run.trace) if run is not sd else 0)
        self.pressure_ = compute_pressure(m, g, self.embedding_)
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X, y).embedding_

    def pressured_fraction(self):
        check_is_fitted(self, "pressure_")
        return self.pressure_.fraction
