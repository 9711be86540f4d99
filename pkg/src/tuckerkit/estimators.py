"""Scikit-learn style estimators wrapping the functional decomposition core."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .cocluster import cocluster as _cocluster
from .decomposition import hooi, hooi_partial, one_step_hooi, st_hosvd, t_hosvd
from .tensor import ModeGroups, check_tensor, mode_product

__all__ = ["TuckerDecomposition", "PartialTucker", "TensorCoclustering"]


class TuckerDecomposition(TransformerMixin, BaseEstimator):
    """Low multilinear rank decomposition of a dense tensor.

    Parameters
    ----------
    ranks : sequence of int
        Per-mode (or per-group, when ``groups`` is given) target ranks.
    algorithm : {'hooi', 'ohooi', 'thosvd', 'sthosvd'}
        Iterative fit, its single-sweep variant, or the one-shot baselines.
    groups : sequence of sequence of int, optional
        Mode groups sharing one factor (0-based); default one group per mode.
    init : str or list of ndarray
        Starting bases for the iterative algorithms.
    t_max : int
        Sweep budget for ``'hooi'``.
    stop_tol : float
        Early-stopping tolerance on the captured-norm change.
    random_state : int or numpy Generator, optional
        Only used by the ``'random'`` init scheme.

    Attributes
    ----------
    factors_ : tuple of ndarray
        Per-group orthonormal bases.
    core_ : ndarray
        Input contracted with every factor transposed.
    reconstruction_ : ndarray
        Low-rank approximation of the fitted tensor.
    trace_ : tuple
        Per-sweep captured norms (iterative algorithms).
    n_iter_ : int
        Number of sweeps actually run.
    """

    def __init__(
        self,
        ranks,
        algorithm="hooi",
        groups=None,
        init="sthosvd",
        t_max=50,
        stop_tol=1e-10,
        random_state=None,
    ):
        self.ranks = ranks
        self.algorithm = algorithm
        self.groups = groups
        self.init = init
        self.t_max = t_max
        self.stop_tol = stop_tol
        self.random_state = random_state

    def _ranks(self, count):
        if np.isscalar(self.ranks):
            return (int(self.ranks),) * count
        return tuple(int(r) for r in self.ranks)

    def _mode_groups(self, X):
        if self.groups is None:
            return None
        groups = tuple(tuple(g) for g in self.groups)
        return ModeGroups(X.shape, groups, self._ranks(len(groups)))

    def fit(self, X, y=None):
        X = check_tensor(X)
        groups = self._mode_groups(X)
        ranks = None if groups is not None else self._ranks(X.ndim)
        if self.algorithm == "hooi":
            fit = hooi(
                X,
                ranks,
                groups=groups,
                init=self.init,
                t_max=self.t_max,
                stop_tol=self.stop_tol,
                random_state=self.random_state,
            )
        elif self.algorithm == "ohooi":
            fit = one_step_hooi(
                X, ranks, groups=groups, init=self.init, random_state=self.random_state
            )
        elif self.algorithm == "thosvd":
            fit = t_hosvd(X, ranks, groups=groups)
        elif self.algorithm == "sthosvd":
            fit = st_hosvd(X, ranks, groups=groups)
        else:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        self.fit_ = fit
        self.groups_ = fit.groups
        self.factors_ = fit.factors
        self.core_ = fit.core
        self.reconstruction_ = fit.reconstruction
        self.trace_ = fit.trace
        self.n_iter_ = fit.n_iter
        return self

    def transform(self, X):
        """Contract ``X`` with the fitted factors (transposed) into core coordinates."""
        check_is_fitted(self, "factors_")
        X = check_tensor(X)
        out = X
        for mode in self.groups_.grouped_modes:
            out = mode_product(out, mode, self.factors_[self.groups_.group_of(mode)].T)
        return out

    def inverse_transform(self, core):
        """Expand core coordinates back to the full tensor space."""
        check_is_fitted(self, "factors_")
        out = np.asarray(core, dtype=np.float64)
        for mode in self.groups_.grouped_modes:
            out = mode_product(out, mode, self.factors_[self.groups_.group_of(mode)])
        return out


class PartialTucker(TransformerMixin, BaseEstimator):
    """Power-iteration fit when only ``modes`` carry low-rank structure."""

    def __init__(self, modes, ranks, init="sthosvd", t_max=50, stop_tol=1e-10, random_state=None):
        self.modes = modes
        self.ranks = ranks
        self.init = init
        self.t_max = t_max
        self.stop_tol = stop_tol
        self.random_state = random_state

    def fit(self, X, y=None):
        fit = hooi_partial(
            check_tensor(X),
            self.modes,
            self.ranks,
            init=self.init,
            t_max=self.t_max,
            stop_tol=self.stop_tol,
            random_state=self.random_state,
        )
        self.fit_ = fit
        self.groups_ = fit.groups
        self.factors_ = fit.factors
        self.core_ = fit.core
        self.reconstruction_ = fit.reconstruction
        self.n_iter_ = fit.n_iter
        return self

    def transform(self, X):
        check_is_fitted(self, "factors_")
        out = check_tensor(X)
        for mode in self.groups_.grouped_modes:
            out = mode_product(out, mode, self.factors_[self.groups_.group_of(mode)].T)
        return out


class TensorCoclustering(BaseEstimator):
    """Per-mode cluster recovery for noisy block tensors.

    Fits a low multilinear rank decomposition and clusters the rows of each
    factor. ``labels_`` holds one integer label vector per mode.
    """

    def __init__(
        self,
        n_clusters,
        algorithm="hooi",
        init="sthosvd",
        t_max=50,
        kmeans_restarts=20,
        kmeans_max_iters=300,
        random_state=None,
    ):
        self.n_clusters = n_clusters
        self.algorithm = algorithm
        self.init = init
        self.t_max = t_max
        self.kmeans_restarts = kmeans_restarts
        self.kmeans_max_iters = kmeans_max_iters
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_tensor(X)
        n_clusters = (
            (int(self.n_clusters),) * X.ndim
            if np.isscalar(self.n_clusters)
            else tuple(int(k) for k in self.n_clusters)
        )
        memberships, fit = _cocluster(
            X,
            n_clusters,
            algorithm=self.algorithm,
            init=self.init,
            t_max=self.t_max,
            kmeans_restarts=self.kmeans_restarts,
            kmeans_max_iters=self.kmeans_max_iters,
            random_state=self.random_state,
        )
        self.labels_ = memberships
        self.fit_ = fit
        self.factors_ = fit.factors
        self.reconstruction_ = fit.reconstruction
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_
