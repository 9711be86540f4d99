"""Low multilinear rank decomposition by orthogonal iteration and its one-shot baselines.

The iterative fit sweeps the factor groups in ascending index order. Within a
sweep, group ``i`` is refreshed from the tensor contracted with the already
refreshed factors of groups before ``i``, the previous factor of group ``i``
on its non-representative modes, and the previous factors of groups after
``i``; the new factor is the leading left singular basis of the representative
mode unfolding. Modes outside every group ("dense" modes) are never
contracted and receive no factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import as_rng, sin_theta, svd_r
from .tensor import (
    ModeGroups,
    asymmetric_groups,
    check_tensor,
    hs_norm,
    matricize,
    mode_product,
    partial_groups,
)

__all__ = [
    "IterationRecord",
    "TuckerFit",
    "initial_factors",
    "hooi",
    "hooi_d3",
    "hooi_partial",
    "one_step_hooi",
    "t_hosvd",
    "st_hosvd",
]


@dataclass(frozen=True)
class IterationRecord:
    """One sweep of the iteration trace.

    ``captured_norm`` is the Hilbert-Schmidt norm of the core at that sweep;
    ``subspace_gaps`` holds the per-group spectral sin-Theta distance to the
    reference factors when a reference was supplied. Sweep 0 is the
    initialization.
    """

    iteration: int
    captured_norm: float
    subspace_gaps: tuple | None = None


@dataclass(frozen=True)
class TuckerFit:
    """Result of a decomposition: factors, core, reconstruction, and trace."""

    groups: ModeGroups
    factors: tuple
    core: np.ndarray
    reconstruction: np.ndarray
    trace: tuple
    n_iter: int

    @property
    def captured_norm(self) -> float:
        """Hilbert-Schmidt norm of the core."""
        return hs_norm(self.core)

    def factor_for_mode(self, mode: int) -> np.ndarray:
        return self.factors[self.groups.group_of(mode)]


def _contract(T, groups: ModeGroups, factors, skip_mode=None):
    """Contract every grouped mode (except ``skip_mode``) with its factor transposed."""
    out = T
    for mode in groups.grouped_modes:
        if mode == skip_mode:
            continue
        out = mode_product(out, mode, factors[groups.group_of(mode)].T)
    return out


def _expand(core, groups: ModeGroups, factors):
    out = core
    for mode in groups.grouped_modes:
        out = mode_product(out, mode, factors[groups.group_of(mode)])
    return out


def initial_factors(T, groups: ModeGroups, init="sthosvd", rng=None, order=None):
    """Build per-group starting bases.

    ``init`` is one of ``'thosvd'`` (basis of each representative-mode
    unfolding of the raw tensor), ``'sthosvd'`` (same but sequentially
    contracting the groups already processed, in ``order``), ``'random'``
    (Haar), or an explicit list of bases.
    """
    if not isinstance(init, str):
        factors = [np.asarray(U, dtype=np.float64) for U in init]
        if len(factors) != groups.n_groups:
            raise ValueError(f"expected {groups.n_groups} initial bases, got {len(factors)}")
        for U, p, r in zip(factors, groups.group_dims, groups.ranks):
            if U.shape != (p, r):
                raise ValueError(f"initial basis shape {U.shape} does not match ({p}, {r})")
            if np.max(np.abs(U.T @ U - np.eye(r))) > 1e-8:
                raise ValueError("initial basis is not orthonormal")
        return factors

    if init == "random":
        rng = as_rng(rng)
        from .linalg import random_orthonormal

        return [
            random_orthonormal(p, r, rng) for p, r in zip(groups.group_dims, groups.ranks)
        ]
    if init == "thosvd":
        return [
            svd_r(matricize(T, kbar), r).U
            for kbar, r in zip(groups.representatives, groups.ranks)
        ]
    if init == "sthosvd":
        if order is None:
            order = range(groups.n_groups)
        order = [int(i) for i in order]
        if sorted(order) != list(range(groups.n_groups)):
            raise ValueError(f"truncation order {order} is not a permutation of the groups")
        factors = [None] * groups.n_groups
        G = T
        for gi in order:
            kbar = groups.representatives[gi]
            factors[gi] = svd_r(matricize(G, kbar), groups.ranks[gi]).U
            for mode in groups.groups[gi]:
                G = mode_product(G, mode, factors[gi].T)
        return factors
    raise ValueError(f"unknown init scheme {init!r}")


def _finalize(T, groups, factors, trace, n_iter) -> TuckerFit:
    core = _contract(T, groups, factors)
    return TuckerFit(
        groups=groups,
        factors=tuple(factors),
        core=core,
        reconstruction=_expand(core, groups, factors),
        trace=tuple(trace),
        n_iter=n_iter,
    )


def _record(T, groups, factors, iteration, reference):
    gaps = None
    if reference is not None:
        gaps = tuple(
            sin_theta(U, R, math.inf) for U, R in zip(factors, reference)
        )
    return IterationRecord(
        iteration=iteration,
        captured_norm=hs_norm(_contract(T, groups, factors)),
        subspace_gaps=gaps,
    )


def hooi(
    X,
    ranks=None,
    *,
    groups: ModeGroups | None = None,
    init="sthosvd",
    init_order=None,
    t_max: int = 50,
    stop_tol: float = 1e-10,
    reference=None,
    random_state=None,
) -> TuckerFit:
    """Alternating orthogonal iteration for a low multilinear rank fit.

    Parameters
    ----------
    X : ndarray
        Order-d tensor to decompose.
    ranks : sequence of int, optional
        Per-mode ranks; used to build one singleton group per mode when
        ``groups`` is not given.
    groups : ModeGroups, optional
        Explicit factor-group structure (may cover only a subset of modes).
    init : str or list of ndarray
        Starting bases, see :func:`initial_factors`.
    init_order : sequence of int, optional
        Group order for the ``'sthosvd'`` init scheme.
    t_max : int
        Maximum number of sweeps; ``0`` returns the projected initialization.
        The avoidable part of the subspace error halves per sweep, so the
        number of sweeps needed scales with the log of the starting error
        over the noise floor; the default of 50 is generous at desk scale
        and early stopping usually ends the loop much sooner.
    stop_tol : float
        Relative captured-norm change below which the sweep loop stops early
        (``0`` disables early stopping).
    reference : list of ndarray, optional
        Per-group bases against which the trace records sin-Theta gaps.
        Diagnostics only; never used by the iteration.
    random_state : int, Generator, optional
        Seed for the ``'random'`` init scheme.

    Returns
    -------
    TuckerFit
    """
    X = check_tensor(X)
    if groups is None:
        if ranks is None:
            raise ValueError("need either ranks or groups")
        groups = asymmetric_groups(X.shape, ranks)
    if groups.shape != X.shape:
        raise ValueError(f"groups built for shape {groups.shape}, tensor has {X.shape}")
    if t_max < 0:
        raise ValueError("t_max must be >= 0")
    if reference is not None and len(reference) != groups.n_groups:
        raise ValueError("need one reference basis per group")

    factors = initial_factors(X, groups, init, rng=as_rng(random_state), order=init_order)
    trace = [_record(X, groups, factors, 0, reference)]
    n_iter = 0
    for t in range(1, t_max + 1):
        for gi in range(groups.n_groups):
            kbar = groups.representatives[gi]
            G = _contract(X, groups, factors, skip_mode=kbar)
            factors[gi] = svd_r(matricize(G, kbar), groups.ranks[gi]).U
        trace.append(_record(X, groups, factors, t, reference))
        n_iter = t
        if stop_tol > 0:
            prev, cur = trace[-2].captured_norm, trace[-1].captured_norm
            if abs(cur - prev) <= stop_tol * max(1.0, abs(cur)):
                break
    return _finalize(X, groups, factors, trace, n_iter)


def hooi_d3(X, ranks, **kwargs) -> TuckerFit:
    """Order-3 convenience wrapper: one singleton group per mode."""
    X = check_tensor(X, min_order=3)
    if X.ndim != 3 or len(ranks) != 3:
        raise ValueError("hooi_d3 expects an order-3 tensor and three ranks")
    return hooi(X, ranks, **kwargs)


def hooi_partial(X, low_rank_modes, ranks, **kwargs) -> TuckerFit:
    """Orthogonal iteration when only ``low_rank_modes`` carry low-rank structure.

    The remaining modes are treated as dense: they are never contracted
    during the updates and the reconstruction projects only the low-rank
    modes.
    """
    X = check_tensor(X)
    return hooi(X, groups=partial_groups(X.shape, low_rank_modes, ranks), **kwargs)


def one_step_hooi(X, ranks=None, *, groups=None, init="sthosvd", **kwargs) -> TuckerFit:
    """A single sweep of :func:`hooi`; a cheap surrogate for the full iteration."""
    kwargs.pop("t_max", None)
    return hooi(X, ranks, groups=groups, init=init, t_max=1, **kwargs)


def t_hosvd(X, ranks=None, *, groups=None) -> TuckerFit:
    """One-shot truncated decomposition: each factor from the raw unfolding."""
    X = check_tensor(X)
    if groups is None:
        if ranks is None:
            raise ValueError("need either ranks or groups")
        groups = asymmetric_groups(X.shape, ranks)
    factors = initial_factors(X, groups, "thosvd")
    return _finalize(X, groups, factors, [_record(X, groups, factors, 0, None)], 0)


def st_hosvd(X, ranks=None, *, groups=None, truncation_order=None) -> TuckerFit:
    """Sequentially truncated decomposition.

    Factor ``i`` is computed from the unfolding of the tensor already
    contracted with the previously computed factors (transposed), following
    ``truncation_order`` (default: ascending group index).
    """
    X = check_tensor(X)
    if groups is None:
        if ranks is None:
            raise ValueError("need either ranks or groups")
        groups = asymmetric_groups(X.shape, ranks)
    factors = initial_factors(X, groups, "sthosvd", order=truncation_order)
    return _finalize(X, groups, factors, [_record(X, groups, factors, 0, None)], 0)
