"""Dense tensor algebra: matricization, mode products, norms, mode groups.

All tensors are plain ``numpy.ndarray`` values with float64 entries. Every
operation returns a new array; nothing is modified in place, so values can be
shared freely across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "check_tensor",
    "matricize",
    "tensorize",
    "mode_product",
    "multi_mode_product",
    "group_product",
    "hs_inner",
    "hs_norm",
    "kron",
    "ModeGroups",
    "validate_groups",
    "asymmetric_groups",
    "supersymmetric_group",
    "partial_groups",
    "read_tns1",
    "write_tns1",
]


def check_tensor(values, min_order=1, require_finite=True) -> np.ndarray:
    """Coerce ``values`` to a float64 ndarray and validate it.

    Parameters
    ----------
    values : array_like
        Tensor data of any order >= ``min_order``.
    min_order : int
        Minimum number of modes required.
    require_finite : bool
        If True, reject NaN/inf entries.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim < min_order:
        raise ValueError(f"expected an order-{min_order}+ tensor, got order {arr.ndim}")
    if any(p < 1 for p in arr.shape):
        raise ValueError(f"all mode dimensions must be >= 1, got shape {arr.shape}")
    if require_finite and not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains non-finite entries")
    return arr


def matricize(T, mode: int) -> np.ndarray:
    """Unfold tensor ``T`` along ``mode`` into a ``p_mode x prod(other dims)`` matrix.

    Column ordering follows the classical unfolding convention: among the
    remaining modes, the one with the smallest index varies fastest. Modes are
    0-based.
    """
    T = np.asarray(T)
    if not 0 <= mode < T.ndim:
        raise ValueError(f"mode {mode} out of range for order-{T.ndim} tensor")
    return np.reshape(np.moveaxis(T, mode, 0), (T.shape[mode], -1), order="F")


def tensorize(M, mode: int, shape) -> np.ndarray:
    """Fold a matrix back into a tensor of ``shape``; inverse of :func:`matricize`."""
    M = np.asarray(M)
    shape = tuple(int(p) for p in shape)
    if not 0 <= mode < len(shape):
        raise ValueError(f"mode {mode} out of range for shape {shape}")
    rest = tuple(p for i, p in enumerate(shape) if i != mode)
    expected = (shape[mode], int(np.prod(rest, dtype=np.int64)) if rest else 1)
    if M.shape != expected:
        raise ValueError(f"matrix shape {M.shape} does not match {expected} for shape {shape}")
    return np.moveaxis(np.reshape(M, (shape[mode],) + rest, order="F"), 0, mode)


def mode_product(T, mode: int, A) -> np.ndarray:
    """Contract the mode-``mode`` fibers of ``T`` with matrix ``A``.

    ``A`` has shape ``(m, p_mode)`` and the result replaces dimension
    ``p_mode`` by ``m``, so that ``matricize(result, mode) == A @ matricize(T, mode)``.
    """
    T = np.asarray(T)
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[1] != T.shape[mode]:
        raise ValueError(
            f"matrix of shape {A.shape} cannot contract mode {mode} of dim {T.shape[mode]}"
        )
    return np.moveaxis(np.tensordot(A, T, axes=(1, mode)), 0, mode)


def multi_mode_product(T, matrices, modes=None) -> np.ndarray:
    """Apply :func:`mode_product` for each (matrix, mode) pair in ascending mode order."""
    T = np.asarray(T)
    if modes is None:
        modes = range(len(matrices))
    pairs = sorted(zip(modes, matrices), key=lambda mk: mk[0])
    for mode, A in pairs:
        T = mode_product(T, mode, A)
    return T


def group_product(T, modes, A) -> np.ndarray:
    """Contract every mode in ``modes`` with the same matrix ``A`` (ascending order)."""
    T = np.asarray(T)
    modes = sorted(modes)
    dims = {T.shape[k] for k in modes}
    if len(dims) > 1:
        raise ValueError(f"modes {modes} have unequal dimensions {sorted(dims)}")
    for mode in modes:
        T = mode_product(T, mode, A)
    return T


def hs_inner(T1, T2) -> float:
    """Hilbert-Schmidt (entrywise) inner product of two equally shaped tensors."""
    T1 = np.asarray(T1)
    T2 = np.asarray(T2)
    if T1.shape != T2.shape:
        raise ValueError(f"shape mismatch: {T1.shape} vs {T2.shape}")
    return float(np.vdot(T1, T2))


def hs_norm(T) -> float:
    """Hilbert-Schmidt norm, i.e. the Frobenius norm of any unfolding."""
    return float(np.linalg.norm(np.asarray(T).ravel()))


def kron(A, B) -> np.ndarray:
    """Kronecker product with the usual block layout."""
    return np.kron(np.asarray(A), np.asarray(B))


@dataclass(frozen=True)
class ModeGroups:
    """A validated assignment of tensor modes to factor groups.

    Modes inside one group share a single factor matrix; the representative
    mode of a group is its smallest index. Groups may cover only a subset of
    the modes (the uncovered "dense" modes receive no factor and are never
    contracted).

    Attributes
    ----------
    shape : tuple of int
        Full tensor shape, all modes.
    groups : tuple of tuple of int
        Per-group mode indices (0-based, each ascending).
    ranks : tuple of int
        Requested rank per group.
    """

    shape: tuple
    groups: tuple
    ranks: tuple
    mode_to_group: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(p) for p in self.shape))
        object.__setattr__(
            self, "groups", tuple(tuple(sorted(int(k) for k in g)) for g in self.groups)
        )
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        if len(self.groups) != len(self.ranks):
            raise ValueError("need exactly one rank per group")
        if not self.groups:
            raise ValueError("need at least one group")
        seen = {}
        for gi, g in enumerate(self.groups):
            if not g:
                raise ValueError("empty mode group")
            for k in g:
                if not 0 <= k < len(self.shape):
                    raise ValueError(f"mode {k} out of range for shape {self.shape}")
                if k in seen:
                    raise ValueError(f"mode {k} appears in more than one group")
                seen[k] = gi
            dims = {self.shape[k] for k in g}
            if len(dims) > 1:
                raise ValueError(f"group {g} spans unequal dimensions {sorted(dims)}")
        for gi, (g, r) in enumerate(zip(self.groups, self.ranks)):
            p = self.shape[g[0]]
            if not 1 <= r <= p:
                raise ValueError(f"rank {r} of group {g} outside [1, {p}]")
        object.__setattr__(self, "mode_to_group", seen)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def order(self) -> int:
        return len(self.shape)

    @property
    def representatives(self) -> tuple:
        """Smallest mode index of each group."""
        return tuple(g[0] for g in self.groups)

    @property
    def group_dims(self) -> tuple:
        """Shared tensor dimension of each group."""
        return tuple(self.shape[g[0]] for g in self.groups)

    @property
    def grouped_modes(self) -> tuple:
        """All modes covered by some group, ascending."""
        return tuple(sorted(self.mode_to_group))

    @property
    def dense_modes(self) -> tuple:
        """Modes not covered by any group."""
        return tuple(k for k in range(self.order) if k not in self.mode_to_group)

    @property
    def covers_all(self) -> bool:
        return not self.dense_modes

    def group_of(self, mode: int) -> int:
        return self.mode_to_group[mode]

    def rank_of_mode(self, mode: int) -> int:
        return self.ranks[self.mode_to_group[mode]]

    def core_shape(self) -> tuple:
        """Tensor shape after contracting every grouped mode to its rank."""
        return tuple(
            self.ranks[self.mode_to_group[k]] if k in self.mode_to_group else p
            for k, p in enumerate(self.shape)
        )


def validate_groups(shape, groups, ranks) -> ModeGroups:
    """Build :class:`ModeGroups` requiring that the groups partition all modes."""
    mg = ModeGroups(tuple(shape), tuple(groups), tuple(ranks))
    if not mg.covers_all:
        raise ValueError(f"modes {mg.dense_modes} are not covered by any group")
    return mg


def asymmetric_groups(shape, ranks) -> ModeGroups:
    """One singleton group per mode."""
    shape = tuple(shape)
    if len(ranks) != len(shape):
        raise ValueError("need one rank per mode")
    return ModeGroups(shape, tuple((k,) for k in range(len(shape))), tuple(ranks))


def supersymmetric_group(shape, rank) -> ModeGroups:
    """A single group containing every mode."""
    shape = tuple(shape)
    return ModeGroups(shape, (tuple(range(len(shape))),), (rank,))


def partial_groups(shape, modes, ranks) -> ModeGroups:
    """Singleton groups on ``modes`` only; the remaining modes stay dense."""
    modes = tuple(sorted(modes))
    if not modes:
        raise ValueError("need at least one low-rank mode")
    if len(ranks) != len(modes):
        raise ValueError("need one rank per low-rank mode")
    return ModeGroups(tuple(shape), tuple((k,) for k in modes), tuple(ranks))


# --- TNS1 file format -------------------------------------------------------
#
# One JSON header line, then product(dims) little-endian float64 values:
#   {"dims":[...],"dtype":"f64","layout":"row-major"}\n<raw bytes>

def write_tns1(path, T) -> None:
    """Write a tensor to ``path`` in the TNS1 format."""
    T = check_tensor(T, require_finite=False)
    header = json.dumps(
        {"dims": list(T.shape), "dtype": "f64", "layout": "row-major"},
        sort_keys=True,
        separators=(",", ":"),
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(T, dtype="<f8").tobytes(order="C"))


def read_tns1(path) -> np.ndarray:
    """Read a TNS1 tensor file, rejecting malformed headers or byte counts."""
    with open(path, "rb") as fh:
        raw = fh.read()
    nl = raw.find(b"\n")
    if nl < 0:
        raise ValueError("TNS1: missing header line")
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"TNS1: bad header: {exc}") from exc
    if header.get("dtype") != "f64" or header.get("layout") != "row-major":
        raise ValueError(f"TNS1: unsupported dtype/layout in header {header}")
    dims = header.get("dims")
    if not isinstance(dims, list) or not dims or any(
        not isinstance(p, int) or p < 1 for p in dims
    ):
        raise ValueError(f"TNS1: bad dims {dims!r}")
    payload = raw[nl + 1 :]
    count = int(np.prod(dims, dtype=np.int64))
    if len(payload) != 8 * count:
        raise ValueError(f"TNS1: expected {8 * count} payload bytes, found {len(payload)}")
    values = np.frombuffer(payload, dtype="<f8", count=count)
    return values.reshape(tuple(dims), order="C").astype(np.float64)
