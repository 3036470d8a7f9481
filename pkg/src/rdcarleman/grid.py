"""Tensor-product grids, discrete Laplacians, and norm helpers.

Scalar fields live on grids over the unit box [0,1]^d with n points per
axis. Flattened storage is C-ordered, so axis 0 is the slowest index.
Axes with homogeneous Dirichlet conditions hold interior nodes
x = (j+1)/(n+1); periodic axes hold x = j/n. By convention all Dirichlet
axes come before the periodic ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np
import scipy.sparse as sp

DIRICHLET = "dirichlet"
PERIODIC = "periodic"

# Above this flattened dimension, dense/sparse materialization of the
# d-dimensional Laplacian is refused and callers must go matrix-free.
MATERIALIZE_CAP = 10_000


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor-product grid.

    Parameters
    ----------
    n : int
        Number of nodes per axis, at least 2.
    axis_bcs : tuple of str
        Boundary kind per axis (``"dirichlet"`` or ``"periodic"``),
        Dirichlet axes first.
    """

    n: int
    axis_bcs: Tuple[str, ...]

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"need n >= 2 nodes per axis, got n={self.n}")
        if len(self.axis_bcs) < 1:
            raise ValueError("need at least one axis")
        for bc in self.axis_bcs:
            if bc not in (DIRICHLET, PERIODIC):
                raise ValueError(f"unknown boundary kind {bc!r}")
        seen_periodic = False
        for bc in self.axis_bcs:
            if bc == PERIODIC:
                seen_periodic = True
            elif seen_periodic:
                raise ValueError("Dirichlet axes must precede periodic axes")

    @property
    def d(self) -> int:
        return len(self.axis_bcs)

    @property
    def d1(self) -> int:
        """Number of Dirichlet axes."""
        return sum(1 for bc in self.axis_bcs if bc == DIRICHLET)

    @property
    def d2(self) -> int:
        """Number of periodic axes."""
        return self.d - self.d1

    @property
    def n_d(self) -> int:
        """Total number of grid nodes n**d."""
        return self.n**self.d

    def spacing(self, axis: int) -> float:
        if self.axis_bcs[axis] == DIRICHLET:
            return 1.0 / (self.n + 1)
        return 1.0 / self.n

    def axis_coordinates(self, axis: int) -> np.ndarray:
        if self.axis_bcs[axis] == DIRICHLET:
            return np.arange(1, self.n + 1) / (self.n + 1)
        return np.arange(self.n) / self.n

    def sample(self, fn: Callable[..., np.ndarray]) -> "SpatialField":
        """Evaluate ``fn(x1, ..., xd)`` on the grid and wrap as a field."""
        axes = [self.axis_coordinates(a) for a in range(self.d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        values = np.broadcast_to(np.asarray(fn(*mesh), dtype=float), mesh[0].shape)
        return SpatialField(values.reshape(-1).copy(), self)


@dataclass
class SpatialField:
    """Flattened scalar field plus the grid it lives on."""

    values: np.ndarray
    grid: GridSpec

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.values.size != self.grid.n_d:
            raise ValueError(
                f"field has {self.values.size} entries, grid expects {self.grid.n_d}"
            )

    def reshaped(self) -> np.ndarray:
        """View as an n x ... x n tensor (axis 0 slowest)."""
        return self.values.reshape((self.grid.n,) * self.grid.d)


@dataclass
class SparseOperator:
    """Linear operator on flattened grid fields.

    Holds either an explicit sparse matrix or a tuple of one-dimensional
    Kronecker-sum factors (one per axis; the operator is then
    sum_a I (x) ... (x) D_a (x) ... (x) I). ``s`` bounds the number of
    nonzeros in any row or column.
    """

    shape: Tuple[int, int]
    matrix: Optional[sp.spmatrix] = None
    kron_sum_factors: Optional[Tuple[sp.spmatrix, ...]] = None
    symmetric: bool = True
    s: int = 0

    def __post_init__(self) -> None:
        if self.matrix is None and self.kron_sum_factors is None:
            raise ValueError("operator needs a matrix or Kronecker-sum factors")

    @property
    def is_matrix_free(self) -> bool:
        return self.matrix is None

    def apply(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec, dtype=float)
        if self.matrix is not None:
            return self.matrix @ vec
        factors = self.kron_sum_factors
        n = factors[0].shape[0]
        d = len(factors)
        tensor = vec.reshape((n,) * d)
        out = np.zeros_like(tensor)
        for axis, fac in enumerate(factors):
            out += _apply_along_axis(fac, tensor, axis)
        return out.reshape(-1)

    def materialize(self, cap: int = MATERIALIZE_CAP) -> sp.spmatrix:
        """Assemble an explicit sparse matrix (small problems only)."""
        if self.matrix is not None:
            return self.matrix
        dim = self.shape[0]
        if dim > cap:
            raise ValueError(
                f"operator dimension {dim} exceeds materialization cap {cap}; "
                "use matrix-free application instead"
            )
        factors = self.kron_sum_factors
        d = len(factors)
        n = factors[0].shape[0]
        total = sp.csr_matrix((dim, dim))
        for axis, fac in enumerate(factors):
            left = sp.identity(n**axis, format="csr")
            right = sp.identity(n ** (d - axis - 1), format="csr")
            total = total + sp.kron(sp.kron(left, fac), right, format="csr")
        return total.tocsr()

    def dense(self, cap: int = MATERIALIZE_CAP) -> np.ndarray:
        return np.asarray(self.materialize(cap).todense())


def _apply_along_axis(mat: sp.spmatrix, tensor: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(tensor, axis, 0)
    flat = moved.reshape(moved.shape[0], -1)
    res = mat @ flat
    res = np.asarray(res).reshape((mat.shape[0],) + moved.shape[1:])
    return np.moveaxis(res, 0, axis)


def build_laplacian_1d(n: int, bc: str) -> SparseOperator:
    """Second-difference operator on one axis.

    Dirichlet: (n+1)^2 * tridiag(1, -2, 1) over the n interior nodes.
    Periodic: n^2 * circulant second difference (wraparound corners).
    """
    if n < 2:
        raise ValueError(f"need n >= 2 nodes, got n={n}")
    if bc == DIRICHLET:
        scale = float((n + 1) ** 2)
        mat = sp.diags(
            [np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)],
            offsets=[-1, 0, 1],
            format="csr",
        ) * scale
    elif bc == PERIODIC:
        scale = float(n**2)
        rows, cols, vals = [], [], []
        for j in range(n):
            rows += [j, j, j]
            cols += [j, (j + 1) % n, (j - 1) % n]
            vals += [-2.0, 1.0, 1.0]
        # coo_matrix sums duplicates, which handles the n=2 wraparound
        mat = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr() * scale
    else:
        raise ValueError(f"unknown boundary kind {bc!r}")
    return SparseOperator(shape=(n, n), matrix=mat, symmetric=True, s=3)


def build_laplacian_nd(spec: GridSpec) -> SparseOperator:
    """Kronecker-sum Laplacian for the full grid, matrix-free by default."""
    factors = tuple(build_laplacian_1d(spec.n, bc).matrix for bc in spec.axis_bcs)
    dim = spec.n_d
    return SparseOperator(
        shape=(dim, dim),
        kron_sum_factors=factors,
        symmetric=True,
        s=2 * spec.d + 1,
    )


def mu1(n: int, bc: str = DIRICHLET) -> float:
    """Largest eigenvalue of the 1-D discrete Laplacian.

    Dirichlet value is -4(n+1)^2 sin^2(pi/(2n+2)); the periodic operator
    annihilates constants, so its largest eigenvalue is exactly 0.
    """
    if n < 2:
        raise ValueError(f"need n >= 2 nodes, got n={n}")
    if bc == PERIODIC:
        return 0.0
    if bc == DIRICHLET:
        return -4.0 * (n + 1) ** 2 * math.sin(math.pi / (2 * n + 2)) ** 2
    raise ValueError(f"unknown boundary kind {bc!r}")


class NormPair(NamedTuple):
    raw: float        # plain l^p norm of the flattened values
    rescaled: float   # raw / n^(d/p), a grid-size-robust companion


def norms(field: SpatialField, p: float) -> NormPair:
    """Plain and rescaled l^p norms of a field.

    The rescaled value divides by n^(d/p), which makes it behave like a
    continuum L^p norm under grid refinement; at p = inf the two coincide.
    """
    if p < 1:
        raise ValueError(f"need p >= 1, got p={p}")
    v = field.values
    if math.isinf(p):
        raw = float(np.max(np.abs(v))) if v.size else 0.0
        return NormPair(raw, raw)
    raw = float(np.sum(np.abs(v) ** p) ** (1.0 / p))
    scale = field.grid.n ** (field.grid.d / p)
    return NormPair(raw, raw / scale)
