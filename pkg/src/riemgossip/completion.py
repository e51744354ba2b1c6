"""Per-agent low-rank completion: sampled residuals, weight solves, gradients.

An agent owns an ``m x n_i`` column block of the incomplete matrix, given as
:class:`SparseObservations`. For a subspace basis ``U`` the weights ``W``
solve one small ``r x r`` least-squares system per column; the cost and the
Riemannian gradient only ever touch the observed entries.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .grassmann import project_to_tangent

__all__ = [
    "SparseObservations",
    "NotPositiveDefinite",
    "default_reg",
    "solve_weights",
    "local_cost",
    "residuals",
    "riemannian_gradient",
    "precondition",
    "test_error",
]


class NotPositiveDefinite(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class SparseObservations:
    """Observed entries ``(rows[k], cols[k]) -> vals[k]`` of an ``n_rows x n_cols`` block.

    Entries are stored sorted row-major; that order is the one every
    per-entry array (residuals, predictions) follows.
    """

    n_rows: int
    n_cols: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.int64)
        cols = np.ascontiguousarray(self.cols, dtype=np.int64)
        vals = np.ascontiguousarray(self.vals, dtype=np.float64)
        if not (rows.ndim == cols.ndim == vals.ndim == 1 and len(rows) == len(cols) == len(vals)):
            raise ValueError("rows, cols and vals must be 1-d arrays of equal length")
        if len(rows):
            if rows.min() < 0 or rows.max() >= self.n_rows:
                raise ValueError(f"row index out of range [0, {self.n_rows})")
            if cols.min() < 0 or cols.max() >= self.n_cols:
                raise ValueError(f"column index out of range [0, {self.n_cols})")
            keys = rows * self.n_cols + cols
            if np.any(np.diff(keys) <= 0):
                order = np.argsort(keys, kind="stable")
                keys, rows, cols, vals = keys[order], rows[order], cols[order], vals[order]
                if np.any(np.diff(keys) == 0):
                    raise ValueError("duplicate (row, col) pairs in observations")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "vals", vals)

    def __len__(self) -> int:
        return len(self.vals)

    @cached_property
    def row_counts(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.n_rows)

    @cached_property
    def indptr(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.row_counts)])

    def csr(self, data: np.ndarray | None = None) -> sp.csr_matrix:
        """Sparse ``n_rows x n_cols`` matrix with ``data`` (default: ``vals``) on the pattern."""
        data = self.vals if data is None else data
        return sp.csr_matrix((data, self.cols, self.indptr), shape=(self.n_rows, self.n_cols))

    @cached_property
    def pattern_t(self) -> sp.csc_matrix:
        # transposed 0/1 sampling pattern, n_cols x n_rows
        return self.csr(np.ones(len(self))).T

    @cached_property
    def observed_cols(self) -> np.ndarray:
        return np.bincount(self.cols, minlength=self.n_cols)

    @classmethod
    def empty(cls, n_rows: int, n_cols: int = 0) -> SparseObservations:
        z = np.zeros(0, dtype=np.int64)
        return cls(n_rows, n_cols, z, z, np.zeros(0))

    @classmethod
    def from_dense(cls, x: np.ndarray, mask: np.ndarray | None = None) -> SparseObservations:
        if mask is None:
            mask = np.ones(x.shape, dtype=bool)
        rows, cols = np.nonzero(mask)
        return cls(x.shape[0], x.shape[1], rows, cols, x[rows, cols])

    def to_dense(self, fill: float = 0.0) -> np.ndarray:
        out = np.full((self.n_rows, self.n_cols), fill)
        out[self.rows, self.cols] = self.vals
        return out

    def select(self, index: np.ndarray) -> SparseObservations:
        """Subset of the entries selected by ``index`` (same block shape)."""
        return SparseObservations(
            self.n_rows, self.n_cols, self.rows[index], self.cols[index], self.vals[index]
        )


def default_reg(block: SparseObservations) -> float:
    """Ridge weight ``1e-8 * mean(vals**2)``; 0 for an empty block."""
    if len(block) == 0:
        return 0.0
    return 1e-8 * float(np.mean(block.vals**2))


def _sampled_product(u: np.ndarray, w: np.ndarray, block: SparseObservations) -> np.ndarray:
    # rows are sorted, so repeating rows of u equals u[block.rows] but is cheaper
    return np.einsum("ij,ij->i", np.repeat(u, block.row_counts, axis=0), w[block.cols])


def solve_weights(u: np.ndarray, block: SparseObservations, reg: float = 0.0) -> np.ndarray:
    """Least-squares weights ``W`` (``n_cols x r``) for basis ``u`` on the block.

    Column ``j`` solves ``(U_j^T U_j + reg I) w_j = U_j^T x_j`` where ``U_j``
    holds the rows of ``u`` observed in column ``j``. Unobserved columns get 0.
    With ``reg == 0`` a column with fewer than ``r`` observations raises
    ``LinAlgError`` naming the column.
    """
    if u.shape[0] != block.n_rows:
        raise ValueError(f"basis has {u.shape[0]} rows, block has {block.n_rows}")
    if reg < 0:
        raise ValueError("reg must be >= 0")
    n, r = block.n_cols, u.shape[1]
    if n == 0:
        return np.zeros((0, r))
    counts = block.observed_cols
    # per-column normal equations: sum of u_i u_i^T over observed rows i
    outer = (u[:, :, None] * u[:, None, :]).reshape(-1, r * r)
    gram = np.asarray(block.pattern_t @ outer).reshape(n, r, r)
    rhs = np.asarray(block.csr().T @ u)
    gram[:, np.arange(r), np.arange(r)] += reg

    observed = counts > 0
    w = np.zeros((n, r))
    if not observed.any():
        return w
    if reg == 0:
        short = np.flatnonzero(observed & (counts < r))
        if len(short):
            _singular(short[0], counts, r, reg)
    g = gram[observed]
    try:
        chol = np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        _singular(np.flatnonzero(observed)[_first_singular(g)], counts, r, reg)
    y = np.linalg.solve(chol, rhs[observed][..., None])
    w[observed] = np.linalg.solve(np.swapaxes(chol, 1, 2), y)[..., 0]
    return w


def _singular(col: int, counts: np.ndarray, r: int, reg: float):
    raise np.linalg.LinAlgError(
        f"singular normal equations in column {col} "
        f"({counts[col]} observed rows, rank {r}, reg={reg:g}); use reg > 0"
    )


def _first_singular(g: np.ndarray) -> int:
    for k, gk in enumerate(g):
        try:
            np.linalg.cholesky(gk)
        except np.linalg.LinAlgError:
            return k
    return 0


def residuals(u: np.ndarray, w: np.ndarray, block: SparseObservations) -> np.ndarray:
    """Model minus data on the observed entries, aligned with ``block`` ordering."""
    return _sampled_product(u, w, block) - block.vals


def local_cost(
    u: np.ndarray, block: SparseObservations, reg: float = 0.0, weights: np.ndarray | None = None
) -> float:
    """Half the squared residual over observed entries, with ``W`` solved for ``u``.

    ``weights`` may pass a ``W`` already solved at ``u`` to skip the solve.
    """
    if len(block) == 0:
        return 0.0
    w = solve_weights(u, block, reg) if weights is None else weights
    res = residuals(u, w, block)
    return 0.5 * float(res @ res)


def riemannian_gradient(
    u: np.ndarray, block: SparseObservations, reg: float = 0.0, weights: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Riemannian gradient of :func:`local_cost` at ``u`` and the weights used.

    The Euclidean gradient is ``S W`` where ``S`` is the sparse residual
    matrix; it is projected onto the tangent space at ``u``. Cost is
    ``O(|Omega| r^2 + n r^2 + m r)``.
    """
    m, r = u.shape
    w = solve_weights(u, block, reg) if weights is None else weights
    if len(block) == 0:
        return np.zeros((m, r)), w
    egrad = np.asarray(block.csr(residuals(u, w, block)) @ w)
    return project_to_tangent(u, egrad), w


def precondition(xi: np.ndarray, w: np.ndarray, rho: float) -> np.ndarray:
    """Right-scale a tangent vector by ``(W^T W + rho I)^{-1}``.

    Right multiplication by an ``r x r`` matrix keeps ``U^T xi = 0``, so the
    result stays in the same tangent space.
    """
    r = xi.shape[1]
    if w.shape[1] != r:
        raise ValueError(f"weights have {w.shape[1]} columns, tangent has {r}")
    scaling = w.T @ w + rho * np.eye(r)
    try:
        chol = np.linalg.cholesky(scaling)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(
            f"W^T W + rho I is not positive definite (rho={rho:g})"
        ) from None
    if np.min(np.diag(chol)) <= 0:
        raise NotPositiveDefinite(f"W^T W + rho I is not positive definite (rho={rho:g})")
    # xi M^{-1} = (M^{-1} xi^T)^T with M = L L^T
    z = np.linalg.solve(chol, xi.T)
    return np.linalg.solve(chol.T, z).T


def test_error(u: np.ndarray, w: np.ndarray, heldout: SparseObservations) -> tuple[float, float]:
    """(RMSE, MAE) of ``U W^T`` on held-out entries."""
    if len(heldout) == 0:
        raise ValueError("held-out set is empty")
    res = residuals(u, w, heldout)
    return float(np.sqrt(np.mean(res**2))), float(np.mean(np.abs(res)))


# keep pytest from collecting the function above when imported into test modules
test_error.__test__ = False
