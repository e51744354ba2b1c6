"""Synthetic low-rank completion instances split column-wise across agents.

The ground truth is ``A B^T`` with Gaussian factors, optionally reshaped to
an exponentially decaying spectrum with a prescribed condition number. The
matrix is never formed densely: only sampled entries are evaluated, so the
full 10 000 x 100 000 instances fit in memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .completion import SparseObservations

__all__ = [
    "SyntheticSpec",
    "SyntheticInstance",
    "num_observations",
    "spectrum",
    "generate",
    "partition_columns",
    "split_blocks",
    "write_instance",
    "read_instance",
    "synthetic_ratings",
]


@dataclass(frozen=True)
class SyntheticSpec:
    m: int
    n: int
    r: int
    os: float
    noise_std: float = 1e-6
    cond: float | None = None
    test_fraction: float = 0.1
    n_agents: int = 1
    seed: int = 0
    # largest singular value when ``cond`` is set
    sigma1: float = 1.0

    def __post_init__(self):
        if self.r < 1 or self.m < self.r or self.n < self.r:
            raise ValueError(f"invalid dimensions m={self.m}, n={self.n}, r={self.r}")
        if not self.os > 0:
            raise ValueError("os must be > 0")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.cond is not None and not self.cond >= 1:
            raise ValueError("cond must be >= 1")
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must lie in (0, 1)")
        if not 1 <= self.n_agents <= self.n:
            raise ValueError(f"n_agents must lie in [1, n={self.n}]")
        total = num_observations(self.m, self.n, self.r, self.os)
        total += math.ceil(self.test_fraction * total)
        if total > self.m * self.n:
            raise ValueError(
                f"infeasible over-sampling: {total} train+test entries requested "
                f"from a {self.m}x{self.n} matrix"
            )


@dataclass
class SyntheticInstance:
    blocks: list[SparseObservations]
    heldout: list[SparseObservations]
    rank: int
    column_ranges: list[range]
    # ground-truth factors: X = left @ right.T
    left: np.ndarray = field(repr=False)
    right: np.ndarray = field(repr=False)

    def __iter__(self):
        return iter((self.blocks, self.heldout, self.rank))


def num_observations(m: int, n: int, r: int, os: float) -> int:
    """``round(os * (m r + n r - r^2))`` (Python rounding, half to even)."""
    return int(round(os * (m * r + n * r - r * r)))


def spectrum(r: int, cond: float, sigma1: float = 1.0) -> np.ndarray:
    """Singular values ``sigma1 * cond^(-(k-1)/(r-1))`` for ``k = 1..r``."""
    if r == 1:
        return np.array([float(sigma1)])
    return sigma1 * cond ** (-np.arange(r) / (r - 1))


def partition_columns(n: int, n_agents: int) -> list[range]:
    """Contiguous column ranges, one per agent.

    The first agents receive ``ceil(n / N)`` columns and the last one the
    remainder (138493 users over 4 agents gives 34624, 34624, 34624, 34621).
    If that would leave the last agent without columns, sizes are balanced
    to differ by at most one instead.
    """
    if n_agents < 1:
        raise ValueError("n_agents must be >= 1")
    if n_agents > n:
        raise ValueError(f"cannot split {n} columns among {n_agents} agents")
    size = -(-n // n_agents)
    if (n_agents - 1) * size < n:
        bounds = [min(k * size, n) for k in range(n_agents + 1)]
    else:
        base, extra = divmod(n, n_agents)
        sizes = [base + (k < extra) for k in range(n_agents)]
        bounds = np.concatenate([[0], np.cumsum(sizes)]).tolist()
    return [range(bounds[k], bounds[k + 1]) for k in range(n_agents)]


def split_blocks(
    obs: SparseObservations, ranges: list[range]
) -> list[SparseObservations]:
    """Cut a global observation set into per-agent blocks with local column indices."""
    order = np.argsort(obs.cols, kind="stable")
    cols = obs.cols[order]
    out = []
    for cr in ranges:
        lo, hi = np.searchsorted(cols, [cr.start, cr.stop])
        sel = order[lo:hi]
        sel = sel[np.lexsort((obs.cols[sel], obs.rows[sel]))]
        out.append(
            SparseObservations(
                obs.n_rows, len(cr), obs.rows[sel], obs.cols[sel] - cr.start, obs.vals[sel]
            )
        )
    return out


def _factors(spec: SyntheticSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    a = rng.standard_normal((spec.m, spec.r))
    b = rng.standard_normal((spec.n, spec.r))
    if spec.cond is None:
        return a, b
    # thin SVD of A B^T through the QR factors, then swap in the target spectrum
    qa, ra = np.linalg.qr(a)
    qb, rb = np.linalg.qr(b)
    u, _, vt = np.linalg.svd(ra @ rb.T)
    return (qa @ u) * spectrum(spec.r, spec.cond, spec.sigma1), qb @ vt.T


def generate(spec: SyntheticSpec) -> SyntheticInstance:
    """Draw a rank-``r`` matrix, sample train and test entries, split by columns.

    Train entries carry Gaussian noise of std ``noise_std``; test entries
    are noiseless and disjoint from the training set.
    """
    rng = np.random.default_rng(spec.seed)
    left, right = _factors(spec, rng)
    n_train = num_observations(spec.m, spec.n, spec.r, spec.os)
    n_test = math.ceil(spec.test_fraction * n_train)
    flat = rng.choice(spec.m * spec.n, size=n_train + n_test, replace=False)
    train_idx, test_idx = np.sort(flat[:n_train]), np.sort(flat[n_train:])

    def sampled(idx):
        rows, cols = np.divmod(idx, spec.n)
        return rows, cols, np.einsum("ij,ij->i", left[rows], right[cols])

    rows, cols, vals = sampled(train_idx)
    if spec.noise_std > 0:
        vals = vals + spec.noise_std * rng.standard_normal(n_train)
    train = SparseObservations(spec.m, spec.n, rows, cols, vals)
    test = SparseObservations(spec.m, spec.n, *sampled(test_idx))
    ranges = partition_columns(spec.n, spec.n_agents)
    return SyntheticInstance(
        blocks=split_blocks(train, ranges),
        heldout=split_blocks(test, ranges),
        rank=spec.r,
        column_ranges=ranges,
        left=left,
        right=right,
    )


def write_instance(
    path: str | Path,
    blocks: list[SparseObservations],
    heldout: list[SparseObservations],
    rank: int,
) -> None:
    """Write the sparse text format.

    Header ``m n r n_agents``, then one ``row col value split agent`` line per
    entry with 0-based global row/column, ``split`` in {train, test} and
    1-based agent id.
    """
    m = blocks[0].n_rows
    n = sum(b.n_cols for b in blocks)
    with open(path, "w") as fh:
        fh.write(f"{m} {n} {rank} {len(blocks)}\n")
        offset = 0
        for agent, (train, test) in enumerate(zip(blocks, heldout), start=1):
            for split, obs in (("train", train), ("test", test)):
                for i, j, v in zip(obs.rows.tolist(), obs.cols.tolist(), obs.vals.tolist()):
                    fh.write(f"{i} {j + offset} {v!r} {split} {agent}\n")
            offset += train.n_cols


def read_instance(path: str | Path) -> tuple[list[SparseObservations], list[SparseObservations], int]:
    """Read the sparse text format written by :func:`write_instance`."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4:
            raise ValueError(f"{path}: expected header 'm n r n_agents', got {header}")
        m, n, r, n_agents = (int(x) for x in header)
        entries: dict[tuple[str, int], list] = {}
        # columns seen per agent, to recover each agent's range
        col_lo = [n] * n_agents
        col_hi = [-1] * n_agents
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            try:
                i, j, v, split, agent = int(parts[0]), int(parts[1]), float(parts[2]), parts[3], int(parts[4])
            except (ValueError, IndexError):
                raise ValueError(f"{path}:{lineno}: malformed line {line.rstrip()!r}") from None
            if split not in ("train", "test") or not 1 <= agent <= n_agents:
                raise ValueError(f"{path}:{lineno}: bad split or agent in {line.rstrip()!r}")
            entries.setdefault((split, agent), []).append((i, j, v))
            col_lo[agent - 1] = min(col_lo[agent - 1], j)
            col_hi[agent - 1] = max(col_hi[agent - 1], j)
    ranges = partition_columns(n, n_agents)
    for k, cr in enumerate(ranges):
        if col_hi[k] >= 0 and not (cr.start <= col_lo[k] and col_hi[k] < cr.stop):
            raise ValueError(f"{path}: agent {k + 1} has columns outside {cr}")
    out = {}
    for split in ("train", "test"):
        blocks = []
        for k, cr in enumerate(ranges, start=1):
            rows_cols_vals = entries.get((split, k), [])
            arr = np.array(rows_cols_vals, dtype=float).reshape(-1, 3)
            blocks.append(
                SparseObservations(
                    m, len(cr), arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64) - cr.start, arr[:, 2]
                )
            )
        out[split] = blocks
    return out["train"], out["test"], r


def synthetic_ratings(
    path: str | Path,
    n_users: int,
    n_movies: int,
    n_ratings: int,
    rank: int = 5,
    noise_std: float = 0.5,
    seed: int = 0,
) -> None:
    """Write a MovieLens-shaped ``ratings.csv`` drawn from a low-rank taste model.

    Ratings are clipped to [0.5, 5] and rounded to half stars; user and movie
    ids are sparse (not contiguous) like the real files.
    """
    rng = np.random.default_rng(seed)
    movies = rng.standard_normal((n_movies, rank)) / np.sqrt(rank)
    users = rng.standard_normal((n_users, rank)) / np.sqrt(rank)
    bias = 3.5 + 0.5 * rng.standard_normal(n_movies)
    flat = rng.choice(n_users * n_movies, size=n_ratings, replace=False)
    u_idx, m_idx = np.divmod(flat, n_movies)
    score = bias[m_idx] + np.einsum("ij,ij->i", users[u_idx], movies[m_idx])
    score += noise_std * rng.standard_normal(n_ratings)
    rating = np.clip(np.round(score * 2) / 2, 0.5, 5.0)
    user_ids = np.sort(rng.choice(3 * n_users, size=n_users, replace=False)) + 1
    movie_ids = np.sort(rng.choice(5 * n_movies, size=n_movies, replace=False)) + 1
    stamps = 1_000_000_000 + rng.integers(0, 10**8, size=n_ratings)
    order = np.lexsort((m_idx, u_idx))
    with open(path, "w") as fh:
        fh.write("userId,movieId,rating,timestamp\n")
        for k in order.tolist():
            fh.write(f"{user_ids[u_idx[k]]},{movie_ids[m_idx[k]]},{rating[k]:.1f},{stamps[k]}\n")
