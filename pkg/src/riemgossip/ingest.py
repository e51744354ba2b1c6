"""MovieLens-style ratings ingestion.

Movies become rows and users become columns, so that splitting users across
agents is a column partition.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .completion import SparseObservations
from .datagen import partition_columns, read_instance, split_blocks

__all__ = [
    "RATING_MIN",
    "RATING_MAX",
    "Ratings",
    "parse_ratings",
    "split_train_test",
    "partition_users",
    "nmae",
    "load_instance",
]

log = logging.getLogger(__name__)

RATING_MIN, RATING_MAX = 0.5, 5.0
HEADER = ["userId", "movieId", "rating", "timestamp"]


@dataclass
class Ratings:
    obs: SparseObservations
    # dense index -> original id
    movie_ids: np.ndarray
    user_ids: np.ndarray


def parse_ratings(path: str | Path) -> Ratings:
    """Read ``userId,movieId,rating,timestamp`` lines into a movies x users matrix.

    Ids are re-indexed densely in ascending order. A repeated (user, movie)
    pair keeps the last rating and logs a warning.
    """
    users: list[int] = []
    movies: list[int] = []
    values: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != HEADER:
            raise ValueError(f"{path}:1: expected header {','.join(HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                user, movie, rating = int(row[0]), int(row[1]), float(row[2])
                if len(row) != 4:
                    raise ValueError
            except (ValueError, IndexError):
                raise ValueError(f"{path}:{lineno}: malformed line {','.join(row)!r}") from None
            if not RATING_MIN <= rating <= RATING_MAX:
                raise ValueError(f"{path}:{lineno}: rating {rating} outside [0.5, 5]")
            users.append(user)
            movies.append(movie)
            values.append(rating)

    user_ids, cols = np.unique(np.array(users, dtype=np.int64), return_inverse=True)
    movie_ids, rows = np.unique(np.array(movies, dtype=np.int64), return_inverse=True)
    vals = np.array(values)
    keys = rows * len(user_ids) + cols
    # keep the last occurrence of each key
    rev_keys = keys[::-1]
    _, first_in_rev = np.unique(rev_keys, return_index=True)
    keep = np.sort(len(keys) - 1 - first_in_rev)
    if len(keep) < len(keys):
        log.warning("%s: %d duplicate (user, movie) ratings, kept the last", path, len(keys) - len(keep))
    obs = SparseObservations(len(movie_ids), len(user_ids), rows[keep], cols[keep], vals[keep])
    return Ratings(obs, movie_ids, user_ids)


def split_train_test(
    obs: SparseObservations, fraction: float, seed: int | np.random.Generator | None = 0
) -> tuple[SparseObservations, SparseObservations]:
    """Random disjoint split with ``round(fraction * len(obs))`` test entries."""
    if not 0 <= fraction < 1:
        raise ValueError("fraction must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(obs))
    n_test = int(round(fraction * len(obs)))
    return obs.select(np.sort(perm[n_test:])), obs.select(np.sort(perm[:n_test]))


def partition_users(
    train: SparseObservations, test: SparseObservations, n_agents: int
) -> tuple[list[SparseObservations], list[SparseObservations]]:
    """Split train and test by user (column) ranges; every agent keeps all movies."""
    ranges = partition_columns(train.n_cols, n_agents)
    return split_blocks(train, ranges), split_blocks(test, ranges)


def nmae(mae: float) -> float:
    """Mean absolute error normalized by the rating range 5 - 0.5."""
    if mae < 0:
        raise ValueError("mae must be >= 0")
    return mae / (RATING_MAX - RATING_MIN)


def load_instance(
    path: str | Path, n_agents: int, test_fraction: float = 0.2, seed: int = 0
) -> tuple[list[SparseObservations], list[SparseObservations], int | None]:
    """Load either a ratings CSV or the sparse instance text format.

    Ratings files are split train/test and partitioned by user; instance
    files carry their own split and partition, and the returned rank is the
    one in their header (``None`` for ratings).
    """
    with open(path) as fh:
        first = fh.readline()
    if first.strip().startswith("userId"):
        ratings = parse_ratings(path)
        train, test = split_train_test(ratings.obs, test_fraction, seed)
        blocks, heldout = partition_users(train, test, n_agents)
        return blocks, heldout, None
    blocks, heldout, rank = read_instance(path)
    return blocks, heldout, rank
