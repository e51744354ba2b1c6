"""Run traces: per-slot costs, test errors and consensus distances, and their CSV form."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .completion import local_cost, solve_weights, test_error
from .grassmann import SingularOverlap, geodesic_distance

__all__ = ["TraceRow", "RunTrace", "record", "write_csv", "read_csv", "format_float"]


def format_float(x: float | None) -> str:
    """12 significant digits; ``None`` (undefined) becomes an empty cell."""
    if x is None:
        return ""
    return f"{x:.12g}"


@dataclass
class TraceRow:
    slot: int
    stepsize: float
    costs: list[float]
    rmse: list[float | None]
    mae: list[float | None]
    distances: list[float | None]


@dataclass
class RunTrace:
    """Recorded history of one simulation.

    ``pairs`` lists the agent pairs (1-based ids) whose distances are
    recorded, in column order.
    """

    n_agents: int
    pairs: list[tuple[int, int]]
    variant: str = ""
    rows: list[TraceRow] = field(default_factory=list)
    skipped_slots: list[int] = field(default_factory=list)
    update_counts: list[int] = field(default_factory=list)
    # how often each pair was drawn
    pair_counts: dict[tuple[int, int], int] = field(default_factory=dict)

    def header(self) -> list[str]:
        ids = range(1, self.n_agents + 1)
        return (
            ["slot", "stepsize"]
            + [f"cost_{i}" for i in ids]
            + [f"test_rmse_{i}" for i in ids]
            + [f"test_mae_{i}" for i in ids]
            + [f"dist_{i}_{k}" for i, k in self.pairs]
        )

    # convenience views used by the CLI summary and the tests
    def slots(self) -> np.ndarray:
        return np.array([row.slot for row in self.rows])

    def costs(self) -> np.ndarray:
        return np.array([row.costs for row in self.rows], dtype=float)

    def rmse(self) -> np.ndarray:
        return np.array([[np.nan if v is None else v for v in row.rmse] for row in self.rows])

    def mae(self) -> np.ndarray:
        return np.array([[np.nan if v is None else v for v in row.mae] for row in self.rows])

    def distances(self) -> np.ndarray:
        return np.array(
            [[np.nan if v is None else v for v in row.distances] for row in self.rows]
        ).reshape(len(self.rows), len(self.pairs))


def record(
    trace: RunTrace,
    slot: int,
    agents: Sequence,
    stepsize: float = 0.0,
) -> TraceRow:
    """Evaluate the agents' current state and append one row to ``trace``.

    Agents are anything with ``point``, ``block``, ``heldout``, ``reg`` and
    ``weights`` attributes; ``weights`` must have been solved at ``point``
    (``None`` forces a fresh solve).
    """
    costs, rmses, maes = [], [], []
    for agent in agents:
        w = agent.weights
        if w is None:
            w = solve_weights(agent.point, agent.block, agent.reg)
        costs.append(local_cost(agent.point, agent.block, agent.reg, weights=w))
        if len(agent.heldout):
            rmse, mae = test_error(agent.point, w, agent.heldout)
        else:
            rmse = mae = None
        rmses.append(rmse)
        maes.append(mae)
    dists: list[float | None] = []
    for i, k in trace.pairs:
        try:
            dists.append(geodesic_distance(agents[i - 1].point, agents[k - 1].point))
        except SingularOverlap:
            dists.append(None)
    row = TraceRow(slot, float(stepsize), costs, rmses, maes, dists)
    trace.rows.append(row)
    return row


def write_csv(trace: RunTrace, path: str | Path) -> None:
    """Write the trace as CSV: header then one line per recorded slot."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(trace.header())
        for row in trace.rows:
            writer.writerow(
                [str(row.slot), format_float(row.stepsize)]
                + [format_float(v) for v in row.costs]
                + [format_float(v) for v in row.rmse]
                + [format_float(v) for v in row.mae]
                + [format_float(v) for v in row.distances]
            )


def _parse_cell(cell: str) -> float | None:
    return None if cell == "" else float(cell)


def read_csv(path: str | Path) -> RunTrace:
    """Parse a CSV written by :func:`write_csv` back into a :class:`RunTrace`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n = sum(1 for h in header if h.startswith("cost_"))
        pairs = []
        for h in header[2 + 3 * n :]:
            _, i, k = h.split("_")
            pairs.append((int(i), int(k)))
        trace = RunTrace(n_agents=n, pairs=pairs)
        for cells in reader:
            vals = [_parse_cell(c) for c in cells[2:]]
            costs = vals[:n]
            if any(c is None for c in costs):
                raise ValueError(f"missing cost value in slot {cells[0]}")
            trace.rows.append(
                TraceRow(
                    slot=int(cells[0]),
                    stepsize=float(cells[1]),
                    costs=costs,
                    rmse=vals[n : 2 * n],
                    mae=vals[2 * n : 3 * n],
                    distances=vals[3 * n :],
                )
            )
    return trace
