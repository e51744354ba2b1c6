"""Riemannian gossip simulators for decentralized matrix completion.

Each agent keeps its own subspace estimate and its column block of the data.
At every time slot one pair of neighboring agents (or, in the parallel
variant, a whole round of disjoint pairs) takes a stochastic gradient step
on the sum of their completion costs plus ``rho/2`` times their squared
geodesic distance, moving along geodesics with the exponential map.

Variants:

``online`` / ``precon_online``
    chain topology, agent ``i`` drawn uniformly from ``1..N-1`` and updated
    together with ``i+1``; optionally preconditioned by ``(W^T W + rho I)^-1``.
``parallel`` / ``precon_parallel``
    chain topology, one of two rounds of disjoint pairs drawn per slot.
``dynamic``
    fully connected topology, one edge drawn uniformly per slot.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .completion import (
    SparseObservations,
    default_reg,
    local_cost,
    precondition,
    riemannian_gradient,
    solve_weights,
)
from .grassmann import SingularOverlap, exp_map, geodesic_distance, log_map, random_point
from .metrics import RunTrace, record

__all__ = [
    "VARIANTS",
    "AgentState",
    "ProtocolConfig",
    "alpha",
    "stepsize",
    "init_agents",
    "pair_update",
    "parallel_rounds",
    "all_edges",
    "chain_edges",
    "run",
    "run_online",
    "run_parallel",
    "run_dynamic",
    "global_objective",
]

log = logging.getLogger(__name__)

VARIANTS = ("online", "precon_online", "parallel", "precon_parallel", "dynamic")


@dataclass(frozen=True, eq=False)
class AgentState:
    """One agent: its subspace iterate, data block, and weights solved at ``point``."""

    id: int
    point: np.ndarray
    block: SparseObservations
    heldout: SparseObservations
    reg: float = 0.0
    weights: np.ndarray | None = None
    update_count: int = 0


@dataclass(frozen=True)
class ProtocolConfig:
    """Run parameters; ``reg``, when set, overrides every agent's ridge weight."""

    rho: float
    gamma0: float
    reg: float | None = None
    max_slots: int = 1000
    variant: str = "online"
    seed: int = 0
    trace_every: int = 10

    def __post_init__(self):
        if not (np.isfinite(self.rho) and self.rho >= 0):
            raise ValueError(f"rho must be finite and >= 0, got {self.rho}")
        if not (np.isfinite(self.gamma0) and self.gamma0 > 0):
            raise ValueError(f"gamma0 must be finite and > 0, got {self.gamma0}")
        if self.reg is not None and self.reg < 0:
            raise ValueError("reg must be >= 0")
        if self.max_slots < 1:
            raise ValueError("max_slots must be >= 1")
        if self.trace_every < 1:
            raise ValueError("trace_every must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")

    @property
    def preconditioned(self) -> bool:
        return self.variant.startswith("precon_")


def alpha(i: int, n_agents: int) -> float:
    """Completion weight of agent ``i`` on the chain: 1 at the two ends, 0.5 inside."""
    if n_agents < 2 or not 1 <= i <= n_agents:
        raise ValueError(f"agent {i} out of range for N={n_agents}")
    return 1.0 if i in (1, n_agents) else 0.5


def stepsize(t: int, gamma0: float) -> float:
    """``gamma0 / t`` for slot ``t >= 1``."""
    if t < 1:
        raise ValueError(f"slot index must be >= 1, got {t}")
    return gamma0 / t


def init_agents(
    blocks: Sequence[SparseObservations],
    heldouts: Sequence[SparseObservations] | None,
    rank: int,
    rng: np.random.Generator | int | None = None,
    reg: float | None = None,
) -> list[AgentState]:
    """Agents with independent random starting subspaces and weights solved there."""
    rng = np.random.default_rng(rng)
    if heldouts is None:
        heldouts = [SparseObservations.empty(b.n_rows, b.n_cols) for b in blocks]
    if len(heldouts) != len(blocks):
        raise ValueError("need one held-out set per block")
    agents = []
    for i, (block, held) in enumerate(zip(blocks, heldouts), start=1):
        u = random_point(block.n_rows, rank, rng)
        lam = default_reg(block) if reg is None else reg
        agents.append(AgentState(i, u, block, held, lam, solve_weights(u, block, lam)))
    return agents


def _search_direction(
    agent: AgentState, other: np.ndarray, rho: float, weight: float, precon: bool
) -> np.ndarray:
    grad_f, w = riemannian_gradient(agent.point, agent.block, agent.reg, weights=agent.weights)
    # gradient of d^2/2 at x is -Log_x(y)
    xi = weight * grad_f - rho * log_map(agent.point, other)
    if precon:
        xi = precondition(xi, w, rho)
    return xi


def _moved(agent: AgentState, xi: np.ndarray, gamma: float) -> AgentState:
    if not np.all(np.isfinite(xi)):
        raise FloatingPointError(f"non-finite search direction for agent {agent.id}")
    u = exp_map(agent.point, xi, -gamma)
    return replace(
        agent,
        point=u,
        weights=solve_weights(u, agent.block, agent.reg),
        update_count=agent.update_count + 1,
    )


def pair_update(
    a: AgentState,
    b: AgentState,
    gamma: float,
    rho: float,
    alpha_a: float = 1.0,
    alpha_b: float = 1.0,
    precon: bool = False,
) -> tuple[AgentState, AgentState]:
    """One gossip exchange between agents ``a`` and ``b``.

    Both directions are computed from the states before the exchange. Each
    agent moves along ``-gamma * (alpha grad f + rho grad d)``, right-scaled
    by ``(W^T W + rho I)^-1`` when ``precon`` is set.

    Raises :class:`SingularOverlap` if the two subspaces are at the cut locus.
    """
    xi_a = _search_direction(a, b.point, rho, alpha_a, precon)
    xi_b = _search_direction(b, a.point, rho, alpha_b, precon)
    return _moved(a, xi_a, gamma), _moved(b, xi_b, gamma)


def chain_edges(n_agents: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(1, n_agents)]


def all_edges(n_agents: int) -> list[tuple[int, int]]:
    return [(i, k) for i in range(1, n_agents + 1) for k in range(i + 1, n_agents + 1)]


def parallel_rounds(n_agents: int) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Round 1 pairs odd agents with their right neighbor, round 2 the even ones."""
    if n_agents < 3:
        raise ValueError(f"the parallel variant needs N >= 3 agents, got {n_agents}")
    edges = chain_edges(n_agents)
    return edges[0::2], edges[1::2]


def _check_agents(agents: Sequence[AgentState]) -> None:
    if len(agents) < 2:
        raise ValueError("need at least two agents")
    ids = [a.id for a in agents]
    if ids != list(range(1, len(agents) + 1)):
        raise ValueError(f"agent ids must be 1..N in order, got {ids}")
    shape = agents[0].point.shape
    if any(a.point.shape != shape for a in agents):
        raise ValueError("all agents must share the manifold dimensions")


def _simulate(agents, config, trace, draw, weights):
    """Shared slot loop; ``draw(rng)`` returns the list of pairs active this slot."""
    agents = list(agents)
    if config.reg is not None:
        agents = [
            replace(a, reg=config.reg, weights=solve_weights(a.point, a.block, config.reg))
            for a in agents
        ]
    rng = np.random.default_rng(config.seed)
    record(trace, 0, agents, 0.0)
    gamma = 0.0
    for t in range(1, config.max_slots + 1):
        gamma = stepsize(t, config.gamma0)
        active = draw(rng)
        for pair in active:
            trace.pair_counts[pair] = trace.pair_counts.get(pair, 0) + 1
        try:
            updated = [
                pair_update(
                    agents[i - 1],
                    agents[k - 1],
                    gamma,
                    config.rho,
                    weights(i),
                    weights(k),
                    config.preconditioned,
                )
                for i, k in active
            ]
        except SingularOverlap as exc:
            log.warning("slot %d skipped: %s", t, exc)
            trace.skipped_slots.append(t)
        else:
            for (i, k), (new_i, new_k) in zip(active, updated):
                agents[i - 1], agents[k - 1] = new_i, new_k
        if t % config.trace_every == 0 or t == config.max_slots:
            record(trace, t, agents, gamma)
    trace.update_counts = [a.update_count for a in agents]
    return trace, agents


def run_online(
    agents: Sequence[AgentState], config: ProtocolConfig
) -> tuple[RunTrace, list[AgentState]]:
    """Chain gossip: per slot draw ``i`` uniformly in ``1..N-1`` and update ``(i, i+1)``."""
    _check_agents(agents)
    if config.variant not in ("online", "precon_online"):
        raise ValueError(f"run_online cannot run variant {config.variant!r}")
    n = len(agents)
    trace = RunTrace(n, chain_edges(n), config.variant)

    def draw(rng):
        i = int(rng.integers(1, n))
        return [(i, i + 1)]

    return _simulate(agents, config, trace, draw, lambda i: alpha(i, n))


def run_parallel(
    agents: Sequence[AgentState], config: ProtocolConfig
) -> tuple[RunTrace, list[AgentState]]:
    """Round-based chain gossip; the stepsize clock advances once per round drawn.

    Pairs within a round share no agent, so their order does not matter.
    """
    _check_agents(agents)
    if config.variant not in ("parallel", "precon_parallel"):
        raise ValueError(f"run_parallel cannot run variant {config.variant!r}")
    n = len(agents)
    rounds = parallel_rounds(n)
    trace = RunTrace(n, chain_edges(n), config.variant)

    def draw(rng):
        return rounds[int(rng.integers(0, 2))]

    return _simulate(agents, config, trace, draw, lambda i: alpha(i, n))


def run_dynamic(
    agents: Sequence[AgentState], config: ProtocolConfig
) -> tuple[RunTrace, list[AgentState]]:
    """Gossip over a complete graph with one uniformly drawn edge active per slot.

    No ``alpha`` weighting is applied; all pairwise distances are traced.
    """
    _check_agents(agents)
    if config.variant != "dynamic":
        raise ValueError(f"run_dynamic cannot run variant {config.variant!r}")
    n = len(agents)
    edges = all_edges(n)
    trace = RunTrace(n, edges, config.variant)

    def draw(rng):
        return [edges[int(rng.integers(0, len(edges)))]]

    return _simulate(agents, config, trace, draw, lambda i: 1.0)


def run(agents: Sequence[AgentState], config: ProtocolConfig) -> tuple[RunTrace, list[AgentState]]:
    """Dispatch on ``config.variant``."""
    if config.variant in ("online", "precon_online"):
        return run_online(agents, config)
    if config.variant in ("parallel", "precon_parallel"):
        return run_parallel(agents, config)
    return run_dynamic(agents, config)


def global_objective(agents: Sequence[AgentState], rho: float, variant: str = "online") -> float:
    """Sum of local costs plus ``rho/2`` times the squared consensus distances.

    Chain variants use neighbor pairs; ``dynamic`` uses all pairs and weights
    the completion part by ``N - 1``.
    """
    n = len(agents)
    completion = sum(local_cost(a.point, a.block, a.reg, weights=a.weights) for a in agents)
    if variant == "dynamic":
        edges, factor = all_edges(n), n - 1
    else:
        edges, factor = chain_edges(n), 1
    consensus = sum(
        geodesic_distance(agents[i - 1].point, agents[k - 1].point) ** 2 for i, k in edges
    )
    return factor * completion + 0.5 * rho * consensus
