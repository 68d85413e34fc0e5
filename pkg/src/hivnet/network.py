"""The evolving contact network: construction, demography and reshuffling.

Edges are formed with the configuration model. Each vertex keeps the
degree it was born with as its yearly partner target; whatever part of the
target is not currently wired is a free stub, and all free stubs are
re-paired each year.
"""

from __future__ import annotations

import enum
import functools
import logging
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .population import Agent, CareCascadeParams, Stage, seed_infection
from .stochastic import (
    DegreeDistributionSpec,
    RandomStream,
    normalize,
    sample_degrees,
    sample_uniform_int,
)

__all__ = [
    "EdgeKind",
    "Partnership",
    "ContactNetwork",
    "NetworkParams",
    "NetworkMetrics",
    "steady_probability",
    "compute_p_steady",
    "build_network",
    "pair_stubs",
    "demographic_step",
    "reshuffle",
    "advance_partnerships",
    "network_metrics",
]

logger = logging.getLogger(__name__)

# Consecutive pairing rounds without a new edge before giving up on the remainder.
_STALL_ROUNDS = 8


class EdgeKind(enum.Enum):
    STEADY = "steady"
    CASUAL = "casual"


@dataclass(slots=True)
class Partnership:
    a: int
    b: int
    kind: EdgeKind = EdgeKind.CASUAL
    elapsed: int = 0
    expected_duration: int = 0

    @property
    def endpoints(self) -> tuple[int, int]:
        return self.a, self.b

    @property
    def is_steady(self) -> bool:
        return self.kind is EdgeKind.STEADY

    @property
    def expired(self) -> bool:
        return self.kind is EdgeKind.STEADY and self.elapsed >= self.expected_duration

    def other(self, vid: int) -> int:
        return self.b if vid == self.a else self.a


def _key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


class ContactNetwork:
    """Vertices, edges and stub bookkeeping for one run.

    ``adj[v]`` maps each neighbour of ``v`` to the shared :class:`Partnership`.
    Free stubs are implicit: ``target_degree[v] - degree(v)``.
    """

    def __init__(self):
        self.agents: dict[int, Agent] = {}
        self.adj: dict[int, dict[int, Partnership]] = {}
        self.edges: dict[tuple[int, int], Partnership] = {}
        self.target_degree: dict[int, int] = {}
        self._steady: dict[int, int] = {}
        self.step = 0
        self.next_id = 0

    def __len__(self) -> int:
        return len(self.agents)

    def add_agent(self, agent: Agent, target_degree: int) -> None:
        if agent.id in self.agents:
            raise ValueError(f"duplicate agent id {agent.id}")
        self.agents[agent.id] = agent
        self.adj[agent.id] = {}
        self.target_degree[agent.id] = int(target_degree)
        self.next_id = max(self.next_id, agent.id + 1)

    def remove_agent(self, vid: int) -> None:
        for uid in list(self.adj[vid]):
            self.remove_edge(vid, uid)
        del self.adj[vid]
        del self.agents[vid]
        del self.target_degree[vid]

    def add_edge(self, u: int, v: int, kind: EdgeKind = EdgeKind.CASUAL,
                 expected_duration: int = 0, elapsed: int = 0) -> Partnership:
        if u == v:
            raise ValueError(f"self-loop at {u}")
        if v in self.adj[u]:
            raise ValueError(f"parallel edge {u}-{v}")
        if kind is EdgeKind.STEADY and (u in self._steady or v in self._steady):
            raise ValueError(f"second steady partnership at {u}-{v}")
        a, b = _key(u, v)
        edge = Partnership(a, b, kind, elapsed, expected_duration)
        self.edges[(a, b)] = edge
        self.adj[u][v] = edge
        self.adj[v][u] = edge
        if kind is EdgeKind.STEADY:
            self._steady[u] = v
            self._steady[v] = u
        return edge

    def remove_edge(self, u: int, v: int) -> None:
        edge = self.edges.pop(_key(u, v))
        del self.adj[u][v]
        del self.adj[v][u]
        if edge.kind is EdgeKind.STEADY:
            del self._steady[u]
            del self._steady[v]

    def iter_edges(self) -> Iterator[Partnership]:
        return iter(self.edges.values())

    def degree(self, vid: int) -> int:
        return len(self.adj[vid])

    def free_stubs(self, vid: int) -> int:
        return self.target_degree[vid] - len(self.adj[vid])

    def steady_partner(self, vid: int) -> int | None:
        return self._steady.get(vid)

    def steady_count(self) -> int:
        return len(self._steady) // 2

    def steady_fraction(self) -> float:
        return self.steady_count() / len(self.edges) if self.edges else 0.0

    def mean_degree(self) -> float:
        return 2.0 * len(self.edges) / len(self.agents) if self.agents else 0.0

    def check_invariants(self) -> None:
        """Raise ``AssertionError`` if any structural invariant is broken."""
        steady_seen: dict[int, int] = {}
        for (a, b), edge in self.edges.items():
            assert a < b, f"edge key {(a, b)} not canonical"
            assert (edge.a, edge.b) == (a, b)
            assert self.adj[a][b] is edge and self.adj[b][a] is edge
            if edge.is_steady:
                assert edge.expected_duration >= 1
                assert edge.elapsed <= edge.expected_duration
                for v in (a, b):
                    steady_seen[v] = steady_seen.get(v, 0) + 1
        assert all(n == 1 for n in steady_seen.values()), "vertex with two steady partners"
        assert steady_seen.keys() == self._steady.keys()
        assert sum(len(n) for n in self.adj.values()) == 2 * len(self.edges)
        for vid, nbrs in self.adj.items():
            assert vid not in nbrs, f"self-loop at {vid}"
            assert len(nbrs) <= self.target_degree[vid], f"vertex {vid} exceeds its target degree"


@dataclass(frozen=True)
class NetworkParams:
    n_zero: int = 2299
    gamma: float = 1.6
    k_max: int = 200
    p_zero: float = 0.01
    # None derives the steady probability from the degree distribution.
    p_steady: float | None = None
    p_casual_keep: float = 0.2
    migration_fraction: float = 0.01
    age_min: int = 15
    age_max: int = 65
    steady_duration_min: int = 1
    steady_duration_max: int = 2
    pairing_retry_factor: int = 100
    # A steady coin won on an edge whose endpoint already has a steady partner
    # is carried over to the next eligible edge instead of being discarded.
    defer_blocked_steady: bool = True

    def __post_init__(self):
        if self.n_zero <= 0:
            raise ValueError(f"n_zero must be > 0, got {self.n_zero}")
        for name in ("p_casual_keep", "migration_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {getattr(self, name)}")
        if self.p_steady is not None and not 0.0 <= self.p_steady <= 1.0:
            raise ValueError(f"p_steady must lie in [0, 1], got {self.p_steady}")
        if not 0 <= self.age_min <= self.age_max:
            raise ValueError("age range must satisfy 0 <= age_min <= age_max")
        if not 1 <= self.steady_duration_min <= self.steady_duration_max:
            raise ValueError("steady durations must satisfy 1 <= min <= max")
        if self.pairing_retry_factor < 1:
            raise ValueError("pairing_retry_factor must be >= 1")
        # validates gamma, k_max, p_zero
        self.degree_spec

    @functools.cached_property
    def degree_spec(self) -> DegreeDistributionSpec:
        return normalize(self.gamma, self.k_max, self.p_zero)

    @functools.cached_property
    def steady_probability(self) -> float:
        return self.p_steady if self.p_steady is not None else compute_p_steady(self)


def steady_probability(pmf, n: int = 1) -> float:
    """Initial steady-edge probability for a degree pmf over ``k = 0, 1, ...``.

    Half of ``n`` individuals report a steady partner, giving ``n * 0.5 / 2``
    steady edges out of ``n * <k> / 2`` expected edges.
    """
    pmf = np.asarray(pmf, dtype=float)
    mean_k = float(np.dot(np.arange(len(pmf)), pmf))
    if mean_k <= 0:
        raise ValueError("mean degree is zero; steady probability undefined")
    expected_edges = n * mean_k / 2.0
    return min(n * (0.5 / 2.0) / expected_edges, 1.0)


def compute_p_steady(params: NetworkParams) -> float:
    return steady_probability(params.degree_spec.probabilities(), params.n_zero)


def _new_agent(network: ContactNetwork, params: NetworkParams, degree: int,
               stream: RandomStream) -> Agent:
    agent = Agent(id=network.next_id, age=sample_uniform_int(params.age_min, params.age_max, stream))
    network.add_agent(agent, degree)
    return agent


def pair_stubs(network: ContactNetwork, params: NetworkParams, stream: RandomStream,
               p_steady: float | None = None) -> int:
    """Wire free stubs with the configuration model; returns edges formed.

    Stubs are shuffled and paired consecutively. Pairs that would create a
    self-loop or parallel edge go back to the pool for another round. Once
    the draw budget is spent or rounds stop producing edges, leftover stubs
    stay free until the next call.

    Every formed edge flips a steady coin. At most one steady partnership
    per vertex is allowed; with ``params.defer_blocked_steady`` a blocked
    steady coin is credited to the next edge whose endpoints are both free,
    so the number of steady assignments still tracks ``p_steady``.
    """
    if p_steady is None:
        p_steady = params.steady_probability
    pool: list[int] = []
    for vid in network.agents:
        free = network.free_stubs(vid)
        if free > 0:
            pool.extend([vid] * free)
    budget = params.pairing_retry_factor * len(pool)
    draws = 0
    formed = 0
    stalled = 0
    # steady coins won by an edge whose endpoint is already taken
    deferred = 0
    adj = network.adj
    lo, hi = params.steady_duration_min, params.steady_duration_max
    while len(pool) >= 2 and draws < budget and stalled < _STALL_ROUNDS:
        order = stream.permutation(len(pool))
        draws += len(pool)
        shuffled = [pool[i] for i in order]
        rejected: list[int] = []
        before = formed
        for i in range(0, len(shuffled) - 1, 2):
            u, v = shuffled[i], shuffled[i + 1]
            if u == v or v in adj[u]:
                rejected.append(u)
                rejected.append(v)
                continue
            wants_steady = stream.random() < p_steady
            eligible = network.steady_partner(u) is None and network.steady_partner(v) is None
            if eligible and (wants_steady or (deferred and params.defer_blocked_steady)):
                if not wants_steady:
                    deferred -= 1
                network.add_edge(u, v, EdgeKind.STEADY, sample_uniform_int(lo, hi, stream))
            else:
                deferred += wants_steady
                network.add_edge(u, v)
            formed += 1
        if len(shuffled) % 2:
            rejected.append(shuffled[-1])
        stalled = stalled + 1 if formed == before else 0
        pool = rejected
    if len(pool) > 1:
        logger.debug("step %d: %d stubs left unpaired", network.step, len(pool))
    return formed


def build_network(params: NetworkParams, start_year: int, initial_positive_count: int,
                  stream: RandomStream, cascade: CareCascadeParams | None = None) -> ContactNetwork:
    """Construct the initial network and seed ``initial_positive_count`` positives."""
    if not 0 <= initial_positive_count <= params.n_zero:
        raise ValueError(f"initial_positive_count must lie in [0, {params.n_zero}], "
                         f"got {initial_positive_count}")
    cascade = cascade or CareCascadeParams()
    network = ContactNetwork()
    degrees = sample_degrees(params.degree_spec, stream, params.n_zero)
    for k in degrees.tolist():
        _new_agent(network, params, k, stream)
    ids = list(network.agents)
    chosen = sorted(ids[i] for i in stream.permutation(len(ids))[:initial_positive_count])
    for vid in chosen:
        seed_infection(network.agents[vid], start_year, cascade, stream)
    pair_stubs(network, params, stream)
    return network


def demographic_step(network: ContactNetwork, params: NetworkParams,
                     stream: RandomStream) -> tuple[list[int], list[int]]:
    """Remove and replace vertices, then drop expired and unkept edges.

    Removal order is fixed: over-age, AIDS flagged in the previous step,
    then a migration sample drawn from the survivors. Surviving AIDS agents
    are flagged for removal at the next step. Returns ``(removed, added)``.
    """
    agents = network.agents
    removed = [vid for vid, a in agents.items() if a.age > params.age_max]
    gone = set(removed)
    flagged = [vid for vid, a in agents.items() if a.removal_flag and vid not in gone]
    removed += flagged
    gone.update(flagged)
    survivors = [vid for vid in agents if vid not in gone]
    n_migrants = round(params.migration_fraction * len(survivors))
    if n_migrants:
        migrants = sorted(survivors[i] for i in stream.permutation(len(survivors))[:n_migrants])
        removed += migrants
        gone.update(migrants)
    for vid in removed:
        network.remove_agent(vid)
    for agent in agents.values():
        if agent.stage == Stage.AIDS:
            agent.removal_flag = True

    for key, edge in list(network.edges.items()):
        if edge.is_steady:
            if edge.expired:
                network.remove_edge(*key)
        elif stream.random() >= params.p_casual_keep:
            network.remove_edge(*key)

    added = []
    n_new = params.n_zero - len(agents)
    if n_new > 0:
        degrees = sample_degrees(params.degree_spec, stream, n_new)
        for k in degrees.tolist():
            added.append(_new_agent(network, params, k, stream).id)
    return removed, added


def reshuffle(network: ContactNetwork, params: NetworkParams, stream: RandomStream) -> int:
    """Re-pair every free stub; existing edges are left alone."""
    return pair_stubs(network, params, stream)


def advance_partnerships(network: ContactNetwork) -> None:
    """Yearly clock tick for steady edges that have not yet expired."""
    for edge in network.edges.values():
        if edge.kind is EdgeKind.STEADY and edge.elapsed < edge.expected_duration:
            edge.elapsed += 1


@dataclass
class NetworkMetrics:
    n_vertices: int = 0
    n_edges: int = 0
    degree_histogram: list[int] = field(default_factory=list)
    mean_degree: float = 0.0
    steady_fraction: float = 0.0
    n_components: int = 0
    mean_path_length: float = 0.0


def network_metrics(network: ContactNetwork, path_lengths: bool = True) -> NetworkMetrics:
    n = len(network.agents)
    if n == 0:
        return NetworkMetrics()
    index = {vid: i for i, vid in enumerate(network.agents)}
    degrees = np.array([len(network.adj[vid]) for vid in network.agents])
    hist = np.bincount(degrees).tolist()
    rows = [index[e.a] for e in network.edges.values()]
    cols = [index[e.b] for e in network.edges.values()]
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    n_comp, labels = connected_components(graph, directed=False)
    mean_path = 0.0
    if path_lengths:
        largest = np.argmax(np.bincount(labels))
        members = np.flatnonzero(labels == largest)
        if len(members) > 1:
            sub = graph[members][:, members]
            dist = shortest_path(sub, directed=False, unweighted=True)
            m = len(members)
            mean_path = float(dist.sum() / (m * (m - 1)))
    return NetworkMetrics(
        n_vertices=n,
        n_edges=len(network.edges),
        degree_histogram=hist,
        mean_degree=network.mean_degree(),
        steady_fraction=network.steady_fraction(),
        n_components=int(n_comp),
        mean_path_length=mean_path,
    )
