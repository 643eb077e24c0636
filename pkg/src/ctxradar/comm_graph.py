"""Directed communication graphs between agents.

The graph fixes who can send to whom. An edge (a, b) means agent a's output
travels to agent b; distances follow edge direction, so the distance that
matters for scoring is sender -> receiver.
"""

from __future__ import annotations

import enum
import hashlib
import json
import random
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

AgentId = int


class TopologyKind(str, enum.Enum):
    FULLY_CONNECTED = "fully_connected"
    RANDOM = "random"
    LAYERED = "layered"
    DEBATE = "debate"
    CUSTOM = "custom"


@dataclass(frozen=True)
class CommGraph:
    """Immutable directed graph over agents 0..n_agents-1.

    Self-loops are never stored; an agent always reaches itself at distance 0.
    """

    n_agents: int
    edges: frozenset[tuple[AgentId, AgentId]]
    kind: TopologyKind = TopologyKind.CUSTOM
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_agents < 1:
            raise ValueError(f"n_agents must be >= 1, got {self.n_agents}")
        for a, b in self.edges:
            if a == b:
                raise ValueError(f"self-loop edge ({a}, {b}) is not allowed")
            if not (0 <= a < self.n_agents and 0 <= b < self.n_agents):
                raise ValueError(f"edge ({a}, {b}) out of range for {self.n_agents} agents")

    def sorted_edges(self) -> list[tuple[AgentId, AgentId]]:
        return sorted(self.edges)

    def successors(self) -> dict[AgentId, list[AgentId]]:
        adj: dict[AgentId, list[AgentId]] = {i: [] for i in range(self.n_agents)}
        for a, b in self.sorted_edges():
            adj[a].append(b)
        return adj

    def predecessors(self) -> dict[AgentId, list[AgentId]]:
        adj: dict[AgentId, list[AgentId]] = {i: [] for i in range(self.n_agents)}
        for a, b in self.sorted_edges():
            adj[b].append(a)
        return adj


def _check_agent(graph: CommGraph, agent: AgentId) -> None:
    if not (0 <= agent < graph.n_agents):
        raise ValueError(f"agent id {agent} out of range [0, {graph.n_agents})")


def _pair_uniform(seed: int, a: AgentId, b: AgentId) -> float:
    """Deterministic uniform in [0, 1) for one ordered pair, keyed by seed.

    Counter-based: stateless per pair, so the edge set is a pure function of
    (seed, a, b) regardless of iteration order or platform.
    """
    digest = hashlib.sha256(f"edge:{seed}:{a}:{b}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def assign_layers(n_agents: int, n_layers: int, seed: int) -> list[list[AgentId]]:
    """Randomly split agents into n_layers non-empty layers, keyed by seed."""
    if n_layers < 1:
        raise ValueError(f"layer count must be >= 1, got {n_layers}")
    if n_layers > n_agents:
        raise ValueError(f"layer count {n_layers} exceeds n_agents {n_agents}")
    ids = list(range(n_agents))
    random.Random(seed).shuffle(ids)
    base, extra = divmod(n_agents, n_layers)
    layers: list[list[AgentId]] = []
    pos = 0
    for i in range(n_layers):
        size = base + (1 if i < extra else 0)
        layers.append(sorted(ids[pos : pos + size]))
        pos += size
    return layers


def _all_ordered_pairs(n_agents: int) -> set[tuple[AgentId, AgentId]]:
    return {(a, b) for a in range(n_agents) for b in range(n_agents) if a != b}


def build_topology(
    kind: TopologyKind | str,
    n_agents: int,
    *,
    p: float = 0.5,
    layers: Sequence[Iterable[AgentId]] | int | None = None,
    seed: int = 0,
) -> CommGraph:
    """Generate a graph of the given kind. Same arguments -> same edge set.

    Random uses independent Bernoulli(p) per ordered non-self pair. Layered
    takes either an explicit layer partition or a layer count (agents then
    assigned randomly, keyed by seed) and fully connects consecutive layers,
    earlier to later. Debate is spatially fully connected; its every-agent-
    reads-everyone round semantics live in the harness.
    """
    kind = TopologyKind(kind)
    if n_agents < 1:
        raise ValueError(f"n_agents must be >= 1, got {n_agents}")

    if kind in (TopologyKind.FULLY_CONNECTED, TopologyKind.DEBATE):
        edges = _all_ordered_pairs(n_agents)
    elif kind == TopologyKind.RANDOM:
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"edge probability must be in [0, 1], got {p}")
        edges = {
            (a, b)
            for a in range(n_agents)
            for b in range(n_agents)
            if a != b and _pair_uniform(seed, a, b) < p
        }
    elif kind == TopologyKind.LAYERED:
        if layers is None:
            raise ValueError("layered topology requires layers (partition or count)")
        if isinstance(layers, int):
            partition = assign_layers(n_agents, layers, seed)
        else:
            partition = [sorted(layer) for layer in layers]
            flat = [a for layer in partition for a in layer]
            if sorted(flat) != list(range(n_agents)):
                raise ValueError("layers must partition agent ids exactly once")
        edges = set()
        for earlier, later in zip(partition, partition[1:]):
            edges.update((a, b) for a in earlier for b in later)
    else:
        raise ValueError(f"build_topology cannot generate kind {kind.value!r}")

    return CommGraph(n_agents=n_agents, edges=frozenset(edges), kind=kind, seed=seed)


def hop_distance(graph: CommGraph, frm: AgentId, to: AgentId) -> int | None:
    """Directed shortest-path length frm -> to by BFS; None when unreachable."""
    _check_agent(graph, frm)
    _check_agent(graph, to)
    if frm == to:
        return 0
    adj = graph.successors()
    seen = {frm}
    queue = deque([(frm, 0)])
    while queue:
        node, dist = queue.popleft()
        for nxt in adj[node]:
            if nxt == to:
                return dist + 1
            if nxt not in seen:
                seen.add(nxt)
                queue.append((nxt, dist + 1))
    return None


def distances_to(graph: CommGraph, receiver: AgentId) -> dict[AgentId, int]:
    """Distance from every agent that reaches the receiver, via reverse BFS.

    Includes the receiver itself at distance 0; unreachable agents are absent.
    """
    _check_agent(graph, receiver)
    pred = graph.predecessors()
    dist = {receiver: 0}
    queue = deque([receiver])
    while queue:
        node = queue.popleft()
        for prv in pred[node]:
            if prv not in dist:
                dist[prv] = dist[node] + 1
                queue.append(prv)
    return dist


def k_hop_neighborhood(graph: CommGraph, node: AgentId, k: int) -> set[AgentId]:
    """Agents whose directed distance TO node is <= k (senders that reach it)."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    return {a for a, d in distances_to(graph, node).items() if d <= k}


def reachable_set(graph: CommGraph, node: AgentId) -> set[AgentId]:
    """All agents with a finite directed distance to node, node included."""
    return k_hop_neighborhood(graph, node, graph.n_agents - 1)


def graph_to_dict(graph: CommGraph) -> dict:
    return {
        "n_agents": graph.n_agents,
        "kind": graph.kind.value,
        "seed": graph.seed,
        "edges": [[a, b] for a, b in graph.sorted_edges()],
    }


def graph_from_dict(data: dict) -> CommGraph:
    try:
        return CommGraph(
            n_agents=int(data["n_agents"]),
            edges=frozenset((int(a), int(b)) for a, b in data["edges"]),
            kind=TopologyKind(data.get("kind", "custom")),
            seed=int(data.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"invalid graph JSON: {exc}") from exc


def save_graph(graph: CommGraph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_dict(graph), fh, indent=2)
        fh.write("\n")


def load_graph(path: str) -> CommGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return graph_from_dict(json.load(fh))
