"""Shared test helpers: independent distance oracle, random graph and
session generators, and a tiny local HTTP server for transport tests."""

from __future__ import annotations

import random
from itertools import permutations

import pytest

from ctxradar.comm_graph import CommGraph, TopologyKind, build_topology
from ctxradar.harness import ScriptedBackend, SessionConfig
from ctxradar.radar_select import DecayParams, HashingEncoder
from ctxradar.transcript import TranscriptStore

# Includes multi-byte characters so byte-span handling is exercised.
VOCAB = [
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "omega", "sigma",
    "query", "answer", "task", "graph", "round", "agent", "context", "signal",
    "naïve", "π", "κόσμος", "café", "total", "check", "value", "step",
]


def exhaustive_shortest_path(
    edges: set[tuple[int, int]], n: int, frm: int, to: int
) -> int | None:
    """Shortest directed path length by enumerating simple paths. Slow and
    obviously correct; only for graphs with n <= 6."""
    if frm == to:
        return 0
    others = [v for v in range(n) if v not in (frm, to)]
    best: int | None = None
    for k in range(0, len(others) + 1):
        for middle in permutations(others, k):
            path = (frm, *middle, to)
            if all((a, b) in edges for a, b in zip(path, path[1:])):
                length = len(path) - 1
                if best is None or length < best:
                    best = length
        if best is not None:
            return best  # longer permutations cannot beat a found length-k+1 path
    return best


def random_sentence(rng: random.Random) -> str:
    words = [rng.choice(VOCAB) for _ in range(rng.randint(2, 6))]
    words[0] = words[0].capitalize()
    return " ".join(words) + rng.choice(".!?")


def random_message_text(rng: random.Random, max_sentences: int = 8) -> str:
    count = rng.randint(0, max_sentences)
    sep = "\n" if rng.random() < 0.2 else " "
    return sep.join(random_sentence(rng) for _ in range(count))


def random_graph(rng: random.Random, n: int) -> CommGraph:
    kind = rng.choice(
        [TopologyKind.FULLY_CONNECTED, TopologyKind.RANDOM, TopologyKind.LAYERED, TopologyKind.DEBATE]
    )
    seed = rng.randrange(2**32)
    if kind == TopologyKind.RANDOM:
        return build_topology(kind, n, p=rng.uniform(0.0, 1.0), seed=seed)
    if kind == TopologyKind.LAYERED:
        return build_topology(kind, n, layers=rng.randint(1, n), seed=seed)
    return build_topology(kind, n, seed=seed)


def random_store(
    rng: random.Random, graph: CommGraph, rounds: int, max_sentences: int = 8
) -> TranscriptStore:
    store = TranscriptStore()
    for t in range(1, rounds + 1):
        for agent in range(graph.n_agents):
            store.append_message(
                agent, t, random_message_text(rng, max_sentences), role_label=f"agent-{agent}"
            )
    return store


def random_session(
    rng: random.Random, max_agents: int = 5, max_rounds: int = 3
) -> tuple[SessionConfig, ScriptedBackend]:
    n = rng.randint(1, max_agents)
    rounds = rng.randint(1, max_rounds)
    graph = random_graph(rng, n)
    outputs = {
        (agent, t): random_message_text(rng)
        for t in range(1, rounds + 1)
        for agent in range(n)
    }
    config = SessionConfig(
        graph=graph,
        rounds=rounds,
        task=random_sentence(rng),
        profiles=tuple(f"You are helper {i}." for i in range(n)),
        decay=DecayParams(
            lambda_s=rng.uniform(0.3, 0.95),
            lambda_t=rng.uniform(0.3, 0.95),
            theta=rng.uniform(-0.2, 0.8),
        ),
        encoder=HashingEncoder(),
        steering_mode=rng.choice(["anchor_export", "prompt_append"]),
        seed=rng.randrange(2**31),
    )
    return config, ScriptedBackend(outputs=outputs)


def selection_oracle(store, graph, receiver, t, query, params, provider) -> set:
    """Brute-force reference for dense-matcher selection.

    Walks the raw store, derives reachability from exhaustive path
    enumeration, and recomputes every decay factor, cosine, and score from
    scratch. Returns the identities (message_id, start, end) of the
    sentences that meet the threshold.
    """
    import math

    import numpy as np

    from ctxradar.radar_select import segment_sentences

    edges = set(graph.edges)
    qv = provider.encode(query)
    qn = math.sqrt(float((qv * qv).sum()))
    keep: set[tuple[str, int, int]] = set()
    for msg in store.messages():
        if msg.round >= t:
            continue
        d = exhaustive_shortest_path(edges, graph.n_agents, msg.author, receiver)
        if d is None:
            continue
        if params.disable_spatial or d <= 1:
            phi_s = 1.0
        else:
            phi_s = params.lambda_s ** (d - 1)
        age = t - msg.round - 1
        if params.disable_temporal or age == 0:
            phi_t = 1.0
        else:
            phi_t = params.lambda_t**age
        r = phi_s * phi_t
        for sent in segment_sentences(msg.text, message_id=msg.id):
            sv = provider.encode(sent.text)
            sn = math.sqrt(float((sv * sv).sum()))
            if qn == 0.0 or sn == 0.0:
                sim = 0.0
            else:
                sim = max(-1.0, min(1.0, float(np.dot(sv, qv)) / (sn * qn)))
            if r * sim >= params.theta:
                keep.add((msg.id, sent.start, sent.end))
    return keep


@pytest.fixture
def http_server():
    """Start a local HTTP server whose behavior is set per test.

    Usage: url = http_server(handler_fn) where handler_fn(path, body_dict)
    returns (status, response_dict). The server counts hits.
    """
    import http.server
    import json
    import threading

    state = {"handler": None, "hits": 0}

    class Handler(http.server.BaseHTTPRequestHandler):
        def do_POST(self):
            state["hits"] += 1
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length) or b"{}")
            status, payload = state["handler"](self.path, body)
            data = json.dumps(payload).encode("utf-8") if payload is not None else b"not json"
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, *args):  # keep test output clean
            pass

    server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()

    def start(handler_fn):
        state["handler"] = handler_fn
        state["hits"] = 0
        return f"http://127.0.0.1:{server.server_address[1]}"

    start.state = state
    yield start
    server.shutdown()
    thread.join(timeout=2)
