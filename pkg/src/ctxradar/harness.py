"""Round-based session runner.

Executes rounds over a communication graph: each step builds the receiver's
pool, selects context, renders the steering request, and asks a backend for
the agent's output. A decision node aggregates the last round into the final
answer. Scripted backends make whole sessions deterministic and replayable;
the remote backend talks to a chat-completion or steering server.
"""

from __future__ import annotations

import heapq
import json
import os
from collections import Counter
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Protocol, Sequence

from ._http import post_json
from .comm_graph import (
    AgentId,
    CommGraph,
    TopologyKind,
    build_topology,
    graph_from_dict,
    load_graph,
)
from .errors import ConfigError, SessionError, TransportError, TransportResponseError
from .radar_select import (
    DecayParams,
    HashingEncoder,
    RemoteEncoder,
    SentenceEncoder,
    SelectedContext,
    select_context,
    selection_to_dict,
)
from .steering import (
    BACKEND_ANCHOR_EXPORT,
    BACKEND_PROMPT_APPEND,
    STEERING_BACKENDS,
    SteeringRequest,
    apply_prompt_append,
    make_anchor_spans,
    render_prompt,
    steering_request_to_dict,
)
from .transcript import Message, TranscriptStore, context_pool

API_KEY_ENV = "CHAT_API_KEY"


def answer_line(text: str) -> str:
    """Last non-empty line of an output, stripped; the agent's answer slot."""
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    return lines[-1] if lines else ""


class AgentBackend(Protocol):
    def generate(self, agent: AgentId, round: int, request: SteeringRequest) -> str: ...

    def decide(self, task: str, inputs: Sequence[Message]) -> str: ...


@dataclass(frozen=True)
class ScriptedBackend:
    """Fixed outputs per (agent, round); must cover the whole session grid.

    The decision node is scripted too: "majority" takes the most common
    answer line (first seen wins ties), "echo" takes the last input's.
    """

    outputs: Mapping[tuple[AgentId, int], str]
    decider: str = "majority"

    def generate(self, agent: AgentId, round: int, request: SteeringRequest) -> str:
        return self.outputs[(agent, round)]

    def decide(self, task: str, inputs: Sequence[Message]) -> str:
        lines = [answer_line(m.text) for m in inputs]
        if self.decider == "echo":
            return lines[-1]
        if self.decider == "majority":
            counts = Counter(lines)
            best = max(counts.values())
            for line in lines:
                if counts[line] == best:
                    return line
        raise ConfigError(f"unknown scripted decider {self.decider!r}")


@dataclass
class ChatClient:
    """Remote inference transport. Plain completions go to /chat/completions;
    anchor-export requests go to /steer on the same server."""

    base_url: str
    model: str
    temperature: float = 1.0
    timeout: float = 30.0
    max_retries: int = 3
    api_key: str | None = None
    backoff_base: float = 0.5

    def complete(self, prompt: str) -> str:
        body = post_json(
            f"{self.base_url.rstrip('/')}/chat/completions",
            {
                "model": self.model,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": self.temperature,
            },
            timeout=self.timeout,
            max_retries=self.max_retries,
            api_key=self.api_key,
            backoff_base=self.backoff_base,
        )
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportResponseError(
                f"chat response missing choices[0].message.content: {exc}", attempts=1
            ) from exc
        if not isinstance(content, str):
            raise TransportResponseError("chat response content is not a string", attempts=1)
        return content

    def steer(self, request: SteeringRequest) -> str:
        # Body is exactly the anchor-export contract; model choice and
        # sampling are the steering server's configuration.
        body = post_json(
            f"{self.base_url.rstrip('/')}/steer",
            steering_request_to_dict(request),
            timeout=self.timeout,
            max_retries=self.max_retries,
            api_key=self.api_key,
            backoff_base=self.backoff_base,
        )
        text = body.get("text") if isinstance(body, dict) else None
        if not isinstance(text, str):
            raise TransportResponseError("steer response missing text field", attempts=1)
        return text


def chat(client: ChatClient, prompt: str) -> str:
    """Send one prompt and return the response text (retries inside)."""
    return client.complete(prompt)


@dataclass
class RemoteBackend:
    """Backend that forwards each step to a remote server: steering requests
    with spans go to the steering route, prompt-append requests to plain chat."""

    client: ChatClient

    def generate(self, agent: AgentId, round: int, request: SteeringRequest) -> str:
        if request.backend == BACKEND_ANCHOR_EXPORT:
            return self.client.steer(request)
        return self.client.complete(request.full_prompt)

    def decide(self, task: str, inputs: Sequence[Message]) -> str:
        listing = "\n\n".join(
            f"Agent {m.author}, role is {m.role_label}, output is:\n{m.text}" for m in inputs
        )
        prompt = (
            f"The task is: {task}\n\n{listing}\n\n"
            "You are the final decision node. Given the task and the agent outputs "
            "above, return only the final answer (for multiple-choice tasks, only "
            "one option letter)."
        )
        return self.client.complete(prompt)


@dataclass(frozen=True)
class SessionConfig:
    graph: CommGraph
    rounds: int
    task: str
    profiles: tuple[str, ...]
    decay: DecayParams = DecayParams()
    encoder: SentenceEncoder = field(default_factory=HashingEncoder)
    steering_mode: str = BACKEND_ANCHOR_EXPORT
    amplification: float = 1.0
    seed: int = 0
    query_includes_profile: bool = False
    final_refer_inputs: tuple[AgentId, ...] | None = None
    role_labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ConfigError(f"rounds must be >= 1, got {self.rounds}")
        if len(self.profiles) != self.graph.n_agents:
            raise ConfigError(
                f"{len(self.profiles)} profiles for {self.graph.n_agents} agents"
            )
        if self.role_labels is not None and len(self.role_labels) != self.graph.n_agents:
            raise ConfigError("role_labels length must match n_agents")
        if self.steering_mode not in STEERING_BACKENDS:
            raise ConfigError(f"steering mode must be one of {STEERING_BACKENDS}")
        if self.amplification <= 0:
            raise ConfigError(f"amplification must be positive, got {self.amplification}")

    def role_label(self, agent: AgentId) -> str:
        if self.role_labels is not None:
            return self.role_labels[agent]
        return f"agent-{agent}"


@dataclass
class SessionResult:
    store: TranscriptStore
    audit: list[dict]
    final_answer: str


def execution_order(graph: CommGraph) -> list[AgentId]:
    """Within-round order: layer order (deterministic topological sort) for
    layered graphs, ascending agent id otherwise."""
    if graph.kind != TopologyKind.LAYERED:
        return list(range(graph.n_agents))
    indeg = [0] * graph.n_agents
    adj = graph.successors()
    for _, b in graph.edges:
        indeg[b] += 1
    heap = [i for i in range(graph.n_agents) if indeg[i] == 0]
    heapq.heapify(heap)
    order: list[AgentId] = []
    while heap:
        node = heapq.heappop(heap)
        order.append(node)
        for nxt in adj[node]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                heapq.heappush(heap, nxt)
    if len(order) != graph.n_agents:  # defensive: layered graphs are acyclic
        return list(range(graph.n_agents))
    return order


def _effective_query(config: SessionConfig, agent: AgentId) -> str:
    if config.query_includes_profile:
        return f"{config.profiles[agent]}\n{config.task}"
    return config.task


def _encoder_spec(encoder: SentenceEncoder) -> dict:
    if isinstance(encoder, HashingEncoder):
        return {"kind": "hashing", "dim": encoder.dim}
    if isinstance(encoder, RemoteEncoder):
        return {"kind": "remote", "model": encoder.model, "dim": encoder.dim}
    return {"kind": type(encoder).__name__, "dim": getattr(encoder, "dim", None)}


def _session_header(config: SessionConfig) -> dict:
    return {
        "type": "session",
        "task": config.task,
        "rounds": config.rounds,
        "seed": config.seed,
        "steering": config.steering_mode,
        "amplification": config.amplification,
        "params": config.decay.to_dict(),
        "encoder": _encoder_spec(config.encoder),
        "query_includes_profile": config.query_includes_profile,
        "graph": {
            "kind": config.graph.kind.value,
            "n_agents": config.graph.n_agents,
            "seed": config.graph.seed,
        },
    }


def _build_step_request(
    config: SessionConfig, store: TranscriptStore, agent: AgentId, t: int
) -> tuple[SelectedContext, SteeringRequest]:
    pool = context_pool(store, config.graph, agent, t)
    query = _effective_query(config, agent)
    selected = select_context(pool, config.graph, query, t, config.decay, config.encoder)
    span_index = render_prompt(query, pool, config.profiles[agent])
    request = make_anchor_spans(selected, span_index, config.amplification)
    if config.steering_mode == BACKEND_PROMPT_APPEND:
        request = replace(
            request,
            full_prompt=apply_prompt_append(selected, request.full_prompt),
            backend=BACKEND_PROMPT_APPEND,
        )
    return selected, request


def run_session(config: SessionConfig, backend: AgentBackend) -> SessionResult:
    """Run every round and agent in order, then aggregate the final answer.

    A remote failure mid-session raises SessionError carrying the valid
    transcript prefix and audit log accumulated so far.
    """
    if isinstance(backend, ScriptedBackend):
        missing = [
            (a, t)
            for t in range(1, config.rounds + 1)
            for a in range(config.graph.n_agents)
            if (a, t) not in backend.outputs
        ]
        if missing:
            raise ConfigError(f"scripted outputs missing for steps: {missing}")

    store = TranscriptStore()
    audit: list[dict] = [_session_header(config)]
    order = execution_order(config.graph)
    try:
        for t in range(1, config.rounds + 1):
            for agent in order:
                selected, request = _build_step_request(config, store, agent, t)
                audit.append(
                    {
                        "type": "selection",
                        "agent": agent,
                        "round": t,
                        "selection": selection_to_dict(selected, agent, t),
                    }
                )
                text = backend.generate(agent, t, request)
                message_id = store.append_message(
                    agent, t, text, role_label=config.role_label(agent)
                )
                audit.append(
                    {
                        "type": "inference",
                        "agent": agent,
                        "round": t,
                        "message_id": message_id,
                        "steering": request.backend,
                        "anchor_spans": [[s, e] for s, e in request.anchor_spans],
                        "amplification": request.amplification,
                        "prompt": request.full_prompt,
                        "text": text,
                    }
                )
        final_inputs = [
            m
            for m in store.messages()
            if m.round == config.rounds
            and (config.final_refer_inputs is None or m.author in config.final_refer_inputs)
        ]
        answer = final_refer(config.task, final_inputs, backend)
        audit.append(
            {"type": "final_refer", "inputs": [m.id for m in final_inputs], "answer": answer}
        )
    except TransportError as exc:
        raise SessionError(f"session aborted: {exc}", store=store, audit=audit) from exc
    return SessionResult(store=store, audit=audit, final_answer=answer)


def final_refer(task: str, inputs: Sequence[Message], backend: AgentBackend) -> str:
    """Decision node: aggregate agent outputs into one answer string."""
    if not inputs:
        raise ValueError("final_refer requires at least one input message")
    return backend.decide(task, inputs)


def replay_selections(store: TranscriptStore, config: SessionConfig) -> list[dict]:
    """Recompute every per-step selection record from a persisted transcript.

    Pools at round t only see rounds < t, so replaying against the complete
    transcript reproduces exactly what each step saw live.
    """
    records: list[dict] = []
    order = execution_order(config.graph)
    for t in range(1, config.rounds + 1):
        for agent in order:
            pool = context_pool(store, config.graph, agent, t)
            query = _effective_query(config, agent)
            selected = select_context(
                pool, config.graph, query, t, config.decay, config.encoder
            )
            records.append(
                {
                    "type": "selection",
                    "agent": agent,
                    "round": t,
                    "selection": selection_to_dict(selected, agent, t),
                }
            )
    return records


# ---------------------------------------------------------------------------
# Session output files and config loading
# ---------------------------------------------------------------------------


def save_session_outputs(result: SessionResult, out_dir: str | Path) -> list[Path]:
    """Write transcript.jsonl, audit.jsonl and final_answer.txt."""
    from .transcript import save_transcript

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    transcript_path = out / "transcript.jsonl"
    audit_path = out / "audit.jsonl"
    answer_path = out / "final_answer.txt"
    save_transcript(result.store, str(transcript_path))
    with open(audit_path, "w", encoding="utf-8") as fh:
        for record in result.audit:
            fh.write(json.dumps(record, ensure_ascii=False))
            fh.write("\n")
    answer_path.write_text(result.final_answer + "\n", encoding="utf-8")
    return [transcript_path, audit_path, answer_path]


def load_profile_set(name: str) -> dict[str, str]:
    """Built-in role prompt sets ("qa" or "math"), shipped with the package."""
    try:
        raw = resources.files("ctxradar").joinpath(f"data/profiles_{name}.json").read_text("utf-8")
    except FileNotFoundError:
        raise ConfigError(f"unknown profile set {name!r}") from None
    return json.loads(raw)


def load_debate_prompts() -> dict:
    """Debate-style format-diversity prompts shipped with the package."""
    raw = resources.files("ctxradar").joinpath("data/debate_prompts.json").read_text("utf-8")
    return json.loads(raw)


def _resolve_graph(spec: dict, base_dir: Path) -> CommGraph:
    if "path" in spec:
        return load_graph(str(base_dir / spec["path"]))
    if "edges" in spec:
        return graph_from_dict(spec)
    kind = spec.get("kind")
    if kind is None:
        raise ConfigError("graph block needs a path, an edge list, or a kind")
    return build_topology(
        kind,
        int(spec["n_agents"]),
        p=float(spec.get("p", 0.5)),
        layers=spec.get("layers"),
        seed=int(spec.get("seed", 0)),
    )


def _resolve_profiles(spec, n_agents: int) -> tuple[tuple[str, ...], tuple[str, ...] | None]:
    labels: tuple[str, ...] | None = None
    if isinstance(spec, list):
        profiles = [str(p) for p in spec]
    elif isinstance(spec, dict):
        table = load_profile_set(spec["set"])
        try:
            profiles = [table[name] for name in spec["names"]]
        except KeyError as exc:
            raise ConfigError(f"unknown profile name {exc}") from exc
        labels = tuple(str(n) for n in spec["names"])
    else:
        raise ConfigError("profiles must be a list of strings or a set reference")
    if len(profiles) != n_agents:
        raise ConfigError(f"{len(profiles)} profiles for {n_agents} agents")
    return tuple(profiles), labels


def _resolve_encoder(spec: dict | None) -> SentenceEncoder:
    spec = spec or {"kind": "hashing"}
    kind = spec.get("kind", "hashing")
    if kind == "hashing":
        return HashingEncoder(dim=int(spec.get("dim", 256)))
    if kind == "remote":
        api_key = os.environ.get(API_KEY_ENV)
        if not api_key:
            raise ConfigError(f"remote encoder requires the {API_KEY_ENV} environment variable")
        return RemoteEncoder(
            base_url=spec["base_url"],
            model=spec["model"],
            dim=int(spec["dim"]),
            timeout=float(spec.get("timeout", 30.0)),
            max_retries=int(spec.get("max_retries", 3)),
            api_key=api_key,
        )
    raise ConfigError(f"unknown encoder kind {kind!r}")


def _resolve_scripted(spec: dict) -> ScriptedBackend:
    outputs: dict[tuple[int, int], str] = {}
    for key, text in spec.get("outputs", {}).items():
        try:
            agent_s, round_s = key.split(":")
            outputs[(int(agent_s), int(round_s))] = str(text)
        except ValueError as exc:
            raise ConfigError(f"scripted output key {key!r} is not 'agent:round'") from exc
    return ScriptedBackend(outputs=outputs, decider=spec.get("decider", "majority"))


def _resolve_remote(spec: dict) -> RemoteBackend:
    api_key = os.environ.get(API_KEY_ENV)
    if not api_key:
        raise ConfigError(f"remote backend requires the {API_KEY_ENV} environment variable")
    return RemoteBackend(
        client=ChatClient(
            base_url=spec["base_url"],
            model=spec["model"],
            temperature=float(spec.get("temperature", 1.0)),
            timeout=float(spec.get("timeout", 30.0)),
            max_retries=int(spec.get("max_retries", 3)),
            api_key=api_key,
        )
    )


def load_session_config(
    path: str | Path, backend_kind: str | None = None
) -> tuple[SessionConfig, AgentBackend]:
    """Parse a session config file and build its backend.

    backend_kind picks between the file's "scripted" and "remote" blocks;
    default is scripted when present. Remote configuration fails fast on a
    missing API key, before anything touches the network.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    try:
        graph = _resolve_graph(data["graph"], path.parent)
        decay_spec = data.get("decay", {})
        profiles, labels = _resolve_profiles(data["profiles"], graph.n_agents)
        if "role_labels" in data:
            labels = tuple(str(x) for x in data["role_labels"])
        config = SessionConfig(
            graph=graph,
            rounds=int(data["rounds"]),
            task=str(data["task"]),
            profiles=profiles,
            role_labels=labels,
            decay=DecayParams(**decay_spec),
            encoder=_resolve_encoder(data.get("encoder")),
            steering_mode=data.get("steering", {}).get("mode", BACKEND_ANCHOR_EXPORT),
            amplification=float(data.get("steering", {}).get("amplification", 1.0)),
            seed=int(data.get("seed", 0)),
            query_includes_profile=bool(data.get("query_includes_profile", False)),
            final_refer_inputs=(
                tuple(data["final_refer"]["inputs"]) if "final_refer" in data else None
            ),
        )
    except KeyError as exc:
        raise ConfigError(f"config {path} missing required key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config {path}: {exc}") from exc

    if backend_kind is None:
        backend_kind = "scripted" if "scripted" in data else "remote"
    if backend_kind == "scripted":
        if "scripted" not in data:
            raise ConfigError(f"config {path} has no scripted block")
        backend: AgentBackend = _resolve_scripted(data["scripted"])
    elif backend_kind == "remote":
        if "remote" not in data:
            raise ConfigError(f"config {path} has no remote block")
        backend = _resolve_remote(data["remote"])
    else:
        raise ConfigError(f"unknown backend kind {backend_kind!r}")
    return config, backend
