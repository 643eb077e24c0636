"""Append-only message store and per-receiver context pools.

The store keeps every agent output verbatim; nothing here prunes, rewrites,
or summarizes. A context pool is a pure read: the prior-round messages whose
authors can reach the receiver.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .comm_graph import AgentId, CommGraph, distances_to


@dataclass(frozen=True)
class Message:
    """One agent output, immutable once appended."""

    id: str
    author: AgentId
    round: int
    text: str
    role_label: str = ""


@dataclass(frozen=True)
class ContextPool:
    """Messages available to `receiver` at round `t`: authored before t by
    agents with a finite directed distance to the receiver (itself included),
    ordered by (round, append order)."""

    receiver: AgentId
    t: int
    messages: tuple[Message, ...]


class TranscriptStore:
    """Append-only, in-memory transcript with stable deterministic ids."""

    def __init__(self) -> None:
        self._messages: list[Message] = []
        self._by_id: dict[str, Message] = {}

    def __len__(self) -> int:
        return len(self._messages)

    def append_message(
        self, author: AgentId, round: int, text: str, role_label: str = ""
    ) -> str:
        """Append one output and return its id. Empty text is allowed; it
        simply yields no sentences downstream."""
        if round < 1:
            raise ValueError(f"round must be >= 1, got {round}")
        msg = Message(
            id=f"m{len(self._messages):04d}",
            author=author,
            round=round,
            text=text,
            role_label=role_label,
        )
        self._messages.append(msg)
        self._by_id[msg.id] = msg
        return msg.id

    def get(self, message_id: str) -> Message:
        return self._by_id[message_id]

    def messages(self) -> tuple[Message, ...]:
        return tuple(self._messages)


def context_pool(
    store: TranscriptStore, graph: CommGraph, receiver: AgentId, t: int
) -> ContextPool:
    """Build the receiver's pool for round t without touching the store."""
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    reachable = distances_to(graph, receiver)  # validates receiver id
    picked = [
        (msg.round, i, msg)
        for i, msg in enumerate(store.messages())
        if msg.round < t and msg.author in reachable
    ]
    picked.sort(key=lambda item: (item[0], item[1]))
    return ContextPool(receiver=receiver, t=t, messages=tuple(m for _, _, m in picked))


def message_to_dict(msg: Message) -> dict:
    return {
        "id": msg.id,
        "author": msg.author,
        "round": msg.round,
        "role_label": msg.role_label,
        "text": msg.text,
    }


def save_transcript(store: TranscriptStore, path: str) -> None:
    """Write one JSON object per message (JSON lines)."""
    with open(path, "w", encoding="utf-8") as fh:
        for msg in store.messages():
            fh.write(json.dumps(message_to_dict(msg), ensure_ascii=False))
            fh.write("\n")


def load_transcript(path: str) -> TranscriptStore:
    """Read a JSON-lines transcript, reporting the line of any parse failure."""
    store = TranscriptStore()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                msg = Message(
                    id=str(data["id"]),
                    author=int(data["author"]),
                    round=int(data["round"]),
                    text=str(data["text"]),
                    role_label=str(data.get("role_label", "")),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: invalid transcript line: {exc}") from exc
            store._messages.append(msg)
            store._by_id[msg.id] = msg
    return store


def transcript_digest(store: TranscriptStore) -> str:
    """Stable hash of the full store contents, for non-destructiveness checks."""
    h = hashlib.sha256()
    for msg in store.messages():
        h.update(json.dumps(message_to_dict(msg), ensure_ascii=False).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()
