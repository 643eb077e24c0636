"""Turn a selection into steering input: a rendered prompt plus anchor spans.

The prompt always carries the full pool verbatim; anchors are byte spans
into it. An external attention-steering server consumes the span export;
the prompt-append variant just lists the anchor texts after the prompt.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import SteeringError
from .radar_select import SelectedContext
from .transcript import ContextPool

BACKEND_ANCHOR_EXPORT = "anchor_export"
BACKEND_PROMPT_APPEND = "prompt_append"
STEERING_BACKENDS = (BACKEND_ANCHOR_EXPORT, BACKEND_PROMPT_APPEND)


@dataclass(frozen=True)
class PromptSpanIndex:
    """A rendered prompt with the byte positions needed to relocate spans:
    where the query text sits and where each message body starts."""

    prompt: str
    task_span: tuple[int, int]
    message_offsets: dict[str, int]


@dataclass(frozen=True)
class SteeringRequest:
    """What an inference backend consumes: the prompt, the byte spans to
    amplify (merged, non-overlapping), and an amplification hint."""

    full_prompt: str
    anchor_spans: tuple[tuple[int, int], ...]
    backend: str
    amplification: float = 1.0


def render_prompt(query: str, pool: ContextPool, profile: str) -> PromptSpanIndex:
    """Serialize profile, task, and the full pool into one prompt.

    Message bodies are embedded byte-for-byte, so a sentence span inside a
    message becomes a prompt span by adding the recorded body offset.
    """
    parts: list[str] = []
    nbytes = 0

    def push(text: str) -> int:
        nonlocal nbytes
        parts.append(text)
        offset = nbytes
        nbytes += len(text.encode("utf-8"))
        return offset

    push(profile)
    push("\n\nThe task is: ")
    task_start = push(query)
    task_span = (task_start, nbytes)
    if pool.messages:
        push("\n\nAt the same time, the outputs of other agents are as follows.")
    offsets: dict[str, int] = {}
    for msg in pool.messages:
        push(f"\n\nAgent {msg.author}, role is {msg.role_label}, output is:\n")
        offsets[msg.id] = push(msg.text)
    return PromptSpanIndex(prompt="".join(parts), task_span=task_span, message_offsets=offsets)


def merge_spans(spans: list[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    """Sort and merge overlapping or touching [start, end) spans."""
    merged: list[tuple[int, int]] = []
    for start, end in sorted(spans):
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return tuple(merged)


def make_anchor_spans(
    selected: SelectedContext,
    span_index: PromptSpanIndex,
    amplification: float = 1.0,
) -> SteeringRequest:
    """Relocate every anchor's sentence span into the rendered prompt.

    The query's task-block span is always part of the result. Each relocated
    span is verified to decode back to the anchor text before spans are
    merged; a mismatch means the selection and the prompt came from
    different pools.
    """
    prompt_bytes = span_index.prompt.encode("utf-8")
    spans: list[tuple[int, int]] = [span_index.task_span]
    for anchor in selected.anchors:
        offset = span_index.message_offsets.get(anchor.sentence.message_id)
        if offset is None:
            raise SteeringError(
                f"anchor message {anchor.sentence.message_id} is not in the rendered prompt"
            )
        start = offset + anchor.sentence.start
        end = offset + anchor.sentence.end
        if prompt_bytes[start:end] != anchor.sentence.text.encode("utf-8"):
            raise SteeringError(
                f"anchor span [{start}, {end}) does not decode to the anchor text"
            )
        spans.append((start, end))
    return SteeringRequest(
        full_prompt=span_index.prompt,
        anchor_spans=merge_spans(spans),
        backend=BACKEND_ANCHOR_EXPORT,
        amplification=amplification,
    )


def apply_prompt_append(selected: SelectedContext, full_prompt: str) -> str:
    """No-steering variant: list the anchor texts after the prompt, in order.
    Nothing is truncated or rewritten; an empty selection is marked as such."""
    if selected.anchors:
        listing = "\n".join(f"- {a.sentence.text}" for a in selected.anchors)
    else:
        listing = "(none)"
    return f"{full_prompt}\n\nKey context:\n{listing}"


def steering_request_to_dict(request: SteeringRequest) -> dict:
    """The anchor-export wire format an SPA-style serving layer consumes."""
    return {
        "prompt": request.full_prompt,
        "anchors": [[s, e] for s, e in request.anchor_spans],
        "amplification": request.amplification,
    }
