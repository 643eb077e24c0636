"""Sentence scoring and context selection.

Every sentence in a receiver's pool gets a score: semantic similarity to the
current query, damped by how far the author sits in the graph (hop-distance
decay) and how old the message is (round-age decay). Sentences at or above
the threshold become the anchors of the selected context; the transcript is
never modified.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .comm_graph import AgentId, CommGraph, distances_to
from .errors import TransportResponseError
from .transcript import ContextPool

MATCHER_DENSE = "dense"
MATCHER_BM25 = "bm25"
MATCHERS = (MATCHER_DENSE, MATCHER_BM25)

DEFAULT_LAMBDA_S = 0.92
DEFAULT_LAMBDA_T = 0.92
DEFAULT_THETA = 0.65


@dataclass(frozen=True)
class DecayParams:
    """Scoring knobs. Lambdas must sit strictly inside (0, 1) unless the
    corresponding decay is disabled outright."""

    lambda_s: float = DEFAULT_LAMBDA_S
    lambda_t: float = DEFAULT_LAMBDA_T
    theta: float = DEFAULT_THETA
    disable_spatial: bool = False
    disable_temporal: bool = False
    matcher: str = MATCHER_DENSE

    def __post_init__(self) -> None:
        if not self.disable_spatial and not (0.0 < self.lambda_s < 1.0):
            raise ValueError(f"lambda_s must be in (0, 1), got {self.lambda_s}")
        if not self.disable_temporal and not (0.0 < self.lambda_t < 1.0):
            raise ValueError(f"lambda_t must be in (0, 1), got {self.lambda_t}")
        if self.matcher not in MATCHERS:
            raise ValueError(f"matcher must be one of {MATCHERS}, got {self.matcher!r}")

    def to_dict(self) -> dict:
        return {
            "lambda_s": self.lambda_s,
            "lambda_t": self.lambda_t,
            "theta": self.theta,
            "disable_spatial": self.disable_spatial,
            "disable_temporal": self.disable_temporal,
            "matcher": self.matcher,
        }


@dataclass(frozen=True)
class Sentence:
    """One sentence of a message. start/end are byte offsets into the
    UTF-8 encoding of the message text, [start, end)."""

    message_id: str
    ordinal: int
    start: int
    end: int
    text: str


@dataclass(frozen=True)
class ScoredSentence:
    """A sentence with its full score decomposition, for audit."""

    sentence: Sentence
    author: AgentId
    round: int
    phi_s: float
    phi_t: float
    r: float
    phi_sem: float
    score: float


@dataclass(frozen=True)
class SelectedContext:
    """The query plus every sentence that met the threshold, in
    chronological order (round, message append order, sentence ordinal)."""

    query: str
    anchors: tuple[ScoredSentence, ...]
    params: DecayParams


def spatial_decay(d: int | None, lambda_s: float) -> float:
    """Weight for a message d hops away: 1 for self (d=0) and direct
    neighbors (d=1), lambda_s**(d-1) beyond that."""
    if d is None:
        raise ValueError("unreachable author: such messages never reach scoring")
    if d < 0:
        raise ValueError(f"hop distance must be >= 0, got {d}")
    if not (0.0 < lambda_s < 1.0):
        raise ValueError(f"lambda_s must be in (0, 1), got {lambda_s}")
    if d <= 1:
        return 1.0
    return lambda_s ** (d - 1)


def temporal_decay(tau: int, t: int, lambda_t: float) -> float:
    """Weight for a message produced at round tau, seen at round t:
    lambda_t**(t - tau - 1); 1 for the most recent round."""
    if tau >= t:
        raise ValueError(f"message round {tau} must precede current round {t}")
    if not (0.0 < lambda_t < 1.0):
        raise ValueError(f"lambda_t must be in (0, 1), got {lambda_t}")
    age = t - tau - 1
    if age == 0:
        return 1.0
    return lambda_t**age


def message_relevance(phi_s: float, phi_t: float) -> float:
    """Combined per-message weight: spatial times temporal."""
    return phi_s * phi_t


def sentence_score(r: float, phi_sem: float) -> float:
    """Final sentence score: message weight times semantic similarity."""
    return r * phi_sem


# ---------------------------------------------------------------------------
# Sentence segmentation
# ---------------------------------------------------------------------------

_TERMINATORS = ".!?"
_CLOSERS = "\"')]}”’»"
# Lowercased tokens that take a trailing period without ending a sentence.
_ABBREVIATIONS = frozenset(
    {"mr", "mrs", "ms", "dr", "prof", "st", "vs", "etc", "e.g", "i.e", "cf", "fig", "no", "al", "approx"}
)


def _ends_with_abbreviation(text: str, period_index: int) -> bool:
    j = period_index
    start = j
    while start > 0 and (text[start - 1].isalnum() or text[start - 1] == "."):
        start -= 1
    word = text[start:j].lower().rstrip(".")
    if not word:
        return False
    if word in _ABBREVIATIONS:
        return True
    # Single-letter initials like "J. Smith".
    return len(word) == 1 and word.isalpha()


def segment_sentences(text: str, message_id: str = "") -> list[Sentence]:
    """Deterministic sentence split.

    Boundaries: newline (always), or a run of .!? followed by optional
    closing quotes/brackets and then whitespace or end of text, unless a
    lone period trails a known abbreviation, an initial, or a digit pair
    (decimals never reach the boundary test: no whitespace follows).
    Whitespace-only segments are dropped; spans are byte offsets that
    reconstruct each sentence exactly.
    """
    n = len(text)
    raw_spans: list[tuple[int, int]] = []
    start = 0
    i = 0
    while i < n:
        ch = text[i]
        if ch == "\n":
            raw_spans.append((start, i))
            start = i + 1
            i += 1
            continue
        if ch in _TERMINATORS:
            j = i + 1
            while j < n and text[j] in _TERMINATORS:
                j += 1
            while j < n and text[j] in _CLOSERS:
                j += 1
            boundary = j >= n or text[j].isspace()
            if boundary and ch == "." and j == i + 1 and _ends_with_abbreviation(text, i):
                boundary = False
            if boundary:
                raw_spans.append((start, j))
                start = j
                i = j
                continue
        i += 1
    if start < n:
        raw_spans.append((start, n))

    # Byte offset of every char position, so spans survive non-ASCII text.
    byte_at = [0] * (n + 1)
    for k, c in enumerate(text):
        byte_at[k + 1] = byte_at[k] + len(c.encode("utf-8"))

    sentences: list[Sentence] = []
    for cs, ce in raw_spans:
        while cs < ce and text[cs].isspace():
            cs += 1
        while ce > cs and text[ce - 1].isspace():
            ce -= 1
        if cs >= ce:
            continue
        sentences.append(
            Sentence(
                message_id=message_id,
                ordinal=len(sentences),
                start=byte_at[cs],
                end=byte_at[ce],
                text=text[cs:ce],
            )
        )
    return sentences


# ---------------------------------------------------------------------------
# Encoders
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


def _tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class SentenceEncoder(Protocol):
    """Maps text to a fixed-dimension vector; must be idempotent per input."""

    dim: int

    def encode(self, text: str) -> np.ndarray: ...


class HashingEncoder:
    """Offline fallback encoder: signed feature hashing of a lowercased,
    punctuation-stripped bag of tokens, L2-normalized.

    Deterministic across processes and platforms (token hashes come from
    sha256, not the salted builtin hash). Empty input encodes to the
    all-zeros vector, which downstream cosine treats as similarity 0.
    """

    def __init__(self, dim: int = 256):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = dim

    def encode(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in _tokenize(text):
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:4], "big") % self.dim
            sign = 1.0 if digest[4] & 1 else -1.0
            vec[bucket] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0.0:
            vec /= norm
        return vec


class RemoteEncoder:
    """Encoder backed by an embeddings endpoint (OpenAI-style wire format).

    Failures surface as typed transport errors carrying the attempt count;
    a zero vector is never fabricated.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        dim: int,
        *,
        timeout: float = 30.0,
        max_retries: int = 3,
        api_key: str | None = None,
        backoff_base: float = 0.5,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.dim = dim
        self.timeout = timeout
        self.max_retries = max_retries
        self.api_key = api_key
        self.backoff_base = backoff_base

    def encode(self, text: str) -> np.ndarray:
        from ._http import post_json

        body = post_json(
            f"{self.base_url}/embeddings",
            {"model": self.model, "input": [text]},
            timeout=self.timeout,
            max_retries=self.max_retries,
            api_key=self.api_key,
            backoff_base=self.backoff_base,
        )
        try:
            values = body["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportResponseError(
                f"embeddings response missing data[0].embedding: {exc}", attempts=1
            ) from exc
        vec = np.asarray(values, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise TransportResponseError(
                f"embedding dimension {vec.shape} does not match declared ({self.dim},)",
                attempts=1,
            )
        if not np.all(np.isfinite(vec)):
            raise TransportResponseError("embedding contains non-finite entries", attempts=1)
        return vec


def embed(provider: SentenceEncoder, text: str) -> np.ndarray:
    """Encode text with the provider; the vector is finite and fixed-dim."""
    return provider.encode(text)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Standard cosine in [-1, 1], clamped against rounding drift.
    Zero-norm input yields 0 by convention."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    value = float(np.dot(a, b)) / (na * nb)
    return max(-1.0, min(1.0, value))


# ---------------------------------------------------------------------------
# Lexical matcher (BM25 variant)
# ---------------------------------------------------------------------------


class Bm25Corpus:
    """Okapi BM25 statistics over the pool's sentences.

    Uses the non-negative idf = ln(1 + (N - n + 0.5)/(n + 0.5)), so raw
    scores are >= 0 and max-normalization lands in [0, 1].
    """

    def __init__(self, texts: Sequence[str], k1: float = 1.2, b: float = 0.75):
        self.k1 = k1
        self.b = b
        self.docs = [_tokenize(t) for t in texts]
        self.n_docs = len(self.docs)
        self.avgdl = (sum(len(d) for d in self.docs) / self.n_docs) if self.n_docs else 0.0
        df: Counter[str] = Counter()
        for doc in self.docs:
            df.update(set(doc))
        self.idf = {
            term: math.log(1.0 + (self.n_docs - n + 0.5) / (n + 0.5)) for term, n in df.items()
        }

    def raw_score(self, query: str, text: str) -> float:
        tokens = _tokenize(text)
        if not tokens or self.avgdl == 0.0:
            return 0.0
        tf = Counter(tokens)
        norm = self.k1 * (1.0 - self.b + self.b * len(tokens) / self.avgdl)
        score = 0.0
        for term in _tokenize(query):
            f = tf.get(term, 0)
            if f == 0:
                continue
            score += self.idf.get(term, 0.0) * f * (self.k1 + 1.0) / (f + norm)
        return score

    def max_raw_score(self, query: str) -> float:
        return max((self.raw_score(query, " ".join(doc)) for doc in self.docs), default=0.0)


def bm25_score(query: str, sentence_text: str, corpus: Bm25Corpus) -> float:
    """BM25 of the sentence against the query, divided by the pool's max
    BM25 for that query (0 when every pool score is 0)."""
    top = corpus.max_raw_score(query)
    if top <= 0.0:
        return 0.0
    return corpus.raw_score(query, sentence_text) / top


# ---------------------------------------------------------------------------
# Selection
# ---------------------------------------------------------------------------


def select_context(
    pool: ContextPool,
    graph: CommGraph,
    query: str,
    t: int,
    params: DecayParams,
    provider: SentenceEncoder,
) -> SelectedContext:
    """Score every sentence in the pool and keep those with score >= theta.

    The query is part of the result unconditionally. Disable flags force the
    corresponding factor to exactly 1. The pool (and the store behind it) is
    read, never changed.
    """
    if pool.t != t:
        raise ValueError(f"pool was built for t={pool.t}, selection asked for t={t}")
    dist = distances_to(graph, pool.receiver)

    bm25: Bm25Corpus | None = None
    query_vec: np.ndarray | None = None
    per_message_sentences = [
        segment_sentences(msg.text, message_id=msg.id) for msg in pool.messages
    ]
    if params.matcher == MATCHER_BM25:
        all_texts = [s.text for group in per_message_sentences for s in group]
        bm25 = Bm25Corpus(all_texts)
        top = bm25.max_raw_score(query)
    else:
        query_vec = provider.encode(query)

    anchors: list[ScoredSentence] = []
    for msg, sentences in zip(pool.messages, per_message_sentences):
        d = dist.get(msg.author)
        if d is None:
            raise ValueError(
                f"message {msg.id} author {msg.author} cannot reach receiver "
                f"{pool.receiver}: pool/graph mismatch"
            )
        phi_s = 1.0 if params.disable_spatial else spatial_decay(d, params.lambda_s)
        phi_t = 1.0 if params.disable_temporal else temporal_decay(msg.round, t, params.lambda_t)
        r = message_relevance(phi_s, phi_t)
        for sent in sentences:
            if params.matcher == MATCHER_BM25:
                assert bm25 is not None
                phi_sem = bm25.raw_score(query, sent.text) / top if top > 0.0 else 0.0
            else:
                assert query_vec is not None
                phi_sem = cosine_similarity(provider.encode(sent.text), query_vec)
            score = sentence_score(r, phi_sem)
            if score >= params.theta:
                anchors.append(
                    ScoredSentence(
                        sentence=sent,
                        author=msg.author,
                        round=msg.round,
                        phi_s=phi_s,
                        phi_t=phi_t,
                        r=r,
                        phi_sem=phi_sem,
                        score=score,
                    )
                )
    return SelectedContext(query=query, anchors=tuple(anchors), params=params)


def selection_to_dict(selected: SelectedContext, receiver: AgentId, t: int) -> dict:
    """Serialize a selection to the interchange schema used by the CLI and
    the audit log. Spans are byte offsets, exact enough to steer on."""
    return {
        "receiver": receiver,
        "t": t,
        "query": selected.query,
        "params": selected.params.to_dict(),
        "anchors": [
            {
                "message_id": a.sentence.message_id,
                "char_span": [a.sentence.start, a.sentence.end],
                "phi_s": a.phi_s,
                "phi_t": a.phi_t,
                "r": a.r,
                "phi_sem": a.phi_sem,
                "score": a.score,
                "text": a.sentence.text,
            }
            for a in selected.anchors
        ],
    }


def selection_json(selected: SelectedContext, receiver: AgentId, t: int) -> str:
    """Canonical serialization of a selection (what the CLI writes)."""
    return json.dumps(selection_to_dict(selected, receiver, t), ensure_ascii=False, indent=2) + "\n"
