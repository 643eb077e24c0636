"""Context selection for multi-agent sessions.

Scores sentence-level context by semantic relevance weighted with
hop-distance and round-age decay, and emits anchor spans for
attention-steering inference backends.
"""

from .comm_graph import (
    AgentId,
    CommGraph,
    TopologyKind,
    build_topology,
    hop_distance,
    k_hop_neighborhood,
    load_graph,
    reachable_set,
    save_graph,
)
from .errors import (
    ConfigError,
    CtxRadarError,
    SessionError,
    SteeringError,
    TransportError,
    TransportHTTPError,
    TransportResponseError,
    TransportTimeoutError,
)
from .harness import (
    AgentBackend,
    ChatClient,
    RemoteBackend,
    ScriptedBackend,
    SessionConfig,
    SessionResult,
    final_refer,
    load_profile_set,
    load_session_config,
    replay_selections,
    run_session,
    save_session_outputs,
)
from .radar_select import (
    Bm25Corpus,
    DecayParams,
    HashingEncoder,
    RemoteEncoder,
    ScoredSentence,
    SelectedContext,
    Sentence,
    SentenceEncoder,
    bm25_score,
    cosine_similarity,
    embed,
    message_relevance,
    segment_sentences,
    select_context,
    selection_to_dict,
    sentence_score,
    spatial_decay,
    temporal_decay,
)
from .steering import (
    PromptSpanIndex,
    SteeringRequest,
    apply_prompt_append,
    make_anchor_spans,
    render_prompt,
    steering_request_to_dict,
)
from .transcript import (
    ContextPool,
    Message,
    TranscriptStore,
    context_pool,
    load_transcript,
    save_transcript,
    transcript_digest,
)

__version__ = "0.1.0"
