"""Schema-driven prompting toolkit for generative dialogue state tracking."""

from .corpus import (
    ContextWindow,
    CorpusError,
    Dialogue,
    DialogueState,
    Speaker,
    Turn,
    build_context,
    corpus_stats,
    gold_state_at,
    parse_dialogues,
    parse_m2m_dialogues,
)
from .decoders import (
    Backend,
    BackendError,
    DecodeRequest,
    DecodeResponse,
    ExtractiveBackend,
    OracleBackend,
    RemoteBackend,
    build_gazetteer,
    decode_batch,
)
from .evalkit import (
    ErrorCategory,
    EvalOptions,
    EvalReport,
    EvalRun,
    MatchMode,
    categorize_errors,
    compare_runs,
    jga,
    value_match,
)
from .prompting import (
    Mode,
    PromptExample,
    SegmentTokens,
    domain_prompt,
    expand_examples,
    parse_sequential,
    serialize_independent,
    serialize_sequential,
    slot_prompt,
)
from .schema import (
    DescriptionConfig,
    DomainDef,
    Schema,
    SchemaError,
    SlotDef,
    filter_domains,
    parse_schema,
    resolve_descriptions,
)
from .state import TurnPrediction, assemble_independent, assemble_sequential

__version__ = "0.1.0"
