"""Discover a language model's hidden persona from the bridging relations in its dialogue."""

from .errors import PersonaBridgeError
from .estimators import BridgingGraphBuilder, GraphFeaturizer, PersonaDiscoverer
from .evaluation import aggregate_matrix, cosine_similarity, error_breakdown, score_prediction, stability
from .extraction import (
    BridgingRelation,
    ExtractionReport,
    build_extraction_prompt,
    canonicalize_concept,
    extract_bridging_relations,
    parse_relations,
)
from .graph import SemanticGraph, build_graph, export_graph, importance, relation_distribution, top_hubs
from .inference import InferenceStrategy, infer_frequency_aware, infer_persona_pd, infer_vanilla, token_frequency_table
from .interview import DialogueTranscript, DialogueTurn, generate_question, run_interview
from .providers import (
    ChatMessage,
    ChatRequestParams,
    HashingEmbedder,
    OpenAICompatibleProvider,
    RecordingProvider,
    ScriptedProvider,
)
from .runner import ExperimentConfig, RunConfig, run_experiment, run_pipeline
from .schema import PersonaProfile, PersonaSchema, default_schema, render_hidden_prompt, sample_persona
from .taxonomy import RelationClass, RelationType, parse_relation_type, relation_class

__version__ = "0.1.0"

__all__ = [
    "BridgingGraphBuilder",
    "BridgingRelation",
    "ChatMessage",
    "ChatRequestParams",
    "DialogueTranscript",
    "DialogueTurn",
    "ExperimentConfig",
    "ExtractionReport",
    "GraphFeaturizer",
    "HashingEmbedder",
    "InferenceStrategy",
    "OpenAICompatibleProvider",
    "PersonaBridgeError",
    "PersonaDiscoverer",
    "PersonaProfile",
    "PersonaSchema",
    "RecordingProvider",
    "RelationClass",
    "RelationType",
    "RunConfig",
    "ScriptedProvider",
    "SemanticGraph",
    "aggregate_matrix",
    "build_extraction_prompt",
    "build_graph",
    "canonicalize_concept",
    "cosine_similarity",
    "default_schema",
    "error_breakdown",
    "export_graph",
    "extract_bridging_relations",
    "generate_question",
    "importance",
    "infer_frequency_aware",
    "infer_persona_pd",
    "infer_vanilla",
    "parse_relation_type",
    "parse_relations",
    "relation_class",
    "relation_distribution",
    "render_hidden_prompt",
    "run_experiment",
    "run_interview",
    "run_pipeline",
    "sample_persona",
    "score_prediction",
    "stability",
    "token_frequency_table",
    "top_hubs",
]
