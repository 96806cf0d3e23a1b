"""Persona prediction with three prompting strategies.

``vanilla``
    The reasoning model reads the raw dialogue.
``frequency_aware``
    As vanilla, plus a table of the most frequent content words in the
    target's answers.
``pd_agent``
    The reasoning model sees only a summary of the bridging graph (top hubs,
    relation-type distribution, class balance), never the dialogue text.

All three ask for one value per schema slot as JSON and share the same
reply parser, which snaps answers onto the schema vocabulary.
"""

from __future__ import annotations

import enum
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass

from ._io import tokenize
from .errors import InferenceParseError, ValidationError
from .graph import SemanticGraph, class_balance, relation_distribution, top_hubs
from .interview import DialogueTranscript, format_dialogue
from .providers import ChatMessage, ChatProvider
from .schema import PersonaProfile, PersonaSchema
from .taxonomy import RelationClass, RelationType

logger = logging.getLogger(__name__)

TOP_HUBS = 10
TOP_TOKENS = 30
EMPTY_GRAPH_WARNING = "degraded-input: bridging graph is empty"


class InferenceStrategy(str, enum.Enum):
    VANILLA = "vanilla"
    FREQUENCY_AWARE = "frequency_aware"
    PD_AGENT = "pd_agent"

    @property
    def display_name(self) -> str:
        return {"vanilla": "Vanilla", "frequency_aware": "Freq-Aware", "pd_agent": "PD-Agent"}[self.value]


STOP_WORDS = frozenset(
    """
    a about above after again against all am an and any are aren't as at be because been before being
    below between both but by can can't could couldn't did didn't do does doesn't doing don't down during
    each few for from further had hadn't has hasn't have haven't having he he'd he'll he's her here here's
    hers herself him himself his how how's i i'd i'll i'm i've if in into is isn't it it's its itself
    just let's me more most mustn't my myself no nor not now of off on once only or other ought our ours
    ourselves out over own really same shan't she she'd she'll she's should shouldn't so some such than that
    that's the their theirs them themselves then there there's these they they'd they'll they're they've
    this those through to too under until up us very was wasn't we we'd we'll we're we've were weren't what
    what's when when's where where's which while who who's whom why why's will with won't would wouldn't
    you you'd you'll you're you've your yours yourself yourselves also get got like lot lots much one ones
    thing things way well yes yeah oh s t
    """.split()
)

REASONER_SYSTEM_PROMPT = """\
You are an analyst inferring the hidden profile of a conversation partner.
For every slot in the schema choose exactly one of the allowed values, even when the evidence is weak.
Return ONLY a JSON object of the form {"<Dimension>": {"<Subcategory>": "<value>", ...}, ...}."""


@dataclass(frozen=True)
class GraphSummary:
    hubs: tuple[tuple[str, float], ...]
    distribution: dict[RelationType, tuple[int, float]]
    balance: dict[RelationClass, float]
    n_nodes: int
    n_edges: int

    @classmethod
    def from_graph(cls, g: SemanticGraph, k: int = TOP_HUBS) -> "GraphSummary":
        return cls(
            hubs=tuple(top_hubs(g, k)),
            distribution=relation_distribution(g),
            balance=class_balance(g),
            n_nodes=len(g.nodes),
            n_edges=len(g.edges),
        )

    def render(self) -> str:
        lines = [f"Concepts: {self.n_nodes}, relations: {self.n_edges}", "", "Top conceptual hubs (normalized degree centrality):"]
        if self.hubs:
            lines += [f"{i}. {label}: {w:.4f}" for i, (label, w) in enumerate(self.hubs, start=1)]
        else:
            lines.append("(none)")
        lines += ["", "Relation type distribution:"]
        lines += [f"- {t.value}: {c} ({f:.4f})" for t, (c, f) in self.distribution.items()]
        lines += ["", "Relation class balance:"]
        lines += [f"- {c.value}: {f:.4f}" for c, f in self.balance.items()]
        return "\n".join(lines)


def token_frequency_table(transcript: DialogueTranscript, top_n: int = TOP_TOKENS) -> list[tuple[str, int]]:
    """Most frequent non-stop-word tokens in the target's answers only."""
    if top_n < 1:
        raise ValidationError("top_n must be at least 1")
    counts = Counter(
        tok for response in transcript.responses() for tok in tokenize(response) if tok not in STOP_WORDS
    )
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]


def render_schema(schema: PersonaSchema) -> str:
    lines = []
    for dim in schema.dimensions:
        lines.append(f"{dim.name}:")
        for sub in dim.subcategories:
            lines.append(f"- {sub.name}: {' | '.join(sub.values)}")
    return "\n".join(lines)


def _reply_skeleton(schema: PersonaSchema) -> str:
    skeleton = {d.name: {s.name: "..." for s in d.subcategories} for d in schema.dimensions}
    return json.dumps(skeleton, ensure_ascii=False)


def _prompt(schema: PersonaSchema, evidence_blocks: list[tuple[str, str]]) -> list[ChatMessage]:
    parts = ["SCHEMA (allowed values per slot)", render_schema(schema), ""]
    for title, body in evidence_blocks:
        parts += [title, body, ""]
    parts += ["ANSWER FORMAT", _reply_skeleton(schema)]
    return [ChatMessage("system", REASONER_SYSTEM_PROMPT), ChatMessage("user", "\n".join(parts))]


def vanilla_messages(transcript: DialogueTranscript, schema: PersonaSchema) -> list[ChatMessage]:
    return _prompt(schema, [("DIALOGUE", format_dialogue(transcript))])


def frequency_messages(
    transcript: DialogueTranscript, schema: PersonaSchema, top_n: int = TOP_TOKENS
) -> list[ChatMessage]:
    table = token_frequency_table(transcript, top_n)
    rendered = "\n".join(f"{tok}: {n}" for tok, n in table) or "(no content words)"
    return _prompt(
        schema,
        [("DIALOGUE", format_dialogue(transcript)), (f"TOKEN FREQUENCIES (top {top_n}, respondent only)", rendered)],
    )


def pd_messages(graph: SemanticGraph, schema: PersonaSchema, k: int = TOP_HUBS) -> list[ChatMessage]:
    summary = GraphSummary.from_graph(graph, k)
    return _prompt(schema, [("BRIDGING GRAPH SUMMARY", summary.render())])


def _extract_json_object(text: str):
    decoder = json.JSONDecoder()
    fence = re.search(r"```[a-zA-Z]*\s*\n?(.*?)```", text, re.DOTALL)
    candidates = [fence.group(1)] if fence else []
    candidates.append(text)
    for cand in candidates:
        for m in re.finditer(r"\{", cand):
            try:
                obj, _ = decoder.raw_decode(cand, m.start())
            except json.JSONDecodeError:
                continue
            if isinstance(obj, dict):
                return obj
    return None


def _norm(s: str) -> str:
    return " ".join(s.strip().lower().split())


def parse_profile_reply(reply: str, schema: PersonaSchema, warnings: tuple[str, ...] = ()) -> PersonaProfile:
    """Read one value per slot from a JSON reply.

    Accepts either ``{dim: {sub: value}}`` or flat ``{"dim.sub": value}``
    keys. A value is snapped onto the allowed list by case-insensitive exact
    match; anything else leaves the slot unresolved and filled with the
    first allowed value.
    """
    obj = _extract_json_object(reply)
    if obj is None:
        raise InferenceParseError("reply contains no JSON object")
    lowered = {_norm(k): v for k, v in obj.items() if isinstance(k, str)}
    assignments = {}
    unresolved = []
    seen_any = False
    for dim, sub in schema.slots():
        raw = None
        nested = lowered.get(_norm(dim))
        if isinstance(nested, dict):
            raw = {_norm(k): v for k, v in nested.items() if isinstance(k, str)}.get(_norm(sub))
        if raw is None:
            raw = lowered.get(_norm(f"{dim}.{sub}"), lowered.get(_norm(sub)))
        allowed = schema.allowed(dim, sub)
        value = None
        if isinstance(raw, str):
            seen_any = True
            value = next((a for a in allowed if _norm(a) == _norm(raw)), None)
        if value is None:
            unresolved.append((dim, sub))
            value = allowed[0]
        assignments[(dim, sub)] = value
    if not seen_any:
        raise InferenceParseError("reply JSON names none of the schema slots")
    if unresolved:
        logger.info("unresolved slots defaulted: %s", unresolved)
    return PersonaProfile(assignments, tuple(unresolved), warnings)


def infer_vanilla(transcript: DialogueTranscript, schema: PersonaSchema, pd: ChatProvider) -> PersonaProfile:
    transcript.validate()
    return parse_profile_reply(pd.complete(vanilla_messages(transcript, schema)), schema)


def infer_frequency_aware(
    transcript: DialogueTranscript, schema: PersonaSchema, pd: ChatProvider, top_n: int = TOP_TOKENS
) -> PersonaProfile:
    transcript.validate()
    return parse_profile_reply(pd.complete(frequency_messages(transcript, schema, top_n)), schema)


def infer_persona_pd(
    graph: SemanticGraph, schema: PersonaSchema, pd: ChatProvider, k: int = TOP_HUBS
) -> PersonaProfile:
    warnings = ()
    if not graph.edges:
        logger.warning(EMPTY_GRAPH_WARNING)
        warnings = (EMPTY_GRAPH_WARNING,)
    return parse_profile_reply(pd.complete(pd_messages(graph, schema, k)), schema, warnings)


def _check_inputs(strategy, transcript, graph) -> InferenceStrategy:
    try:
        strategy = InferenceStrategy(strategy)
    except ValueError:
        raise ValidationError(f"unknown inference strategy {strategy!r}") from None
    if strategy is InferenceStrategy.PD_AGENT and graph is None:
        raise ValidationError("the pd_agent strategy needs a graph")
    if strategy is not InferenceStrategy.PD_AGENT and transcript is None:
        raise ValidationError(f"the {strategy.value} strategy needs a transcript")
    return strategy


def strategy_messages(
    strategy: InferenceStrategy | str,
    schema: PersonaSchema,
    transcript: DialogueTranscript | None = None,
    graph: SemanticGraph | None = None,
    top_hubs: int = TOP_HUBS,
    top_tokens: int = TOP_TOKENS,
) -> list[ChatMessage]:
    """The exact messages a strategy would send; used for audit files."""
    strategy = _check_inputs(strategy, transcript, graph)
    if strategy is InferenceStrategy.PD_AGENT:
        return pd_messages(graph, schema, top_hubs)
    if strategy is InferenceStrategy.FREQUENCY_AWARE:
        return frequency_messages(transcript, schema, top_tokens)
    return vanilla_messages(transcript, schema)


def infer(
    strategy: InferenceStrategy | str,
    schema: PersonaSchema,
    pd: ChatProvider,
    transcript: DialogueTranscript | None = None,
    graph: SemanticGraph | None = None,
    top_hubs: int = TOP_HUBS,
    top_tokens: int = TOP_TOKENS,
) -> PersonaProfile:
    strategy = _check_inputs(strategy, transcript, graph)
    if strategy is InferenceStrategy.PD_AGENT:
        return infer_persona_pd(graph, schema, pd, top_hubs)
    if strategy is InferenceStrategy.FREQUENCY_AWARE:
        return infer_frequency_aware(transcript, schema, pd, top_tokens)
    return infer_vanilla(transcript, schema, pd)
