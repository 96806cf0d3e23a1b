"""Bridging-relation extraction: prompt construction, reply parsing, validation.

Validation is per record. A reply that is not a JSON object with a
``bridging_relations`` array fails as a whole
(:class:`MalformedExtractionError`); inside a valid document every record is
either accepted or rejected with a reason, so partially good model output
still contributes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources

from ._io import read_json, write_json
from .errors import EmptyConceptError, MalformedExtractionError, UnknownRelationTypeError
from .interview import DialogueTranscript, format_dialogue
from .providers import ChatMessage, ChatProvider
from .taxonomy import RelationClass, RelationType, parse_relation_type, relation_class

EXTRACTION_TEMPLATE = "bridging_extraction.txt"
MAX_SPAN_WORDS = 3
DETERMINERS = frozenset({"the", "a", "an"})

RELATION_FIELDS = ("anchor", "anaphor", "relation_type", "explanation", "sentence_context")

_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\s*\n?(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class BridgingRelation:
    anchor: str
    anaphor: str
    relation_type: RelationType
    explanation: str = ""
    sentence_context: str = ""

    @property
    def relation_class(self) -> RelationClass:
        return relation_class(self.relation_type)

    def to_dict(self) -> dict:
        return {
            "anchor": self.anchor,
            "anaphor": self.anaphor,
            "relation_type": self.relation_type.value,
            "explanation": self.explanation,
            "sentence_context": self.sentence_context,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BridgingRelation":
        return cls(
            anchor=data["anchor"],
            anaphor=data["anaphor"],
            relation_type=parse_relation_type(data["relation_type"]),
            explanation=data.get("explanation", ""),
            sentence_context=data.get("sentence_context", ""),
        )


@dataclass(frozen=True)
class Rejection:
    record: object
    reason: str

    def to_dict(self) -> dict:
        return {"record": self.record, "reason": self.reason}


@dataclass(frozen=True)
class ExtractionReport:
    accepted: tuple[BridgingRelation, ...] = ()
    rejected: tuple[Rejection, ...] = ()
    raw_response: str = ""

    def to_dict(self) -> dict:
        return {
            "accepted": [r.to_dict() for r in self.accepted],
            "rejected": [r.to_dict() for r in self.rejected],
            "raw_response": self.raw_response,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExtractionReport":
        return cls(
            accepted=tuple(BridgingRelation.from_dict(r) for r in data.get("accepted", ())),
            rejected=tuple(Rejection(r["record"], r["reason"]) for r in data.get("rejected", ())),
            raw_response=data.get("raw_response", ""),
        )


@dataclass(frozen=True)
class Exemplar:
    dialogue: str
    relations: tuple[dict, ...]


DEFAULT_FEW_SHOTS: tuple[Exemplar, ...] = (
    Exemplar(
        "I finally took the car to the garage. The engine had been rattling for weeks.",
        (
            {
                "anchor": "car",
                "anaphor": "engine",
                "relation_type": "part-of",
                "explanation": "The engine is a component of the car mentioned before it.",
                "sentence_context": "took the car ... The engine had been rattling",
            },
        ),
    ),
    Exemplar(
        "Our class went on a field trip to the museum. One student got lost near the exit.",
        (
            {
                "anchor": "class",
                "anaphor": "student",
                "relation_type": "member-of",
                "explanation": "The student is understood as one member of the class.",
                "sentence_context": "Our class went ... One student got lost",
            },
            {
                "anchor": "museum",
                "anaphor": "exit",
                "relation_type": "part-of",
                "explanation": "The exit is read as the museum's exit.",
                "sentence_context": "to the museum ... near the exit",
            },
        ),
    ),
    Exemplar(
        "He was cutting vegetables for dinner. The knife kept slipping.",
        (
            {
                "anchor": "cutting",
                "anaphor": "knife",
                "relation_type": "instrument",
                "explanation": "The knife fills the tool slot of the cutting event.",
                "sentence_context": "cutting vegetables ... The knife kept slipping",
            },
        ),
    ),
    Exemplar(
        "We had a long discussion over lunch. The topic was whether to move closer to my parents.",
        (
            {
                "anchor": "discussion",
                "anaphor": "topic",
                "relation_type": "theme",
                "explanation": "The topic is what the discussion was about.",
                "sentence_context": "a long discussion ... The topic was",
            },
        ),
    ),
    Exemplar(
        "She put a huge effort into the project this year. The promotion surprised nobody. "
        "I spent Sunday at the library, but the book I wanted was out. Mornings are hectic; breakfast happens on the bus.",
        (
            {
                "anchor": "effort",
                "anaphor": "promotion",
                "relation_type": "cause-of",
                "explanation": "The promotion is understood as a result of the effort.",
                "sentence_context": "a huge effort ... The promotion surprised nobody",
            },
            {
                "anchor": "library",
                "anaphor": "book",
                "relation_type": "in",
                "explanation": "The book is one held in the library just mentioned.",
                "sentence_context": "at the library, but the book I wanted was out",
            },
            {
                "anchor": "morning",
                "anaphor": "breakfast",
                "relation_type": "temporal",
                "explanation": "Breakfast is anchored to the morning time frame.",
                "sentence_context": "Mornings are hectic; breakfast happens on the bus",
            },
        ),
    ),
)


def _template() -> str:
    return resources.files(__package__).joinpath("templates", EXTRACTION_TEMPLATE).read_text(encoding="utf-8")


def build_extraction_prompt(transcript: DialogueTranscript, few_shots=DEFAULT_FEW_SHOTS) -> str:
    if not transcript.turns:
        raise MalformedExtractionError("cannot build an extraction prompt for an empty transcript")
    parts = [_template().rstrip("\n"), "", "EXAMPLES"]
    for i, ex in enumerate(few_shots, start=1):
        payload = json.dumps({"bridging_relations": list(ex.relations)}, ensure_ascii=False)
        parts += [f"Example {i}", f"Conversation: {ex.dialogue}", f"Output: {payload}", ""]
    parts += ["CONVERSATION", format_dialogue(transcript)]
    return "\n".join(parts)


def canonicalize_concept(phrase: str) -> str:
    """Lowercase, trim, collapse whitespace and drop leading English articles."""
    if not isinstance(phrase, str):
        raise EmptyConceptError(f"concept must be text, got {type(phrase).__name__}")
    words = phrase.lower().split()
    words = [w for w in (w.strip("\"'“”‘’.,;:!?()[]") for w in words) if w]
    while words and words[0] in DETERMINERS:
        words.pop(0)
    if not words:
        raise EmptyConceptError(f"concept {phrase!r} is empty after canonicalization")
    return " ".join(words)


def _strip_fences(text: str) -> str:
    m = _FENCE_RE.search(text)
    return m.group(1).strip() if m else text.strip()


def _load_document(raw: str):
    body = _strip_fences(raw)
    try:
        return json.loads(body)
    except json.JSONDecodeError:
        pass
    lo, hi = body.find("{"), body.rfind("}")
    if lo != -1 and hi > lo:
        try:
            return json.loads(body[lo : hi + 1])
        except json.JSONDecodeError:
            pass
    raise MalformedExtractionError("extraction reply is not valid JSON")


def _context_text(value) -> str | None:
    if isinstance(value, str):
        return value
    if isinstance(value, list) and all(isinstance(v, str) for v in value):
        return " ... ".join(value)
    return None


def _validate_record(record) -> BridgingRelation | str:
    """Return the relation, or a rejection reason."""
    if not isinstance(record, dict):
        return "not-an-object"
    for name in ("anchor", "anaphor", "relation_type"):
        if name not in record:
            return f"missing-field:{name}"
        if not isinstance(record[name], str):
            return f"wrong-type:{name}"
    try:
        rtype = parse_relation_type(record["relation_type"])
    except UnknownRelationTypeError:
        return "unknown-relation-type"
    explanation = record.get("explanation", "")
    if not isinstance(explanation, str):
        return "wrong-type:explanation"
    context = _context_text(record.get("sentence_context", ""))
    if context is None:
        return "wrong-type:sentence_context"
    try:
        anchor = canonicalize_concept(record["anchor"])
        anaphor = canonicalize_concept(record["anaphor"])
    except EmptyConceptError:
        return "empty-concept"
    if len(anchor.split()) > MAX_SPAN_WORDS or len(anaphor.split()) > MAX_SPAN_WORDS:
        return "span-too-long"
    if anchor == anaphor:
        return "coreference"
    return BridgingRelation(anchor, anaphor, rtype, explanation.strip(), context.strip())


def parse_relations(raw) -> ExtractionReport:
    if isinstance(raw, (bytes, bytearray)):
        raw = bytes(raw).decode("utf-8", errors="replace")
    if not isinstance(raw, str):
        raise MalformedExtractionError(f"expected text, got {type(raw).__name__}")
    doc = _load_document(raw)
    if not isinstance(doc, dict) or "bridging_relations" not in doc:
        raise MalformedExtractionError('reply lacks the top-level "bridging_relations" key')
    records = doc["bridging_relations"]
    if not isinstance(records, list):
        raise MalformedExtractionError('"bridging_relations" must be an array')
    accepted: list[BridgingRelation] = []
    rejected: list[Rejection] = []
    for record in records:
        result = _validate_record(record)
        if isinstance(result, str):
            rejected.append(Rejection(record, result))
        else:
            accepted.append(result)
    return ExtractionReport(tuple(accepted), tuple(rejected), raw)


def extract_bridging_relations(
    transcript: DialogueTranscript, pd: ChatProvider, few_shots=DEFAULT_FEW_SHOTS
) -> ExtractionReport:
    """One extraction call over the whole dialogue, then record-level validation."""
    transcript.validate()
    prompt = build_extraction_prompt(transcript, few_shots)
    raw = pd.complete([ChatMessage("user", prompt)])
    return parse_relations(raw)


def save_relations(path, relations) -> None:
    write_json(path, [r.to_dict() for r in relations])


def load_relations(path) -> list[BridgingRelation]:
    data = read_json(path)
    if not isinstance(data, list):
        raise MalformedExtractionError(f"{path} must hold a JSON array of relations")
    out = []
    for rec in data:
        result = _validate_record(rec)
        if isinstance(result, str):
            raise MalformedExtractionError(f"invalid relation in {path}: {result}: {rec!r}")
        out.append(result)
    return out


def save_report(path, report: ExtractionReport) -> None:
    write_json(path, report.to_dict())


def load_report(path) -> ExtractionReport:
    return ExtractionReport.from_dict(read_json(path))
