"""Rule-based stand-ins for the interviewer, target and reasoning models.

They exist to produce fixture files and planted-evidence test suites
without network access. Each schema value owns a small concept cluster: a
hub concept linked to two leaf concepts by typed bridging relations. The
simulated target plants the clusters of its hidden profile into its answers
(one sentence per slot, hub mentioned twice) and, for a seeded subset of
slots, also chats about the *leaf* words of a different value without ever
linking them to that value's hub. Such lexical distractors inflate raw word
counts but never form bridging relations.

Everything here is deterministic in its inputs.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from collections import Counter

from ._io import tokenize
from .extraction import DETERMINERS
from .interview import QUESTION_SYSTEM_PROMPT
from .inference import REASONER_SYSTEM_PROMPT
from .providers import CallableProvider, ChatMessage
from .schema import PersonaSchema, default_schema

# value -> (hub, leaf1, type hub<-leaf1, leaf2, type hub->leaf2)
CUE_CLUSTERS: dict[str, tuple[str, str, str, str, str]] = {
    "Doctor": ("patient", "clinic", "in", "diagnosis", "theme"),
    "Lawyer": ("courtroom", "jury", "member-of", "verdict", "temporal"),
    "Professor": ("lecture", "seminar", "part-of", "syllabus", "theme"),
    "Accountant": ("ledger", "spreadsheet", "instrument", "audit", "cause-of"),
    "Software Engineer": ("codebase", "compiler", "instrument", "bug", "part-of"),
    "Data Scientist": ("dataset", "regression", "instrument", "outlier", "member-of"),
    "Product Manager": ("roadmap", "stakeholder", "theme", "launch", "temporal"),
    "Civil Servant": ("ministry", "paperwork", "in", "regulation", "cause-of"),
    "Police Officer": ("patrol", "suspect", "theme", "badge", "instrument"),
    "Teacher": ("classroom", "pupil", "member-of", "homework", "cause-of"),
    "Openness": ("curiosity", "exhibition", "cause-of", "novelty", "theme"),
    "Conscientiousness": ("checklist", "deadline", "temporal", "planner", "instrument"),
    "Extroversion": ("party", "crowd", "member-of", "dancing", "temporal"),
    "Agreeableness": ("volunteering", "neighbor", "theme", "kindness", "cause-of"),
    "Neuroticism": ("worry", "insomnia", "cause-of", "nightmare", "temporal"),
    "High School": ("diploma", "graduation", "temporal", "locker", "part-of"),
    "Bachelor's": ("undergraduate", "dorm", "in", "major", "theme"),
    "Master's": ("thesis", "capstone", "part-of", "supervisor", "theme"),
    "Ph.D.": ("dissertation", "laboratory", "in", "postdoc", "temporal"),
    "Urban": ("subway", "skyscraper", "in", "commute", "instrument"),
    "Rural": ("farm", "tractor", "instrument", "barn", "part-of"),
    "Single": ("dating", "app", "instrument", "match", "cause-of"),
    "Married": ("spouse", "wedding", "temporal", "anniversary", "temporal"),
    "Living Alone": ("apartment", "solitude", "in", "houseplant", "part-of"),
    "Reading": ("novel", "bookshelf", "in", "chapter", "part-of"),
    "Traveling": ("passport", "airport", "in", "itinerary", "theme"),
    "Gaming": ("console", "controller", "part-of", "tournament", "temporal"),
    "Creativity": ("sketchbook", "inspiration", "cause-of", "canvas", "instrument"),
    "Family": ("grandparents", "reunion", "member-of", "tradition", "theme"),
    "Integrity": ("honesty", "promise", "theme", "trust", "cause-of"),
    "Direct": ("feedback", "bluntness", "cause-of", "agenda", "theme"),
    "Emotional": ("feelings", "tears", "cause-of", "empathy", "theme"),
}

QUESTION_BANK = (
    "Walk me through how {topic} usually looks for you, starting from the first thing that comes to mind?",
    "What was the most memorable part of that, and why did it stick with you?",
    "When something goes wrong in a situation like that, how do you usually handle it?",
    "Who or what tends to shape your choices in moments like these?",
    "If you could change one thing about how your days unfold, what would it be?",
)

DISTRACTOR_SLOTS = 3


def cue_words(value: str) -> set[str]:
    hub, leaf1, _, leaf2, _ = CUE_CLUSTERS[value]
    return {hub, leaf1, leaf2}


def cluster_triples(value: str) -> list[tuple[str, str, str]]:
    hub, leaf1, t1, leaf2, t2 = CUE_CLUSTERS[value]
    return [(leaf1, hub, t1), (hub, leaf2, t2)]


def _planted_sentence(value: str) -> str:
    hub, leaf1, _, leaf2, _ = CUE_CLUSTERS[value]
    return f"These days the {leaf1} keeps pulling me back to the {hub}, and the {hub} always ends with the {leaf2}."


def _distractor_sentence(value: str) -> str:
    _, leaf1, _, leaf2, _ = CUE_CLUSTERS[value]
    return (
        f"Unrelated, but my roommate never stops chatting about {leaf1} gossip: "
        f"{leaf1} this, {leaf2} that, more {leaf1} and {leaf2} talk."
    )


def _parse_hidden_prompt(text: str, schema: PersonaSchema) -> dict[tuple[str, str], str]:
    wanted = {}
    for dim, sub in schema.slots():
        m = re.search(rf"^- {re.escape(sub)}: (.+)$", text, re.MULTILINE)
        if m:
            wanted[(dim, sub)] = m.group(1).strip()
    return wanted


def _distractors(profile: dict, schema: PersonaSchema, hidden_prompt: str) -> dict[int, str]:
    """slot position -> distractor value, chosen from the prompt hash."""
    seed = int(hashlib.sha256(hidden_prompt.encode("utf-8")).hexdigest()[:12], 16)
    rng = random.Random(seed)
    slots = schema.slots()
    chosen = sorted(rng.sample(range(len(slots)), min(DISTRACTOR_SLOTS, len(slots))))
    out = {}
    for j in chosen:
        dim, sub = slots[j]
        others = [v for v in schema.allowed(dim, sub) if v != profile.get((dim, sub)) and v in CUE_CLUSTERS]
        if others:
            out[j] = rng.choice(others)
    return out


class SimulatedLLM:
    """Routes a message list to the matching rule-based role.

    ``extraction_payload`` replaces the extractor's output with a fixed JSON
    reply; ``distractors`` toggles the lexical distractor chatter.
    """

    def __init__(
        self,
        schema: PersonaSchema | None = None,
        extraction_payload: str | None = None,
        distractors: bool = True,
        noise_records: bool = True,
    ):
        self.schema = schema or default_schema()
        self.extraction_payload = extraction_payload
        self.distractors = distractors
        self.noise_records = noise_records

    def __call__(self, messages: list[ChatMessage]) -> str:
        first = messages[0]
        if first.role == "system" and first.content == QUESTION_SYSTEM_PROMPT:
            return self.ask(messages[-1].content)
        if first.role == "system" and first.content == REASONER_SYSTEM_PROMPT:
            return self.reason(messages[-1].content)
        if first.role == "user" and first.content.startswith("TASK"):
            return self.extract(first.content)
        if first.role == "system":
            return self.answer(first.content, messages)
        raise ValueError("simulated model cannot route this message list")

    def ask(self, prompt: str) -> str:
        topic = re.search(r"Opening topic: (.+)", prompt)
        n_asked = len(re.findall(r"^\[Turn \d+\]", prompt, re.MULTILINE))
        template = QUESTION_BANK[n_asked % len(QUESTION_BANK)]
        return template.format(topic=topic.group(1).strip() if topic else "your week")

    def answer(self, hidden_prompt: str, messages: list[ChatMessage]) -> str:
        profile = _parse_hidden_prompt(hidden_prompt, self.schema)
        turn = sum(1 for m in messages if m.role == "user")
        slots = self.schema.slots()
        distract = _distractors(profile, self.schema, hidden_prompt) if self.distractors else {}
        sentences = ["That is a good question."]
        for j, slot in enumerate(slots):
            if j % 3 + 1 != turn:
                continue
            value = profile.get(slot)
            if value in CUE_CLUSTERS:
                sentences.append(_planted_sentence(value))
            if j in distract:
                sentences.append(_distractor_sentence(distract[j]))
        if len(sentences) == 1:
            sentences.append("Honestly, not much else comes to mind right now.")
        return " ".join(sentences)

    def extract(self, prompt: str) -> str:
        if self.extraction_payload is not None:
            return self.extraction_payload
        convo = prompt.split("\nCONVERSATION\n", 1)[-1]
        records = []
        seen = set()
        for line in convo.splitlines():
            if not line.startswith("Respondent: "):
                continue
            for sentence in re.split(r"(?<=[.!?])\s+", line[len("Respondent: "):]):
                toks = set(tokenize(sentence))
                for value in CUE_CLUSTERS:
                    for a, b, t in cluster_triples(value):
                        if a in toks and b in toks and (a, b, t) not in seen:
                            seen.add((a, b, t))
                            records.append(
                                {
                                    "anchor": a,
                                    "anaphor": b,
                                    "relation_type": t,
                                    "explanation": f"The {b} is read through the {a} frame.",
                                    "sentence_context": sentence,
                                }
                            )
        if self.noise_records and records:
            hub = records[0]["anaphor"]
            records.append(
                {"anchor": hub, "anaphor": f"the {hub}", "relation_type": "theme", "explanation": "same", "sentence_context": ""}
            )
            records.append(
                {
                    "anchor": "the thing I mentioned before",
                    "anaphor": hub,
                    "relation_type": "in",
                    "explanation": "too long",
                    "sentence_context": "",
                }
            )
        return json.dumps({"bridging_relations": records}, ensure_ascii=False)

    def reason(self, prompt: str) -> str:
        sections = _sections(prompt)
        scores: Counter = Counter()
        if "BRIDGING GRAPH SUMMARY" in sections:
            for m in re.finditer(r"^\d+\. (.+): ([0-9.]+)$", sections["BRIDGING GRAPH SUMMARY"], re.MULTILINE):
                for value in CUE_CLUSTERS:
                    if m.group(1) in cue_words(value):
                        scores[value] += float(m.group(2))
        else:
            freq = next((body for title, body in sections.items() if title.startswith("TOKEN FREQUENCIES")), None)
            if freq is not None:
                counts = Counter({k: int(v) for k, v in re.findall(r"^(\S+): (\d+)$", freq, re.MULTILINE)})
            else:
                counts = Counter(
                    tok
                    for line in sections.get("DIALOGUE", "").splitlines()
                    if line.startswith("Respondent: ")
                    for tok in tokenize(line)
                )
            for value in CUE_CLUSTERS:
                scores[value] += sum(counts[w] for w in cue_words(value))
        answer: dict[str, dict[str, str]] = {}
        for dim, sub in self.schema.slots():
            allowed = self.schema.allowed(dim, sub)
            best = max(allowed, key=lambda v: (scores.get(v, 0.0), -allowed.index(v)))
            answer.setdefault(dim, {})[sub] = best
        return json.dumps(answer, ensure_ascii=False)


_SECTION_TITLES = ("SCHEMA", "DIALOGUE", "TOKEN FREQUENCIES", "BRIDGING GRAPH SUMMARY", "ANSWER FORMAT")


def _sections(prompt: str) -> dict[str, str]:
    out: dict[str, list[str]] = {}
    current = None
    for line in prompt.splitlines():
        if any(line.startswith(t) for t in _SECTION_TITLES):
            current = line.strip()
            if current.startswith("SCHEMA"):
                current = "SCHEMA"
            out[current] = []
        elif current is not None:
            out[current].append(line)
    return {k: "\n".join(v) for k, v in out.items()}


def simulated_providers(sim: SimulatedLLM | None = None, recorder=None) -> tuple[CallableProvider, CallableProvider]:
    """(pd, target) providers backed by one :class:`SimulatedLLM`."""
    sim = sim or SimulatedLLM()
    return (
        CallableProvider(sim, name="pd", recorder=recorder),
        CallableProvider(sim, name="target", recorder=recorder),
    )


def _check_clusters() -> None:
    words = [w for c in CUE_CLUSTERS.values() for w in (c[0], c[1], c[3])]
    dupes = [w for w, n in Counter(words).items() if n > 1]
    assert not dupes, dupes
    assert not DETERMINERS & set(words)


_check_clusters()
