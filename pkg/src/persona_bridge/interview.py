"""Adaptive interview between the discovering agent and the persona-conditioned target.

The discovering agent only ever sees the question/answer history; the hidden
persona prompt goes to the target alone.
"""

from __future__ import annotations

import logging
import random
import re
from dataclasses import dataclass
from pathlib import Path

from ._io import read_json, sha256_text, write_json
from .errors import PersonaBridgeError, ProtocolViolationError, ValidationError
from .providers import ChatMessage, ChatProvider, TranscriptRecorder

logger = logging.getLogger(__name__)

DEFAULT_TOPICS = ("daily routine", "recent decisions", "free time", "work challenges")
DEFAULT_TURNS = 4
TURN_RANGE = (3, 5)

QUESTION_SYSTEM_PROMPT = """\
You are an interviewer holding a relaxed, open-ended conversation with a person you know nothing about.
Ask exactly one open-ended question per turn. Build on what the person has already said and invite concrete stories, examples and reasons.
Never ask the person to state their occupation, personality type, education, where they live, their family status, hobbies, values or communication style, and never ask them to describe or label themselves.
Reply with the question only."""


@dataclass(frozen=True)
class DialogueTurn:
    index: int
    question: str
    response: str

    def to_dict(self) -> dict:
        return {"index": self.index, "question": self.question, "response": self.response}


@dataclass(frozen=True)
class DialogueTranscript:
    turns: tuple[DialogueTurn, ...] = ()
    topic_seed: str = DEFAULT_TOPICS[0]
    prompt_fingerprint: str = ""
    failed: bool = False
    error: str | None = None

    def __len__(self) -> int:
        return len(self.turns)

    def validate(self, turn_range: tuple[int, int] | None = None) -> "DialogueTranscript":
        for expected, turn in enumerate(self.turns, start=1):
            if turn.index != expected:
                raise ValidationError(f"turn indices must run 1..n, found {turn.index} at position {expected}")
            if not turn.question.strip() or not turn.response.strip():
                raise ValidationError(f"turn {turn.index} has an empty question or response")
        if turn_range is not None:
            lo, hi = turn_range
            if not lo <= len(self.turns) <= hi:
                raise ProtocolViolationError(f"transcript has {len(self.turns)} turns, expected {lo}..{hi}")
        return self

    def responses(self) -> list[str]:
        return [t.response for t in self.turns]

    def to_dict(self) -> dict:
        data = {
            "topic_seed": self.topic_seed,
            "prompt_fingerprint": self.prompt_fingerprint,
            "turns": [t.to_dict() for t in self.turns],
        }
        if self.failed:
            data["failed"] = True
            data["error"] = self.error
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "DialogueTranscript":
        try:
            turns = tuple(DialogueTurn(int(t["index"]), t["question"], t["response"]) for t in data["turns"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed transcript: {exc}") from exc
        return cls(
            turns=turns,
            topic_seed=data.get("topic_seed", ""),
            prompt_fingerprint=data.get("prompt_fingerprint", ""),
            failed=bool(data.get("failed", False)),
            error=data.get("error"),
        )


def format_dialogue(transcript: DialogueTranscript) -> str:
    blocks = []
    for t in transcript.turns:
        blocks.append(f"[Turn {t.index}]\nInterviewer: {t.question}\nRespondent: {t.response}")
    return "\n\n".join(blocks)


def _as_question(text: str) -> str:
    q = " ".join(text.strip().split())
    q = q.strip("\"'“”‘’ ")
    if not q.endswith("?"):
        q = re.sub(r"[\s.!:;,]+$", "", q) + "?"
    return q


def generate_question(history: DialogueTranscript, pd: ChatProvider) -> str:
    if history.turns:
        past = format_dialogue(history)
    else:
        past = "(no questions asked yet)"
    user = (
        f"Opening topic: {history.topic_seed}\n\n"
        f"Conversation so far:\n{past}\n\n"
        f"Write interviewer question {len(history.turns) + 1}."
    )
    reply = pd.complete([ChatMessage("system", QUESTION_SYSTEM_PROMPT), ChatMessage("user", user)])
    return _as_question(reply)


def choose_topic(seed: int, topics=DEFAULT_TOPICS) -> str:
    if not topics:
        raise ValidationError("topic list is empty")
    return random.Random(seed).choice(list(topics))


def _target_messages(hidden_prompt: str, turns, question: str) -> list[ChatMessage]:
    msgs = [ChatMessage("system", hidden_prompt)]
    for t in turns:
        msgs.append(ChatMessage("user", t.question))
        msgs.append(ChatMessage("assistant", t.response))
    msgs.append(ChatMessage("user", question))
    return msgs


def save_transcript(path, transcript: DialogueTranscript):
    return write_json(path, transcript.to_dict())


def load_transcript(path) -> DialogueTranscript:
    return DialogueTranscript.from_dict(read_json(path)).validate()


def run_interview(
    pd: ChatProvider,
    target: ChatProvider,
    hidden_prompt: str,
    n_turns: int = DEFAULT_TURNS,
    *,
    topic_seed: str | None = None,
    seed: int = 0,
    topics=DEFAULT_TOPICS,
    enforce_turn_range: bool = True,
    out_dir=None,
) -> DialogueTranscript:
    """Run ``n_turns`` question/answer rounds.

    With ``out_dir`` the transcript is written to ``transcript.json`` before
    returning; on a provider failure the partial transcript is written with a
    failure marker and the error re-raised.
    """
    lo, hi = TURN_RANGE if enforce_turn_range else (1, 10_000)
    if not lo <= n_turns <= hi:
        raise ProtocolViolationError(f"n_turns={n_turns} outside the allowed range {lo}..{hi}")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        log = TranscriptRecorder(out / "provider_log.jsonl")
        for p in (pd, target):
            if p.recorder is None:
                p.recorder = log

    transcript = DialogueTranscript(
        topic_seed=topic_seed or choose_topic(seed, topics),
        prompt_fingerprint=sha256_text(hidden_prompt),
    )
    turns: list[DialogueTurn] = []
    try:
        for i in range(1, n_turns + 1):
            question = generate_question(transcript, pd)
            response = target.complete(_target_messages(hidden_prompt, turns, question)).strip()
            turns.append(DialogueTurn(i, question, response))
            transcript = DialogueTranscript(tuple(turns), transcript.topic_seed, transcript.prompt_fingerprint)
    except PersonaBridgeError as exc:
        partial = DialogueTranscript(
            tuple(turns), transcript.topic_seed, transcript.prompt_fingerprint, failed=True, error=str(exc)
        )
        if out is not None:
            save_transcript(out / "transcript.json", partial)
        logger.error("interview failed after %d turns: %s", len(turns), exc)
        raise
    if out is not None:
        save_transcript(out / "transcript.json", transcript)
    return transcript
