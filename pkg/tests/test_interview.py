import json

import pytest

from conftest import scripted
from persona_bridge.errors import MissingFixtureError, ProtocolViolationError, ValidationError
from persona_bridge.interview import (
    QUESTION_SYSTEM_PROMPT,
    DialogueTranscript,
    DialogueTurn,
    choose_topic,
    format_dialogue,
    generate_question,
    load_transcript,
    run_interview,
)
from persona_bridge.providers import CallableProvider, RecordingProvider, ScriptedProvider, TranscriptRecorder
from persona_bridge.schema import render_hidden_prompt, sample_persona


def _opening_messages(topic):
    user = f"Opening topic: {topic}\n\nConversation so far:\n(no questions asked yet)\n\nWrite interviewer question 1."
    return [("system", QUESTION_SYSTEM_PROMPT), ("user", user)]


def test_first_question_replays_fixture():
    pd = scripted([(_opening_messages("free time"), "What did you do last weekend?")])
    history = DialogueTranscript(topic_seed="free time")
    assert generate_question(history, pd) == "What did you do last weekend?"


def test_question_gets_a_question_mark():
    pd = scripted([(_opening_messages("free time"), '"Tell me about your weekend."')])
    assert generate_question(DialogueTranscript(topic_seed="free time"), pd) == "Tell me about your weekend?"


def test_choose_topic_is_seeded():
    assert choose_topic(3) == choose_topic(3)
    with pytest.raises(ValidationError):
        choose_topic(0, ())


def _hidden(schema, seed=5):
    return render_hidden_prompt(sample_persona(schema, seed), schema)


def test_interview_with_simulated_models(schema, sim_pair):
    pd, target = sim_pair()
    t = run_interview(pd, target, _hidden(schema), 4, seed=1)
    assert len(t) == 4
    assert [turn.index for turn in t.turns] == [1, 2, 3, 4]
    assert all(turn.question.endswith("?") for turn in t.turns)


def test_interviewer_never_sees_hidden_prompt(schema, sim_pair):
    recorder = TranscriptRecorder()
    pd, target = sim_pair()
    pd.recorder = target.recorder = recorder
    profile = sample_persona(schema, 11)
    hidden = render_hidden_prompt(profile, schema)
    run_interview(pd, target, hidden, 5, seed=0)
    pd_calls = recorder.by_provider("pd")
    assert len(pd_calls) == 5
    for rec in pd_calls:
        for m in rec.messages:
            assert hidden not in m["content"]
            for (dim, sub), value in profile.assignments.items():
                assert f"{sub}: {value}" not in m["content"]
    # the target sees it on every call
    assert all(rec.messages[0]["content"] == hidden for rec in recorder.by_provider("target"))


def test_three_turn_replay_is_byte_identical(schema, sim_pair, tmp_path):
    hidden = _hidden(schema)
    pd, target = sim_pair()
    rpd = RecordingProvider(pd, tmp_path / "pd.json")
    rtarget = RecordingProvider(target, tmp_path / "target.json")
    run_interview(rpd, rtarget, hidden, 3, seed=2, out_dir=tmp_path / "a")
    run_interview(
        ScriptedProvider.from_file(tmp_path / "pd.json"),
        ScriptedProvider.from_file(tmp_path / "target.json"),
        hidden,
        3,
        seed=2,
        out_dir=tmp_path / "b",
    )
    assert (tmp_path / "a" / "transcript.json").read_bytes() == (tmp_path / "b" / "transcript.json").read_bytes()
    assert load_transcript(tmp_path / "b" / "transcript.json").validate((3, 5))


@pytest.mark.parametrize("n", [0, 2, 6])
def test_turn_bound_under_protocol(schema, sim_pair, n):
    pd, target = sim_pair()
    with pytest.raises(ProtocolViolationError):
        run_interview(pd, target, _hidden(schema), n)


def test_turn_bound_relaxed_outside_protocol(schema, sim_pair):
    pd, target = sim_pair()
    assert len(run_interview(pd, target, _hidden(schema), 6, enforce_turn_range=False)) == 6


def test_partial_transcript_on_failure(schema, sim_pair, tmp_path):
    pd, target = sim_pair()
    calls = {"n": 0}

    def flaky(messages):
        calls["n"] += 1
        if calls["n"] == 3:
            raise MissingFixtureError("deadbeef")
        return target.fn(messages)

    with pytest.raises(MissingFixtureError):
        run_interview(pd, CallableProvider(flaky, "target"), _hidden(schema), 4, out_dir=tmp_path)
    data = json.loads((tmp_path / "transcript.json").read_text())
    assert data["failed"] is True
    assert len(data["turns"]) == 2
    assert (tmp_path / "provider_log.jsonl").exists()


def test_transcript_validation():
    bad = DialogueTranscript((DialogueTurn(2, "q?", "a"),))
    with pytest.raises(ValidationError):
        bad.validate()
    with pytest.raises(ValidationError):
        DialogueTranscript((DialogueTurn(1, "q?", " "),)).validate()
    with pytest.raises(ValidationError):
        DialogueTranscript.from_dict({"turns": [{"index": 1}]})


def test_format_dialogue():
    t = DialogueTranscript((DialogueTurn(1, "Why?", "Because."), DialogueTurn(2, "And?", "So.")))
    assert format_dialogue(t) == "[Turn 1]\nInterviewer: Why?\nRespondent: Because.\n\n[Turn 2]\nInterviewer: And?\nRespondent: So."
    assert DialogueTranscript.from_dict(t.to_dict()) == t
