import json
import os
import stat

import pytest

from persona_bridge._io import atomic_write, canonical_json, tokenize
from persona_bridge.extraction import build_extraction_prompt, parse_relations
from persona_bridge.interview import run_interview
from persona_bridge.providers import CallableProvider, ChatMessage
from persona_bridge.schema import render_hidden_prompt, sample_persona
from persona_bridge.simulation import CUE_CLUSTERS, SimulatedLLM, cluster_triples, cue_words


def test_every_schema_value_has_a_cluster(schema):
    values = {v for d, s in schema.slots() for v in schema.allowed(d, s)}
    assert values == set(CUE_CLUSTERS)
    assert all(len(cue_words(v)) == 3 for v in values)


def test_target_plants_its_truth(schema):
    sim = SimulatedLLM(schema, distractors=False)
    truth = sample_persona(schema, 21)
    p = CallableProvider(sim)
    t = run_interview(p, p, render_hidden_prompt(truth, schema), 3)
    said = set(tokenize(" ".join(t.responses())))
    for value in truth.assignments.values():
        assert cue_words(value) <= said


def test_extractor_reports_cluster_triples_and_noise(schema):
    sim = SimulatedLLM(schema)
    truth = sample_persona(schema, 4)
    p = CallableProvider(sim)
    t = run_interview(p, p, render_hidden_prompt(truth, schema), 3)
    report = parse_relations(sim([ChatMessage("user", build_extraction_prompt(t))]))
    got = {(r.anchor, r.anaphor, r.relation_type.value) for r in report.accepted}
    expected = {tr for v in truth.assignments.values() for tr in cluster_triples(v)}
    assert got == expected
    assert sorted(r.reason for r in report.rejected) == ["coreference", "span-too-long"]


def test_unroutable_messages():
    with pytest.raises(ValueError):
        SimulatedLLM()([ChatMessage("user", "hello")])


def test_fixed_extraction_payload():
    payload = json.dumps({"bridging_relations": []})
    assert SimulatedLLM(extraction_payload=payload)([ChatMessage("user", "TASK: anything")]) == payload


def test_atomic_write_mode_and_content(tmp_path):
    path = atomic_write(tmp_path / "sub" / "x.json", canonical_json({"b": 1, "a": [2]}))
    assert path.read_text() == '{\n  "a": [\n    2\n  ],\n  "b": 1\n}\n'
    mask = os.umask(0)
    os.umask(mask)
    assert stat.S_IMODE(os.stat(path).st_mode) == 0o666 & ~mask
    assert [p.name for p in path.parent.iterdir()] == ["x.json"]


def test_tokenize():
    assert tokenize("I'm at the Doctor's, 2 times!") == ["i'm", "at", "the", "doctor's", "2", "times"]
