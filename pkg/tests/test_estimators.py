import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from persona_bridge.errors import ValidationError
from persona_bridge.estimators import BridgingGraphBuilder, GraphFeaturizer, PersonaDiscoverer
from persona_bridge.extraction import BridgingRelation
from persona_bridge.interview import run_interview
from persona_bridge.providers import CallableProvider
from persona_bridge.schema import render_hidden_prompt, sample_persona
from persona_bridge.simulation import SimulatedLLM
from persona_bridge.taxonomy import RelationType


@pytest.fixture
def corpus(schema):
    sim = SimulatedLLM()
    pd, target = CallableProvider(sim, "pd"), CallableProvider(sim, "target")
    truths = [sample_persona(schema, s) for s in range(4)]
    X = [run_interview(pd, target, render_hidden_prompt(t, schema), 3, seed=i) for i, t in enumerate(truths)]
    return X, truths, sim


def test_get_params_and_clone():
    est = PersonaDiscoverer(strategy="vanilla")
    assert est.get_params()["strategy"] == "vanilla"
    c = clone(est)
    assert c.get_params() == est.get_params() and c is not est


def test_fit_predict_score(corpus):
    X, truths, sim = corpus
    est = PersonaDiscoverer(reasoner=CallableProvider(sim, "pd")).fit(X, truths)
    preds = est.predict(X)
    assert len(preds) == 4
    assert preds == truths
    assert est.score(X, truths) == pytest.approx(1.0)


def test_vanilla_is_weaker_on_distractors(corpus):
    X, truths, sim = corpus
    pd_score = PersonaDiscoverer(CallableProvider(sim), "pd_agent").fit(X).score(X, truths)
    vanilla_score = PersonaDiscoverer(CallableProvider(sim), "vanilla").fit(X).score(X, truths)
    assert pd_score >= vanilla_score


def test_fit_requires_reasoner_and_valid_input(corpus, schema):
    X, truths, _ = corpus
    with pytest.raises(ValidationError):
        PersonaDiscoverer().fit(X)
    with pytest.raises(ValidationError):
        PersonaDiscoverer(CallableProvider(lambda m: "{}")).fit(X, truths[:2])
    with pytest.raises(ValidationError):
        PersonaDiscoverer(CallableProvider(lambda m: "{}")).fit(X[0])
    with pytest.raises(ValueError):
        PersonaDiscoverer(CallableProvider(lambda m: "{}"), strategy="guess").fit(X)


def test_graph_pipeline_features():
    rels = [
        [BridgingRelation("car", "engine", RelationType.PART_OF), BridgingRelation("cut", "knife", RelationType.INSTRUMENT)],
        [],
    ]
    pipe = make_pipeline(BridgingGraphBuilder(), GraphFeaturizer())
    F = pipe.fit_transform(rels)
    assert F.shape == (2, 11)
    names = list(pipe[-1].get_feature_names_out())
    assert F[0, names.index("frac_part-of")] == 0.5
    assert F[0, names.index("frac_Mereological")] == 0.5
    assert F[0, names.index("n_nodes")] == 4
    np.testing.assert_array_equal(F[1], np.zeros(11))
