"""scikit-learn style wrappers so the pipeline composes with ``Pipeline``, ``clone`` and friends.

``X`` is a sequence of :class:`DialogueTranscript` (or transcript dicts),
``y`` a sequence of :class:`PersonaProfile`.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import ValidationError
from .evaluation import score_prediction
from .extraction import BridgingRelation, ExtractionReport, extract_bridging_relations
from .graph import SemanticGraph, build_graph, class_balance, relation_distribution
from .inference import InferenceStrategy, infer
from .interview import DialogueTranscript, TURN_RANGE
from .providers import HashingEmbedder
from .schema import PersonaProfile, PersonaSchema, default_schema
from .taxonomy import RELATION_TYPES, RelationClass


def check_transcripts(X, enforce_turn_range: bool = False) -> list[DialogueTranscript]:
    if isinstance(X, (DialogueTranscript, dict, str)) or X is None:
        raise ValidationError("X must be a sequence of transcripts")
    out = []
    for item in X:
        if isinstance(item, dict):
            item = DialogueTranscript.from_dict(item)
        if not isinstance(item, DialogueTranscript):
            raise ValidationError(f"expected DialogueTranscript, got {type(item).__name__}")
        item.validate(TURN_RANGE if enforce_turn_range else None)
        if not item.turns:
            raise ValidationError("transcript has no turns")
        out.append(item)
    if not out:
        raise ValidationError("X is empty")
    return out


def check_relation_sets(X) -> list[list[BridgingRelation]]:
    out = []
    for item in X:
        if isinstance(item, ExtractionReport):
            item = item.accepted
        rels = list(item)
        for r in rels:
            if not isinstance(r, BridgingRelation):
                raise ValidationError(f"expected BridgingRelation, got {type(r).__name__}")
        out.append(rels)
    return out


def check_profiles(y, schema: PersonaSchema, n: int | None = None) -> list[PersonaProfile]:
    profiles = list(y)
    if n is not None and len(profiles) != n:
        raise ValidationError(f"y has {len(profiles)} profiles for {n} samples")
    for p in profiles:
        if not isinstance(p, PersonaProfile):
            raise ValidationError(f"expected PersonaProfile, got {type(p).__name__}")
        p.validate(schema)
    return profiles


class BridgingGraphBuilder(TransformerMixin, BaseEstimator):
    """Relation sets (or extraction reports) -> :class:`SemanticGraph` objects. Stateless."""

    def fit(self, X, y=None):
        check_relation_sets(X)
        self.n_samples_seen_ = len(X)
        return self

    def transform(self, X) -> list[SemanticGraph]:
        return [build_graph(rels) for rels in check_relation_sets(X)]


class GraphFeaturizer(TransformerMixin, BaseEstimator):
    """Numeric structure features of bridging graphs.

    Columns: the fraction of each of the seven relation types, the two
    relation-class fractions, node count and edge count.
    """

    def fit(self, X, y=None):
        self.n_features_out_ = len(RELATION_TYPES) + len(RelationClass) + 2
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "n_features_out_")
        rows = []
        for g in X:
            if not isinstance(g, SemanticGraph):
                raise ValidationError(f"expected SemanticGraph, got {type(g).__name__}")
            dist = relation_distribution(g)
            bal = class_balance(g)
            rows.append(
                [dist[t][1] for t in RELATION_TYPES]
                + [bal[c] for c in RelationClass]
                + [float(len(g.nodes)), float(len(g.edges))]
            )
        return np.asarray(rows, dtype=float).reshape(len(rows), self.n_features_out_)

    def get_feature_names_out(self, input_features=None):
        names = [f"frac_{t.value}" for t in RELATION_TYPES]
        names += [f"frac_{c.value}" for c in RelationClass] + ["n_nodes", "n_edges"]
        return np.asarray(names, dtype=object)


class PersonaDiscoverer(BaseEstimator):
    """Predict hidden personas from interview transcripts.

    Parameters
    ----------
    reasoner : ChatProvider
        Model that answers the inference prompt (and, by default, extracts
        bridging relations).
    strategy : {"pd_agent", "vanilla", "frequency_aware"}
    extractor : ChatProvider, optional
        Separate model for relation extraction; defaults to ``reasoner``.
    schema : PersonaSchema, optional
        Defaults to the built-in four-dimension schema.
    embedder : object with ``embed(texts)``, optional
        Used by :meth:`score`; defaults to :class:`HashingEmbedder`.
    """

    def __init__(self, reasoner=None, strategy="pd_agent", extractor=None, schema=None, embedder=None):
        self.reasoner = reasoner
        self.strategy = strategy
        self.extractor = extractor
        self.schema = schema
        self.embedder = embedder

    def fit(self, X, y=None):
        if self.reasoner is None:
            raise ValidationError("PersonaDiscoverer needs a reasoner provider")
        self.strategy_ = InferenceStrategy(self.strategy)
        self.schema_ = (self.schema or default_schema()).validate()
        X = check_transcripts(X)
        if y is not None:
            check_profiles(y, self.schema_, len(X))
        self.n_samples_seen_ = len(X)
        return self

    def graphs(self, X) -> list[SemanticGraph]:
        """Bridging graphs for each transcript (one extraction call each)."""
        check_is_fitted(self, "schema_")
        extractor = self.extractor or self.reasoner
        return [build_graph(extract_bridging_relations(t, extractor).accepted) for t in check_transcripts(X)]

    def predict(self, X) -> list[PersonaProfile]:
        check_is_fitted(self, "schema_")
        X = check_transcripts(X)
        if self.strategy_ is InferenceStrategy.PD_AGENT:
            return [infer(self.strategy_, self.schema_, self.reasoner, graph=g) for g in self.graphs(X)]
        return [infer(self.strategy_, self.schema_, self.reasoner, transcript=t) for t in X]

    def score(self, X, y: Sequence[PersonaProfile]) -> float:
        """Mean overall cosine similarity between predictions and ``y``."""
        preds = self.predict(X)
        truths = check_profiles(y, self.schema_, len(preds))
        embedder = self.embedder or HashingEmbedder()
        scores = [score_prediction(p, t, embedder, self.schema_).overall for p, t in zip(preds, truths)]
        return float(np.mean(scores))
