"""Directed, relation-labeled concept graph and normalized degree centrality.

Nodes are canonical concept labels; each accepted relation contributes one
edge anchor -> anaphor. Identical (source, target, type) assertions collapse
to a single edge, while parallel edges with different types are kept.

A node's importance is its total degree (in + out) divided by the largest
total degree in the graph. A graph without edges has importance 0 everywhere.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

from ._io import atomic_write, read_json
from .errors import UnknownNodeError, ValidationError
from .extraction import BridgingRelation
from .taxonomy import RELATION_TYPES, RelationClass, RelationType, parse_relation_type, relation_class


@dataclass(frozen=True, order=True)
class Edge:
    source: str
    target: str
    type: RelationType
    provenance: int = field(default=-1, compare=False)

    def key(self) -> tuple[str, str, str]:
        return (self.source, self.target, self.type.value)


@dataclass(frozen=True)
class SemanticGraph:
    nodes: tuple[str, ...] = ()
    edges: tuple[Edge, ...] = ()
    degrees: dict[str, int] = field(default_factory=dict)
    importances: dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_edges(cls, nodes: Iterable[str], edges: Iterable[Edge]) -> "SemanticGraph":
        unique: dict[tuple, Edge] = {}
        for e in edges:
            unique.setdefault(e.key(), e)
        edge_list = tuple(sorted(unique.values(), key=Edge.key))
        node_set = set(nodes)
        for e in edge_list:
            node_set.add(e.source)
            node_set.add(e.target)
        degrees = Counter({n: 0 for n in node_set})
        for e in edge_list:
            degrees[e.source] += 1
            degrees[e.target] += 1
        top = max(degrees.values(), default=0)
        importances = {n: (d / top if top else 0.0) for n, d in degrees.items()}
        return cls(tuple(sorted(node_set)), edge_list, dict(degrees), importances)

    def __contains__(self, label: str) -> bool:
        return label in self.degrees

    def degree(self, v: str) -> int:
        try:
            return self.degrees[v]
        except KeyError:
            raise UnknownNodeError(v) from None


def build_graph(relations: Iterable[BridgingRelation]) -> SemanticGraph:
    edges = [
        Edge(r.anchor, r.anaphor, r.relation_type, provenance=i) for i, r in enumerate(relations)
    ]
    return SemanticGraph.from_edges((), edges)


def importance(g: SemanticGraph, v: str) -> float:
    try:
        return g.importances[v]
    except KeyError:
        raise UnknownNodeError(v) from None


def relation_distribution(g: SemanticGraph) -> dict[RelationType, tuple[int, float]]:
    counts = Counter(e.type for e in g.edges)
    total = len(g.edges)
    return {t: (counts[t], counts[t] / total if total else 0.0) for t in RELATION_TYPES}


def class_balance(g: SemanticGraph) -> dict[RelationClass, float]:
    total = len(g.edges)
    counts = Counter(relation_class(e.type) for e in g.edges)
    return {c: (counts[c] / total if total else 0.0) for c in RelationClass}


def top_hubs(g: SemanticGraph, k: int) -> list[tuple[str, float]]:
    if k < 1:
        raise ValidationError("k must be a positive integer")
    ranked = sorted(g.importances.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:k]


def _graph_dict(g: SemanticGraph) -> dict:
    return {
        "nodes": [{"label": n, "importance": g.importances[n]} for n in g.nodes],
        "edges": [{"source": e.source, "target": e.target, "type": e.type.value} for e in g.edges],
    }


def _dot_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _to_dot(g: SemanticGraph) -> str:
    lines = ["digraph bridging {", "  node [shape=ellipse];"]
    for n in g.nodes:
        w = g.importances[n]
        lines.append(
            f"  {_dot_quote(n)} [label={_dot_quote(f'{n} ({w:.2f})')}, "
            f"fontsize={10 + 10 * w:.1f}, penwidth={1 + 2 * w:.2f}];"
        )
    for e in g.edges:
        lines.append(f"  {_dot_quote(e.source)} -> {_dot_quote(e.target)} [label={_dot_quote(e.type.value)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_graph(g: SemanticGraph, format: str = "canonical-json") -> str:
    if format in ("canonical-json", "json"):
        return json.dumps(_graph_dict(g), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    if format == "dot":
        return _to_dot(g)
    raise ValidationError(f"unknown export format {format!r}")


def save_graph(path, g: SemanticGraph, format: str = "canonical-json"):
    return atomic_write(path, export_graph(g, format))


def graph_from_dict(data: dict) -> SemanticGraph:
    try:
        nodes = [n["label"] for n in data["nodes"]]
        edges = [Edge(e["source"], e["target"], parse_relation_type(e["type"])) for e in data["edges"]]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed graph document: {exc}") from exc
    return SemanticGraph.from_edges(nodes, edges)


def load_graph(path) -> SemanticGraph:
    return graph_from_dict(read_json(path))
