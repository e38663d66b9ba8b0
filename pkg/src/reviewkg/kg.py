"""Property-graph construction from annotated reviews.

Nodes are deduplicated on (entity type, canonical label); edges are unique
per (source, relation, target). Both accumulate the ids of the reviews
that support them, so incremental builds and one-shot builds converge to
the same graph.

Linking is review-scoped: every issue in a review RAISES every concern of
that review, and every requirement ADDRESSES every concern of that review.
Concern spans resolve to concern categories through a lexicon of surface
phrases; when the lexicon misses, the review's own labels are used, and as
a last resort the span text itself becomes an uncategorized concern node.
"""

from __future__ import annotations

import hashlib
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

from reviewkg.annotation import AnnotatedReview
from reviewkg.corpus import DEFAULT_CONCERN_TYPES
from reviewkg.errors import (
    EmptyAfterNormalization,
    IntegrityError,
    ParseError,
    SchemaMismatch,
    SchemaViolation,
    UnknownRelation,
)
from reviewkg.ontology import (
    OntologySchema,
    RelationType,
    _build_schema,
    default_schema,
    validate_triple,
)

GRAPH_HEADER = "reviewkg-graph\t1"

UNCATEGORIZED = "uncategorized"

SPAN_KIND_TO_TYPE = {"EC": "EthicalConcern", "I": "Issue", "R": "Requirement"}


def _basic_normalize(surface: str) -> str:
    folded = " ".join(surface.casefold().split())
    start, end = 0, len(folded)
    while start < end and not folded[start].isalnum():
        start += 1
    while end > start and not folded[end - 1].isalnum():
        end -= 1
    return folded[start:end]


def canonicalize_label(surface: str, aliases: dict[str, str] | None = None) -> str:
    """Normalize a surface form: lowercase, trim, collapse whitespace,
    strip surrounding punctuation, then apply one exact alias lookup."""
    normalized = _basic_normalize(surface)
    if not normalized:
        raise EmptyAfterNormalization(f"label {surface!r} is empty after normalization")
    if aliases and normalized in aliases:
        normalized = _basic_normalize(aliases[normalized])
        if not normalized:
            raise EmptyAfterNormalization(f"alias target for {surface!r} is empty")
    return normalized


def node_id_for(entity_type: str, canonical: str) -> str:
    digest = hashlib.sha1(f"{entity_type}\x1f{canonical}".encode("utf-8"))
    return digest.hexdigest()[:16]


@dataclass
class Node:
    id: str
    type: str
    label: str
    canonical: str
    provenance: set[str] = field(default_factory=set)
    flags: set[str] = field(default_factory=set)


@dataclass
class Edge:
    source: str
    relation: str
    target: str
    provenance: set[str] = field(default_factory=set)

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.source, self.relation, self.target)


@dataclass
class GraphStats:
    node_count: int
    edge_count: int
    per_type: dict[str, int]
    requirement_count: int


class KnowledgeGraph:
    def __init__(
        self,
        schema: OntologySchema | None = None,
        aliases: dict[str, str] | None = None,
    ):
        self.schema = schema or default_schema()
        self.aliases = dict(aliases or {})
        self.nodes: dict[str, Node] = {}
        self.edges: dict[tuple[str, str, str], Edge] = {}

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, KnowledgeGraph)
            and self.schema == other.schema
            and self.aliases == other.aliases
            and self.nodes == other.nodes
            and self.edges == other.edges
        )

    def find_node(self, entity_type: str, label: str) -> Node | None:
        canonical = canonicalize_label(label, self.aliases)
        return self.nodes.get(node_id_for(entity_type, canonical))

    def upsert_node(
        self, entity_type: str, label: str, review_id: str, flags: set[str] | None = None
    ) -> str:
        """Insert or update the node identified by (type, canonical label).

        Provenance and flags accumulate. The display label is chosen
        order-independently (lexicographic minimum of all candidates) so
        merges commute; when an alias rewrote the surface form, the alias
        target itself is the display candidate.
        """
        canonical = canonicalize_label(label, self.aliases)
        display = " ".join(label.split())
        if _basic_normalize(label) != canonical:
            display = canonical
        nid = node_id_for(entity_type, canonical)
        node = self.nodes.get(nid)
        if node is None:
            node = Node(id=nid, type=entity_type, label=display, canonical=canonical)
            self.nodes[nid] = node
        else:
            node.label = min(node.label, display)
        node.provenance.add(review_id)
        if flags:
            node.flags.update(flags)
        return nid

    def add_edge(self, source_id: str, relation: str, target_id: str, review_id: str) -> tuple[str, str, str]:
        if source_id not in self.nodes or target_id not in self.nodes:
            raise IntegrityError("edge endpoint missing from graph")
        src, dst = self.nodes[source_id], self.nodes[target_id]
        try:
            ok, reason = validate_triple(self.schema, src.type, relation, dst.type)
        except UnknownRelation as exc:
            raise SchemaViolation(str(exc)) from exc
        if not ok:
            raise SchemaViolation(reason)
        key = (source_id, relation, target_id)
        edge = self.edges.get(key)
        if edge is None:
            edge = Edge(source=source_id, relation=relation, target=target_id)
            self.edges[key] = edge
        edge.provenance.add(review_id)
        return key

    def stats(self) -> GraphStats:
        per_type: dict[str, int] = {}
        for node in self.nodes.values():
            per_type[node.type] = per_type.get(node.type, 0) + 1
        return GraphStats(
            node_count=len(self.nodes),
            edge_count=len(self.edges),
            per_type=per_type,
            requirement_count=per_type.get("Requirement", 0),
        )

    def check_integrity(self) -> None:
        """Raise IntegrityError on any broken graph invariant."""
        seen_keys: set[tuple[str, str]] = set()
        for nid, node in self.nodes.items():
            if nid != node.id or nid != node_id_for(node.type, node.canonical):
                raise IntegrityError(f"node id {nid} does not match its identity")
            dedup_key = (node.type, node.canonical)
            if dedup_key in seen_keys:
                raise IntegrityError(f"duplicate node for {dedup_key}")
            seen_keys.add(dedup_key)
            if not node.provenance:
                raise IntegrityError(f"node {nid} has empty provenance")
        for key, edge in self.edges.items():
            if key != edge.key:
                raise IntegrityError("edge stored under wrong key")
            if edge.source not in self.nodes or edge.target not in self.nodes:
                raise IntegrityError(f"dangling edge {key}")
            src, dst = self.nodes[edge.source], self.nodes[edge.target]
            try:
                ok, reason = validate_triple(self.schema, src.type, edge.relation, dst.type)
            except UnknownRelation as exc:
                raise IntegrityError(str(exc)) from exc
            if not ok:
                raise IntegrityError(reason)
            if not edge.provenance:
                raise IntegrityError(f"edge {key} has empty provenance")


def build_concern_lexicon(
    vocabulary: tuple[str, ...] = DEFAULT_CONCERN_TYPES,
    extra: dict[str, str] | None = None,
) -> dict[str, str]:
    """Map normalized surface phrases to concern category names.

    Category names always map to themselves; extra entries extend or
    override the defaults.
    """
    lexicon = {_basic_normalize(name): name for name in vocabulary}
    for surface, category in (extra or {}).items():
        lexicon[_basic_normalize(surface)] = category
    return lexicon


def resolve_concern(
    span_surface: str,
    review_labels: frozenset[str] | set[str],
    lexicon: dict[str, str],
    aliases: dict[str, str] | None = None,
) -> list[tuple[str, set[str]]]:
    """Resolve one concern span to (category label, node flags) pairs.

    Exact lexicon hit wins; otherwise all review-level labels apply;
    otherwise the span itself becomes an uncategorized concern.
    """
    canonical = canonicalize_label(span_surface, aliases)
    if canonical in lexicon:
        return [(lexicon[canonical], set())]
    if review_labels:
        return [(label, set()) for label in sorted(review_labels)]
    return [(canonical, {UNCATEGORIZED})]


def link_review(
    graph: KnowledgeGraph,
    annotated: AnnotatedReview,
    concern_lexicon: dict[str, str] | None = None,
) -> tuple[list[str], list[tuple[str, str, str]]]:
    """Link one annotated review into the graph; returns touched node and
    edge ids. The app node is always upserted, even for span-less reviews."""
    lexicon = concern_lexicon if concern_lexicon is not None else build_concern_lexicon()
    review = annotated.review
    node_ids: list[str] = []
    edge_keys: list[tuple[str, str, str]] = []

    app_id = graph.upsert_node("App", review.app, review.id)
    node_ids.append(app_id)

    spans_by_kind: dict[str, list[str]] = {"EC": [], "I": [], "R": []}
    for _, span in annotated.all_spans():
        spans_by_kind[span.kind].append(span.surface)

    concern_ids: list[str] = []
    for surface in spans_by_kind["EC"]:
        for label, flags in resolve_concern(
            surface, review.concern_labels, lexicon, graph.aliases
        ):
            cid = graph.upsert_node("EthicalConcern", label, review.id, flags=flags)
            if cid not in concern_ids:
                concern_ids.append(cid)
            node_ids.append(cid)
            edge_keys.append(graph.add_edge(app_id, "HAVING", cid, review.id))

    for surface in spans_by_kind["I"]:
        iid = graph.upsert_node("Issue", surface, review.id)
        node_ids.append(iid)
        edge_keys.append(graph.add_edge(app_id, "HAS_ISSUE", iid, review.id))
        for cid in concern_ids:
            edge_keys.append(graph.add_edge(iid, "RAISES", cid, review.id))

    for surface in spans_by_kind["R"]:
        rid = graph.upsert_node("Requirement", surface, review.id)
        node_ids.append(rid)
        for cid in concern_ids:
            edge_keys.append(graph.add_edge(rid, "ADDRESSES", cid, review.id))

    return node_ids, edge_keys


def merge_graphs(base: KnowledgeGraph, increment: KnowledgeGraph) -> KnowledgeGraph:
    """Union two graphs built against the same schema and alias map.

    Commutative and associative: node/edge identities dedup, provenance
    and flags union, display labels take the lexicographic minimum.
    """
    if base.schema != increment.schema:
        raise SchemaMismatch("graphs use different schemas")
    if base.aliases != increment.aliases:
        raise SchemaMismatch("graphs use different alias maps")
    merged = KnowledgeGraph(schema=base.schema, aliases=base.aliases)
    for source in (base, increment):
        for node in source.nodes.values():
            existing = merged.nodes.get(node.id)
            if existing is None:
                merged.nodes[node.id] = Node(
                    id=node.id,
                    type=node.type,
                    label=node.label,
                    canonical=node.canonical,
                    provenance=set(node.provenance),
                    flags=set(node.flags),
                )
            else:
                existing.label = min(existing.label, node.label)
                existing.provenance.update(node.provenance)
                existing.flags.update(node.flags)
        for edge in source.edges.values():
            existing_edge = merged.edges.get(edge.key)
            if existing_edge is None:
                merged.edges[edge.key] = Edge(
                    source=edge.source,
                    relation=edge.relation,
                    target=edge.target,
                    provenance=set(edge.provenance),
                )
            else:
                existing_edge.provenance.update(edge.provenance)
    return merged


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _esc(s: str) -> str:
    return (
        s.replace("\\", "\\\\")
        .replace("\t", "\\t")
        .replace("\n", "\\n")
        .replace("\r", "\\r")
    )


def _unesc(s: str) -> str:
    out = []
    i = 0
    while i < len(s):
        ch = s[i]
        if ch == "\\" and i + 1 < len(s):
            nxt = s[i + 1]
            out.append({"t": "\t", "n": "\n", "r": "\r", "\\": "\\"}.get(nxt, nxt))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def save_graph(graph: KnowledgeGraph, path: str | Path) -> None:
    lines = [GRAPH_HEADER]
    for name, definition in graph.schema.entity_types:
        lines.append(f"entity\t{_esc(name)}\t{_esc(definition)}")
    for rel in graph.schema.relations:
        lines.append(f"relation\t{rel.name}\t{rel.source}\t{rel.target}")
    for surface in sorted(graph.aliases):
        lines.append(f"alias\t{_esc(surface)}\t{_esc(graph.aliases[surface])}")
    for nid in sorted(graph.nodes):
        node = graph.nodes[nid]
        flags = ",".join(sorted(node.flags)) if node.flags else "-"
        fields = [
            "node", node.id, _esc(node.type), _esc(node.label),
            _esc(node.canonical), flags,
        ] + [_esc(p) for p in sorted(node.provenance)]
        lines.append("\t".join(fields))
    for key in sorted(graph.edges):
        edge = graph.edges[key]
        fields = ["edge", edge.source, edge.relation, edge.target] + [
            _esc(p) for p in sorted(edge.provenance)
        ]
        lines.append("\t".join(fields))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_graph(path: str | Path) -> KnowledgeGraph:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != GRAPH_HEADER:
        raise ParseError(1, "not a reviewkg graph file")
    entities: list[tuple[str, str]] = []
    relations: list[RelationType] = []
    aliases: dict[str, str] = {}
    node_lines: list[tuple[int, list[str]]] = []
    edge_lines: list[tuple[int, list[str]]] = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        kind = parts[0]
        if kind == "entity" and len(parts) == 3:
            entities.append((_unesc(parts[1]), _unesc(parts[2])))
        elif kind == "relation" and len(parts) == 4:
            relations.append(RelationType(parts[1], parts[2], parts[3]))
        elif kind == "alias" and len(parts) == 3:
            aliases[_unesc(parts[1])] = _unesc(parts[2])
        elif kind == "node":
            if len(parts) < 7:
                raise ParseError(line_no, "node line needs id, type, label, canonical, flags, provenance")
            node_lines.append((line_no, parts))
        elif kind == "edge":
            if len(parts) < 5:
                raise ParseError(line_no, "edge line needs source, relation, target, provenance")
            edge_lines.append((line_no, parts))
        else:
            raise ParseError(line_no, f"unrecognized graph line {line!r}")

    graph = KnowledgeGraph(schema=_build_schema(entities, relations), aliases=aliases)
    for line_no, parts in node_lines:
        flags = set() if parts[5] == "-" else set(parts[5].split(","))
        node = Node(
            id=parts[1],
            type=_unesc(parts[2]),
            label=_unesc(parts[3]),
            canonical=_unesc(parts[4]),
            provenance={_unesc(p) for p in parts[6:]},
            flags=flags,
        )
        if node.id in graph.nodes:
            raise IntegrityError(f"line {line_no}: duplicate node id {node.id}")
        graph.nodes[node.id] = node
    for line_no, parts in edge_lines:
        edge = Edge(
            source=parts[1],
            relation=parts[2],
            target=parts[3],
            provenance={_unesc(p) for p in parts[4:]},
        )
        if edge.key in graph.edges:
            raise IntegrityError(f"line {line_no}: duplicate edge {edge.key}")
        graph.edges[edge.key] = edge
    graph.check_integrity()
    return graph


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------

def export_graph(graph: KnowledgeGraph, format: str, path: str | Path) -> None:
    if format == "cypher":
        text = to_cypher(graph)
    elif format == "graphml":
        text = to_graphml(graph)
    elif format == "dot":
        text = to_dot(graph)
    else:
        raise ValueError(f"unsupported export format {format!r}")
    Path(path).write_text(text, encoding="utf-8")


def _cypher_str(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _cypher_label(name: str) -> str:
    return "`" + name.replace("`", "``") + "`"


def to_cypher(graph: KnowledgeGraph) -> str:
    """MERGE-only statements: one per node (keyed on type + canonical
    label), then one per relationship."""
    lines = []
    for nid in sorted(graph.nodes):
        node = graph.nodes[nid]
        reviews = ", ".join(_cypher_str(p) for p in sorted(node.provenance))
        lines.append(
            f"MERGE (n:{_cypher_label(node.type)} {{canonical: {_cypher_str(node.canonical)}}}) "
            f"SET n.label = {_cypher_str(node.label)}, n.reviews = [{reviews}];"
        )
    for key in sorted(graph.edges):
        edge = graph.edges[key]
        src, dst = graph.nodes[edge.source], graph.nodes[edge.target]
        reviews = ", ".join(_cypher_str(p) for p in sorted(edge.provenance))
        lines.append(
            f"MATCH (a:{_cypher_label(src.type)} {{canonical: {_cypher_str(src.canonical)}}}), "
            f"(b:{_cypher_label(dst.type)} {{canonical: {_cypher_str(dst.canonical)}}}) "
            f"MERGE (a)-[r:{_cypher_label(edge.relation)}]->(b) SET r.reviews = [{reviews}];"
        )
    return "\n".join(lines) + "\n"


_GRAPHML_NODE_KEYS = ("type", "label", "canonical", "flags", "reviews")
_GRAPHML_EDGE_KEYS = ("relation", "reviews")


def to_graphml(graph: KnowledgeGraph) -> str:
    root = ET.Element("graphml", xmlns="http://graphml.graphdrawing.org/xmlns")
    key_ids: dict[tuple[str, str], str] = {}
    counter = 0
    for domain, names in (("node", _GRAPHML_NODE_KEYS), ("edge", _GRAPHML_EDGE_KEYS)):
        for name in names:
            kid = f"d{counter}"
            counter += 1
            ET.SubElement(
                root, "key",
                {"id": kid, "for": domain, "attr.name": name, "attr.type": "string"},
            )
            key_ids[(domain, name)] = kid
    g = ET.SubElement(root, "graph", {"id": "reviewkg", "edgedefault": "directed"})

    def put(parent, domain, name, value):
        el = ET.SubElement(parent, "data", {"key": key_ids[(domain, name)]})
        el.text = value

    for nid in sorted(graph.nodes):
        node = graph.nodes[nid]
        el = ET.SubElement(g, "node", {"id": node.id})
        put(el, "node", "type", node.type)
        put(el, "node", "label", node.label)
        put(el, "node", "canonical", node.canonical)
        put(el, "node", "flags", ",".join(sorted(node.flags)))
        put(el, "node", "reviews", ",".join(sorted(node.provenance)))
    for key in sorted(graph.edges):
        edge = graph.edges[key]
        el = ET.SubElement(g, "edge", {"source": edge.source, "target": edge.target})
        put(el, "edge", "relation", edge.relation)
        put(el, "edge", "reviews", ",".join(sorted(edge.provenance)))
    ET.indent(root)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(
        root, encoding="unicode"
    ) + "\n"


_DOT_NODE_STYLE = {
    "App": 'shape=box, fillcolor="#cfe2ff"',
    "EthicalConcern": 'shape=ellipse, fillcolor="#f8d7da"',
    "Issue": 'shape=ellipse, fillcolor="#fff3cd"',
    "Requirement": 'shape=ellipse, fillcolor="#d1e7dd"',
}

_DOT_EDGE_COLOR = {"RAISES": "red", "ADDRESSES": "green"}


def _dot_str(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(graph: KnowledgeGraph) -> str:
    lines = ["digraph reviewkg {", "  rankdir=LR;", "  node [style=filled];"]
    for nid in sorted(graph.nodes):
        node = graph.nodes[nid]
        style = _DOT_NODE_STYLE.get(node.type, 'shape=ellipse, fillcolor="#eeeeee"')
        lines.append(f"  {_dot_str(node.id)} [label={_dot_str(node.label)}, {style}];")
    for key in sorted(graph.edges):
        edge = graph.edges[key]
        color = _DOT_EDGE_COLOR.get(edge.relation, "black")
        lines.append(
            f"  {_dot_str(edge.source)} -> {_dot_str(edge.target)} "
            f"[label={_dot_str(edge.relation)}, color={color}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Alias / lexicon files: "surface<TAB>canonical" lines
# ---------------------------------------------------------------------------

def read_label_map(path: str | Path) -> dict[str, str]:
    mapping: dict[str, str] = {}
    for line_no, raw in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not raw.strip() or raw.startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise ParseError(line_no, f"expected surface<TAB>canonical, got {raw!r}")
        mapping[_basic_normalize(parts[0])] = parts[1].strip()
    return mapping


def write_label_map(mapping: dict[str, str], path: str | Path) -> None:
    lines = [f"{surface}\t{target}" for surface, target in sorted(mapping.items())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
