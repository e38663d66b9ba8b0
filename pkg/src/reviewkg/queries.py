"""Competency queries over a knowledge graph.

Every query is a pure read returning a QueryResult whose rows are ordered
by descending review support, then cell text, so output is reproducible.
Each row carries the supporting review ids so a result can be traced back
to the users who wrote it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from reviewkg.errors import UnknownApp, UnknownConcern
from reviewkg.kg import KnowledgeGraph, Node


@dataclass(frozen=True)
class QueryRow:
    cells: tuple[str, ...]
    support: tuple[str, ...]  # sorted review ids


@dataclass(frozen=True)
class QueryResult:
    name: str
    params: dict[str, str] = field(default_factory=dict)
    rows: tuple[QueryRow, ...] = ()

    def labels(self) -> set[str]:
        return {row.cells[0] for row in self.rows}


def _ordered(rows: list[QueryRow]) -> tuple[QueryRow, ...]:
    return tuple(sorted(rows, key=lambda r: (-len(r.support), r.cells)))


def _require_node(graph: KnowledgeGraph, entity_type: str, label: str, exc) -> Node:
    node = graph.find_node(entity_type, label)
    if node is None:
        raise exc(f"no {entity_type} node for {label!r}")
    return node


def concerns_of_app(graph: KnowledgeGraph, app: str) -> QueryResult:
    """All ethical concerns linked to the app via HAVING."""
    app_node = _require_node(graph, "App", app, UnknownApp)
    rows = []
    for edge in graph.edges.values():
        if edge.relation == "HAVING" and edge.source == app_node.id:
            concern = graph.nodes[edge.target]
            rows.append(QueryRow(cells=(concern.label,), support=tuple(sorted(edge.provenance))))
    return QueryResult(name="concerns", params={"app": app}, rows=_ordered(rows))


def reasons_for_concern(graph: KnowledgeGraph, concern: str) -> QueryResult:
    """All issues that RAISE the given concern."""
    concern_node = _require_node(graph, "EthicalConcern", concern, UnknownConcern)
    rows = []
    for edge in graph.edges.values():
        if edge.relation == "RAISES" and edge.target == concern_node.id:
            issue = graph.nodes[edge.source]
            rows.append(QueryRow(cells=(issue.label,), support=tuple(sorted(edge.provenance))))
    return QueryResult(name="reasons", params={"concern": concern}, rows=_ordered(rows))


def requirements_for_concern(graph: KnowledgeGraph, concern: str) -> QueryResult:
    """All requirements that ADDRESS the given concern."""
    concern_node = _require_node(graph, "EthicalConcern", concern, UnknownConcern)
    rows = []
    for edge in graph.edges.values():
        if edge.relation == "ADDRESSES" and edge.target == concern_node.id:
            req = graph.nodes[edge.source]
            rows.append(QueryRow(cells=(req.label,), support=tuple(sorted(edge.provenance))))
    return QueryResult(
        name="requirements", params={"concern": concern}, rows=_ordered(rows)
    )


def _fanout_rows(graph: KnowledgeGraph, relation: str) -> list[QueryRow]:
    by_source: dict[str, list] = {}
    for edge in graph.edges.values():
        if edge.relation == relation:
            by_source.setdefault(edge.source, []).append(edge)
    rows = []
    for source_id, edges in by_source.items():
        targets = {graph.nodes[e.target].label for e in edges}
        if len(targets) < 2:
            continue
        support: set[str] = set()
        for e in edges:
            support.update(e.provenance)
        source = graph.nodes[source_id]
        rows.append(
            QueryRow(
                cells=(source.label,) + tuple(sorted(targets)),
                support=tuple(sorted(support)),
            )
        )
    return rows


def shared_issues(graph: KnowledgeGraph) -> QueryResult:
    """Issues raising two or more distinct concerns, with those concerns."""
    return QueryResult(name="shared-issues", rows=_ordered(_fanout_rows(graph, "RAISES")))


def shared_requirements(graph: KnowledgeGraph) -> QueryResult:
    """Requirements addressing two or more distinct concerns."""
    return QueryResult(
        name="shared-requirements", rows=_ordered(_fanout_rows(graph, "ADDRESSES"))
    )


def concern_pattern_summary(graph: KnowledgeGraph) -> QueryResult:
    """Per concern: how many issues raise it, how many requirements address
    it, and which reviews support it."""
    rows = []
    for node in graph.nodes.values():
        if node.type != "EthicalConcern":
            continue
        issues = sum(
            1
            for e in graph.edges.values()
            if e.relation == "RAISES" and e.target == node.id
        )
        requirements = sum(
            1
            for e in graph.edges.values()
            if e.relation == "ADDRESSES" and e.target == node.id
        )
        rows.append(
            QueryRow(
                cells=(node.label, str(issues), str(requirements)),
                support=tuple(sorted(node.provenance)),
            )
        )
    return QueryResult(name="summary", rows=_ordered(rows))


def render_text(result: QueryResult) -> str:
    """Aligned-column text rendering."""
    header = result.name
    if result.params:
        header += " " + " ".join(f"{k}={v}" for k, v in sorted(result.params.items()))
    if not result.rows:
        return header + "\n(no rows)"
    ncols = max(len(r.cells) for r in result.rows)
    widths = [0] * ncols
    for row in result.rows:
        for i, cell in enumerate(row.cells):
            widths[i] = max(widths[i], len(cell))
    lines = [header]
    for row in result.rows:
        cells = [c.ljust(widths[i]) for i, c in enumerate(row.cells)]
        lines.append("  ".join(cells).rstrip() + "    [" + ", ".join(row.support) + "]")
    return "\n".join(lines)


def render_records(result: QueryResult) -> str:
    """One tab-separated record per row: query, params, cells, support."""
    params = ";".join(f"{k}={v}" for k, v in sorted(result.params.items()))
    lines = []
    for row in result.rows:
        fields = [result.name, params, *row.cells, ",".join(row.support)]
        lines.append("\t".join(fields))
    return "\n".join(lines)
