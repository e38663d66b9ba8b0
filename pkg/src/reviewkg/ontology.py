"""Entity/relation schema for the knowledge graph.

The default schema declares four entity types (App, Issue, EthicalConcern,
Requirement) and four relation types:

    HAVING     App         -> EthicalConcern
    HAS_ISSUE  App         -> Issue
    RAISES     Issue       -> EthicalConcern
    ADDRESSES  Requirement -> EthicalConcern

Schemas load from a small tab-separated file so relation names and extra
entity types can be changed without touching code.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from reviewkg.errors import DanglingEndpoint, ParseError, UnknownRelation

CORE_ENTITY_TYPES = {
    "App": "The mobile application a review talks about.",
    "Issue": "A problem users report as the underlying reason a concern arises.",
    "EthicalConcern": "A category of ethical concern raised in reviews.",
    "Requirement": "A user-suggested feature or change that could address a concern.",
}

SCHEMA_HEADER = "reviewkg-schema\t1"


@dataclass(frozen=True)
class RelationType:
    name: str
    source: str
    target: str


@dataclass(frozen=True)
class OntologySchema:
    entity_types: tuple[tuple[str, str], ...]  # (name, definition), ordered
    relations: tuple[RelationType, ...]

    def entity_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.entity_types)

    def relation(self, name: str) -> RelationType:
        for rel in self.relations:
            if rel.name == name:
                return rel
        raise UnknownRelation(f"relation {name!r} not declared in schema")


def default_schema() -> OntologySchema:
    return OntologySchema(
        entity_types=tuple(CORE_ENTITY_TYPES.items()),
        relations=(
            RelationType("HAVING", "App", "EthicalConcern"),
            RelationType("HAS_ISSUE", "App", "Issue"),
            RelationType("RAISES", "Issue", "EthicalConcern"),
            RelationType("ADDRESSES", "Requirement", "EthicalConcern"),
        ),
    )


def validate_triple(
    schema: OntologySchema, source_type: str, relation_name: str, target_type: str
) -> tuple[bool, str]:
    """Check a (source type, relation, target type) triple against the schema.

    Returns (True, "") on a match, (False, reason) on an endpoint mismatch.
    Raises UnknownRelation when the relation name is not declared at all.
    """
    rel = schema.relation(relation_name)
    if rel.source != source_type:
        return False, f"source mismatch: {relation_name} expects {rel.source}, got {source_type}"
    if rel.target != target_type:
        return False, f"target mismatch: {relation_name} expects {rel.target}, got {target_type}"
    return True, ""


def _build_schema(
    entities: list[tuple[str, str]], relations: list[RelationType]
) -> OntologySchema:
    # core types are always present, whatever the file declares
    names = {name for name, _ in entities}
    merged = list(entities)
    for name, definition in CORE_ENTITY_TYPES.items():
        if name not in names:
            merged.append((name, definition))
    declared = {name for name, _ in merged}
    for rel in relations:
        for endpoint in (rel.source, rel.target):
            if endpoint not in declared:
                raise DanglingEndpoint(
                    f"relation {rel.name} references undeclared entity type {endpoint!r}"
                )
    return OntologySchema(entity_types=tuple(merged), relations=tuple(relations))


def load_schema(path: str | Path) -> OntologySchema:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != SCHEMA_HEADER:
        raise ParseError(1, "not a reviewkg schema file")
    entities: list[tuple[str, str]] = []
    relations: list[RelationType] = []
    seen_rel: set[str] = set()
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if parts[0] == "entity" and len(parts) == 3:
            entities.append((parts[1], parts[2]))
        elif parts[0] == "relation" and len(parts) == 4:
            if parts[1] in seen_rel:
                raise ParseError(line_no, f"duplicate relation name {parts[1]!r}")
            seen_rel.add(parts[1])
            relations.append(RelationType(parts[1], parts[2], parts[3]))
        else:
            raise ParseError(line_no, f"unrecognized schema line {line!r}")
    return _build_schema(entities, relations)


def write_schema(schema: OntologySchema, path: str | Path) -> None:
    lines = [SCHEMA_HEADER]
    for name, definition in schema.entity_types:
        lines.append(f"entity\t{name}\t{definition}")
    for rel in schema.relations:
        lines.append(f"relation\t{rel.name}\t{rel.source}\t{rel.target}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
