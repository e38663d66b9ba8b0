"""BIO annotation scheme for the three text-borne entity kinds:
EC (ethical concern), I (issue), R (requirement).

Spans never cross sentence boundaries. Conversion between spans and tag
sequences is exact for valid input; decoding model output uses a lenient
repair rule (a dangling I-x opens a new span) so downstream code never
sees an invalid chain.

Annotation file format (UTF-8): a line "#review <id> <app>" starts a
review, then one "token<TAB>tag" line per token with a blank line closing
each sentence. Predicted (rather than gold) annotations carry an extra
"#provenance predicted" line after the review header.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from reviewkg.corpus import Review
from reviewkg.errors import (
    InvalidTag,
    OutOfBounds,
    OverlapError,
    ParseError,
)

ENTITY_KINDS = ("EC", "I", "R")

BIO_TAGS = ("O", "B-EC", "I-EC", "B-I", "I-I", "B-R", "I-R")

GOLD = "gold"
PREDICTED = "predicted"


@dataclass(frozen=True)
class EntitySpan:
    kind: str  # one of ENTITY_KINDS
    start: int  # token index, inclusive
    end: int  # token index, exclusive
    surface: str

    def __post_init__(self):
        if self.kind not in ENTITY_KINDS:
            raise ValueError(f"unknown entity kind {self.kind!r}")
        if not (0 <= self.start < self.end):
            raise ValueError(f"bad span bounds [{self.start}, {self.end})")


def make_span(kind: str, start: int, end: int, tokens: list[str]) -> EntitySpan:
    return EntitySpan(kind=kind, start=start, end=end, surface=" ".join(tokens[start:end]))


def spans_to_bio(spans: list[EntitySpan], length: int) -> list[str]:
    """Encode non-overlapping spans as a BIO tag sequence of the given length."""
    tags = ["O"] * length
    occupied = [False] * length
    for span in spans:
        if span.end > length:
            raise OutOfBounds(f"span [{span.start}, {span.end}) exceeds length {length}")
        if any(occupied[span.start : span.end]):
            raise OverlapError(f"span [{span.start}, {span.end}) overlaps another span")
        for i in range(span.start, span.end):
            occupied[i] = True
        tags[span.start] = f"B-{span.kind}"
        for i in range(span.start + 1, span.end):
            tags[i] = f"I-{span.kind}"
    return tags


def bio_to_spans(tags: list[str], tokens: list[str] | None = None) -> list[EntitySpan]:
    """Decode a tag sequence into spans, leniently.

    An I-x that does not continue a span of kind x is treated as B-x. The
    result is always a list of valid, non-overlapping, nonempty spans; on
    valid input this is the exact inverse of spans_to_bio.
    """
    spans: list[EntitySpan] = []
    cur_kind: str | None = None
    cur_start = 0
    for i, tag in enumerate(tags):
        if tag not in BIO_TAGS:
            raise ValueError(f"unknown BIO tag {tag!r}")
        if tag == "O":
            if cur_kind is not None:
                spans.append(_close(cur_kind, cur_start, i, tokens))
                cur_kind = None
            continue
        prefix, kind = tag.split("-", 1)
        if prefix == "B" or cur_kind != kind:
            if cur_kind is not None:
                spans.append(_close(cur_kind, cur_start, i, tokens))
            cur_kind = kind
            cur_start = i
    if cur_kind is not None:
        spans.append(_close(cur_kind, cur_start, len(tags), tokens))
    return spans


def _close(kind: str, start: int, end: int, tokens: list[str] | None) -> EntitySpan:
    surface = " ".join(tokens[start:end]) if tokens else ""
    return EntitySpan(kind=kind, start=start, end=end, surface=surface)


@dataclass(frozen=True)
class BioViolation:
    index: int
    message: str


@dataclass(frozen=True)
class BioReport:
    violations: tuple[BioViolation, ...]

    @property
    def valid(self) -> bool:
        return not self.violations


def validate_bio(tags: list[str]) -> BioReport:
    """Strict chain check: reports every I-x after O, after a different
    kind, or at sequence start, plus any tag outside the closed set."""
    violations: list[BioViolation] = []
    prev_kind: str | None = None
    for i, tag in enumerate(tags):
        if tag not in BIO_TAGS:
            violations.append(BioViolation(i, f"tag {tag!r} not in tag set"))
            prev_kind = None
            continue
        if tag == "O":
            prev_kind = None
            continue
        prefix, kind = tag.split("-", 1)
        if prefix == "I" and prev_kind != kind:
            if prev_kind is None:
                violations.append(BioViolation(i, f"I-{kind} follows O or sequence start"))
            else:
                violations.append(BioViolation(i, f"I-{kind} follows entity of kind {prev_kind}"))
        prev_kind = kind
    return BioReport(violations=tuple(violations))


@dataclass
class AnnotatedSentence:
    tokens: list[str]
    tags: list[str]

    def __post_init__(self):
        if len(self.tokens) != len(self.tags):
            raise ValueError("token/tag count mismatch")

    def spans(self) -> list[EntitySpan]:
        return bio_to_spans(self.tags, self.tokens)

    @classmethod
    def from_spans(cls, tokens: list[str], spans: list[EntitySpan]) -> "AnnotatedSentence":
        return cls(tokens=list(tokens), tags=spans_to_bio(spans, len(tokens)))


@dataclass
class AnnotatedReview:
    review: Review
    sentences: list[AnnotatedSentence] = field(default_factory=list)
    provenance: str = GOLD

    def all_spans(self) -> list[tuple[int, EntitySpan]]:
        """(sentence index, span) pairs across the review."""
        out = []
        for si, sent in enumerate(self.sentences):
            out.extend((si, span) for span in sent.spans())
        return out


def read_annotations(path: str | Path) -> list[AnnotatedReview]:
    reviews: list[AnnotatedReview] = []
    current: AnnotatedReview | None = None
    words: list[str] = []
    tags: list[str] = []

    def flush_sentence():
        nonlocal words, tags
        if words:
            current.sentences.append(AnnotatedSentence(tokens=words, tags=tags))
            words, tags = [], []

    for line_no, raw in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if raw.startswith("#review "):
            if current is not None:
                flush_sentence()
            body = raw[len("#review ") :]
            rid, _, app = body.partition(" ")
            if not rid or not app:
                raise ParseError(line_no, "expected '#review <id> <app>'")
            current = AnnotatedReview(
                review=Review(id=rid, app=app, text=""), sentences=[]
            )
            reviews.append(current)
            continue
        if raw.startswith("#provenance "):
            if current is None:
                raise ParseError(line_no, "provenance line before any #review")
            current.provenance = raw[len("#provenance ") :].strip()
            continue
        if not raw.strip():
            if current is not None:
                flush_sentence()
            continue
        if current is None:
            raise ParseError(line_no, "token line before any #review header")
        parts = raw.split("\t")
        if len(parts) != 2 or not parts[0]:
            raise ParseError(line_no, f"expected token<TAB>tag, got {raw!r}")
        if parts[1] not in BIO_TAGS:
            raise InvalidTag(line_no, parts[1])
        words.append(parts[0])
        tags.append(parts[1])
    if current is not None:
        flush_sentence()

    for ar in reviews:
        text = " ".join(" ".join(s.tokens) for s in ar.sentences)
        ar.review = Review(id=ar.review.id, app=ar.review.app, text=text)
    return reviews


def write_annotations(reviews: list[AnnotatedReview], path: str | Path) -> None:
    lines: list[str] = []
    for ar in reviews:
        lines.append(f"#review {ar.review.id} {ar.review.app}")
        if ar.provenance != GOLD:
            lines.append(f"#provenance {ar.provenance}")
        for sent in ar.sentences:
            for w, t in zip(sent.tokens, sent.tags):
                lines.append(f"{w}\t{t}")
            lines.append("")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
