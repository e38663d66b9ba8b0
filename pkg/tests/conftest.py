"""Shared fixtures: two fully worked ride-hailing reviews with gold
annotations, plus generators for synthetic corpora."""

from __future__ import annotations

import random

import pytest

from reviewkg import annotation, kg, textproc
from reviewkg.corpus import Review

REVIEW_1_TEXT = (
    "Uber app must have a provision to load the driver's pic before starting of trip "
    "so that Uber runs a face recognition match before start of trip. This is to ensure "
    "that proxy drivers don't drive cars making it unsafe for passengers. At least this "
    "feature can be enabled for late night rides enhancing security of female passengers."
)

REVIEW_2_TEXT = (
    "There is no customer support for uber. Safety number does not provide any support. "
    "Its v unsafe. Big company without basic safety precaution is unacceptable. Changing "
    "route they are charging such high charges(1.2x). Already fares are higher on top of "
    "it these surge is v bad. That too in corona situation there is no traffic at all. "
    "First thing there should be proper customer support, proper emergency number. Actual "
    "person should be there in call centre instead of machine to answer calls."
)

REVIEW_1_SPANS = [
    ("EC", "unsafe for passengers"),
    ("I", "proxy drivers"),
    ("R", "face recognition"),
]

REVIEW_2_SPANS = [
    ("EC", "unacceptable"),
    ("I", "no customer support"),
    ("R", "proper emergency number"),
]

# "no customer support" is a textual span; the graph node it denotes is the
# customer-support issue, renamed through the alias map.
WORKED_ALIASES = {"no customer support": "worst customer support"}

WORKED_LEXICON_EXTRA = {"unsafe for passengers": "Safety"}


def find_token_span(tokens: list[str], phrase: str) -> tuple[int, int] | None:
    want = [w.casefold() for w in phrase.split()]
    for i in range(len(tokens) - len(want) + 1):
        if [t.casefold() for t in tokens[i : i + len(want)]] == want:
            return i, i + len(want)
    return None


def gold_annotate(review: Review, phrases) -> annotation.AnnotatedReview:
    """Tokenize with the pipeline front end and mark the given phrases."""
    sentences = []
    for sent in textproc.process_text(review.text):
        tokens = [t.text for t in sent]
        spans = []
        for kind, phrase in phrases:
            hit = find_token_span(tokens, phrase)
            if hit:
                spans.append(annotation.make_span(kind, hit[0], hit[1], tokens))
        sentences.append(annotation.AnnotatedSentence.from_spans(tokens, spans))
    return annotation.AnnotatedReview(review=review, sentences=sentences)


@pytest.fixture
def worked_reviews() -> tuple[Review, Review]:
    r1 = Review(id="r1", app="Uber", text=REVIEW_1_TEXT, concern_labels=frozenset({"Safety"}))
    r2 = Review(
        id="r2",
        app="Uber",
        text=REVIEW_2_TEXT,
        concern_labels=frozenset({"Safety", "Accountability"}),
    )
    return r1, r2


@pytest.fixture
def worked_gold(worked_reviews):
    r1, r2 = worked_reviews
    return gold_annotate(r1, REVIEW_1_SPANS), gold_annotate(r2, REVIEW_2_SPANS)


@pytest.fixture
def worked_graph(worked_gold):
    g1, g2 = worked_gold
    lexicon = kg.build_concern_lexicon(extra=WORKED_LEXICON_EXTRA)
    graph = kg.KnowledgeGraph(aliases=WORKED_ALIASES)
    kg.link_review(graph, g1, lexicon)
    kg.link_review(graph, g2, lexicon)
    return graph


# ---------------------------------------------------------------------------
# Synthetic reviews for graph property tests
# ---------------------------------------------------------------------------

CONCERN_POOL = ("Safety", "Privacy", "Scam", "Accountability", "Transparency")
APP_POOL = ("Uber", "TikTok", "Zoom")


def synthetic_annotated_review(rng: random.Random, index: int) -> annotation.AnnotatedReview:
    """A random annotated review with noisy label casing/whitespace so the
    canonicalization paths get exercised."""
    app = rng.choice(APP_POOL)
    labels = frozenset(rng.sample(CONCERN_POOL, k=rng.randint(0, 2)))
    review = Review(
        id=f"syn-{index}", app=app, text=f"synthetic review {index}", concern_labels=labels
    )
    sentences = []
    for _ in range(rng.randint(1, 3)):
        tokens: list[str] = []
        spans: list[annotation.EntitySpan] = []
        for _ in range(rng.randint(0, 3)):
            kind = rng.choice(("EC", "I", "R"))
            if kind == "EC":
                words = [rng.choice(("unsafe", "fraud", "tracking", "opaque", "unfair"))]
            elif kind == "I":
                words = ["issue", f"num{rng.randint(0, 9)}"]
            else:
                words = ["req", f"num{rng.randint(0, 9)}"]
            if rng.random() < 0.5:
                words = [w.upper() if rng.random() < 0.5 else w.title() for w in words]
            start = len(tokens)
            tokens.extend(words)
            spans.append(annotation.make_span(kind, start, len(tokens), tokens))
            tokens.extend(["filler"] * rng.randint(0, 2))
        if not tokens:
            tokens = ["nothing", "here"]
        sentences.append(annotation.AnnotatedSentence.from_spans(tokens, spans))
    return annotation.AnnotatedReview(review=review, sentences=sentences)


SYNTHETIC_LEXICON_EXTRA = {
    "unsafe": "Safety",
    "fraud": "Scam",
    "tracking": "Privacy",
    "opaque": "Transparency",
    # "unfair" is deliberately absent so label/uncategorized fallbacks fire
}


@pytest.fixture(scope="session")
def synthetic_review_pool():
    rng = random.Random(2024)
    return [synthetic_annotated_review(rng, i) for i in range(200)]
