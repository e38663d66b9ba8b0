"""Entity extraction over whole reviews.

Gold mode passes an existing annotation through untouched; model mode runs
the full front end (segmentation, tokenization, tagging, chunking) and the
trained decoder, then the lenient span decode happens wherever spans are
read off the resulting tags.
"""

from __future__ import annotations

from reviewkg.annotation import GOLD, PREDICTED, AnnotatedReview, AnnotatedSentence
from reviewkg.corpus import Review
from reviewkg.errors import MissingAnnotation
from reviewkg.ner.crf import CrfModel
from reviewkg.ner.features import extract_features
from reviewkg.textproc import PosModel, process_text


def extract_entities(
    review: Review,
    gold: AnnotatedReview | None = None,
    crf_model: CrfModel | None = None,
    pos_model: PosModel | None = None,
) -> AnnotatedReview:
    """Produce the annotated form of a review.

    Pass gold= for gold mode (the annotation is returned with gold
    provenance and the review's own metadata) or crf_model= for model
    mode. Raises MissingAnnotation when neither is available.
    """
    if gold is not None:
        if gold.review.id != review.id:
            raise MissingAnnotation(
                f"annotation {gold.review.id!r} does not belong to review {review.id!r}"
            )
        return AnnotatedReview(review=review, sentences=gold.sentences, provenance=GOLD)
    if crf_model is None:
        raise MissingAnnotation(f"no gold annotation or model for review {review.id!r}")
    sentences = []
    for tokens in process_text(review.text, pos_model):
        tags = crf_model.viterbi_decode(extract_features(tokens))
        sentences.append(AnnotatedSentence(tokens=[t.text for t in tokens], tags=tags))
    return AnnotatedReview(review=review, sentences=sentences, provenance=PREDICTED)
