import math
import random

import numpy as np
import pytest

from reviewkg.annotation import BIO_TAGS, AnnotatedReview, AnnotatedSentence
from reviewkg.corpus import Review
from reviewkg.errors import (
    EmptyTrainingSet,
    InvalidGoldTags,
    LengthMismatch,
    MissingAnnotation,
    MissingChunk,
    MissingPos,
)
from reviewkg.ner import kernels
from reviewkg.ner.crf import CrfModel, TrainConfig, train_crf
from reviewkg.ner.features import extract_features, featurize_texts
from reviewkg.ner.kernels import pure
from reviewkg.ner.pipeline import extract_entities
from reviewkg.textproc import Token, chunk_tokens

K = len(BIO_TAGS)

try:
    from reviewkg.ner.kernels import _speedups
except ImportError:
    _speedups = None


# -- oracles -------------------------------------------------------------------

def brute_force(E: np.ndarray, T: np.ndarray):
    """Exhaustive enumeration over all K^L tag sequences (independent of
    the dynamic programs): returns (argmax sequence, max score, logZ)."""
    L = E.shape[0]
    grids = np.meshgrid(*[np.arange(K)] * L, indexing="ij")
    seqs = np.stack(grids, axis=-1).reshape(-1, L)
    scores = E[np.arange(L), seqs].sum(axis=1)
    if L > 1:
        scores = scores + T[seqs[:, :-1], seqs[:, 1:]].sum(axis=1)
    best = seqs[int(np.argmax(scores))]
    m = float(scores.max())
    logz = m + math.log(float(np.exp(scores - m).sum()))
    return best, m, logz


WORDS = ["safety", "driver", "app", "unsafe", "ride", "support", "number",
         "the", "a", "is", "refund", "1.2x", "scam"]


def random_sentence_features(rng: np.random.Generator, length: int):
    texts = [WORDS[int(rng.integers(len(WORDS)))] for _ in range(length)]
    return featurize_texts(texts)


def random_model(rng: np.random.Generator, feats_list, l2: float = 0.0,
                 scale: float = 1.0) -> CrfModel:
    model = CrfModel(l2=l2)
    model.grow_features(feats_list)
    model.weights = rng.uniform(-scale, scale, size=model.weights.size)
    return model


def random_tags(rng: np.random.Generator, length: int) -> list[str]:
    return [BIO_TAGS[int(rng.integers(K))] for _ in range(length)]


# -- feature extraction ----------------------------------------------------------

def tagged_tokens(pairs):
    tokens = [Token(w, 0, 1, pos=p) for w, p in pairs]
    return chunk_tokens(tokens)


def test_feature_templates_single_token():
    tokens = tagged_tokens([("pic", "NOUN")])
    feats = extract_features(tokens)
    assert len(feats) == 1
    assert "w=pic" in feats[0]
    assert "pos=NOUN" in feats[0]
    assert "suf3=pic" in feats[0]
    assert "chunk=B-NP" in feats[0]


def test_feature_extraction_deterministic():
    tokens = tagged_tokens([("the", "DET"), ("Driver", "NOUN"), ("left", "VERB")])
    assert extract_features(tokens) == extract_features(tagged_tokens(
        [("the", "DET"), ("Driver", "NOUN"), ("left", "VERB")]
    ))
    model = CrfModel()
    model.grow_features([extract_features(tokens)])
    ids_a = model.index_features(extract_features(tokens))
    ids_b = model.index_features(extract_features(tokens))
    assert all((a == b).all() for a, b in zip(ids_a, ids_b))


def test_feature_requires_pos_and_chunk():
    with pytest.raises(MissingPos):
        extract_features([Token("x", 0, 1)])
    with pytest.raises(MissingChunk):
        extract_features([Token("x", 0, 1, pos="NOUN")])


def test_unseen_word_fires_only_nonlexical_templates():
    model = CrfModel()
    model.grow_features([featurize_texts(["the", "safety", "."])])
    decode_feats = featurize_texts(["the", "zzzzz", "."])
    fired = {t for t in decode_feats[1] if t in model.feature_map}
    # hand-listed: the unseen word contributes no identity/affix/shape
    # templates, only POS, chunk, and the window context
    assert fired == {
        "pos=NOUN",
        "chunk=I-NP",
        "w[-1]=the", "pos[-1]=DET",
        "w[-2]=<s>", "pos[-2]=<s>",
        "w[+1]=.", "pos[+1]=PUNCT",
        "w[+2]=</s>", "pos[+2]=</s>",
    }


# -- log partition ----------------------------------------------------------------

def test_log_partition_zero_weights_length_one():
    feats = featurize_texts(["safety"])
    model = CrfModel()
    model.grow_features([feats])
    assert model.log_partition(feats) == pytest.approx(math.log(7), abs=1e-12)


def test_log_partition_zero_weights_scales_with_length():
    for L in (2, 4, 6):
        feats = featurize_texts(["word"] * L)
        model = CrfModel()
        model.grow_features([feats])
        assert model.log_partition(feats) == pytest.approx(L * math.log(7), abs=1e-10)


def test_log_partition_matches_enumeration():
    rng = np.random.default_rng(31)
    feats = random_sentence_features(rng, 5)
    model = random_model(rng, [feats])
    E = model.emissions(model.index_features(feats))
    T = model._transition_block()
    _, _, want = brute_force(E, T)
    assert model.log_partition(feats) == pytest.approx(want, abs=1e-8)


# -- sequence log likelihood -----------------------------------------------------

def test_loglik_zero_weights():
    feats = featurize_texts(["a", "b", "c"])
    model = CrfModel()
    model.grow_features([feats])
    ll = model.sequence_loglik(feats, ["O", "B-EC", "I-EC"])
    assert ll == pytest.approx(-3 * math.log(7), abs=1e-10)


def test_loglik_nonpositive():
    rng = np.random.default_rng(5)
    for _ in range(25):
        L = int(rng.integers(1, 7))
        feats = random_sentence_features(rng, L)
        model = random_model(rng, [feats], scale=2.0)
        assert model.sequence_loglik(feats, random_tags(rng, L)) <= 1e-12


def test_loglik_matches_enumeration():
    rng = np.random.default_rng(77)
    feats = random_sentence_features(rng, 4)
    model = random_model(rng, [feats])
    tags = random_tags(rng, 4)
    E = model.emissions(model.index_features(feats))
    T = model._transition_block()
    _, _, logz = brute_force(E, T)
    y = [BIO_TAGS.index(t) for t in tags]
    score = sum(E[t, y[t]] for t in range(4)) + sum(T[y[t - 1], y[t]] for t in range(1, 4))
    assert model.sequence_loglik(feats, tags) == pytest.approx(score - logz, abs=1e-8)


def test_loglik_length_mismatch():
    feats = featurize_texts(["a", "b"])
    model = CrfModel()
    model.grow_features([feats])
    with pytest.raises(LengthMismatch):
        model.sequence_loglik(feats, ["O"])


def test_l2_never_increases_objective():
    rng = np.random.default_rng(9)
    feats = random_sentence_features(rng, 4)
    tags = random_tags(rng, 4)
    model = random_model(rng, [feats])

    def objective(l2):
        return model.sequence_loglik(feats, tags) - 0.5 * l2 * float(
            model.weights @ model.weights
        )

    values = [objective(l2) for l2 in (0.0, 0.1, 0.5, 2.0)]
    assert all(a >= b for a, b in zip(values, values[1:]))


# -- gradient -----------------------------------------------------------------------

def regularized_objective(model: CrfModel, batch) -> float:
    ll = sum(model.sequence_loglik(f, t) for f, t in batch)
    return ll - 0.5 * model.l2 * float(model.weights @ model.weights)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(1234)
    feats = random_sentence_features(rng, 5)
    tags = random_tags(rng, 5)
    model = random_model(rng, [feats], l2=0.3)
    batch = [(feats, tags)]
    grad = model.gradient(batch)
    h = 1e-5
    for i in range(0, model.weights.size, 7):  # sampled coordinates
        w0 = model.weights[i]
        model.weights[i] = w0 + h
        up = regularized_objective(model, batch)
        model.weights[i] = w0 - h
        down = regularized_objective(model, batch)
        model.weights[i] = w0
        fd = (up - down) / (2 * h)
        denom = max(abs(grad[i]), abs(fd), 1e-3)
        assert abs(grad[i] - fd) / denom <= 1e-4


def test_gradient_zero_at_hand_solved_optimum():
    # seven one-token instances sharing one feature context, gold tags
    # covering each tag once: the empirical distribution is uniform, so
    # zero weights are the exact maximum-likelihood optimum
    feats = featurize_texts(["word"])
    model = CrfModel(l2=0.0)
    model.grow_features([feats])
    batch = [(feats, [tag]) for tag in BIO_TAGS]
    grad = model.gradient(batch)
    assert float(np.linalg.norm(grad)) <= 1e-6


def test_gradient_l2_term_vanishes_at_zero_weights():
    feats = featurize_texts(["word", "again"])
    tags = ["O", "B-I"]
    for l2 in (0.0, 0.7):
        model = CrfModel(l2=l2)
        model.grow_features([feats])
        models_grad = model.gradient([(feats, tags)])
        if l2 == 0.0:
            base = models_grad
    assert np.array_equal(base, models_grad)


# -- viterbi -----------------------------------------------------------------------

def test_viterbi_zero_weights_tie_breaks_to_o():
    feats = featurize_texts(["two", "words"])
    model = CrfModel()
    model.grow_features([feats])
    assert model.viterbi_decode(feats) == ["O", "O"]


def test_viterbi_emission_dominant():
    rng = np.random.default_rng(42)
    feats = random_sentence_features(rng, 6)
    model = random_model(rng, [feats])
    n = model.n_features
    model.weights[n * K:] = 0.0  # no transition scores
    E = model.emissions(model.index_features(feats))
    want = [BIO_TAGS[int(i)] for i in np.argmax(E, axis=1)]
    assert model.viterbi_decode(feats) == want


def test_viterbi_matches_enumeration():
    rng = np.random.default_rng(2718)
    for _ in range(10):
        L = int(rng.integers(1, 7))
        feats = random_sentence_features(rng, L)
        model = random_model(rng, [feats])
        E = model.emissions(model.index_features(feats))
        T = model._transition_block()
        best, _, _ = brute_force(E, T)
        assert model.viterbi_decode(feats) == [BIO_TAGS[int(i)] for i in best]


def test_empty_sentence_contracts():
    model = CrfModel()
    assert model.viterbi_decode([]) == []
    assert model.log_partition([]) == 0.0


# -- kernel backends ----------------------------------------------------------------

@pytest.mark.skipif(_speedups is None, reason="compiled kernels not built")
def test_compiled_matches_pure():
    rng = np.random.default_rng(55)
    for _ in range(50):
        L = int(rng.integers(1, 10))
        E = np.ascontiguousarray(rng.normal(size=(L, K)))
        T = np.ascontiguousarray(rng.normal(size=(K, K)))
        assert _speedups.forward_logz(E, T) == pytest.approx(
            pure.forward_logz(E, T), abs=1e-10
        )
        lz_c, marg_c, pair_c = _speedups.forward_backward(E, T)
        lz_p, marg_p, pair_p = pure.forward_backward(E, T)
        assert lz_c == pytest.approx(lz_p, abs=1e-10)
        assert np.allclose(marg_c, marg_p, atol=1e-12)
        assert np.allclose(pair_c, pair_p, atol=1e-12)
        assert (np.asarray(_speedups.viterbi(E, T)) == pure.viterbi(E, T)).all()


def test_marginals_are_distributions():
    rng = np.random.default_rng(8)
    E = np.ascontiguousarray(rng.normal(size=(6, K)))
    T = np.ascontiguousarray(rng.normal(size=(K, K)))
    _, marg, pair = kernels.forward_backward(E, T)
    assert np.allclose(marg.sum(axis=1), 1.0, atol=1e-10)
    assert pair.sum() == pytest.approx(5.0, abs=1e-8)  # one distribution per adjacent pair


# -- training --------------------------------------------------------------------

def annotated(reviews_sentences, rid="t1", app="Uber", labels=frozenset()):
    return AnnotatedReview(
        review=Review(id=rid, app=app, text="synthetic", concern_labels=labels),
        sentences=[AnnotatedSentence(tokens=t, tags=g) for t, g in reviews_sentences],
    )


def test_train_overfits_repeated_sentence():
    sent = (["add", "face", "recognition", "now"], ["O", "B-R", "I-R", "O"])
    gold = annotated([sent])
    config = TrainConfig(epochs=200, learning_rate=0.5, decay=0.0, batch_size=1,
                         l2=0.0, seed=3, tolerance=0.0)
    model, log = train_crf([gold], config)
    feats = featurize_texts(sent[0])
    assert model.viterbi_decode(feats) == sent[1]
    assert log[-1].token_accuracy == 1.0


def test_train_deterministic_bitwise():
    gold = [annotated([
        (["the", "app", "is", "unsafe"], ["O", "O", "O", "B-EC"]),
        (["add", "refunds"], ["O", "B-R"]),
    ])]
    config = TrainConfig(epochs=20, seed=7)
    m1, _ = train_crf(gold, config)
    m2, _ = train_crf(gold, config)
    assert m1.feature_map == m2.feature_map
    assert np.array_equal(m1.weights, m2.weights)


def test_train_empty_and_invalid():
    with pytest.raises(EmptyTrainingSet):
        train_crf([], TrainConfig())
    with pytest.raises(EmptyTrainingSet):
        train_crf([annotated([])], TrainConfig())
    with pytest.raises(InvalidGoldTags):
        train_crf([annotated([(["a", "b"], ["O", "I-R"])])], TrainConfig())


TAG_VOCAB = {
    "B-EC": ["unsafe", "scam", "tracking"],
    "I-EC": ["concern", "risk"],
    "B-I": ["broken", "rude", "overcharged"],
    "I-I": ["support", "driver"],
    "B-R": ["add", "provide", "enable"],
    "I-R": ["refund", "button", "verification"],
    "O": ["the", "app", "is", "very", "and", "it", "."],
}


def generator_corpus(n_sentences: int, seed: int):
    """Sentences from a known emission/transition generator: each tag has a
    private vocabulary, tag sequences follow valid BIO patterns."""
    rng = random.Random(seed)
    patterns = [
        ["O", "O", "B-EC", "O"],
        ["O", "B-I", "I-I", "O", "O"],
        ["B-R", "I-R", "I-R", "O"],
        ["O", "B-EC", "I-EC", "O", "B-R", "I-R"],
        ["O", "O", "O"],
        ["B-I", "I-I", "O", "B-EC"],
    ]
    sentences = []
    for _ in range(n_sentences):
        tags = rng.choice(patterns)
        words = [rng.choice(TAG_VOCAB[t]) for t in tags]
        sentences.append((words, list(tags)))
    return sentences


def test_train_generator_corpus_accuracy():
    sentences = generator_corpus(100, seed=21)
    gold = annotated(sentences)
    config = TrainConfig(epochs=30, learning_rate=0.5, decay=0.05, batch_size=8,
                         l2=1e-4, seed=21)
    model, log = train_crf([gold], config)
    assert log[-1].token_accuracy >= 0.95


def test_train_loglik_trends_up():
    sentences = generator_corpus(40, seed=14)
    config = TrainConfig(epochs=15, seed=14)
    _, log = train_crf([annotated(sentences)], config)
    assert log[-1].mean_loglik > log[0].mean_loglik


def test_model_file_round_trip_decodes_identically(tmp_path):
    sentences = generator_corpus(30, seed=77)
    model, _ = train_crf([annotated(sentences)], TrainConfig(epochs=10, seed=77))
    path = tmp_path / "model.crf"
    model.save(path)
    loaded = CrfModel.load(path)
    assert loaded.feature_map == model.feature_map
    assert np.array_equal(loaded.weights, model.weights)
    for words, _ in sentences[:10]:
        feats = featurize_texts(words)
        assert loaded.viterbi_decode(feats) == model.viterbi_decode(feats)


def test_model_file_byte_identical(tmp_path):
    sentences = generator_corpus(20, seed=99)
    p1, p2 = tmp_path / "a.crf", tmp_path / "b.crf"
    train_crf([annotated(sentences)], TrainConfig(epochs=8, seed=99))[0].save(p1)
    train_crf([annotated(sentences)], TrainConfig(epochs=8, seed=99))[0].save(p2)
    assert p1.read_bytes() == p2.read_bytes()


# -- extraction pipeline ------------------------------------------------------------

def test_extract_gold_passthrough(worked_reviews, worked_gold):
    r1, _ = worked_reviews
    g1, _ = worked_gold
    result = extract_entities(r1, gold=g1)
    assert result.provenance == "gold"
    surfaces = {(s.kind, s.surface) for _, s in result.all_spans()}
    assert surfaces == {
        ("EC", "unsafe for passengers"),
        ("I", "proxy drivers"),
        ("R", "face recognition"),
    }
    assert result.review.concern_labels == frozenset({"Safety"})


def test_extract_gold_wrong_review():
    review = Review(id="other", app="Uber", text="t")
    gold = AnnotatedReview(review=Review(id="x", app="Uber", text="t"), sentences=[])
    with pytest.raises(MissingAnnotation):
        extract_entities(review, gold=gold)


def test_extract_requires_gold_or_model():
    with pytest.raises(MissingAnnotation):
        extract_entities(Review(id="a", app="Uber", text="t"))


def test_extract_all_o_review_has_no_spans():
    review = Review(id="a", app="Uber", text="nothing notable here.")
    gold = AnnotatedReview(
        review=review,
        sentences=[AnnotatedSentence(
            tokens=["nothing", "notable", "here", "."], tags=["O", "O", "O", "O"]
        )],
    )
    assert extract_entities(review, gold=gold).all_spans() == []


def test_extract_model_overfit_reproduces_gold(worked_reviews, worked_gold):
    r1, _ = worked_reviews
    g1, _ = worked_gold
    config = TrainConfig(epochs=150, learning_rate=0.5, decay=0.02, batch_size=4,
                         l2=0.0, seed=11, tolerance=0.0)
    model, _ = train_crf([g1], config)
    predicted = extract_entities(r1, crf_model=model)
    assert predicted.provenance == "predicted"
    got = {(s.kind, s.surface) for _, s in predicted.all_spans()}
    want = {(s.kind, s.surface) for _, s in g1.all_spans()}
    assert got == want
