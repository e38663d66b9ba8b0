"""Linear-chain CRF over the 7-tag BIO set.

Scores decompose into per-position emission features (indexed through a
string template map) and a dense 7x7 tag-bigram transition block appended
to the weight vector. Inference is exact and runs entirely in log space
through the kernels package (compiled extension or NumPy fallback).

Training is maximum likelihood with an L2 penalty, optimized by mini-batch
gradient ascent with seeded shuffling, so a (data, config) pair always
reproduces the same weights bit for bit.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from reviewkg.annotation import BIO_TAGS, AnnotatedReview, validate_bio
from reviewkg.errors import (
    EmptyTrainingSet,
    InvalidGoldTags,
    LengthMismatch,
    ParseError,
)
from reviewkg.ner import kernels
from reviewkg.ner.features import featurize_texts

TAG_INDEX = {tag: i for i, tag in enumerate(BIO_TAGS)}

K = len(BIO_TAGS)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 0.5
    decay: float = 0.05
    batch_size: int = 8
    l2: float = 1e-4
    seed: int = 0
    tolerance: float = 1e-7

    def __post_init__(self):
        if self.epochs <= 0 or self.learning_rate <= 0 or self.batch_size <= 0:
            raise ValueError("epochs, learning_rate, and batch_size must be positive")
        if self.l2 < 0 or self.decay < 0 or self.tolerance < 0:
            raise ValueError("l2, decay, and tolerance must be non-negative")


@dataclass(frozen=True)
class TrainLogEntry:
    epoch: int
    mean_loglik: float
    token_accuracy: float


class CrfModel:
    FORMAT_HEADER = "reviewkg-crf\t1"

    def __init__(self, l2: float = 0.0, seed: int = 0):
        self.feature_map: dict[str, int] = {}
        self.l2 = l2
        self.seed = seed
        self.weights = np.zeros(K * K, dtype=np.float64)

    @property
    def n_features(self) -> int:
        return len(self.feature_map)

    def _unigram_block(self) -> np.ndarray:
        return self.weights[: self.n_features * K].reshape(self.n_features, K)

    def _transition_block(self) -> np.ndarray:
        return self.weights[self.n_features * K :].reshape(K, K)

    def grow_features(self, sentences: list[list[list[str]]]) -> None:
        """Assign ids to every template seen; resizes the weight vector,
        preserving existing weights (new feature slots start at zero)."""
        for sentence in sentences:
            for templates in sentence:
                for tpl in templates:
                    if tpl not in self.feature_map:
                        self.feature_map[tpl] = len(self.feature_map)
        wanted = self.n_features * K + K * K
        if wanted != self.weights.size:
            old_uni_size = self.weights.size - K * K
            fresh = np.zeros(wanted, dtype=np.float64)
            fresh[:old_uni_size] = self.weights[:old_uni_size]
            fresh[self.n_features * K :] = self.weights[old_uni_size:]
            self.weights = fresh

    def index_features(self, sentence_features: list[list[str]]) -> list[np.ndarray]:
        """Map templates to sorted unique ids; unknown templates are skipped."""
        out = []
        for templates in sentence_features:
            ids = {self.feature_map[t] for t in templates if t in self.feature_map}
            out.append(np.fromiter(sorted(ids), dtype=np.int64, count=len(ids)))
        return out

    def emissions(self, feature_ids: list[np.ndarray]) -> np.ndarray:
        E = np.zeros((len(feature_ids), K), dtype=np.float64)
        uni = self._unigram_block()
        for t, ids in enumerate(feature_ids):
            if ids.size:
                E[t] = uni[ids].sum(axis=0)
        return E

    # -- scoring and inference ------------------------------------------------

    def sequence_score(self, sentence_features: list[list[str]], tags: list[str]) -> float:
        ids = self.index_features(sentence_features)
        if len(tags) != len(ids):
            raise LengthMismatch(f"{len(tags)} tags for {len(ids)} positions")
        E = self.emissions(ids)
        T = self._transition_block()
        y = [TAG_INDEX[t] for t in tags]
        score = sum(E[t, y[t]] for t in range(len(y)))
        score += sum(T[y[t - 1], y[t]] for t in range(1, len(y)))
        return float(score)

    def log_partition(self, sentence_features: list[list[str]]) -> float:
        if not sentence_features:
            return 0.0
        E = self.emissions(self.index_features(sentence_features))
        return float(kernels.forward_logz(E, self._transition_block()))

    def sequence_loglik(self, sentence_features: list[list[str]], tags: list[str]) -> float:
        return self.sequence_score(sentence_features, tags) - self.log_partition(
            sentence_features
        )

    def viterbi_decode(self, sentence_features: list[list[str]]) -> list[str]:
        if not sentence_features:
            return []
        E = self.emissions(self.index_features(sentence_features))
        path = kernels.viterbi(E, self._transition_block())
        return [BIO_TAGS[i] for i in path]

    # -- gradient ---------------------------------------------------------------

    def gradient(self, batch: list[tuple[list[list[str]], list[str]]]) -> np.ndarray:
        """Gradient of sum-of-batch log-likelihood minus (l2/2)·||w||²:
        empirical feature counts minus expected counts minus l2·w."""
        grad, _ = self._gradient_and_loglik(batch)
        return grad

    def _gradient_and_loglik(
        self, batch: list[tuple[list[list[str]], list[str]]]
    ) -> tuple[np.ndarray, float]:
        if not batch:
            raise ValueError("empty batch")
        grad = np.zeros_like(self.weights)
        g_uni = grad[: self.n_features * K].reshape(self.n_features, K)
        g_trans = grad[self.n_features * K :].reshape(K, K)
        T = self._transition_block()
        total_ll = 0.0
        for sentence_features, tags in batch:
            ids = self.index_features(sentence_features)
            if len(tags) != len(ids):
                raise LengthMismatch(f"{len(tags)} tags for {len(ids)} positions")
            if not ids:
                continue
            y = [TAG_INDEX[t] for t in tags]
            E = self.emissions(ids)
            logz, marginals, pairwise = kernels.forward_backward(E, T)
            score = sum(E[t, y[t]] for t in range(len(y)))
            score += sum(T[y[t - 1], y[t]] for t in range(1, len(y)))
            total_ll += score - logz
            for t, pos_ids in enumerate(ids):
                if pos_ids.size:
                    g_uni[pos_ids, y[t]] += 1.0
                    g_uni[pos_ids] -= marginals[t]
            for t in range(1, len(y)):
                g_trans[y[t - 1], y[t]] += 1.0
            g_trans -= pairwise
        grad -= self.l2 * self.weights
        return grad, total_ll

    # -- persistence --------------------------------------------------------------

    def save(self, path: str | Path) -> None:
        lines = [self.FORMAT_HEADER]
        lines.append("tagset\t" + "\t".join(BIO_TAGS))
        lines.append(f"l2\t{self.l2!r}")
        lines.append(f"seed\t{self.seed}")
        lines.append(f"nfeatures\t{self.n_features}")
        by_id = sorted(self.feature_map.items(), key=lambda kv: kv[1])
        for tpl, fid in by_id:
            lines.append(f"f\t{fid}\t{tpl}")
        for idx in np.nonzero(self.weights)[0]:
            lines.append(f"w\t{idx}\t{float(self.weights[idx])!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CrfModel":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or lines[0] != cls.FORMAT_HEADER:
            raise ParseError(1, "not a reviewkg CRF model file")
        model = cls()
        features: dict[str, int] = {}
        weight_entries: list[tuple[int, float]] = []
        nfeatures = 0
        for line_no, line in enumerate(lines[1:], start=2):
            if not line:
                continue
            parts = line.split("\t")
            if parts[0] == "tagset":
                if tuple(parts[1:]) != BIO_TAGS:
                    raise ParseError(line_no, "model tagset does not match this build")
            elif parts[0] == "l2" and len(parts) == 2:
                model.l2 = float(parts[1])
            elif parts[0] == "seed" and len(parts) == 2:
                model.seed = int(parts[1])
            elif parts[0] == "nfeatures" and len(parts) == 2:
                nfeatures = int(parts[1])
            elif parts[0] == "f" and len(parts) == 3:
                features[parts[2]] = int(parts[1])
            elif parts[0] == "w" and len(parts) == 3:
                weight_entries.append((int(parts[1]), float(parts[2])))
            else:
                raise ParseError(line_no, f"unrecognized model line {line!r}")
        if len(features) != nfeatures:
            raise ParseError(1, "feature count header does not match feature lines")
        model.feature_map = dict(sorted(features.items(), key=lambda kv: kv[1]))
        model.weights = np.zeros(nfeatures * K + K * K, dtype=np.float64)
        for idx, value in weight_entries:
            if not 0 <= idx < model.weights.size:
                raise ParseError(1, f"weight index {idx} out of range")
            model.weights[idx] = value
        return model


def _gold_instances(
    gold: list[AnnotatedReview], pos_model=None
) -> list[tuple[list[list[str]], list[str]]]:
    instances = []
    for ar in gold:
        for sent in ar.sentences:
            if not sent.tokens:
                continue
            report = validate_bio(sent.tags)
            if not report.valid:
                first = report.violations[0]
                raise InvalidGoldTags(
                    f"review {ar.review.id}: invalid gold BIO at index {first.index}: {first.message}"
                )
            instances.append((featurize_texts(sent.tokens, pos_model), list(sent.tags)))
    return instances


def train_crf(
    gold: list[AnnotatedReview],
    config: TrainConfig = TrainConfig(),
    pos_model=None,
) -> tuple[CrfModel, list[TrainLogEntry]]:
    """Train from gold-annotated reviews; returns the model and the
    per-epoch training log (mean log-likelihood, token accuracy).

    Stops early once the mean log-likelihood improves by less than the
    configured tolerance between epochs.
    """
    instances = _gold_instances(gold, pos_model)
    if not instances:
        raise EmptyTrainingSet("no nonempty annotated sentences")

    model = CrfModel(l2=config.l2, seed=config.seed)
    model.grow_features([feats for feats, _ in instances])

    rng = random.Random(config.seed)
    order = list(range(len(instances)))
    log: list[TrainLogEntry] = []
    prev_mean = None
    for epoch in range(config.epochs):
        rng.shuffle(order)
        lr = config.learning_rate / (1.0 + config.decay * epoch)
        for start in range(0, len(order), config.batch_size):
            batch = [instances[i] for i in order[start : start + config.batch_size]]
            grad, _ = model._gradient_and_loglik(batch)
            model.weights += (lr / len(batch)) * grad

        total_ll = 0.0
        correct = 0
        count = 0
        for feats, tags in instances:
            total_ll += model.sequence_loglik(feats, tags)
            decoded = model.viterbi_decode(feats)
            correct += sum(1 for got, want in zip(decoded, tags) if got == want)
            count += len(tags)
        mean_ll = total_ll / len(instances)
        log.append(TrainLogEntry(epoch=epoch, mean_loglik=mean_ll, token_accuracy=correct / count))
        if prev_mean is not None and abs(mean_ll - prev_mean) < config.tolerance:
            break
        prev_mean = mean_ll
    return model, log


def write_train_log(log: list[TrainLogEntry], path: str | Path) -> None:
    lines = ["epoch\tmean_loglik\ttoken_accuracy"]
    for entry in log:
        lines.append(f"{entry.epoch}\t{entry.mean_loglik!r}\t{entry.token_accuracy!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
