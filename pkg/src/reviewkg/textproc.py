"""Deterministic text processing front end: sentence segmentation,
tokenization, a trainable averaged-perceptron POS tagger, and a
pattern-based NP/VP chunker.

Everything here is rule-driven or seed-deterministic so pipeline runs are
reproducible without external models.

Segmentation rules: a run of sentence terminators {. ! ?} followed by
whitespace or end-of-text closes a sentence, except when the terminating
period belongs to a known abbreviation or the run is an ellipsis (three or
more dots) in the middle of the text.

Tokenization rules: split on whitespace, peel leading and trailing
punctuation characters off as single-character tokens, then split the
remaining core at internal apostrophes so contractions come apart
("driver's" -> "driver", "'s").
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from pathlib import Path

from reviewkg.errors import EmptyTrainingSet, MissingPos, ParseError

POS_TAGS = (
    "NOUN", "VERB", "ADJ", "ADV", "PRON", "DET",
    "ADP", "NUM", "CONJ", "PRT", "PUNCT", "X",
)

CHUNK_TAGS = ("B-NP", "I-NP", "B-VP", "I-VP", "O")

TERMINATORS = ".!?"

ABBREVIATIONS = frozenset({"mr.", "dr.", "v.", "etc.", "e.g.", "i.e."})

APOSTROPHES = "'’"


@dataclass
class Token:
    text: str
    start: int
    end: int
    pos: str | None = None
    chunk: str | None = None

    def shifted(self, offset: int) -> "Token":
        return replace(self, start=self.start + offset, end=self.end + offset)


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Split text into sentence spans (start, end character offsets).

    Spans are trimmed to non-whitespace content, ordered, and together
    cover every non-whitespace character of the input.
    """
    spans: list[tuple[int, int]] = []
    n = len(text)
    start = 0
    i = 0
    while i < n:
        if text[i] not in TERMINATORS:
            i += 1
            continue
        j = i
        while j < n and text[j] in TERMINATORS:
            j += 1
        run = text[i:j]
        at_end = j >= n
        followed_by_space = at_end or text[j].isspace()
        boundary = followed_by_space
        if boundary and not at_end:
            if set(run) == {"."} and len(run) >= 3:
                boundary = False  # ellipsis mid-text
            elif run == "." and _word_ending_at(text, i) in ABBREVIATIONS:
                boundary = False
        if boundary and not at_end:
            spans.append((start, j))
            start = j
        i = j
    if start < n:
        spans.append((start, n))
    return [_trim(text, a, b) for a, b in spans if text[a:b].strip()]


def _word_ending_at(text: str, dot_index: int) -> str:
    """Whitespace-delimited token ending at the dot, lowercased, with
    leading punctuation stripped (so "(etc." still matches "etc.")."""
    k = dot_index
    while k > 0 and not text[k - 1].isspace():
        k -= 1
    word = text[k : dot_index + 1].casefold()
    return word.lstrip("\"'`([{")


def _trim(text: str, a: int, b: int) -> tuple[int, int]:
    while a < b and text[a].isspace():
        a += 1
    while b > a and text[b - 1].isspace():
        b -= 1
    return (a, b)


def tokenize(sentence: str) -> list[Token]:
    """Tokenize a sentence; offsets index into the given string."""
    tokens: list[Token] = []
    i = 0
    n = len(sentence)
    while i < n:
        if sentence[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not sentence[j].isspace():
            j += 1
        tokens.extend(_split_chunk(sentence, i, j))
        i = j
    return tokens


def _is_punct_char(ch: str) -> bool:
    return not ch.isalnum()


def _split_chunk(sentence: str, a: int, b: int) -> list[Token]:
    head: list[Token] = []
    tail: list[Token] = []
    while a < b and _is_punct_char(sentence[a]):
        head.append(Token(sentence[a], a, a + 1))
        a += 1
    while b > a and _is_punct_char(sentence[b - 1]):
        tail.append(Token(sentence[b - 1], b - 1, b))
        b -= 1
    tail.reverse()
    core: list[Token] = []
    if a < b:
        piece_start = a
        for k in range(a + 1, b):
            if sentence[k] in APOSTROPHES:
                core.append(Token(sentence[piece_start:k], piece_start, k))
                piece_start = k
        core.append(Token(sentence[piece_start:b], piece_start, b))
    return head + core + tail


# ---------------------------------------------------------------------------
# POS tagging
# ---------------------------------------------------------------------------

def word_shape(word: str) -> str:
    out = []
    for ch in word:
        if ch.isdigit():
            out.append("d")
        elif ch.isalpha():
            out.append("X" if ch.isupper() else "x")
        else:
            out.append(ch)
    return "".join(out)


def _pos_features(i: int, words: list[str], prev_tag: str) -> list[str]:
    w = words[i]
    lw = w.casefold()
    prev_w = words[i - 1].casefold() if i > 0 else "<s>"
    next_w = words[i + 1].casefold() if i + 1 < len(words) else "</s>"
    feats = [
        "bias",
        f"w={w}",
        f"lw={lw}",
        f"suf1={lw[-1:]}",
        f"suf2={lw[-2:]}",
        f"suf3={lw[-3:]}",
        f"prevw={prev_w}",
        f"nextw={next_w}",
        f"prevtag={prev_tag}",
        f"shape={word_shape(w)}",
    ]
    if w and w[0].isdigit():
        feats.append("isdigit")
    return feats


class PosModel:
    """Averaged-perceptron POS tagger over the 12-tag universal set.

    Weights map feature string -> {tag: weight}. Training is greedy
    left-to-right with seeded shuffling, so equal seeds give bitwise-equal
    weight maps.
    """

    FORMAT_HEADER = "reviewkg-pos\t1"

    def __init__(self):
        self.weights: dict[str, dict[str, float]] = {}
        self.iterations = 0
        self.seed = 0
        self.train_accuracy = 0.0

    def score(self, feats: list[str]) -> dict[str, float]:
        scores = dict.fromkeys(POS_TAGS, 0.0)
        for f in feats:
            per_tag = self.weights.get(f)
            if per_tag is None:
                continue
            for tag, w in per_tag.items():
                scores[tag] += w
        return scores

    def predict(self, feats: list[str]) -> str:
        scores = self.score(feats)
        best = POS_TAGS[0]
        best_score = scores[best]
        for tag in POS_TAGS[1:]:
            if scores[tag] > best_score:
                best, best_score = tag, scores[tag]
        return best

    def save(self, path: str | Path) -> None:
        lines = [self.FORMAT_HEADER]
        lines.append(f"meta\titerations\t{self.iterations}")
        lines.append(f"meta\tseed\t{self.seed}")
        lines.append(f"meta\taccuracy\t{self.train_accuracy!r}")
        for feat in sorted(self.weights):
            for tag in sorted(self.weights[feat]):
                w = self.weights[feat][tag]
                if w != 0.0:
                    lines.append(f"w\t{feat}\t{tag}\t{w!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PosModel":
        model = cls()
        text = Path(path).read_text(encoding="utf-8")
        lines = text.splitlines()
        if not lines or lines[0] != cls.FORMAT_HEADER:
            raise ParseError(1, "not a reviewkg POS model file")
        for line_no, line in enumerate(lines[1:], start=2):
            if not line:
                continue
            parts = line.split("\t")
            if parts[0] == "meta" and len(parts) == 3:
                if parts[1] == "iterations":
                    model.iterations = int(parts[2])
                elif parts[1] == "seed":
                    model.seed = int(parts[2])
                elif parts[1] == "accuracy":
                    model.train_accuracy = float(parts[2])
            elif parts[0] == "w" and len(parts) == 4:
                feat, tag, w = parts[1], parts[2], float(parts[3])
                if tag not in POS_TAGS:
                    raise ParseError(line_no, f"unknown POS tag {tag!r}")
                model.weights.setdefault(feat, {})[tag] = w
            else:
                raise ParseError(line_no, f"unrecognized model line {line!r}")
        return model


def train_pos_tagger(
    tagged_corpus: list[tuple[list[str], list[str]]],
    iterations: int = 5,
    seed: int = 0,
) -> PosModel:
    """Train an averaged perceptron on (words, gold tags) sentences.

    Raises EmptyTrainingSet when no nonempty sentence is given, and
    ValueError when a gold tag is outside the tagset.
    """
    data = [(w, t) for w, t in tagged_corpus if w]
    if not data:
        raise EmptyTrainingSet("no training sentences")
    for words, tags in data:
        if len(words) != len(tags):
            raise ValueError("token/tag length mismatch in training sentence")
        for tag in tags:
            if tag not in POS_TAGS:
                raise ValueError(f"gold tag {tag!r} outside tagset")

    model = PosModel()
    model.iterations = iterations
    model.seed = seed
    totals: dict[str, dict[str, float]] = {}
    stamps: dict[str, dict[str, int]] = {}
    step = 0
    rng = random.Random(seed)
    order = list(range(len(data)))

    def update(feat: str, tag: str, delta: float) -> None:
        per_tag = model.weights.setdefault(feat, {})
        tot = totals.setdefault(feat, {})
        stp = stamps.setdefault(feat, {})
        tot[tag] = tot.get(tag, 0.0) + per_tag.get(tag, 0.0) * (step - stp.get(tag, 0))
        stp[tag] = step
        per_tag[tag] = per_tag.get(tag, 0.0) + delta

    for _ in range(iterations):
        rng.shuffle(order)
        for idx in order:
            words, gold = data[idx]
            prev_tag = "<s>"
            for i in range(len(words)):
                feats = _pos_features(i, words, prev_tag)
                guess = model.predict(feats)
                if guess != gold[i]:
                    for f in feats:
                        update(f, gold[i], 1.0)
                        update(f, guess, -1.0)
                prev_tag = guess
                step += 1

    # average: replace each weight with its mean over all update steps
    for feat, per_tag in model.weights.items():
        for tag in per_tag:
            total = totals[feat].get(tag, 0.0)
            total += per_tag[tag] * (step - stamps[feat].get(tag, 0))
            per_tag[tag] = total / step if step else 0.0

    correct = 0
    count = 0
    for words, gold in data:
        tagged = tag_words(model, words)
        correct += sum(1 for got, want in zip(tagged, gold) if got == want)
        count += len(words)
    model.train_accuracy = correct / count if count else 0.0
    return model


def tag_words(model: PosModel, words: list[str]) -> list[str]:
    tags: list[str] = []
    prev_tag = "<s>"
    for i in range(len(words)):
        tag = model.predict(_pos_features(i, words, prev_tag))
        tags.append(tag)
        prev_tag = tag
    return tags


def tag_tokens(model: PosModel, tokens: list[Token]) -> list[Token]:
    """Fill the pos field of every token; text and offsets are untouched."""
    tags = tag_words(model, [t.text for t in tokens])
    return [replace(t, pos=tag) for t, tag in zip(tokens, tags)]


# Deterministic fallback used when no trained model is supplied: closed-class
# lookups plus shape and suffix rules, defaulting to NOUN.
_BASELINE_LEXICON = {
    "DET": {"the", "a", "an", "this", "that", "these", "those"},
    "PRON": {"i", "you", "he", "she", "it", "we", "they", "them", "me", "him",
             "her", "us", "my", "your", "his", "its", "our", "their", "who", "what"},
    "ADP": {"in", "on", "at", "of", "for", "with", "by", "from", "about",
            "before", "after", "into", "instead", "without", "during"},
    "CONJ": {"and", "or", "but", "so", "because", "if", "while"},
    "PRT": {"to", "not", "'t", "n't", "'s"},
    "VERB": {"is", "are", "was", "were", "be", "been", "am", "do", "does",
             "did", "have", "has", "had", "can", "could", "should", "would",
             "will", "must", "may", "might"},
    "ADV": {"very", "too", "also", "just", "there", "here", "already",
            "again", "never", "always", "v"},
}
_BASELINE_BY_WORD = {w: tag for tag, ws in _BASELINE_LEXICON.items() for w in ws}


def baseline_pos_tag(tokens: list[Token]) -> list[Token]:
    out: list[Token] = []
    for t in tokens:
        out.append(replace(t, pos=_baseline_tag(t.text)))
    return out


def _baseline_tag(word: str) -> str:
    if not any(ch.isalnum() for ch in word):
        return "PUNCT"
    if word[0].isdigit():
        return "NUM"
    lw = word.casefold()
    if lw in _BASELINE_BY_WORD:
        return _BASELINE_BY_WORD[lw]
    if lw.endswith("ly"):
        return "ADV"
    if lw.endswith(("ing", "ed", "ize", "ise")):
        return "VERB"
    if lw.endswith(("ous", "ful", "ive", "able", "al", "ic", "er", "est", "safe")):
        return "ADJ"
    return "NOUN"


# ---------------------------------------------------------------------------
# Chunking
# ---------------------------------------------------------------------------

_NP_HEAD = {"NOUN", "PRON"}


def chunk_tokens(tokens: list[Token]) -> list[Token]:
    """Assign BIO chunk tags by longest-match application of the grammar
    NP := DET? ADJ* (NOUN|PRON)+ and VP := PRT? VERB+ ADV?.

    Raises MissingPos if any token lacks a POS tag.
    """
    for t in tokens:
        if t.pos is None:
            raise MissingPos(f"token {t.text!r} has no POS tag")
    tags = ["O"] * len(tokens)
    i = 0
    n = len(tokens)
    while i < n:
        end = _match_np(tokens, i)
        kind = "NP"
        if end is None:
            end = _match_vp(tokens, i)
            kind = "VP"
        if end is None:
            i += 1
            continue
        tags[i] = f"B-{kind}"
        for k in range(i + 1, end):
            tags[k] = f"I-{kind}"
        i = end
    return [replace(t, chunk=tag) for t, tag in zip(tokens, tags)]


def _match_np(tokens: list[Token], i: int) -> int | None:
    j = i
    n = len(tokens)
    if j < n and tokens[j].pos == "DET":
        j += 1
    while j < n and tokens[j].pos == "ADJ":
        j += 1
    heads = 0
    while j < n and tokens[j].pos in _NP_HEAD:
        j += 1
        heads += 1
    return j if heads else None


def _match_vp(tokens: list[Token], i: int) -> int | None:
    j = i
    n = len(tokens)
    if j < n and tokens[j].pos == "PRT":
        j += 1
    verbs = 0
    while j < n and tokens[j].pos == "VERB":
        j += 1
        verbs += 1
    if not verbs:
        return None
    if j < n and tokens[j].pos == "ADV":
        j += 1
    return j


# ---------------------------------------------------------------------------
# Pipeline helpers and training-data IO
# ---------------------------------------------------------------------------

def process_text(text: str, pos_model: PosModel | None = None) -> list[list[Token]]:
    """Segment, tokenize, POS-tag, and chunk a review text.

    Token offsets index into the full text. Tags come from the given model
    or, absent one, the deterministic baseline tagger.
    """
    sentences: list[list[Token]] = []
    for a, b in split_sentences(text):
        tokens = [t.shifted(a) for t in tokenize(text[a:b])]
        if pos_model is not None:
            tokens = tag_tokens(pos_model, tokens)
        else:
            tokens = baseline_pos_tag(tokens)
        sentences.append(chunk_tokens(tokens))
    return sentences


def read_pos_corpus(path: str | Path) -> list[tuple[list[str], list[str]]]:
    """Read "token<TAB>tag" lines; a blank line ends a sentence."""
    sentences: list[tuple[list[str], list[str]]] = []
    words: list[str] = []
    tags: list[str] = []
    for line_no, raw in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not raw.strip():
            if words:
                sentences.append((words, tags))
                words, tags = [], []
            continue
        parts = raw.split("\t")
        if len(parts) != 2 or not parts[0]:
            raise ParseError(line_no, f"expected token<TAB>tag, got {raw!r}")
        if parts[1] not in POS_TAGS:
            raise ParseError(line_no, f"unknown POS tag {parts[1]!r}")
        words.append(parts[0])
        tags.append(parts[1])
    if words:
        sentences.append((words, tags))
    return sentences


def write_pos_corpus(
    sentences: list[tuple[list[str], list[str]]], path: str | Path
) -> None:
    blocks = []
    for words, tags in sentences:
        blocks.append("\n".join(f"{w}\t{t}" for w, t in zip(words, tags)))
    Path(path).write_text("\n\n".join(blocks) + "\n", encoding="utf-8")
