"""Feature templates for the sequence labeler.

Each position of a POS/chunk-tagged sentence yields a deterministic set of
template strings: lexical identity, prefixes/suffixes up to length 3, POS,
chunk, word shape, digit/capitalization indicators, and a +-2 window of
words and POS tags. Tag-bigram transitions are handled structurally by the
model, not as string templates.
"""

from __future__ import annotations

from reviewkg.errors import MissingChunk, MissingPos
from reviewkg.textproc import (
    Token,
    baseline_pos_tag,
    chunk_tokens,
    tag_tokens,
    word_shape,
)

BOS = "<s>"
EOS = "</s>"


def position_templates(tokens: list[Token], i: int) -> list[str]:
    t = tokens[i]
    w = t.text
    lw = w.casefold()
    feats = [
        f"w={w}",
        f"lw={lw}",
        f"pre1={lw[:1]}",
        f"pre2={lw[:2]}",
        f"pre3={lw[:3]}",
        f"suf1={lw[-1:]}",
        f"suf2={lw[-2:]}",
        f"suf3={lw[-3:]}",
        f"pos={t.pos}",
        f"chunk={t.chunk}",
        f"shape={word_shape(w)}",
    ]
    if w and w[0].isdigit():
        feats.append("isdigit")
    if w and w[0].isupper():
        feats.append("iscap")
    for offset in (-2, -1, 1, 2):
        j = i + offset
        if 0 <= j < len(tokens):
            feats.append(f"w[{offset:+d}]={tokens[j].text.casefold()}")
            feats.append(f"pos[{offset:+d}]={tokens[j].pos}")
        else:
            marker = BOS if offset < 0 else EOS
            feats.append(f"w[{offset:+d}]={marker}")
            feats.append(f"pos[{offset:+d}]={marker}")
    return feats


def extract_features(tokens: list[Token]) -> list[list[str]]:
    """Per-position template instantiations for a tagged sentence.

    Raises MissingPos / MissingChunk when a token was not run through the
    tagging and chunking front end first.
    """
    for t in tokens:
        if t.pos is None:
            raise MissingPos(f"token {t.text!r} has no POS tag")
        if t.chunk is None:
            raise MissingChunk(f"token {t.text!r} has no chunk tag")
    return [position_templates(tokens, i) for i in range(len(tokens))]


def featurize_texts(token_texts: list[str], pos_model=None) -> list[list[str]]:
    """Featurize a sentence given as bare token strings.

    POS tags come from the given model or the deterministic baseline, then
    chunks are derived, then templates extracted. Used when annotations
    store tokens without offsets (the annotation file format).
    """
    tokens = []
    offset = 0
    for text in token_texts:
        tokens.append(Token(text=text, start=offset, end=offset + len(text)))
        offset += len(text) + 1
    if pos_model is not None:
        tokens = tag_tokens(pos_model, tokens)
    else:
        tokens = baseline_pos_tag(tokens)
    return extract_features(chunk_tokens(tokens))
