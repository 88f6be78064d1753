"""Caption tokenisation and the word/index bijection."""
from __future__ import annotations

import json
import re
from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

BOS, EOS, UNK = "<bos>", "<eos>", "<unk>"
RESERVED = (BOS, EOS, UNK)

_PUNCT = re.compile(r"[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Lowercase, drop punctuation, split on whitespace."""
    return _PUNCT.sub("", text.lower()).split()


class Vocabulary:
    def __init__(self, words: Sequence[str]):
        words = list(words)
        if tuple(words[:3]) != RESERVED:
            raise ValueError(f"vocabulary must start with {RESERVED}")
        if len(set(words)) != len(words):
            raise ValueError("vocabulary words must be unique")
        self.words = words
        self.index = {w: i for i, w in enumerate(words)}

    bos = 0
    eos = 1
    unk = 2

    def __len__(self):
        return len(self.words)

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.words == other.words

    def encode(self, tokens: Iterable[str]) -> list[int]:
        """BOS + word ids + EOS, unknown words mapped to UNK."""
        return [self.bos] + [self.index.get(t, self.unk) for t in tokens] + [self.eos]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.words[i] for i in ids if i not in (self.bos, self.eos, self.unk)]

    def to_json(self) -> list[str]:
        return list(self.words)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.words))

    @classmethod
    def load(cls, path) -> Vocabulary:
        return cls(json.loads(Path(path).read_text()))


def build_vocab(corpus: Iterable[str | Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Words seen at least ``min_count`` times, most frequent first, ties alphabetical."""
    counts: Counter[str] = Counter()
    n = 0
    for caption in corpus:
        n += 1
        toks = tokenize(caption) if isinstance(caption, str) else tokenize(" ".join(caption))
        counts.update(toks)
    if n == 0:
        raise ValueError("empty corpus")
    kept = sorted((w for w, c in counts.items() if c >= min_count), key=lambda w: (-counts[w], w))
    if not kept:
        raise ValueError(f"no word occurs at least {min_count} times")
    return Vocabulary(list(RESERVED) + kept)
