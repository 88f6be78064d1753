"""Corpus-level BLEU with clipped n-gram precision and brevity penalty."""
from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

Sentence = Sequence[str]


def ngrams(tokens: Sentence, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _closest_ref_length(c: int, refs: Sequence[Sentence]) -> int:
    # nearest reference length, the shorter one on ties
    return min((len(r) for r in refs), key=lambda r: (abs(r - c), r))


def corpus_bleu(candidates: Sequence[Sentence], references: Sequence[Sequence[Sentence]], max_n: int = 4) -> float:
    """BLEU@max_n of a candidate corpus against per-candidate reference sets.

    Counts are pooled over the corpus before the precisions are formed; an
    empty candidate contributes length 0 and no n-grams.
    """
    if not 1 <= max_n <= 4:
        raise ValueError("max_n must be between 1 and 4")
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates but {len(references)} reference sets")
    matched = [0] * max_n
    total = [0] * max_n
    cand_len = ref_len = 0
    for cand, refs in zip(candidates, references):
        if not refs:
            raise ValueError("every candidate needs at least one reference")
        cand_len += len(cand)
        ref_len += _closest_ref_length(len(cand), refs)
        for n in range(1, max_n + 1):
            counts = ngrams(cand, n)
            best: Counter = Counter()
            for r in refs:
                best |= ngrams(r, n)
            matched[n - 1] += sum(min(c, best[g]) for g, c in counts.items())
            total[n - 1] += sum(counts.values())
    if cand_len == 0 or any(m == 0 for m in matched):
        return 0.0
    log_p = sum(math.log(m / t) for m, t in zip(matched, total)) / max_n
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return bp * math.exp(log_p)


def bleu_scores(candidates, references) -> dict[str, float]:
    return {f"bleu{n}": corpus_bleu(candidates, references, n) for n in range(1, 5)}
