"""Brute-force corpus BLEU: n-grams enumerated by nested slicing, no Counter."""
import math


def _count(seq, gram):
    n = len(gram)
    return sum(1 for i in range(len(seq) - n + 1) if tuple(seq[i : i + n]) == gram)


def brute_force_bleu(cands, refs_list, max_n):
    clipped = [0] * max_n
    totals = [0] * max_n
    c_len = r_len = 0
    for cand, refs in zip(cands, refs_list):
        c_len += len(cand)
        best = None
        for r in refs:
            key = (abs(len(r) - len(cand)), len(r))
            if best is None or key < best:
                best = key
        r_len += best[1]
        for n in range(1, max_n + 1):
            seen = []
            for i in range(len(cand) - n + 1):
                gram = tuple(cand[i : i + n])
                totals[n - 1] += 1
                if gram in seen:
                    continue
                seen.append(gram)
                clipped[n - 1] += min(_count(cand, gram), max(_count(r, gram) for r in refs))
    if c_len == 0 or 0 in clipped:
        return 0.0
    geo = math.exp(sum(math.log(clipped[k] / totals[k]) for k in range(max_n)) / max_n)
    bp = 1.0 if c_len > r_len else math.exp(1 - r_len / c_len)
    return bp * geo
