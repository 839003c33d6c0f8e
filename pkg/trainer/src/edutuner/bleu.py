"""Corpus BLEU for the periodic validation log.

Whitespace tokens, orders 1..4 with effective-order capping, exponential
smoothing for zero-match orders, brevity penalty; scored 0..100. Kept
self-contained so the trainer has no dependency on the annotation toolkit.
"""

from __future__ import annotations

import math
from collections import Counter


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(hypotheses: list[str], references: list[str]) -> float:
    correct = [0] * 4
    total = [0] * 4
    sys_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_tokens = hyp.split()
        ref_tokens = ref.split()
        sys_len += len(hyp_tokens)
        ref_len += len(ref_tokens)
        for n in range(1, 5):
            hyp_counts = _ngrams(hyp_tokens, n)
            if not hyp_counts:
                break
            ref_counts = _ngrams(ref_tokens, n)
            correct[n - 1] += sum((hyp_counts & ref_counts).values())
            total[n - 1] += sum(hyp_counts.values())

    effective = 0
    for n in range(1, 5):
        if total[n - 1] > 0:
            effective = n
    if effective == 0 or sys_len == 0:
        return 0.0

    smooth = 1.0
    log_sum = 0.0
    for n in range(1, effective + 1):
        if correct[n - 1] == 0:
            smooth *= 2.0
            precision = 100.0 / (smooth * total[n - 1])
        else:
            precision = 100.0 * correct[n - 1] / total[n - 1]
        log_sum += math.log(precision)

    brevity = 1.0 if sys_len >= ref_len else math.exp(1.0 - ref_len / sys_len)
    return min(100.0, brevity * math.exp(log_sum / effective))
