"""Reference-based generation metrics: chrF++, corpus BLEU, ROUGE-1/2/L.

All scores are pure functions of the (hypotheses, references) pairs and are
invariant under permutations of the corpus. Each implementation documents
its exact configuration so reported numbers are reproducible:

* chrF++: character n-grams 1..6 over whitespace-free text plus word
  n-grams 1..2 (one leading/trailing punctuation character split off per
  token), beta=2, case-sensitive. Statistics are summed over the corpus;
  precision and recall are averaged over orders where both sides produced
  n-grams, then combined into one F-score on a 0..100 scale.
* BLEU: corpus BLEU-4 over 13a-style tokens, modified n-gram precision,
  brevity penalty, effective order capped at the longest order with any
  hypothesis n-grams, exponential smoothing for zero-match orders.
* ROUGE: unigram/bigram overlap and longest-common-subsequence P/R/F1 over
  lowercased alphanumeric tokens; the corpus score is the mean per-pair F1
  scaled to 0..100. F1 is the reported variant (recall is also returned).
"""

from __future__ import annotations

import math
import re
import string
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from ..errors import ValidationError

CHAR_ORDER = 6
WORD_ORDER = 2
CHRF_BETA = 2
BLEU_ORDER = 4

CHRF_CONFIG = "chrF2++|nc:6|nw:2|beta:2|space:false|eff:yes|case:mixed"
BLEU_CONFIG = "BLEU|nrefs:1|case:mixed|eff:yes|tok:13a|smooth:exp"
ROUGE_CONFIG = "ROUGE|variants:1,2,L|score:f1|tok:alnum-lower"


def _check_pairs(hypotheses: Sequence[str], references: Sequence[str]) -> None:
    if len(hypotheses) != len(references):
        raise ValidationError(
            f"hypotheses/references length mismatch: {len(hypotheses)} vs {len(references)}"
        )
    if not hypotheses:
        raise ValidationError("need at least one hypothesis/reference pair")


# ---------------------------------------------------------------------------
# chrF++


def _char_ngrams(text: str, n: int) -> Counter:
    compact = "".join(ch for ch in text if not ch.isspace())
    return Counter(compact[i : i + n] for i in range(len(compact) - n + 1))


def _chrf_word_tokens(text: str) -> list[str]:
    tokens: list[str] = []
    for word in text.split():
        if len(word) > 1 and word[-1] in string.punctuation:
            tokens.extend((word[:-1], word[-1]))
        elif len(word) > 1 and word[0] in string.punctuation:
            tokens.extend((word[0], word[1:]))
        else:
            tokens.append(word)
    return tokens


def _word_ngrams(text: str, n: int) -> Counter:
    tokens = _chrf_word_tokens(text)
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def chrf_pp(hypotheses: Sequence[str], references: Sequence[str]) -> float:
    """Corpus chrF++ on a 0..100 scale."""
    _check_pairs(hypotheses, references)
    n_orders = CHAR_ORDER + WORD_ORDER
    stats = [[0, 0, 0] for _ in range(n_orders)]  # hyp, ref, match per order

    for hyp, ref in zip(hypotheses, references):
        for idx in range(n_orders):
            if idx < CHAR_ORDER:
                hyp_counts = _char_ngrams(hyp, idx + 1)
                ref_counts = _char_ngrams(ref, idx + 1)
            else:
                hyp_counts = _word_ngrams(hyp, idx - CHAR_ORDER + 1)
                ref_counts = _word_ngrams(ref, idx - CHAR_ORDER + 1)
            stats[idx][0] += sum(hyp_counts.values())
            stats[idx][1] += sum(ref_counts.values())
            stats[idx][2] += sum((hyp_counts & ref_counts).values())

    avg_prec = 0.0
    avg_rec = 0.0
    effective = 0
    for n_hyp, n_ref, n_match in stats:
        if n_hyp > 0 and n_ref > 0:
            avg_prec += n_match / n_hyp
            avg_rec += n_match / n_ref
            effective += 1
    if effective == 0:
        return 0.0
    avg_prec /= effective
    avg_rec /= effective
    beta_sq = CHRF_BETA**2
    denom = beta_sq * avg_prec + avg_rec
    if denom == 0:
        return 0.0
    return 100.0 * (1 + beta_sq) * avg_prec * avg_rec / denom


# ---------------------------------------------------------------------------
# BLEU


def tokenize_13a(line: str) -> list[str]:
    """Minimal WMT-style tokenization: split out punctuation and symbols,
    keeping digit-internal periods/commas and non-digit-adjacent dashes."""
    norm = line.replace("<skipped>", "")
    norm = norm.replace("-\n", "").replace("\n", " ")
    norm = norm.replace("&quot;", '"').replace("&amp;", "&")
    norm = norm.replace("&lt;", "<").replace("&gt;", ">")
    norm = f" {norm} "
    norm = re.sub(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])", r" \1 ", norm)
    norm = re.sub(r"([^0-9])([\.,])", r"\1 \2 ", norm)
    norm = re.sub(r"([\.,])([^0-9])", r" \1 \2", norm)
    norm = re.sub(r"([0-9])(-)", r"\1 \2 ", norm)
    return norm.split()


def _token_ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def sacre_bleu(hypotheses: Sequence[str], references: Sequence[str]) -> float:
    """Corpus BLEU on a 0..100 scale (configuration: BLEU_CONFIG)."""
    _check_pairs(hypotheses, references)
    correct = [0] * BLEU_ORDER
    total = [0] * BLEU_ORDER
    sys_len = 0
    ref_len = 0

    for hyp, ref in zip(hypotheses, references):
        hyp_tokens = tokenize_13a(hyp)
        ref_tokens = tokenize_13a(ref)
        sys_len += len(hyp_tokens)
        ref_len += len(ref_tokens)
        for n in range(1, BLEU_ORDER + 1):
            hyp_counts = _token_ngrams(hyp_tokens, n)
            if not hyp_counts:
                break
            ref_counts = _token_ngrams(ref_tokens, n)
            correct[n - 1] += sum((hyp_counts & ref_counts).values())
            total[n - 1] += sum(hyp_counts.values())

    effective = 0
    for n in range(1, BLEU_ORDER + 1):
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

    brevity = 1.0
    if sys_len < ref_len:
        brevity = math.exp(1.0 - ref_len / sys_len)
    # clamp float round-off so a perfect corpus scores exactly 100
    return min(100.0, brevity * math.exp(log_sum / effective))


# ---------------------------------------------------------------------------
# ROUGE

_ALNUM_RE = re.compile(r"[a-z0-9]+")

VARIANTS = ("R1", "R2", "RL")


def _rouge_tokens(text: str) -> list[str]:
    return _ALNUM_RE.findall(text.lower())


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        row = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                row[j] = max(prev[j], row[j - 1])
        prev = row
    return prev[len(b)]


def _prf(overlap: int, hyp_total: int, ref_total: int) -> tuple[float, float, float]:
    if overlap == 0 or hyp_total == 0 or ref_total == 0:
        return 0.0, 0.0, 0.0
    precision = overlap / hyp_total
    recall = overlap / ref_total
    f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def rouge(hypothesis: str, reference: str, variant: str) -> tuple[float, float, float]:
    """Per-pair (precision, recall, f1) in [0, 1]; empty inputs score 0."""
    if variant not in VARIANTS:
        raise ValidationError(f"unknown ROUGE variant {variant!r}; expected one of {VARIANTS}")
    hyp = _rouge_tokens(hypothesis)
    ref = _rouge_tokens(reference)
    if variant == "R1":
        overlap = sum((Counter(hyp) & Counter(ref)).values())
        return _prf(overlap, len(hyp), len(ref))
    if variant == "R2":
        overlap = sum((_token_ngrams(hyp, 2) & _token_ngrams(ref, 2)).values())
        return _prf(overlap, max(len(hyp) - 1, 0), max(len(ref) - 1, 0))
    overlap = _lcs_length(hyp, ref)
    return _prf(overlap, len(hyp), len(ref))


def rouge_corpus(hypotheses: Sequence[str], references: Sequence[str], variant: str) -> float:
    """Mean per-pair F1 scaled to 0..100."""
    _check_pairs(hypotheses, references)
    f_sum = sum(rouge(h, r, variant)[2] for h, r in zip(hypotheses, references))
    return 100.0 * f_sum / len(hypotheses)


# ---------------------------------------------------------------------------
# combined report


@dataclass
class GenerationScores:
    chrf_pp: float
    sacre_bleu: float
    rouge1: float
    rouge2: float
    rougeL: float
    n_pairs: int = 0

    def to_dict(self) -> dict:
        return {
            "chrf_pp": self.chrf_pp,
            "sacre_bleu": self.sacre_bleu,
            "rouge1": self.rouge1,
            "rouge2": self.rouge2,
            "rougeL": self.rougeL,
            "n_pairs": self.n_pairs,
            "config": {
                "chrf": CHRF_CONFIG,
                "bleu": BLEU_CONFIG,
                "rouge": ROUGE_CONFIG,
            },
        }


def evaluate_generation(hypotheses: Sequence[str], references: Sequence[str]) -> GenerationScores:
    _check_pairs(hypotheses, references)
    return GenerationScores(
        chrf_pp=chrf_pp(hypotheses, references),
        sacre_bleu=sacre_bleu(hypotheses, references),
        rouge1=rouge_corpus(hypotheses, references, "R1"),
        rouge2=rouge_corpus(hypotheses, references, "R2"),
        rougeL=rouge_corpus(hypotheses, references, "RL"),
        n_pairs=len(hypotheses),
    )
