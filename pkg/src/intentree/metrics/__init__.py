"""Evaluation computations: annotation consistency, generation metrics, agreement."""

from .agreement import KappaReport, fleiss_kappa, majority_vote
from .classification import (
    ClassificationReport,
    ConfusionMatrix,
    consistency_report,
    filter_single_edu,
)
from .generation import (
    GenerationScores,
    chrf_pp,
    evaluate_generation,
    rouge,
    rouge_corpus,
    sacre_bleu,
)

__all__ = [
    "ClassificationReport",
    "ConfusionMatrix",
    "GenerationScores",
    "KappaReport",
    "chrf_pp",
    "consistency_report",
    "evaluate_generation",
    "filter_single_edu",
    "fleiss_kappa",
    "majority_vote",
    "rouge",
    "rouge_corpus",
    "sacre_bleu",
]
