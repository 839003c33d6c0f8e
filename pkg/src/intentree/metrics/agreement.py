"""Human-evaluation statistics: Fleiss' kappa and per-item majority voting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..errors import UndefinedMetricError, ValidationError

VOTE_CHOICES = ("A", "B", "both-good", "both-bad")


@dataclass
class KappaReport:
    kappa: float
    n_items: int
    n_raters: int
    n_categories: int
    per_category_marginals: list[float]
    observed_agreement: float
    expected_agreement: float

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "n_items": self.n_items,
            "n_raters": self.n_raters,
            "n_categories": self.n_categories,
            "per_category_marginals": list(self.per_category_marginals),
            "observed_agreement": self.observed_agreement,
            "expected_agreement": self.expected_agreement,
        }


def fleiss_kappa(ratings: Sequence[Sequence[int]]) -> KappaReport:
    """Fleiss' kappa from an items x categories count matrix.

    Every item must be rated by the same number of raters (row sums equal,
    n >= 2). When expected agreement is 1 the statistic is undefined unless
    observed agreement is also perfect, in which case kappa is 1.
    """
    if not ratings or not ratings[0]:
        raise ValidationError("ratings matrix must be nonempty")
    n_items = len(ratings)
    n_categories = len(ratings[0])
    if any(len(row) != n_categories for row in ratings):
        raise ValidationError("all rating rows must have the same number of categories")
    if any(c < 0 for row in ratings for c in row):
        raise ValidationError("rating counts must be non-negative")
    raters = sum(ratings[0])
    if raters < 2:
        raise ValidationError("need at least two raters per item")
    if any(sum(row) != raters for row in ratings):
        raise ValidationError("every item must be rated by the same number of raters")

    observed = 0.0
    for row in ratings:
        agree = sum(c * c for c in row) - raters
        observed += agree / (raters * (raters - 1))
    observed /= n_items

    marginals = []
    for j in range(n_categories):
        column = sum(row[j] for row in ratings)
        marginals.append(column / (n_items * raters))
    expected = sum(p * p for p in marginals)

    if expected == 1.0:
        if observed == 1.0:
            kappa = 1.0
        else:
            raise UndefinedMetricError(
                "kappa undefined: expected agreement is 1 with imperfect observed agreement"
            )
    else:
        kappa = (observed - expected) / (1.0 - expected)

    return KappaReport(
        kappa=kappa,
        n_items=n_items,
        n_raters=raters,
        n_categories=n_categories,
        per_category_marginals=marginals,
        observed_agreement=observed,
        expected_agreement=expected,
    )


@dataclass
class MajorityVoteReport:
    decisions: list[Optional[str]]  # per-item winner, None marks a tie
    preference_rate: float  # wins of "A" over decided items
    wins: dict[str, int] = field(default_factory=dict)
    ties: int = 0
    n_items: int = 0

    def to_dict(self) -> dict:
        return {
            "decisions": list(self.decisions),
            "preference_rate": self.preference_rate,
            "wins": dict(self.wins),
            "ties": self.ties,
            "n_items": self.n_items,
        }


def majority_vote(votes: Sequence[Sequence[str]]) -> MajorityVoteReport:
    """Strict plurality winner per item over choices {A, B, both-good, both-bad}.

    The preference rate is wins(A) / decided items; ties are excluded from
    the denominator and reported separately.
    """
    if not votes:
        raise ValidationError("majority_vote needs at least one item")
    decisions: list[Optional[str]] = []
    wins: dict[str, int] = {}
    ties = 0
    for idx, item_votes in enumerate(votes):
        if not item_votes:
            raise ValidationError(f"item {idx} has no votes")
        for choice in item_votes:
            if choice not in VOTE_CHOICES:
                raise ValidationError(
                    f"item {idx}: unknown choice {choice!r}; expected one of {VOTE_CHOICES}"
                )
        counts: dict[str, int] = {}
        for choice in item_votes:
            counts[choice] = counts.get(choice, 0) + 1
        best = max(counts.values())
        leaders = [c for c, n in counts.items() if n == best]
        if len(leaders) == 1:
            decisions.append(leaders[0])
            wins[leaders[0]] = wins.get(leaders[0], 0) + 1
        else:
            decisions.append(None)
            ties += 1

    decided = len(votes) - ties
    rate = (wins.get("A", 0) / decided) if decided else 0.0
    return MajorityVoteReport(
        decisions=decisions,
        preference_rate=rate,
        wins=wins,
        ties=ties,
        n_items=len(votes),
    )
