"""Information measures over candidate partitions and matching-question answers.

Everything is in bits (base-2 logarithms). Because a correct partition
answers any matching question deterministically, each partition is consistent
with exactly one answer vector; the distribution over answers is therefore
computed by grouping partitions by their answer signature, never by
enumerating all 2^k vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import fsum, log2
from typing import Iterable, Iterator, Mapping

from .core import MatchPair, Partition, ResultSet

# Probabilities below this are treated as exact zeros in entropy terms.
PROB_FLOOR = 1e-15

AnswerVector = tuple[bool, ...]
"""Index-aligned verdicts for a QuestionSet; True means yes."""


def format_answers(answers: AnswerVector) -> str:
    return "".join("Y" if verdict else "N" for verdict in answers)


def parse_answers(text: str) -> AnswerVector:
    if any(ch not in "YN" for ch in text):
        raise ValueError(f"answer string must contain only Y/N, got {text!r}")
    return tuple(ch == "Y" for ch in text)


@dataclass(frozen=True)
class QuestionSet:
    """An ordered, duplicate-free set of matching questions.

    Pairs are kept in canonical sorted order so that equal sets compare and
    hash equal regardless of construction order.
    """

    pairs: tuple[MatchPair, ...] = ()

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.pairs))
        if len(set(ordered)) != len(ordered):
            raise ValueError("question set contains duplicate pairs")
        object.__setattr__(self, "pairs", ordered)

    @classmethod
    def of(cls, pairs: Iterable[MatchPair]) -> "QuestionSet":
        return cls(tuple(pairs))

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[MatchPair]:
        return iter(self.pairs)

    def __contains__(self, pair: MatchPair) -> bool:
        return pair in self.pairs

    def with_pair(self, pair: MatchPair) -> "QuestionSet":
        return QuestionSet(self.pairs + (pair,))

    def encode(self) -> str:
        return ";".join(f"{p.left}+{p.right}" for p in self.pairs)


@dataclass(frozen=True)
class AnswerDistribution:
    """Probability of each achievable answer vector for one question set."""

    entries: tuple[tuple[AnswerVector, float], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(sorted(self.entries)))

    @classmethod
    def of(cls, entries: Mapping[AnswerVector, float]) -> "AnswerDistribution":
        return cls(tuple(entries.items()))

    def as_dict(self) -> dict[AnswerVector, float]:
        return dict(self.entries)

    def prob(self, answers: AnswerVector) -> float:
        return self.as_dict().get(answers, 0.0)

    @property
    def entropy_bits(self) -> float:
        return entropy_of(prob for _, prob in self.entries)


def entropy_of(probs: Iterable[float]) -> float:
    """Shannon entropy in bits with 0·log 0 taken as 0."""
    total = fsum(p * log2(p) for p in probs if p > PROB_FLOOR)
    # avoid -0.0 for degenerate distributions
    return -total if total != 0.0 else 0.0


def result_entropy(result_set: ResultSet) -> float:
    """How uncertain the result set is about the correct partition, in bits."""
    return entropy_of(result_set.probs)


def pair_prob(result_set: ResultSet, pair: MatchPair) -> float:
    """Probability that the correct partition puts the pair in one cluster."""
    return fsum(prob for partition, prob in result_set if pair in partition.pairs)


def set_prob(result_set: ResultSet, pairs: Iterable[MatchPair]) -> float:
    """Probability that the correct partition induces every pair given."""
    wanted = frozenset(pairs)
    return fsum(
        prob for partition, prob in result_set if wanted <= partition.pairs
    )


def answer_signature(partition: Partition, questions: QuestionSet) -> AnswerVector:
    """The answer vector this partition would give: yes iff it induces the pair."""
    return tuple(pair in partition.pairs for pair in questions)


def answer_distribution(result_set: ResultSet, questions: QuestionSet) -> AnswerDistribution:
    """Group partitions by their answer signature and sum their probabilities.

    Runs in O(|partitions| · k); at most min(2^k, |partitions|) entries carry
    mass since each partition is consistent with exactly one vector.
    """
    grouped: dict[AnswerVector, list[float]] = {}
    for partition, prob in result_set:
        grouped.setdefault(answer_signature(partition, questions), []).append(prob)
    return AnswerDistribution.of(
        {signature: fsum(probs) for signature, probs in grouped.items()}
    )


def expected_reduction(result_set: ResultSet, questions: QuestionSet) -> float:
    """Expected entropy drop from asking the questions, in bits.

    Under the deterministic-answer model this equals the entropy of the
    answer distribution itself.
    """
    return answer_distribution(result_set, questions).entropy_bits


def marginal_gain(result_set: ResultSet, selected: QuestionSet, candidate: MatchPair) -> float:
    """Extra expected reduction from adding one question to those selected."""
    if candidate in selected:
        raise ValueError(f"candidate {candidate} already selected")
    gain = expected_reduction(result_set, selected.with_pair(candidate)) - expected_reduction(
        result_set, selected
    )
    # Mathematically ≥ 0; guard against float cancellation noise.
    return gain if gain > 0.0 else 0.0
