"""Similarity scoring, threshold-swept partition generation, and prior assignment.

Candidate partitions come from sweeping a similarity threshold: at each τ a
record pair is linked when every comparable attribute scores at least τ, the
links are closed transitively into clusters, and the per-threshold partitions
become the alternatives of the initial result set.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from enum import Enum
from math import fsum
from statistics import NormalDist
from typing import Mapping

from .core import Dataset, MatchPair, Partition, ResultSet
from .errors import EmptyAttributeSchema
from .seeds import derive_seed


class SimFunction(str, Enum):
    LEVENSHTEIN = "levenshtein"
    JARO = "jaro"
    JACCARD = "jaccard"


class MissingPolicy(str, Enum):
    """How an absent attribute value enters the every-attribute match rule."""

    SKIP = "skip"  # the attribute is excluded from the rule
    MISMATCH = "mismatch"  # the attribute scores 0


class InitMode(str, Enum):
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"
    # Literal-sampling variant: draws are sorted, shifted positive, and
    # arranged centre-out. Kept for comparison; GAUSSIAN (deterministic
    # density weights) is the default interpretation.
    GAUSSIAN_SAMPLED = "gaussian-sampled"


DEFAULT_THRESHOLDS: tuple[float, ...] = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class SimConfig:
    """Similarity setup: scoring function(s), thresholds, missing-value policy.

    ``functions`` is either one function applied to every attribute or a
    per-attribute mapping that must cover each attribute it is asked about.
    """

    functions: SimFunction | Mapping[str, SimFunction] = SimFunction.LEVENSHTEIN
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    missing_value_policy: MissingPolicy = MissingPolicy.SKIP

    def __post_init__(self) -> None:
        if isinstance(self.functions, Mapping):
            object.__setattr__(self, "functions", dict(self.functions))
            for name, fn in self.functions.items():
                if not isinstance(fn, SimFunction):
                    raise ValueError(f"attribute {name!r} mapped to non-function {fn!r}")
        elif not isinstance(self.functions, SimFunction):
            raise ValueError(f"unsupported similarity function {self.functions!r}")
        thresholds = tuple(float(t) for t in self.thresholds)
        object.__setattr__(self, "thresholds", thresholds)
        if not thresholds:
            raise ValueError("at least one threshold is required")
        for t in thresholds:
            if not 0.0 <= t <= 1.0:
                raise ValueError(f"threshold {t!r} outside [0, 1]")
        if any(a >= b for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError("thresholds must be strictly increasing")

    def function_for(self, attribute: str) -> SimFunction:
        if isinstance(self.functions, SimFunction):
            return self.functions
        try:
            return self.functions[attribute]
        except KeyError:
            raise ValueError(f"no similarity function configured for attribute {attribute!r}") from None


def _levenshtein_distance(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ch_a in enumerate(a, start=1):
        current = [i]
        for j, ch_b in enumerate(b, start=1):
            cost = 0 if ch_a == ch_b else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[-1]


def _levenshtein_similarity(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - _levenshtein_distance(a, b) / longest


def _jaro_similarity(a: str, b: str) -> float:
    if a == b:
        return 1.0
    len_a, len_b = len(a), len(b)
    if len_a == 0 or len_b == 0:
        return 0.0
    window = max(max(len_a, len_b) // 2 - 1, 0)
    matched_a = [False] * len_a
    matched_b = [False] * len_b
    matches = 0
    for i, ch in enumerate(a):
        low = max(0, i - window)
        high = min(i + window + 1, len_b)
        for j in range(low, high):
            if not matched_b[j] and b[j] == ch:
                matched_a[i] = matched_b[j] = True
                matches += 1
                break
    if matches == 0:
        return 0.0
    half_transpositions = 0
    j = 0
    for i in range(len_a):
        if not matched_a[i]:
            continue
        while not matched_b[j]:
            j += 1
        if a[i] != b[j]:
            half_transpositions += 1
        j += 1
    transpositions = half_transpositions // 2
    return (
        matches / len_a + matches / len_b + (matches - transpositions) / matches
    ) / 3.0


_TOKEN_PATTERN = re.compile(r"[a-z0-9]+")


def _jaccard_similarity(a: str, b: str) -> float:
    tokens_a = set(_TOKEN_PATTERN.findall(a.lower()))
    tokens_b = set(_TOKEN_PATTERN.findall(b.lower()))
    if not tokens_a and not tokens_b:
        return 1.0
    if not tokens_a or not tokens_b:
        return 0.0
    return len(tokens_a & tokens_b) / len(tokens_a | tokens_b)


_SIMILARITY_FUNCTIONS = {
    SimFunction.LEVENSHTEIN: _levenshtein_similarity,
    SimFunction.JARO: _jaro_similarity,
    SimFunction.JACCARD: _jaccard_similarity,
}


def similarity(
    a: str | None,
    b: str | None,
    kind: SimFunction,
    policy: MissingPolicy = MissingPolicy.SKIP,
) -> float | None:
    """Score two attribute values in [0, 1]; 1 means identical.

    An absent value (None or empty) resolves per the policy: MISMATCH scores
    the comparison 0, SKIP returns None so the attribute drops out of the
    every-attribute rule.
    """
    if not a or not b:
        return 0.0 if policy is MissingPolicy.MISMATCH else None
    return _SIMILARITY_FUNCTIONS[kind](a, b)


def _pair_floors(records: Dataset, cfg: SimConfig) -> dict[MatchPair, float | None]:
    """Per-pair minimum attribute similarity; None when nothing was comparable.

    The every-attribute rule at threshold τ is then simply floor ≥ τ.
    """
    if len(records) and not records.schema:
        raise EmptyAttributeSchema("records carry no attributes to compare")
    ordered = sorted(records, key=lambda r: r.id)
    floors: dict[MatchPair, float | None] = {}
    for i, first in enumerate(ordered):
        for second in ordered[i + 1 :]:
            scores = []
            for attribute in records.schema:
                score = similarity(
                    first.value(attribute),
                    second.value(attribute),
                    cfg.function_for(attribute),
                    cfg.missing_value_policy,
                )
                if score is not None:
                    scores.append(score)
            floors[MatchPair(first.id, second.id)] = min(scores) if scores else None
    return floors


def _edges_at(floors: dict[MatchPair, float | None], tau: float) -> frozenset[MatchPair]:
    # A pair whose every attribute was skipped has no comparable evidence and
    # never links, whatever the threshold.
    return frozenset(pair for pair, floor in floors.items() if floor is not None and floor >= tau)


def generate_partition(records: Dataset, tau: float, cfg: SimConfig) -> Partition:
    """Link every pair whose attributes all score ≥ τ, then close transitively."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"threshold {tau!r} outside [0, 1]")
    return Partition.from_edges(_edges_at(_pair_floors(records, cfg), tau))


def sweep_result_set(records: Dataset, cfg: SimConfig, init: InitMode, seed: int = 0) -> ResultSet:
    """One partition per threshold, merged when identical, with initial probabilities.

    Thresholds run in ascending order, so each partition refines the one
    before it. Identical pair sets (always a contiguous threshold run) are
    merged and keep the sum of their donors' initial weights.
    """
    floors = _pair_floors(records, cfg)
    weights = init_distribution(len(cfg.thresholds), init, seed)

    partitions: list[Partition] = []
    masses: list[float] = []
    for tau, weight in zip(cfg.thresholds, weights):
        partition = Partition.from_edges(_edges_at(floors, tau))
        if partitions and partitions[-1].pairs == partition.pairs:
            masses[-1] += weight
        else:
            partitions.append(partition)
            masses.append(weight)

    total = fsum(masses)
    return ResultSet(tuple(partitions), tuple(mass / total for mass in masses))


def init_distribution(n: int, mode: InitMode, seed: int = 0) -> tuple[float, ...]:
    """A length-n probability vector per the chosen initialization mode.

    UNIFORM spreads mass equally. GAUSSIAN weights position i by the
    standard-normal density at the quantile midpoint (i + 0.5) / n, giving a
    deterministic middle-heavy shape. GAUSSIAN_SAMPLED draws n samples
    instead, shifts them positive, and arranges them centre-out.
    """
    if n < 1:
        raise ValueError("need at least one outcome")
    if mode is InitMode.UNIFORM:
        return (1.0 / n,) * n
    if mode is InitMode.GAUSSIAN:
        normal = NormalDist()
        densities = [normal.pdf(normal.inv_cdf((i + 0.5) / n)) for i in range(n)]
        total = fsum(densities)
        return tuple(d / total for d in densities)
    if mode is InitMode.GAUSSIAN_SAMPLED:
        rng = random.Random(derive_seed(seed, "init-samples"))
        samples = sorted(rng.gauss(0.0, 1.0) for _ in range(n))
        shift = 1e-6 * max(1.0, samples[-1] - samples[0])
        shifted = [s - samples[0] + shift for s in samples]
        # Positions farthest from the centre receive the smallest weights.
        positions = sorted(range(n), key=lambda i: (-abs(i - (n - 1) / 2), i))
        arranged = [0.0] * n
        for value, position in zip(shifted, positions):
            arranged[position] = value
        total = fsum(arranged)
        return tuple(v / total for v in arranged)
    raise ValueError(f"unsupported init mode {mode!r}")
