"""Budget-aware selection of matching questions.

Selecting the best question set under a token budget is a budgeted
submodular maximization, so the main strategy is partial enumeration over
small seed sets followed by a bang-per-buck greedy extension. A plain
single-question rule, a uniform random baseline, and an exhaustive
brute-force oracle (for small instances) round out the strategies.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from itertools import combinations
from math import ceil, fsum
from typing import Iterable, Sequence

from .core import Dataset, MatchPair, MatchingSet, ResultSet
from .entropy import QuestionSet, entropy_of, expected_reduction, pair_prob
from .errors import PoolTooLarge
from .prompts import render_prompt, template_base_chars
from .seeds import derive_seed

logger = logging.getLogger(__name__)

# Pair probabilities this close to 0 or 1 are treated as certain.
CERTAINTY_EPSILON = 1e-12
# Entropy gains below this are treated as zero; asking such a question would
# spend tokens for no information.
GAIN_EPSILON = 1e-12

# Exhaustive search guard: C(20, k) subsets is the most we ever enumerate.
BRUTE_FORCE_POOL_CAP = 20


class Strategy(str, Enum):
    SINGLE = "single"
    GREEDY = "greedy"
    RANDOM = "random"


@dataclass(frozen=True)
class CostModel:
    """Deterministic token pricing for one matching question.

    Without an explicit overhead the whole rendered prompt is priced at
    chars_per_token. With ``prompt_overhead_tokens`` set, the fixed template
    costs that many tokens and only the record payload is priced per
    character. Either way the (constant-length) response adds
    ``response_tokens``.
    """

    chars_per_token: float = 4.0
    prompt_overhead_tokens: int | None = None
    response_tokens: int = 1

    def __post_init__(self) -> None:
        if self.chars_per_token <= 0:
            raise ValueError("chars_per_token must be positive")
        if self.prompt_overhead_tokens is not None and self.prompt_overhead_tokens < 0:
            raise ValueError("prompt_overhead_tokens must be non-negative")
        if self.response_tokens < 0:
            raise ValueError("response_tokens must be non-negative")
        # Exact rational arithmetic so ceil() never misrounds at boundaries.
        object.__setattr__(self, "_ratio", Fraction(str(self.chars_per_token)))

    def prompt_tokens(self, prompt: str) -> int:
        ratio: Fraction = self._ratio  # type: ignore[attr-defined]
        if self.prompt_overhead_tokens is None:
            return ceil(Fraction(len(prompt)) / ratio)
        payload = max(0, len(prompt) - template_base_chars())
        return self.prompt_overhead_tokens + ceil(Fraction(payload) / ratio)


def mq_cost(pair: MatchPair, records: Dataset, cm: CostModel) -> int:
    """Estimated total tokens (prompt + response) to ask one question."""
    tokens = cm.prompt_tokens(render_prompt(pair, records)) + cm.response_tokens
    return max(1, tokens)


@dataclass
class BudgetState:
    """Tokens allowed and tokens spent; the one mutable object in a run.

    ``overrun`` records actual charges that exceeded the limit (an estimate
    can undershoot the billed amount); spent itself never passes the limit.
    """

    limit: int
    spent: int = 0
    overrun: int = 0

    def __post_init__(self) -> None:
        if self.limit < 0:
            raise ValueError("budget limit must be non-negative")
        if not 0 <= self.spent <= self.limit:
            raise ValueError("spent must lie within [0, limit]")

    @property
    def remaining(self) -> int:
        return self.limit - self.spent

    def can_afford(self, tokens: int) -> bool:
        return tokens <= self.remaining

    def charge(self, tokens: int) -> None:
        if tokens < 0:
            raise ValueError("cannot charge negative tokens")
        if tokens > self.remaining:
            raise ValueError(f"charge of {tokens} exceeds remaining budget {self.remaining}")
        self.spent += tokens

    def reconcile(self, estimated: int, actual: int) -> None:
        """Replace an estimated charge with the actually billed amount."""
        adjusted = self.spent - estimated + actual
        if adjusted > self.limit:
            self.overrun += adjusted - self.limit
            adjusted = self.limit
        self.spent = max(0, adjusted)


@dataclass(frozen=True)
class SelectionConfig:
    """Knobs for the per-iteration question selection."""

    k: int = 1
    d: int = 3
    pool_limit: int = 200
    strategy: Strategy = Strategy.GREEDY
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if self.pool_limit < 1:
            raise ValueError("pool_limit must be at least 1")


def candidate_pool(result_set: ResultSet, matching_set: MatchingSet) -> frozenset[MatchPair]:
    """Pairs worth asking about: present somewhere, but not settled.

    Pairs with probability 0 or 1 are pruned; their marginal gain is provably
    zero.
    """
    pool = []
    for pair in matching_set.pairs:
        prob = pair_prob(result_set, pair)
        if CERTAINTY_EPSILON < prob < 1.0 - CERTAINTY_EPSILON:
            pool.append(pair)
    return frozenset(pool)


class _GroupScorer:
    """Incremental joint-entropy evaluation via partition group labels.

    Two partitions answer a question set identically iff they share a group
    label, so the answer-distribution entropy is the entropy of per-label
    probability masses. Adding a question refines the labels in O(n). Sums
    use fsum exactly like the direct path, so results are bit-identical to
    expected_reduction.
    """

    def __init__(self, result_set: ResultSet):
        self._result_set = result_set
        self._bits: dict[MatchPair, tuple[bool, ...]] = {}

    def base_labels(self) -> tuple[int, ...]:
        return (0,) * len(self._result_set)

    def bits(self, pair: MatchPair) -> tuple[bool, ...]:
        cached = self._bits.get(pair)
        if cached is None:
            cached = tuple(pair in p.pairs for p in self._result_set.partitions)
            self._bits[pair] = cached
        return cached

    def extend(self, labels: tuple, pair: MatchPair) -> tuple:
        return tuple(zip(labels, self.bits(pair)))

    def entropy(self, labels: tuple) -> float:
        groups: dict = {}
        for label, prob in zip(labels, self._result_set.probs):
            groups.setdefault(label, []).append(prob)
        return entropy_of(fsum(probs) for probs in groups.values())


def _pool_costs(
    pool: Iterable[MatchPair], records: Dataset, cm: CostModel
) -> dict[MatchPair, int]:
    return {pair: mq_cost(pair, records, cm) for pair in pool}


def select_single(
    result_set: ResultSet,
    pool: Iterable[MatchPair],
    records: Dataset,
    cm: CostModel,
    budget: BudgetState,
) -> MatchPair | None:
    """The affordable pair with the best expected reduction per token.

    Canonical pair order breaks ties; None when nothing affordable gains
    anything.
    """
    best: MatchPair | None = None
    best_ratio = 0.0
    for pair in sorted(pool):
        cost = mq_cost(pair, records, cm)
        if not budget.can_afford(cost):
            continue
        gain = expected_reduction(result_set, QuestionSet.of((pair,)))
        if gain <= GAIN_EPSILON:
            continue
        ratio = gain / cost
        if best is None or ratio > best_ratio:
            best, best_ratio = pair, ratio
    return best


def _greedy_extend(
    scorer: _GroupScorer,
    seed_pairs: tuple[MatchPair, ...],
    labels: tuple,
    current_entropy: float,
    current_cost: int,
    pool: Sequence[MatchPair],
    costs: dict[MatchPair, int],
    budget_tokens: int,
    k: int,
) -> tuple[tuple[MatchPair, ...], float, int]:
    selected = list(seed_pairs)
    chosen = set(seed_pairs)
    while len(selected) < k:
        best_pair = None
        best_ratio = 0.0
        best_gain = 0.0
        best_labels: tuple = ()
        best_entropy = current_entropy
        for pair in pool:
            if pair in chosen:
                continue
            cost = costs[pair]
            if current_cost + cost > budget_tokens:
                continue
            extended = scorer.extend(labels, pair)
            entropy = scorer.entropy(extended)
            gain = entropy - current_entropy
            ratio = gain / cost
            if best_pair is None or ratio > best_ratio:
                best_pair = pair
                best_ratio = ratio
                best_gain = gain
                best_labels = extended
                best_entropy = entropy
        if best_pair is None or best_gain <= GAIN_EPSILON:
            break
        selected.append(best_pair)
        chosen.add(best_pair)
        labels = best_labels
        current_entropy = best_entropy
        current_cost += costs[best_pair]
    return tuple(selected), current_entropy, current_cost


def select_greedy_pe(
    result_set: ResultSet,
    pool: Iterable[MatchPair],
    records: Dataset,
    cm: CostModel,
    budget: BudgetState,
    cfg: SelectionConfig,
) -> QuestionSet:
    """Partial enumeration plus greedy extension for up-to-k questions.

    Every affordable subset smaller than d competes as-is; every affordable
    subset of size exactly d is extended by repeatedly adding the affordable
    pair with the best entropy gain per token. The best set overall wins
    (ties: lower cost, then canonical encoding). Enumeration depth drops to
    1 when the pool exceeds cfg.pool_limit; depth 1 degenerates to a single
    greedy pass guarded by the best single question.
    """
    ordered = sorted(pool)
    costs = _pool_costs(ordered, records, cm)
    budget_tokens = budget.remaining
    depth = min(cfg.d, cfg.k)
    if len(ordered) > cfg.pool_limit and depth > 1:
        logger.info(
            "candidate pool of %d exceeds limit %d; enumeration depth reduced to 1",
            len(ordered),
            cfg.pool_limit,
        )
        depth = 1

    scorer = _GroupScorer(result_set)
    base_labels = scorer.base_labels()

    best_pairs: tuple[MatchPair, ...] = ()
    best_entropy = 0.0
    best_cost = 0

    def consider(pairs: tuple[MatchPair, ...], entropy: float, cost: int) -> None:
        nonlocal best_pairs, best_entropy, best_cost
        candidate = tuple(sorted(pairs))
        better = entropy > best_entropy
        if not better and entropy == best_entropy:
            better = cost < best_cost or (
                cost == best_cost and bool(best_pairs) and candidate < best_pairs
            )
        if better:
            best_pairs, best_entropy, best_cost = candidate, entropy, cost

    def labelled(combo: tuple[MatchPair, ...]) -> tuple:
        labels = base_labels
        for pair in combo:
            labels = scorer.extend(labels, pair)
        return labels

    if depth == 1:
        # Degenerate form: one plain bang-per-buck greedy pass from an empty
        # seed, guarded by the best affordable single question by value. The
        # guard keeps the approximation bound when a cheap low-gain question
        # would dominate the ratio ordering.
        extended, entropy, total_cost = _greedy_extend(
            scorer, (), base_labels, 0.0, 0, ordered, costs, budget_tokens, cfg.k
        )
        if extended:
            consider(extended, entropy, total_cost)
        for pair in ordered:
            cost = costs[pair]
            if cost > budget_tokens:
                continue
            consider((pair,), scorer.entropy(scorer.extend(base_labels, pair)), cost)
        return QuestionSet.of(best_pairs)

    for size in range(1, depth):
        for combo in combinations(ordered, size):
            cost = sum(costs[pair] for pair in combo)
            if cost > budget_tokens:
                continue
            consider(combo, scorer.entropy(labelled(combo)), cost)

    for combo in combinations(ordered, depth):
        cost = sum(costs[pair] for pair in combo)
        if cost > budget_tokens:
            continue
        labels = labelled(combo)
        extended, entropy, total_cost = _greedy_extend(
            scorer,
            combo,
            labels,
            scorer.entropy(labels),
            cost,
            ordered,
            costs,
            budget_tokens,
            cfg.k,
        )
        consider(extended, entropy, total_cost)

    return QuestionSet.of(best_pairs)


def select_random(
    pool: Iterable[MatchPair],
    records: Dataset,
    cm: CostModel,
    budget: BudgetState,
    k: int,
    seed: int = 0,
) -> QuestionSet:
    """Uniform affordable picks without replacement; the baseline strategy."""
    if k < 1:
        raise ValueError("k must be at least 1")
    rng = random.Random(derive_seed(seed, "random-selection"))
    remaining = sorted(pool)
    costs = _pool_costs(remaining, records, cm)
    chosen: list[MatchPair] = []
    spent = 0
    while len(chosen) < k:
        affordable = [pair for pair in remaining if spent + costs[pair] <= budget.remaining]
        if not affordable:
            break
        pick = rng.choice(affordable)
        chosen.append(pick)
        spent += costs[pick]
        remaining.remove(pick)
    return QuestionSet.of(chosen)


def brute_force_select(
    result_set: ResultSet,
    pool: Iterable[MatchPair],
    records: Dataset,
    cm: CostModel,
    budget: BudgetState,
    k: int,
) -> QuestionSet:
    """Exhaustive optimum over affordable subsets of size ≤ k; small pools only."""
    ordered = sorted(pool)
    if len(ordered) > BRUTE_FORCE_POOL_CAP:
        raise PoolTooLarge(f"pool of {len(ordered)} exceeds the exhaustive cap {BRUTE_FORCE_POOL_CAP}")
    costs = _pool_costs(ordered, records, cm)
    budget_tokens = budget.remaining

    best_pairs: tuple[MatchPair, ...] = ()
    best_entropy = 0.0
    for size in range(1, min(k, len(ordered)) + 1):
        for combo in combinations(ordered, size):
            if sum(costs[pair] for pair in combo) > budget_tokens:
                continue
            entropy = expected_reduction(result_set, QuestionSet.of(combo))
            if entropy > best_entropy:
                best_pairs, best_entropy = combo, entropy
            elif entropy == best_entropy and best_pairs and combo < best_pairs:
                best_pairs = combo
    return QuestionSet.of(best_pairs)
