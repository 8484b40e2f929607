"""Error-tolerant Bayesian updates over partitions, and repair of refuted pairs.

An answer with capability θ multiplies each partition's probability by θ when
the partition agrees with the verdict and by 1 − θ otherwise. Because the
likelihoods are per-partition constants, batches of answers commute: any
application order gives the same posterior.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import (
    MatchPair,
    Partition,
    ResultSet,
    connected_components,
    normalize_and_dedup,
)
from .oracle import OracleAnswer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Evidence:
    """One oracle answer together with the capability θ to apply it at."""

    answer: OracleAnswer
    theta: float

    def __post_init__(self) -> None:
        if not 0.0 < self.theta < 1.0:
            raise ValueError(
                f"theta must lie strictly inside (0, 1) at application time, got {self.theta!r}"
            )


def posterior_single(result_set: ResultSet, evidence: Evidence) -> ResultSet:
    """Bayes update for one answer; partitions unchanged, probabilities rescaled."""
    pair = evidence.answer.pair
    verdict = evidence.answer.verdict
    theta = evidence.theta
    scaled = tuple(
        prob * (theta if (pair in partition.pairs) == verdict else 1.0 - theta)
        for partition, prob in result_set
    )
    return normalize_and_dedup(ResultSet(result_set.partitions, scaled))


def posterior_batch(result_set: ResultSet, evidence: Iterable[Evidence]) -> ResultSet:
    """Apply a batch of answers; order cannot matter, canonical order is used."""
    ordered = sorted(evidence, key=lambda ev: (ev.answer.pair, ev.answer.verdict))
    for item in ordered:
        result_set = posterior_single(result_set, item)
    return result_set


def _repair_partition(partition: Partition, refuted: MatchPair) -> Partition:
    """Delete the refuted edge and rebuild the affected cluster's components."""
    affected = next(
        cluster
        for cluster in partition.clusters
        if refuted.left in cluster and refuted.right in cluster
    )
    kept_edges = frozenset(e for e in partition.evidence_edges if e != refuted)
    within = frozenset(
        e for e in kept_edges if e.left in affected and e.right in affected
    )
    fragments = connected_components(affected, within)
    clusters = (partition.clusters - {affected}) | fragments
    return Partition(clusters, kept_edges)


def repair(result_set: ResultSet, refuted: MatchPair) -> ResultSet:
    """Rebuild every partition that still asserts a refuted pair.

    Each such partition is replaced in place, keeping its full probability
    mass; structural collisions then merge during normalization. When the
    remaining evidence still connects the pair's records (evidence was a
    clique, or the pair was only transitively induced), the pair survives;
    that is reported, and later refutations can finish the split.
    """
    partitions = []
    still_connected = 0
    for partition in result_set.partitions:
        if refuted not in partition.pairs:
            partitions.append(partition)
            continue
        repaired = _repair_partition(partition, refuted)
        if refuted in repaired.pairs:
            still_connected += 1
        partitions.append(repaired)
    if still_connected:
        logger.warning(
            "repair of %s left it induced in %d partition(s); evidence still connects the records",
            refuted,
            still_connected,
        )
    return normalize_and_dedup(ResultSet(tuple(partitions), result_set.probs))
