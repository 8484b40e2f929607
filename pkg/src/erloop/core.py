"""Core domain types: records, candidate partitions, and the probabilistic result set.

A resolution result is held as a set of alternative partitions of the input
records together with a probability for each. Partitions only store their
non-singleton clusters; every record not mentioned in a cluster is implicitly
its own entity. Each partition also keeps the evidence edges (pairwise merge
decisions) that produced its clusters, so a later refuted pair can be removed
and the clusters rebuilt from what remains.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import fsum, isfinite
from typing import Iterable, Iterator

from .errors import TotalMassVanished, UnknownRecord

# Below this total mass a distribution is considered destroyed rather than
# renormalizable.
MASS_EPSILON = 1e-12


@dataclass(frozen=True, order=True)
class MatchPair:
    """An unordered pair of record ids, stored canonically with left < right."""

    left: str
    right: str

    def __post_init__(self) -> None:
        if not self.left or not self.right:
            raise ValueError("match pair ids must be non-empty")
        if self.left == self.right:
            raise ValueError(f"match pair needs two distinct ids, got {self.left!r} twice")
        if self.left > self.right:
            left, right = self.right, self.left
            object.__setattr__(self, "left", left)
            object.__setattr__(self, "right", right)

    def __str__(self) -> str:
        return f"({self.left}, {self.right})"


@dataclass(frozen=True)
class Record:
    """One input record: an id plus an ordered tuple of (attribute, value).

    Empty-string values are normalized to None; both mean the attribute is
    absent.
    """

    id: str
    attributes: tuple[tuple[str, str | None], ...]

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("record id must be non-empty")
        seen: set[str] = set()
        normalized = []
        for name, value in self.attributes:
            if not name:
                raise ValueError(f"record {self.id!r} has an empty attribute name")
            if name in seen:
                raise ValueError(f"record {self.id!r} repeats attribute {name!r}")
            seen.add(name)
            normalized.append((name, value if value else None))
        object.__setattr__(self, "attributes", tuple(normalized))

    @property
    def schema(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.attributes)

    def value(self, attribute: str) -> str | None:
        for name, value in self.attributes:
            if name == attribute:
                return value
        raise KeyError(f"record {self.id!r} has no attribute {attribute!r}")


@dataclass(frozen=True)
class Dataset:
    """An immutable collection of records sharing one attribute schema."""

    records: tuple[Record, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        by_id: dict[str, Record] = {}
        for record in self.records:
            if record.id in by_id:
                raise ValueError(f"duplicate record id {record.id!r}")
            by_id[record.id] = record
        schemas = {record.schema for record in self.records}
        if len(schemas) > 1:
            raise ValueError("all records must share the same attribute schema")
        object.__setattr__(self, "_by_id", by_id)

    @property
    def schema(self) -> tuple[str, ...]:
        return self.records[0].schema if self.records else ()

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(record.id for record in self.records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[Record]:
        return iter(self.records)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._by_id  # type: ignore[attr-defined]

    def get(self, record_id: str) -> Record:
        try:
            return self._by_id[record_id]  # type: ignore[attr-defined]
        except KeyError:
            raise UnknownRecord(f"unknown record id {record_id!r}") from None


def connected_components(
    ids: Iterable[str], edges: Iterable[MatchPair]
) -> frozenset[frozenset[str]]:
    """Non-singleton connected components of the graph (ids, edges).

    Ids only reachable through ``edges`` need not be listed in ``ids``.
    """
    adjacency: dict[str, set[str]] = {i: set() for i in ids}
    for edge in edges:
        adjacency.setdefault(edge.left, set()).add(edge.right)
        adjacency.setdefault(edge.right, set()).add(edge.left)
    seen: set[str] = set()
    components: list[frozenset[str]] = []
    for start in sorted(adjacency):
        if start in seen:
            continue
        stack = [start]
        component = {start}
        seen.add(start)
        while stack:
            node = stack.pop()
            for neighbor in adjacency[node]:
                if neighbor not in component:
                    component.add(neighbor)
                    seen.add(neighbor)
                    stack.append(neighbor)
        if len(component) > 1:
            components.append(frozenset(component))
    return frozenset(components)


def _cluster_pairs(cluster: frozenset[str]) -> Iterator[MatchPair]:
    members = sorted(cluster)
    for i, left in enumerate(members):
        for right in members[i + 1 :]:
            yield MatchPair(left, right)


@dataclass(frozen=True)
class Partition:
    """One candidate way of grouping the records into entities.

    ``clusters`` holds the non-singleton groups. ``evidence_edges`` is the
    set of pairwise decisions the clusters were built from; its connected
    components must reproduce ``clusters`` exactly.
    """

    clusters: frozenset[frozenset[str]]
    evidence_edges: frozenset[MatchPair]

    def __post_init__(self) -> None:
        clusters = frozenset(frozenset(c) for c in self.clusters)
        edges = frozenset(self.evidence_edges)
        object.__setattr__(self, "clusters", clusters)
        object.__setattr__(self, "evidence_edges", edges)

        seen: set[str] = set()
        for cluster in clusters:
            if len(cluster) < 2:
                raise ValueError("clusters must have at least two members")
            if seen & cluster:
                raise ValueError("clusters must be disjoint")
            seen |= cluster
        for edge in edges:
            if not any(edge.left in c and edge.right in c for c in clusters):
                raise ValueError(f"evidence edge {edge} crosses or escapes the clusters")
        if connected_components((), edges) != clusters:
            raise ValueError("evidence edges do not connect every cluster")

        pairs = frozenset(p for cluster in clusters for p in _cluster_pairs(cluster))
        object.__setattr__(self, "_pairs", pairs)

    @classmethod
    def from_edges(cls, edges: Iterable[MatchPair]) -> "Partition":
        """Build the partition whose clusters are the components of ``edges``."""
        edge_set = frozenset(edges)
        return cls(connected_components((), edge_set), edge_set)

    @classmethod
    def from_clusters(
        cls,
        clusters: Iterable[Iterable[str]],
        evidence_edges: Iterable[MatchPair] | None = None,
    ) -> "Partition":
        """Build a partition from explicit clusters, dropping singletons.

        Without explicit evidence the clusters are assumed fully supported:
        every induced pair becomes an evidence edge.
        """
        kept = frozenset(frozenset(c) for c in clusters if len(frozenset(c)) > 1)
        if evidence_edges is None:
            evidence_edges = frozenset(p for c in kept for p in _cluster_pairs(c))
        return cls(kept, frozenset(evidence_edges))

    @property
    def pairs(self) -> frozenset[MatchPair]:
        """Every record pair this partition places in the same cluster."""
        return self._pairs  # type: ignore[attr-defined]

    def induces(self, pair: MatchPair) -> bool:
        return pair in self.pairs

    def encode(self) -> str:
        """Stable text form: ids joined by '+', clusters joined by '|'."""
        keys = sorted(tuple(sorted(c)) for c in self.clusters)
        return "|".join("+".join(ids) for ids in keys)


def partition_pairs(partition: Partition) -> frozenset[MatchPair]:
    """The set of matching pairs induced by a partition's clusters."""
    return partition.pairs


def partition_sort_key(partition: Partition) -> tuple[MatchPair, ...]:
    return tuple(sorted(partition.pairs))


@dataclass(frozen=True)
class ResultSet:
    """Alternative partitions with a probability for each.

    Construction only checks shape and non-negativity; use
    :func:`normalize_and_dedup` to get a canonical distribution whose
    probabilities sum to one and whose partitions are pairwise distinct.
    """

    partitions: tuple[Partition, ...]
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "partitions", tuple(self.partitions))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if not self.partitions:
            raise ValueError("a result set needs at least one partition")
        if len(self.partitions) != len(self.probs):
            raise ValueError(
                f"{len(self.partitions)} partitions but {len(self.probs)} probabilities"
            )
        for p in self.probs:
            if not isfinite(p) or p < 0.0:
                raise ValueError(f"probabilities must be finite and non-negative, got {p!r}")

    def __len__(self) -> int:
        return len(self.partitions)

    def __iter__(self) -> Iterator[tuple[Partition, float]]:
        return iter(zip(self.partitions, self.probs))

    @property
    def total_mass(self) -> float:
        return fsum(self.probs)

    def is_normalized(self, tolerance: float = 1e-9) -> bool:
        return abs(self.total_mass - 1.0) <= tolerance

    def top(self) -> Partition:
        """The most probable partition; ties go to the smallest canonical key."""
        best_prob = max(self.probs)
        candidates = [p for p, prob in self if prob == best_prob]
        return min(candidates, key=partition_sort_key)


@dataclass(frozen=True)
class MatchingSet:
    """The union of matching pairs across every partition in a result set."""

    pairs: frozenset[MatchPair] = field(default_factory=frozenset)

    @classmethod
    def from_result_set(cls, result_set: ResultSet) -> "MatchingSet":
        union: frozenset[MatchPair] = frozenset()
        for partition in result_set.partitions:
            union |= partition.pairs
        return cls(union)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[MatchPair]:
        return iter(sorted(self.pairs))

    def __contains__(self, pair: MatchPair) -> bool:
        return pair in self.pairs


def normalize_and_dedup(result_set: ResultSet) -> ResultSet:
    """Merge structurally identical partitions and rescale probabilities to 1.

    Partitions inducing the same pair set are merged: their probabilities add
    and their evidence edges union. The output is sorted by pair-set key, so
    equal inputs always produce the identical output and the function is
    idempotent.
    """
    order: list[frozenset[MatchPair]] = []
    groups: dict[frozenset[MatchPair], list[int]] = {}
    for index, partition in enumerate(result_set.partitions):
        key = partition.pairs
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(index)

    merged: list[tuple[Partition, float]] = []
    for key in order:
        indexes = groups[key]
        mass = fsum(result_set.probs[i] for i in indexes)
        partition = result_set.partitions[indexes[0]]
        if len(indexes) > 1:
            evidence = frozenset().union(
                *(result_set.partitions[i].evidence_edges for i in indexes)
            )
            partition = Partition(partition.clusters, evidence)
        merged.append((partition, mass))

    total = fsum(mass for _, mass in merged)
    if total <= MASS_EPSILON:
        raise TotalMassVanished(f"total probability mass {total!r} is not renormalizable")

    merged.sort(key=lambda item: partition_sort_key(item[0]))
    return ResultSet(
        tuple(partition for partition, _ in merged),
        tuple(mass / total for _, mass in merged),
    )
