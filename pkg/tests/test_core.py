"""Domain-type behavior: pairs, records, partitions, result sets, normalization."""

import random

import pytest

from erloop.core import (
    Dataset,
    MatchPair,
    MatchingSet,
    Partition,
    Record,
    ResultSet,
    connected_components,
    normalize_and_dedup,
    partition_pairs,
    partition_sort_key,
)
from erloop.errors import TotalMassVanished, UnknownRecord


def _record(record_id, **values):
    return Record(record_id, tuple(values.items()))


class TestMatchPair:
    def test_canonical_order(self):
        assert MatchPair("b", "a") == MatchPair("a", "b")
        pair = MatchPair("r9", "r10")
        assert pair.left == "r10"  # lexicographic, not numeric
        assert pair.right == "r9"

    def test_rejects_self_pair(self):
        with pytest.raises(ValueError):
            MatchPair("a", "a")

    def test_rejects_empty_id(self):
        with pytest.raises(ValueError):
            MatchPair("", "a")

    def test_sortable_and_hashable(self):
        pairs = {MatchPair("a", "b"), MatchPair("b", "a"), MatchPair("a", "c")}
        assert len(pairs) == 2
        assert sorted(pairs) == [MatchPair("a", "b"), MatchPair("a", "c")]


class TestRecord:
    def test_empty_value_means_absent(self):
        record = Record("r1", (("Name", "Ann"), ("Email", "")))
        assert record.value("Name") == "Ann"
        assert record.value("Email") is None

    def test_duplicate_attribute_rejected(self):
        with pytest.raises(ValueError):
            Record("r1", (("Name", "a"), ("Name", "b")))

    def test_unknown_attribute_raises(self):
        record = _record("r1", Name="Ann")
        with pytest.raises(KeyError):
            record.value("Email")


class TestDataset:
    def test_duplicate_id_rejected(self):
        with pytest.raises(ValueError):
            Dataset((_record("r1", Name="a"), _record("r1", Name="b")))

    def test_mixed_schema_rejected(self):
        with pytest.raises(ValueError):
            Dataset((_record("r1", Name="a"), _record("r2", Email="b")))

    def test_lookup(self):
        dataset = Dataset((_record("r1", Name="a"), _record("r2", Name="b")))
        assert "r1" in dataset and "r9" not in dataset
        assert dataset.get("r2").value("Name") == "b"
        with pytest.raises(UnknownRecord):
            dataset.get("r9")

    def test_unknown_record_error_is_keyerror(self):
        # callers written against plain mappings still catch it
        assert issubclass(UnknownRecord, KeyError)


class TestPartition:
    def test_pairs_of_two_clusters(self):
        partition = Partition.from_clusters((("r1", "r7"), ("r3", "r4")))
        assert partition_pairs(partition) == {MatchPair("r1", "r7"), MatchPair("r3", "r4")}

    def test_no_clusters_no_pairs(self):
        assert partition_pairs(Partition.from_clusters(())) == frozenset()

    def test_three_cluster_induces_three_pairs(self):
        partition = Partition.from_clusters((("r3", "r4", "r8"),))
        assert partition.pairs == {
            MatchPair("r3", "r4"),
            MatchPair("r3", "r8"),
            MatchPair("r4", "r8"),
        }

    def test_from_edges_closes_transitively(self):
        partition = Partition.from_edges((MatchPair("a", "b"), MatchPair("b", "c")))
        assert partition.clusters == {frozenset({"a", "b", "c"})}
        assert partition.induces(MatchPair("a", "c"))
        assert MatchPair("a", "c") not in partition.evidence_edges

    def test_evidence_must_match_clusters(self):
        with pytest.raises(ValueError):
            Partition(
                frozenset({frozenset({"a", "b"})}),
                frozenset({MatchPair("a", "c")}),
            )
        with pytest.raises(ValueError):
            # edge set leaves the cluster disconnected
            Partition(frozenset({frozenset({"a", "b", "c"})}), frozenset({MatchPair("a", "b")}))

    def test_singletons_dropped_and_rejected(self):
        partition = Partition.from_clusters((("a", "b"), ("c",)))
        assert partition.clusters == {frozenset({"a", "b"})}
        with pytest.raises(ValueError):
            Partition(frozenset({frozenset({"c"})}), frozenset())

    def test_encode_is_sorted_and_stable(self):
        partition = Partition.from_clusters((("r7", "r1"), ("r4", "r3")))
        assert partition.encode() == "r1+r7|r3+r4"

    def test_rebuild_from_pair_set_is_identity(self):
        rng = random.Random(7)
        ids = [f"n{i}" for i in range(12)]
        for _ in range(50):
            edges = {
                MatchPair(*rng.sample(ids, 2)) for _ in range(rng.randrange(1, 14))
            }
            partition = Partition.from_edges(edges)
            rebuilt = Partition.from_edges(partition.pairs)
            assert rebuilt.clusters == partition.clusters
            assert rebuilt.pairs == partition.pairs


class TestConnectedComponents:
    def test_singletons_are_implicit(self):
        components = connected_components(
            ("a", "b", "c", "d"), (MatchPair("a", "b"),)
        )
        assert components == {frozenset({"a", "b"})}

    def test_ids_only_in_edges_count(self):
        components = connected_components((), (MatchPair("x", "y"),))
        assert components == {frozenset({"x", "y"})}


class TestResultSet:
    def test_shape_validation(self):
        partition = Partition.from_clusters((("a", "b"),))
        with pytest.raises(ValueError):
            ResultSet((partition,), (0.5, 0.5))
        with pytest.raises(ValueError):
            ResultSet((), ())
        with pytest.raises(ValueError):
            ResultSet((partition,), (-0.1,))
        with pytest.raises(ValueError):
            ResultSet((partition,), (float("nan"),))

    def test_top_breaks_ties_canonically(self):
        first = Partition.from_clusters((("a", "b"),))
        second = Partition.from_clusters((("c", "d"),))
        rs = ResultSet((second, first), (0.5, 0.5))
        assert rs.top() is first  # (a,b) sorts before (c,d)

    def test_iteration_pairs_partitions_with_probs(self, four_way):
        entries = list(four_way)
        assert len(entries) == 4
        assert [prob for _, prob in entries] == [0.10, 0.26, 0.36, 0.28]


class TestMatchingSet:
    def test_union_of_all_partitions(self, four_way):
        ms = MatchingSet.from_result_set(four_way)
        for partition in four_way.partitions:
            assert partition.pairs <= ms.pairs
        # every pair in the union must come from some partition
        for pair in ms:
            assert any(pair in p.pairs for p in four_way.partitions)

    def test_contains_and_len(self, four_way):
        ms = MatchingSet.from_result_set(four_way)
        assert MatchPair("r3", "r4") in ms
        assert MatchPair("r1", "r3") not in ms
        assert len(ms) == len(ms.pairs)


class TestNormalizeAndDedup:
    def test_rescales_to_unit_mass(self):
        a = Partition.from_clusters((("a", "b"),))
        b = Partition.from_clusters((("c", "d"),))
        normalized = normalize_and_dedup(ResultSet((a, b), (0.2, 0.2)))
        assert normalized.probs == (0.5, 0.5)
        assert normalized.is_normalized()

    def test_merges_duplicates_and_sums(self):
        dup = Partition.from_clusters((("a", "b"),))
        dup_again = Partition.from_clusters((("a", "b"),))
        other = Partition.from_clusters((("c", "d"),))
        normalized = normalize_and_dedup(
            ResultSet((dup, other, dup_again), (0.3, 0.6, 0.1))
        )
        assert len(normalized) == 2
        by_encoding = {p.encode(): prob for p, prob in normalized}
        assert by_encoding["a+b"] == pytest.approx(0.4, abs=1e-12)
        assert by_encoding["c+d"] == pytest.approx(0.6, abs=1e-12)

    def test_merged_duplicates_union_their_evidence(self):
        chain = Partition.from_clusters(
            (("a", "b", "c"),), (MatchPair("a", "b"), MatchPair("b", "c"))
        )
        other_chain = Partition.from_clusters(
            (("a", "b", "c"),), (MatchPair("a", "c"), MatchPair("b", "c"))
        )
        normalized = normalize_and_dedup(ResultSet((chain, other_chain), (0.5, 0.5)))
        assert len(normalized) == 1
        assert normalized.partitions[0].evidence_edges == {
            MatchPair("a", "b"),
            MatchPair("a", "c"),
            MatchPair("b", "c"),
        }

    def test_vanished_mass_raises(self):
        partition = Partition.from_clusters((("a", "b"),))
        with pytest.raises(TotalMassVanished):
            normalize_and_dedup(ResultSet((partition,), (0.0,)))

    def test_idempotent_on_random_instances(self):
        rng = random.Random(11)
        ids = [f"n{i}" for i in range(8)]
        for _ in range(40):
            partitions = []
            probs = []
            for _ in range(rng.randrange(1, 6)):
                edges = {
                    MatchPair(*rng.sample(ids, 2)) for _ in range(rng.randrange(0, 6))
                }
                partitions.append(Partition.from_edges(edges))
                probs.append(rng.random() + 1e-3)
            once = normalize_and_dedup(ResultSet(tuple(partitions), tuple(probs)))
            twice = normalize_and_dedup(once)
            assert once.partitions == twice.partitions
            assert twice.probs == pytest.approx(once.probs, rel=1e-12)
            assert once.is_normalized()
            encodings = [p.encode() for p in once.partitions]
            assert len(set(encodings)) == len(encodings)
            assert list(once.partitions) == sorted(once.partitions, key=partition_sort_key)
