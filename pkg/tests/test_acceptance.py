"""Acceptance gate: one test per numbered criterion, tolerances pinned.

Each test name matches the conftest hook so the terminal summary prints a
[PASS]/[FAIL] line per criterion. Reference values are re-derived inline
(explicit Bayes, explicit enumeration) rather than trusted from the library
under test.
"""

import itertools
import json
import math
import random
import time
from statistics import fmean

import pytest

from erloop.cli import main
from erloop.core import (
    Dataset,
    MatchPair,
    MatchingSet,
    Partition,
    Record,
    ResultSet,
    normalize_and_dedup,
)
from erloop.entropy import QuestionSet, expected_reduction, result_entropy
from erloop.oracle import AnswerSource, OracleAnswer
from erloop.pipeline import RunConfig, run_loop, sweep_initial, synth_generate
from erloop.select import (
    BudgetState,
    CostModel,
    SelectionConfig,
    Strategy,
    brute_force_select,
    candidate_pool,
    mq_cost,
    select_greedy_pe,
)
from erloop.update import Evidence, posterior_single


# ---------------------------------------------------------------------------
# shared helpers

RUNNING_PAIR = MatchPair("r4", "r8")


def _answer(pair: MatchPair, verdict: bool) -> OracleAnswer:
    return OracleAnswer(pair, verdict, tokens_in=0, tokens_out=0, source=AnswerSource.SIMULATED)


def _probs_by_encoding(result_set: ResultSet) -> dict[str, float]:
    return {partition.encode(): prob for partition, prob in result_set}


def _shannon_bits(probs) -> float:
    return -math.fsum(p * math.log2(p) for p in probs if p > 0.0)


_UNIVERSE = tuple(f"x{i}" for i in range(8))
_UNIVERSE_PAIRS = tuple(MatchPair(a, b) for a, b in itertools.combinations(_UNIVERSE, 2))


def _random_result_set(rng: random.Random, max_partitions: int = 16) -> ResultSet:
    """A normalized result set with 2..max_partitions distinct partitions."""
    while True:
        count = rng.randint(2, max_partitions)
        partitions = []
        for _ in range(count):
            shuffled = list(_UNIVERSE)
            rng.shuffle(shuffled)
            clusters = []
            i = 0
            while i < len(shuffled):
                size = rng.randint(1, 4)
                chunk = shuffled[i : i + size]
                if len(chunk) >= 2:
                    clusters.append(tuple(chunk))
                i += size
            if not clusters:
                clusters.append(tuple(shuffled[:2]))
            partitions.append(Partition.from_clusters(clusters))
        probs = [rng.uniform(0.05, 1.0) for _ in partitions]
        result_set = normalize_and_dedup(ResultSet(tuple(partitions), tuple(probs)))
        if len(result_set) >= 2:  # dedup may merge everything; resample then
            return result_set


def _explicit_reduction(result_set: ResultSet, pairs) -> float:
    """Expected entropy drop by brute enumeration of all 2^k answer vectors."""
    prior = _shannon_bits(result_set.probs)
    residual = 0.0
    for verdicts in itertools.product((False, True), repeat=len(pairs)):
        members = [
            prob
            for partition, prob in result_set
            if all((pair in partition.pairs) == v for pair, v in zip(pairs, verdicts))
        ]
        mass = math.fsum(members)
        if mass <= 0.0:
            continue
        residual += mass * _shannon_bits(p / mass for p in members)
    return prior - residual


# ---------------------------------------------------------------------------
# criteria 1-2: the four-candidate worked example


def test_criterion_01_running_example_posterior(four_way):
    evidence = Evidence(_answer(RUNNING_PAIR, True), theta=0.9)
    start = time.perf_counter()
    posterior = posterior_single(four_way, evidence)
    elapsed = time.perf_counter() - start

    expected = {
        partition.encode(): target
        for partition, target in zip(four_way.partitions, (0.02, 0.04, 0.53, 0.41))
    }
    got = _probs_by_encoding(posterior)
    assert set(got) == set(expected)
    for encoding, target in expected.items():
        assert got[encoding] == pytest.approx(target, abs=0.005)
    # a single update is a few arithmetic ops; anything near 50ms is a bug
    assert elapsed < 0.05


def test_criterion_02_entropy_bookkeeping(four_way):
    # independent re-derivation: explicit Bayes update then -sum(p log2 p)
    likelihoods = [
        0.9 if RUNNING_PAIR in partition.pairs else 0.1 for partition in four_way.partitions
    ]
    scaled = [p * l for p, l in zip(four_way.probs, likelihoods)]
    total = math.fsum(scaled)
    rederived_prior = _shannon_bits(four_way.probs)
    rederived_posterior = _shannon_bits(s / total for s in scaled)
    assert rederived_prior == pytest.approx(1.8823, abs=1e-3)
    assert rederived_posterior == pytest.approx(1.3035, abs=1e-3)

    posterior = posterior_single(four_way, Evidence(_answer(RUNNING_PAIR, True), theta=0.9))
    assert result_entropy(four_way) == pytest.approx(rederived_prior, abs=1e-9)
    assert result_entropy(posterior) == pytest.approx(rederived_posterior, abs=1e-9)
    assert result_entropy(four_way) == pytest.approx(1.8823, abs=1e-3)
    assert result_entropy(posterior) == pytest.approx(1.3035, abs=1e-3)


# ---------------------------------------------------------------------------
# criteria 3-4: expected reduction against explicit enumeration


def test_criterion_03_reduction_matches_enumeration():
    rng = random.Random(3033)
    for _ in range(200):
        result_set = _random_result_set(rng)
        k = rng.randint(1, 6)
        pairs = rng.sample(_UNIVERSE_PAIRS, k)
        got = expected_reduction(result_set, QuestionSet(tuple(pairs)))
        assert got == pytest.approx(_explicit_reduction(result_set, pairs), abs=1e-9)


def test_criterion_04_monotone_and_submodular():
    rng = random.Random(4044)
    violations = 0
    for _ in range(1000):
        result_set = _random_result_set(rng)
        sampled = rng.sample(_UNIVERSE_PAIRS, rng.randint(2, 10))
        extra, rest = sampled[0], sampled[1:]
        outer = rng.randint(1, len(rest)) if rest else 0
        inner = rng.randint(0, outer)
        small = QuestionSet(tuple(rest[:inner]))
        large = QuestionSet(tuple(rest[:outer]))

        h_small = expected_reduction(result_set, small)
        h_large = expected_reduction(result_set, large)
        if h_large < h_small - 1e-12:  # adding questions may never lose information
            violations += 1
        gain_small = expected_reduction(result_set, small.with_pair(extra)) - h_small
        gain_large = expected_reduction(result_set, large.with_pair(extra)) - h_large
        if gain_small < gain_large - 1e-12:  # marginal gains may never grow
            violations += 1
    assert violations == 0


# ---------------------------------------------------------------------------
# criterion 5: greedy selection vs the exhaustive optimum


def _selection_records() -> Dataset:
    return Dataset(
        tuple(
            Record(record_id, (("Name", f"entry {record_id}"),))
            for record_id in _UNIVERSE
        )
    )


def test_criterion_05_approximation_ratio(criterion_notes):
    rng = random.Random(5055)
    records = _selection_records()
    cm = CostModel()
    start = time.perf_counter()
    ratios = []
    for _ in range(100):
        result_set = _random_result_set(rng, max_partitions=32)
        pool = sorted(candidate_pool(result_set, MatchingSet.from_result_set(result_set)))
        if len(pool) > 12:
            pool = sorted(rng.sample(pool, 12))
        costs = [mq_cost(pair, records, cm) for pair in pool]
        limit = rng.randint(min(costs), sum(costs))
        k = rng.randint(1, 3)

        cfg = SelectionConfig(k=k, d=1, pool_limit=200, strategy=Strategy.GREEDY, seed=0)
        greedy = select_greedy_pe(result_set, pool, records, cm, BudgetState(limit), cfg)
        optimum = brute_force_select(result_set, pool, records, cm, BudgetState(limit), k)

        gained = expected_reduction(result_set, greedy)
        best = expected_reduction(result_set, optimum)
        if best <= 1e-12:
            assert gained <= 1e-12
            ratios.append(1.0)
            continue
        ratio = gained / best
        assert ratio >= 1.0 - 1.0 / math.sqrt(math.e)
        ratios.append(ratio)
    elapsed = time.perf_counter() - start
    criterion_notes[5] = f"ratio to optimum: mean {fmean(ratios):.4f}, min {min(ratios):.4f}"
    assert elapsed < 60.0


# ---------------------------------------------------------------------------
# criterion 6: update order independence


def test_criterion_06_update_order_independence():
    rng = random.Random(6066)
    for _ in range(100):
        result_set = _random_result_set(rng)
        evidence = [
            Evidence(
                _answer(rng.choice(_UNIVERSE_PAIRS), rng.random() < 0.5),
                theta=rng.uniform(0.55, 0.95),
            )
            for _ in range(rng.randint(1, 6))
        ]

        reference = None
        for ordering in itertools.permutations(evidence):
            posterior = result_set
            for item in ordering:
                posterior = posterior_single(posterior, item)
            probs = _probs_by_encoding(posterior)
            if reference is None:
                reference = probs
                continue
            assert set(probs) == set(reference)
            for encoding, prob in probs.items():
                assert prob == pytest.approx(reference[encoding], abs=1e-9)


# ---------------------------------------------------------------------------
# criteria 7-9: end-to-end refinement benchmarks


_BENCH_CACHE: dict[int, tuple[Dataset, frozenset[MatchPair], ResultSet]] = {}


def _bench_corpus(seed: int):
    """50-entity corpus, 0.4 dup rate, plus its swept initial distribution."""
    if seed not in _BENCH_CACHE:
        cfg = RunConfig(synth_entities=50, synth_dup_rate=0.4, seed=seed)
        dataset, truth = synth_generate(50, 0.4, cfg.perturbation(), cfg.seed_generation)
        _BENCH_CACHE[seed] = (dataset, truth, sweep_initial(cfg, dataset))
    return _BENCH_CACHE[seed]


def _bench_run(seed: int, budget: int, k: int, strategy: str, theta: float):
    dataset, truth, initial = _bench_corpus(seed)
    cfg = RunConfig(
        synth_entities=50,
        synth_dup_rate=0.4,
        seed=seed,
        theta=theta,
        budget=budget,
        k=k,
        d=1,
        strategy=strategy,
    )
    return run_loop(cfg, dataset=dataset, truth=truth, initial=initial)


def _entropy_at(result, spend: int) -> float:
    """Entropy after the last iteration fully paid for by `spend` tokens."""
    entropy = result.initial_entropy_bits
    for log in result.logs:
        if log.cumulative_tokens > spend:
            break
        entropy = log.entropy_bits
    return entropy


def test_criterion_07_greedy_beats_random():
    start = time.perf_counter()
    seeds = range(20)
    for budget in (1000, 2000):
        for k in (1, 5):
            greedy_runs = [_bench_run(s, budget, k, "greedy", 0.9) for s in seeds]
            random_runs = [_bench_run(s, budget, k, "random", 0.9) for s in seeds]
            mean_greedy = fmean(r.final.entropy_bits for r in greedy_runs)
            mean_random = fmean(r.final.entropy_bits for r in random_runs)
            assert mean_greedy < mean_random
            for spend in range(0, budget + 1, 100):
                avg_greedy = fmean(_entropy_at(r, spend) for r in greedy_runs)
                avg_random = fmean(_entropy_at(r, spend) for r in random_runs)
                assert avg_greedy <= avg_random + 1e-9
    assert time.perf_counter() - start < 300.0


def test_criterion_08_precision_improves():
    wins = 0
    for seed in range(50):
        result = _bench_run(seed, budget=2000, k=5, strategy="greedy", theta=0.95)
        if result.final.precision >= result.initial_precision:
            wins += 1
    assert wins >= 45


# seeds whose 10-entity corpus sweeps to a set containing the exact truth
_REPRESENTABLE_SEEDS = (
    5, 25, 45, 56, 85, 87, 108, 131, 163, 176,
    184, 229, 237, 272, 277, 350, 359, 380, 473, 490,
)


def test_criterion_09_perfect_oracle_convergence():
    for seed in _REPRESENTABLE_SEEDS:
        cfg = RunConfig(
            synth_entities=10,
            synth_dup_rate=0.6,
            synth_typo_rate=0.15,
            synth_abbrev_rate=0.1,
            synth_drop_rate=0.0,
            theta=1.0,
            budget=6000,
            seed=seed,
        )
        dataset, truth = synth_generate(10, 0.6, cfg.perturbation(), cfg.seed_generation)
        initial = sweep_initial(cfg, dataset)
        # precondition: the truth is one of the swept candidates
        assert any(partition.pairs == truth for partition in initial.partitions)

        result = run_loop(cfg, dataset=dataset, truth=truth, initial=initial)
        assert result.final.entropy_bits <= 0.01
        assert result.result_set.top().pairs == truth


# ---------------------------------------------------------------------------
# criterion 10: byte-identical reruns from one manifest


def test_criterion_10_run_determinism(tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps({"synth_entities": 12, "theta": 0.9, "budget": 600, "seed": 3})
    )
    seed_dir = tmp_path / "seed"
    assert main(["run", "--config", str(config_path), "--out", str(seed_dir)]) == 0
    manifest = seed_dir / "curve.manifest.json"

    first = tmp_path / "first"
    second = tmp_path / "second"
    assert main(["run", "--config", str(manifest), "--out", str(first)]) == 0
    assert main(["run", "--config", str(manifest), "--out", str(second)]) == 0

    first_curve = (first / "curve.csv").read_bytes()
    assert first_curve == (second / "curve.csv").read_bytes()
    assert first_curve == (seed_dir / "curve.csv").read_bytes()
    assert (first / "result_set.json").read_bytes() == (second / "result_set.json").read_bytes()
