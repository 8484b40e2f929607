"""End-to-end orchestration: ingestion, synthesis, the refinement loop, metrics, curves.

A run starts from a threshold-swept result set and repeats select → ask →
charge → update → repair until the budget is exhausted, the entropy floor is
reached, or nothing affordable remains. Every pass appends exactly one
iteration row, so the emitted curve is the full history of the run.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import random
import re
from dataclasses import dataclass, fields
from math import nan
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import httpx

from .core import (
    Dataset,
    MatchPair,
    MatchingSet,
    Partition,
    Record,
    ResultSet,
)
from .entropy import QuestionSet, pair_prob, result_entropy
from .errors import ConfigError, DanglingId, EmptyTruth, ParseError
from .oracle import (
    AnswerSource,
    LlmEndpointSpec,
    OracleAnswer,
    SimulatedOracleSpec,
    ask_llm,
    ask_simulated,
    clamp_theta,
)
from .seeds import derive_seed
from .select import (
    BudgetState,
    CostModel,
    SelectionConfig,
    Strategy,
    candidate_pool,
    mq_cost,
    select_greedy_pe,
    select_random,
    select_single,
)
from .simgen import (
    DEFAULT_THRESHOLDS,
    InitMode,
    MissingPolicy,
    SimConfig,
    SimFunction,
    sweep_result_set,
)
from .update import Evidence, posterior_batch, repair

logger = logging.getLogger(__name__)

CURVE_HEADER = "iteration,cumulative_tokens,entropy_bits,precision,recall,questions_asked,top_partition"

# Record ids end up inside curve rows and partition encodings, so the
# delimiters used there are banned.
_ID_PATTERN = re.compile(r"^[^\s,+|]+$")

# Manifest keys that echo derived sub-seeds; informational, recomputed on load.
_DERIVED_SEED_KEYS = ("seed_generation", "seed_init", "seed_selection", "seed_oracle")


@dataclass(frozen=True)
class PerturbationSpec:
    """How synthetic duplicates get distorted, and how many copies may appear."""

    typo_rate: float = 0.3
    abbrev_rate: float = 0.2
    drop_rate: float = 0.1
    max_extra_copies: int = 3

    def __post_init__(self) -> None:
        for name in ("typo_rate", "abbrev_rate", "drop_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
        if self.max_extra_copies < 0:
            raise ValueError("max_extra_copies must be non-negative")


@dataclass(frozen=True)
class RunConfig:
    """Flat, file-round-trippable configuration of one run.

    Exactly one dataset source must be set: records (a file path, with
    optional truth) or synth_entities (a generated corpus).
    """

    records: str | None = None
    truth: str | None = None
    synth_entities: int | None = None
    synth_dup_rate: float = 0.4
    synth_typo_rate: float = 0.3
    synth_abbrev_rate: float = 0.2
    synth_drop_rate: float = 0.1
    synth_max_extra_copies: int = 3
    sim_function: SimFunction = SimFunction.LEVENSHTEIN
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    missing_policy: MissingPolicy = MissingPolicy.SKIP
    init: InitMode = InitMode.UNIFORM
    strategy: Strategy = Strategy.GREEDY
    k: int = 1
    d: int = 3
    pool_limit: int = 200
    chars_per_token: float = 4.0
    prompt_overhead_tokens: int | None = None
    response_tokens: int = 1
    oracle: AnswerSource = AnswerSource.SIMULATED
    theta: float = 0.9
    llm_base_url: str = "https://api.openai.com/v1"
    llm_model: str = "gpt-4o-mini"
    llm_api_key_env: str = "OPENAI_API_KEY"
    llm_timeout: float = 30.0
    llm_max_retries: int = 2
    llm_max_in_flight: int = 4
    llm_charge_failed_attempts: bool = True
    budget: int = 1000
    entropy_floor: float = 0.01
    max_iterations: int = 1000
    repair_residual: float = 0.05
    seed: int = 0
    out: str | None = None

    def __post_init__(self) -> None:
        for name, enum_type in (
            ("sim_function", SimFunction),
            ("missing_policy", MissingPolicy),
            ("init", InitMode),
            ("strategy", Strategy),
            ("oracle", AnswerSource),
        ):
            value = getattr(self, name)
            if not isinstance(value, enum_type):
                try:
                    object.__setattr__(self, name, enum_type(value))
                except ValueError:
                    raise ConfigError(f"invalid {name}: {value!r}") from None
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        if self.budget <= 0:
            raise ConfigError("budget must be positive")
        if self.entropy_floor < 0:
            raise ConfigError("entropy_floor must be non-negative")
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError("theta must lie in [0, 1]")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be at least 1")
        if not 0.0 <= self.repair_residual <= 1.0:
            raise ConfigError("repair_residual must lie in [0, 1]")
        if self.synth_entities is not None and self.synth_entities < 1:
            raise ConfigError("synth_entities must be at least 1")
        if not 0.0 <= self.synth_dup_rate <= 1.0:
            raise ConfigError("synth_dup_rate must lie in [0, 1]")
        try:
            self.sim_config()
            self.selection_config()
            self.cost_model()
            self.perturbation()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    # sub-configs

    def sim_config(self) -> SimConfig:
        return SimConfig(
            functions=self.sim_function,
            thresholds=self.thresholds,
            missing_value_policy=self.missing_policy,
        )

    def selection_config(self) -> SelectionConfig:
        return SelectionConfig(
            k=self.k,
            d=min(self.d, self.k),
            pool_limit=self.pool_limit,
            strategy=self.strategy,
            seed=self.seed_selection,
        )

    def cost_model(self) -> CostModel:
        return CostModel(
            chars_per_token=self.chars_per_token,
            prompt_overhead_tokens=self.prompt_overhead_tokens,
            response_tokens=self.response_tokens,
        )

    def perturbation(self) -> PerturbationSpec:
        return PerturbationSpec(
            typo_rate=self.synth_typo_rate,
            abbrev_rate=self.synth_abbrev_rate,
            drop_rate=self.synth_drop_rate,
            max_extra_copies=self.synth_max_extra_copies,
        )

    def llm_spec(self) -> LlmEndpointSpec:
        return LlmEndpointSpec(
            base_url=self.llm_base_url,
            model_name=self.llm_model,
            api_key_env=self.llm_api_key_env,
            timeout=self.llm_timeout,
            max_retries=self.llm_max_retries,
            max_in_flight=self.llm_max_in_flight,
            charge_failed_attempts=self.llm_charge_failed_attempts,
        )

    # derived sub-seeds

    @property
    def seed_generation(self) -> int:
        return derive_seed(self.seed, "generation")

    @property
    def seed_init(self) -> int:
        return derive_seed(self.seed, "init")

    @property
    def seed_selection(self) -> int:
        return derive_seed(self.seed, "selection")

    @property
    def seed_oracle(self) -> int:
        return derive_seed(self.seed, "oracle")

    # serialization

    def to_mapping(self) -> dict:
        mapping: dict = {}
        for spec in fields(self):
            value = getattr(self, spec.name)
            if isinstance(value, (SimFunction, MissingPolicy, InitMode, Strategy, AnswerSource)):
                value = value.value
            elif isinstance(value, tuple):
                value = list(value)
            mapping[spec.name] = value
        return mapping

    def manifest(self) -> dict:
        mapping = self.to_mapping()
        for key in _DERIVED_SEED_KEYS:
            mapping[key] = getattr(self, key)
        return mapping

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, object]) -> "RunConfig":
        known = {spec.name for spec in fields(cls)}
        kwargs: dict = {}
        for key, value in mapping.items():
            if key in _DERIVED_SEED_KEYS:
                continue  # manifest echo; recomputed from the master seed
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = value
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class IterationLog:
    """One loop pass: what was asked, what it cost, and the state afterwards."""

    iteration: int
    questions: tuple[MatchPair, ...]
    answers: tuple[OracleAnswer, ...]
    tokens_spent: int
    cumulative_tokens: int
    entropy_bits: float
    precision: float
    recall: float
    top_partition: str


@dataclass(frozen=True)
class RunResult:
    """Everything a finished run produced. Iterates over its logs."""

    logs: tuple[IterationLog, ...]
    result_set: ResultSet
    manifest: dict
    initial_entropy_bits: float
    initial_precision: float
    initial_recall: float
    budget_limit: int
    tokens_spent: int
    tokens_overrun: int

    def __len__(self) -> int:
        return len(self.logs)

    def __iter__(self) -> Iterator[IterationLog]:
        return iter(self.logs)

    @property
    def final(self) -> IterationLog:
        return self.logs[-1]


# ---------------------------------------------------------------------------
# ingestion


def _check_id(raw: str, source: str, row: int) -> str:
    value = raw.strip()
    if not value:
        raise ParseError("empty record id", source=source, row=row)
    if not _ID_PATTERN.match(value):
        raise ParseError(
            f"record id {value!r} may not contain whitespace, ',', '+', or '|'",
            source=source,
            row=row,
        )
    return value


def parse_records_text(text: str, source: str = "<records>") -> Dataset:
    reader = csv.reader(io.StringIO(text))
    rows = [(index, row) for index, row in enumerate(reader, start=1) if row]
    if not rows:
        raise ParseError("no header row", source=source)
    header_row, header = rows[0]
    if not header or not header[0].strip():
        raise ParseError("header needs an id column first", source=source, row=header_row)
    attributes = [name.strip() for name in header[1:]]
    if any(not name for name in attributes):
        raise ParseError("blank attribute name in header", source=source, row=header_row)

    records = []
    for row_number, row in rows[1:]:
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} columns, got {len(row)}",
                source=source,
                row=row_number,
            )
        record_id = _check_id(row[0], source, row_number)
        try:
            records.append(
                Record(record_id, tuple(zip(attributes, (value.strip() for value in row[1:]))))
            )
        except ValueError as exc:
            raise ParseError(str(exc), source=source, row=row_number) from None
    try:
        return Dataset(tuple(records))
    except ValueError as exc:
        raise ParseError(str(exc), source=source) from None


def parse_truth_text(
    text: str, source: str = "<truth>", dataset: Dataset | None = None
) -> frozenset[MatchPair]:
    """Two-column id pairs, no header; the result is closed under transitivity."""
    reader = csv.reader(io.StringIO(text))
    pairs = set()
    for row_number, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != 2:
            raise ParseError(
                f"expected 2 columns, got {len(row)}", source=source, row=row_number
            )
        left = _check_id(row[0], source, row_number)
        right = _check_id(row[1], source, row_number)
        if dataset is not None:
            for record_id in (left, right):
                if record_id not in dataset:
                    raise DanglingId(
                        f"truth references unknown record id {record_id!r}",
                        source=source,
                        row=row_number,
                    )
        try:
            pairs.add(MatchPair(left, right))
        except ValueError as exc:
            raise ParseError(str(exc), source=source, row=row_number) from None

    closed = Partition.from_edges(pairs).pairs
    if len(closed) > len(pairs):
        logger.info(
            "truth closed under transitivity: %d pairs grew to %d", len(pairs), len(closed)
        )
    return frozenset(closed)


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None


def load_records(path: str | Path) -> Dataset:
    path = Path(path)
    return parse_records_text(_read_text(path), source=str(path))


def load_truth(path: str | Path, dataset: Dataset | None = None) -> frozenset[MatchPair]:
    path = Path(path)
    return parse_truth_text(_read_text(path), source=str(path), dataset=dataset)


def load_dataset(
    records_path: str | Path, truth_path: str | Path | None = None
) -> tuple[Dataset, frozenset[MatchPair] | None]:
    dataset = load_records(records_path)
    truth = load_truth(truth_path, dataset) if truth_path is not None else None
    return dataset, truth


# ---------------------------------------------------------------------------
# synthetic corpus

_FIRST_NAMES = (
    "James", "Mary", "Robert", "Patricia", "John", "Jennifer", "Michael", "Linda",
    "David", "Elizabeth", "William", "Barbara", "Richard", "Susan", "Joseph",
    "Jessica", "Thomas", "Sarah", "Charles", "Karen", "Christopher", "Lisa",
    "Daniel", "Nancy", "Matthew", "Betty", "Anthony", "Margaret", "Mark",
    "Sandra", "Donald", "Ashley", "Steven", "Kimberly", "Paul", "Emily",
    "Andrew", "Donna", "Joshua", "Michelle",
)
_LAST_NAMES = (
    "Smith", "Johnson", "Williams", "Brown", "Jones", "Garcia", "Miller", "Davis",
    "Rodriguez", "Martinez", "Hernandez", "Lopez", "Gonzalez", "Wilson",
    "Anderson", "Thomas", "Taylor", "Moore", "Jackson", "Martin", "Lee",
    "Perez", "Thompson", "White", "Harris", "Sanchez", "Clark", "Ramirez",
    "Lewis", "Robinson", "Walker", "Young", "Allen", "King", "Wright",
    "Scott", "Torres", "Nguyen", "Hill", "Flores",
)
_TITLES = (
    "Software Engineer", "Data Analyst", "Product Manager", "Sales Director",
    "Marketing Manager", "Research Scientist", "Account Executive",
    "Operations Manager", "Financial Analyst", "UX Designer", "Data Engineer",
    "Project Manager", "Business Analyst", "Technical Writer", "QA Engineer",
    "Support Specialist", "HR Manager", "Systems Administrator",
    "Security Analyst", "Solutions Architect",
)
_COMPANIES = (
    "TechCorp", "DataWorks", "CloudNine", "BrightPath", "NovaSoft", "BlueWave",
    "GreenField", "SilverLine", "RedStone", "GoldLeaf", "IronGate", "ClearView",
    "SwiftLogic", "PrimeScale", "DeepRiver", "HighBridge", "FastTrack",
    "OpenRange", "TrueNorth", "WideAngle", "NextStep", "CoreFour", "EdgeCase",
    "PeakPoint", "BaseCamp",
)
_COMPANY_SUFFIXES = ("", " Inc", " LLC", " Ltd", " Group")
_CITIES = (
    "San Francisco", "New York", "Austin", "Seattle", "Boston", "Chicago",
    "Denver", "Atlanta", "Portland", "Miami", "Dallas", "Phoenix", "San Diego",
    "Minneapolis", "Detroit", "Nashville", "Charlotte", "Columbus",
    "Indianapolis", "Baltimore", "Raleigh", "Tampa", "St Louis", "Pittsburgh",
    "Sacramento",
)
_EMAIL_DOMAINS = (
    "email.com", "mailbox.org", "postbox.net", "corpmail.com", "workmail.io",
    "inbox.dev", "mailhub.co", "letters.net",
)

SYNTH_SCHEMA = ("Name", "Email", "Title", "Company", "Location")


def _typo(value: str, rng) -> str:
    if len(value) < 2:
        return value
    position = rng.randrange(len(value) - 1)
    if rng.random() < 0.5:
        chars = list(value)
        chars[position], chars[position + 1] = chars[position + 1], chars[position]
        return "".join(chars)
    replacement = rng.choice("abcdefghijklmnopqrstuvwxyz")
    return value[:position] + replacement + value[position + 1 :]


def _abbreviate(value: str) -> str:
    tokens = value.split(" ")
    if len(tokens[0]) > 1:
        tokens[0] = tokens[0][0] + "."
    return " ".join(tokens)


def _perturb_value(value: str, pert: PerturbationSpec, rng) -> str | None:
    roll = rng.random()
    if roll < pert.drop_rate:
        return None
    if roll < pert.drop_rate + pert.abbrev_rate:
        return _abbreviate(value)
    if roll < pert.drop_rate + pert.abbrev_rate + pert.typo_rate:
        return _typo(value, rng)
    return value


def synth_generate(
    n_entities: int,
    dup_rate: float,
    pert: PerturbationSpec = PerturbationSpec(),
    seed: int = 0,
) -> tuple[Dataset, frozenset[MatchPair]]:
    """A small directory-style corpus with seeded duplicates.

    Every entity produces one clean record; extra copies appear with
    probability dup_rate each (up to pert.max_extra_copies) and get
    perturbed per ``pert``. Truth is all within-entity pairs.
    """
    if n_entities < 1:
        raise ValueError("need at least one entity")
    if n_entities > len(_FIRST_NAMES) * len(_LAST_NAMES):
        raise ValueError(f"at most {len(_FIRST_NAMES) * len(_LAST_NAMES)} distinct entities supported")
    if not 0.0 <= dup_rate <= 1.0:
        raise ValueError("dup_rate must lie in [0, 1]")
    rng = random.Random(derive_seed(seed, "synth"))

    name_indexes = rng.sample(range(len(_FIRST_NAMES) * len(_LAST_NAMES)), n_entities)
    records: list[Record] = []
    truth: set[MatchPair] = set()
    counter = 0
    for index in name_indexes:
        first = _FIRST_NAMES[index % len(_FIRST_NAMES)]
        last = _LAST_NAMES[index // len(_FIRST_NAMES)]
        profile = {
            "Name": f"{first} {last}",
            "Email": f"{first.lower()}.{last.lower()}{rng.randint(1, 99)}@{rng.choice(_EMAIL_DOMAINS)}",
            "Title": rng.choice(_TITLES),
            "Company": rng.choice(_COMPANIES) + rng.choice(_COMPANY_SUFFIXES),
            "Location": rng.choice(_CITIES),
        }
        copies = 1
        while copies <= pert.max_extra_copies and rng.random() < dup_rate:
            copies += 1
        entity_ids = []
        for copy_index in range(copies):
            counter += 1
            record_id = f"r{counter}"
            entity_ids.append(record_id)
            if copy_index == 0:
                values = {name: profile[name] for name in SYNTH_SCHEMA}
            else:
                values = {
                    name: _perturb_value(profile[name], pert, rng) for name in SYNTH_SCHEMA
                }
            records.append(
                Record(record_id, tuple((name, values[name]) for name in SYNTH_SCHEMA))
            )
        for i, left in enumerate(entity_ids):
            for right in entity_ids[i + 1 :]:
                truth.add(MatchPair(left, right))

    return Dataset(tuple(records)), frozenset(truth)


def render_records_csv(dataset: Dataset) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("id",) + dataset.schema)
    for record in dataset:
        writer.writerow([record.id] + [value if value is not None else "" for _, value in record.attributes])
    return buffer.getvalue()


def render_truth_csv(truth: Iterable[MatchPair]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    for pair in sorted(truth):
        writer.writerow([pair.left, pair.right])
    return buffer.getvalue()


# ---------------------------------------------------------------------------
# metrics


def compute_metrics(result_set: ResultSet, truth: Iterable[MatchPair]) -> tuple[float, float]:
    """Precision and recall of the most probable partition's pair set."""
    truth_set = frozenset(truth)
    if not truth_set:
        raise EmptyTruth("ground truth contains no matching pairs; recall undefined")
    predicted = result_set.top().pairs
    if not predicted:
        logger.warning("top partition predicts no pairs; precision is 1.0 by convention")
        return 1.0, 0.0
    overlap = len(truth_set & predicted)
    return overlap / len(predicted), overlap / len(truth_set)


# ---------------------------------------------------------------------------
# the loop


def _metrics_or_nan(
    result_set: ResultSet, truth: frozenset[MatchPair] | None
) -> tuple[float, float]:
    if not truth:
        return nan, nan
    return compute_metrics(result_set, truth)


def _select_questions(
    cfg: RunConfig,
    selection: SelectionConfig,
    result_set: ResultSet,
    pool: frozenset[MatchPair],
    dataset: Dataset,
    cost_model: CostModel,
    budget: BudgetState,
    iteration: int,
) -> QuestionSet:
    if selection.strategy is Strategy.SINGLE:
        pick = select_single(result_set, pool, dataset, cost_model, budget)
        return QuestionSet.of(() if pick is None else (pick,))
    if selection.strategy is Strategy.RANDOM:
        return select_random(
            pool,
            dataset,
            cost_model,
            budget,
            cfg.k,
            seed=derive_seed(selection.seed, f"iteration:{iteration}"),
        )
    return select_greedy_pe(result_set, pool, dataset, cost_model, budget, selection)


def run_loop(
    cfg: RunConfig,
    *,
    dataset: Dataset | None = None,
    truth: frozenset[MatchPair] | None = None,
    initial: ResultSet | None = None,
    transport: httpx.BaseTransport | None = None,
) -> RunResult:
    """Execute one full refinement run.

    ``dataset``/``truth``/``initial`` inject pre-built inputs (benchmarks
    reuse one corpus and sweep across strategies); by default they come from
    the config. ``transport`` is passed to the LLM client, for tests.

    On an oracle failure the partial iteration logs are attached to the
    raised error as ``partial_logs`` before it propagates.
    """
    if dataset is None:
        if cfg.records is not None:
            dataset, loaded_truth = load_dataset(cfg.records, cfg.truth)
            truth = truth if truth is not None else loaded_truth
        elif cfg.synth_entities is not None:
            dataset, truth = synth_generate(
                cfg.synth_entities, cfg.synth_dup_rate, cfg.perturbation(), cfg.seed_generation
            )
        else:
            raise ConfigError("no dataset source: set records or synth_entities")

    cost_model = cfg.cost_model()
    if cfg.oracle is AnswerSource.SIMULATED:
        if truth is None:
            raise ConfigError("the simulated oracle needs ground truth (truth file or synthetic corpus)")
        oracle_spec = SimulatedOracleSpec(truth=truth, theta=cfg.theta, seed=cfg.seed_oracle)
        ask: Callable[[QuestionSet], list[OracleAnswer]] = lambda q: ask_simulated(
            q, oracle_spec, dataset, cost_model
        )
    else:
        llm_spec = cfg.llm_spec()
        ask = lambda q: ask_llm(q, llm_spec, dataset, cost_model, transport)

    result_set = initial if initial is not None else sweep_initial(cfg, dataset)
    theta_update = clamp_theta(cfg.theta)
    selection = cfg.selection_config()
    budget = BudgetState(cfg.budget)

    initial_entropy = result_entropy(result_set)
    initial_precision, initial_recall = _metrics_or_nan(result_set, truth)

    logs: list[IterationLog] = []
    iteration = 0
    while iteration < cfg.max_iterations:
        iteration += 1
        spent_before = budget.spent
        pool = candidate_pool(result_set, MatchingSet.from_result_set(result_set))
        questions = _select_questions(
            cfg, selection, result_set, pool, dataset, cost_model, budget, iteration
        )

        if not len(questions):
            precision, recall = _metrics_or_nan(result_set, truth)
            logs.append(
                IterationLog(
                    iteration=iteration,
                    questions=(),
                    answers=(),
                    tokens_spent=0,
                    cumulative_tokens=budget.spent,
                    entropy_bits=result_entropy(result_set),
                    precision=precision,
                    recall=recall,
                    top_partition=result_set.top().encode(),
                )
            )
            break

        estimated = sum(mq_cost(pair, dataset, cost_model) for pair in questions)
        budget.charge(estimated)
        try:
            answers = ask(questions)
        except Exception as exc:
            budget.reconcile(estimated, getattr(exc, "tokens_charged", 0))
            logger.error("oracle failed at iteration %d: %s", iteration, exc)
            exc.partial_logs = tuple(logs)  # type: ignore[attr-defined]
            raise
        budget.reconcile(estimated, sum(answer.total_tokens for answer in answers))

        evidence = [Evidence(answer, theta_update) for answer in answers]
        result_set = posterior_batch(result_set, evidence)
        for answer in sorted(answers, key=lambda a: a.pair):
            if not answer.verdict and pair_prob(result_set, answer.pair) > cfg.repair_residual:
                result_set = repair(result_set, answer.pair)

        entropy_bits = result_entropy(result_set)
        precision, recall = _metrics_or_nan(result_set, truth)
        logs.append(
            IterationLog(
                iteration=iteration,
                questions=questions.pairs,
                answers=tuple(answers),
                tokens_spent=budget.spent - spent_before,
                cumulative_tokens=budget.spent,
                entropy_bits=entropy_bits,
                precision=precision,
                recall=recall,
                top_partition=result_set.top().encode(),
            )
        )
        if entropy_bits <= cfg.entropy_floor:
            break

    return RunResult(
        logs=tuple(logs),
        result_set=result_set,
        manifest=cfg.manifest(),
        initial_entropy_bits=initial_entropy,
        initial_precision=initial_precision,
        initial_recall=initial_recall,
        budget_limit=budget.limit,
        tokens_spent=budget.spent,
        tokens_overrun=budget.overrun,
    )


def sweep_initial(cfg: RunConfig, dataset: Dataset) -> ResultSet:
    """The swept starting distribution for a run configuration."""
    return sweep_result_set(dataset, cfg.sim_config(), cfg.init, cfg.seed_init)


# ---------------------------------------------------------------------------
# curve + result-set serialization


def _format_float(value: float) -> str:
    return repr(value)


def render_curve(logs: Sequence[IterationLog]) -> str:
    lines = [CURVE_HEADER]
    for log in logs:
        lines.append(
            ",".join(
                (
                    str(log.iteration),
                    str(log.cumulative_tokens),
                    _format_float(log.entropy_bits),
                    _format_float(log.precision),
                    _format_float(log.recall),
                    str(len(log.questions)),
                    log.top_partition,
                )
            )
        )
    return "\n".join(lines) + "\n"


def emit_curve(
    logs: Sequence[IterationLog],
    path: str | Path,
    manifest: Mapping[str, object] | None = None,
) -> Path:
    """Write the iteration curve; with a manifest, write it alongside."""
    if not logs:
        raise ValueError("no iterations to emit")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_curve(logs), encoding="utf-8")
    if manifest is not None:
        manifest_path = path.with_name(path.stem + ".manifest.json")
        manifest_path.write_text(
            json.dumps(dict(manifest), sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    return path


def result_set_to_obj(result_set: ResultSet) -> dict:
    partitions = []
    for partition in result_set.partitions:
        partitions.append(
            {
                "clusters": sorted(sorted(cluster) for cluster in partition.clusters),
                "evidence_edges": [[p.left, p.right] for p in sorted(partition.evidence_edges)],
            }
        )
    return {"partitions": partitions, "probs": list(result_set.probs)}


def result_set_from_obj(obj: Mapping[str, object]) -> ResultSet:
    try:
        raw_partitions = obj["partitions"]
        probs = obj["probs"]
        partitions = tuple(
            Partition.from_clusters(
                entry["clusters"],
                frozenset(MatchPair(left, right) for left, right in entry["evidence_edges"])
                if "evidence_edges" in entry
                else None,
            )
            for entry in raw_partitions
        )
        return ResultSet(partitions, tuple(float(p) for p in probs))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed result set document: {exc}") from None


# ---------------------------------------------------------------------------
# capability probing


def sample_labeled_pairs(
    dataset: Dataset,
    truth: frozenset[MatchPair],
    n: int = 100,
    seed: int = 0,
) -> list[tuple[MatchPair, bool]]:
    """A balanced, seeded sample of positive and negative pairs for probing."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = random.Random(derive_seed(seed, "probe"))
    ids = sorted(dataset.ids)
    positives = sorted(truth)
    all_pairs = [
        MatchPair(ids[i], ids[j]) for i in range(len(ids)) for j in range(i + 1, len(ids))
    ]
    negatives = [pair for pair in all_pairs if pair not in truth]

    half = n // 2
    chosen_pos = positives if len(positives) <= half else rng.sample(positives, half)
    remainder = n - len(chosen_pos)
    chosen_neg = negatives if len(negatives) <= remainder else rng.sample(negatives, remainder)
    labeled = [(pair, True) for pair in chosen_pos] + [(pair, False) for pair in chosen_neg]
    rng.shuffle(labeled)
    return labeled
