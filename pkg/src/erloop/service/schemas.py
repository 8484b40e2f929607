"""Request and response models for the HTTP service.

Datasets travel as CSV text (same format as the files), run configuration as
the flat mapping RunConfig understands, and metric values that can be
undefined (no ground truth) travel as null instead of NaN.
"""

from __future__ import annotations

from math import isnan
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from ..core import MatchPair, Partition, ResultSet
from ..oracle import OracleAnswer
from ..pipeline import IterationLog, RunResult


def optional_metric(value: float) -> float | None:
    """NaN-safe transport form of a metric: None when undefined."""
    return None if isnan(value) else value


class PartitionModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    clusters: list[list[str]]
    evidence_edges: list[list[str]] | None = None

    @classmethod
    def from_core(cls, partition: Partition) -> "PartitionModel":
        return cls(
            clusters=sorted(sorted(cluster) for cluster in partition.clusters),
            evidence_edges=[[p.left, p.right] for p in sorted(partition.evidence_edges)],
        )

    def to_core(self) -> Partition:
        evidence = None
        if self.evidence_edges is not None:
            evidence = frozenset(MatchPair(left, right) for left, right in self.evidence_edges)
        return Partition.from_clusters(self.clusters, evidence)


class ResultSetModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    partitions: list[PartitionModel]
    probs: list[float]

    @classmethod
    def from_core(cls, result_set: ResultSet) -> "ResultSetModel":
        return cls(
            partitions=[PartitionModel.from_core(p) for p in result_set.partitions],
            probs=list(result_set.probs),
        )

    def to_core(self) -> ResultSet:
        return ResultSet(
            tuple(p.to_core() for p in self.partitions),
            tuple(self.probs),
        )


class AnswerModel(BaseModel):
    left: str
    right: str
    verdict: bool
    tokens_in: int
    tokens_out: int
    source: str

    @classmethod
    def from_core(cls, answer: OracleAnswer) -> "AnswerModel":
        return cls(
            left=answer.pair.left,
            right=answer.pair.right,
            verdict=answer.verdict,
            tokens_in=answer.tokens_in,
            tokens_out=answer.tokens_out,
            source=answer.source.value,
        )


class IterationModel(BaseModel):
    iteration: int
    questions: list[list[str]]
    answers: list[AnswerModel]
    tokens_spent: int
    cumulative_tokens: int
    entropy_bits: float
    precision: float | None
    recall: float | None
    top_partition: str

    @classmethod
    def from_core(cls, log: IterationLog) -> "IterationModel":
        return cls(
            iteration=log.iteration,
            questions=[[p.left, p.right] for p in log.questions],
            answers=[AnswerModel.from_core(a) for a in log.answers],
            tokens_spent=log.tokens_spent,
            cumulative_tokens=log.cumulative_tokens,
            entropy_bits=log.entropy_bits,
            precision=optional_metric(log.precision),
            recall=optional_metric(log.recall),
            top_partition=log.top_partition,
        )


class RunSummary(BaseModel):
    iterations: int
    questions_asked: int
    budget_limit: int
    tokens_spent: int
    tokens_overrun: int
    initial_entropy_bits: float
    final_entropy_bits: float
    initial_precision: float | None
    initial_recall: float | None
    final_precision: float | None
    final_recall: float | None
    top_partition: str

    @classmethod
    def from_core(cls, run: RunResult) -> "RunSummary":
        return cls(
            iterations=len(run.logs),
            questions_asked=sum(len(log.questions) for log in run.logs),
            budget_limit=run.budget_limit,
            tokens_spent=run.tokens_spent,
            tokens_overrun=run.tokens_overrun,
            initial_entropy_bits=run.initial_entropy_bits,
            final_entropy_bits=run.final.entropy_bits,
            initial_precision=optional_metric(run.initial_precision),
            initial_recall=optional_metric(run.initial_recall),
            final_precision=optional_metric(run.final.precision),
            final_recall=optional_metric(run.final.recall),
            top_partition=run.final.top_partition,
        )


class SweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    records_csv: str
    sim_function: Literal["levenshtein", "jaro", "jaccard"] = "levenshtein"
    thresholds: list[float] | None = None
    missing_policy: Literal["skip", "mismatch"] = "skip"
    init: Literal["uniform", "gaussian", "gaussian-sampled"] = "uniform"
    seed: int = 0


class SweepResponse(BaseModel):
    result_set: ResultSetModel
    entropy_bits: float
    n_partitions: int
    n_records: int


class RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: dict[str, Any] = Field(default_factory=dict)
    records_csv: str | None = None
    truth_csv: str | None = None


class RunResponse(BaseModel):
    summary: RunSummary
    iterations: list[IterationModel]
    curve_csv: str
    manifest: dict[str, Any]
    result_set: ResultSetModel


class EvalRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    result_set: ResultSetModel
    truth_csv: str
    records_csv: str | None = None


class EvalResponse(BaseModel):
    precision: float
    recall: float
    truth_pairs: int
    predicted_pairs: int
    empty_prediction: bool


class ProbeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    records_csv: str
    truth_csv: str
    n: int = 100
    config: dict[str, Any] = Field(default_factory=dict)


class ProbeResponse(BaseModel):
    theta_estimate: float
    sample_size: int


class SynthRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    entities: int
    dup_rate: float = 0.4
    typo_rate: float = 0.3
    abbrev_rate: float = 0.2
    drop_rate: float = 0.1
    max_extra_copies: int = 3
    seed: int = 0


class SynthResponse(BaseModel):
    records_csv: str
    truth_csv: str
    n_records: int
    n_truth_pairs: int


class BenchRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: dict[str, Any] = Field(default_factory=dict)
    seeds: list[int]
    strategies: list[Literal["single", "greedy", "random"]] = ["greedy", "random"]
    records_csv: str | None = None
    truth_csv: str | None = None


class BenchRunModel(BaseModel):
    seed: int
    strategy: str
    iterations: int
    questions_asked: int
    tokens_spent: int
    initial_entropy_bits: float
    final_entropy_bits: float
    final_precision: float | None
    final_recall: float | None
    curve_points: list[tuple[int, float]]


class BenchResponse(BaseModel):
    runs: list[BenchRunModel]
    mean_final_entropy: dict[str, float]


class ErrorBody(BaseModel):
    error: str
    detail: str
