"""Answer acquisition: verdict parsing, a seeded simulated oracle, and an HTTP LLM client.

Both oracles answer matching questions with a plain yes/no verdict plus the
token counts the question consumed. The simulated oracle answers from ground
truth, flipping each verdict independently with probability 1 − θ on a
per-pair deterministic stream, so re-asking the same pair in the same run
always returns the same verdict.
"""

from __future__ import annotations

import logging
import os
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import httpx

from .core import Dataset, MatchPair
from .entropy import QuestionSet
from .errors import AuthError, TransportError, UnparseableAnswer
from .prompts import render_prompt, serialize_record
from .seeds import derive_seed
from .select import CostModel

__all__ = [
    "AnswerSource",
    "OracleAnswer",
    "SimulatedOracleSpec",
    "LlmEndpointSpec",
    "render_prompt",
    "serialize_record",
    "parse_verdict",
    "ask_simulated",
    "ask_llm",
    "simulated_asker",
    "llm_asker",
    "estimate_capability",
    "clamp_theta",
]

logger = logging.getLogger(__name__)

# Keep θ away from {0, 1} before it enters a Bayes update; at the extremes a
# single contradicting answer would annihilate all probability mass.
THETA_EPSILON = 0.01


class AnswerSource(str, Enum):
    SIMULATED = "simulated"
    LLM = "llm"


@dataclass(frozen=True)
class OracleAnswer:
    """One verdict with its token bill. tokens_in includes charged retries."""

    pair: MatchPair
    verdict: bool
    tokens_in: int
    tokens_out: int
    source: AnswerSource

    def __post_init__(self) -> None:
        if self.tokens_in < 0 or self.tokens_out < 0:
            raise ValueError("token counts must be non-negative")

    @property
    def total_tokens(self) -> int:
        return self.tokens_in + self.tokens_out


@dataclass(frozen=True)
class SimulatedOracleSpec:
    """Ground truth plus the capability θ (probability of a correct verdict)."""

    truth: frozenset[MatchPair]
    theta: float = 0.9
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "truth", frozenset(self.truth))
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta!r}")


@dataclass(frozen=True)
class LlmEndpointSpec:
    """Where and how to reach a chat-completions style endpoint.

    The API key is read from the environment variable named by
    ``api_key_env`` and never logged. ``charge_failed_attempts`` controls
    whether timed-out or retried requests still cost their estimated tokens.
    """

    base_url: str
    model_name: str
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 30.0
    max_retries: int = 2
    max_in_flight: int = 4
    charge_failed_attempts: bool = True

    def __post_init__(self) -> None:
        if not self.base_url:
            raise ValueError("base_url must be non-empty")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be at least 1")


_VERDICT_PATTERN = re.compile(r"\W*(yes|no)\b", re.IGNORECASE)


def parse_verdict(text: str) -> bool:
    """Reduce a reply to a verdict: leading yes → True, leading no → False."""
    match = _VERDICT_PATTERN.match(text)
    if match is None:
        raise UnparseableAnswer(f"could not find a yes/no verdict in {text!r}")
    return match.group(1).lower() == "yes"


def ask_simulated(
    questions: QuestionSet,
    spec: SimulatedOracleSpec,
    records: Dataset,
    cm: CostModel = CostModel(),
) -> list[OracleAnswer]:
    """Answer from ground truth with per-pair seeded error injection.

    The flip draw is seeded by (spec.seed, canonical pair), so answers do not
    depend on question order or on what else is in the set.
    """
    answers = []
    for pair in questions:
        rng = random.Random(derive_seed(spec.seed, f"oracle:{pair.left}+{pair.right}"))
        flipped = rng.random() < (1.0 - spec.theta)
        verdict = (pair in spec.truth) != flipped
        answers.append(
            OracleAnswer(
                pair=pair,
                verdict=verdict,
                tokens_in=cm.prompt_tokens(render_prompt(pair, records)),
                tokens_out=cm.response_tokens,
                source=AnswerSource.SIMULATED,
            )
        )
    return answers


def _extract_verdict(payload: dict) -> tuple[bool, dict]:
    try:
        content = payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise UnparseableAnswer(f"malformed completion payload: {payload!r}") from None
    usage = payload.get("usage") or {}
    return parse_verdict(content), usage


def _ask_one_llm(
    client: httpx.Client,
    url: str,
    headers: dict[str, str],
    pair: MatchPair,
    records: Dataset,
    spec: LlmEndpointSpec,
    cm: CostModel,
) -> OracleAnswer:
    prompt = render_prompt(pair, records)
    estimated_in = cm.prompt_tokens(prompt)
    body = {"model": spec.model_name, "messages": [{"role": "user", "content": prompt}]}
    charged_in = 0
    charged_out = 0
    attempts = spec.max_retries + 1
    last_error: Exception | None = None

    for _ in range(attempts):
        try:
            response = client.post(url, headers=headers, json=body)
        except httpx.TransportError as exc:
            if spec.charge_failed_attempts:
                charged_in += estimated_in
            last_error = TransportError(f"request for {pair} failed: {exc}")
            continue
        if response.status_code in (401, 403):
            raise AuthError(f"endpoint rejected credentials from ${spec.api_key_env} (HTTP {response.status_code})")
        if response.status_code >= 400:
            if spec.charge_failed_attempts:
                charged_in += estimated_in
            last_error = TransportError(f"request for {pair} got HTTP {response.status_code}")
            continue
        try:
            payload = response.json()
            verdict, usage = _extract_verdict(payload)
        except (UnparseableAnswer, ValueError) as exc:
            usage = {}
            try:
                usage = response.json().get("usage") or {}
            except ValueError:
                pass
            if spec.charge_failed_attempts:
                charged_in += int(usage.get("prompt_tokens", estimated_in))
                charged_out += int(usage.get("completion_tokens", 0))
            last_error = exc if isinstance(exc, UnparseableAnswer) else UnparseableAnswer(str(exc))
            continue
        tokens_in = int(usage.get("prompt_tokens", estimated_in))
        tokens_out = int(usage.get("completion_tokens", cm.response_tokens))
        return OracleAnswer(
            pair=pair,
            verdict=verdict,
            tokens_in=charged_in + tokens_in,
            tokens_out=charged_out + tokens_out,
            source=AnswerSource.LLM,
        )

    charged = charged_in + charged_out
    if isinstance(last_error, UnparseableAnswer):
        raise UnparseableAnswer(str(last_error), tokens_charged=charged)
    raise TransportError(str(last_error), attempts=attempts, tokens_charged=charged)


def ask_llm(
    questions: QuestionSet,
    spec: LlmEndpointSpec,
    records: Dataset,
    cm: CostModel = CostModel(),
    transport: httpx.BaseTransport | None = None,
) -> list[OracleAnswer]:
    """One chat request per pair, at most max_in_flight concurrently.

    Answers come back in canonical pair order regardless of completion
    order. Token counts prefer the response's usage metadata over the
    estimate. On failure the raised error's tokens_charged covers everything
    billed during this call, including the questions that did succeed.
    """
    if not len(questions):
        return []
    api_key = os.environ.get(spec.api_key_env)
    if not api_key:
        raise AuthError(f"environment variable {spec.api_key_env} is not set")
    url = spec.base_url.rstrip("/") + "/chat/completions"
    headers = {"Authorization": f"Bearer {api_key}"}

    answers: dict[MatchPair, OracleAnswer] = {}
    failures: list[Exception] = []
    with httpx.Client(timeout=spec.timeout, transport=transport) as client:
        workers = min(spec.max_in_flight, len(questions))
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = {
                pair: executor.submit(_ask_one_llm, client, url, headers, pair, records, spec, cm)
                for pair in questions
            }
            for pair in questions:
                try:
                    answers[pair] = futures[pair].result()
                except (TransportError, UnparseableAnswer, AuthError) as exc:
                    failures.append(exc)

    if failures:
        total = sum(getattr(exc, "tokens_charged", 0) for exc in failures)
        total += sum(answer.total_tokens for answer in answers.values())
        auth = next((e for e in failures if isinstance(e, AuthError)), None)
        if auth is not None:
            raise auth
        transport_failures = [e for e in failures if isinstance(e, TransportError)]
        if transport_failures:
            first = transport_failures[0]
            raise TransportError(str(first), attempts=first.attempts, tokens_charged=total)
        raise UnparseableAnswer(str(failures[0]), tokens_charged=total)

    return [answers[pair] for pair in questions]


def simulated_asker(
    spec: SimulatedOracleSpec, records: Dataset, cm: CostModel = CostModel()
) -> Callable[[QuestionSet], list[OracleAnswer]]:
    return lambda questions: ask_simulated(questions, spec, records, cm)


def llm_asker(
    spec: LlmEndpointSpec,
    records: Dataset,
    cm: CostModel = CostModel(),
    transport: httpx.BaseTransport | None = None,
) -> Callable[[QuestionSet], list[OracleAnswer]]:
    return lambda questions: ask_llm(questions, spec, records, cm, transport)


def clamp_theta(theta: float, epsilon: float = THETA_EPSILON) -> float:
    """Pull θ into [ε, 1−ε] so updates never zero out the whole distribution."""
    return min(1.0 - epsilon, max(epsilon, theta))


def estimate_capability(
    labeled: Sequence[tuple[MatchPair, bool]],
    oracle: Callable[[QuestionSet], list[OracleAnswer]],
    epsilon: float = THETA_EPSILON,
) -> float:
    """Fraction of labeled pairs the oracle gets right, clamped to [ε, 1−ε]."""
    if not labeled:
        raise ValueError("need at least one labeled pair")
    correct = 0
    for pair, truth_verdict in labeled:
        answer = oracle(QuestionSet.of((pair,)))[0]
        correct += answer.verdict == truth_verdict
    return clamp_theta(correct / len(labeled), epsilon)
