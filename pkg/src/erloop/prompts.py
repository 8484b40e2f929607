"""Rendering of matching questions as oracle prompts.

Kept separate so both the cost model and the oracle clients can use it
without importing each other.
"""

from __future__ import annotations

from .core import Dataset, MatchPair, Record

_QUESTION = (
    'Given two records, identify whether they refer to the same records '
    'and answer me only "yes" or "no".'
)


def serialize_record(record: Record) -> str:
    """'Name: Jane Smith; Email: jane@x.com; ...' with absent values left empty."""
    return "; ".join(f"{name}: {value if value is not None else ''}" for name, value in record.attributes)


def render_prompt(pair: MatchPair, records: Dataset) -> str:
    """The deterministic prompt asking whether the two records co-refer."""
    first = serialize_record(records.get(pair.left))
    second = serialize_record(records.get(pair.right))
    return f"{_QUESTION}\nRecord 1: {first}\nRecord 2: {second}"


def template_base_chars() -> int:
    """Length of the prompt with both record serializations empty.

    Used by cost models that bill a fixed overhead for the template and
    per-character tokens only for the record payload.
    """
    return len(f"{_QUESTION}\nRecord 1: \nRecord 2: ")
