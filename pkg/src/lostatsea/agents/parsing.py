"""Strict parsing of model replies.

Parsers never clamp or guess: anything outside the stage contract raises a
``ResponseError`` so the caller can re-ask.
"""

from __future__ import annotations

import re
from typing import Mapping, Sequence

from ..election import W_MAX, W_MIN
from ..models import StageId, TaskKey


class ResponseError(ValueError):
    reason = "unparseable"


class UnparseableResponse(ResponseError):
    pass


class OutOfRangeResponse(ResponseError):
    reason = "out of range"


class IncompleteResponse(ResponseError):
    reason = "incomplete"


_ANSWER = re.compile(r"answer\s*:", re.IGNORECASE)
_NUMBER = re.compile(r"[-+]?\d+(?:\.\d+)?")
_OUT_OF_TEN = re.compile(r"\s*(?:/|out of)\s*10\b", re.IGNORECASE)


def _answer_segment(raw: str) -> str:
    matches = list(_ANSWER.finditer(raw))
    return raw[matches[-1].end() :] if matches else raw


def parse_nomination(raw: str) -> float:
    has_answer_line = _ANSWER.search(raw) is not None
    segment = _OUT_OF_TEN.sub("", _answer_segment(raw)).strip()
    numbers = _NUMBER.findall(segment)
    if not numbers:
        raise UnparseableResponse(f"no number found in {segment[:80]!r}")
    if len(numbers) > 1 and not has_answer_line:
        raise UnparseableResponse(f"ambiguous self-nomination, found {numbers}")
    value = float(numbers[0])
    if not W_MIN <= value <= W_MAX:
        raise OutOfRangeResponse(f"self-nomination {value:g} is outside [0, 10]")
    return value


def parse_ranking(raw: str, candidates: Sequence[str]) -> tuple[str, ...]:
    """Order the candidate labels as ranked in the reply."""
    segment = _answer_segment(raw)
    numbered: dict[str, int] = {}
    first_pos: dict[str, int] = {}
    for label in candidates:
        pat = re.compile(rf"(?<!\w){re.escape(label)}(?!\w)", re.IGNORECASE)
        m = pat.search(segment)
        if m is None:
            continue
        first_pos[label] = m.start()
        num = re.search(rf"(\d+)\s*[.):-]?\s*{re.escape(label)}(?!\w)", segment, re.IGNORECASE)
        if num is not None:
            numbered[label] = int(num.group(1))
    missing = [c for c in candidates if c not in first_pos]
    if missing:
        raise IncompleteResponse(f"ranking omits {missing}")
    if len(numbered) == len(candidates) and len(set(numbered.values())) == len(candidates):
        return tuple(sorted(candidates, key=lambda c: numbered[c]))
    return tuple(sorted(candidates, key=lambda c: first_pos[c]))


def parse_task_answers(raw: str, key: TaskKey) -> dict[str, str]:
    answers: dict[str, str] = {}
    for item in key.items:
        pat = re.compile(rf"(?im)^[\s*\-]*{re.escape(item.id)}\s*[:=)\-]\s*\(?([A-Za-z0-9]+)")
        found = pat.findall(raw)
        if not found:
            continue
        token = found[-1]
        if item.options:
            lookup = {o.lower(): o for o in item.options}
            if token.lower() not in lookup:
                raise OutOfRangeResponse(f"{item.id}: {token!r} is not one of {list(item.options)}")
            token = lookup[token.lower()]
        answers[item.id] = token
    missing = [q for q in key.question_ids if q not in answers]
    if missing:
        raise IncompleteResponse(f"no answer for {missing}")
    return answers


def parse_stage_response(
    stage: StageId,
    raw: str,
    candidates: Sequence[str] | Mapping[str, str] | None = None,
    key: TaskKey | None = None,
):
    """Parse ``raw`` for ``stage``.

    SELF_NOMINATION gives a float, ELECTION_BALLOT a tuple of candidate labels
    (or participant ids when ``candidates`` maps label -> id), TASK a dict of
    question id -> answer token, and the free-text stages the stripped reply.
    """
    if raw is None or not raw.strip():
        raise UnparseableResponse("empty reply")
    if stage in (StageId.PROFILE, StageId.DISCUSSION):
        return raw.strip()
    if stage is StageId.SELF_NOMINATION:
        return parse_nomination(raw)
    if stage is StageId.ELECTION_BALLOT:
        if not candidates:
            raise ValueError("ballot parsing needs the candidate labels")
        labels = list(candidates)
        ranking = parse_ranking(raw, labels)
        if isinstance(candidates, Mapping):
            return tuple(candidates[label] for label in ranking)
        return ranking
    if key is None:
        raise ValueError("task parsing needs the task key")
    return parse_task_answers(raw, key)
