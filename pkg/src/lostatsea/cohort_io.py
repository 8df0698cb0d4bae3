"""JSON Lines cohort files and task-key documents.

A cohort file starts with a header line carrying ``schema_version`` (plus
cohort-level metadata) followed by one group per line. Serialization is
canonical: sorted keys, compact separators, members ordered by id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Mapping

from .election import (
    Ballot,
    ElectionError,
    ElectionOutcome,
    GapReport,
    TaskScore,
    W_MAX,
    W_MIN,
    check_ballot,
)
from .models import (
    SCHEMA_VERSION,
    Cohort,
    Gender,
    GroupRecord,
    IdentityProfile,
    ParticipantRecord,
    Population,
    SurveyResponses,
    TaskKey,
    TranscriptMessage,
    Treatment,
)

_GROUP_KEYS = {"group_id", "treatment", "members", "transcript", "election", "gap"}
_MEMBER_KEYS = {"id", "profile", "pseudonym", "survey", "nomination", "ballot", "task_answers", "score"}
_HEADER_KEYS = {"schema_version", "population"}

SURVEY_RANGES = {
    "risk_willingness": (0, 10),
    "gender_task_belief": (1, 10),
    "gender_leader_belief": (1, 10),
}


@dataclass(frozen=True)
class ValidationIssue:
    group_id: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"group {self.group_id or '?'}: {self.path}: {self.message}"


class CohortValidationError(ValueError):
    def __init__(self, issues: Iterable[ValidationIssue]):
        self.issues = list(issues)
        lines = "\n".join(f"  {i}" for i in self.issues)
        super().__init__(f"{len(self.issues)} validation issue(s):\n{lines}")


class SchemaError(CohortValidationError):
    pass


class _Invalid(Exception):
    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message


def _req(d: Mapping, key: str, path: str):
    if not isinstance(d, Mapping):
        raise _Invalid(path, "expected an object")
    if key not in d or d[key] is None:
        raise _Invalid(f"{path}.{key}" if path else key, "missing required field")
    return d[key]


def _str(v, path: str, allow_empty: bool = False) -> str:
    if not isinstance(v, str) or (not allow_empty and not v):
        raise _Invalid(path, f"expected a non-empty string, got {v!r}")
    return v


def _int_in(v, lo: int, hi: int, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise _Invalid(path, f"expected an integer, got {v!r}")
    if not lo <= v <= hi:
        raise _Invalid(path, f"value {v} out of range [{lo}, {hi}]")
    return int(v)


def _parse_member(d: Mapping, path: str) -> ParticipantRecord:
    pid = _str(_req(d, "id", path), f"{path}.id")
    prof = _req(d, "profile", path)
    profile = IdentityProfile(
        display_name=_str(_req(prof, "name", f"{path}.profile"), f"{path}.profile.name"),
        avatar=_str(prof.get("avatar", ""), f"{path}.profile.avatar", allow_empty=True),
        pronouns=_str(_req(prof, "pronouns", f"{path}.profile.pronouns"), f"{path}.profile.pronouns"),
    )
    sv = d.get("survey") or {}
    if not isinstance(sv, Mapping):
        raise _Invalid(f"{path}.survey", "expected an object")
    survey_kwargs = {
        "survival_experience": _str(sv.get("survival_experience", ""), f"{path}.survey.survival_experience", True),
        "leadership_experience": _str(sv.get("leadership_experience", ""), f"{path}.survey.leadership_experience", True),
    }
    for name, (lo, hi) in SURVEY_RANGES.items():
        if name in sv:
            survey_kwargs[name] = _int_in(sv[name], lo, hi, f"{path}.survey.{name}")
    pseudonym = d.get("pseudonym")
    if pseudonym is not None:
        pseudonym = _str(pseudonym, f"{path}.pseudonym")

    nomination = d.get("nomination")
    if nomination is not None:
        if isinstance(nomination, bool) or not isinstance(nomination, (int, float)):
            raise _Invalid(f"{path}.nomination", f"expected a number, got {nomination!r}")
        if not W_MIN <= nomination <= W_MAX:
            raise _Invalid(f"{path}.nomination", f"value {nomination} out of range [0, 10]")
        nomination = float(nomination)

    ballot = d.get("ballot")
    if ballot is not None:
        if not isinstance(ballot, list) or not all(isinstance(b, str) for b in ballot):
            raise _Invalid(f"{path}.ballot", "expected a list of participant ids")
        ballot = tuple(ballot)

    answers = d.get("task_answers")
    if answers is not None:
        if not isinstance(answers, Mapping) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in answers.items()
        ):
            raise _Invalid(f"{path}.task_answers", "expected an object of question id -> answer token")
        answers = dict(answers)

    score = d.get("score")
    if score is not None:
        max_items = _int_in(_req(score, "max_items", f"{path}.score"), 1, 10**6, f"{path}.score.max_items")
        correct = _int_in(_req(score, "correct", f"{path}.score"), 0, max_items, f"{path}.score.correct")
        score = TaskScore(pid, correct, max_items)

    return ParticipantRecord(
        id=pid,
        profile=profile,
        survey=SurveyResponses(**survey_kwargs),
        pseudonym=pseudonym,
        nomination=nomination,
        ballot=ballot,
        task_answers=answers,
        score=score,
        extra={k: v for k, v in d.items() if k not in _MEMBER_KEYS},
    )


def _parse_group(d: Mapping) -> GroupRecord:
    gid = _str(_req(d, "group_id", ""), "group_id")
    raw_t = _req(d, "treatment", "")
    try:
        treatment = Treatment(raw_t)
    except ValueError:
        raise _Invalid("treatment", f"unknown treatment {raw_t!r}") from None
    members = _req(d, "members", "")
    if not isinstance(members, list):
        raise _Invalid("members", "expected a list")
    parsed = [_parse_member(m, f"members[{i}]") for i, m in enumerate(members)]
    transcript = []
    for i, msg in enumerate(d.get("transcript") or []):
        p = f"transcript[{i}]"
        transcript.append(
            TranscriptMessage(
                speaker_alias=_str(_req(msg, "speaker_alias", p), f"{p}.speaker_alias"),
                turn_index=_int_in(_req(msg, "turn_index", p), 0, 10**9, f"{p}.turn_index"),
                text=_str(msg.get("text", ""), f"{p}.text", True),
            )
        )
    try:
        election = ElectionOutcome.from_dict(d["election"]) if d.get("election") else None
    except (KeyError, TypeError, ValueError) as exc:
        raise _Invalid("election", f"malformed election record: {exc}") from None
    try:
        gap = GapReport.from_dict(d["gap"], gid) if d.get("gap") else None
    except (KeyError, TypeError, ValueError) as exc:
        raise _Invalid("gap", f"malformed gap record: {exc}") from None
    return GroupRecord(
        group_id=gid,
        treatment=treatment,
        members=tuple(sorted(parsed, key=lambda m: m.id)),
        transcript=tuple(transcript),
        election=election,
        gap=gap,
        extra={k: v for k, v in d.items() if k not in _GROUP_KEYS},
    )


def validate_group(group: GroupRecord, population: Population = Population.HUMAN) -> list[ValidationIssue]:
    """Check every group-level invariant; returns the problems found."""
    gid = group.group_id
    issues: list[ValidationIssue] = []

    def bad(path: str, msg: str) -> None:
        issues.append(ValidationIssue(gid, path, msg))

    ids = group.member_ids
    if len(ids) != 4:
        bad("members", f"expected exactly 4 members, found {len(ids)}")
    if len(set(ids)) != len(ids):
        bad("members", f"duplicate participant ids {sorted(ids)}")
    males = sum(1 for m in group.members if m.gender is Gender.MALE)
    if len(ids) == 4 and males != 2:
        bad("members", f"expected 2 male and 2 non-male members, found {males} male")
    if group.treatment is Treatment.NO_DEMOGRAPHICS and population is not Population.SIMULATED:
        bad("treatment", "no_demographics applies only to simulated cohorts")

    for i, m in enumerate(group.members):
        if group.treatment.uses_pseudonyms and not m.pseudonym:
            bad(f"members[{i}].pseudonym", f"missing pseudonym under {group.treatment.value}")
        if not group.treatment.uses_pseudonyms and m.pseudonym:
            bad(f"members[{i}].pseudonym", "pseudonym present under identified treatment")
    visible = []
    for m in group.members:
        try:
            visible.append(m.visible_name(group.treatment))
        except ValueError:
            pass
    if len(set(visible)) != len(visible):
        bad("members", f"visible identities are not unique: {sorted(visible)}")

    last = -1
    for i, msg in enumerate(group.transcript):
        if msg.turn_index <= last:
            bad(f"transcript[{i}].turn_index", "turn indices must be strictly increasing")
        last = msg.turn_index
        if msg.speaker_alias not in visible:
            bad(f"transcript[{i}].speaker_alias", f"{msg.speaker_alias!r} is not a visible group identity")

    candidates = group.election.candidates if group.election else None
    for i, m in enumerate(group.members):
        if m.ballot is None:
            continue
        if candidates is not None:
            try:
                check_ballot(Ballot(m.id, m.ballot), candidates)
            except ElectionError as exc:
                bad(f"members[{i}].ballot", str(exc))
        elif len(set(m.ballot)) != len(m.ballot) or not set(m.ballot) <= set(ids):
            bad(f"members[{i}].ballot", "ballot must rank distinct group members")

    if group.election is not None:
        if not set(candidates.members) <= set(ids):
            bad("election.candidates", "candidate set is not a subset of the group")
        if group.election.elected not in candidates:
            bad("election.elected", "elected leader is not a candidate")
    if group.gap is not None:
        g = group.gap
        if g.delta_total != g.delta_self + g.delta_peer or g.delta_self * g.delta_peer != 0:
            bad("gap", "gap components do not decompose the total gap")
        if min(g.delta_total, g.delta_self, g.delta_peer) < 0:
            bad("gap", "gap values must be non-negative")
    return issues


def _parse_header(line: str, schema_version: str) -> tuple[Population, dict]:
    try:
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError([ValidationIssue("", "header", f"invalid JSON: {exc}")]) from None
    if not isinstance(header, dict) or "schema_version" not in header:
        raise SchemaError([ValidationIssue("", "header", "first line must be a schema_version header")])
    if str(header["schema_version"]) != schema_version:
        raise SchemaError(
            [ValidationIssue("", "header.schema_version", f"expected {schema_version!r}, got {header['schema_version']!r}")]
        )
    try:
        population = Population(header.get("population", "human"))
    except ValueError:
        raise SchemaError([ValidationIssue("", "header.population", f"unknown population {header['population']!r}")]) from None
    return population, {k: v for k, v in header.items() if k not in _HEADER_KEYS}


def ingest_with_diagnostics(
    source: bytes | str | IO, schema_version: str = SCHEMA_VERSION, key: TaskKey | None = None
) -> tuple[Cohort, list[ValidationIssue]]:
    """Parse and validate a cohort; invalid groups are dropped and reported."""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SchemaError([ValidationIssue("", "header", "empty cohort file")])
    population, metadata = _parse_header(lines[0], schema_version)

    groups: list[GroupRecord] = []
    issues: list[ValidationIssue] = []
    seen_groups: set[str] = set()
    seen_members: dict[str, str] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            issues.append(ValidationIssue("", f"line {lineno}", f"invalid JSON: {exc}"))
            continue
        gid = raw.get("group_id", "") if isinstance(raw, dict) else ""
        try:
            group = _parse_group(raw)
        except _Invalid as exc:
            issues.append(ValidationIssue(str(gid), exc.path, exc.message))
            continue
        except ElectionError as exc:
            issues.append(ValidationIssue(str(gid), "members", str(exc)))
            continue
        group_issues = validate_group(group, population)
        if group.group_id in seen_groups:
            group_issues.append(ValidationIssue(group.group_id, "group_id", "duplicate group id"))
        for m in group.members:
            if m.id in seen_members:
                group_issues.append(
                    ValidationIssue(group.group_id, "members", f"participant {m.id!r} also in group {seen_members[m.id]!r}")
                )
        if key is not None:
            from .protocol import score_task  # local: protocol imports this module

            for i, m in enumerate(group.members):
                if m.task_answers is not None and m.score is not None:
                    try:
                        expected = score_task(m.task_answers, key, m.id)
                    except ValueError as exc:
                        group_issues.append(ValidationIssue(group.group_id, f"members[{i}].task_answers", str(exc)))
                        continue
                    if expected != m.score:
                        group_issues.append(
                            ValidationIssue(group.group_id, f"members[{i}].score", "stored score disagrees with task key")
                        )
        if group_issues:
            issues.extend(group_issues)
            continue
        seen_groups.add(group.group_id)
        for m in group.members:
            seen_members[m.id] = group.group_id
        groups.append(group)
    return Cohort(tuple(groups), population, schema_version, metadata), issues


def ingest_cohort(
    source: bytes | str | IO,
    schema_version: str = SCHEMA_VERSION,
    key: TaskKey | None = None,
    drop_invalid: bool = False,
) -> Cohort:
    cohort, issues = ingest_with_diagnostics(source, schema_version, key)
    if issues and not drop_invalid:
        raise CohortValidationError(issues)
    return cohort


def member_to_dict(m: ParticipantRecord) -> dict:
    d: dict = dict(m.extra)
    d.update(
        id=m.id,
        profile={"name": m.profile.display_name, "avatar": m.profile.avatar, "pronouns": m.profile.pronouns},
        survey={
            "survival_experience": m.survey.survival_experience,
            "leadership_experience": m.survey.leadership_experience,
            "risk_willingness": m.survey.risk_willingness,
            "gender_task_belief": m.survey.gender_task_belief,
            "gender_leader_belief": m.survey.gender_leader_belief,
        },
    )
    if m.pseudonym is not None:
        d["pseudonym"] = m.pseudonym
    if m.nomination is not None:
        d["nomination"] = m.nomination
    if m.ballot is not None:
        d["ballot"] = list(m.ballot)
    if m.task_answers is not None:
        d["task_answers"] = dict(m.task_answers)
    if m.score is not None:
        d["score"] = {"correct": m.score.correct, "max_items": m.score.max_items}
    return d


def group_to_dict(g: GroupRecord) -> dict:
    d: dict = dict(g.extra)
    d.update(
        group_id=g.group_id,
        treatment=g.treatment.value,
        members=[member_to_dict(m) for m in g.canonical_members],
        transcript=[
            {"speaker_alias": t.speaker_alias, "turn_index": t.turn_index, "text": t.text} for t in g.transcript
        ],
    )
    if g.election is not None:
        d["election"] = g.election.to_dict()
    if g.gap is not None:
        d["gap"] = g.gap.to_dict()
    return d


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def serialize_cohort(cohort: Cohort) -> str:
    header = dict(cohort.metadata)
    header.update(schema_version=cohort.schema_version, population=cohort.population.value)
    lines = [_dumps(header)] + [_dumps(group_to_dict(g)) for g in cohort.groups]
    return "\n".join(lines) + "\n"


def read_cohort(path: str | Path, drop_invalid: bool = False, key: TaskKey | None = None) -> Cohort:
    with open(path, "rb") as fh:
        return ingest_cohort(fh, key=key, drop_invalid=drop_invalid)


def write_cohort(cohort: Cohort, path: str | Path) -> None:
    Path(path).write_text(serialize_cohort(cohort), encoding="utf-8")


def read_task_key(path: str | Path) -> TaskKey:
    return TaskKey.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def write_task_key(key: TaskKey, path: str | Path) -> None:
    Path(path).write_text(json.dumps(key.to_dict(), indent=2) + "\n", encoding="utf-8")

