"""Cohort data model.

Records are frozen dataclasses; ``dataclasses.replace`` produces updated
copies. ``extra`` dicts carry unknown JSON fields so files round-trip intact.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping

from .election import CandidateSet, ElectionOutcome, GapReport, SelfNomination, TaskScore

SCHEMA_VERSION = "1"
PLACEHOLDER_MARKER = "[synthetic-placeholder]"


class Treatment(str, enum.Enum):
    IDENTIFIED = "identified"
    PSEUDONYMOUS = "pseudonymous"
    NO_DEMOGRAPHICS = "no_demographics"

    @property
    def uses_pseudonyms(self) -> bool:
        return self is not Treatment.IDENTIFIED


class Gender(str, enum.Enum):
    MALE = "male"
    NON_MALE = "non_male"


class Population(str, enum.Enum):
    HUMAN = "human"
    SIMULATED = "simulated"
    SYNTHETIC = "synthetic"


class StageId(str, enum.Enum):
    PROFILE = "profile"
    DISCUSSION = "discussion"
    SELF_NOMINATION = "self_nomination"
    ELECTION_BALLOT = "election_ballot"
    TASK = "task"

    @property
    def index(self) -> int:
        return STAGE_ORDER.index(self)


STAGE_ORDER = tuple(StageId)


def gender_from_pronouns(pronouns: str) -> Gender:
    # "Non-male" means anything other than he/him, including custom entries.
    norm = "".join(pronouns.lower().split())
    return Gender.MALE if norm == "he/him" else Gender.NON_MALE


@dataclass(frozen=True)
class IdentityProfile:
    display_name: str
    avatar: str
    pronouns: str

    @property
    def gender(self) -> Gender:
        return gender_from_pronouns(self.pronouns)


@dataclass(frozen=True)
class SurveyResponses:
    survival_experience: str = ""
    leadership_experience: str = ""
    risk_willingness: int = 5
    gender_task_belief: int = 5
    gender_leader_belief: int = 5


@dataclass(frozen=True)
class TranscriptMessage:
    speaker_alias: str
    turn_index: int
    text: str


@dataclass(frozen=True)
class TaskItem:
    id: str
    answer: str
    prompt: str = ""
    options: tuple[str, ...] = ()


@dataclass(frozen=True)
class TaskKey:
    items: tuple[TaskItem, ...]
    max_items: int

    def __post_init__(self):
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate question ids in task key: {ids}")
        if self.max_items != len(self.items):
            raise ValueError(f"max_items ({self.max_items}) must equal item count ({len(self.items)})")

    @property
    def question_ids(self) -> tuple[str, ...]:
        return tuple(it.id for it in self.items)

    def to_dict(self) -> dict:
        items = []
        for it in self.items:
            d: dict = {"id": it.id, "answer": it.answer}
            if it.prompt:
                d["prompt"] = it.prompt
            if it.options:
                d["options"] = list(it.options)
            items.append(d)
        return {"items": items, "max_items": self.max_items}

    @classmethod
    def from_dict(cls, d: Mapping) -> "TaskKey":
        items = tuple(
            TaskItem(str(it["id"]), str(it["answer"]), it.get("prompt", ""), tuple(it.get("options", ())))
            for it in d["items"]
        )
        return cls(items, int(d.get("max_items", len(items))))


# Pairwise comparisons drawn from the usual Lost at Sea item list; the correct
# token is the item ranked higher by the standard expert ordering.
_DEFAULT_ITEMS = (
    ("q1", "a shaving mirror", "a sextant", "A"),
    ("q2", "a fishing kit", "a can of oil-petrol mixture", "B"),
    ("q3", "a five-gallon can of water", "maps of the Pacific Ocean", "A"),
    ("q4", "mosquito netting", "a case of army rations", "B"),
    ("q5", "plastic sheeting", "a small transistor radio", "A"),
    ("q6", "a bottle of rum", "fifteen feet of nylon rope", "B"),
)


def default_task_key(max_items: int = 6) -> TaskKey:
    if max_items <= len(_DEFAULT_ITEMS):
        items = tuple(
            TaskItem(qid, ans, f"Which is more useful for survival at sea? A) {a}  B) {b}", ("A", "B"))
            for qid, a, b, ans in _DEFAULT_ITEMS[:max_items]
        )
    else:
        items = tuple(
            TaskItem(f"q{i + 1}", "AB"[i % 2], f"Item {i + 1}: choose A or B.", ("A", "B"))
            for i in range(max_items)
        )
    return TaskKey(items, max_items)


@dataclass(frozen=True)
class ParticipantRecord:
    id: str
    profile: IdentityProfile
    survey: SurveyResponses = field(default_factory=SurveyResponses)
    pseudonym: str | None = None
    nomination: float | None = None
    ballot: tuple[str, ...] | None = None
    task_answers: Mapping[str, str] | None = None
    score: TaskScore | None = None
    extra: Mapping = field(default_factory=dict, compare=False)

    @property
    def gender(self) -> Gender:
        return self.profile.gender

    def visible_name(self, treatment: Treatment) -> str:
        """The label the rest of the group sees for this member."""
        if treatment.uses_pseudonyms:
            if not self.pseudonym:
                raise ValueError(f"participant {self.id!r} has no pseudonym")
            return self.pseudonym
        return self.profile.display_name

    def self_nomination(self) -> SelfNomination:
        if self.nomination is None:
            raise ValueError(f"participant {self.id!r} has no self-nomination")
        return SelfNomination(self.id, self.nomination)


@dataclass(frozen=True)
class GroupRecord:
    group_id: str
    treatment: Treatment
    members: tuple[ParticipantRecord, ...]
    transcript: tuple[TranscriptMessage, ...] = ()
    election: ElectionOutcome | None = None
    gap: GapReport | None = None
    extra: Mapping = field(default_factory=dict, compare=False)

    def member(self, pid: str) -> ParticipantRecord:
        for m in self.members:
            if m.id == pid:
                return m
        raise KeyError(pid)

    @property
    def member_ids(self) -> tuple[str, ...]:
        return tuple(m.id for m in self.members)

    @property
    def canonical_members(self) -> tuple[ParticipantRecord, ...]:
        return tuple(sorted(self.members, key=lambda m: m.id))

    @property
    def is_complete(self) -> bool:
        return self.election is not None and self.gap is not None and all(
            m.score is not None and m.nomination is not None for m in self.members
        )

    @property
    def candidates(self) -> CandidateSet | None:
        return self.election.candidates if self.election else None

    def gender_of(self, pid: str) -> Gender:
        return self.member(pid).gender

    @property
    def has_placeholder_transcript(self) -> bool:
        return any(PLACEHOLDER_MARKER in msg.text for msg in self.transcript)


@dataclass(frozen=True)
class Cohort:
    groups: tuple[GroupRecord, ...]
    population: Population = Population.HUMAN
    schema_version: str = SCHEMA_VERSION
    metadata: Mapping = field(default_factory=dict)

    def __iter__(self):
        return iter(self.groups)

    def __len__(self) -> int:
        return len(self.groups)

    def by_id(self) -> dict[str, GroupRecord]:
        return {g.group_id: g for g in self.groups}

    @property
    def group_ids(self) -> tuple[str, ...]:
        return tuple(g.group_id for g in self.groups)

    @property
    def treatment(self) -> Treatment | None:
        ts = {g.treatment for g in self.groups}
        return ts.pop() if len(ts) == 1 else None
