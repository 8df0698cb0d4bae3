"""Group formation, task scoring and the five-stage session.

``run_session`` drives one group through PROFILE, DISCUSSION,
SELF_NOMINATION, ELECTION_BALLOT and TASK. Member outputs come from a
responder: ``ReplayResponder`` reads stored human answers, the agent
simulator asks a language model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Protocol, Sequence

from .cohort_io import validate_group
from .election import (
    Ballot,
    CandidateSet,
    ElectionError,
    SelfNomination,
    TaskScore,
    leader_gap,
    resolve_election,
    select_candidates,
)
from .models import (
    STAGE_ORDER,
    Cohort,
    Gender,
    GroupRecord,
    ParticipantRecord,
    Population,
    StageId,
    TaskKey,
    default_task_key,
)
from .seeding import derive_seed, rng_for

log = logging.getLogger(__name__)

DEFAULT_ROSTER = (
    "Bear", "Cat", "Fox", "Owl", "Elk", "Wolf", "Hare", "Deer",
    "Otter", "Crow", "Seal", "Lynx", "Moose", "Heron", "Badger", "Falcon",
)

# Tokens that would leak gender through an alias.
_GENDERED = {
    "man", "woman", "men", "women", "boy", "girl", "king", "queen", "prince", "princess",
    "lord", "lady", "mr", "mrs", "ms", "miss", "sir", "madam", "he", "she", "him", "her",
    "his", "hers", "male", "female", "father", "mother", "son", "daughter", "brother",
    "sister", "husband", "wife", "bull", "cow", "stallion", "mare", "rooster", "hen",
    "ram", "ewe", "drake", "buck", "doe", "lion", "lioness", "tiger", "tigress",
}


class SessionError(RuntimeError):
    """A session could not complete (responder failure or broken invariant)."""


class MissingResponse(SessionError):
    pass


@dataclass(frozen=True)
class StageContext:
    stage: StageId
    key: TaskKey
    candidates: CandidateSet | None = None


class Responder(Protocol):
    def respond(
        self, group: GroupRecord, member: ParticipantRecord, stage: StageId, context: StageContext
    ) -> object: ...


class ReplayResponder:
    """Replays the answers already stored on each participant record."""

    def respond(self, group, member, stage, context):
        if stage in (StageId.PROFILE, StageId.DISCUSSION):
            return None
        if stage is StageId.SELF_NOMINATION:
            value = member.nomination
        elif stage is StageId.ELECTION_BALLOT:
            value = member.ballot
        elif member.task_answers is not None:
            value = member.task_answers
        else:
            value = member.score
        if value is None:
            raise MissingResponse(f"group {group.group_id}: no stored {stage.value} response for {member.id}")
        return value


def stratify_groups(participants: Sequence[ParticipantRecord], seed: int) -> list[tuple[ParticipantRecord, ...]]:
    """Random four-person groups with two male and two non-male members each."""
    if len(participants) % 4:
        raise ValueError(f"participant count {len(participants)} is not divisible by 4")
    ids = [p.id for p in participants]
    if len(set(ids)) != len(ids):
        raise ValueError("participant ids must be unique")
    male = sorted((p for p in participants if p.gender is Gender.MALE), key=lambda p: p.id)
    other = sorted((p for p in participants if p.gender is Gender.NON_MALE), key=lambda p: p.id)
    if len(male) != len(other):
        raise ValueError(f"cannot balance groups: {len(male)} male vs {len(other)} non-male participants")
    rng = rng_for(seed, "stratify_groups")
    rng.shuffle(male)
    rng.shuffle(other)
    return [
        tuple(sorted(male[i : i + 2] + other[i : i + 2], key=lambda p: p.id))
        for i in range(0, len(male), 2)
    ]


def check_roster(roster: Sequence[str]) -> None:
    if len(set(roster)) != len(roster):
        raise ValueError("pseudonym roster contains duplicates")
    gendered = [a for a in roster if set(a.lower().replace("-", " ").split()) & _GENDERED]
    if gendered:
        raise ValueError(f"pseudonym roster contains gendered tokens: {gendered}")


def assign_pseudonyms(group: GroupRecord, roster: Sequence[str] = DEFAULT_ROSTER, seed: int = 0) -> GroupRecord:
    if not group.treatment.uses_pseudonyms:
        raise ValueError(f"group {group.group_id}: pseudonyms require a pseudonymous treatment")
    if len(roster) < len(group.members):
        raise ValueError(f"roster of {len(roster)} aliases is too small for {len(group.members)} members")
    check_roster(roster)
    aliases = rng_for(seed, group.group_id, "pseudonyms").sample(list(roster), len(group.members))
    members = group.canonical_members
    renamed = {m.profile.display_name: a for m, a in zip(members, aliases)}
    transcript = tuple(
        replace(t, speaker_alias=renamed.get(t.speaker_alias, t.speaker_alias)) for t in group.transcript
    )
    return replace(
        group,
        members=tuple(replace(m, pseudonym=a) for m, a in zip(members, aliases)),
        transcript=transcript,
    )


def score_task(answers: Mapping[str, str], key: TaskKey, participant: str = "") -> TaskScore:
    """Count exact matches against the key; unanswered items count as wrong."""
    known = {it.id: it.answer for it in key.items}
    unknown = sorted(set(answers) - set(known))
    if unknown:
        raise ValueError(f"answers reference unknown question ids {unknown}")
    correct = sum(1 for qid, ans in answers.items() if ans == known[qid])
    return TaskScore(participant or "?", correct, key.max_items)


def _stored_candidates_usable(group: GroupRecord, noms: Sequence[SelfNomination]) -> CandidateSet | None:
    if group.election is None:
        return None
    cands = group.election.candidates
    w = {n.participant: n.score for n in noms}
    if not set(cands.members) <= set(w):
        return None
    lowest_in = min(w[c] for c in cands.members)
    highest_out = max((w[p] for p in w if p not in cands), default=float("-inf"))
    return cands if lowest_in >= highest_out else None


def run_session(
    group: GroupRecord,
    responder: Responder,
    seed: int,
    key: TaskKey | None = None,
    on_tie: str = "draw",
    reuse_stored_candidates: bool = False,
) -> GroupRecord:
    """Execute every stage in order and return the completed group record.

    With ``reuse_stored_candidates`` a stored candidate set is kept when it is
    consistent with the nominations, so replays of human groups whose cutoff
    tie was broken on the original platform reproduce that choice.
    """
    key = key or default_task_key()
    gid = group.group_id
    members = group.canonical_members
    updates: dict[str, dict] = {m.id: {} for m in members}
    nominations: list[SelfNomination] = []
    candidates: CandidateSet | None = None
    outcome = None
    scores: list[TaskScore] = []

    for stage in STAGE_ORDER:
        ctx = StageContext(stage, key, candidates)
        for m in members:
            value = responder.respond(group, m, stage, ctx)
            if stage is StageId.SELF_NOMINATION:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise SessionError(f"group {gid}: non-numeric self-nomination from {m.id}: {value!r}")
                nominations.append(SelfNomination(m.id, float(value)))
                updates[m.id]["nomination"] = float(value)
            elif stage is StageId.ELECTION_BALLOT:
                updates[m.id]["ballot"] = tuple(value)
            elif stage is StageId.TASK:
                if isinstance(value, TaskScore):
                    score = replace(value, participant=m.id)
                else:
                    updates[m.id]["task_answers"] = dict(value)
                    score = score_task(value, key, m.id)
                scores.append(score)
                updates[m.id]["score"] = score

        if stage is StageId.SELF_NOMINATION:
            if reuse_stored_candidates:
                candidates = _stored_candidates_usable(group, nominations)
            if candidates is None:
                candidates = select_candidates(nominations, derive_seed(seed, gid, "candidates"), on_tie)
        elif stage is StageId.ELECTION_BALLOT:
            ballots = [Ballot(pid, u["ballot"]) for pid, u in updates.items()]
            outcome = resolve_election(ballots, candidates, nominations, derive_seed(seed, gid, "election"))

    gap = leader_gap(scores, candidates, outcome.elected, key.max_items, gid)
    done = replace(
        group,
        members=tuple(replace(m, **updates[m.id]) for m in members),
        election=outcome,
        gap=gap,
    )
    issues = validate_group(done, Population.SIMULATED)
    if issues:
        raise SessionError("; ".join(str(i) for i in issues))
    return done


def replay_cohort(cohort: Cohort, seed: int = 0, key: TaskKey | None = None) -> Cohort:
    """Re-derive elections and gaps from the stored human responses."""
    done = tuple(
        run_session(g, ReplayResponder(), seed, key, reuse_stored_candidates=True) for g in cohort.groups
    )
    return replace(cohort, groups=done)


def stored_election_matches(group: GroupRecord, seed: int = 0, key: TaskKey | None = None) -> bool:
    if group.election is None:
        raise ValueError(f"group {group.group_id} has no stored election")
    replayed = run_session(group, ReplayResponder(), seed, key, reuse_stored_candidates=True)
    return replayed.election.elected == group.election.elected


def payout_preview(group: GroupRecord, base, bonus_max) -> dict[str, Decimal]:
    """Every member receives ``base + bonus_max * S(elected) / max_items``."""
    if group.election is None:
        raise ValueError(f"group {group.group_id} has no election result")
    leader = group.member(group.election.elected)
    if leader.score is None:
        raise ValueError(f"group {group.group_id}: elected leader has no task score")
    amount = Decimal(str(base)) + Decimal(str(bonus_max)) * leader.score.correct / leader.score.max_items
    amount = amount.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return {m.id: amount for m in group.canonical_members}


__all__ = [
    "DEFAULT_ROSTER",
    "ElectionError",
    "MissingResponse",
    "ReplayResponder",
    "Responder",
    "SessionError",
    "StageContext",
    "assign_pseudonyms",
    "payout_preview",
    "replay_cohort",
    "run_session",
    "score_task",
    "stored_election_matches",
    "stratify_groups",
]
