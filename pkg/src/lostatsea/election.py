"""Candidate selection, ranked-choice resolution and optimal-leader gaps.

Everything here is pure: inputs are validated, outputs are frozen values, and
any randomness comes from an explicit integer seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations
from typing import Iterable, Mapping, Sequence

from .seeding import rng_for

GROUP_SIZE = 4
W_MIN, W_MAX = 0.0, 10.0

CONDORCET = "condorcet"
BORDA = "borda"
HIGHEST_W = "highest_W"
SEEDED_DRAW = "seeded_draw"


class ElectionError(ValueError):
    """Invalid election input (bad member count, range, or malformed ballot)."""


@dataclass(frozen=True)
class SelfNomination:
    participant: str
    score: float

    def __post_init__(self):
        if not self.participant:
            raise ElectionError("participant id must be non-empty")
        s = float(self.score)
        if math.isnan(s) or not W_MIN <= s <= W_MAX:
            raise ElectionError(
                f"self-nomination for {self.participant!r} out of range [0, 10]: {self.score!r}"
            )
        object.__setattr__(self, "score", s)


@dataclass(frozen=True)
class TaskScore:
    participant: str
    correct: int
    max_items: int

    def __post_init__(self):
        if isinstance(self.correct, bool) or int(self.correct) != self.correct:
            raise ElectionError(f"task score for {self.participant!r} must be an integer")
        if self.max_items < 1:
            raise ElectionError("max_items must be positive")
        if not 0 <= self.correct <= self.max_items:
            raise ElectionError(
                f"task score for {self.participant!r} out of range [0, {self.max_items}]: {self.correct}"
            )


@dataclass(frozen=True)
class SelectionTrace:
    """How the candidate set was formed.

    ``rule`` is ``"strict"`` when the top two W values were unambiguous,
    ``"seeded_draw"`` when a tie at the cutoff was broken by the seeded draw,
    and ``"expanded"`` when the tie was kept and the set grew past two.
    """

    scores: tuple[tuple[str, float], ...]
    cutoff: float
    rule: str = "strict"
    tied: tuple[str, ...] = ()
    drawn: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "scores": {pid: w for pid, w in self.scores},
            "cutoff": self.cutoff,
            "rule": self.rule,
            "tied": list(self.tied),
            "drawn": list(self.drawn),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SelectionTrace":
        return cls(
            scores=tuple(sorted((str(k), float(v)) for k, v in d["scores"].items())),
            cutoff=float(d["cutoff"]),
            rule=d.get("rule", "strict"),
            tied=tuple(d.get("tied", ())),
            drawn=tuple(d.get("drawn", ())),
        )


@dataclass(frozen=True)
class CandidateSet:
    members: tuple[str, ...]
    trace: SelectionTrace | None = None

    def __post_init__(self):
        members = tuple(self.members)
        object.__setattr__(self, "members", members)
        if len(members) < 2:
            raise ElectionError("a candidate set needs at least two members")
        if len(set(members)) != len(members):
            raise ElectionError(f"duplicate candidates: {members}")
        if self.trace is not None and self.trace.rule != "expanded" and len(members) != 2:
            raise ElectionError("only a tie-expanded candidate set may exceed two members")

    @classmethod
    def of(cls, *members: str) -> "CandidateSet":
        return cls(tuple(members))

    def __contains__(self, pid: object) -> bool:
        return pid in self.members

    def __iter__(self):
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def to_dict(self) -> dict:
        out: dict = {"members": list(self.members)}
        if self.trace is not None:
            out["selection_trace"] = self.trace.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "CandidateSet":
        trace = d.get("selection_trace")
        return cls(
            tuple(d["members"]),
            SelectionTrace.from_dict(trace) if trace is not None else None,
        )


@dataclass(frozen=True)
class Ballot:
    voter: str
    ranking: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "ranking", tuple(self.ranking))


@dataclass(frozen=True)
class ElectionOutcome:
    candidates: CandidateSet
    pairwise: Mapping[tuple[str, str], int]
    borda: Mapping[str, int]
    elected: str
    tiebreak_trace: tuple[str, ...]

    @property
    def decided_by(self) -> str:
        return self.tiebreak_trace[-1]

    def to_dict(self) -> dict:
        cands = self.candidates.members
        return {
            "candidates": self.candidates.to_dict(),
            "pairwise": {x: {y: self.pairwise[x, y] for y in cands if y != x} for x in cands},
            "borda": {c: self.borda[c] for c in cands},
            "elected": self.elected,
            "tiebreak_trace": list(self.tiebreak_trace),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ElectionOutcome":
        cands = CandidateSet.from_dict(d["candidates"])
        pairwise = {(x, y): int(n) for x, row in d["pairwise"].items() for y, n in row.items()}
        return cls(
            candidates=cands,
            pairwise=pairwise,
            borda={k: int(v) for k, v in d["borda"].items()},
            elected=d["elected"],
            tiebreak_trace=tuple(d["tiebreak_trace"]),
        )


@dataclass(frozen=True)
class GapReport:
    group: str
    optimal_set: frozenset[str]
    delta_total: int
    delta_self: int
    delta_peer: int
    max_items: int = field(default=1)

    @property
    def normalized_total(self) -> float:
        return self.delta_total / self.max_items

    @property
    def normalized_self(self) -> float:
        return self.delta_self / self.max_items

    @property
    def normalized_peer(self) -> float:
        return self.delta_peer / self.max_items

    def to_dict(self) -> dict:
        return {
            "optimal_set": sorted(self.optimal_set),
            "delta_total": self.delta_total,
            "delta_self": self.delta_self,
            "delta_peer": self.delta_peer,
            "max_items": self.max_items,
            "normalized_total": self.normalized_total,
            "normalized_self": self.normalized_self,
            "normalized_peer": self.normalized_peer,
        }

    @classmethod
    def from_dict(cls, d: Mapping, group: str = "") -> "GapReport":
        return cls(
            group=group,
            optimal_set=frozenset(d["optimal_set"]),
            delta_total=int(d["delta_total"]),
            delta_self=int(d["delta_self"]),
            delta_peer=int(d["delta_peer"]),
            max_items=int(d["max_items"]),
        )


def _check_group_ids(ids: Sequence[str], what: str) -> None:
    if len(ids) != GROUP_SIZE:
        raise ElectionError(f"expected {GROUP_SIZE} {what}, got {len(ids)}")
    if len(set(ids)) != len(ids):
        raise ElectionError(f"duplicate participants among {what}: {list(ids)}")


def select_candidates(
    nominations: Sequence[SelfNomination], seed: int, on_tie: str = "draw"
) -> CandidateSet:
    """Top-two self-nomination scores form the candidate set.

    A tie at the cutoff is broken by a seeded draw over the tied members
    (``on_tie="draw"``), or kept whole with ``on_tie="expand"``.
    """
    _check_group_ids([n.participant for n in nominations], "nominations")
    if on_tie not in ("draw", "expand"):
        raise ValueError(f"unknown tie policy {on_tie!r}")
    ordered = sorted(nominations, key=lambda n: (-n.score, n.participant))
    cutoff = ordered[1].score
    above = [n.participant for n in ordered if n.score > cutoff]
    at_cutoff = sorted(n.participant for n in ordered if n.score == cutoff)
    slots = 2 - len(above)
    scores = tuple(sorted((n.participant, n.score) for n in nominations))

    if len(at_cutoff) == slots:
        return CandidateSet(tuple(above + at_cutoff), SelectionTrace(scores, cutoff))
    if on_tie == "expand":
        trace = SelectionTrace(scores, cutoff, "expanded", tuple(at_cutoff))
        return CandidateSet(tuple(above + at_cutoff), trace)
    drawn = tuple(rng_for(seed, "select_candidates").sample(at_cutoff, slots))
    trace = SelectionTrace(scores, cutoff, SEEDED_DRAW, tuple(at_cutoff), drawn)
    return CandidateSet(tuple(above) + drawn, trace)


def check_ballot(ballot: Ballot, candidates: CandidateSet) -> None:
    ranking = ballot.ranking
    if len(set(ranking)) != len(ranking):
        raise ElectionError(f"ballot of {ballot.voter!r} ranks a candidate twice: {list(ranking)}")
    if set(ranking) != set(candidates.members):
        missing = sorted(set(candidates.members) - set(ranking))
        extra = sorted(set(ranking) - set(candidates.members))
        raise ElectionError(
            f"ballot of {ballot.voter!r} is not a full ranking of the candidates "
            f"(missing={missing}, unknown={extra})"
        )


def pairwise_matrix(
    ballots: Iterable[Ballot], candidates: CandidateSet
) -> dict[tuple[str, str], int]:
    """Head-to-head counts: entry ``(x, y)`` is the number of ballots ranking x above y."""
    cands = candidates.members
    counts = {(x, y): 0 for x in cands for y in cands if x != y}
    for ballot in ballots:
        check_ballot(ballot, candidates)
        for i, x in enumerate(ballot.ranking):
            for y in ballot.ranking[i + 1 :]:
                counts[x, y] += 1
    return counts


def borda_scores(ballots: Iterable[Ballot], candidates: CandidateSet) -> dict[str, int]:
    c = len(candidates)
    totals = {m: 0 for m in candidates.members}
    for ballot in ballots:
        check_ballot(ballot, candidates)
        for pos, m in enumerate(ballot.ranking):
            totals[m] += c - 1 - pos
    return totals


def condorcet_winner(
    pairwise: Mapping[tuple[str, str], int], candidates: CandidateSet
) -> str | None:
    for x in candidates.members:
        if all(pairwise[x, y] > pairwise[y, x] for y in candidates.members if y != x):
            return x
    return None


def resolve_election(
    ballots: Sequence[Ballot],
    candidates: CandidateSet,
    nominations: Sequence[SelfNomination],
    seed: int,
) -> ElectionOutcome:
    """Condorcet winner, else Borda, else highest W, else a seeded draw."""
    _check_group_ids([b.voter for b in ballots], "ballots")
    w = {n.participant: n.score for n in nominations}
    missing = [c for c in candidates.members if c not in w]
    if missing:
        raise ElectionError(f"no self-nomination for candidates {missing}")

    pairwise = pairwise_matrix(ballots, candidates)
    borda = borda_scores(ballots, candidates)
    trace = [CONDORCET]
    winner = condorcet_winner(pairwise, candidates)
    if winner is None:
        trace.append(BORDA)
        top = max(borda.values())
        tied = sorted(c for c in candidates.members if borda[c] == top)
        if len(tied) > 1:
            trace.append(HIGHEST_W)
            top_w = max(w[c] for c in tied)
            tied = [c for c in tied if w[c] == top_w]
            if len(tied) > 1:
                trace.append(SEEDED_DRAW)
                tied = [rng_for(seed, "resolve_election").choice(tied)]
        winner = tied[0]
    return ElectionOutcome(candidates, pairwise, borda, winner, tuple(trace))


def _score_map(scores: Sequence[TaskScore]) -> dict[str, int]:
    _check_group_ids([s.participant for s in scores], "task scores")
    return {s.participant: s.correct for s in scores}


def optimal_leaders(
    scores: Sequence[TaskScore], members: Iterable[str] | None = None
) -> frozenset[str]:
    """Every member attaining the top task score."""
    by_id = _score_map(scores)
    if members is not None:
        missing = sorted(set(members) - set(by_id))
        if missing:
            raise ElectionError(f"missing task scores for {missing}")
    best = max(by_id.values())
    return frozenset(pid for pid, s in by_id.items() if s == best)


def leader_gap(
    scores: Sequence[TaskScore],
    candidates: CandidateSet,
    elected: str,
    max_items: int,
    group: str = "",
) -> GapReport:
    if elected not in candidates:
        raise ElectionError(f"elected {elected!r} is not among candidates {list(candidates)}")
    by_id = _score_map(scores)
    missing = [c for c in candidates.members if c not in by_id]
    if missing:
        raise ElectionError(f"missing task scores for candidates {missing}")
    if max_items < 1:
        raise ElectionError("max_items must be positive")

    optimal = optimal_leaders(scores)
    total = max(by_id.values()) - by_id[elected]
    self_gap = peer_gap = 0
    if total > 0:
        if optimal.isdisjoint(candidates.members):
            self_gap = total
        else:
            peer_gap = total
    return GapReport(group, optimal, total, self_gap, peer_gap, max_items)


def all_ballot_profiles(candidates: Sequence[str], voters: Sequence[str]):
    """Every assignment of a full ranking to each voter (``(C!)**V`` profiles)."""
    rankings = list(permutations(candidates))

    def rec(i: int, acc: list[Ballot]):
        if i == len(voters):
            yield tuple(acc)
            return
        for r in rankings:
            acc.append(Ballot(voters[i], r))
            yield from rec(i + 1, acc)
            acc.pop()

    yield from rec(0, [])
