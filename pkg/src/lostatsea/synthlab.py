"""Synthetic cohorts with tunable gender effects, and brute-force oracles.

``generate_cohort`` models the identified-condition pattern: male members may
self-nominate higher (``male_nomination_shift``) while task scores are drawn
independently of gender unless ``score_gender_shift`` says otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Iterable, Sequence

from .election import Ballot, CandidateSet, select_candidates
from .models import (
    PLACEHOLDER_MARKER,
    Cohort,
    GroupRecord,
    IdentityProfile,
    ParticipantRecord,
    Population,
    SurveyResponses,
    TaskKey,
    TranscriptMessage,
    Treatment,
    default_task_key,
)
from .protocol import DEFAULT_ROSTER, ReplayResponder, assign_pseudonyms, run_session
from .seeding import derive_seed, rng_for

_MALE_NAMES = ("Adam", "Ben", "Carl", "Dev", "Eli", "Finn", "Gus", "Hugo", "Ivan", "Jon")
_OTHER_NAMES = ("Ada", "Bea", "Cleo", "Dana", "Eve", "Fay", "Gia", "Hana", "Ivy", "Jo")
_NON_MALE_PRONOUNS = ("she/her", "she/her", "she/her", "they/them")
_AVATARS = ("anchor", "compass", "sail", "lighthouse", "wave", "shell", "kite", "lantern")


@dataclass(frozen=True)
class SynthConfig:
    n_groups: int
    max_items: int = 6
    nomination_base: float = 5.5
    male_nomination_shift: float = 0.0
    score_gender_shift: float = 0.0
    noise_spread: float = 2.5
    seed: int = 0
    treatment: Treatment = Treatment.IDENTIFIED
    score_base: float | None = None
    ballot_noise: float = 1.0

    def __post_init__(self):
        if self.n_groups < 1:
            raise ValueError("n_groups must be at least 1")
        if self.max_items < 1:
            raise ValueError("max_items must be at least 1")
        if self.noise_spread < 0 or self.ballot_noise < 0:
            raise ValueError("spreads must be non-negative")
        if Treatment(self.treatment) is Treatment.NO_DEMOGRAPHICS:
            raise ValueError("synthetic cohorts stand in for human data; use identified or pseudonymous")
        object.__setattr__(self, "treatment", Treatment(self.treatment))


def _clip(x: float, lo: float, hi: float) -> tuple[float, bool]:
    if x < lo:
        return lo, True
    if x > hi:
        return hi, True
    return x, False


def _make_group(cfg: SynthConfig, index: int, key: TaskKey) -> tuple[GroupRecord, int]:
    gid = f"syn{index:04d}"
    rng = rng_for(cfg.seed, "synth", gid)
    score_base = cfg.max_items / 2 if cfg.score_base is None else cfg.score_base
    score_noise = cfg.noise_spread * cfg.max_items / 10
    clipped = 0
    members = []
    for k in range(4):
        male = k < 2
        w_raw = cfg.nomination_base + (cfg.male_nomination_shift if male else 0.0) + rng.gauss(0, cfg.noise_spread)
        w, was_clipped = _clip(round(w_raw, 2), 0.0, 10.0)
        clipped += was_clipped
        s_raw = score_base + (cfg.score_gender_shift if male else 0.0) + rng.gauss(0, score_noise)
        score = int(_clip(round(s_raw), 0, cfg.max_items)[0])
        right = set(rng.sample(range(cfg.max_items), score))
        answers = {}
        for i, item in enumerate(key.items):
            wrong = [o for o in (item.options or ("A", "B")) if o != item.answer] or ["?"]
            answers[item.id] = item.answer if i in right else rng.choice(wrong)
        name = rng.choice(_MALE_NAMES if male else _OTHER_NAMES) + f"{index}{k}"
        members.append(
            ParticipantRecord(
                id=f"{gid}-p{k + 1}",
                profile=IdentityProfile(
                    display_name=name,
                    avatar=rng.choice(_AVATARS),
                    pronouns="he/him" if male else rng.choice(_NON_MALE_PRONOUNS),
                ),
                survey=SurveyResponses(
                    survival_experience="",
                    leadership_experience="",
                    risk_willingness=rng.randint(0, 10),
                    gender_task_belief=rng.randint(1, 10),
                    gender_leader_belief=rng.randint(1, 10),
                ),
                nomination=w,
                task_answers=answers,
            )
        )
    group = GroupRecord(gid, cfg.treatment, tuple(members))
    if cfg.treatment.uses_pseudonyms:
        group = assign_pseudonyms(group, DEFAULT_ROSTER, cfg.seed)
    transcript = tuple(
        TranscriptMessage(m.visible_name(cfg.treatment), turn, f"{PLACEHOLDER_MARKER} turn {turn}")
        for turn, m in enumerate(group.canonical_members * 2)
    )

    # Ballots: voters rank candidates by a noisy read of their stated willingness.
    noms = [m.self_nomination() for m in group.members]
    cands = select_candidates(noms, derive_seed(cfg.seed, gid, "candidates"))
    w = {m.id: m.nomination for m in group.members}
    voted = []
    for m in group.canonical_members:
        perceived = {c: w[c] + rng.gauss(0, cfg.ballot_noise) for c in cands.members}
        voted.append(replace(m, ballot=tuple(sorted(cands.members, key=lambda c: (-perceived[c], c)))))
    group = replace(group, members=tuple(voted), transcript=transcript)
    done = run_session(group, ReplayResponder(), cfg.seed, key)
    return done, clipped


def generate_cohort(config: SynthConfig, key: TaskKey | None = None) -> Cohort:
    key = key or default_task_key(config.max_items)
    if key.max_items != config.max_items:
        raise ValueError("task key size does not match max_items")
    groups = []
    clipped = 0
    for i in range(config.n_groups):
        g, c = _make_group(config, i, key)
        groups.append(g)
        clipped += c
    metadata = {
        "synth_config": {
            "n_groups": config.n_groups,
            "max_items": config.max_items,
            "nomination_base": config.nomination_base,
            "male_nomination_shift": config.male_nomination_shift,
            "score_gender_shift": config.score_gender_shift,
            "noise_spread": config.noise_spread,
            "seed": config.seed,
            "treatment": config.treatment.value,
            "score_base": config.score_base,
            "ballot_noise": config.ballot_noise,
        },
        "clipped_nominations": clipped,
    }
    return Cohort(tuple(groups), Population.SYNTHETIC, metadata=metadata)


def _rankings(ballots: Iterable) -> list[tuple[str, ...]]:
    return [tuple(b.ranking) if isinstance(b, Ballot) else tuple(b) for b in ballots]


def election_oracle(ballots: Iterable, candidates: CandidateSet | Sequence[str]) -> frozenset[str]:
    """Strict Condorcet winner if there is one, else every Borda-maximal candidate."""
    cands = list(candidates.members if isinstance(candidates, CandidateSet) else candidates)
    rankings = _rankings(ballots)
    for r in rankings:
        if sorted(r) != sorted(cands):
            raise ValueError(f"malformed ballot {r} for candidates {cands}")
    pos = [{c: r.index(c) for c in r} for r in rankings]

    def beats(x: str, y: str) -> bool:
        wins = sum(1 for p in pos if p[x] < p[y])
        losses = sum(1 for p in pos if p[y] < p[x])
        return wins > losses

    for x in cands:
        if all(beats(x, y) for y in cands if y != x):
            return frozenset([x])
    points = {c: sum(len(cands) - 1 - p[c] for p in pos) for c in cands}
    best = max(points.values())
    return frozenset(c for c in cands if points[c] == best)


@lru_cache(maxsize=64)
def _binomial_pmf(n: int, p: Fraction) -> tuple[Fraction, ...]:
    q = 1 - p
    return tuple(comb(n, i) * p**i * q ** (n - i) for i in range(n + 1))


def exact_binomial_oracle(k: int, n: int, p0: float, alternative: str = "two_sided") -> float:
    """Binomial p-value by exact rational summation of the probability mass."""
    if n < 0 or n > 10_000 or not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n <= 10000 (k={k}, n={n})")
    if not 0 < p0 < 1:
        raise ValueError("p0 must lie strictly between 0 and 1")
    pmf = _binomial_pmf(n, Fraction(p0))
    if alternative == "greater":
        total = sum(pmf[k:])
    elif alternative == "less":
        total = sum(pmf[: k + 1])
    elif alternative == "two_sided":
        total = sum(x for x in pmf if x <= pmf[k])
    else:
        raise ValueError(f"unknown alternative {alternative!r}")
    return float(min(Fraction(1), total))
