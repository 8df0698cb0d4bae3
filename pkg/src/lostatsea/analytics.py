"""Cohort-level measurements: alignment with human elections, optimal-leader
gap decomposition, self-nomination and task-score gender gaps, and the gender
composition of optimal members, candidates and elected leaders."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .models import Cohort, Gender, GroupRecord, ParticipantRecord
from .stats import StatsError, TestResult, binomial_test_exact, chi_square_test, welch_t_test

ALIGNMENT_BASELINE = 0.25
SIGNIFICANCE = 0.01


class AnalyticsError(ValueError):
    pass


def cohort_label(cohort: Cohort) -> str:
    t = cohort.treatment
    parts = [cohort.population.value, t.value if t else "mixed"]
    model = cohort.metadata.get("provider_model")
    if model:
        parts.append(str(model))
    return ":".join(parts)


def _require_complete(cohort: Cohort) -> None:
    incomplete = [g.group_id for g in cohort.groups if not g.is_complete]
    if incomplete:
        raise AnalyticsError(f"incomplete groups present: {incomplete[:5]}{'...' if len(incomplete) > 5 else ''}")


def compare_means(a: Sequence[float], b: Sequence[float], alternative: str = "two_sided") -> TestResult:
    """Welch's test, with the zero-variance case settled directly.

    Two constant samples cannot be fed to the t statistic; equal constants
    give p = 1 and different constants p = 0.
    """
    try:
        return welch_t_test(a, b, alternative)
    except StatsError:
        if len(a) >= 2 and len(b) >= 2 and statistics.pvariance(a) == 0 and statistics.pvariance(b) == 0:
            same = a[0] == b[0]
            stat = 0.0 if same else (float("inf") if a[0] > b[0] else float("-inf"))
            return TestResult(stat, 1.0 if same else 0.0, "welch_t", alternative, None)
        raise


# --- alignment ---------------------------------------------------------------


@dataclass(frozen=True)
class AlignmentReport:
    label: str
    n_groups: int
    exact_matches: int
    gender_matches: int
    baseline: float = ALIGNMENT_BASELINE
    exact_test: TestResult | None = None
    stratified: tuple["AlignmentReport", ...] = ()

    def __post_init__(self):
        if not self.exact_matches <= self.gender_matches <= self.n_groups:
            raise AnalyticsError("alignment counts must satisfy exact <= gender <= n")

    @property
    def exact_rate(self) -> float:
        return self.exact_matches / self.n_groups if self.n_groups else 0.0

    @property
    def gender_rate(self) -> float:
        return self.gender_matches / self.n_groups if self.n_groups else 0.0

    def stratum(self, label: str) -> "AlignmentReport":
        for s in self.stratified:
            if s.label == label:
                return s
        raise KeyError(label)


def _alignment_counts(pairs: Sequence[tuple[GroupRecord, GroupRecord]]) -> tuple[int, int]:
    exact = gender = 0
    for h, s in pairs:
        he, se = h.election.elected, s.election.elected
        exact += he == se
        gender += h.gender_of(he) is s.gender_of(se)
    return exact, gender


def _alignment(label, pairs, baseline, alternative, stratified=()) -> AlignmentReport:
    exact, gender = _alignment_counts(pairs)
    n = len(pairs)
    test = binomial_test_exact(exact, n, baseline, alternative) if n else None
    return AlignmentReport(label, n, exact, gender, baseline, test, tuple(stratified))


def alignment_report(
    human: Cohort,
    simulated: Cohort,
    baseline: float = ALIGNMENT_BASELINE,
    alternative: str = "greater",
) -> AlignmentReport:
    """Share of matched groups whose simulated election picks the human leader.

    Also reports gender matches and splits by the gender of the human-elected
    leader. ``exact_test`` is an exact binomial test against ``baseline``.
    """
    hmap = human.by_id()
    unmatched = [g.group_id for g in simulated.groups if g.group_id not in hmap]
    if unmatched:
        raise AnalyticsError(f"simulated groups without a human counterpart: {unmatched[:5]}")
    pairs = []
    for s in simulated.groups:
        h = hmap[s.group_id]
        if set(h.member_ids) != set(s.member_ids):
            raise AnalyticsError(f"group {s.group_id}: member ids differ between cohorts")
        if h.election is None or s.election is None:
            raise AnalyticsError(f"group {s.group_id}: missing election result")
        pairs.append((h, s))
    strata = []
    for gender in Gender:
        sub = [(h, s) for h, s in pairs if h.gender_of(h.election.elected) is gender]
        strata.append(_alignment(f"human_leader_{gender.value}", sub, baseline, alternative))
    return _alignment(cohort_label(simulated), pairs, baseline, alternative, strata)


# --- optimal leader gap --------------------------------------------------------


@dataclass(frozen=True)
class GapRow:
    condition: str
    n_groups: int
    delta_self: float
    delta_peer: float
    delta_total: float
    tests: dict = field(default_factory=dict, compare=False)


def _gap_series(cohort: Cohort) -> dict[str, list[float]]:
    return {
        "delta_self": [g.gap.normalized_self for g in cohort.groups],
        "delta_peer": [g.gap.normalized_peer for g in cohort.groups],
        "delta_total": [g.gap.normalized_total for g in cohort.groups],
    }


def gap_table(cohort: Cohort, reference: Cohort | None = None, label: str | None = None) -> GapRow:
    """Mean normalized self-exclusion, peer-exclusion and total gaps.

    With ``reference`` each component is compared to it by Welch's test.
    """
    _require_complete(cohort)
    if not cohort.groups:
        raise AnalyticsError("empty cohort")
    series = _gap_series(cohort)
    tests = {}
    if reference is not None:
        _require_complete(reference)
        ref = _gap_series(reference)
        for name in series:
            try:
                tests[name] = compare_means(series[name], ref[name])
            except StatsError:
                pass
    return GapRow(
        label or cohort_label(cohort),
        len(cohort.groups),
        statistics.fmean(series["delta_self"]),
        statistics.fmean(series["delta_peer"]),
        statistics.fmean(series["delta_total"]),
        tests,
    )


# --- gender split of individual measures -----------------------------------------


@dataclass(frozen=True)
class GenderGapRow:
    condition: str
    measure: str
    n_male: int
    n_non_male: int
    mean_male: float
    mean_non_male: float
    sd_male: float
    sd_non_male: float
    test: TestResult | None

    @property
    def gap(self) -> float:
        return self.mean_male - self.mean_non_male


def _gender_gap(cohort: Cohort, measure: str, value: Callable[[ParticipantRecord], float | None], label):
    male, other = [], []
    for g in cohort.groups:
        for m in g.members:
            v = value(m)
            if v is None:
                continue
            (male if m.gender is Gender.MALE else other).append(float(v))
    if not male or not other:
        raise AnalyticsError(f"{measure}: need values for both gender categories")
    test = None
    if len(male) >= 2 and len(other) >= 2:
        test = compare_means(male, other)
    sd = lambda xs: statistics.stdev(xs) if len(xs) > 1 else 0.0  # noqa: E731
    return GenderGapRow(
        label or cohort_label(cohort),
        measure,
        len(male),
        len(other),
        statistics.fmean(male),
        statistics.fmean(other),
        sd(male),
        sd(other),
        test,
    )


def nomination_table(cohort: Cohort, label: str | None = None) -> GenderGapRow:
    """Self-nomination mean and spread by gender with Welch's test."""
    return _gender_gap(cohort, "self_nomination", lambda m: m.nomination, label)


def score_table(cohort: Cohort, label: str | None = None) -> GenderGapRow:
    return _gender_gap(cohort, "task_score", lambda m: m.score.correct if m.score else None, label)


# --- stage ratios ------------------------------------------------------------------


@dataclass(frozen=True)
class StageRatioRow:
    condition: str
    stage: str
    n_groups: int
    mixed: int
    male_only: int
    non_male_only: int
    male_test: TestResult | None = None

    @property
    def single_gender(self) -> int:
        return self.male_only + self.non_male_only

    @property
    def mixed_fraction(self) -> float:
        return self.mixed / self.n_groups

    @property
    def male_fraction(self) -> float | None:
        """Male-only share among single-gender cases; None when there are none."""
        return self.male_only / self.single_gender if self.single_gender else None


def _composition(genders_per_group: Sequence[set[Gender]]) -> tuple[int, int, int]:
    mixed = sum(1 for gs in genders_per_group if len(gs) > 1)
    male = sum(1 for gs in genders_per_group if gs == {Gender.MALE})
    return mixed, male, len(genders_per_group) - mixed - male


def stage_ratio_table(cohort: Cohort, label: str | None = None) -> list[StageRatioRow]:
    """Gender composition of the optimal set, candidate set and elected leader.

    Raw counts are kept so either the fraction or the ``male:single`` ratio
    can be reported. ``male_test`` is a one-sided exact binomial test of the
    male-only share against 0.5.
    """
    _require_complete(cohort)
    label = label or cohort_label(cohort)
    stages = {
        "optimal": [{g.gender_of(p) for p in g.gap.optimal_set} for g in cohort.groups],
        "candidates": [{g.gender_of(p) for p in g.election.candidates} for g in cohort.groups],
        "elected": [{g.gender_of(g.election.elected)} for g in cohort.groups],
    }
    rows = []
    for stage, comps in stages.items():
        mixed, male, other = _composition(comps)
        single = male + other
        test = binomial_test_exact(male, single, 0.5, "greater") if single else None
        rows.append(StageRatioRow(label, stage, len(comps), mixed, male, other, test))
    return rows


# --- covariate balance ------------------------------------------------------------


def member_attribute(m: ParticipantRecord, attribute: str):
    if attribute == "gender":
        return m.gender.value
    if attribute == "pronouns":
        return m.profile.pronouns
    return m.extra.get(attribute)


def covariate_balance(a: Cohort, b: Cohort, attribute: str, correction: bool = False) -> TestResult:
    """Chi-square test that ``attribute`` is distributed alike in two cohorts."""
    values_a = [member_attribute(m, attribute) for g in a.groups for m in g.members]
    values_b = [member_attribute(m, attribute) for g in b.groups for m in g.members]
    cats = sorted({str(v) for v in values_a + values_b if v is not None})
    table = [
        [sum(1 for v in values_a if str(v) == c) for c in cats],
        [sum(1 for v in values_b if str(v) == c) for c in cats],
    ]
    return chi_square_test(table, correction)


# --- bundles -------------------------------------------------------------------------


@dataclass(frozen=True)
class CohortTables:
    gap_rows: tuple[GapRow, ...]
    nomination_rows: tuple[GenderGapRow, ...]
    score_rows: tuple[GenderGapRow, ...]
    stage_ratio_rows: tuple[StageRatioRow, ...]
    alignment: tuple[AlignmentReport, ...] = ()


def compute_tables(
    human: Cohort | None,
    simulated: Sequence[Cohort] = (),
    baseline: float = ALIGNMENT_BASELINE,
) -> CohortTables:
    """Every table for a human cohort and any number of matched simulations."""
    cohorts = ([human] if human is not None else []) + list(simulated)
    gap_rows, nom_rows, score_rows, ratio_rows = [], [], [], []
    for c in cohorts:
        ref = human if (human is not None and c is not human) else None
        gap_rows.append(gap_table(c, ref))
        nom_rows.append(nomination_table(c))
        score_rows.append(score_table(c))
        ratio_rows.extend(stage_ratio_table(c))
    alignment = tuple(alignment_report(human, s, baseline) for s in simulated) if human is not None else ()
    return CohortTables(tuple(gap_rows), tuple(nom_rows), tuple(score_rows), tuple(ratio_rows), alignment)
