import statistics
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lostatsea.agents import ProviderConfig, run_agent_cohort
from lostatsea.analytics import (
    AlignmentReport,
    AnalyticsError,
    alignment_report,
    compute_tables,
    covariate_balance,
    gap_table,
    nomination_table,
    score_table,
    stage_ratio_table,
)
from lostatsea.election import Ballot, GapReport, SelfNomination, leader_gap, resolve_election
from lostatsea.models import Cohort, Gender, Population, Treatment
from lostatsea.report import emit_report
from lostatsea.seeding import rng_for
from lostatsea.synthlab import SynthConfig, generate_cohort


def synth(n=20, seed=0, **kw):
    return generate_cohort(SynthConfig(n_groups=n, seed=seed, **kw))


def with_elected(cohort, pick, population=Population.SIMULATED):
    groups = tuple(replace(g, election=replace(g.election, elected=pick(g))) for g in cohort.groups)
    return replace(cohort, groups=groups, population=population)


# --- alignment --------------------------------------------------------------------------------


def test_alignment_identity():
    h = synth(30)
    rep = alignment_report(h, with_elected(h, lambda g: g.election.elected))
    assert rep.exact_rate == 1.0 and rep.gender_rate == 1.0
    assert rep.n_groups == 30
    total = sum(s.n_groups for s in rep.stratified)
    assert total == 30


def test_alignment_same_gender_other_member():
    h = synth(30)

    def other_same_gender(g):
        leader = g.election.elected
        return next(m.id for m in g.members if m.id != leader and m.gender is g.gender_of(leader))

    rep = alignment_report(h, with_elected(h, other_same_gender))
    assert rep.exact_rate == 0.0 and rep.gender_rate == 1.0


def test_alignment_random_elector():
    h = synth(1000, seed=4)
    rng = rng_for(99, "random-elector")
    rep = alignment_report(h, with_elected(h, lambda g: rng.choice(g.member_ids)))
    assert abs(rep.exact_rate - 0.25) <= 3 * (0.25 * 0.75 / 1000) ** 0.5
    assert not rep.exact_test.significant(0.01)


def test_alignment_stratification():
    h = synth(40)
    rep = alignment_report(h, with_elected(h, lambda g: g.election.elected))
    male = rep.stratum("human_leader_male")
    other = rep.stratum("human_leader_non_male")
    expect_male = sum(g.gender_of(g.election.elected) is Gender.MALE for g in h.groups)
    assert male.n_groups == expect_male
    assert other.n_groups == 40 - expect_male


def test_alignment_errors():
    h = synth(3)
    foreign = replace(synth(1, seed=1), groups=(replace(synth(1, seed=1).groups[0], group_id="zzz"),))
    with pytest.raises(AnalyticsError):
        alignment_report(h, foreign)
    with pytest.raises(AnalyticsError):
        AlignmentReport("x", 4, exact_matches=3, gender_matches=2)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 1000))
def test_exact_never_exceeds_gender(seed):
    h = synth(8, seed=seed)
    rng = rng_for(seed, "pick")
    rep = alignment_report(h, with_elected(h, lambda g: rng.choice(g.member_ids)))
    assert rep.exact_matches <= rep.gender_matches <= rep.n_groups
    for s in rep.stratified:
        assert s.exact_matches <= s.gender_matches <= s.n_groups


# --- gap table -------------------------------------------------------------------------------------------


def with_gaps(cohort, gaps):
    groups = []
    for g, (total, self_gap, peer_gap, optimal) in zip(cohort.groups, gaps):
        ids = g.canonical_members
        opt = frozenset(ids[i].id for i in optimal)
        groups.append(replace(g, gap=GapReport(g.group_id, opt, total, self_gap, peer_gap, 6)))
    return replace(cohort, groups=tuple(groups))


def test_gap_table_toy_mean():
    c = with_gaps(synth(2), [(3, 3, 0, [0]), (0, 0, 0, [0])])
    row = gap_table(c)
    assert row.delta_total == pytest.approx(0.25)
    assert row.delta_self == pytest.approx(0.25)
    assert row.delta_peer == 0


def test_gap_table_all_optimal():
    c = with_gaps(synth(5), [(0, 0, 0, [0])] * 5)
    row = gap_table(c)
    assert (row.delta_self, row.delta_peer, row.delta_total) == (0, 0, 0)


def test_gap_table_matches_recomputation_from_raw():
    c = synth(60, seed=8)
    totals = []
    for g in c.groups:
        noms = [SelfNomination(m.id, m.nomination) for m in g.members]
        out = resolve_election([Ballot(m.id, m.ballot) for m in g.members], g.election.candidates, noms, 0)
        gap = leader_gap([m.score for m in g.members], g.election.candidates, out.elected, 6)
        totals.append(gap.normalized_total)
    assert gap_table(c).delta_total == pytest.approx(statistics.fmean(totals))


def test_gap_table_rejects_incomplete():
    c = synth(2)
    broken = replace(c, groups=(replace(c.groups[0], gap=None),) + c.groups[1:])
    with pytest.raises(AnalyticsError):
        gap_table(broken)


def test_gap_table_reference_tests():
    h, s = synth(30, seed=1), synth(30, seed=2)
    row = gap_table(s, reference=h)
    assert set(row.tests) == {"delta_self", "delta_peer", "delta_total"}
    assert all(0 <= t.p_value <= 1 for t in row.tests.values())


# --- nomination and score tables -------------------------------------------------------------------------------


def test_nomination_all_equal():
    c = synth(10, noise_spread=0)
    row = nomination_table(c)
    assert row.gap == 0
    assert row.test.p_value == 1.0


def test_nomination_gap_recovers_injected_shift():
    gaps = []
    for seed in range(8):
        row = nomination_table(synth(175, seed=seed, male_nomination_shift=1.2))
        assert row.n_male == row.n_non_male == 350
        assert row.test.p_value < 0.01
        gaps.append(row.gap)
    assert statistics.fmean(gaps) == pytest.approx(1.2, abs=0.2)


def test_score_table_null():
    row = score_table(synth(88, seed=3))
    assert row.measure == "task_score"
    assert row.test is not None


# --- stage ratios ------------------------------------------------------------------------------------------------


def test_stage_ratio_single_male_optimal():
    c = synth(6)
    male_idx = [[i for i, m in enumerate(g.canonical_members) if m.gender is Gender.MALE][0] for g in c.groups]
    c = with_gaps(c, [(0, 0, 0, [i]) for i in male_idx])
    optimal = [r for r in stage_ratio_table(c) if r.stage == "optimal"][0]
    assert optimal.male_fraction == 1.0
    assert optimal.mixed_fraction == 0.0


def test_stage_ratio_all_tied_scores_are_mixed():
    c = synth(10, noise_spread=0)
    optimal = [r for r in stage_ratio_table(c) if r.stage == "optimal"][0]
    assert optimal.mixed_fraction == 1.0
    assert optimal.male_fraction is None


def test_stage_ratio_counts_consistent():
    c = synth(50, seed=5, male_nomination_shift=1.5)
    rows = stage_ratio_table(c)
    assert [r.stage for r in rows] == ["optimal", "candidates", "elected"]
    for r in rows:
        assert r.mixed + r.male_only + r.non_male_only == 50
        assert 0 <= r.mixed_fraction <= 1
    assert [r for r in rows if r.stage == "elected"][0].mixed == 0


def test_stage_ratio_reference_counts():
    # 57 of 88 elected leaders male; single-gender cases at the optimal stage read as 34 of 56.
    from lostatsea.analytics import StageRatioRow
    from lostatsea.stats import binomial_test_exact

    elected = StageRatioRow("ref", "elected", 88, 0, 57, 31, binomial_test_exact(57, 88, 0.5, "greater"))
    assert elected.male_fraction == pytest.approx(0.648, abs=1e-3)
    assert elected.male_test.p_value == pytest.approx(0.0037, abs=5e-4)
    optimal = StageRatioRow("ref", "optimal", 88, 32, 34, 22)
    assert optimal.mixed_fraction == pytest.approx(0.36, abs=0.005)
    assert optimal.single_gender == 56
    assert optimal.male_fraction == pytest.approx(0.61, abs=0.005)


# --- covariate balance ---------------------------------------------------------------------------------------------


def test_covariate_balance():
    a, b = synth(20, seed=1), synth(20, seed=2)
    assert covariate_balance(a, b, "gender").p_value == 1.0
    r = covariate_balance(a, b, "pronouns")
    assert 0 <= r.p_value <= 1 and r.method == "chi_square"


# --- report output --------------------------------------------------------------------------------------------------


def tables():
    h = synth(12, seed=1, treatment="pseudonymous")
    sim = run_agent_cohort(h, Treatment.NO_DEMOGRAPHICS, ProviderConfig(model="stub-model-7"), seed=1).cohort
    return compute_tables(h, [sim]), sim


def test_emit_report_inventory_and_determinism(tmp_path):
    t, sim = tables()
    manifest = {"provider_models": [sim.metadata["provider_model"]], "seeds": [1]}
    emit_report(t, tmp_path / "a", manifest)
    emit_report(t, tmp_path / "b", manifest)
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(
        ["alignment.csv", "gap_table.csv", "nomination_table.csv", "score_table.csv",
         "stage_ratio_table.csv", "report_manifest.json"]
    )
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
    header = (tmp_path / "a" / "gap_table.csv").read_text().splitlines()[0]
    assert header.startswith("condition,n_groups,delta_self,delta_peer,delta_total")
    assert "stub-model-7" in (tmp_path / "a" / "report_manifest.json").read_text()


def test_emit_report_json(tmp_path):
    t, _ = tables()
    written = emit_report(t, tmp_path, fmt="json")
    assert {p.name for p in written} == {"tables.json", "report_manifest.json"}
    with pytest.raises(ValueError):
        emit_report(t, tmp_path, fmt="xml")


def test_emit_report_unwritable(tmp_path):
    t, _ = tables()
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_report(t, blocker / "sub")


def test_compute_tables_shapes():
    t, _ = tables()
    assert len(t.gap_rows) == 2 and len(t.nomination_rows) == 2
    assert len(t.stage_ratio_rows) == 6
    assert len(t.alignment) == 1
    assert isinstance(t.alignment[0].label, str)


def test_empty_cohort_rejected():
    with pytest.raises(AnalyticsError):
        gap_table(Cohort((), Population.SYNTHETIC))
