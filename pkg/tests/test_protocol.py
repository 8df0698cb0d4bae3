import copy
import json
from dataclasses import replace
from decimal import Decimal

import pytest
from conftest import cohort_text, group_dict
from hypothesis import given, settings
from hypothesis import strategies as st

from lostatsea.cohort_io import (
    CohortValidationError,
    SchemaError,
    ingest_cohort,
    ingest_with_diagnostics,
    read_task_key,
    serialize_cohort,
    write_task_key,
)
from lostatsea.election import ElectionError
from lostatsea.models import (
    Gender,
    IdentityProfile,
    ParticipantRecord,
    StageId,
    TaskItem,
    TaskKey,
    default_task_key,
    gender_from_pronouns,
)
from lostatsea.protocol import (
    DEFAULT_ROSTER,
    ReplayResponder,
    SessionError,
    assign_pseudonyms,
    payout_preview,
    replay_cohort,
    run_session,
    score_task,
    stored_election_matches,
    stratify_groups,
)
from lostatsea.synthlab import SynthConfig, election_oracle, generate_cohort

KEY = default_task_key()


def two_groups():
    return cohort_text([group_dict("g1"), group_dict("g2", noms=(2, 9, 8, 1), ballots=[("cara", "ben")] * 4)])


# --- models ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "pronouns, gender",
    [("he/him", Gender.MALE), ("He / Him", Gender.MALE), ("she/her", Gender.NON_MALE),
     ("they/them", Gender.NON_MALE), ("he/they", Gender.NON_MALE), ("", Gender.NON_MALE)],
)
def test_gender_from_pronouns(pronouns, gender):
    assert gender_from_pronouns(pronouns) is gender


def test_task_key_invariants(tmp_path):
    with pytest.raises(ValueError):
        TaskKey((TaskItem("q1", "A"), TaskItem("q1", "B")), 2)
    with pytest.raises(ValueError):
        TaskKey((TaskItem("q1", "A"),), 2)
    path = tmp_path / "key.json"
    write_task_key(KEY, path)
    assert read_task_key(path) == KEY
    assert default_task_key(9).max_items == 9


# --- ingestion ---------------------------------------------------------------------------


def test_ingest_two_groups():
    cohort = ingest_cohort(two_groups())
    assert cohort.group_ids == ("g1", "g2")
    assert all(len(g.members) == 4 for g in cohort)


def test_ingest_rejects_three_member_group():
    bad = group_dict("short")
    bad["members"] = bad["members"][:3]
    cohort, issues = ingest_with_diagnostics(cohort_text([group_dict("ok"), bad]))
    assert cohort.group_ids == ("ok",)
    assert any(i.group_id == "short" for i in issues)
    with pytest.raises(CohortValidationError) as exc:
        ingest_cohort(cohort_text([bad]))
    assert "short" in str(exc.value)


def test_ingest_range_violation_cites_field():
    bad = group_dict("g1")
    bad["members"][0]["nomination"] = 12
    _, issues = ingest_with_diagnostics(cohort_text([bad]))
    assert issues
    assert "nomination" in issues[0].path or "nomination" in issues[0].message


@pytest.mark.parametrize(
    "mutate, needle",
    [
        (lambda g: g["members"][2]["profile"].update(pronouns="he/him"), "male"),
        (lambda g: g["members"][0]["survey"].update(risk_willingness=11), "risk_willingness"),
        (lambda g: g["transcript"][3].update(turn_index=1), "turn"),
        (lambda g: g["transcript"][0].update(speaker_alias="Stranger"), "speaker"),
        (lambda g: g["members"][1].update(id=g["members"][0]["id"]), "duplicate"),
        (lambda g: g["members"][1].update(ballot=["g1-adam", "g1-adam"]), "ballot"),
        (lambda g: g["members"][1].update(pseudonym="Bear"), "pseudonym"),
        (lambda g: g.update(treatment="no_demographics"), "no_demographics"),
    ],
)
def test_ingest_invariant_violations(mutate, needle):
    g = group_dict("g1")
    mutate(g)
    _, issues = ingest_with_diagnostics(cohort_text([g]))
    assert issues, needle
    assert any(needle in (i.path + " " + i.message).lower() for i in issues), issues


def test_ingest_schema_errors():
    with pytest.raises(SchemaError):
        ingest_cohort("")
    with pytest.raises(SchemaError):
        ingest_cohort(json.dumps({"schema_version": "99"}) + "\n")


def test_ingest_duplicate_group_ids():
    _, issues = ingest_with_diagnostics(cohort_text([group_dict("g1"), group_dict("g1")]))
    assert any("duplicate" in i.message for i in issues)


def test_ingest_checks_scores_against_key():
    g = group_dict("g1")
    g["members"][0]["score"] = {"correct": 2, "max_items": 6}
    _, issues = ingest_with_diagnostics(cohort_text([g]), key=KEY)
    assert any("score" in i.path for i in issues)


def test_round_trip_is_canonical():
    cohort = replay_cohort(ingest_cohort(two_groups()), 0, KEY)
    text = serialize_cohort(cohort)
    again = ingest_cohort(text)
    assert again == cohort
    assert serialize_cohort(again) == text


def test_unknown_fields_survive_round_trip():
    g = group_dict("g1")
    g["site"] = "lab-2"
    g["members"][0]["age_band"] = "25-34"
    cohort = ingest_cohort(cohort_text([g]))
    text = serialize_cohort(cohort)
    assert '"site":"lab-2"' in text and '"age_band":"25-34"' in text
    assert ingest_cohort(text).groups[0].extra == {"site": "lab-2"}


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["identified", "pseudonymous"]))
def test_synthetic_round_trip(seed, treatment):
    cohort = generate_cohort(SynthConfig(n_groups=3, seed=seed, treatment=treatment))
    assert ingest_cohort(serialize_cohort(cohort)) == cohort


# --- stratification and pseudonyms ---------------------------------------------------------


def people(n_male, n_other):
    out = [ParticipantRecord(f"m{i:03d}", IdentityProfile(f"M{i}", "a", "he/him")) for i in range(n_male)]
    out += [ParticipantRecord(f"f{i:03d}", IdentityProfile(f"F{i}", "a", "she/her")) for i in range(n_other)]
    return out


def test_stratify_small():
    groups = stratify_groups(people(4, 4), seed=3)
    assert len(groups) == 2
    for g in groups:
        assert sorted(p.gender.value for p in g) == ["male", "male", "non_male", "non_male"]


def test_stratify_infeasible():
    with pytest.raises(ValueError):
        stratify_groups(people(5, 3), seed=0)
    with pytest.raises(ValueError):
        stratify_groups(people(3, 3), seed=0)


def test_stratify_large_is_reproducible():
    groups = stratify_groups(people(100, 100), seed=9)
    assert len(groups) == 50
    assert all(sum(p.gender is Gender.MALE for p in g) == 2 for g in groups)
    assert groups == stratify_groups(people(100, 100), seed=9)
    assert {p.id for g in groups for p in g} == {p.id for p in people(100, 100)}


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**31))
def test_stratify_property(pairs, seed):
    pool = people(2 * pairs, 2 * pairs)
    groups = stratify_groups(list(reversed(pool)), seed)
    assert len(groups) == pairs
    assert all(sum(p.gender is Gender.MALE for p in g) == 2 for g in groups)


def pseudo_group():
    return ingest_cohort(cohort_text([group_dict("g1", "pseudonymous")])).groups[0]


def test_assign_pseudonyms():
    g = pseudo_group()
    roster = ("Bear", "Cat", "Fox", "Owl", "Elk")
    a = assign_pseudonyms(g, roster, seed=1)
    aliases = [m.pseudonym for m in a.members]
    assert len(set(aliases)) == 4 and set(aliases) <= set(roster)
    assert assign_pseudonyms(g, roster, seed=1) == a
    b = assign_pseudonyms(g, roster, seed=2)
    assert len({m.pseudonym for m in b.members}) == 4


def test_assign_pseudonyms_errors():
    with pytest.raises(ValueError):
        assign_pseudonyms(pseudo_group(), ("Bear", "Cat", "Fox"), seed=1)
    identified = ingest_cohort(cohort_text([group_dict("g1")])).groups[0]
    with pytest.raises(ValueError):
        assign_pseudonyms(identified, DEFAULT_ROSTER, seed=1)
    with pytest.raises(ValueError):
        assign_pseudonyms(pseudo_group(), ("Bear", "Cat", "Fox", "Mother Hen"), seed=1)


def test_default_roster_is_neutral_and_large_enough():
    assert len(DEFAULT_ROSTER) >= 4
    assert len(set(DEFAULT_ROSTER)) == len(DEFAULT_ROSTER)


# --- scoring -------------------------------------------------------------------------------------


def test_score_task():
    all_right = {it.id: it.answer for it in KEY.items}
    assert score_task(all_right, KEY).correct == 6
    assert score_task({}, KEY).correct == 0
    half = {"q1": "A", "q2": "B", "q3": "A", "q4": "A", "q5": "B", "q6": "A"}
    assert score_task(half, KEY).correct == 3
    with pytest.raises(ValueError):
        score_task({"q99": "A"}, KEY)


# --- sessions ---------------------------------------------------------------------------------------


def test_replay_matches_stored_election():
    cohort = replay_cohort(ingest_cohort(two_groups()), 0, KEY)
    for g in cohort:
        ballots = [m.ballot for m in g.members]
        assert g.election.elected in election_oracle(ballots, g.election.candidates)
        assert stored_election_matches(g, 0, KEY)
    g1, g2 = cohort.groups
    assert g1.election.elected == "g1-adam"
    assert (g2.gap.delta_total, g2.gap.delta_self) == (6, 6)


def test_replay_detects_tampered_winner():
    g = replay_cohort(ingest_cohort(two_groups()), 0, KEY).groups[0]
    tampered = replace(g, election=replace(g.election, elected="g1-ben"))
    assert not stored_election_matches(tampered, 0, KEY)


class Scripted:
    def __init__(self, w=None):
        self.w = w or {}
        self.calls = []

    def respond(self, group, member, stage, context):
        self.calls.append((stage, member.id))
        if stage is StageId.SELF_NOMINATION:
            return self.w.get(member.id, 5.0)
        if stage is StageId.ELECTION_BALLOT:
            return tuple(sorted(context.candidates.members))
        if stage is StageId.TASK:
            return {"q1": "A", "q2": "A"}
        return None


def blank_group():
    g = ingest_cohort(cohort_text([group_dict("g1")])).groups[0]
    return replace(g, members=tuple(replace(m, nomination=None, ballot=None, task_answers=None) for m in g.members))


def test_stub_session_is_deterministic_and_ordered():
    r1, r2 = Scripted(), Scripted()
    a = run_session(blank_group(), r1, 4, KEY)
    b = run_session(blank_group(), r2, 4, KEY)
    assert a == b
    assert r1.calls == r2.calls
    stages = [s for s, _ in r1.calls]
    assert stages == sorted(stages, key=lambda s: s.index)
    assert a.is_complete


def test_out_of_range_nomination_aborts():
    with pytest.raises(ElectionError):
        run_session(blank_group(), Scripted({"g1-adam": 15}), 0, KEY)


def test_non_numeric_nomination_aborts():
    with pytest.raises(SessionError):
        run_session(blank_group(), Scripted({"g1-adam": "high"}), 0, KEY)


def test_replay_requires_stored_answers():
    with pytest.raises(SessionError):
        run_session(blank_group(), ReplayResponder(), 0, KEY)


# --- payouts -------------------------------------------------------------------------------------------


def completed_with_leader_score(correct):
    g = replay_cohort(ingest_cohort(two_groups()), 0, KEY).groups[0]
    leader = g.election.elected
    members = tuple(replace(m, score=replace(m.score, correct=correct)) if m.id == leader else m for m in g.members)
    return replace(g, members=members)


@pytest.mark.parametrize("correct, amount", [(6, "13.00"), (0, "9.00"), (3, "11.00")])
def test_payout_preview(correct, amount):
    pay = payout_preview(completed_with_leader_score(correct), Decimal("9.00"), Decimal("4.00"))
    assert len(pay) == 4
    assert set(pay.values()) == {Decimal(amount)}


def test_payout_requires_completed_group():
    with pytest.raises(ValueError):
        payout_preview(blank_group(), 9, 4)


def test_ingest_does_not_mutate_source():
    raw = [group_dict("g1")]
    before = copy.deepcopy(raw)
    ingest_cohort(cohort_text(raw))
    assert raw == before
