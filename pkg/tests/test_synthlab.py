import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lostatsea.analytics import score_table
from lostatsea.cohort_io import validate_group
from lostatsea.election import Ballot, CandidateSet
from lostatsea.models import PLACEHOLDER_MARKER, Gender, Population
from lostatsea.synthlab import SynthConfig, election_oracle, exact_binomial_oracle, generate_cohort


def test_noise_free_cohort_is_flat():
    c = generate_cohort(SynthConfig(n_groups=5, noise_spread=0))
    assert {m.nomination for g in c for m in g.members} == {5.5}
    assert {m.score.correct for g in c for m in g.members} == {3}


@settings(max_examples=25, deadline=None)
@given(
    st.integers(0, 10_000),
    st.floats(-3, 3),
    st.floats(-2, 2),
    st.floats(0, 6),
    st.sampled_from(["identified", "pseudonymous"]),
)
def test_generated_groups_are_valid(seed, shift, score_shift, noise, treatment):
    cfg = SynthConfig(
        n_groups=4, seed=seed, male_nomination_shift=shift, score_gender_shift=score_shift,
        noise_spread=noise, treatment=treatment,
    )
    c = generate_cohort(cfg)
    assert c.population is Population.SYNTHETIC
    for g in c:
        assert validate_group(g, Population.SYNTHETIC) == []
        assert sorted(m.gender for m in g.members) == [Gender.MALE, Gender.MALE, Gender.NON_MALE, Gender.NON_MALE]
        assert all(0 <= m.nomination <= 10 for m in g.members)
        assert all(0 <= m.score.correct <= 6 for m in g.members)
        assert g.has_placeholder_transcript
        assert all(PLACEHOLDER_MARKER in t.text for t in g.transcript)
    assert generate_cohort(cfg) == c


def test_seeds_differ():
    a = generate_cohort(SynthConfig(n_groups=3, seed=1))
    b = generate_cohort(SynthConfig(n_groups=3, seed=2))
    assert a != b


def test_clipping_is_recorded():
    c = generate_cohort(SynthConfig(n_groups=30, nomination_base=9.5, noise_spread=3))
    assert c.metadata["clipped_nominations"] > 0
    assert c.metadata["synth_config"]["nomination_base"] == 9.5


@pytest.mark.parametrize(
    "kwargs",
    [dict(n_groups=0), dict(n_groups=1, noise_spread=-1), dict(n_groups=1, treatment="no_demographics"),
     dict(n_groups=1, max_items=0)],
)
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        SynthConfig(**kwargs)


def test_score_null_holds_across_seeds():
    significant = sum(
        score_table(generate_cohort(SynthConfig(n_groups=88, seed=s))).test.significant(0.01) for s in range(40)
    )
    assert significant <= 2  # at least 95% of seeds non-significant


# --- oracles -------------------------------------------------------------------------------------------


def test_binomial_oracle_examples():
    assert exact_binomial_oracle(0, 4, 0.5, "less") == 0.0625
    assert exact_binomial_oracle(4, 4, 0.5, "greater") == 0.0625
    assert exact_binomial_oracle(57, 88, 0.5, "greater") == pytest.approx(0.0037, abs=5e-4)
    assert exact_binomial_oracle(57, 88, 0.5, "two_sided") == pytest.approx(2 * exact_binomial_oracle(57, 88, 0.5, "greater"))
    with pytest.raises(ValueError):
        exact_binomial_oracle(5, 4, 0.5)
    with pytest.raises(ValueError):
        exact_binomial_oracle(1, 4, 0.5, "sideways")


def test_election_oracle_examples():
    xy = CandidateSet.of("X", "Y")
    assert election_oracle([("X", "Y")] * 3 + [("Y", "X")], xy) == {"X"}
    assert election_oracle([("X", "Y")] * 2 + [("Y", "X")] * 2, xy) == {"X", "Y"}
    cycle = [Ballot(v, tuple(r)) for v, r in zip("ABCD", ["XYZ", "YZX", "ZXY", "XYZ"])]
    assert election_oracle(cycle, ["X", "Y", "Z"]) == {"X"}
    with pytest.raises(ValueError):
        election_oracle([("X",)], xy)
