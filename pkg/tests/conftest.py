import json

import pytest

from lostatsea.models import SCHEMA_VERSION

NAMES = (("Adam", "he/him"), ("Ben", "he/him"), ("Cara", "she/her"), ("Dee", "they/them"))
ALIASES = ("Bear", "Cat", "Fox", "Owl")


def member_dict(gid, k, nomination=None, ballot=None, answers=None, pseudonym=False):
    name, pronouns = NAMES[k]
    d = {
        "id": f"{gid}-{name.lower()}",
        "profile": {"name": f"{name}", "avatar": "anchor", "pronouns": pronouns},
        "survey": {
            "survival_experience": "sailed once",
            "leadership_experience": "team captain",
            "risk_willingness": 4 + k,
            "gender_task_belief": 5,
            "gender_leader_belief": 6,
        },
    }
    if pseudonym:
        d["pseudonym"] = ALIASES[k]
    if nomination is not None:
        d["nomination"] = nomination
    if ballot is not None:
        d["ballot"] = [f"{gid}-{b}" for b in ballot]
    if answers is not None:
        d["task_answers"] = answers
    return d


def group_dict(gid, treatment="identified", noms=(9, 7, 3, 1), ballots=None, answers=None):
    """A human-style group with stored responses but no derived election."""
    pseud = treatment == "pseudonymous"
    ballots = ballots or [("adam", "ben")] * 4
    answers = answers or [
        {"q1": "A", "q2": "B", "q3": "A", "q4": "B", "q5": "A", "q6": "B"},
        {"q1": "A", "q2": "B", "q3": "B"},
        {"q1": "B"},
        {},
    ]
    members = [member_dict(gid, k, noms[k], ballots[k], answers[k], pseud) for k in range(4)]
    visible = [ALIASES[k] if pseud else NAMES[k][0] for k in range(4)]
    transcript = [
        {"speaker_alias": visible[i % 4], "turn_index": i, "text": f"I think the water matters most ({i})."}
        for i in range(6)
    ]
    return {"group_id": gid, "treatment": treatment, "members": members, "transcript": transcript}


def cohort_text(groups, population="human"):
    lines = [json.dumps({"schema_version": SCHEMA_VERSION, "population": population})]
    lines += [json.dumps(g) for g in groups]
    return "\n".join(lines) + "\n"


@pytest.fixture
def human_file(tmp_path):
    path = tmp_path / "human.jsonl"
    path.write_text(cohort_text([group_dict("g1"), group_dict("g2", noms=(2, 9, 8, 1), ballots=[("cara", "ben")] * 4)]))
    return path
