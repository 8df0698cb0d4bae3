from __future__ import annotations

from dataclasses import dataclass, field

from ..models import GroupRecord, ParticipantRecord, Treatment


class PersonaError(ValueError):
    pass


@dataclass(frozen=True)
class Peer:
    label: str
    descriptor: str = ""

    def render(self) -> str:
        return f"{self.label} ({self.descriptor})" if self.descriptor else self.label


@dataclass(frozen=True)
class PersonaContext:
    """What one agent is told about itself and its group.

    ``identity`` and ``survey`` are empty under NO_DEMOGRAPHICS; ``self_label``
    and ``peers`` are the visible names (real names when identified, animal
    aliases otherwise).
    """

    participant: str
    treatment: Treatment
    self_label: str
    identity: tuple[tuple[str, str], ...] = ()
    survey: tuple[tuple[str, str], ...] = ()
    peers: tuple[Peer, ...] = field(default=())


SURVEY_LABELS = (
    ("survival_experience", "Prior knowledge or experience in the domain of survival"),
    ("leadership_experience", "Previous experience of leadership activities"),
    ("risk_willingness", "Willingness to take risks (0 = completely unwilling, 10 = very willing)"),
    (
        "gender_task_belief",
        "On the survival task, are men or women better on average? (1 = men are better, 10 = women are better)",
    ),
    (
        "gender_leader_belief",
        "Are men or women better leaders on average? (1 = men are better, 10 = women are better)",
    ),
)


def _survey_items(record: ParticipantRecord) -> tuple[tuple[str, str], ...]:
    out = []
    for attr, label in SURVEY_LABELS:
        value = getattr(record.survey, attr)
        out.append((label, str(value) if value != "" else "(no answer)"))
    return tuple(out)


def build_persona(record: ParticipantRecord, treatment: Treatment, group: GroupRecord | None = None) -> PersonaContext:
    peers_src = [m for m in group.canonical_members if m.id != record.id] if group is not None else []

    if treatment is Treatment.IDENTIFIED:
        if record.pseudonym:
            raise PersonaError(
                f"{record.id}: identified persona requested for a pseudonymous record"
            )
        p = record.profile
        return PersonaContext(
            participant=record.id,
            treatment=treatment,
            self_label=p.display_name,
            identity=(("Name", p.display_name), ("Avatar", p.avatar), ("Pronouns", p.pronouns)),
            survey=_survey_items(record),
            peers=tuple(Peer(m.profile.display_name, m.profile.pronouns) for m in peers_src),
        )

    if not record.pseudonym:
        raise PersonaError(f"{record.id}: {treatment.value} persona requires an assigned pseudonym")
    missing = [m.id for m in peers_src if not m.pseudonym]
    if missing:
        raise PersonaError(f"peers without pseudonyms: {missing}")
    peers = tuple(Peer(m.pseudonym) for m in peers_src)
    if treatment is Treatment.NO_DEMOGRAPHICS:
        return PersonaContext(record.id, treatment, record.pseudonym, peers=peers)
    return PersonaContext(
        participant=record.id,
        treatment=treatment,
        self_label=record.pseudonym,
        identity=(("Pronouns", record.profile.pronouns), ("Name shown to the group", record.pseudonym)),
        survey=_survey_items(record),
        peers=peers,
    )


def render_profile(persona: PersonaContext) -> str:
    """The profile section body; empty when the persona carries no identity."""
    if not persona.identity and not persona.survey:
        return ""
    lines = [f"- {k}: {v}" for k, v in persona.identity]
    if persona.survey:
        lines.append("- Survey responses:")
        lines.extend(f"  - {k}: {v}" for k, v in persona.survey)
    return "\n".join(lines)
