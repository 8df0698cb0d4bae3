"""Stage prompt template and the per-stage materials inserted into it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..models import STAGE_ORDER, GroupRecord, StageId, TaskKey, Treatment
from .persona import PersonaContext, render_profile

SYSTEM_BLOCK = (
    "# SYSTEM ROLE INSTRUCTION: LLM PARTICIPANT SIMULATION\n"
    "\n"
    "You are simulating a human crowd-worker participant in a multi-stage online experiment, "
    "which involves working with a group of 3 other participants to elect the most competent "
    "leader to complete a task. Your goal is to behave **realistically and consistently**, as if "
    "you were the person defined in the following YOUR PARTICIPANT PROFILE section."
)

TEMPLATE = """{system_block}

___

# YOUR PARTICIPANT PROFILE

{profile_block}

**Reminder**: This profile defines your identity. All reasoning, language, and judgments should be consistent with this perspective. You are not a neutral observer—you are this person.

___

# EXPERIMENT STRUCTURE

You are currently in an experiment that proceeds in multiple sequential stages. At each stage, you may make individual judgements, or reflect on interactions with simulated group members.

*   You will receive current instructions in the **CURRENT STAGE** section.
*   You may need to consider information or responses from previous stages (if any) to respond appropriately to the current stage.

___
# PREVIOUS STAGES

{previous_stages_block}

___
# CURRENT STAGE

{current_stage_block}

**Important:** You must respond as the person described in the YOUR PARTICIPANT PROFILE section. Your thoughts, reasoning and choices should reflect this identity's likely beliefs, priorities, and lived experience. Do not use general world knowledge or reasoning that your persona would not likely know. You are not a neutral observer — you are this person.
"""

NO_PREVIOUS_STAGES = "(No previous stages.)"

STAGE_TITLES = {
    StageId.PROFILE: "Profile",
    StageId.DISCUSSION: "Group discussion",
    StageId.SELF_NOMINATION: "Self-nomination",
    StageId.ELECTION_BALLOT: "Leader election",
    StageId.TASK: "Survival task",
}


class MissingHistoryError(ValueError):
    pass


@dataclass(frozen=True)
class StagePrompt:
    stage: StageId
    participant: str
    system_block: str
    profile_block: str
    previous_stages_block: str
    current_stage_block: str
    options: tuple[str, ...] = ()

    @property
    def text(self) -> str:
        return TEMPLATE.format(
            system_block=self.system_block,
            profile_block=self.profile_block,
            previous_stages_block=self.previous_stages_block,
            current_stage_block=self.current_stage_block,
        )


def _previous_block(history: Sequence) -> str:
    if not history:
        return NO_PREVIOUS_STAGES
    parts = []
    for entry in history:
        parts.append(
            f"## Stage {entry.stage.index + 1}: {STAGE_TITLES[entry.stage]}\n"
            f"Your response:\n{entry.reply.strip()}"
        )
    return "\n\n".join(parts)


def render_stage_prompt(
    persona: PersonaContext,
    history: Sequence,
    stage: StageId,
    stage_materials: str,
    options: Sequence[str] = (),
) -> StagePrompt:
    """Fill the template for ``stage``.

    ``history`` holds this agent's earlier stage entries (anything with
    ``.stage`` and ``.reply``) and must cover every earlier stage in order.
    """
    expected = STAGE_ORDER[: stage.index]
    got = tuple(h.stage for h in history)
    if got != expected:
        raise MissingHistoryError(
            f"stage {stage.value} needs history {[s.value for s in expected]}, got {[s.value for s in got]}"
        )
    metadata = f"## Stage {stage.index + 1} of {len(STAGE_ORDER)}: {STAGE_TITLES[stage]}"
    return StagePrompt(
        stage=stage,
        participant=persona.participant,
        system_block=SYSTEM_BLOCK,
        profile_block=render_profile(persona),
        previous_stages_block=_previous_block(history),
        current_stage_block=f"{metadata}\n{stage_materials.strip()}",
        options=tuple(options),
    )


def _roster_line(persona: PersonaContext) -> str:
    peers = ", ".join(p.render() for p in persona.peers)
    return f"In this experiment you appear to the group as {persona.self_label}. The other group members are: {peers}."


def stage_materials(
    persona: PersonaContext,
    group: GroupRecord,
    stage: StageId,
    key: TaskKey,
    candidates: Sequence[str] = (),
) -> tuple[str, tuple[str, ...]]:
    """Instructions for one stage plus the answer options the parser accepts.

    ``candidates`` are visible labels. Wording here is written for this tool;
    the response formats are what the parser expects.
    """
    if stage is StageId.PROFILE:
        visibility = (
            "Everyone in the group can see each member's chosen name, avatar and pronouns."
            if persona.treatment is Treatment.IDENTIFIED
            else "Everyone in the group is shown only a randomly assigned animal name."
        )
        text = (
            f"{_roster_line(persona)}\n{visibility}\n\n"
            "In two or three sentences, describe how you expect to approach working with this group."
        )
        return text, ()
    if stage is StageId.DISCUSSION:
        lines = "\n".join(f"{m.speaker_alias}: {m.text}" for m in group.transcript) or "(no messages)"
        text = (
            f"{_roster_line(persona)}\n\n"
            "Your group discussed the survival scenario in a live chat. The full transcript follows; "
            f"messages from {persona.self_label} were written by you.\n\n"
            f"<transcript>\n{lines}\n</transcript>\n\n"
            "Evaluate each of the other group members: how competent did each seem at the survival task, "
            "and how suitable would each be as the group's leader? Keep your notes brief."
        )
        return text, ()
    if stage is StageId.SELF_NOMINATION:
        text = (
            "The group will now choose a leader. The elected leader answers the survival task on behalf "
            "of the group, and everyone's bonus depends on the leader's score. Only the two members with "
            "the highest self-nomination scores become candidates.\n\n"
            "How willing are you to be the group's leader, on a scale from 0 (not at all willing) to 10 "
            "(extremely willing)?\n\n"
            "Explain your reasoning briefly, then finish with a final line of the form `ANSWER: <number>`."
        )
        return text, ()
    if stage is StageId.ELECTION_BALLOT:
        names = ", ".join(candidates)
        example = " ".join(f"{i + 1}. <name>" for i in range(len(candidates)))
        text = (
            f"The candidates for leader are: {names}.\n"
            "Rank every candidate from most preferred (1) to least preferred. You may rank yourself if you "
            "are a candidate. The leader is chosen by ranked-choice voting.\n\n"
            f"Explain your reasoning briefly, then finish with a final line of the form `ANSWER: {example}`."
        )
        return text, tuple(candidates)
    questions = []
    for it in key.items:
        prompt = it.prompt or f"Question {it.id}"
        opts = f" Options: {', '.join(it.options)}." if it.options else ""
        questions.append(f"- {it.id}: {prompt}{opts}")
    text = (
        "Complete the survival task on your own. Answer every question.\n\n"
        + "\n".join(questions)
        + "\n\nFinish with one line per question of the form `<question id>: <answer>`, for example `"
        + f"{key.items[0].id}: {key.items[0].options[0] if key.items[0].options else 'A'}`."
    )
    return text, key.question_ids


def format_reminder(reason: str) -> str:
    return (
        "\n\n**Format reminder:** your previous reply could not be used "
        f"({reason}). Reply again and follow the requested answer format exactly."
    )
