"""Matched agent cohorts: one agent per human, same groups, same transcripts."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

from ..cohort_io import validate_group
from ..models import (
    Cohort,
    GroupRecord,
    ParticipantRecord,
    Population,
    StageId,
    TaskKey,
    Treatment,
    default_task_key,
)
from ..protocol import SessionError, StageContext, run_session
from .parsing import ResponseError, parse_stage_response
from .persona import PersonaContext, build_persona
from .prompts import format_reminder, render_stage_prompt, stage_materials
from .providers import AttemptRecord, Provider, ProviderConfig, ProviderExhausted, make_provider, request_completion

log = logging.getLogger(__name__)

# Which human condition each agent treatment is matched to.
SOURCE_TREATMENT = {
    Treatment.IDENTIFIED: Treatment.IDENTIFIED,
    Treatment.PSEUDONYMOUS: Treatment.PSEUDONYMOUS,
    Treatment.NO_DEMOGRAPHICS: Treatment.PSEUDONYMOUS,
}


class AgentFailure(SessionError):
    def __init__(self, message: str, stage: StageId, participant: str):
        super().__init__(message)
        self.stage = stage
        self.participant = participant


@dataclass(frozen=True)
class StageTrace:
    group_id: str
    participant: str
    stage: StageId
    prompt: str
    reply: str
    parsed: object
    attempts: tuple[AttemptRecord, ...]
    started: float
    finished: float

    @property
    def attempt_count(self) -> int:
        return len(self.attempts)

    def to_dict(self) -> dict:
        parsed = self.parsed
        if isinstance(parsed, tuple):
            parsed = list(parsed)
        return {
            "group_id": self.group_id,
            "participant": self.participant,
            "stage": self.stage.value,
            "prompt": self.prompt,
            "reply": self.reply,
            "parsed": parsed,
            "attempt_count": self.attempt_count,
            "attempts": [a.to_dict() for a in self.attempts],
            "started": self.started,
            "finished": self.finished,
        }


@dataclass(frozen=True)
class AgentTrace:
    group_id: str
    participant: str
    entries: tuple[StageTrace, ...]


@dataclass(frozen=True)
class GroupFailure:
    group_id: str
    stage: str
    participant: str
    message: str


@dataclass(frozen=True)
class SimulationResult:
    cohort: Cohort
    traces: tuple[AgentTrace, ...]
    failures: tuple[GroupFailure, ...]

    def stage_events(self) -> list[StageTrace]:
        return [e for t in self.traces for e in t.entries]


class AgentResponder:
    """Responder for one group: each member is a model agent with its own history."""

    def __init__(
        self,
        group: GroupRecord,
        treatment: Treatment,
        config: ProviderConfig,
        provider: Provider,
        key: TaskKey,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.time,
    ):
        self.group = group
        self.treatment = treatment
        self.config = config
        self.provider = provider
        self.key = key
        self.sleep = sleep
        self.clock = clock
        self.personas: dict[str, PersonaContext] = {
            m.id: build_persona(m, treatment, group) for m in group.members
        }
        self.history: dict[str, list[StageTrace]] = {m.id: [] for m in group.members}

    def _label_map(self) -> dict[str, str]:
        return {m.visible_name(self.treatment): m.id for m in self.group.members}

    def respond(self, group: GroupRecord, member: ParticipantRecord, stage: StageId, context: StageContext):
        persona = self.personas[member.id]
        history = self.history[member.id]
        labels: dict[str, str] = {}
        if stage is StageId.ELECTION_BALLOT:
            by_id = {v: k for k, v in self._label_map().items()}
            labels = {by_id[c]: c for c in context.candidates.members}
        materials, options = stage_materials(persona, self.group, stage, self.key, tuple(labels))

        attempts: list[AttemptRecord] = []
        suffix = ""
        started = self.clock()
        for _ in range(self.config.reask_limit + 1):
            prompt = render_stage_prompt(persona, history, stage, materials + suffix, options)
            try:
                completion = request_completion(prompt, self.config, self.provider, self.sleep, self.clock)
            except ProviderExhausted as exc:
                attempts.extend(exc.attempts)
                raise AgentFailure(f"group {group.group_id}: {exc}", stage, member.id) from exc
            attempts.extend(completion.attempts)
            try:
                parsed = parse_stage_response(stage, completion.text, labels or None, self.key)
            except ResponseError as exc:
                attempts.append(AttemptRecord(len(attempts) + 1, "parse_error", str(exc), self.clock(), self.clock()))
                suffix = format_reminder(f"{exc.reason}: {exc}")
                continue
            history.append(
                StageTrace(
                    group.group_id, member.id, stage, prompt.text, completion.text, parsed,
                    tuple(attempts), started, self.clock(),
                )
            )
            return parsed
        raise AgentFailure(
            f"group {group.group_id}: no valid {stage.value} reply from {member.id} "
            f"after {self.config.reask_limit} re-asks",
            stage,
            member.id,
        )


def matched_group(human: GroupRecord, treatment: Treatment) -> GroupRecord:
    """The agent-side starting record: same members and transcript, no responses."""
    members = tuple(
        replace(m, nomination=None, ballot=None, task_answers=None, score=None) for m in human.members
    )
    return replace(human, treatment=treatment, members=members, election=None, gap=None)


def check_simulation_input(
    human_cohort: Cohort, treatment: Treatment, force_synthetic: bool = False
) -> None:
    source = SOURCE_TREATMENT[treatment]
    for g in human_cohort.groups:
        if g.treatment is not source:
            raise ValueError(
                f"group {g.group_id}: {treatment.value} agents are matched to {source.value} groups, "
                f"not {g.treatment.value}"
            )
        if not g.transcript:
            raise ValueError(f"group {g.group_id}: agents need the human discussion transcript")
        if (
            g.has_placeholder_transcript
            and treatment is not Treatment.NO_DEMOGRAPHICS
            and not force_synthetic
        ):
            raise ValueError(
                f"group {g.group_id}: transcript is a synthetic placeholder; "
                "pass force_synthetic=True to simulate identity-bearing treatments on it"
            )


def simulate_group(
    human: GroupRecord,
    treatment: Treatment,
    config: ProviderConfig,
    provider: Provider,
    seed: int,
    key: TaskKey,
    sleep: Callable[[float], None] = time.sleep,
) -> tuple[GroupRecord | None, tuple[AgentTrace, ...], GroupFailure | None]:
    start = matched_group(human, treatment)
    responder = AgentResponder(start, treatment, config, provider, key, sleep)
    try:
        done = run_session(start, responder, seed, key)
    except AgentFailure as exc:
        log.error("%s", exc)
        failure = GroupFailure(human.group_id, exc.stage.value, exc.participant, str(exc))
        return None, _traces(responder), failure
    except (SessionError, ValueError) as exc:
        log.error("group %s aborted: %s", human.group_id, exc)
        return None, _traces(responder), GroupFailure(human.group_id, "", "", str(exc))
    issues = validate_group(done, Population.SIMULATED)
    if issues:
        return None, _traces(responder), GroupFailure(human.group_id, "", "", "; ".join(map(str, issues)))
    return done, _traces(responder), None


def _traces(responder: AgentResponder) -> tuple[AgentTrace, ...]:
    return tuple(
        AgentTrace(responder.group.group_id, pid, tuple(entries))
        for pid, entries in sorted(responder.history.items())
    )


def run_agent_cohort(
    human_cohort: Cohort,
    treatment: Treatment,
    config: ProviderConfig,
    seed: int,
    provider: Provider | None = None,
    key: TaskKey | None = None,
    force_synthetic: bool = False,
    sleep: Callable[[float], None] = time.sleep,
) -> SimulationResult:
    """Simulate every group with agents; failed groups are excluded and reported.

    Groups run on up to ``config.parallelism`` threads. Each agent's stages run
    strictly in order and results are collected in input order, so the output
    does not depend on the degree of parallelism.
    """
    treatment = Treatment(treatment)
    check_simulation_input(human_cohort, treatment, force_synthetic)
    provider = provider or make_provider(config, seed)
    key = key or default_task_key()

    def work(g: GroupRecord):
        return simulate_group(g, treatment, config, provider, seed, key, sleep)

    if config.parallelism == 1:
        results = [work(g) for g in human_cohort.groups]
    else:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            results = list(pool.map(work, human_cohort.groups))

    groups = tuple(g for g, _, _ in results if g is not None)
    traces = tuple(t for _, ts, _ in results for t in ts)
    failures = tuple(f for _, _, f in results if f is not None)
    metadata = dict(human_cohort.metadata)
    metadata.update(
        source_population=human_cohort.population.value,
        treatment=treatment.value,
        provider=config.provider,
        provider_model=config.model,
        temperature=config.temperature,
        seed=seed,
        excluded_groups=[f.group_id for f in failures],
    )
    cohort = Cohort(groups, Population.SIMULATED, human_cohort.schema_version, metadata)
    return SimulationResult(cohort, traces, failures)


def write_traces(events: Sequence[StageTrace], path: str | Path) -> None:
    """One JSON object per stage event."""
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            fh.write(json.dumps(e.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")
