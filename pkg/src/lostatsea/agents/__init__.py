"""Language-model agents that replay the session stages in place of humans."""

from .parsing import (
    IncompleteResponse,
    OutOfRangeResponse,
    ResponseError,
    UnparseableResponse,
    parse_stage_response,
)
from .persona import PersonaContext, PersonaError, build_persona
from .prompts import MissingHistoryError, StagePrompt, render_stage_prompt, stage_materials
from .providers import (
    Completion,
    OpenAICompatibleProvider,
    ProviderConfig,
    ProviderError,
    ProviderExhausted,
    RateLimitError,
    ProviderTimeout,
    StubProvider,
    TransportError,
    make_provider,
    request_completion,
)
from .simulate import AgentFailure, SimulationResult, StageTrace, run_agent_cohort, write_traces

__all__ = [
    "AgentFailure",
    "Completion",
    "IncompleteResponse",
    "MissingHistoryError",
    "OpenAICompatibleProvider",
    "OutOfRangeResponse",
    "PersonaContext",
    "PersonaError",
    "ProviderConfig",
    "ProviderError",
    "ProviderExhausted",
    "ProviderTimeout",
    "RateLimitError",
    "ResponseError",
    "SimulationResult",
    "StagePrompt",
    "StageTrace",
    "StubProvider",
    "TransportError",
    "UnparseableResponse",
    "build_persona",
    "make_provider",
    "parse_stage_response",
    "render_stage_prompt",
    "request_completion",
    "run_agent_cohort",
    "stage_materials",
    "write_traces",
]
