"""Getting answers from agents: prompt payloads, HTTP transport, reference agents."""

from __future__ import annotations

from .client import (
    AgentEndpoint,
    AgentResponse,
    HttpAgent,
    Query,
    TransportError,
    query_agent,
    run_bounded,
)
from .prompts import PromptBundle, PromptTemplate, build_prompt, register_template, render_text
from .reference import REFERENCE_KINDS, ReferenceAgent, canonical_gt, reference_agent_step

REFERENCE_SCHEME = "reference://"

__all__ = [
    "AgentEndpoint", "AgentResponse", "HttpAgent", "PromptBundle", "PromptTemplate", "Query",
    "REFERENCE_KINDS", "ReferenceAgent", "TransportError", "build_prompt", "canonical_gt", "make_agent",
    "query_agent", "reference_agent_step", "register_template", "render_text", "run_bounded",
]


def make_agent(endpoint: AgentEndpoint, *, agent_id: str | None = None, seed: int = 0):
    """An agent for ``endpoint``; ``reference://<kind>`` URLs give in-process reference agents."""
    if endpoint.base_url.startswith(REFERENCE_SCHEME):
        kind = endpoint.base_url[len(REFERENCE_SCHEME):].strip("/")
        return ReferenceAgent(kind, dialect_id=endpoint.dialect_id, seed=seed,
                              agent_id=agent_id or endpoint.model_name, max_parallel=endpoint.max_parallel)
    return HttpAgent(endpoint, agent_id=agent_id)
