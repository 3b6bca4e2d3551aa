"""Pydantic request/response models for the HTTP service.

The request body mirrors the wire objects accepted by the node:
``{"type": "new_job", "priority": 3, "ports": [80]}`` or
``{"type": "terminate", "job_id": 17}``; anything else is treated as an
invalid request and reported, not rejected with a transport error.
"""

from __future__ import annotations

from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, TypeAdapter, ValidationError

from ..lifecycle import Invalid, NewJob, RequestBody, Terminate


class NewJobWire(BaseModel):
    type: Literal["new_job"]
    priority: int
    ports: List[int] = Field(default_factory=list)


class TerminateWire(BaseModel):
    type: Literal["terminate"]
    job_id: int


_WIRE_ADAPTER: TypeAdapter = TypeAdapter(Union[NewJobWire, TerminateWire])


def parse_request_body(payload: object) -> RequestBody:
    """Turn a raw JSON payload into a request body, falling back to Invalid."""
    try:
        wire = _WIRE_ADAPTER.validate_python(payload)
    except ValidationError:
        return Invalid(raw=payload)
    if isinstance(wire, NewJobWire):
        return NewJob(priority=wire.priority, ports=tuple(wire.ports))
    return Terminate(job_id=wire.job_id)


class WireResponse(BaseModel):
    """Mirrors the node's response variants as ``{"status": ...}`` objects."""

    status: str
    job_id: Optional[int] = None
    port_mappings: Optional[Dict[str, int]] = None


class JobState(BaseModel):
    job_id: int
    state: str
    port_mappings: Optional[Dict[int, int]] = None


class NodeStatus(BaseModel):
    strategy: str
    max_jobs: int
    queue_max: int
    queue_length: int
    running: int
    executed_total: int
    pending_terminations: int
    per_client_executed: Dict[str, int]
    per_priority_executed: Dict[int, int]
