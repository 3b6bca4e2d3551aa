"""FastAPI service exposing the node to authenticated clients.

Clients authenticate with a bearer token that maps to their identity; an
unknown or missing token ends the exchange with 401 before any request
parsing happens. Valid requests always get a ``{"status": ...}`` report back,
mirroring how the node itself reports rather than raises.
"""

from __future__ import annotations

import threading
from contextlib import asynccontextmanager
from typing import Any, Dict, Mapping

from fastapi import Body, Depends, FastAPI, HTTPException, Request as HttpRequest

from ..core import ClientId
from ..lifecycle import EdgeNode, Request, response_to_wire
from .schemas import JobState, NodeStatus, WireResponse, parse_request_body


def create_app(node: EdgeNode, clients: Mapping[str, ClientId],
               run_loops: bool = False, tick_interval_s: float = 0.2) -> FastAPI:
    """Build the service around an existing node.

    ``clients`` maps bearer tokens to client identities. With ``run_loops``
    the scheduler and monitor threads start on app startup and stop on
    shutdown; tests usually drive the node by hand instead.
    """
    token_map: Dict[str, ClientId] = dict(clients)
    stop_event = threading.Event()
    threads = []

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        if run_loops:
            threads.append(threading.Thread(
                target=node.scheduler_loop, args=(stop_event, tick_interval_s),
                daemon=True))
            threads.append(threading.Thread(
                target=node.monitor_loop, args=(stop_event,), daemon=True))
            for t in threads:
                t.start()
        yield
        stop_event.set()
        for t in threads:
            t.join(timeout=2.0)

    app = FastAPI(title="edgefair", lifespan=lifespan)
    app.state.node = node

    def authenticated(http_request: HttpRequest) -> ClientId:
        header = http_request.headers.get("authorization", "")
        scheme, _, token = header.partition(" ")
        client = token_map.get(token) if scheme.lower() == "bearer" else None
        if client is None:
            raise HTTPException(status_code=401, detail="unauthorized")
        return client

    @app.post("/requests", response_model=WireResponse,
              response_model_exclude_none=True)
    def submit_request(payload: Any = Body(...),
                       client: ClientId = Depends(authenticated)):
        body = parse_request_body(payload)
        response = node.handle_request(Request(client=client, body=body))
        return response_to_wire(response)

    @app.get("/jobs/{job_id}", response_model=JobState,
             response_model_exclude_none=True)
    def job_state(job_id: int, client: ClientId = Depends(authenticated)):
        state = node.job_state(job_id)
        if state["state"] == "unknown":
            raise HTTPException(status_code=404, detail="unknown job id")
        return state

    @app.get("/status", response_model=NodeStatus)
    def status(client: ClientId = Depends(authenticated)):
        store = node.store
        names = sorted({c.name for c in token_map.values()})
        return NodeStatus(
            strategy=node.cfg.strategy,
            max_jobs=node.cfg.max_jobs,
            queue_max=node.cfg.queue_max,
            queue_length=store.queue_length(),
            running=len(node.running),
            executed_total=store.total_executed(),
            pending_terminations=len(store.pending_terminations()),
            per_client_executed={n: store.client_frequency(n) for n in names},
            per_priority_executed={lvl: store.priority_count(lvl)
                                   for lvl in sorted(node.cfg.priority_weights)},
        )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    return app
