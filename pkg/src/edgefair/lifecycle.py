"""Node-side runtime: request admission, the scheduling tick, and the monitor
that reaps idle jobs and drains the termination queue.

Jobs run on an :class:`Executor`; a simulated backend ships in-repo so the
whole lifecycle can be exercised without a container runtime. Three logical
actors (request handling, scheduler ticking, monitoring) may run concurrently
in service mode; they synchronize only through the store's writer lock and
the node's running-set lock.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Protocol, Sequence, Tuple, Union

from .core import (
    ClientId,
    Duplicate,
    Empty,
    ExecutorFailure,
    JobRecord,
    JobRequest,
    NoJobWaiting,
    NotFound,
    PortExhausted,
    QueueFull,
    Clock,
    SchedulerConfig,
)
from .store import JobStore
from .strategies import Selector, selector_for

DEFAULT_PORT_RANGE = (30000, 32767)


# -- requests and responses -----------------------------------------------------

@dataclass(frozen=True)
class NewJob:
    priority: int
    ports: Tuple[int, ...] = ()


@dataclass(frozen=True)
class Terminate:
    job_id: int


@dataclass(frozen=True)
class Invalid:
    raw: object = None


RequestBody = Union[NewJob, Terminate, Invalid]


@dataclass(frozen=True)
class Request:
    """An authenticated client request; the transport layer resolves the
    client identity before this object exists."""

    client: ClientId
    body: RequestBody


@dataclass(frozen=True)
class Queued:
    job_id: int
    status = "queued"


@dataclass(frozen=True)
class RejectedNoSpace:
    status = "rejected_no_space"


@dataclass(frozen=True)
class RemovedFromQueue:
    status = "removed_from_queue"


@dataclass(frozen=True)
class QueuedForTermination:
    status = "queued_for_termination"


@dataclass(frozen=True)
class InvalidRequest:
    status = "invalid_request"


@dataclass(frozen=True)
class Started:
    job_id: int
    port_mappings: Mapping[int, int]
    status = "started"


Response = Union[Queued, RejectedNoSpace, RemovedFromQueue, QueuedForTermination,
                 InvalidRequest, Started]


def response_to_wire(resp: Response) -> dict:
    """Flatten a response variant into its wire object ``{"status": ...}``."""
    wire: dict = {"status": resp.status}
    if isinstance(resp, Queued):
        wire["job_id"] = resp.job_id
    elif isinstance(resp, Started):
        wire["job_id"] = resp.job_id
        wire["port_mappings"] = {str(k): v for k, v in resp.port_mappings.items()}
    return wire


def handle_request(req: Request, store: JobStore, cfg: SchedulerConfig,
                   now_ms: int) -> Response:
    """Admit, reject or route one client request.

    New jobs are queued while the queue has space. Termination requests
    remove the job from the queue when it is still queued, otherwise the job
    id goes onto the termination queue for the monitor. The protocol reports
    outcomes, it never raises; at most one store mutation happens.
    """
    body = req.body
    if isinstance(body, NewJob):
        if body.priority not in cfg.priority_weights:
            return InvalidRequest()
        try:
            job_request = JobRequest(client=req.client, priority=body.priority,
                                     ports=tuple(body.ports))
        except ValueError:
            return InvalidRequest()
        with store.exclusive():
            if store.queue_length() >= cfg.queue_max:
                return RejectedNoSpace()
            try:
                record = store.enqueue_job(job_request, now_ms)
            except QueueFull:
                return RejectedNoSpace()
        return Queued(job_id=record.job_id)
    if isinstance(body, Terminate):
        try:
            store.remove_from_queue(body.job_id)
            return RemovedFromQueue()
        except NotFound:
            try:
                store.enqueue_termination(body.job_id, "client_request")
            except Duplicate:
                pass  # already pending; report success either way
            return QueuedForTermination()
    return InvalidRequest()


# -- ports ------------------------------------------------------------------------

class PortPool:
    """Host ports handed to running jobs; lowest free port first."""

    def __init__(self, low: int = DEFAULT_PORT_RANGE[0], high: int = DEFAULT_PORT_RANGE[1]):
        if low > high:
            raise ValueError("empty port range")
        self.low = low
        self.high = high
        self._allocated: set = set()
        self._lock = threading.Lock()

    def free_count(self) -> int:
        return self.high - self.low + 1 - len(self._allocated)

    def allocate(self, requested: Sequence[int]) -> Dict[int, int]:
        """Map each requested port to a free host port, or raise
        :class:`PortExhausted` and allocate nothing."""
        with self._lock:
            if self.free_count() < len(requested):
                raise PortExhausted(
                    f"{len(requested)} ports requested, {self.free_count()} free"
                )
            mapping: Dict[int, int] = {}
            host = self.low
            for port in requested:
                while host in self._allocated:
                    host += 1
                self._allocated.add(host)
                mapping[port] = host
                host += 1
            return mapping

    def release(self, mapping: Mapping[int, int]) -> None:
        with self._lock:
            self._allocated.difference_update(mapping.values())


# -- executor ----------------------------------------------------------------------

@dataclass
class RunningJob:
    """A job that is executing on the node."""

    job_id: int
    client: ClientId
    priority: int
    start_time_ms: int
    port_mappings: Dict[int, int]
    probe: object = None  # executor-owned utilization source handle


class Executor(Protocol):
    """Execution backend contract.

    ``sample_cpu`` returns a cumulative CPU-seconds counter that never
    decreases for a given job; ``cores`` is the node's core count used to
    turn CPU deltas into utilization percentages.
    """

    cores: int

    def start(self, record: JobRecord, now_ms: int,
              port_mappings: Dict[int, int]) -> RunningJob: ...

    def sample_cpu(self, job: RunningJob) -> float: ...

    def stop(self, job: RunningJob, timeout_s: float) -> None: ...


@dataclass
class _SimulatedJob:
    utilization_pct: float
    graceful: bool = True


class SimulatedExecutor:
    """In-process stand-in for a container runtime.

    Each job burns CPU at a fixed synthetic utilization (percent of the whole
    node). ``call_log`` records starts, stops and forced kills so tests can
    assert the stop semantics.
    """

    def __init__(self, clock: Clock, cores: int = 4, default_utilization_pct: float = 50.0):
        self.clock = clock
        self.cores = cores
        self.default_utilization_pct = default_utilization_pct
        self.utilization_by_job: Dict[int, float] = {}
        self.graceful_by_job: Dict[int, bool] = {}
        self.call_log: List[Tuple] = []
        self.fail_next_start = False

    def set_utilization(self, job_id: int, pct: float) -> None:
        self.utilization_by_job[job_id] = pct

    def set_graceful(self, job_id: int, graceful: bool) -> None:
        self.graceful_by_job[job_id] = graceful

    def start(self, record: JobRecord, now_ms: int,
              port_mappings: Dict[int, int]) -> RunningJob:
        if self.fail_next_start:
            self.fail_next_start = False
            raise ExecutorFailure(record.job_id, "simulated launch failure")
        probe = _SimulatedJob(
            utilization_pct=self.utilization_by_job.get(
                record.job_id, self.default_utilization_pct
            ),
            graceful=self.graceful_by_job.get(record.job_id, True),
        )
        self.call_log.append(("start", record.job_id))
        return RunningJob(
            job_id=record.job_id,
            client=record.client,
            priority=record.priority,
            start_time_ms=now_ms,
            port_mappings=dict(port_mappings),
            probe=probe,
        )

    def sample_cpu(self, job: RunningJob) -> float:
        elapsed_s = max(0, self.clock.now_ms() - job.start_time_ms) / 1000.0
        return job.probe.utilization_pct / 100.0 * self.cores * elapsed_s

    def stop(self, job: RunningJob, timeout_s: float) -> None:
        self.call_log.append(("stop", job.job_id, timeout_s))
        if not job.probe.graceful:
            self.call_log.append(("sigkill", job.job_id))


# -- node runtime -------------------------------------------------------------------

class EdgeNode:
    """Ties store, strategy, executor and monitor together for one node.

    The strategy is fixed at construction from ``cfg.strategy``. The running
    set never exceeds ``cfg.max_jobs`` and port mappings stay injective across
    all running jobs.
    """

    def __init__(self, store: JobStore, cfg: SchedulerConfig, executor: Executor,
                 clock: Clock, port_range: Tuple[int, int] = DEFAULT_PORT_RANGE):
        self.store = store
        self.cfg = cfg
        self.executor = executor
        self.clock = clock
        self.selector: Selector = selector_for(cfg)
        self.ports = PortPool(*port_range)
        self.running: Dict[int, RunningJob] = {}
        self.finished: Dict[int, str] = {}  # job_id -> completed / terminated_<reason>
        self._lock = threading.RLock()

    # -- requests --

    def handle_request(self, req: Request) -> Response:
        return handle_request(req, self.store, self.cfg, self.clock.now_ms())

    # -- scheduling --

    def scheduler_tick(self) -> Optional[RunningJob]:
        """Start one queued job if capacity allows, else do nothing.

        On a launch failure the selected job goes back to its original queue
        position and the error propagates.
        """
        now = self.clock.now_ms()
        with self._lock:
            if len(self.running) >= self.cfg.max_jobs:
                return None
            with self.store.exclusive():
                if self.store.queue_length() == 0:
                    return None
                try:
                    record = self.selector(self.store, now)
                except NoJobWaiting:
                    return None
            try:
                mapping = self.ports.allocate(record.request.ports)
            except PortExhausted:
                self.store.restore_to_queue(record)
                raise
            try:
                job = self.executor.start(record, now, mapping)
            except ExecutorFailure:
                self.ports.release(mapping)
                self.store.restore_to_queue(record)
                raise
            self.running[job.job_id] = job
            return job

    def complete_job(self, job_id: int) -> None:
        """Release a job that finished on its own (simulated completion)."""
        with self._lock:
            job = self.running.pop(job_id, None)
            if job is not None:
                self.ports.release(job.port_mappings)
                self.finished[job_id] = "completed"

    # -- monitoring --

    def begin_monitor_pass(self) -> Dict[int, float]:
        """First CPU sample for every job that has been up long enough."""
        now = self.clock.now_ms()
        samples: Dict[int, float] = {}
        with self._lock:
            jobs = list(self.running.values())
        for job in jobs:
            if (now - job.start_time_ms) / 1000.0 >= self.cfg.min_uptime_s:
                samples[job.job_id] = self.executor.sample_cpu(job)
        return samples

    def finish_monitor_pass(self, first_samples: Dict[int, float]) -> List[int]:
        """Second sample one interval later; queue idle jobs for termination.

        Utilization is the CPU-time delta over the sampling interval divided
        by the node's core count, as a percentage. Jobs that disappeared
        between samples are skipped.
        """
        idle: List[int] = []
        denom = self.cfg.sample_interval_s * self.executor.cores
        for job_id, first in first_samples.items():
            with self._lock:
                job = self.running.get(job_id)
            if job is None:
                continue
            pct = 100.0 * (self.executor.sample_cpu(job) - first) / denom
            if pct < self.cfg.idle_threshold_pct:
                idle.append(job_id)
        for job_id in idle:
            try:
                self.store.enqueue_termination(job_id, "idle")
            except Duplicate:
                pass
        return idle

    def monitor_pass(self) -> List[int]:
        """Blocking two-sample pass: sample, wait one interval, resample."""
        first = self.begin_monitor_pass()
        self.clock.sleep(self.cfg.sample_interval_s)
        return self.finish_monitor_pass(first)

    def drain_terminations(self) -> int:
        """Stop every job pending termination; count the ones actually stopped.

        Entries for jobs that are already gone are dropped silently.
        """
        stopped = 0
        while True:
            try:
                job_id, reason = self.store.pop_termination()
            except Empty:
                break
            with self._lock:
                job = self.running.pop(job_id, None)
            if job is None:
                continue
            self.executor.stop(job, self.cfg.stop_timeout_s)
            self.ports.release(job.port_mappings)
            self.finished[job_id] = f"terminated_{reason}"
            stopped += 1
        return stopped

    def monitor_loop(self, stop_event: threading.Event) -> None:
        """Wall-clock monitor: first pass one period after start, then one
        pass per period with the sampling wait counted inside the period."""
        if stop_event.wait(self.cfg.monitor_period_s):
            return
        while True:
            self.monitor_pass()
            self.drain_terminations()
            if stop_event.wait(max(0.0, self.cfg.monitor_period_s - self.cfg.sample_interval_s)):
                return

    def scheduler_loop(self, stop_event: threading.Event, interval_s: float = 0.2) -> None:
        """Wall-clock scheduler: keep starting jobs while capacity allows."""
        while not stop_event.is_set():
            try:
                started = self.scheduler_tick()
            except (ExecutorFailure, PortExhausted):
                started = None
            if started is None and stop_event.wait(interval_s):
                return

    # -- inspection --

    def job_state(self, job_id: int) -> dict:
        """Current lifecycle state of a job id, for status queries."""
        with self._lock:
            job = self.running.get(job_id)
            if job is not None:
                return {
                    "job_id": job_id,
                    "state": "started",
                    "port_mappings": dict(job.port_mappings),
                }
            if job_id in self.finished:
                return {"job_id": job_id, "state": self.finished[job_id]}
        found = self.store.lookup(job_id)
        if found is not None:
            return {"job_id": job_id, "state": found[0]}
        return {"job_id": job_id, "state": "unknown"}
