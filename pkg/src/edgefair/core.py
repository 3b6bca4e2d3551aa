"""Domain types, configuration and the clock shared by every other module.

All timestamps in this package are integer milliseconds. A wall clock counts
from the unix epoch, a virtual clock counts from zero and is advanced only by
its single driver (the event loop in :mod:`edgefair.simulator`).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Mapping, Tuple

STRATEGY_KINDS = ("fcfs", "client_fair", "priority_fair", "hybrid")

DEFAULT_PRIORITY_WEIGHTS: Dict[int, float] = {3: 0.50, 2: 0.35, 1: 0.15}

PORT_MIN = 1
PORT_MAX = 65535

WEIGHT_SUM_TOLERANCE = 1e-9


class SchedulerError(Exception):
    """Base class for every error raised by this package."""


class InvalidConfig(SchedulerError):
    def __init__(self, config_field: str, reason: str):
        super().__init__(f"invalid config field {config_field!r}: {reason}")
        self.field = config_field
        self.reason = reason


class QueueFull(SchedulerError):
    """Job queue is at its configured bound."""


class NotFound(SchedulerError):
    """No record matches the given id or filter."""


class Duplicate(SchedulerError):
    """Job id is already pending termination."""


class Empty(SchedulerError):
    """Termination queue has no entries."""


class NoJobWaiting(SchedulerError):
    """A selection was requested while the job queue is empty."""


class PortExhausted(SchedulerError):
    """Host port pool cannot satisfy the requested forwards."""


class ExecutorFailure(SchedulerError):
    def __init__(self, job_id: int, reason: str = "launch failed"):
        super().__init__(f"executor failed to start job {job_id}: {reason}")
        self.job_id = job_id


@dataclass(frozen=True, order=True)
class ClientId:
    """Identity of a client submitting jobs: name, network address and port."""

    name: str
    address: str = ""
    port: int = PORT_MIN

    def __post_init__(self):
        if not self.name:
            raise ValueError("client name must be non-empty")
        if not PORT_MIN <= self.port <= PORT_MAX:
            raise ValueError(f"client port {self.port} outside {PORT_MIN}-{PORT_MAX}")


@dataclass(frozen=True)
class JobRequest:
    """A client's request to run one job at a priority level.

    ``ports`` lists the ports the job needs forwarded; it may be empty and
    must not contain duplicates.
    """

    client: ClientId
    priority: int
    ports: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ports", tuple(self.ports))
        if self.priority < 1:
            raise ValueError(f"priority level must be >= 1, got {self.priority}")
        seen = set()
        for p in self.ports:
            if not PORT_MIN <= p <= PORT_MAX:
                raise ValueError(f"job port {p} outside {PORT_MIN}-{PORT_MAX}")
            if p in seen:
                raise ValueError(f"duplicate job port {p}")
            seen.add(p)


@dataclass(frozen=True)
class JobRecord:
    """A queued or executed job: store-assigned id plus the original request."""

    job_id: int
    request: JobRequest
    arrival_ms: int
    exec_start_ms: int | None = None

    @property
    def client(self) -> ClientId:
        return self.request.client

    @property
    def priority(self) -> int:
        return self.request.priority


@dataclass(frozen=True)
class SchedulerConfig:
    """Node capacities, queue bound, per-job resource units and timings.

    ``priority_weights`` maps each allowed priority level to the target
    long-run fraction of executed jobs for that level; the weights double as
    the starvation-avoidance thresholds used by the priority-aware policies.
    """

    max_jobs: int = 4
    queue_max: int = 300
    cpu_unit: float = 0.25  # fraction of node CPU per job
    mem_unit: float = 256.0  # megabytes per job
    strategy: str = "fcfs"
    priority_weights: Mapping[int, float] = field(
        default_factory=lambda: dict(DEFAULT_PRIORITY_WEIGHTS)
    )
    idle_threshold_pct: float = 10.0
    monitor_period_s: float = 120.0
    sample_interval_s: float = 10.0
    min_uptime_s: float = 60.0
    stop_timeout_s: float = 10.0
    max_job_duration_s: float = 600.0

    @property
    def priority_levels(self) -> Tuple[int, ...]:
        """Allowed levels, highest first."""
        return tuple(sorted(self.priority_weights, reverse=True))


_DURATION_FIELDS = (
    "monitor_period_s",
    "sample_interval_s",
    "min_uptime_s",
    "stop_timeout_s",
    "max_job_duration_s",
)


def validate_config(cfg: SchedulerConfig) -> SchedulerConfig:
    """Check every config invariant and return the normalized config.

    Raises :class:`InvalidConfig` naming the first offending field.
    """
    if cfg.max_jobs < 1:
        raise InvalidConfig("max_jobs", "must be >= 1")
    if cfg.queue_max < 1:
        raise InvalidConfig("queue_max", "must be >= 1")
    if not 0 < cfg.cpu_unit <= 1:
        raise InvalidConfig("cpu_unit", "must be a fraction in (0, 1]")
    if cfg.mem_unit <= 0:
        raise InvalidConfig("mem_unit", "must be positive")
    if cfg.strategy not in STRATEGY_KINDS:
        raise InvalidConfig(
            "strategy", f"must be one of {', '.join(STRATEGY_KINDS)}"
        )
    if not cfg.priority_weights:
        raise InvalidConfig("priority_weights", "at least one level required")
    weights: Dict[int, float] = {}
    for level, weight in cfg.priority_weights.items():
        try:
            level = int(level)
        except (TypeError, ValueError):
            raise InvalidConfig("priority_weights", f"level {level!r} is not an integer")
        if level < 1:
            raise InvalidConfig("priority_weights", f"level {level} must be >= 1")
        weight = float(weight)
        if not 0 < weight <= 1:
            raise InvalidConfig(
                "priority_weights", f"weight for level {level} must be in (0, 1]"
            )
        weights[level] = weight
    if abs(sum(weights.values()) - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise InvalidConfig(
            "priority_weights", f"weights must sum to 1, got {sum(weights.values())}"
        )
    for name in _DURATION_FIELDS:
        if getattr(cfg, name) <= 0:
            raise InvalidConfig(name, "must be positive")
    if not 0 <= cfg.idle_threshold_pct <= 100:
        raise InvalidConfig("idle_threshold_pct", "must be within 0-100")
    if cfg.sample_interval_s > cfg.monitor_period_s:
        raise InvalidConfig(
            "sample_interval_s", "sampling interval cannot exceed the monitor period"
        )
    return replace(cfg, priority_weights=weights)


_INT_KEYS = {"max_jobs", "queue_max"}
_FLOAT_KEYS = {
    "cpu_unit",
    "mem_unit",
    "idle_threshold_pct",
    "monitor_period_s",
    "sample_interval_s",
    "min_uptime_s",
    "stop_timeout_s",
    "max_job_duration_s",
}


def parse_config(text: str) -> SchedulerConfig:
    """Parse the flat ``key=value`` config format.

    One key per line; priority weights are given as ``weight.<level>=<fraction>``.
    Blank lines and ``#`` comments are ignored; any unknown key is an error.
    """
    kwargs: Dict[str, object] = {}
    weights: Dict[int, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidConfig(line, f"line {lineno}: expected key=value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        try:
            if key.startswith("weight."):
                weights[int(key[len("weight."):])] = float(value)
            elif key in _INT_KEYS:
                kwargs[key] = int(value)
            elif key in _FLOAT_KEYS:
                kwargs[key] = float(value)
            elif key == "strategy":
                kwargs[key] = value
            else:
                raise InvalidConfig(key, f"line {lineno}: unknown key")
        except ValueError:
            raise InvalidConfig(key, f"line {lineno}: cannot parse value {value!r}")
    if weights:
        kwargs["priority_weights"] = weights
    return validate_config(SchedulerConfig(**kwargs))  # type: ignore[arg-type]


def load_config(path: str) -> SchedulerConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


class Clock:
    """Monotone millisecond time source.

    Wall mode follows the system clock (guarded against steps backwards);
    virtual mode starts at ``start_ms`` and moves only via :meth:`advance_ms`.
    """

    def __init__(self, mode: str = "wall", start_ms: int = 0):
        if mode not in ("wall", "virtual"):
            raise ValueError(f"unknown clock mode {mode!r}")
        self.mode = mode
        self._now = int(start_ms)
        if mode == "wall":
            self._now = int(time.time() * 1000)

    def now_ms(self) -> int:
        if self.mode == "wall":
            self._now = max(self._now, int(time.time() * 1000))
        return self._now

    def advance_ms(self, delta_ms: int) -> None:
        if self.mode != "virtual":
            raise ValueError("only a virtual clock can be advanced explicitly")
        if delta_ms < 0:
            raise ValueError("clock cannot move backwards")
        self._now += int(delta_ms)

    def sleep(self, seconds: float) -> None:
        """Block in wall mode; jump forward in virtual mode."""
        if self.mode == "wall":
            time.sleep(seconds)
        else:
            self.advance_ms(int(round(seconds * 1000)))


def default_clients(names: Iterable[str] = "ABCDEF") -> Tuple[ClientId, ...]:
    """Synthetic client identities used by the simulator and benchmarks."""
    return tuple(
        ClientId(name=n, address=f"192.0.2.{i + 1}", port=9000 + i)
        for i, n in enumerate(names)
    )
