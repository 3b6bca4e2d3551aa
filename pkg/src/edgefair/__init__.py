"""Fair job scheduling for a single resource-constrained edge node.

Library surface: durable job store, four selection strategies, the node
runtime (admission, ticking, idle monitoring), a deterministic scenario
simulator, a selection-latency benchmark, and a FastAPI service wrapper.
"""

from .core import (
    DEFAULT_PRIORITY_WEIGHTS,
    STRATEGY_KINDS,
    ClientId,
    Clock,
    Duplicate,
    Empty,
    ExecutorFailure,
    InvalidConfig,
    JobRecord,
    JobRequest,
    NoJobWaiting,
    NotFound,
    PortExhausted,
    QueueFull,
    SchedulerConfig,
    SchedulerError,
    default_clients,
    load_config,
    parse_config,
    validate_config,
)
from .lifecycle import (
    EdgeNode,
    Executor,
    Invalid,
    InvalidRequest,
    NewJob,
    PortPool,
    Queued,
    QueuedForTermination,
    RejectedNoSpace,
    RemovedFromQueue,
    Request,
    Response,
    RunningJob,
    SimulatedExecutor,
    Started,
    Terminate,
    handle_request,
    response_to_wire,
)
from .simulator import (
    MetricsReport,
    ScenarioSpec,
    SelectionEvent,
    benchmark_overheads,
    generate_arrivals,
    replay_arrivals,
    run_scenario,
)
from .store import JobStore
from .strategies import (
    PriorityFrequencies,
    compute_priority_fractions,
    make_selector,
    select_client_fair,
    select_fcfs,
    select_hybrid,
    select_priority_fair,
    select_priority_level,
)

__version__ = "0.1.0"

__all__ = [
    "ClientId",
    "Clock",
    "DEFAULT_PRIORITY_WEIGHTS",
    "Duplicate",
    "EdgeNode",
    "Empty",
    "Executor",
    "ExecutorFailure",
    "Invalid",
    "InvalidConfig",
    "InvalidRequest",
    "JobRecord",
    "JobRequest",
    "JobStore",
    "MetricsReport",
    "NewJob",
    "NoJobWaiting",
    "NotFound",
    "PortExhausted",
    "PortPool",
    "PriorityFrequencies",
    "Queued",
    "QueuedForTermination",
    "QueueFull",
    "RejectedNoSpace",
    "RemovedFromQueue",
    "Request",
    "Response",
    "RunningJob",
    "ScenarioSpec",
    "SchedulerConfig",
    "SchedulerError",
    "SelectionEvent",
    "SimulatedExecutor",
    "Started",
    "STRATEGY_KINDS",
    "Terminate",
    "benchmark_overheads",
    "compute_priority_fractions",
    "default_clients",
    "generate_arrivals",
    "handle_request",
    "load_config",
    "make_selector",
    "parse_config",
    "replay_arrivals",
    "response_to_wire",
    "run_scenario",
    "select_client_fair",
    "select_fcfs",
    "select_hybrid",
    "select_priority_fair",
    "select_priority_level",
    "validate_config",
]
