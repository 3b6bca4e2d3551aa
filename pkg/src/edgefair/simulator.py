"""Deterministic virtual-time replay of workload scenarios plus the
decision-latency benchmark.

Three workload shapes are built in: ``equal`` (every client submits the same
number of jobs, evenly spread over the window), ``random`` (seeded per-client
job counts with exponential inter-arrival times) and ``gaussian`` (a fixed
bell-shaped count profile across clients, with the low-count clients confined
to one half of the window). A replay drives arrivals, scheduler ticks, job
completions and monitor passes through a single event loop on a virtual
clock, so a one-hour window runs in well under a second and two runs with the
same seed produce identical reports.
"""

from __future__ import annotations

import gc
import heapq
import json
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .core import (
    DEFAULT_PRIORITY_WEIGHTS,
    STRATEGY_KINDS,
    ClientId,
    Clock,
    JobRequest,
    SchedulerConfig,
    default_clients,
)
from .lifecycle import EdgeNode, NewJob, Request, SimulatedExecutor
from .store import JobStore
from .strategies import make_selector

SCENARIO_KINDS = ("equal", "random", "gaussian")

GAUSSIAN_COUNTS = (15, 45, 90, 90, 45, 15)

DEFAULT_BENCH_SIZES = (10**3, 10**4, 10**5, 10**6)


@dataclass(frozen=True)
class ScenarioSpec:
    """Workload generator parameters for one scenario run."""

    kind: str
    clients: Tuple[ClientId, ...] = field(default_factory=default_clients)
    window_s: int = 3600
    seed: int = 0
    job_duration_s: int = 300
    jobs_per_client: int = 50  # exact for equal, upper bound for random
    gaussian_counts: Tuple[int, ...] = GAUSSIAN_COUNTS

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.kind == "gaussian" and len(self.gaussian_counts) != len(self.clients):
            raise ValueError("gaussian counts must list one count per client")
        if self.window_s <= 0 or self.job_duration_s <= 0 or self.jobs_per_client <= 0:
            raise ValueError("window, duration and job counts must be positive")


@dataclass(frozen=True)
class SelectionEvent:
    """One scheduling decision during a replay (kept out of the JSON report)."""

    ts_ms: int
    job_id: int
    client: str
    priority: int
    waiting_clients: Tuple[str, ...]


@dataclass
class MetricsReport:
    """Per-client and per-priority execution tallies for one replay."""

    scenario: str
    strategy: str
    seed: int
    window_s: int
    arrival_model: str
    per_client_executed: Dict[str, int]
    per_priority_pct: Dict[int, float]
    rejected: int
    executed_total: int
    queued_residual: int
    decision_latencies: List[float] = field(default_factory=list, repr=False)
    selections: List[SelectionEvent] = field(default_factory=list, repr=False)

    def to_json(self) -> str:
        """Deterministic JSON form; timing data is excluded on purpose so two
        identical runs serialize byte-identically."""
        payload = {
            "scenario": self.scenario,
            "strategy": self.strategy,
            "seed": self.seed,
            "window_s": self.window_s,
            "arrival_model": self.arrival_model,
            "per_client_executed": self.per_client_executed,
            "per_priority_pct": {str(k): v for k, v in self.per_priority_pct.items()},
            "rejected": self.rejected,
            "executed_total": self.executed_total,
            "queued_residual": self.queued_residual,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def write(self, out_dir: str | Path) -> None:
        """Write ``report.json``, ``per_client.csv`` and ``per_priority.csv``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json(), encoding="utf-8")
        lines = ["client,count"]
        lines += [f"{c},{n}" for c, n in sorted(self.per_client_executed.items())]
        (out / "per_client.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        lines = ["level,pct"]
        lines += [f"{lvl},{pct:.4f}" for lvl, pct in sorted(self.per_priority_pct.items())]
        (out / "per_priority.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- arrival generation ---------------------------------------------------------


def _equal_priority_counts(n: int, levels: Sequence[int]) -> Dict[int, int]:
    """Split n jobs across levels as evenly as possible, remainder to the
    lowest levels (50 jobs over three levels gives 17/17/16)."""
    base, remainder = divmod(n, len(levels))
    counts = {}
    for i, level in enumerate(sorted(levels)):
        counts[level] = base + (1 if i < remainder else 0)
    return counts


def generate_arrivals(spec: ScenarioSpec) -> List[Tuple[int, JobRequest]]:
    """Produce the time-ordered ``(timestamp_ms, request)`` list for a spec.

    Deterministic for a fixed seed; ties on the timestamp keep client order.
    """
    rng = random.Random(spec.seed)
    window_ms = spec.window_s * 1000
    half_ms = window_ms // 2
    arrivals: List[Tuple[int, int, JobRequest]] = []  # (ts, gen_seq, request)
    seq = 0

    def emit(ts: int, client: ClientId, priority: int):
        nonlocal seq
        arrivals.append((ts, seq, JobRequest(client=client, priority=priority)))
        seq += 1

    if spec.kind == "equal":
        split = _equal_priority_counts(spec.jobs_per_client, (1, 2, 3))
        spacing = window_ms // spec.jobs_per_client
        for client in spec.clients:
            priorities = [lvl for lvl in sorted(split) for _ in range(split[lvl])]
            rng.shuffle(priorities)
            for i, priority in enumerate(priorities):
                emit(i * spacing, client, priority)
    elif spec.kind == "random":
        for client in spec.clients:
            count = rng.randint(1, spec.jobs_per_client)
            mean_gap = window_ms / count
            t = 0.0
            for _ in range(count):
                t += rng.expovariate(1.0 / mean_gap)
                if t >= window_ms:
                    break
                emit(int(t), client, rng.choice((1, 2, 3)))
    else:  # gaussian
        for idx, (client, count) in enumerate(zip(spec.clients, spec.gaussian_counts)):
            if idx < len(spec.clients) // 3:
                start, span = half_ms, half_ms  # first clients arrive late
            elif idx >= 2 * len(spec.clients) // 3:
                start, span = 0, half_ms  # last clients arrive early
            else:
                start, span = 0, window_ms  # middle clients arrive throughout
            spacing = span // count
            for i in range(count):
                emit(start + i * spacing, client, rng.choice((1, 2, 3)))
    arrivals.sort(key=lambda item: (item[0], item[1]))
    return [(ts, req) for ts, _, req in arrivals]


ARRIVAL_MODEL_NOTES = {
    "equal": "equal: per-client jobs evenly spaced over the window",
    "random": "random: seeded per-client counts with exponential inter-arrival times",
    "gaussian": "gaussian: fixed per-client counts; early/late clients confined to one half-window",
}


# -- event loop -------------------------------------------------------------------


class EventLoop:
    """Minimal discrete-event loop driving a virtual clock.

    Events fire in timestamp order, ties in scheduling order; the clock is
    advanced to each event's timestamp before its callback runs.
    """

    def __init__(self, clock: Clock):
        self.clock = clock
        self._heap: List[Tuple[int, int, Callable[[], None]]] = []
        self._seq = 0

    def schedule(self, ts_ms: int, fn: Callable[[], None]) -> None:
        if ts_ms < self.clock.now_ms():
            raise ValueError("cannot schedule an event in the past")
        heapq.heappush(self._heap, (int(ts_ms), self._seq, fn))
        self._seq += 1

    def run_until(self, end_ms: int) -> None:
        """Run every event with timestamp <= end_ms."""
        while self._heap and self._heap[0][0] <= end_ms:
            ts, _, fn = heapq.heappop(self._heap)
            self.clock.advance_ms(ts - self.clock.now_ms())
            fn()
        if self.clock.now_ms() < end_ms:
            self.clock.advance_ms(end_ms - self.clock.now_ms())


def schedule_monitor(loop: EventLoop, node: EdgeNode, end_ms: int,
                     on_pass: Optional[Callable[[int], None]] = None) -> None:
    """Schedule recurring two-phase monitor passes onto an event loop.

    The first pass begins one monitor period into the run; the sampling wait
    sits inside the period. ``on_pass`` is invoked with the begin timestamp of
    every pass that runs.
    """
    period_ms = int(node.cfg.monitor_period_s * 1000)
    interval_ms = int(node.cfg.sample_interval_s * 1000)

    def begin():
        ts = loop.clock.now_ms()
        if on_pass is not None:
            on_pass(ts)
        first = node.begin_monitor_pass()

        def finish():
            node.finish_monitor_pass(first)
            node.drain_terminations()

        loop.schedule(ts + interval_ms, finish)
        if ts + period_ms <= end_ms:
            loop.schedule(ts + period_ms, begin)

    if period_ms <= end_ms:
        loop.schedule(period_ms, begin)


# -- replay -----------------------------------------------------------------------


def replay_arrivals(arrivals: Sequence[Tuple[int, JobRequest]], cfg: SchedulerConfig,
                    *, window_s: int = 3600, job_duration_s: int = 300,
                    scenario: str = "custom", seed: int = 0,
                    arrival_model: str = "custom",
                    clients: Optional[Sequence[ClientId]] = None,
                    store: Optional[JobStore] = None) -> MetricsReport:
    """Replay a prepared arrival list against a fresh node in virtual time.

    The scheduler stops starting new jobs at the end of the window; the run
    then drains for two job durations so everything in flight completes.
    """
    clock = Clock("virtual")
    if store is None:
        store = JobStore(":memory:", queue_max=cfg.queue_max)
    executor = SimulatedExecutor(clock)
    node = EdgeNode(store, cfg, executor, clock)
    loop = EventLoop(clock)
    window_ms = window_s * 1000
    duration_ms = job_duration_s * 1000
    end_ms = window_ms + 2 * duration_ms

    if clients is None:
        seen = sorted({req.client for _, req in arrivals}, key=lambda c: c.name)
        clients = tuple(seen)

    rejected = 0
    latencies: List[float] = []
    selections: List[SelectionEvent] = []

    def pump():
        nonlocal rejected
        while clock.now_ms() < window_ms:
            if len(node.running) >= cfg.max_jobs or store.queue_length() == 0:
                break
            waiting = tuple(c.name for c in store.waiting_clients())
            t0 = time.perf_counter()
            job = node.scheduler_tick()
            dt = time.perf_counter() - t0
            if job is None:
                break
            latencies.append(dt)
            selections.append(
                SelectionEvent(clock.now_ms(), job.job_id, job.client.name,
                               job.priority, waiting)
            )
            loop.schedule(clock.now_ms() + duration_ms, make_completion(job.job_id))

    def make_completion(job_id: int):
        def completion():
            node.complete_job(job_id)
            pump()
        return completion

    def make_arrival(req: JobRequest):
        def arrival():
            nonlocal rejected
            response = node.handle_request(Request(client=req.client,
                                                   body=NewJob(req.priority, req.ports)))
            if response.status == "rejected_no_space":
                rejected += 1
            pump()
        return arrival

    for ts, req in arrivals:
        loop.schedule(ts, make_arrival(req))
    schedule_monitor(loop, node, end_ms)
    loop.run_until(end_ms)

    total = store.total_executed()
    per_priority = {}
    for level in sorted(cfg.priority_weights):
        count = store.priority_count(level)
        per_priority[level] = 100.0 * count / total if total else 0.0
    report = MetricsReport(
        scenario=scenario,
        strategy=cfg.strategy,
        seed=seed,
        window_s=window_s,
        arrival_model=arrival_model,
        per_client_executed={c.name: store.client_frequency(c) for c in clients},
        per_priority_pct=per_priority,
        rejected=rejected,
        executed_total=total,
        queued_residual=store.queue_length(),
        decision_latencies=latencies,
        selections=selections,
    )
    return report


def run_scenario(spec: ScenarioSpec, cfg: SchedulerConfig) -> MetricsReport:
    """Generate a scenario's arrivals and replay them."""
    arrivals = generate_arrivals(spec)
    return replay_arrivals(
        arrivals,
        cfg,
        window_s=spec.window_s,
        job_duration_s=spec.job_duration_s,
        scenario=spec.kind,
        seed=spec.seed,
        arrival_model=ARRIVAL_MODEL_NOTES[spec.kind],
        clients=spec.clients,
    )


# -- overhead benchmark -------------------------------------------------------------


@dataclass(frozen=True)
class BenchRow:
    strategy: str
    history_size: int
    mean_latency_ms: float
    trials: int


def benchmark_overheads(strategies: Sequence[str] = STRATEGY_KINDS,
                        history_sizes: Sequence[int] = DEFAULT_BENCH_SIZES,
                        trials: int = 25,
                        probe_jobs_per_client: int = 10,
                        seed: int = 0) -> List[BenchRow]:
    """Mean selection latency per (strategy, history size), in rescan mode.

    Each cell gets a freshly seeded store whose aggregates are answered by
    scanning the history table, which is the behaviour whose cost grows with
    history size. A fixed probe queue feeds the timed selections; garbage
    collection is paused around the timed region to stabilize the means.
    """
    for strategy in strategies:
        make_selector(strategy, DEFAULT_PRIORITY_WEIGHTS)  # validate names early
    sizes = sorted(history_sizes)
    clients = default_clients()
    rows: List[BenchRow] = []
    probe_total = probe_jobs_per_client * len(clients)
    if trials > probe_total - 1:
        raise ValueError("probe queue too small for the requested trials")
    for size in sizes:
        for strategy in strategies:
            store = JobStore(":memory:", queue_max=probe_total + 1,
                             rescan_aggregates=True)
            store.seed_history(size, clients, seed=seed)
            selector = make_selector(strategy, DEFAULT_PRIORITY_WEIGHTS)
            now = 0
            for i in range(probe_jobs_per_client):
                for j, client in enumerate(clients):
                    level = (i + j) % 3 + 1
                    store.enqueue_job(JobRequest(client=client, priority=level), now)
                    now += 1
            selector(store, now)  # warm caches before timing
            gc_was_enabled = gc.isenabled()
            gc.disable()
            try:
                elapsed = 0.0
                for _ in range(trials):
                    now += 1
                    t0 = time.perf_counter()
                    selector(store, now)
                    elapsed += time.perf_counter() - t0
            finally:
                if gc_was_enabled:
                    gc.enable()
            rows.append(BenchRow(strategy=strategy, history_size=size,
                                 mean_latency_ms=elapsed / trials * 1000.0,
                                 trials=trials))
            store.close()
    return rows


def bench_rows_csv(rows: Sequence[BenchRow]) -> str:
    lines = ["strategy,size,mean_latency_ms"]
    lines += [f"{r.strategy},{r.history_size},{r.mean_latency_ms:.6f}" for r in rows]
    return "\n".join(lines) + "\n"
