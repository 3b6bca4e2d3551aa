"""Job-selection policies.

Four policies decide which queued job runs next on the node:

* ``fcfs``: oldest queued job, regardless of who submitted it.
* ``client_fair``: the waiting client with the fewest executed jobs goes
  first; within that client, oldest job wins.
* ``priority_fair``: priority levels are compared against per-level target
  weights; the highest waiting level whose executed share is still below its
  weight goes first, so low levels cannot starve while high levels still get
  the largest share.
* ``hybrid``: the priority level is chosen as in ``priority_fair``, then the
  least-served client among those waiting at that level supplies the job.

Every policy both returns the chosen record and archives it into the history
in one atomic step, so the frequency aggregates the next decision reads are
already up to date.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping

from .core import JobRecord, NoJobWaiting, NotFound, SchedulerConfig
from .store import JobStore

Selector = Callable[[JobStore, int], JobRecord]


@dataclass(frozen=True)
class PriorityFrequencies:
    """Executed-job share per waiting priority level.

    ``fractions[level]`` is executed-count(level) / total executed, or 0.0
    when either count is zero. Only levels currently waiting in the queue
    appear as keys.
    """

    fractions: Dict[int, float]
    total: int


def select_fcfs(store: JobStore, now_ms: int) -> JobRecord:
    """Archive and return the oldest queued job."""
    with store.exclusive():
        try:
            record = store.oldest()
        except NotFound:
            raise NoJobWaiting("queue is empty")
        store.move_to_history(record.job_id, now_ms)
        return record


def select_client_fair(store: JobStore, now_ms: int) -> JobRecord:
    """Archive and return the oldest job of the least-served waiting client.

    Ties on executed count break by ascending client name.
    """
    with store.exclusive():
        waiting = store.waiting_clients()
        if not waiting:
            raise NoJobWaiting("queue is empty")
        frequencies = {c.name: store.client_frequency(c) for c in waiting}
        chosen = min(waiting, key=lambda c: (frequencies[c.name], c.name))
        record = store.oldest_for_client(chosen)
        store.move_to_history(record.job_id, now_ms)
        return record


def compute_priority_fractions(store: JobStore) -> PriorityFrequencies:
    """Executed share for each waiting priority level.

    A level with no executed jobs, or an empty history overall, contributes
    a 0.0 fraction.
    """
    total = store.total_executed()
    fractions: Dict[int, float] = {}
    for level in store.waiting_priorities():
        count = store.priority_count(level)
        fractions[level] = count / total if count > 0 and total > 0 else 0.0
    return PriorityFrequencies(fractions=fractions, total=total)


def select_priority_level(frequencies: PriorityFrequencies, waiting: List[int],
                          weights: Mapping[int, float]) -> int:
    """Pick the level to serve next from the waiting levels (highest first).

    Scanning from the highest waiting level, the first level whose executed
    share is strictly below its weight wins. If every waiting level already
    meets its weight, the scan exhausts and the highest waiting level wins.
    """
    index = 0
    while True:
        level = waiting[index]
        if frequencies.fractions.get(level, 0.0) < weights[level]:
            return level
        if index == len(waiting) - 1:
            return waiting[0]
        index += 1


def select_priority_fair(store: JobStore, weights: Mapping[int, float],
                         now_ms: int) -> JobRecord:
    """Archive and return the oldest job at the weight-selected priority level."""
    with store.exclusive():
        waiting = store.waiting_priorities()
        if not waiting:
            raise NoJobWaiting("queue is empty")
        frequencies = compute_priority_fractions(store)
        level = select_priority_level(frequencies, waiting, weights)
        record = store.oldest_for_priority(level)
        store.move_to_history(record.job_id, now_ms)
        return record


def select_hybrid(store: JobStore, weights: Mapping[int, float],
                  now_ms: int) -> JobRecord:
    """Priority level as in ``priority_fair``, client as in ``client_fair``.

    The client argmin runs over clients that actually hold a queued job at
    the selected level, so the final lookup cannot come up empty; should the
    store mutate underneath regardless, the oldest job at the level is the
    fallback.
    """
    with store.exclusive():
        waiting = store.waiting_priorities()
        if not waiting:
            raise NoJobWaiting("queue is empty")
        frequencies = compute_priority_fractions(store)
        level = select_priority_level(frequencies, waiting, weights)
        candidates = store.waiting_clients(priority=level)
        if candidates:
            chosen = min(candidates, key=lambda c: (store.client_frequency(c), c.name))
            record = store.oldest_for(level, chosen)
        else:
            record = store.oldest_for_priority(level)
        store.move_to_history(record.job_id, now_ms)
        return record


def make_selector(strategy: str, weights: Mapping[int, float]) -> Selector:
    """Bind a strategy name to a ``(store, now_ms) -> JobRecord`` callable."""
    bound = dict(weights)
    if strategy == "fcfs":
        return select_fcfs
    if strategy == "client_fair":
        return select_client_fair
    if strategy == "priority_fair":
        return lambda store, now_ms: select_priority_fair(store, bound, now_ms)
    if strategy == "hybrid":
        return lambda store, now_ms: select_hybrid(store, bound, now_ms)
    raise ValueError(f"unknown strategy {strategy!r}")


def selector_for(cfg: SchedulerConfig) -> Selector:
    return make_selector(cfg.strategy, cfg.priority_weights)
