"""Straight-line reference implementations of the four selection rules.

These run against a plain-Python snapshot of the queue and the executed-job
tallies, deliberately sharing no code with the package, so tests can check
every strategy decision against an independent evaluation of the same rules.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

QueuedJob = Tuple[int, str, int, int]  # (job_id, client_name, priority, arrival_ms)


@dataclass
class MirrorState:
    queued: List[QueuedJob] = field(default_factory=list)
    client_freq: Dict[str, int] = field(default_factory=dict)
    level_count: Dict[int, int] = field(default_factory=dict)
    total: int = 0

    def apply_execution(self, job_id: int) -> None:
        job = next(j for j in self.queued if j[0] == job_id)
        self.queued.remove(job)
        self.client_freq[job[1]] = self.client_freq.get(job[1], 0) + 1
        self.level_count[job[2]] = self.level_count.get(job[2], 0) + 1
        self.total += 1


def _oldest(jobs: List[QueuedJob]) -> QueuedJob:
    return min(jobs, key=lambda j: (j[3], j[0]))


def fcfs_choice(state: MirrorState) -> Optional[int]:
    if not state.queued:
        return None
    return _oldest(state.queued)[0]


def client_fair_choice(state: MirrorState) -> Optional[int]:
    if not state.queued:
        return None
    waiting = sorted({j[1] for j in state.queued})
    freq = {c: state.client_freq.get(c, 0) for c in waiting}
    chosen = min(waiting, key=lambda c: (freq[c], c))
    return _oldest([j for j in state.queued if j[1] == chosen])[0]


def level_choice(state: MirrorState, weights: Dict[int, float]) -> int:
    waiting = sorted({j[2] for j in state.queued}, reverse=True)
    fractions = {}
    for level in waiting:
        count = state.level_count.get(level, 0)
        if count > 0 and state.total > 0:
            fractions[level] = count / state.total
        else:
            fractions[level] = 0.0
    chosen = -1
    index = 0
    while chosen == -1:
        if fractions[waiting[index]] < weights[waiting[index]]:
            chosen = waiting[index]
        elif index == len(waiting) - 1:
            chosen = waiting[0]
        else:
            index += 1
    return chosen


def priority_fair_choice(state: MirrorState, weights: Dict[int, float]) -> Optional[int]:
    if not state.queued:
        return None
    level = level_choice(state, weights)
    return _oldest([j for j in state.queued if j[2] == level])[0]


def hybrid_choice(state: MirrorState, weights: Dict[int, float]) -> Optional[int]:
    if not state.queued:
        return None
    level = level_choice(state, weights)
    at_level = [j for j in state.queued if j[2] == level]
    clients = sorted({j[1] for j in at_level})
    chosen = min(clients, key=lambda c: (state.client_freq.get(c, 0), c))
    return _oldest([j for j in at_level if j[1] == chosen])[0]


def choice_for(strategy: str, state: MirrorState, weights: Dict[int, float]) -> Optional[int]:
    if strategy == "fcfs":
        return fcfs_choice(state)
    if strategy == "client_fair":
        return client_fair_choice(state)
    if strategy == "priority_fair":
        return priority_fair_choice(state, weights)
    if strategy == "hybrid":
        return hybrid_choice(state, weights)
    raise ValueError(strategy)
