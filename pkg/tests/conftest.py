import random

import pytest

from edgefair import (
    ClientId,
    Clock,
    EdgeNode,
    JobRequest,
    JobStore,
    SchedulerConfig,
    SimulatedExecutor,
    default_clients,
    validate_config,
)

from oracle import MirrorState


CLIENTS = default_clients()


@pytest.fixture
def clients():
    return CLIENTS


@pytest.fixture
def store():
    s = JobStore(queue_max=1000)
    yield s
    s.close()


def make_node(cfg: SchedulerConfig = None, queue_max: int = None,
              clock: Clock = None) -> EdgeNode:
    cfg = validate_config(cfg or SchedulerConfig())
    clock = clock or Clock("virtual")
    store = JobStore(queue_max=queue_max or cfg.queue_max)
    executor = SimulatedExecutor(clock)
    return EdgeNode(store, cfg, executor, clock)


def random_state(rng: random.Random, max_queue: int = 50, max_history: int = 500,
                 queue_max: int = 1000, min_queue: int = 1):
    """Build a random store plus the matching independent mirror snapshot.

    History is created through the public enqueue/move API so the store's
    counters are exercised the same way production code exercises them.
    """
    store = JobStore(queue_max=queue_max)
    mirror = MirrorState()
    now = 0
    for _ in range(rng.randint(0, max_history)):
        client = rng.choice(CLIENTS)
        level = rng.randint(1, 3)
        record = store.enqueue_job(JobRequest(client=client, priority=level), now)
        store.move_to_history(record.job_id, now)
        mirror.client_freq[client.name] = mirror.client_freq.get(client.name, 0) + 1
        mirror.level_count[level] = mirror.level_count.get(level, 0) + 1
        mirror.total += 1
        now += rng.randint(0, 2)
    for _ in range(rng.randint(min_queue, max_queue)):
        client = rng.choice(CLIENTS)
        level = rng.randint(1, 3)
        record = store.enqueue_job(JobRequest(client=client, priority=level), now)
        mirror.queued.append((record.job_id, client.name, level, now))
        now += rng.randint(0, 2)  # occasional arrival-time ties
    return store, mirror
