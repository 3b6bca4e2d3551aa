"""Durable job storage: queue, execution history and termination queue.

Backed by a single SQLite file (or ``:memory:``). Frequency aggregates are
kept as incrementally maintained counters; ``rescan_aggregates=True`` answers
the same queries by scanning the history table instead, which is what the
overhead benchmark uses to expose how lookup cost grows with history size.
"""

from __future__ import annotations

import csv
import json
import random
import sqlite3
import threading
from collections import Counter
from contextlib import contextmanager
from typing import IO, Iterable, List, Optional, Sequence, Tuple

from .core import (
    ClientId,
    Duplicate,
    Empty,
    JobRecord,
    JobRequest,
    NotFound,
    QueueFull,
)

_SCHEMA = """
CREATE TABLE IF NOT EXISTS queue (
    job_id      INTEGER PRIMARY KEY,
    client      TEXT    NOT NULL,
    client_addr TEXT    NOT NULL,
    client_port INTEGER NOT NULL,
    priority    INTEGER NOT NULL,
    ports       TEXT    NOT NULL,
    arrival_ms  INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS history (
    job_id        INTEGER PRIMARY KEY,
    client        TEXT    NOT NULL,
    client_addr   TEXT    NOT NULL,
    client_port   INTEGER NOT NULL,
    priority      INTEGER NOT NULL,
    ports         TEXT    NOT NULL,
    arrival_ms    INTEGER NOT NULL,
    exec_start_ms INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS history_by_client ON history(client);
CREATE INDEX IF NOT EXISTS history_by_priority ON history(priority);
CREATE TABLE IF NOT EXISTS terminations (
    seq    INTEGER PRIMARY KEY AUTOINCREMENT,
    job_id INTEGER NOT NULL UNIQUE,
    reason TEXT    NOT NULL
);
CREATE TABLE IF NOT EXISTS counters (
    key   TEXT PRIMARY KEY,
    value INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS meta (
    key   TEXT PRIMARY KEY,
    value INTEGER NOT NULL
);
"""

TERMINATION_REASONS = ("client_request", "idle")

DUMP_HEADER = ("job_id", "client", "priority", "arrival_ms", "exec_start_ms")


def _record_from_row(row: Sequence, executed: bool = False) -> JobRecord:
    client = ClientId(name=row[1], address=row[2], port=row[3])
    request = JobRequest(client=client, priority=row[4], ports=tuple(json.loads(row[5])))
    exec_start = row[7] if executed else None
    return JobRecord(job_id=row[0], request=request, arrival_ms=row[6], exec_start_ms=exec_start)


class JobStore:
    """Single-writer store holding the job queue, history and termination queue.

    All mutations are serialized through one lock; readers of a closed-over
    snapshot (e.g. CSV dump) take the same lock so no caller ever observes a
    partially applied mutation.
    """

    def __init__(self, path: str = ":memory:", queue_max: int = 300,
                 rescan_aggregates: bool = False):
        if queue_max < 1:
            raise ValueError("queue_max must be >= 1")
        self.path = path
        self.queue_max = queue_max
        self.rescan_aggregates = rescan_aggregates
        self.op_counts: Counter = Counter()
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(path, check_same_thread=False)
        self._conn.executescript(_SCHEMA)
        self._conn.execute(
            "INSERT OR IGNORE INTO meta(key, value) VALUES('next_job_id', 1)"
        )
        self._conn.commit()

    def close(self) -> None:
        self._conn.close()

    @contextmanager
    def exclusive(self):
        """Hold the writer lock across a multi-query read-modify-write."""
        with self._lock:
            yield self

    def reset_op_counts(self) -> None:
        self.op_counts.clear()

    # -- queue ---------------------------------------------------------------

    def _next_job_id(self) -> int:
        row = self._conn.execute(
            "SELECT value FROM meta WHERE key='next_job_id'"
        ).fetchone()
        job_id = int(row[0])
        self._conn.execute(
            "UPDATE meta SET value=? WHERE key='next_job_id'", (job_id + 1,)
        )
        return job_id

    def queue_length(self) -> int:
        return self._conn.execute("SELECT COUNT(*) FROM queue").fetchone()[0]

    def enqueue_job(self, request: JobRequest, now_ms: int) -> JobRecord:
        """Append a request to the queue with a fresh job id.

        Raises :class:`QueueFull` when the queue is at ``queue_max``; the
        caller is expected to have checked admission already, this is defense
        in depth.
        """
        with self._lock:
            if self.queue_length() >= self.queue_max:
                raise QueueFull(f"queue already holds {self.queue_max} jobs")
            job_id = self._next_job_id()
            self._conn.execute(
                "INSERT INTO queue VALUES(?,?,?,?,?,?,?)",
                (
                    job_id,
                    request.client.name,
                    request.client.address,
                    request.client.port,
                    request.priority,
                    json.dumps(list(request.ports)),
                    int(now_ms),
                ),
            )
            self._conn.commit()
            return JobRecord(job_id=job_id, request=request, arrival_ms=int(now_ms))

    def _queue_row(self, job_id: int) -> Sequence:
        row = self._conn.execute(
            "SELECT * FROM queue WHERE job_id=?", (job_id,)
        ).fetchone()
        if row is None:
            raise NotFound(f"job {job_id} is not in the queue")
        return row

    def remove_from_queue(self, job_id: int) -> JobRecord:
        with self._lock:
            row = self._queue_row(job_id)
            self._conn.execute("DELETE FROM queue WHERE job_id=?", (job_id,))
            self._conn.commit()
            return _record_from_row(row)

    def move_to_history(self, job_id: int, exec_start_ms: int) -> JobRecord:
        """Archive a queued job as executed and bump the frequency counters."""
        with self._lock:
            row = self._queue_row(job_id)
            self._conn.execute("DELETE FROM queue WHERE job_id=?", (job_id,))
            self._conn.execute(
                "INSERT INTO history VALUES(?,?,?,?,?,?,?,?)",
                tuple(row) + (int(exec_start_ms),),
            )
            self._bump_counters([("total", 1), (f"client:{row[1]}", 1), (f"priority:{row[4]}", 1)])
            self._conn.commit()
            return _record_from_row(tuple(row) + (int(exec_start_ms),), executed=True)

    def restore_to_queue(self, record: JobRecord) -> None:
        """Undo an archival after a failed launch, putting the job back in
        its original queue position (same id, same arrival time)."""
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM history WHERE job_id=?", (record.job_id,)
            ).fetchone()
            if row is None:
                raise NotFound(f"job {record.job_id} is not in the history")
            self._conn.execute("DELETE FROM history WHERE job_id=?", (record.job_id,))
            self._conn.execute("INSERT INTO queue VALUES(?,?,?,?,?,?,?)", tuple(row[:7]))
            self._bump_counters([("total", -1), (f"client:{row[1]}", -1), (f"priority:{row[4]}", -1)])
            self._conn.commit()

    def _bump_counters(self, deltas: Iterable[Tuple[str, int]]) -> None:
        self._conn.executemany(
            "INSERT INTO counters(key, value) VALUES(?, ?) "
            "ON CONFLICT(key) DO UPDATE SET value = value + excluded.value",
            deltas,
        )

    # -- aggregate queries -----------------------------------------------------

    def _counter(self, key: str) -> int:
        row = self._conn.execute("SELECT value FROM counters WHERE key=?", (key,)).fetchone()
        return int(row[0]) if row else 0

    def waiting_clients(self, priority: Optional[int] = None) -> List[ClientId]:
        """Distinct clients with at least one queued job, ascending by name.

        With ``priority`` given, only clients holding a queued job at that
        level are returned.
        """
        self.op_counts["waiting_clients"] += 1
        where = "" if priority is None else "WHERE priority=?"
        args = () if priority is None else (priority,)
        rows = self._conn.execute(
            f"SELECT client, client_addr, client_port FROM queue "
            f"WHERE job_id IN (SELECT MIN(job_id) FROM queue {where} GROUP BY client) "
            f"ORDER BY client",
            args,
        ).fetchall()
        return [ClientId(name=r[0], address=r[1], port=r[2]) for r in rows]

    def waiting_priorities(self) -> List[int]:
        """Distinct queued priority levels, highest first."""
        self.op_counts["waiting_priorities"] += 1
        rows = self._conn.execute(
            "SELECT DISTINCT priority FROM queue ORDER BY priority DESC"
        ).fetchall()
        return [r[0] for r in rows]

    def client_frequency(self, client: ClientId | str) -> int:
        """Number of executed jobs belonging to this client."""
        self.op_counts["client_frequency"] += 1
        name = client.name if isinstance(client, ClientId) else client
        if self.rescan_aggregates:
            return self._conn.execute(
                "SELECT COUNT(*) FROM history WHERE client=?", (name,)
            ).fetchone()[0]
        return self._counter(f"client:{name}")

    def priority_count(self, level: int) -> int:
        """Number of executed jobs at this priority level."""
        self.op_counts["priority_count"] += 1
        if self.rescan_aggregates:
            return self._conn.execute(
                "SELECT COUNT(*) FROM history WHERE priority=?", (level,)
            ).fetchone()[0]
        return self._counter(f"priority:{level}")

    def total_executed(self) -> int:
        self.op_counts["total_executed"] += 1
        if self.rescan_aggregates:
            return self._conn.execute("SELECT COUNT(*) FROM history").fetchone()[0]
        return self._counter("total")

    # -- oldest-entry lookups ---------------------------------------------------

    _OLDEST = "SELECT * FROM queue {where} ORDER BY arrival_ms, job_id LIMIT 1"

    def _oldest(self, op: str, where: str, args: Tuple) -> JobRecord:
        self.op_counts[op] += 1
        row = self._conn.execute(self._OLDEST.format(where=where), args).fetchone()
        if row is None:
            raise NotFound("no queued job matches the filter")
        return _record_from_row(row)

    def oldest(self) -> JobRecord:
        return self._oldest("oldest", "", ())

    def oldest_for_client(self, client: ClientId | str) -> JobRecord:
        name = client.name if isinstance(client, ClientId) else client
        return self._oldest("oldest_for_client", "WHERE client=?", (name,))

    def oldest_for_priority(self, level: int) -> JobRecord:
        return self._oldest("oldest_for_priority", "WHERE priority=?", (level,))

    def oldest_for(self, level: int, client: ClientId | str) -> JobRecord:
        name = client.name if isinstance(client, ClientId) else client
        return self._oldest("oldest_for", "WHERE priority=? AND client=?", (level, name))

    # -- termination queue -------------------------------------------------------

    def enqueue_termination(self, job_id: int, reason: str) -> None:
        if reason not in TERMINATION_REASONS:
            raise ValueError(f"unknown termination reason {reason!r}")
        with self._lock:
            try:
                self._conn.execute(
                    "INSERT INTO terminations(job_id, reason) VALUES(?,?)",
                    (job_id, reason),
                )
            except sqlite3.IntegrityError:
                self._conn.rollback()
                raise Duplicate(f"job {job_id} is already queued for termination")
            self._conn.commit()

    def pop_termination(self) -> Tuple[int, str]:
        """Remove and return the oldest pending termination (FIFO)."""
        with self._lock:
            row = self._conn.execute(
                "SELECT seq, job_id, reason FROM terminations ORDER BY seq LIMIT 1"
            ).fetchone()
            if row is None:
                raise Empty("termination queue is empty")
            self._conn.execute("DELETE FROM terminations WHERE seq=?", (row[0],))
            self._conn.commit()
            return row[1], row[2]

    def pending_terminations(self) -> List[Tuple[int, str]]:
        rows = self._conn.execute(
            "SELECT job_id, reason FROM terminations ORDER BY seq"
        ).fetchall()
        return [(r[0], r[1]) for r in rows]

    # -- inspection and bulk support ----------------------------------------------

    def queued_jobs(self) -> List[JobRecord]:
        rows = self._conn.execute(
            "SELECT * FROM queue ORDER BY arrival_ms, job_id"
        ).fetchall()
        return [_record_from_row(r) for r in rows]

    def history_jobs(self) -> List[JobRecord]:
        rows = self._conn.execute("SELECT * FROM history ORDER BY job_id").fetchall()
        return [_record_from_row(r, executed=True) for r in rows]

    def history_length(self) -> int:
        return self._conn.execute("SELECT COUNT(*) FROM history").fetchone()[0]

    def lookup(self, job_id: int) -> Optional[Tuple[str, JobRecord]]:
        """Find a job by id in the queue or the history; None if in neither."""
        row = self._conn.execute("SELECT * FROM queue WHERE job_id=?", (job_id,)).fetchone()
        if row is not None:
            return "queued", _record_from_row(row)
        row = self._conn.execute("SELECT * FROM history WHERE job_id=?", (job_id,)).fetchone()
        if row is not None:
            return "executed", _record_from_row(row, executed=True)
        return None

    def seed_history(self, n: int, clients: Sequence[ClientId],
                     levels: Sequence[int] = (1, 2, 3), seed: int = 0,
                     client_weights: Optional[Sequence[float]] = None,
                     level_weights: Optional[Sequence[float]] = None) -> None:
        """Populate the history with ``n`` synthetic executed jobs.

        Clients and levels are drawn independently from the given (default
        uniform) distributions with a seeded RNG; used to scale the history
        for the overhead benchmark.
        """
        if n < 0:
            raise ValueError("n must be >= 0")
        if n == 0:
            return
        rng = random.Random(seed)
        with self._lock:
            first_id = self._next_job_id()
            self._conn.execute(
                "UPDATE meta SET value=? WHERE key='next_job_id'", (first_id + n,)
            )
            tally: Counter = Counter()
            done = 0
            while done < n:
                chunk = min(100_000, n - done)
                picked_clients = rng.choices(clients, weights=client_weights, k=chunk)
                picked_levels = rng.choices(levels, weights=level_weights, k=chunk)
                rows = []
                for i, (c, lvl) in enumerate(zip(picked_clients, picked_levels)):
                    job_id = first_id + done + i
                    rows.append((job_id, c.name, c.address, c.port, lvl, "[]", job_id, job_id))
                    tally[f"client:{c.name}"] += 1
                    tally[f"priority:{lvl}"] += 1
                self._conn.executemany("INSERT INTO history VALUES(?,?,?,?,?,?,?,?)", rows)
                done += chunk
            tally["total"] = n
            self._bump_counters(sorted(tally.items()))
            self._conn.commit()

    def dump_csv(self, out: IO[str]) -> None:
        """Write queue then history rows as CSV (queued rows have an empty
        exec_start_ms column)."""
        with self._lock:
            writer = csv.writer(out)
            writer.writerow(DUMP_HEADER)
            for rec in self.queued_jobs():
                writer.writerow([rec.job_id, rec.client.name, rec.priority, rec.arrival_ms, ""])
            for rec in self.history_jobs():
                writer.writerow(
                    [rec.job_id, rec.client.name, rec.priority, rec.arrival_ms, rec.exec_start_ms]
                )
