"""Command-line entry point.

``run`` and ``bench`` drive the simulator locally; ``serve`` hosts the
FastAPI service; ``submit``/``terminate``/``status`` are thin HTTP clients
for a running service; ``dump`` prints a store as CSV.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

from .core import (
    STRATEGY_KINDS,
    ClientId,
    Clock,
    SchedulerConfig,
    SchedulerError,
    load_config,
    validate_config,
)
from .simulator import (
    DEFAULT_BENCH_SIZES,
    SCENARIO_KINDS,
    MetricsReport,
    ScenarioSpec,
    bench_rows_csv,
    benchmark_overheads,
    run_scenario,
)
from .store import JobStore


def _load_cfg(path: str | None) -> SchedulerConfig:
    if path:
        return load_config(path)
    return validate_config(SchedulerConfig())


def _print_summary(report: MetricsReport) -> None:
    print(f"scenario={report.scenario} strategy={report.strategy} seed={report.seed}")
    print(f"arrivals model: {report.arrival_model}")
    print(f"executed={report.executed_total} rejected={report.rejected} "
          f"still queued={report.queued_residual}")
    clients = sorted(report.per_client_executed)
    levels = sorted(report.per_priority_pct, reverse=True)
    rows = max(len(clients), len(levels))
    print(f"{'client':>8} {'executed':>9}   {'priority':>9} {'pct':>7}")
    for i in range(rows):
        left = f"{clients[i]:>8} {report.per_client_executed[clients[i]]:>9}" \
            if i < len(clients) else " " * 18
        right = f"{levels[i]:>9} {report.per_priority_pct[levels[i]]:>6.1f}%" \
            if i < len(levels) else ""
        print(f"{left}   {right}")
    if report.decision_latencies:
        mean_ms = sum(report.decision_latencies) / len(report.decision_latencies) * 1000
        print(f"mean decision latency: {mean_ms:.3f} ms over "
              f"{len(report.decision_latencies)} selections")


def cmd_run(args: argparse.Namespace) -> int:
    cfg = replace(_load_cfg(args.config), strategy=args.strategy)
    spec = ScenarioSpec(kind=args.scenario, seed=args.seed)
    report = run_scenario(spec, cfg)
    report.write(args.out)
    _print_summary(report)
    print(f"report written to {Path(args.out) / 'report.json'}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    for size in args.sizes:
        if size < 1:
            raise SchedulerError(f"history size must be positive, got {size}")
    rows = benchmark_overheads(history_sizes=args.sizes, trials=args.trials,
                               seed=args.seed)
    csv_text = bench_rows_csv(rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "overheads.csv").write_text(csv_text, encoding="utf-8")
    print(csv_text, end="")
    print(f"written to {out / 'overheads.csv'}")
    return 0


def cmd_dump(args: argparse.Namespace) -> int:
    store = JobStore(args.db)
    buf = io.StringIO()
    store.dump_csv(buf)
    store.close()
    if args.out:
        Path(args.out).write_text(buf.getvalue(), encoding="utf-8")
    else:
        print(buf.getvalue(), end="")
    return 0


def _load_clients(path: str) -> dict:
    """Client registry: JSON list of {name, address, port, token}."""
    entries = json.loads(Path(path).read_text(encoding="utf-8"))
    registry = {}
    for entry in entries:
        registry[entry["token"]] = ClientId(
            name=entry["name"],
            address=entry.get("address", ""),
            port=int(entry.get("port", 1)),
        )
    return registry


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .lifecycle import EdgeNode, SimulatedExecutor
    from .service import create_app

    cfg = _load_cfg(args.config)
    clock = Clock("wall")
    store = JobStore(args.db, queue_max=cfg.queue_max)
    executor = SimulatedExecutor(clock)
    node = EdgeNode(store, cfg, executor, clock)
    clients = _load_clients(args.clients)
    app = create_app(node, clients, run_loops=True)
    host, _, port = args.listen.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def _http_client(args: argparse.Namespace):
    import httpx

    return httpx.Client(base_url=args.server,
                        headers={"Authorization": f"Bearer {args.token}"},
                        timeout=10.0)


def cmd_submit(args: argparse.Namespace) -> int:
    ports = [int(p) for p in args.ports.split(",") if p] if args.ports else []
    payload = {"type": "new_job", "priority": args.priority, "ports": ports}
    with _http_client(args) as client:
        resp = client.post("/requests", json=payload)
    print(json.dumps(resp.json(), sort_keys=True))
    return 0 if resp.status_code == 200 else 1


def cmd_terminate(args: argparse.Namespace) -> int:
    payload = {"type": "terminate", "job_id": args.job_id}
    with _http_client(args) as client:
        resp = client.post("/requests", json=payload)
    print(json.dumps(resp.json(), sort_keys=True))
    return 0 if resp.status_code == 200 else 1


def cmd_status(args: argparse.Namespace) -> int:
    with _http_client(args) as client:
        resp = client.get(f"/jobs/{args.job_id}" if args.job_id else "/status")
    print(json.dumps(resp.json(), sort_keys=True))
    return 0 if resp.status_code == 200 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgefair",
        description="Fair job scheduling for a resource-constrained edge node.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="replay a workload scenario in virtual time")
    p.add_argument("--scenario", choices=SCENARIO_KINDS, required=True)
    p.add_argument("--strategy", choices=STRATEGY_KINDS, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--out", default="out", help="directory for report files")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="measure selection latency vs history size")
    p.add_argument("--sizes", type=int, nargs="+", default=list(DEFAULT_BENCH_SIZES))
    p.add_argument("--trials", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--listen", default="127.0.0.1:8000")
    p.add_argument("--db", default="edgefair.db")
    p.add_argument("--config", default=None)
    p.add_argument("--clients", required=True,
                   help="JSON file listing authorized clients and their tokens")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("dump", help="dump a store's queue and history as CSV")
    p.add_argument("--db", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_dump)

    for name, fn, extra in (
        ("submit", cmd_submit, "submit a new job to a running service"),
        ("terminate", cmd_terminate, "ask a running service to stop a job"),
        ("status", cmd_status, "query a running service"),
    ):
        p = sub.add_parser(name, help=extra)
        p.add_argument("--server", default="http://127.0.0.1:8000")
        p.add_argument("--token", required=True)
        if name == "submit":
            p.add_argument("--priority", type=int, required=True)
            p.add_argument("--ports", default="", help="comma separated, e.g. 80,443")
        if name == "terminate":
            p.add_argument("--job-id", type=int, required=True)
        if name == "status":
            p.add_argument("--job-id", type=int, default=None)
        p.set_defaults(func=fn)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SchedulerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
