"""Experiment runner CLI: a thin HTTP client of the whistlesim service.

By default the service runs in-process (no server needed); --server points
the same commands at a remote deployment. Exit codes: 0 success, 1 usage or
config error, 2 invariant violation, 3 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VIOLATION = 2
EXIT_IO = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors are 1 here
        raise UsageError(message)


def _make_client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="scenario file (flat key = value lines)")
    sub.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )
    sub.add_argument("--seed", type=int, help="base seed for the replica streams")
    sub.add_argument("--replicas", type=int, help="number of replicas")
    sub.add_argument("--out", help="output directory (default: $WHISTLESIM_OUT or .)")
    sub.add_argument("--jobs", type=int, default=1, help="worker processes")
    sub.add_argument("--server", help="service URL (default: run in-process)")


def build_parser() -> _Parser:
    parser = _Parser(prog="whistlesim", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    run = subs.add_parser("run", help="run one scenario, write metrics + transcript")
    _common_flags(run)

    sweep = subs.add_parser("sweep", help="sweep one parameter over a value grid")
    _common_flags(sweep)
    sweep.add_argument(
        "--param",
        required=True,
        choices=["honesty_deposit", "temperature", "group_size"],
    )
    sweep.add_argument(
        "--grid", required=True, help="comma-separated, strictly increasing values"
    )

    ablate = subs.add_parser(
        "ablate", help="compare full mechanism against the three degraded variants"
    )
    _common_flags(ablate)

    audit = subs.add_parser("audit", help="check a transcript's invariants")
    audit.add_argument("transcript", help="path to a transcript .jsonl")
    audit.add_argument("--server", help="service URL (default: run in-process)")

    serve = subs.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _gather_overrides(args) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for item in args.overrides:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.replicas is not None:
        overrides["replicas"] = str(args.replicas)
    return overrides


def _read_config(args) -> str | None:
    if not args.config:
        return None
    try:
        return Path(args.config).read_text()
    except OSError as exc:
        raise IOError(f"cannot read config: {exc}") from exc


def _outdir(args) -> Path:
    out = Path(args.out or os.environ.get("WHISTLESIM_OUT", "."))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOError(f"cannot create output directory: {exc}") from exc
    return out


def _write(path: Path, content: str) -> None:
    try:
        path.write_text(content)
    except OSError as exc:
        raise IOError(f"cannot write {path}: {exc}") from exc


def _post(client, path: str, payload: dict):
    response = client.post(path, json=payload)
    if response.status_code == 400:
        raise UsageError(response.json().get("detail", "bad request"))
    if response.status_code != 200:
        raise RuntimeError(f"service error {response.status_code}: {response.text}")
    return response.json()


def _cmd_run(args) -> int:
    payload = {
        "config_text": _read_config(args),
        "overrides": _gather_overrides(args),
        "jobs": args.jobs,
    }
    with _make_client(args.server) as client:
        data = _post(client, "/simulation/run", payload)
    out = _outdir(args)
    _write(out / "metrics.csv", data["metrics_csv"])
    _write(out / "transcript.jsonl", data["transcript_jsonl"])
    _write(out / "txlog.csv", data["txlog_csv"])
    agg = data["aggregate"]
    print(f"replicas: {data['replicas']}")
    for key, value in agg.items():
        print(f"{key}: {value:.4f}")
    print(f"wrote {out / 'metrics.csv'}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    try:
        values = [float(v) for v in args.grid.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad grid: {exc}") from exc
    payload = {
        "parameter": args.param,
        "values": values,
        "config_text": _read_config(args),
        "overrides": _gather_overrides(args),
        "jobs": args.jobs,
    }
    with _make_client(args.server) as client:
        data = _post(client, "/simulation/sweep", payload)
    out = _outdir(args)
    _write(out / "sweep.csv", data["csv"])
    for row in data["rows"]:
        print(
            f"{row['parameter']}={row['value']:g}: collusion_rate={row['collusion_rate']:.4f} "
            f"completion_rate={row['completion_rate']:.4f}"
        )
    print(f"wrote {out / 'sweep.csv'}")
    return EXIT_OK


def _cmd_ablate(args) -> int:
    overrides = _gather_overrides(args)
    # ablations separate at nonzero temperature; T=0 argmax saturates them
    overrides.setdefault("temperature", "1.0")
    payload = {
        "config_text": _read_config(args),
        "overrides": overrides,
        "jobs": args.jobs,
    }
    with _make_client(args.server) as client:
        data = _post(client, "/simulation/ablate", payload)
    out = _outdir(args)
    _write(out / "ablation.csv", data["csv"])
    for row in data["rows"]:
        print(f"{row['variant']:>13}: collusion_rate={row['collusion_rate']:.4f}")
    print(f"wrote {out / 'ablation.csv'}")
    return EXIT_OK


def _cmd_audit(args) -> int:
    try:
        text = Path(args.transcript).read_text()
    except OSError as exc:
        raise IOError(f"cannot read transcript: {exc}") from exc
    with _make_client(args.server) as client:
        response = client.post("/audit", json={"transcript_jsonl": text})
    if response.status_code == 400:
        print(f"corrupt transcript: {response.json().get('detail')}", file=sys.stderr)
        return EXIT_VIOLATION
    data = response.json()
    print(data["rendered"], end="")
    return EXIT_OK if data["ok"] else EXIT_VIOLATION


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "run": _cmd_run,
            "sweep": _cmd_sweep,
            "ablate": _cmd_ablate,
            "audit": _cmd_audit,
            "serve": _cmd_serve,
        }[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
