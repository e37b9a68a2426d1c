"""Command-line client for the experiment service.

Every subcommand talks HTTP to the service app. By default the app is run
in-process (no server needed); pass --server to target a running instance,
e.g. one started with `arbmarket serve`.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import httpx

from .harness import SEED_ENV_VAR


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=120.0)
    # sync httpx cannot drive an ASGI app directly; starlette's TestClient
    # subclasses httpx.Client and bridges the event loop for us
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from .service.app import create_app

    return TestClient(create_app(), base_url="http://arbmarket.local", raise_server_exceptions=False)


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _inject_seed(payload: dict, seed: int | None) -> dict:
    """Resolution order: --seed flag, scenario's own seed, environment, 0."""
    if seed is not None:
        payload["seed"] = seed
    elif payload.get("seed") is None and SEED_ENV_VAR in os.environ:
        payload["seed"] = int(os.environ[SEED_ENV_VAR])
    return payload


def _post(client: httpx.Client, path: str, payload: dict, params: dict | None = None) -> dict | list:
    resp = client.post(path, json=payload, params=params)
    if resp.status_code >= 400:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        print(f"error ({resp.status_code}): {detail}", file=sys.stderr)
        raise SystemExit(1)
    return resp.json()


def cmd_simulate(args) -> int:
    payload = _inject_seed(_load_json(args.scenario), args.seed)
    with _client(args.server) as client:
        report = _post(client, "/simulate", payload)
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    verdict = report["subsidy"]
    print(
        f"closing_price={report['closing_price']:.6f} outcome={report['outcome']:.6f} "
        f"scale={report['scale']:.6f} fee_revenue={report['fee_revenue']:.6f} "
        f"arbiter_payments={report['total_arbiter_payments']:.6f} "
        f"covered={verdict['realized_covered']} deficit={verdict['deficit']:.6f}",
        file=sys.stderr,
    )
    return 0


def cmd_probe(args) -> int:
    payload = _inject_seed(_load_json(args.scenario), args.seed)
    with _client(args.server) as client:
        rows = _post(client, "/probe", payload, params={"mc_rounds": args.rounds})
    header = f"{'arbiter':<12} {'shares':>12} {'signal':>6} {'analytic_gain':>16} {'mc_gain':>16} {'mc_stderr':>12}"
    print(header)
    for row in rows:
        if row["mc_gain"] is None:
            mc = f"{'-':>16} {'-':>12}"
        else:
            mc = f"{row['mc_gain']:>16.8f} {row['mc_stderr']:>12.8f}"
        print(
            f"{row['arbiter']:<12} {row['shares']:>12.4f} {row['signal']:>6d} "
            f"{row['analytic_gain']:>16.8f} {mc}"
        )
    worst = max(row["analytic_gain"] for row in rows)
    print(f"max analytic deviation gain: {worst:.8f}", file=sys.stderr)
    return 0


def cmd_calibrate(args) -> int:
    payload = {"delta": args.delta, "B": args.B, "M": args.M, "entry": args.entry, "b": args.b}
    with _client(args.server) as client:
        result = _post(client, "/calibrate", payload)
    print(f"min_fee={result['min_fee']:.9f}")
    print(
        f"bisection_check={result['bisection_check']:.9f} agreement={result['agreement']:.2e}",
        file=sys.stderr,
    )
    return 0


def cmd_sweep(args) -> int:
    payload = _load_json(args.grid)
    with _client(args.server) as client:
        result = _post(client, "/sweep", payload)
    with open(args.out, "w") as fh:
        fh.write(result["csv"])
    print(f"wrote {len(result['rows'])} rows to {args.out}", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("arbmarket.service.app:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arbmarket",
        description="Prediction market with arbitration-by-peer-scoring: simulation and calibration tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario end to end and emit a report")
    p.add_argument("scenario", help="path to a scenario JSON file")
    p.add_argument("--seed", type=int, default=None, help=f"RNG seed (default: scenario, then ${SEED_ENV_VAR})")
    p.add_argument("--out", default=None, help="write the report JSON here instead of stdout")
    p.add_argument("--server", default=None, help="URL of a running service (default: in-process)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("probe", help="deviation-gain table: analytic and Monte Carlo")
    p.add_argument("scenario", help="path to a scenario JSON file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--rounds", type=int, default=100_000, help="Monte Carlo rounds per cell")
    p.add_argument("--server", default=None)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("calibrate", help="minimum fee for a single operating point")
    p.add_argument("--delta", type=float, required=True, help="belief update strength in (0, 1]")
    p.add_argument("--b", type=float, default=None, help="liquidity (single-entry mode only)")
    p.add_argument("--B", type=float, required=True, help="per-agent budget")
    p.add_argument("--M", type=float, required=True, help="aggregate worst-case loss")
    p.add_argument("--entry", choices=["single", "multiple"], required=True)
    p.add_argument("--server", default=None)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sweep", help="minimum-fee curves over a parameter grid, as CSV")
    p.add_argument("grid", help="path to a grid JSON file")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--server", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
