"""Command-line client for the sparsefront service.

Subcommands: run, pretune, report, fetch, synth, serve.  By default the
CLI talks to the FastAPI app through an in-process ASGI transport, so
no server is required; pass --server to target a running instance.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import httpx


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # in-process fallback: drive the ASGI app directly, no server needed
    from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _wait_for_job(client: httpx.Client, job_id: str, poll_s: float = 0.2) -> dict:
    while True:
        status = client.get(f"/jobs/{job_id}").json()
        if status["status"] == "done":
            return status["result"]
        if status["status"] == "failed":
            sys.stderr.write(status["error"] or "job failed\n")
            raise SystemExit(1)
        time.sleep(poll_s)


def cmd_run(args) -> int:
    config = json.loads(open(args.config).read())
    with _client(args.server) as client:
        resp = client.post("/experiments", json=config)
        resp.raise_for_status()
        result = _wait_for_job(client, resp.json()["job_id"])
    print(json.dumps(result))
    return 1 if result.get("had_failures") else 0


def cmd_pretune(args) -> int:
    config = json.loads(open(args.config).read())
    with _client(args.server) as client:
        resp = client.post("/pretune", json={"config": config, "budget": args.budget})
        resp.raise_for_status()
        result = _wait_for_job(client, resp.json()["job_id"])
    print(json.dumps(result))
    return 0


def cmd_report(args) -> int:
    with _client(args.server) as client:
        resp = client.post("/reports", json={"result_dir": args.result_dir})
        if resp.status_code != 200:
            sys.stderr.write(f"{resp.json().get('detail', resp.text)}\n")
            return 1
    print(json.dumps(resp.json()))
    return 0


def cmd_fetch(args) -> int:
    with _client(args.server) as client:
        resp = client.post("/datasets/fetch",
                           json={"did": args.did, "cache_dir": args.cache_dir})
        if resp.status_code != 200:
            sys.stderr.write(f"{resp.json().get('detail', resp.text)}\n")
            return 1
    print(json.dumps(resp.json()))
    return 0


def cmd_synth(args) -> int:
    payload = {"n": args.n, "p": args.p, "k_informative": args.k_informative,
               "noise_sd": args.noise_sd, "seed": args.seed, "out_path": args.out}
    with _client(args.server) as client:
        resp = client.post("/datasets/synthetic", json=payload)
        resp.raise_for_status()
    print(json.dumps(resp.json()))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsefront")
    parser.add_argument("--server", help="base URL of a running service; "
                        "default runs the service in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a nested-resampling experiment")
    p.add_argument("config", help="experiment config JSON file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("pretune", help="single-objective BO for frozen hyperparameters")
    p.add_argument("config", help="experiment config JSON file")
    p.add_argument("--budget", type=int, default=500)
    p.set_defaults(func=cmd_pretune)

    p = sub.add_parser("report", help="emit plot-ready CSVs for a result directory")
    p.add_argument("result_dir")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("fetch", help="download an OpenML dataset into the cache")
    p.add_argument("did", type=int)
    p.add_argument("--cache-dir", default="cache")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("synth", help="generate a synthetic benchmark CSV")
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--p", type=int, default=50)
    p.add_argument("--k-informative", type=int, default=5)
    p.add_argument("--noise-sd", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
