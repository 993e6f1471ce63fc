"""Command-line client for the modeling service.

The CLI is a thin HTTP client: it builds a request, posts it to the
service, and writes the response as JSON/CSV reports. By default it talks
to an in-process instance of the service; pass --server to target a
running deployment instead.
"""
from __future__ import annotations

import argparse
import base64
import json
import os
import sys

import httpx


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    from fastapi.testclient import TestClient

    from .service.app import app
    return TestClient(app)


def _load_config_arg(value: str):
    """A config argument is a JSON file path, inline JSON, or a model string."""
    if os.path.exists(value):
        with open(value) as fh:
            return json.load(fh)
    stripped = value.strip()
    if stripped.startswith("{"):
        return json.loads(stripped)
    return stripped


def _post(client: httpx.Client, endpoint: str, payload: dict) -> dict:
    resp = client.post(endpoint, json=payload)
    if resp.status_code != 200:
        try:
            record = resp.json()
        except ValueError:
            record = {"error": {"code": "http", "message": resp.text}}
        sys.stderr.write(json.dumps(record) + "\n")
        raise SystemExit(1)
    return resp.json()


def _emit(report: dict, out: str | None) -> None:
    from .reports import dump_json, write_json
    if out:
        write_json(out, report)
    else:
        sys.stdout.write(dump_json(report))


def _common_config_payload(args) -> dict:
    payload = {"config": _load_config_arg(args.config)}
    if getattr(args, "timesteps", None) is not None:
        payload["timesteps"] = args.timesteps
    if getattr(args, "no_encoder", False):
        payload["encode_first_conv"] = False
    return payload


def cmd_infer(args) -> None:
    payload = _common_config_payload(args)
    payload.update({
        "weights_path": args.weights,
        "images_path": args.images,
        "labels_path": args.labels,
        "limit": args.limit,
        "dump_events_dir": args.dump_events,
    })
    with _client(args.server) as client:
        report = _post(client, "/infer", payload)
    _emit(report, args.out)
    if args.csv:
        from .reports import write_csv
        write_csv(args.csv, report["per_layer_sfr"], ["layer", "sfr"])


def cmd_cost(args) -> None:
    payload = _common_config_payload(args)
    with _client(args.server) as client:
        report = _post(client, "/cost", payload)
    _emit(report, args.out)
    if args.csv:
        from .reports import write_csv
        write_csv(args.csv, report["layers"],
                  ["layer", "mode", "c_in", "c_out", "h_out", "w_out",
                   "input_reads", "weight_reads", "psum_accesses",
                   "vmem_bytes", "parallel_factor", "latency_cycles"])


def cmd_compare_dataflow(args) -> None:
    payload = _common_config_payload(args)
    with _client(args.server) as client:
        report = _post(client, "/compare-dataflow", payload)
    _emit(report, args.out)
    if args.csv:
        from .reports import write_csv
        write_csv(args.csv, report["layers"],
                  ["layer", "os_input_reads", "os_weight_reads",
                   "os_psum_accesses", "ws_input_reads", "ws_weight_reads",
                   "ws_psum_accesses", "os_over_ws_weight_ratio"])


def cmd_pipeline(args) -> None:
    payload = _common_config_payload(args)
    payload.update({
        "frames": args.frames,
        "per_pixel": args.per_pixel,
        "size_buffers": args.size_fifos,
        "include_trace": not args.no_trace,
    })
    if args.capacities:
        payload["capacities"] = [int(x) for x in args.capacities.split(",")]
    with _client(args.server) as client:
        report = _post(client, "/pipeline", payload)
    trace = report.pop("trace", None)
    _emit(report, args.out)
    if args.csv and trace is not None:
        from .reports import write_csv
        write_csv(args.csv, trace, ["frame", "stage", "start", "finish"])


def cmd_encode(args) -> None:
    payload = _common_config_payload(args)
    payload.update({
        "weights_path": args.weights,
        "images_path": args.images,
        "image_index": args.index,
    })
    with _client(args.server) as client:
        report = _post(client, "/encode", payload)
    raw = base64.b64decode(report.pop("stream_base64"))
    if args.stream:
        with open(args.stream, "wb") as fh:
            fh.write(raw)
    _emit(report, args.out)


def cmd_search_parallel(args) -> None:
    payload = _common_config_payload(args)
    payload["pe_budget"] = args.budget
    with _client(args.server) as client:
        report = _post(client, "/search-parallel", payload)
    _emit(report, args.out)


def _add_config_args(parser, timesteps: bool = True) -> None:
    parser.add_argument("--config", required=True,
                        help="config JSON file, inline JSON, or model string")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service "
                             "(default: run in process)")
    parser.add_argument("--out", default=None, help="write the JSON report here")
    parser.add_argument("--no-encoder", action="store_true",
                        help="treat the first convolution as a pipeline layer, "
                             "not the encoder")
    if timesteps:
        parser.add_argument("--T", dest="timesteps", type=int, default=None,
                            help="override the config's timestep count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snnaccel",
        description="Simulate and cost-model a single-timestep spiking "
                    "CNN accelerator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("infer", help="classify IDX images with STIW weights")
    _add_config_args(p)
    p.add_argument("--weights", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--labels", default=None)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--dump-events", default=None,
                   help="write per-layer event streams into this directory")
    p.add_argument("--csv", default=None, help="write the per-layer SFR table")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("cost", help="per-layer access counts, storage, latency")
    _add_config_args(p)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("compare-dataflow",
                       help="output-stationary vs weight-stationary accesses")
    _add_config_args(p)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_compare_dataflow)

    p = sub.add_parser("pipeline", help="discrete-event pipeline simulation")
    _add_config_args(p)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--capacities", default=None,
                   help="comma-separated per-stage FIFO capacities")
    p.add_argument("--per-pixel", action="store_true",
                   help="simulate at spike-vector granularity")
    p.add_argument("--size-fifos", action="store_true",
                   help="also search minimal FIFO capacities")
    p.add_argument("--no-trace", action="store_true")
    p.add_argument("--csv", default=None, help="write the per-frame trace")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("encode", help="encode one image as a spike event stream")
    _add_config_args(p)
    p.add_argument("--weights", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--stream", default=None, help="write the binary stream here")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("search-parallel",
                       help="search per-layer output-channel parallel factors")
    _add_config_args(p)
    p.add_argument("--budget", type=int, required=True,
                   help="total processing-element budget")
    p.set_defaults(func=cmd_search_parallel)

    return parser


def main(argv: list | None = None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
