"""Thin command-line client for the speedcam service.

Every subcommand builds one JSON request and posts it to the API; by default
the app is mounted in-process (no server needed), and `--server URL` targets a
running instance instead. Exit codes: 0 success, 1 runtime/data failure,
2 usage/validation error. Logs go to stderr, data to files or stdout.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys

import httpx

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _post(server: str | None, path: str, payload: dict) -> httpx.Response:
    if server:
        with httpx.Client(base_url=server, timeout=600.0) as client:
            return client.post(path, json=payload)

    async def _call() -> httpx.Response:
        from .api import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://speedcam.local", timeout=600.0
        ) as client:
            return await client.post(path, json=payload)

    return asyncio.run(_call())


def _fail(response: httpx.Response) -> int:
    try:
        detail = response.json().get("detail", response.text)
    except json.JSONDecodeError:
        detail = response.text
    print(f"error: {detail}", file=sys.stderr)
    return EXIT_USAGE if response.status_code == 400 else EXIT_RUNTIME


def _metrics_line(split: str, block: dict) -> str:
    adj = block.get("adj_r2")
    adj_text = "n/a" if adj is None else f"{adj:.6f}"
    return (
        f"{split}: r2={block['r2']:.6f} adj_r2={adj_text} "
        f"rmse={block['rmse']:.6f} n={block['n']} p={block['p']}"
    )


def cmd_synth(args: argparse.Namespace) -> int:
    payload = {
        "n": args.n,
        "out_dir": args.out,
        "seed": args.seed,
        "speed_range": args.speed_range,
        "duration_range": args.duration_range,
        "distance_range": args.distance_range,
        "focal_px": args.focal_px,
        "vehicle_width_m": args.vehicle_width,
        "vehicle_height_m": args.vehicle_height,
        "fps": args.fps,
        "image_width": args.image_size[0],
        "image_height": args.image_size[1],
        "depth_mode": args.depth_mode,
        "bbox_sigma_px": args.bbox_sigma,
        "depth_sigma": args.depth_sigma,
    }
    response = _post(args.server, "/synth", payload)
    if response.status_code != 200:
        return _fail(response)
    body = response.json()
    print(
        f"wrote {body['sample_count']} samples (seed {body['seed']}) -> "
        f"{body['manifest_path']}"
    )
    return EXIT_OK


def cmd_extract(args: argparse.Namespace) -> int:
    payload = {
        "manifest_path": args.manifest,
        "features_path": args.features,
        "confidence_threshold": args.confidence_threshold,
        "depth_region": args.depth_region,
        "accepted_classes": args.accepted_classes.split(","),
        "primary_selection": args.primary_selection,
    }
    response = _post(args.server, "/extract", payload)
    if response.status_code != 200:
        return _fail(response)
    body = response.json()
    for skip in body["skipped"]:
        print(f"skipped {skip['sample_id']}: {skip['reason']}", file=sys.stderr)
    print(
        f"extracted {body['extracted']} samples, skipped {len(body['skipped'])} -> "
        f"{body['features_path']}"
    )
    if body["extracted"] == 0:
        print("error: zero samples extracted", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    payload = {
        "features_path": args.features,
        "model_path": args.model,
        "degree": args.degree,
        "test_fraction": args.test_fraction,
        "seed": args.seed,
        "base_features": args.base_features.split(","),
    }
    response = _post(args.server, "/fit", payload)
    if response.status_code != 200:
        return _fail(response)
    body = response.json()
    print(f"model -> {body['model_path']}")
    print(_metrics_line("train", body["train"]))
    print(_metrics_line("test", body["test"]))
    print("feature importance:")
    for rank, item in enumerate(body["importance"], start=1):
        print(f"  {rank}. {item['feature']}  {item['importance']:.6g}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    payload = {
        "model_path": args.model,
        "features_path": args.features,
        "output_path": args.output,
    }
    response = _post(args.server, "/eval", payload)
    if response.status_code != 200:
        return _fail(response)
    body = response.json()
    print(_metrics_line("eval", body["metrics"]))
    if args.output:
        print(f"actual-vs-predicted table -> {args.output}")
    else:
        for row in body["rows"]:
            print(
                f"{row['sample_id']}: actual={row['speed_kmh']:.3f} "
                f"predicted={row['predicted_kmh']:.3f}"
            )
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    payload: dict = {"model_path": args.model, "output_path": args.output}
    if args.record is not None:
        t, area_diff, dist_diff = args.record
        payload["records"] = [
            {"sample_id": "record", "t": t, "area_diff": area_diff, "dist_diff": dist_diff}
        ]
    else:
        payload["features_path"] = args.features
    response = _post(args.server, "/predict", payload)
    if response.status_code != 200:
        return _fail(response)
    body = response.json()
    for p in body["predictions"]:
        flag = "  [negative]" if p["negative"] else ""
        print(f"{p['sample_id']}: {p['predicted_kmh']:.3f} km/h{flag}")
    if args.output:
        print(f"predictions -> {args.output}", file=sys.stderr)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    payload = {
        "model_path": args.model,
        "features_path": args.features,
        "output_path": args.output,
    }
    response = _post(args.server, "/report", payload)
    if response.status_code != 200:
        return _fail(response)
    body = response.json()
    if args.output:
        print(f"report -> {args.output}")
    else:
        sys.stdout.write(body["text"])
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .api import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="speedcam",
        description="Vehicle speed estimation pipeline (synthesize, extract, fit, eval, predict, report)",
    )
    parser.add_argument(
        "--server",
        default=None,
        help="base URL of a running speedcam service; default runs in-process",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset tree")
    p.add_argument("--n", type=int, required=True, help="number of samples")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--speed-range", type=float, nargs=2, default=[5.0, 60.0], metavar=("LO", "HI"))
    p.add_argument("--duration-range", type=float, nargs=2, default=[2.0, 6.0], metavar=("LO", "HI"))
    p.add_argument("--distance-range", type=float, nargs=2, default=[110.0, 170.0], metavar=("LO", "HI"))
    p.add_argument("--focal-px", type=float, default=200.0)
    p.add_argument("--vehicle-width", type=float, default=1.8)
    p.add_argument("--vehicle-height", type=float, default=1.5)
    p.add_argument("--fps", type=float, default=10.0)
    p.add_argument("--image-size", type=int, nargs=2, default=[64, 48], metavar=("W", "H"))
    p.add_argument("--depth-mode", choices=["metric", "inverse_relative"], default="metric")
    p.add_argument("--bbox-sigma", type=float, default=0.0)
    p.add_argument("--depth-sigma", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="reduce a manifest to a features table")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True, help="output features CSV path")
    p.add_argument("--confidence-threshold", type=float, default=0.7)
    p.add_argument("--depth-region", choices=["mask", "bbox"], default="mask")
    p.add_argument("--accepted-classes", default="car", help="comma-separated class labels")
    p.add_argument(
        "--primary-selection", choices=["max_area", "max_confidence"], default="max_area"
    )
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("fit", help="fit a polynomial speed model")
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True, help="output model JSON path")
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument(
        "--base-features",
        default="t,area_diff,dist_diff",
        help="comma-separated subset of t,area_diff,dist_diff",
    )
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="evaluate a model on labeled features")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--output", default=None, help="actual-vs-predicted CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="predict speeds for feature records")
    p.add_argument("--model", required=True)
    p.add_argument("--features", default=None)
    p.add_argument(
        "--record",
        type=float,
        nargs=3,
        default=None,
        metavar=("T", "AREA_DIFF", "DIST_DIFF"),
        help="predict a single inline record instead of a features table",
    )
    p.add_argument("--output", default=None, help="predictions CSV path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report", help="emit a delimited model summary")
    p.add_argument("--model", required=True)
    p.add_argument("--features", default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand == "predict" and (args.features is None) == (args.record is None):
        parser.error("predict needs exactly one of --features or --record")
    try:
        return args.func(args)
    except httpx.HTTPError as exc:
        print(f"error: cannot reach server: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
