"""Command-line interface.

    macroviz ask --data cars.csv --prompt "what is the most affordable car?"
    macroviz serve --port 8080 --config config.json
    macroviz catalog --list
    macroviz record --data cars.csv --prompt "..." --replay-dir fixtures/
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .catalog import ChartCatalog
from .config import PipelineConfig
from .errors import MacrovizError
from .pipeline import PipelineRuntime, RequestOptions, VisualizeRequest, run_pipeline
from .server import serve


def _load_config(path: str | None) -> PipelineConfig:
    config = PipelineConfig.from_file(Path(path)) if path else PipelineConfig()
    return config.apply_env()


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="macroviz",
        description="Turn a CSV and a high-level question into chart specs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ask = sub.add_parser("ask", help="run the pipeline once")
    ask.add_argument("--data", required=True, help="CSV file")
    ask.add_argument("--prompt", required=True, help="user prompt")
    ask.add_argument("--mode", choices=["feasible", "recommend"], default="recommend")
    ask.add_argument("--out", help="write the response JSON here (default stdout)")
    ask.add_argument("--config", help="config JSON file")
    ask.add_argument("--replay-dir", help="replay store directory (scripted provider)")

    srv = sub.add_parser("serve", help="run the HTTP service")
    srv.add_argument("--port", type=int, default=8080)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--config", help="config JSON file")

    cat = sub.add_parser("catalog", help="inspect the chart catalog")
    cat.add_argument("--list", action="store_true", help="list template ids")
    cat.add_argument("--json", action="store_true", help="dump the catalog document")

    rec = sub.add_parser("record", help="run live and write replay fixtures")
    rec.add_argument("--data", required=True, help="CSV file")
    rec.add_argument("--prompt", required=True, help="user prompt")
    rec.add_argument("--mode", choices=["feasible", "recommend"], default="recommend")
    rec.add_argument("--replay-dir", required=True, help="directory to write fixtures")
    rec.add_argument("--config", help="config JSON file")

    return parser


def _cmd_ask(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    if args.replay_dir:
        config.replay_dir = args.replay_dir
    runtime = PipelineRuntime(config)
    request = VisualizeRequest(
        csv=Path(args.data).read_bytes(),
        prompt=args.prompt,
        mode=args.mode,
        options=RequestOptions(),
    )
    response = run_pipeline(request, runtime)
    payload = json.dumps(response.to_json_dict(), indent=2, ensure_ascii=True)
    if args.out:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
    else:
        print(payload)
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    server = serve(config, host=args.host, port=args.port)
    print(f"macroviz serving on http://{args.host}:{server.port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def _cmd_catalog(args: argparse.Namespace) -> int:
    catalog = ChartCatalog.load_default()
    if args.json:
        print(json.dumps(catalog.raw_doc, indent=2, ensure_ascii=True))
        return 0
    for template in catalog.templates:
        print(f"{template.id:24s} {template.display_name} [{template.taxonomy_category}]")
    return 0


def _cmd_record(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    config.provider = "live"
    config.record = True
    config.replay_dir = None  # start from an empty store; save below
    if not config.base_url:
        print("record needs MACROVIZ_LLM_BASE_URL or base_url in the config", file=sys.stderr)
        return 2
    runtime = PipelineRuntime(config)
    request = VisualizeRequest(
        csv=Path(args.data).read_bytes(),
        prompt=args.prompt,
        mode=args.mode,
        options=RequestOptions(),
    )
    response = run_pipeline(request, runtime)
    runtime.replay_store.save_dir(Path(args.replay_dir))
    print(
        f"recorded {runtime.replay_store.entry_count()} exchanges to {args.replay_dir} "
        f"(response kind: {response.kind})"
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "ask":
            return _cmd_ask(args)
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "catalog":
            return _cmd_catalog(args)
        if args.command == "record":
            return _cmd_record(args)
    except MacrovizError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
