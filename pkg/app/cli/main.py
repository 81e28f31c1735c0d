"""
fader command line

NOTE:
1.Every subcommand takes the same flags; flags override the JSON run config.
2.Exit codes: 0 ok, 1 unexpected failure, 2 configuration error, 3 missing prerequisite, 4 stale artifact.
"""
import argparse
import asyncio
import sys
from typing import Any, Dict, List, Optional

from app.core.errors import FaderError
from app.database.datastore import log_error
from .pipeline import (
    StageContext,
    cmd_answer,
    cmd_curve,
    cmd_eval,
    cmd_extract,
    cmd_index,
    cmd_ingest,
    cmd_merge,
    cmd_retrieve,
    cmd_run,
    cmd_simq,
    cmd_speculate,
    cmd_sweep,
)
from .schemas import load_config

STAGES = {
    "ingest": lambda ctx, args: cmd_ingest(ctx, args.chunk_target),
    "speculate": lambda ctx, args: cmd_speculate(ctx),
    "extract": lambda ctx, args: cmd_extract(ctx),
    "merge": lambda ctx, args: cmd_merge(ctx),
    "index": lambda ctx, args: cmd_index(ctx, args.label),
    "retrieve": lambda ctx, args: cmd_retrieve(ctx, args.label),
    "answer": lambda ctx, args: cmd_answer(ctx, args.label),
    "eval": lambda ctx, args: cmd_eval(ctx, args.label),
    "curve": lambda ctx, args: cmd_curve(ctx, args.label),
    "simq": lambda ctx, args: cmd_simq(ctx),
    "run": lambda ctx, args: cmd_run(ctx),
    "sweep": lambda ctx, args: cmd_sweep(ctx),
}

HELP = {
    "ingest": "split the corpus into sentence-aligned chunks",
    "speculate": "speculate reader questions per chunk and run",
    "extract": "extract entity-description pairs per chunk and run",
    "merge": "union the per-run knowledge bases",
    "index": "build BM25 indexes over EDPs, chunks or external units",
    "retrieve": "select contexts under each budget",
    "answer": "answer every task from its retrieved context",
    "eval": "score predictions",
    "curve": "write context-efficiency curves and frontiers",
    "simq": "compare speculated questions with real ones",
    "run": "run the whole pipeline for the configured unit",
    "sweep": "chunk-length and KB-count sweeps",
    "serve": "serve the retrieval API",
}


def _int_list(value: str) -> List[int]:
    try:
        return [int(part) for part in value.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}") from e


def common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", help="JSON run config")
    parser.add_argument("--workdir", help="artifact directory (default FADER_WORKDIR)")
    parser.add_argument("--force", action="store_true", help="rebuild stages whose inputs changed")
    parser.add_argument("--jobs", type=int, help="concurrent backend calls")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--backend", choices=["mock", "http"])
    parser.add_argument("--model")
    parser.add_argument("--temperature", type=float)
    parser.add_argument("--profile", dest="dataset_profile", choices=["narrativeqa", "qasper", "quality"])
    parser.add_argument("--corpus", dest="corpus_path")
    parser.add_argument("--tasks", dest="tasks_path")
    parser.add_argument("--external-units", dest="external_units_path")
    parser.add_argument("--vectors", dest="vectors_path", help="precomputed question vectors (JSONL)")
    parser.add_argument("--num-kbs", dest="num_kbs", type=int, help="S, sampled KBs to merge")
    parser.add_argument("--no-speculation", action="store_true", help="fact-only extraction")
    parser.add_argument("--unit", choices=["edp", "chunk", "external"])
    parser.add_argument("--scope", dest="retrieval_scope", choices=["document", "corpus"])
    parser.add_argument("--budgets", type=_int_list, help="e.g. 50,100,200")
    parser.add_argument("--chunk-target", dest="chunk_target", type=int)
    parser.add_argument("--label", help="index label: edp_s<S>, edp_factonly_s<S>, chunk<t>, external")
    parser.add_argument("--bleu-smoothing", action="store_true")
    parser.add_argument("--log-transcripts", action="store_true")
    return parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fader",
        description="Entity-description knowledge bases and context-efficiency evaluation",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = common_parser()
    for name in [*STAGES, "serve"]:
        sub = subparsers.add_parser(name, parents=[common], help=HELP[name])
        if name == "serve":
            sub.add_argument("--host", default="0.0.0.0")
            sub.add_argument("--port", type=int, default=8001)
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = {
        name: getattr(args, name)
        for name in (
            "workdir", "jobs", "seed", "backend", "model", "temperature", "dataset_profile",
            "corpus_path", "tasks_path", "external_units_path", "vectors_path", "num_kbs",
            "unit", "retrieval_scope", "budgets", "chunk_target",
        )
    }
    if args.no_speculation:
        overrides["speculation"] = False
    if args.bleu_smoothing:
        overrides["bleu_smoothing"] = True
    if args.log_transcripts:
        overrides["log_transcripts"] = True
    return overrides


async def dispatch(args: argparse.Namespace) -> None:
    config = load_config(args.config, overrides_from_args(args))
    ctx = StageContext(config, force=args.force)
    await STAGES[args.command](ctx, args)


def serve(args: argparse.Namespace) -> None:
    import uvicorn

    from app.database.datastore import configure_datastore

    configure_datastore(args.workdir)
    uvicorn.run("main:app", host=args.host, port=args.port)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            serve(args)
        else:
            asyncio.run(dispatch(args))
        return 0
    except FaderError as e:
        print(f"fader {args.command}: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        print(f"fader {args.command}: unexpected error: {e}", file=sys.stderr)
        asyncio.run(
            log_error(error=e, location=f"cli/main.py - {args.command}", additional_info={"argv": argv or sys.argv[1:]})
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
