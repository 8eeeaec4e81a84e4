#!/usr/bin/env python3
"""
Synthetic Knowledge Benchmark
Command-line pipeline: ingest, generate, questions, filter, evaluate, experiment, stats
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

# Add current directory to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

import knowledge_base as kbm
from benchmark_stats import benchmark_stats, format_stats, plot_histograms, stats_for_file
from entity_synthesis import generate_batch, read_entities, write_entities, write_provenance_sidecar
from evaluation_harness import (apply_manifest, evaluate, filter_for_model, format_report_table,
                                intersect_manifests, read_manifest, write_manifest, write_partial_manifest,
                                write_report)
from experiments import VARIANTS, run_experiment
from model_endpoint import make_endpoint
from pipeline_config import PipelineConfig
from pipeline_errors import EndpointError, PipelineError, UsageError
from prompt_builder import load_exemplars
from question_generation import generate_benchmark, read_benchmark, write_benchmark
from question_templates import DEFAULT_STORE_PATH, TemplateStore, template_store

logger = logging.getLogger("run")
console = Console()


def setup_logging(level: str = "INFO"):
    logging.basicConfig(level=level.upper(), format="%(message)s", datefmt="[%X]",
                        handlers=[RichHandler(console=Console(stderr=True), rich_tracebacks=True)],
                        force=True)


def require(path: str, producer: str) -> Path:
    """Upstream artifact path, or a usage error naming the command that writes it"""
    path = Path(path)
    if not path.exists():
        raise UsageError(f"{path} does not exist; run '{producer}' first")
    return path


def templates(config: PipelineConfig) -> TemplateStore:
    if not config.paths.templates and not config.paths.template_cache:
        return template_store
    return TemplateStore(config.paths.templates or DEFAULT_STORE_PATH, cache_path=config.paths.template_cache)



def endpoint_labels(config: PipelineConfig, args) -> List[str]:
    return args.endpoint or [config.default_endpoint]


def cmd_ingest(config: PipelineConfig, args):
    kb = kbm.load(config.paths.kb)
    eligible = kbm.screen_classes(kb, config.synthesis.min_parent_properties)

    table = Table(title=f"Knowledge base {config.paths.kb}")
    table.add_column("Item")
    table.add_column("Count", justify="right")
    table.add_row("classes", str(len(kb.classes)))
    table.add_row("entities", str(len(kb.entities)))
    table.add_row("dangling objects", str(kb.dangling_count))
    table.add_row("classes eligible for generation", str(len(eligible)))
    console.print(table)

    if args.output:
        output = Path(args.output)
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(kbm.dumps(kb) + "\n", encoding="utf-8")
        logger.info("Canonical knowledge base written to %s", output)


def cmd_generate(config: PipelineConfig, args):
    kb = kbm.load(config.paths.kb)
    synthesis = config.seeded_synthesis()
    result = generate_batch(kb, synthesis)
    write_entities(config.paths.entities, result.entities, kb)
    write_provenance_sidecar(config.paths.entities, result, synthesis)

    if not result.entities:
        logger.warning("No artificial entities generated; skipped classes: %s",
                       "; ".join(f"{c} ({r})" for c, r in sorted(result.skipped.items())) or "none")

    table = Table(title=f"{len(result.entities)} artificial entities -> {config.paths.entities}")
    table.add_column("Class")
    table.add_column("Entities", justify="right")
    table.add_column("Note")
    for class_id, count in sorted(result.per_class.items()):
        table.add_row(class_id, str(count), "")
    for class_id, reason in sorted(result.skipped.items()):
        table.add_row(class_id, "0", reason)
    console.print(table)


def cmd_questions(config: PipelineConfig, args):
    kb = kbm.load(config.paths.kb)
    entities = read_entities(require(config.paths.entities, "generate"))
    client = make_endpoint(config.endpoint(args.template_endpoint)) if args.template_endpoint else None
    questions = generate_benchmark(kb, entities, config.seeded_questions(), templates(config), client)
    write_benchmark(config.paths.benchmark, questions, kb)
    console.print(format_stats(benchmark_stats(questions)))


def cmd_filter(config: PipelineConfig, args):
    kb = kbm.load(config.paths.kb)
    entities = read_entities(require(config.paths.entities, "generate"))
    questions = read_benchmark(require(config.paths.benchmark, "questions"))
    exemplars = load_exemplars(config.paths.exemplars)
    manifests_dir = Path(config.paths.manifests)
    checkpoints_dir = Path(config.paths.checkpoints)
    checkpoints_dir.mkdir(parents=True, exist_ok=True)

    labels = endpoint_labels(config, args)
    manifests = []
    table = Table(title="Filtering")
    table.add_column("Model")
    table.add_column("Questions kept", justify="right")
    table.add_column("Entities kept", justify="right")
    table.add_column("Failed probes", justify="right")
    for label in labels:
        endpoint = make_endpoint(config.endpoint(label))
        checkpoint = checkpoints_dir / f"{label}.probes.jsonl"
        partial = manifests_dir / f"{label}.partial.json"
        try:
            result = filter_for_model(kb, entities, questions, endpoint, exemplars,
                                      checkpoint=checkpoint, store=templates(config))
        except EndpointError as e:
            write_partial_manifest(partial, label, checkpoint, e)
            raise
        write_manifest(manifests_dir / f"{label}.json", result)
        partial.unlink(missing_ok=True)

        manifests.append(result.manifest())
        table.add_row(label, f"{len(result.retained)}/{len(questions)}",
                      f"{len(result.retained_entities)}/{len(entities)}", str(len(result.failed_probes)))

    kept = intersect_manifests(manifests)
    if len(labels) > 1:
        intersection = manifests_dir / "intersection.json"
        with open(intersection, "w", encoding="utf-8") as f:
            json.dump({"models": labels, "retained": sorted(kept)}, f, indent=2, sort_keys=True)
            f.write("\n")
        table.add_row("all models", f"{len(kept)}/{len(questions)}", "", "")

    benchmark = Path(config.paths.benchmark)
    filtered = benchmark.with_name(f"{benchmark.stem}.filtered{benchmark.suffix}")
    write_benchmark(filtered, apply_manifest(questions, kept), kb)
    logger.info("Filtered benchmark written to %s", filtered)
    console.print(table)


def _selected_questions(config: PipelineConfig, args):
    questions = read_benchmark(require(config.paths.benchmark, "questions"))
    if args.manifest:
        manifest = read_manifest(require(args.manifest, "filter"))
        questions = apply_manifest(questions, set(manifest["retained"]))
    return questions


def _prompt_spec(config: PipelineConfig, args):
    overrides = {key: value for key, value in (("shots", args.shots), ("reasoning", args.reasoning),
                                               ("knowledge_format", args.format)) if value}
    return config.prompt.model_copy(update=overrides)


def cmd_evaluate(config: PipelineConfig, args):
    kb = kbm.load(config.paths.kb)
    questions = _selected_questions(config, args)
    spec = _prompt_spec(config, args)
    exemplars = load_exemplars(config.paths.exemplars)

    reports = []
    for label in endpoint_labels(config, args):
        endpoint = make_endpoint(config.endpoint(label))
        report = evaluate(questions, spec, endpoint, exemplars, kb, config.effective_seed,
                          refusals=config.refusals, store=templates(config),
                          label=f"{label} {spec.label}")
        write_report(Path(config.paths.reports) / f"{label}.json", report)
        reports.append(report)
    console.print(format_report_table(reports))


def cmd_experiment(config: PipelineConfig, args):
    kb = kbm.load(config.paths.kb)
    entities = read_entities(require(config.paths.entities, "generate"))
    questions = _selected_questions(config, args)
    label = endpoint_labels(config, args)[0]
    endpoint = make_endpoint(config.endpoint(label))

    reports = run_experiment(questions, args.variant, endpoint, kb, entities, _prompt_spec(config, args),
                             load_exemplars(config.paths.exemplars), config.effective_seed,
                             config.similarity_bins)
    if not reports:
        raise UsageError(f"Experiment {args.variant} produced no report for this benchmark")
    write_report(Path(config.paths.reports) / f"{args.variant}.{label}.json", list(reports.values()))
    console.print(format_report_table(list(reports.values()), title=f"{args.variant} ({label}), accuracy (%)"))


def cmd_stats(config: PipelineConfig, args):
    path = require(args.file or config.paths.benchmark, "questions")
    kb = kbm.load(config.paths.kb) if Path(config.paths.kb).exists() else None
    stats = stats_for_file(path, kb)
    console.print(format_stats(stats))

    output = Path(config.paths.reports) / f"{path.stem}.stats.json"
    output.parent.mkdir(parents=True, exist_ok=True)
    with open(output, "w", encoding="utf-8") as f:
        json.dump(stats, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info("Statistics written to %s", output)

    if args.plot:
        if stats["kind"] != "entities":
            raise UsageError("--plot needs an entity file")
        plot_histograms(read_entities(path), args.plot)


COMMANDS = {
    "ingest": cmd_ingest,
    "generate": cmd_generate,
    "questions": cmd_questions,
    "filter": cmd_filter,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
    "stats": cmd_stats,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline configuration file (default: config/pipeline.json)")
    common.add_argument("--seed", type=int, help="global seed, overrides the configuration")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--kb", help="knowledge base document")
    common.add_argument("--entities", help="artificial entity file (JSON lines)")
    common.add_argument("--benchmark", help="benchmark file (JSON lines)")
    common.add_argument("--reports", help="report directory")

    endpoint = argparse.ArgumentParser(add_help=False)
    endpoint.add_argument("--endpoint", action="append",
                          help="endpoint label from the configuration; repeat for several models")

    prompting = argparse.ArgumentParser(add_help=False)
    prompting.add_argument("--manifest", help="filter manifest restricting the benchmark")
    prompting.add_argument("--shots", choices=["zero", "few"])
    prompting.add_argument("--reasoning", choices=["vanilla", "cot"])
    prompting.add_argument("--format", choices=["structured", "natural_language"])

    parser = argparse.ArgumentParser(prog="run.py", description=__doc__.strip().splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)

    ingest = commands.add_parser("ingest", parents=[common], help="validate a knowledge base document")
    ingest.add_argument("--output", help="write the canonical document here")
    commands.add_parser("generate", parents=[common], help="generate artificial entities")
    questions = commands.add_parser("questions", parents=[common], help="generate KU/KD/KA questions")
    questions.add_argument("--template-endpoint", help="endpoint label used to generate missing templates")
    commands.add_parser("filter", parents=[common, endpoint], help="drop questions a model cannot support")
    commands.add_parser("evaluate", parents=[common, endpoint, prompting], help="evaluate models")
    experiment = commands.add_parser("experiment", parents=[common, endpoint, prompting],
                                     help="run an analysis variant")
    experiment.add_argument("--variant", required=True, choices=VARIANTS)
    stats = commands.add_parser("stats", parents=[common], help="summarize an entity or benchmark file")
    stats.add_argument("file", nargs="?", help="entity or benchmark file (default: configured benchmark)")
    stats.add_argument("--plot", help="write attribute/relation histograms of an entity file to this HTML file")
    return parser


def load_config(args) -> PipelineConfig:
    config = PipelineConfig.from_file(args.config)
    endpoints = getattr(args, "endpoint", None)
    return config.with_overrides(seed=args.seed, endpoint=endpoints[0] if endpoints else None,
                                 kb=args.kb, entities=args.entities, benchmark=args.benchmark,
                                 reports=args.reports)


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns the process exit code"""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        config = load_config(args)
        COMMANDS[args.command](config, args)
    except PipelineError as e:
        logger.error("%s", e)
        return e.exit_code
    return 0


if __name__ == '__main__':
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\nInterrupted")
        sys.exit(0)
    except Exception as e:
        logger.exception("Unexpected error: %s", e)
        sys.exit(1)
