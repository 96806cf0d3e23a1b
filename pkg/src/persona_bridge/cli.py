"""Command-line entry point: ``persona-bridge <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 provider error,
4 validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ._io import atomic_write, write_json
from .errors import ConfigError, PersonaBridgeError, StageError
from .evaluation import score_prediction
from .extraction import extract_bridging_relations, load_relations, save_relations, save_report
from .graph import build_graph, export_graph, load_graph
from .inference import InferenceStrategy, infer
from .interview import load_transcript, run_interview
from .providers import HashingEmbedder, TranscriptRecorder
from .runner import ExperimentConfig, RunConfig, build_provider, run_experiment, run_pipeline
from .schema import default_schema, load_profile, load_schema, render_hidden_prompt, sample_persona, save_profile

logger = logging.getLogger("persona_bridge")


def _schema(path):
    return load_schema(path) if path else default_schema()


def cmd_sample(args) -> int:
    schema = _schema(args.schema)
    profile = sample_persona(schema, args.seed)
    save_profile(args.out, profile)
    if args.prompt_out:
        atomic_write(args.prompt_out, render_hidden_prompt(profile, schema) + "\n")
    print(profile.to_json(), end="")
    return 0


def _providers(cfg: RunConfig, out_dir: Path):
    recorder = TranscriptRecorder(out_dir / "provider_log.jsonl")
    return build_provider(cfg.pd, "pd", recorder), build_provider(cfg.target, "target", recorder)


def cmd_interview(args) -> int:
    cfg = RunConfig.from_file(args.config)
    out = Path(args.out_dir)
    schema = cfg.load_schema()
    profile = load_profile(args.persona, schema)
    pd, target = _providers(cfg, out)
    transcript = run_interview(
        pd,
        target,
        render_hidden_prompt(profile, schema),
        args.turns or cfg.n_turns,
        seed=cfg.seed,
        topics=cfg.topics,
        enforce_turn_range=cfg.enforce_turn_range,
        out_dir=out,
    )
    print(f"wrote {out / 'transcript.json'} ({len(transcript)} turns)")
    return 0


def cmd_extract(args) -> int:
    cfg = RunConfig.from_file(args.config)
    out = Path(args.out_dir)
    pd, _ = _providers(cfg, out)
    report = extract_bridging_relations(load_transcript(args.transcript), pd)
    save_relations(out / "relations.json", report.accepted)
    save_report(out / "extraction_report.json", report)
    print(f"accepted {len(report.accepted)}, rejected {len(report.rejected)}")
    return 0


def cmd_graph(args) -> int:
    g = build_graph(load_relations(args.relations))
    out = Path(args.out_dir)
    atomic_write(out / "graph.json", export_graph(g, "canonical-json"))
    atomic_write(out / "graph.dot", export_graph(g, "dot"))
    print(f"{len(g.nodes)} nodes, {len(g.edges)} edges")
    return 0


def cmd_infer(args) -> int:
    cfg = RunConfig.from_file(args.config)
    out = Path(args.out_dir)
    schema = cfg.load_schema()
    pd, _ = _providers(cfg, out)
    transcript = load_transcript(args.transcript) if args.transcript else None
    graph = load_graph(args.graph) if args.graph else None
    for s in args.strategy or cfg.strategies:
        s = InferenceStrategy(s)
        if s is InferenceStrategy.PD_AGENT and graph is None:
            raise ConfigError("the pd_agent strategy needs --graph")
        if s is not InferenceStrategy.PD_AGENT and transcript is None:
            raise ConfigError(f"the {s.value} strategy needs --transcript")
        profile = infer(s, schema, pd, transcript=transcript, graph=graph)
        save_profile(out / f"prediction.{s.value}.json", profile)
        print(f"wrote {out / f'prediction.{s.value}.json'}")
    return 0


def cmd_eval(args) -> int:
    schema = _schema(args.schema)
    truth = load_profile(args.truth, schema)
    embedder = HashingEmbedder()
    out = {"strategies": {}}
    for path in args.pred:
        name = Path(path).name
        if name.startswith("prediction.") and name.endswith(".json"):
            name = name[len("prediction.") : -len(".json")]
        out["strategies"][name] = score_prediction(load_profile(path, schema), truth, embedder, schema).to_dict()
    if args.out:
        write_json(args.out, out)
    print(json.dumps({k: v["overall"] for k, v in out["strategies"].items()}, indent=2))
    return 0


def cmd_run(args) -> int:
    cfg = RunConfig.from_file(args.config)
    run_dir = run_pipeline(cfg, run_dir=args.out_dir)
    print(f"run directory: {run_dir}")
    return 0


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    report = run_experiment(cfg)
    print(report.to_markdown(), end="")
    return 0 if not report.failed else 3


def cmd_export_dot(args) -> int:
    dot = export_graph(load_graph(args.graph), "dot")
    if args.out:
        atomic_write(args.out, dot)
    else:
        sys.stdout.write(dot)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="persona-bridge", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample a hidden persona")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--schema")
    p.add_argument("--out", default="persona.truth.json")
    p.add_argument("--prompt-out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("interview", help="interview a persona-conditioned target")
    p.add_argument("--config", required=True)
    p.add_argument("--persona", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--turns", type=int)
    p.set_defaults(func=cmd_interview)

    p = sub.add_parser("extract", help="extract bridging relations from a transcript")
    p.add_argument("--config", required=True)
    p.add_argument("--transcript", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("graph", help="build the semantic graph from relations.json")
    p.add_argument("--relations", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("infer", help="predict a persona with one or more strategies")
    p.add_argument("--config", required=True)
    p.add_argument("--strategy", action="append", choices=[s.value for s in InferenceStrategy])
    p.add_argument("--transcript")
    p.add_argument("--graph")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score predictions against the ground truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--pred", action="append", required=True)
    p.add_argument("--schema")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="run the full pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("experiment", help="run a backbone x target x strategy matrix")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("export-dot", help="render graph.json as Graphviz DOT")
    p.add_argument("--graph", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_dot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error in stage {exc.stage}: {exc.cause}", file=sys.stderr)
        return exc.exit_code
    except PersonaBridgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
