"""Run configuration, the resumable end-to-end pipeline and experiment matrices.

A run directory is self-contained::

    manifest.json            stage statuses, artifact checksums, config snapshot
    persona.truth.json       sampled hidden persona
    hidden_prompt.txt        the target's system prompt
    transcript.json          interview
    provider_log.jsonl       every provider call
    relations.json           accepted bridging relations
    extraction_report.json   accepted + rejected records, raw reply
    graph.json, graph.dot    semantic graph
    prediction.<s>.json      one per strategy, with prompt.<s>.txt
    report.json              scores per strategy

Each stage reads its inputs from disk, so a rerun skips every stage whose
recorded artifacts still match their checksums and recomputes the rest.
"""

from __future__ import annotations

import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from ._io import atomic_write, read_json, sha256_file, write_json
from .errors import ConfigError, PersonaBridgeError, StageError
from .evaluation import (
    EXPECTED_RUNS,
    STABILITY_THRESHOLD,
    RunResult,
    aggregate_matrix,
    score_prediction,
)
from .extraction import extract_bridging_relations, load_relations, save_relations, save_report
from .graph import build_graph, export_graph, load_graph
from .inference import TOP_HUBS, TOP_TOKENS, InferenceStrategy, infer, strategy_messages
from .interview import DEFAULT_TOPICS, DEFAULT_TURNS, load_transcript, run_interview
from .providers import (
    API_KEY_ENV,
    ChatProvider,
    ChatRequestParams,
    HashingEmbedder,
    OpenAICompatibleProvider,
    RecordingProvider,
    ScriptedProvider,
    TranscriptRecorder,
)
from .schema import (
    PersonaSchema,
    default_schema,
    load_profile,
    load_schema,
    render_hidden_prompt,
    sample_persona,
    save_profile,
)

logger = logging.getLogger(__name__)

STAGES = ("sample", "interview", "extract", "graph", "infer", "evaluate")
PROVIDER_KINDS = ("openai", "scripted", "simulated")
ALL_STRATEGIES = tuple(s.value for s in InferenceStrategy)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class ProviderSpec:
    kind: str = "scripted"
    fixtures: str | None = None
    base_url: str | None = None
    model: str = "default"
    api_key_env: str = API_KEY_ENV
    temperature: float = 0.0
    max_tokens: int = 1024
    seed: int | None = 0
    timeout: float = 60.0
    max_attempts: int = 3
    embedding_model: str | None = None
    record_to: str | None = None

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "ProviderSpec":
        if not isinstance(data, dict):
            raise ConfigError(f"provider spec must be an object, got {data!r}")
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown provider keys: {sorted(unknown)}")
        spec = cls(**data)
        if spec.kind not in PROVIDER_KINDS:
            raise ConfigError(f"provider kind must be one of {PROVIDER_KINDS}, got {spec.kind!r}")
        if spec.kind == "scripted" and not spec.fixtures:
            raise ConfigError("scripted providers need a 'fixtures' path")
        if spec.kind == "openai" and not spec.base_url:
            raise ConfigError("openai providers need a 'base_url'")
        if base_dir is not None:
            for attr in ("fixtures", "record_to"):
                value = getattr(spec, attr)
                if value and not os.path.isabs(value):
                    setattr(spec, attr, os.path.normpath(base_dir / value))
        return spec

    def params(self) -> ChatRequestParams:
        return ChatRequestParams(self.model, self.temperature, self.max_tokens, self.seed)


def build_provider(spec: ProviderSpec, name: str, recorder: TranscriptRecorder | None = None) -> ChatProvider:
    params = spec.params()
    if spec.kind == "scripted":
        provider: ChatProvider = ScriptedProvider.from_file(spec.fixtures, name=name, params=params)
    elif spec.kind == "simulated":
        from .simulation import SimulatedLLM
        from .providers import CallableProvider

        provider = CallableProvider(SimulatedLLM(), name=name, params=params)
    else:
        provider = OpenAICompatibleProvider(
            spec.base_url,
            spec.model,
            api_key=os.environ.get(spec.api_key_env),
            params=params,
            name=name,
            timeout=spec.timeout,
            max_attempts=spec.max_attempts,
            embedding_model=spec.embedding_model,
        )
    if spec.record_to:
        provider = RecordingProvider(provider, spec.record_to, name=name)
    provider.recorder = recorder
    return provider


@dataclass
class RunConfig:
    pd: ProviderSpec
    target: ProviderSpec
    output_dir: str = "runs/run"
    seed: int = 0
    n_turns: int = DEFAULT_TURNS
    enforce_turn_range: bool = True
    strategies: tuple[str, ...] = ALL_STRATEGIES
    schema: str | None = None
    topics: tuple[str, ...] = DEFAULT_TOPICS
    embedder: dict = field(default_factory=lambda: {"kind": "hashing", "dim": 256})
    runs_per_cell: int = EXPECTED_RUNS
    top_hubs: int = TOP_HUBS
    top_tokens: int = TOP_TOKENS

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("run config must be a JSON object")
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for role in ("pd", "target"):
            if role not in data:
                raise ConfigError(f"config lacks the '{role}' provider")
            data[role] = ProviderSpec.from_dict(data[role], base_dir)
        if "strategies" in data:
            try:
                data["strategies"] = tuple(InferenceStrategy(s).value for s in data["strategies"])
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        if "topics" in data:
            data["topics"] = tuple(data["topics"])
        if base_dir is not None:
            for attr in ("schema", "output_dir"):
                value = data.get(attr)
                if value and not os.path.isabs(value):
                    data[attr] = os.path.normpath(base_dir / value)
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            data = read_json(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data, base_dir=path.resolve().parent)

    def validate(self) -> None:
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        if self.enforce_turn_range and not 3 <= self.n_turns <= 5:
            raise ConfigError(f"n_turns must be 3..5 when enforce_turn_range is set, got {self.n_turns}")
        if self.top_hubs < 1 or self.top_tokens < 1:
            raise ConfigError("top_hubs and top_tokens must be positive")
        if self.embedder.get("kind") not in ("hashing", "openai"):
            raise ConfigError(f"unknown embedder kind {self.embedder.get('kind')!r}")

    def snapshot(self) -> dict:
        return asdict(self)

    def load_schema(self) -> PersonaSchema:
        return load_schema(self.schema) if self.schema else default_schema()

    def build_embedder(self):
        spec = dict(self.embedder)
        kind = spec.pop("kind")
        if kind == "hashing":
            return HashingEmbedder(dim=int(spec.get("dim", 256)))
        pspec = ProviderSpec.from_dict({"kind": "openai", **spec})
        return build_provider(pspec, "embedder")


class _Manifest:
    def __init__(self, run_dir: Path, config: RunConfig):
        self.path = run_dir / "manifest.json"
        self.run_dir = run_dir
        if self.path.exists():
            self.data = read_json(self.path)
        else:
            self.data = {"created_at": _now(), "stages": {}}
        self.data["config"] = config.snapshot()
        self._lock = threading.Lock()

    def stage_valid(self, stage: str) -> bool:
        entry = self.data["stages"].get(stage)
        if not entry or entry.get("status") != "completed":
            return False
        for name, digest in entry.get("artifacts", {}).items():
            p = self.run_dir / name
            if not p.exists() or sha256_file(p) != digest:
                return False
        return True

    def start(self, stage: str) -> None:
        self.data["stages"][stage] = {"status": "running", "started_at": _now()}
        self.save()

    def complete(self, stage: str, artifacts: list[str]) -> None:
        entry = self.data["stages"][stage]
        entry.update(
            status="completed",
            finished_at=_now(),
            artifacts={a: sha256_file(self.run_dir / a) for a in artifacts},
        )
        self.save()

    def fail(self, stage: str, error: BaseException) -> None:
        entry = self.data["stages"].setdefault(stage, {})
        entry.update(status="failed", finished_at=_now(), error=f"{type(error).__name__}: {error}")
        self.save()

    def invalidate_from(self, stage: str) -> None:
        for s in STAGES[STAGES.index(stage) :]:
            self.data["stages"].pop(s, None)

    def save(self) -> None:
        with self._lock:
            self.data["updated_at"] = _now()
            write_json(self.path, self.data)


class Pipeline:
    """One persona-discovery run over a run directory.

    ``pd`` / ``target`` override the configured providers (tests and
    notebooks use this to plug in in-process models).
    """

    def __init__(self, config: RunConfig, run_dir=None, pd: ChatProvider | None = None, target: ChatProvider | None = None):
        self.config = config
        self.run_dir = Path(run_dir or config.output_dir)
        self.schema = config.load_schema()
        self.recorder = TranscriptRecorder(self.run_dir / "provider_log.jsonl")
        self._pd = pd
        self._target = target

    @property
    def pd(self) -> ChatProvider:
        if self._pd is None:
            self._pd = build_provider(self.config.pd, "pd", self.recorder)
        elif self._pd.recorder is None:
            self._pd.recorder = self.recorder
        return self._pd

    @property
    def target(self) -> ChatProvider:
        if self._target is None:
            self._target = build_provider(self.config.target, "target", self.recorder)
        elif self._target.recorder is None:
            self._target.recorder = self.recorder
        return self._target

    def _p(self, name: str) -> Path:
        return self.run_dir / name

    def stage_sample(self) -> list[str]:
        truth = sample_persona(self.schema, self.config.seed)
        save_profile(self._p("persona.truth.json"), truth)
        atomic_write(self._p("hidden_prompt.txt"), render_hidden_prompt(truth, self.schema) + "\n")
        return ["persona.truth.json", "hidden_prompt.txt"]

    def stage_interview(self) -> list[str]:
        hidden = self._p("hidden_prompt.txt").read_text(encoding="utf-8").rstrip("\n")
        run_interview(
            self.pd,
            self.target,
            hidden,
            self.config.n_turns,
            seed=self.config.seed,
            topics=self.config.topics,
            enforce_turn_range=self.config.enforce_turn_range,
            out_dir=self.run_dir,
        )
        return ["transcript.json"]

    def stage_extract(self) -> list[str]:
        report = extract_bridging_relations(load_transcript(self._p("transcript.json")), self.pd)
        save_relations(self._p("relations.json"), report.accepted)
        save_report(self._p("extraction_report.json"), report)
        return ["relations.json", "extraction_report.json"]

    def stage_graph(self) -> list[str]:
        g = build_graph(load_relations(self._p("relations.json")))
        atomic_write(self._p("graph.json"), export_graph(g, "canonical-json"))
        atomic_write(self._p("graph.dot"), export_graph(g, "dot"))
        return ["graph.json", "graph.dot"]

    def stage_infer(self) -> list[str]:
        transcript = load_transcript(self._p("transcript.json"))
        graph = load_graph(self._p("graph.json"))
        written = []
        for s in self.config.strategies:
            limits = {"top_hubs": self.config.top_hubs, "top_tokens": self.config.top_tokens}
            msgs = strategy_messages(s, self.schema, transcript=transcript, graph=graph, **limits)
            atomic_write(self._p(f"prompt.{s}.txt"), "\n\n".join(f"[{m.role}]\n{m.content}" for m in msgs) + "\n")
            profile = infer(s, self.schema, self.pd, transcript=transcript, graph=graph, **limits)
            save_profile(self._p(f"prediction.{s}.json"), profile)
            written += [f"prompt.{s}.txt", f"prediction.{s}.json"]
        return written

    def stage_evaluate(self) -> list[str]:
        truth = load_profile(self._p("persona.truth.json"), self.schema)
        embedder = self.config.build_embedder()
        out = {"truth": truth.to_dict()["assignments"], "strategies": {}}
        for s in self.config.strategies:
            pred = load_profile(self._p(f"prediction.{s}.json"), self.schema)
            out["strategies"][s] = score_prediction(pred, truth, embedder, self.schema).to_dict()
        write_json(self._p("report.json"), out)
        return ["report.json"]

    def run(self, stop_after: str | None = None) -> Path:
        self.run_dir.mkdir(parents=True, exist_ok=True)
        manifest = _Manifest(self.run_dir, self.config)
        dirty = False
        for stage in STAGES:
            if not dirty and manifest.stage_valid(stage):
                logger.info("stage %s up to date, skipping", stage)
            else:
                if not dirty:
                    manifest.invalidate_from(stage)
                    dirty = True
                manifest.start(stage)
                try:
                    artifacts = getattr(self, f"stage_{stage}")()
                except Exception as exc:
                    manifest.fail(stage, exc)
                    logger.error("stage %s failed: %s", stage, exc)
                    raise StageError(stage, exc) from exc
                manifest.complete(stage, artifacts)
            if stage == stop_after:
                break
        return self.run_dir


def run_pipeline(config: RunConfig, run_dir=None, pd=None, target=None, stop_after: str | None = None) -> Path:
    return Pipeline(config, run_dir, pd=pd, target=target).run(stop_after=stop_after)


@dataclass
class MatrixEntry:
    id: str
    provider: ProviderSpec
    group: str = ""


@dataclass
class ExperimentConfig:
    backbones: list[MatrixEntry]
    targets: list[MatrixEntry]
    strategies: tuple[str, ...] = ALL_STRATEGIES
    runs_per_cell: int = EXPECTED_RUNS
    seed: int = 0
    n_turns: int = DEFAULT_TURNS
    enforce_turn_range: bool = True
    max_concurrency: int = 4
    output_dir: str = "runs/experiment"
    schema: str | None = None
    topics: tuple[str, ...] = DEFAULT_TOPICS
    embedder: dict = field(default_factory=lambda: {"kind": "hashing", "dim": 256})
    stability_threshold: float = STABILITY_THRESHOLD
    top_hubs: int = TOP_HUBS
    top_tokens: int = TOP_TOKENS

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        for key in ("backbones", "targets"):
            entries = data.get(key)
            if not entries:
                raise ConfigError(f"experiment needs at least one entry in '{key}'")
            try:
                data[key] = [
                    MatrixEntry(e["id"], ProviderSpec.from_dict(e["provider"], base_dir), e.get("group", ""))
                    for e in entries
                ]
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"bad '{key}' entry: {exc}") from exc
        if "strategies" in data:
            try:
                data["strategies"] = tuple(InferenceStrategy(s).value for s in data["strategies"])
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        if not data.get("strategies", ALL_STRATEGIES):
            raise ConfigError("at least one strategy is required")
        if "topics" in data:
            data["topics"] = tuple(data["topics"])
        if base_dir is not None:
            for attr in ("schema", "output_dir"):
                value = data.get(attr)
                if value and not os.path.isabs(value):
                    data[attr] = os.path.normpath(base_dir / value)
        cfg = cls(**data)
        if cfg.runs_per_cell < 1 or cfg.max_concurrency < 1:
            raise ConfigError("runs_per_cell and max_concurrency must be positive")
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = read_json(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data, base_dir=path.resolve().parent)

    def run_config(self, backbone: MatrixEntry, target: MatrixEntry, run: int) -> RunConfig:
        cfg = RunConfig(
            pd=backbone.provider,
            target=target.provider,
            output_dir=str(Path(self.output_dir) / "runs" / backbone.id / target.id / f"run-{run}"),
            seed=self.seed + run,
            n_turns=self.n_turns,
            enforce_turn_range=self.enforce_turn_range,
            strategies=self.strategies,
            schema=self.schema,
            topics=self.topics,
            embedder=dict(self.embedder),
            runs_per_cell=self.runs_per_cell,
            top_hubs=self.top_hubs,
            top_tokens=self.top_tokens,
        )
        cfg.validate()
        return cfg


def run_experiment(config: ExperimentConfig, provider_factory=None):
    """Run every (backbone, target, run) pipeline and aggregate the matrix.

    ``provider_factory(backbone_id, target_id)`` may return a ``(pd, target)``
    pair to bypass the configured providers. Failed runs are listed in the
    report and excluded from the averages; the rest of the matrix completes.
    """
    jobs = [
        (b, t, r)
        for b in config.backbones
        for t in config.targets
        for r in range(config.runs_per_cell)
    ]

    def work(job):
        b, t, r = job
        rc = config.run_config(b, t, r)
        pd = target = None
        if provider_factory is not None:
            pd, target = provider_factory(b.id, t.id)
        run_dir = run_pipeline(rc, pd=pd, target=target)
        report = read_json(run_dir / "report.json")
        return [
            RunResult(b.id, t.id, s, report["strategies"][s]["overall"], r) for s in config.strategies
        ]

    results: list[RunResult] = []
    failed: list[dict] = []
    with ThreadPoolExecutor(max_workers=config.max_concurrency) as pool:
        futures = [(job, pool.submit(work, job)) for job in jobs]
        for (b, t, r), fut in futures:
            try:
                results.extend(fut.result())
            except PersonaBridgeError as exc:
                failed.append(
                    {
                        "backbone": b.id,
                        "target": t.id,
                        "run": r,
                        "stage": getattr(exc, "stage", None),
                        "error": str(exc),
                    }
                )
                logger.error("run %s/%s/%d failed: %s", b.id, t.id, r, exc)

    report = aggregate_matrix(
        results,
        targets=[t.id for t in config.targets],
        target_groups={t.id: t.group for t in config.targets},
        expected_runs=config.runs_per_cell,
        threshold=config.stability_threshold,
    )
    report.failed = sorted(failed, key=lambda f: (f["backbone"], f["target"], f["run"]))
    out = Path(config.output_dir)
    write_json(out / "report.json", report.to_dict())
    atomic_write(out / "report.md", report.to_markdown())
    return report
