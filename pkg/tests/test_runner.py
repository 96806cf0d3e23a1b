import json
from pathlib import Path

import pytest

from oracles import text_cosine
from persona_bridge.errors import ConfigError, MissingFixtureError, StageError
from persona_bridge.providers import CallableProvider, ScriptedProvider
from persona_bridge.runner import STAGES, ExperimentConfig, Pipeline, RunConfig, run_experiment, run_pipeline
from persona_bridge.simulation import SimulatedLLM

DETERMINISTIC = ["persona.truth.json", "hidden_prompt.txt", "transcript.json", "relations.json", "extraction_report.json", "graph.json", "graph.dot", "report.json"]


def test_scripted_run_is_reproducible(scripted_config, tmp_path):
    dirs = [run_pipeline(scripted_config(tmp_path / f"r{i}")) for i in range(2)]
    names = DETERMINISTIC + [f"{k}.{s}.{ext}" for s in ("vanilla", "frequency_aware", "pd_agent") for k, ext in (("prediction", "json"), ("prompt", "txt"))]
    for name in names:
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes(), name
    manifest = json.loads((dirs[0] / "manifest.json").read_text())
    assert [manifest["stages"][s]["status"] for s in STAGES] == ["completed"] * 6


def test_fixture_run_matches_golden(scripted_config, tmp_path):
    run = run_pipeline(scripted_config(tmp_path / "r"))
    report = json.loads((run / "report.json").read_text())
    truth = report["truth"]
    order = {
        "SocialRole": ["Professional", "Technical Management", "Public Service"],
        "Personality": ["Big-Five Traits"],
        "Background": ["Education", "Location", "Family Status"],
        "Interests": ["Hobbies", "Core Values", "Comm. Style"],
    }
    for strategy, golden in (("pd_agent", 0.8166666666666667), ("vanilla", 0.7541666666666667)):
        pred = report["strategies"][strategy]["predicted"]
        oracle = sum(
            text_cosine(" ".join(pred[f"{d}/{s}"] for s in subs), " ".join(truth[d][s] for s in subs))
            for d, subs in order.items()
        ) / 4
        assert oracle == pytest.approx(golden, abs=1e-12)
        assert report["strategies"][strategy]["overall"] == pytest.approx(golden, abs=1e-12)
    assert len(json.loads((run / "relations.json").read_text())) == 12




def _providers(fixture_dir):
    return (
        ScriptedProvider.from_file(fixture_dir / "pd.json", name="pd"),
        ScriptedProvider.from_file(fixture_dir / "target.json", name="target"),
    )


def test_resume_after_crash(scripted_config, fixture_dir, tmp_path):
    cfg = scripted_config(tmp_path / "r")
    pd, target = _providers(fixture_dir)

    def crash(messages):
        raise MissingFixtureError("crash")

    run_pipeline(cfg, pd=pd, target=target, stop_after="extract")
    graph_failing = Pipeline(cfg, pd=pd, target=target)
    graph_failing.stage_graph = lambda: (_ for _ in ()).throw(MissingFixtureError("boom"))
    with pytest.raises(StageError) as info:
        graph_failing.run()
    assert info.value.stage == "graph" and info.value.exit_code == 3
    manifest = json.loads((tmp_path / "r" / "manifest.json").read_text())
    assert manifest["stages"]["graph"]["status"] == "failed"

    target_calls = target.calls
    run_pipeline(cfg, pd=pd, target=CallableProvider(crash, "target"))
    assert target.calls == target_calls
    manifest = json.loads((tmp_path / "r" / "manifest.json").read_text())
    assert all(manifest["stages"][s]["status"] == "completed" for s in STAGES)


def test_tampered_artifact_reruns_downstream(scripted_config, fixture_dir, tmp_path):
    cfg = scripted_config(tmp_path / "r")
    run_pipeline(cfg)
    graph = tmp_path / "r" / "graph.json"
    original = graph.read_bytes()
    graph.write_text("{}")
    run_pipeline(cfg)
    assert graph.read_bytes() == original


def test_failed_stage_keeps_earlier_artifacts(scripted_config, fixture_dir, tmp_path):
    (fixture_dir / "target.json").write_text("[]")
    cfg = scripted_config(tmp_path / "r")
    with pytest.raises(StageError) as info:
        run_pipeline(cfg)
    assert info.value.stage == "interview"
    assert (tmp_path / "r" / "persona.truth.json").exists()
    assert json.loads((tmp_path / "r" / "transcript.json").read_text())["failed"] is True


@pytest.mark.parametrize(
    "data",
    [
        {"target": {"kind": "simulated"}},
        {"pd": {"kind": "telepathy"}, "target": {"kind": "simulated"}},
        {"pd": {"kind": "scripted"}, "target": {"kind": "simulated"}},
        {"pd": {"kind": "openai"}, "target": {"kind": "simulated"}},
        {"pd": {"kind": "simulated"}, "target": {"kind": "simulated"}, "n_turns": 7},
        {"pd": {"kind": "simulated"}, "target": {"kind": "simulated"}, "strategies": ["magic"]},
        {"pd": {"kind": "simulated"}, "target": {"kind": "simulated"}, "colour": "red"},
        {"pd": {"kind": "simulated", "flavour": 1}, "target": {"kind": "simulated"}},
    ],
)
def test_bad_run_configs(data):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(data)


def test_config_file_paths_resolve_relative(tmp_path):
    (tmp_path / "cfg.json").write_text(json.dumps({"pd": {"kind": "scripted", "fixtures": "pd.json"}, "target": {"kind": "simulated"}}))
    cfg = RunConfig.from_file(tmp_path / "cfg.json")
    assert Path(cfg.pd.fixtures) == tmp_path / "pd.json"
    with pytest.raises(ConfigError):
        RunConfig.from_file(tmp_path / "missing.json")


def _experiment(tmp_path, fixture_dir, targets=("t1",), runs=1, **extra):
    data = {
        "backbones": [{"id": "sim", "provider": {"kind": "simulated"}}],
        "targets": [{"id": t, "group": "Small", "provider": {"kind": "simulated"}} for t in targets],
        "runs_per_cell": runs,
        "output_dir": str(tmp_path / "exp"),
        **extra,
    }
    return ExperimentConfig.from_dict(data, base_dir=fixture_dir)


def test_experiment_one_by_one_by_three(tmp_path, fixture_dir):
    report = run_experiment(_experiment(tmp_path, fixture_dir))
    assert {c.strategy for c in report.cells} == {"vanilla", "frequency_aware", "pd_agent"}
    md = (tmp_path / "exp" / "report.md").read_text()
    assert "Vanilla" in md and "Freq-Aware" in md and "PD-Agent" in md
    assert json.loads((tmp_path / "exp" / "report.json").read_text())["failed"] == []


def test_experiment_stability_with_five_runs(tmp_path, fixture_dir):
    report = run_experiment(_experiment(tmp_path, fixture_dir, runs=5, max_concurrency=3))
    assert set(report.stability) == {f"sim/t1/{s}" for s in ("vanilla", "frequency_aware", "pd_agent")}
    for s in ("vanilla", "frequency_aware", "pd_agent"):
        assert len(report.cell("sim", "t1", s).run_scores) == 5


def test_experiment_isolates_failed_cells(tmp_path, fixture_dir):
    cfg = _experiment(tmp_path, fixture_dir, targets=("good", "broken"))
    cfg.targets[1].provider.kind = "scripted"
    cfg.targets[1].provider.fixtures = str(fixture_dir / "missing.json")
    report = run_experiment(cfg)
    assert [(f["target"], f["run"]) for f in report.failed] == [("broken", 0)]
    assert report.cell("sim", "good", "pd_agent") is not None
    assert report.cell("sim", "broken", "pd_agent") is None
    assert "Failed cells" in (tmp_path / "exp" / "report.md").read_text()


def test_experiment_missing_fixture_marks_stage(tmp_path, fixture_dir):
    cfg = _experiment(tmp_path, fixture_dir, targets=("t1", "t2"))

    def factory(backbone, target):
        sim = SimulatedLLM()
        pd = CallableProvider(sim, "pd")
        if target == "t2":
            return pd, ScriptedProvider({}, name="target")
        return pd, CallableProvider(sim, "target")

    report = run_experiment(cfg, provider_factory=factory)
    assert report.failed[0]["stage"] == "interview" and report.failed[0]["target"] == "t2"
    assert report.cell("sim", "t1", "vanilla") is not None


def test_experiment_config_validation(fixture_dir):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"backbones": [], "targets": []})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"backbones": [{"id": "b"}], "targets": [{"id": "t", "provider": {"kind": "simulated"}}]})


def test_inference_limits_come_from_config(tmp_path, sim_pair):
    pd, target = sim_pair()
    cfg = RunConfig.from_dict(
        {"pd": {"kind": "simulated"}, "target": {"kind": "simulated"}, "top_hubs": 3, "top_tokens": 5, "output_dir": str(tmp_path / "r")}
    )
    run = run_pipeline(cfg, pd=pd, target=target)
    pd_prompt = (run / "prompt.pd_agent.txt").read_text()
    assert "3. " in pd_prompt and "\n4. " not in pd_prompt
    assert "TOKEN FREQUENCIES (top 5, respondent only)" in (run / "prompt.frequency_aware.txt").read_text()
    assert json.loads((run / "manifest.json").read_text())["config"]["top_hubs"] == 3
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"pd": {"kind": "simulated"}, "target": {"kind": "simulated"}, "top_hubs": 0})
