import json
import shutil
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from persona_bridge.providers import CallableProvider, ChatMessage, ScriptedProvider, message_key  # noqa: E402
from persona_bridge.runner import RunConfig  # noqa: E402
from persona_bridge.schema import default_schema  # noqa: E402
from persona_bridge.simulation import SimulatedLLM  # noqa: E402

FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture
def schema():
    return default_schema()


@pytest.fixture
def fixture_dir(tmp_path):
    """A private copy of the recorded fixtures plus run.json."""
    dst = tmp_path / "fixtures"
    shutil.copytree(FIXTURES, dst, ignore=shutil.ignore_patterns("*.py", "__pycache__"))
    return dst


@pytest.fixture
def scripted_config(fixture_dir):
    def make(out_dir, **overrides):
        data = json.loads((fixture_dir / "run.json").read_text())
        data.update(output_dir=str(out_dir), **overrides)
        return RunConfig.from_dict(data, base_dir=fixture_dir)

    return make


@pytest.fixture
def sim_pair():
    def make(**kwargs):
        sim = SimulatedLLM(**kwargs)
        return CallableProvider(sim, name="pd"), CallableProvider(sim, name="target")

    return make


def scripted(pairs, name="scripted"):
    """ScriptedProvider from [(messages, reply), ...]."""
    fixtures = {}
    for messages, reply in pairs:
        msgs = [m if isinstance(m, ChatMessage) else ChatMessage(*m) for m in messages]
        fixtures[message_key(msgs)] = reply
    return ScriptedProvider(fixtures, name=name)


# acceptance reporting: one line per criterion at the end of the session
_ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args
    status = "PASS" if report.passed else "FAIL"
    detail = getattr(item, "acceptance_detail", "")
    if report.failed and not detail:
        detail = str(report.longrepr).strip().splitlines()[-1][:160]
    _ACCEPTANCE[number] = (title, status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status, detail = _ACCEPTANCE[number]
        line = f"criterion {number} [{status}] {title}"
        terminalreporter.write_line(f"{line}: {detail}" if detail else line)
