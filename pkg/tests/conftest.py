from pathlib import Path

import pytest

from vadtree.pipeline import PipelineConfig

TESTS = Path(__file__).parent
DEMO = TESTS.parent / "src" / "vadtree" / "data" / "demo"
GOLDEN = TESTS / "golden"


@pytest.fixture
def demo_config(tmp_path):
    """Demo corpus config writing into a fresh output directory."""
    return PipelineConfig.from_file(DEMO / "config.json", output=str(tmp_path / "out"))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
