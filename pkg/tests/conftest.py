from pathlib import Path

import pytest

from app.cli.main import main
from app.database.datastore import configure_datastore

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def corpus_path() -> Path:
    return FIXTURES / "corpus.jsonl"


@pytest.fixture
def tasks_path() -> Path:
    return FIXTURES / "tasks.jsonl"


@pytest.fixture
def workdir(tmp_path) -> Path:
    path = tmp_path / "work"
    configure_datastore(path)
    return path


@pytest.fixture
def fader(workdir, corpus_path, tasks_path):
    """Run a fader subcommand against the fixture corpus; returns the exit code."""

    def run(command: str, *extra: str, workdir: Path = workdir) -> int:
        argv = [
            command,
            "--workdir", str(workdir),
            "--corpus", str(corpus_path),
            "--tasks", str(tasks_path),
            "--profile", "qasper",
            "--seed", "7",
            "--budgets", "0,50,100,200",
            *extra,
        ]
        return main(argv)

    return run
