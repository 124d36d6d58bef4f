from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from corpus import build_corpus  # noqa: E402

from duallens.backends.base import CallLog  # noqa: E402
from duallens.backends.mock import load_mock_backends  # noqa: E402


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    return build_corpus(root)


@pytest.fixture()
def mock_backends(corpus):
    def factory(call_log: CallLog | None = None):
        return load_mock_backends(corpus.mock_dir, call_log=call_log)
    return factory


@pytest.fixture(scope="session")
def full_run(corpus):
    """One complete pipeline pass over the corpus, shared by read-only tests."""
    from duallens.answerer import run_tasks
    from duallens.cache import TwoLayerCache
    from duallens.core.config import PipelineConfig
    from duallens.evalharness.judge import judge_records

    backends = load_mock_backends(corpus.mock_dir)
    records = run_tasks(corpus.tasks, PipelineConfig(), backends, TwoLayerCache(),
                        image_root=corpus.image_root)
    judgments = judge_records(corpus.tasks, records, mode="match")
    return records, judgments


FIXTURES = Path(__file__).parent / "fixtures"
