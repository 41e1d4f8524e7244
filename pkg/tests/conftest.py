from __future__ import annotations

from pathlib import Path

import pytest

from spec_anvil.agents import AgentRole
from spec_anvil.backends import ScriptedBackend
from spec_anvil.harness import ACCESS_LOG, load_corpus

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
TOY_CORPUS = FIXTURES / "toy-corpus"
TOY_SPECS = FIXTURES / "toy-specs"
TOY_SCRIPTS = FIXTURES / "toy-scripts"
REPLAY = FIXTURES / "table1-replay" / "outcomes.jsonl"
COSTS = FIXTURES / "table3-costs.json"
DATA = Path(__file__).resolve().parent / "data"


def scripted(name: str) -> dict[AgentRole, ScriptedBackend]:
    backend = ScriptedBackend(TOY_SCRIPTS / name)
    return {role: backend for role in AgentRole}


@pytest.fixture(scope="session")
def toy_corpus():
    return load_corpus(TOY_CORPUS)


@pytest.fixture(scope="session")
def toy_campaign(toy_corpus):
    """The scripted composite campaign, shared across tests; access log captured."""
    from spec_anvil.pipeline import run_campaign

    ACCESS_LOG.clear()
    sessions = []
    result = run_campaign(toy_corpus, scripted("campaign"), workers=2, sink=sessions.append)
    events = ACCESS_LOG.events()
    return result, sessions, events


MINI_TEST = """\
import unittest
from mod import f


class T(unittest.TestCase):
    def test_f(self):
        self.assertEqual(f(2), 4)
"""


def write_corpus(root: Path, buggy: str = "def f(x):\n    return x + 1\n",
                 fixed: str = "def f(x):\n    return x * 2\n", **entry_overrides) -> Path:
    """A one-defect corpus whose test passes iff f(2) == 4."""
    import json

    for variant, body in (("buggy", buggy), ("fixed", fixed)):
        tree = root / "d1" / variant
        tree.mkdir(parents=True, exist_ok=True)
        (tree / "mod.py").write_text(body)
        (tree / "test_mod.py").write_text(MINI_TEST)
    entry = {
        "id": "d1", "project": "mini",
        "buggy_dir": "d1/buggy", "fixed_dir": "d1/fixed",
        "failing_tests": ["test_mod.T.test_f"],
        "modified_files": ["mod.py"],
        "test": {"setup": None, "cmd": "{python} -B -m unittest test_mod", "timeout_s": 30},
        "test_files": ["test_mod.py"],
    }
    entry.update(entry_overrides)
    (root / "corpus.json").write_text(json.dumps({"defects": [entry]}))
    return root


# (number, title, passed) for each acceptance criterion that ran
ACCEPTANCE: list[tuple[int, str, bool]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {title}")
