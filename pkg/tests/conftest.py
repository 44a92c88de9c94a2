import json
import sys

import pytest
from hypothesis import settings

from da_seqlab.corpus import Corpus, DACode, Session, SpeakerRole, Turn
from da_seqlab.scoring import GroupAssignment

settings.register_profile("ci", deadline=None, print_blob=True)
settings.load_profile("ci")


def make_session(sid, lid, turns):
    """turns: list of (speaker, [codes]) with speaker 's' or 't'."""
    role = {"s": SpeakerRole.STUDENT, "t": SpeakerRole.CHATBOT}
    return Session(
        sid, lid,
        tuple(Turn(i, role[sp], tuple(DACode.parse(c) for c in codes)) for i, (sp, codes) in enumerate(turns)),
    )


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


@pytest.fixture
def tiny_corpus():
    return Corpus.from_sessions([
        make_session("s1", "a", [("t", ["A", "Q"]), ("s", ["R"]), ("t", ["Cp"]), ("s", ["R"])]),
        make_session("s2", "b", [("t", ["Q"]), ("s", ["R"]), ("t", ["S"])]),
        make_session("s3", "c", [("t", ["Q"]), ("s", ["Q"]), ("t", ["A"])]),
        make_session("s4", "d", [("t", ["G"]), ("s", ["G"])]),
    ])


@pytest.fixture
def tiny_groups(tiny_corpus):
    return GroupAssignment({"a": "HP", "b": "HP", "c": "LP", "d": "LP"}).for_corpus(tiny_corpus)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
