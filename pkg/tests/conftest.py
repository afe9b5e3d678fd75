from __future__ import annotations

import os
from pathlib import Path

import pytest

from quotemark.corpus import CharacterEntity, MentionSpan, NovelBundle, Quotation, load_bundle
from synthetic import make_corpus

DATA = Path(__file__).parent / "data"
PDNC_ENV = "QUOTEMARK_PDNC_DIR"


def pytest_addoption(parser):
    parser.addoption("--pdnc-dir", default=None, help="root of a PDNC release (one folder per novel)")


@pytest.fixture(scope="session")
def pdnc_root(request) -> Path | None:
    raw = request.config.getoption("--pdnc-dir") or os.environ.get(PDNC_ENV)
    return Path(raw) if raw else None


@pytest.fixture(scope="session")
def two_paragraphs() -> NovelBundle:
    return load_bundle(DATA / "two_paragraphs.json")


@pytest.fixture(scope="session")
def synth_corpus() -> list[NovelBundle]:
    return make_corpus(3, 120)


def make_bundle(text: str, characters, quotes=(), novel_id: str = "fixture") -> NovelBundle:
    """Bundle whose quotations are given as (quote text incl. marks, speaker, quote_type)."""
    qs = []
    cursor = 0
    for i, (quoted, speaker, qtype) in enumerate(quotes):
        s = text.index(quoted, cursor)
        cursor = s + len(quoted)
        qs.append(Quotation(f"Q{i}", (s, s + len(quoted)), speaker, (), None, qtype, ()))
    return NovelBundle(novel_id, novel_id, text, tuple(characters), tuple(qs))


@pytest.fixture
def bennets() -> tuple[CharacterEntity, ...]:
    return (
        CharacterEntity(0, "Elizabeth Bennet", frozenset({"Elizabeth", "Eliza", "Lizzie", "Liz"})),
        CharacterEntity(1, "Mary Bennet", frozenset({"Mary"})),
    )


def mention(text: str, surface: str, ids=(), start: int = 0) -> MentionSpan:
    s = text.index(surface, start)
    return MentionSpan((s, s + len(surface)), surface, tuple(ids))


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Collects one "PASS/FAIL criterion N: ..." line per acceptance criterion."""
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
