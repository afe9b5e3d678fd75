"""Loading of the shipped word lists (honorifics, speech verbs).

Set ``QUOTEMARK_LEXICON_DIR`` to a directory holding replacement
``honorifics.txt`` / ``speech_verbs.txt`` files.
"""

from __future__ import annotations

import os
from functools import lru_cache
from importlib import resources
from pathlib import Path

LEXICON_ENV = "QUOTEMARK_LEXICON_DIR"


def _read_lines(name: str, path: str | os.PathLike | None = None) -> list[str]:
    if path is not None:
        raw = Path(path).read_text(encoding="utf-8")
    else:
        override = os.environ.get(LEXICON_ENV)
        if override and (Path(override) / name).is_file():
            raw = (Path(override) / name).read_text(encoding="utf-8")
        else:
            raw = resources.files("quotemark").joinpath("lexicons").joinpath(name).read_text(encoding="utf-8")
    lines = []
    for line in raw.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            lines.append(line)
    return lines


def load_honorifics(path: str | os.PathLike | None = None) -> tuple[str, ...]:
    return tuple(dict.fromkeys(h.rstrip(".") for h in _read_lines("honorifics.txt", path)))


def _inflect(base: str) -> set[str]:
    forms = {base, base + "s", base + "ing"}
    if base.endswith("e"):
        forms |= {base + "d", base[:-1] + "ing"}
    elif base.endswith("y") and len(base) > 2 and base[-2] not in "aeiou":
        forms |= {base[:-1] + "ied", base[:-1] + "ies"}
    else:
        forms.add(base + "ed")
    if base.endswith(("s", "sh", "ch", "x")):
        forms.add(base + "es")
    return forms


def parse_speech_verbs(lines: list[str]) -> frozenset[tuple[str, ...]]:
    """Expand lexicon entries into lower-cased token tuples.

    ``"ask"`` yields ask/asks/asked/asking; ``"tell: told tells"`` takes the
    listed forms verbatim in addition to the base.
    """
    forms: set[tuple[str, ...]] = set()
    for line in lines:
        base, _, explicit = line.partition(":")
        base = base.strip().lower()
        words = base.split()
        if len(words) == 1:
            for f in _inflect(base):
                forms.add((f,))
        else:
            forms.add(tuple(words))
        if explicit:
            # irregular entries list whole phrases separated by runs of spaces;
            # each phrase has the same word count as the base
            toks = explicit.lower().split()
            n = len(words)
            for i in range(0, len(toks) - n + 1, n):
                forms.add(tuple(toks[i:i + n]))
    return frozenset(forms)


@lru_cache(maxsize=8)
def _cached_verbs(path: str | None, env: str | None) -> frozenset[tuple[str, ...]]:
    return parse_speech_verbs(_read_lines("speech_verbs.txt", path))


def load_speech_verbs(path: str | os.PathLike | None = None) -> frozenset[tuple[str, ...]]:
    return _cached_verbs(str(path) if path else None, os.environ.get(LEXICON_ENV))
