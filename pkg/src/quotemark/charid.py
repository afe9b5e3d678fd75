"""Character identification: name candidates, alias clustering, name matching."""

from __future__ import annotations

import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence, Union

from .corpus import CharacterEntity, NovelBundle, tokenize_with_offsets
from .errors import EmptyCharacterList, EmptyInput
from .lexicon import load_honorifics

# abbreviations rendered with a period when an alias string is built
_DOTTED = frozenset({"Mr", "Mrs", "Ms", "Dr", "St"})

# capitalized words that start sentences but are not names
STOP_WORDS = frozenset(
    """
    A An And As At But By Do Did Does For From He Her Here Hers Him His How I If In Is It Its
    Let My No Nor Not Now O Of Oh On Or Our She So That The Their Them Then There These They This
    Those To Upon We Well What When Where Which While Who Whom Why With Yes Yet You Your Ah Dear
    Good Pray Perhaps Indeed Only Still Even After Before Though Although Whatever However Chapter
    """.split()
)

_QUOTE_TOKENS = frozenset("\"'“”‘’")
_SENTENCE_END = frozenset(".!?")


@dataclass(frozen=True)
class NameCandidate:
    surface: str
    count: int = 1
    honorific: str | None = None

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.surface != self.surface.strip() or not self.surface:
            raise ValueError(f"bad surface {self.surface!r}")

    @property
    def alias(self) -> str:
        return render_alias(self.honorific, self.surface)


@dataclass(frozen=True)
class Unique:
    char_id: int
    kind = "unique"


@dataclass(frozen=True)
class Multiple:
    char_ids: frozenset[int]
    kind = "multiple"

    def __post_init__(self) -> None:
        if len(self.char_ids) < 2:
            raise ValueError("Multiple needs at least two ids")


@dataclass(frozen=True)
class NoMatch:
    kind = "none"


MatchResult = Union[Unique, Multiple, NoMatch]


def render_alias(honorific: str | None, surface: str) -> str:
    if not honorific:
        return surface
    sep = ". " if honorific in _DOTTED else " "
    return f"{honorific}{sep}{surface}"


# --------------------------------------------------------------------------
# matching

def _honorific_set(honorifics: Iterable[str] | None) -> frozenset[str]:
    return frozenset(h.lower().rstrip(".") for h in (honorifics if honorifics is not None else load_honorifics()))


def normalize_name(name: str) -> tuple[str, ...]:
    """Case-folded word tuple; periods and surrounding punctuation dropped."""
    name = name.casefold().replace("’", "'").replace(".", " ")
    name = re.sub(r"[^\w'\- ]+", " ", name)
    return tuple(t.strip("'-") for t in name.split() if t.strip("'-"))


def strip_honorific(tokens: tuple[str, ...], honorifics: frozenset[str]) -> tuple[str, ...]:
    """Drop one leading honorific, but never the whole name."""
    if len(tokens) > 1 and tokens[0] in honorifics:
        return tokens[1:]
    return tokens


class NameMatcher:
    """Staged lookup over a fixed character list.

    1. exact alias (case-insensitive);
    2. exact after removing one leading honorific from query and/or alias;
    3. final token of the query against alias surnames, or a one-word query
       against alias given names.

    The first stage with any survivor decides the result.
    """

    def __init__(self, characters: Sequence[CharacterEntity], honorifics: Iterable[str] | None = None):
        if not characters:
            raise EmptyCharacterList("cannot match names against an empty character list")
        self.honorifics = _honorific_set(honorifics)
        self.exact: dict[tuple, set[int]] = defaultdict(set)
        self.stripped: dict[tuple, set[int]] = defaultdict(set)
        self.last: dict[str, set[int]] = defaultdict(set)
        self.first: dict[str, set[int]] = defaultdict(set)
        for c in characters:
            for alias in c.aliases:
                toks = normalize_name(alias)
                if not toks:
                    continue
                bare = strip_honorific(toks, self.honorifics)
                self.exact[toks].add(c.char_id)
                self.stripped[toks].add(c.char_id)
                self.stripped[bare].add(c.char_id)
                self.last[bare[-1]].add(c.char_id)
                self.first[bare[0]].add(c.char_id)

    def match(self, query: str) -> MatchResult:
        toks = normalize_name(query)
        if not toks:
            return NoMatch()
        bare = strip_honorific(toks, self.honorifics)
        stages = (
            self.exact.get(toks, set()),
            self.stripped.get(toks, set()) | self.stripped.get(bare, set()),
            self.last.get(bare[-1], set()) | (self.first.get(bare[0], set()) if len(bare) == 1 else set()),
        )
        for ids in stages:
            if len(ids) == 1:
                return Unique(next(iter(ids)))
            if ids:
                return Multiple(frozenset(ids))
        return NoMatch()


@lru_cache(maxsize=64)
def _matcher(characters: tuple[CharacterEntity, ...], honorifics: tuple[str, ...] | None) -> NameMatcher:
    return NameMatcher(characters, honorifics)


def get_matcher(characters: Sequence[CharacterEntity], honorifics: Iterable[str] | None = None) -> NameMatcher:
    if not characters:
        raise EmptyCharacterList("cannot match names against an empty character list")
    return _matcher(tuple(characters), tuple(honorifics) if honorifics is not None else None)


def match_name(query: str, characters: Sequence[CharacterEntity], honorifics: Iterable[str] | None = None) -> MatchResult:
    return get_matcher(characters, honorifics).match(query)


# --------------------------------------------------------------------------
# candidate extraction

def _is_cap_word(tok: str) -> bool:
    return tok[:1].isalpha() and tok[:1].isupper()


def _strip_possessive(tok: str) -> tuple[str, bool]:
    for suffix in ("'s", "’s"):
        if tok.endswith(suffix) and len(tok) > 2:
            return tok[: -len(suffix)], True
    return tok, False


def extract_name_candidates(
    bundle: NovelBundle, min_count: int = 2, honorifics: Iterable[str] | None = None
) -> list[NameCandidate]:
    """Capitalized word runs that recur and occur at least once mid-sentence.

    A leading honorific is split off into ``NameCandidate.honorific``; an
    honorific in the middle of a run starts a new run.
    """
    hon_list = tuple(h.rstrip(".") for h in (honorifics if honorifics is not None else load_honorifics()))
    hons = frozenset(hon_list)
    counts: Counter = Counter()
    mid_sentence: set = set()

    for p_start, p_end in bundle.paragraph_index:
        toks = tokenize_with_offsets(bundle.text, p_start, p_end)
        i = 0
        while i < len(toks):
            if not _is_cap_word(toks[i].text):
                i += 1
                continue
            initial = _sentence_initial(toks, i, hons)
            run: list[str] = []
            j = i
            while j < len(toks) and _is_cap_word(toks[j].text):
                word, possessive = _strip_possessive(toks[j].text)
                if run and word in hons:
                    break
                if run and bundle.text[toks[j - 1].end:toks[j].start].strip() not in ("", "."):
                    break
                run.append(word)
                j += 1
                if possessive:
                    break
                # "Mr." keeps the run going
                if word in hons and j < len(toks) and toks[j].text == "." and toks[j].start == toks[j - 1].end:
                    j += 1
            for key, non_initial in _run_keys(run, initial, hons):
                counts[key] += 1
                if non_initial:
                    mid_sentence.add(key)
            i = max(j, i + 1)

    out = [
        NameCandidate(surface, n, honorific)
        for (honorific, surface), n in counts.items()
        if n >= min_count and (honorific, surface) in mid_sentence
    ]
    out.sort(key=lambda c: (-c.count, c.surface, c.honorific or ""))
    return out


def _sentence_initial(toks, i: int, hons: frozenset[str]) -> bool:
    k = i - 1
    while k >= 0 and toks[k].text in _QUOTE_TOKENS:
        if toks[k].text in "“‘":
            return True
        k -= 1
    if k < 0:
        return True
    prev = toks[k].text
    if prev in _SENTENCE_END:
        return not (prev == "." and k > 0 and toks[k - 1].text in hons)
    return False


def _run_keys(run: list[str], initial: bool, hons: frozenset[str]):
    # leading function words are dropped; the name after them is mid-sentence
    lead = 0
    while lead < len(run) and run[lead] in STOP_WORDS and run[lead] not in hons:
        lead += 1
    if lead:
        initial = False
    run = run[lead:]
    if not run:
        return []
    if run[0] in hons:
        if len(run) == 1:
            return []
        return [((run[0], " ".join(run[1:])), not initial)]
    return [((None, " ".join(run)), not initial)]


# --------------------------------------------------------------------------
# clustering

def candidate_from_alias(alias: str, honorifics: Iterable[str] | None = None) -> NameCandidate:
    hons = frozenset(h.rstrip(".") for h in (honorifics if honorifics is not None else load_honorifics()))
    words = alias.split()
    head = words[0].rstrip(".") if words else ""
    if len(words) > 1 and head in hons:
        return NameCandidate(" ".join(words[1:]), 1, head)
    return NameCandidate(alias.strip(), 1, None)


def cluster_aliases(candidates: Sequence[NameCandidate]) -> list[CharacterEntity]:
    """Conservative alias grouping.

    Two merges only: a bare name joins its single honorific variant
    (``Darcy`` + ``Mr. Darcy``), and a given name joins the one full name it
    begins (``Elizabeth`` + ``Elizabeth Bennet``).  Names that share only a
    surname stay apart.
    """
    if not candidates:
        raise EmptyInput("no name candidates to cluster")
    keys = sorted({(c.honorific, c.surface) for c in candidates}, key=lambda k: (k[1], k[0] or ""))
    weight: Counter = Counter()
    for c in candidates:
        weight[(c.honorific, c.surface)] += c.count
    parent = {k: k for k in keys}

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb, key=_key_order)] = min(ra, rb, key=_key_order)

    variants: dict[str, list] = defaultdict(list)
    for h, s in keys:
        if h:
            variants[s].append((h, s))
    for h, s in keys:
        if h is None and len(variants.get(s, ())) == 1:
            union((None, s), variants[s][0])

    full_by_given: dict[str, set[str]] = defaultdict(set)
    for _, s in keys:
        words = s.split()
        if len(words) > 1:
            full_by_given[words[0]].add(s)
    for h, s in keys:
        if h is None and len(s.split()) == 1 and len(full_by_given.get(s, ())) == 1:
            full = next(iter(full_by_given[s]))
            targets = [k for k in keys if k[1] == full and k[0] is None] or [k for k in keys if k[1] == full]
            union((None, s), targets[0])

    groups: dict = defaultdict(list)
    for k in keys:
        groups[find(k)].append(k)
    entities = []
    for members in groups.values():
        aliases = frozenset(render_alias(h, s) for h, s in members)
        main = sorted(aliases, key=lambda a: (-len(a), a))[0]
        entities.append((-sum(weight[m] for m in members), main, aliases))
    entities.sort()
    return [CharacterEntity(i, main, aliases) for i, (_, main, aliases) in enumerate(entities)]


def _key_order(k):
    return (k[1], k[0] or "")


def build_character_list(bundle: NovelBundle, min_count: int = 2) -> list[CharacterEntity]:
    return cluster_aliases(extract_name_candidates(bundle, min_count))
