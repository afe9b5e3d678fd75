"""Character mentions: explicit alias hits, external coreference clusters, and
the merged candidate inventory used by speaker attribution."""

from __future__ import annotations

import bisect
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .charid import (
    STOP_WORDS,
    MatchResult,
    Multiple,
    NoMatch,
    Unique,
    get_matcher,
)
from .corpus import UNKNOWN, CharacterEntity, MentionSpan, NovelBundle, Span, tokenize_with_offsets
from .errors import MalformedRow, MissingFile
from .lexicon import load_honorifics
from .quotes import PRONOUNS

logger = logging.getLogger(__name__)

SOURCES = ("pdnc_gold", "explicit_match", "external_coref")
_RANK = {s: i for i, s in enumerate(SOURCES)}


@dataclass(frozen=True)
class MentionCluster:
    cluster_id: int
    spans: tuple[MentionSpan, ...]

    def __post_init__(self) -> None:
        uniq = sorted(set(self.spans), key=lambda m: (m.span, m.surface))
        object.__setattr__(self, "spans", tuple(uniq))


@dataclass(frozen=True)
class ClusterMatch:
    cluster_id: int
    kind: MatchResult


@dataclass(frozen=True)
class InventoryMention:
    span: MentionSpan
    char_id: int
    source: str

    @property
    def start(self) -> int:
        return self.span.start

    @property
    def end(self) -> int:
        return self.span.end


@dataclass(frozen=True)
class CandidateInventory:
    mentions: tuple[InventoryMention, ...]
    conflicts: tuple[tuple[InventoryMention, InventoryMention], ...] = ()
    _starts: tuple[int, ...] = field(default=(), compare=False, repr=False)
    _ends: tuple[int, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_starts", tuple(m.start for m in self.mentions))
        object.__setattr__(self, "_ends", tuple(m.end for m in self.mentions))

    def __len__(self) -> int:
        return len(self.mentions)

    def index_before(self, offset: int) -> int:
        """Number of mentions ending at or before ``offset``."""
        return bisect.bisect_right(self._ends, offset)

    def index_from(self, offset: int) -> int:
        """Index of the first mention starting at or after ``offset``."""
        return bisect.bisect_left(self._starts, offset)

    def within(self, start: int, end: int) -> list[InventoryMention]:
        i = bisect.bisect_left(self._starts, start)
        out = []
        while i < len(self.mentions) and self.mentions[i].start < end:
            if self.mentions[i].end <= end:
                out.append(self.mentions[i])
            i += 1
        return out

    def to_rows(self) -> list[dict]:
        return [{"start": m.start, "end": m.end, "char_id": m.char_id, "source": m.source} for m in self.mentions]

    @classmethod
    def from_rows(cls, rows: Iterable[dict], text: str) -> "CandidateInventory":
        mentions = [
            InventoryMention(MentionSpan((r["start"], r["end"]), text[r["start"]:r["end"]], (r["char_id"],)), r["char_id"], r["source"])
            for r in rows
        ]
        mentions.sort(key=lambda m: (m.start, m.end))
        return cls(tuple(mentions))


# --------------------------------------------------------------------------
# explicit alias scan

def _alias_pattern(alias: str, honorifics: frozenset[str]) -> str:
    words = alias.split()
    parts = []
    for i, w in enumerate(words):
        bare = w.rstrip(".")
        if i == 0 and bare in honorifics and len(words) > 1:
            parts.append(re.escape(bare) + r"\.?")
        else:
            parts.append(re.escape(w))
    return r"\s+".join(parts)


def _alias_regex(characters: Sequence[CharacterEntity], honorifics: frozenset[str]) -> re.Pattern | None:
    aliases = sorted({a for c in characters for a in c.aliases if a.strip()}, key=lambda a: (-len(a), a))
    if not aliases:
        return None
    body = "|".join(_alias_pattern(a, honorifics) for a in aliases)
    return re.compile(rf"(?<![\w'’])(?:{body})(?!\w)")


def scan_explicit_mentions(bundle: NovelBundle, honorifics: Iterable[str] | None = None) -> list[tuple[MentionSpan, int]]:
    """Alias occurrences that resolve to exactly one character.

    At each position the longest alias wins, so ``Elizabeth Bennet`` is one
    mention rather than ``Elizabeth`` plus ``Bennet``.
    """
    if not bundle.characters:
        return []
    hons = frozenset(h.rstrip(".") for h in (honorifics if honorifics is not None else load_honorifics()))
    regex = _alias_regex(bundle.characters, hons)
    if regex is None:
        return []
    matcher = get_matcher(bundle.characters, tuple(honorifics) if honorifics is not None else None)
    cache: dict[str, MatchResult] = {}
    out = []
    for m in regex.finditer(bundle.text):
        surface = m.group()
        if surface not in cache:
            cache[surface] = matcher.match(surface)
        hit = cache[surface]
        if isinstance(hit, Unique):
            out.append((MentionSpan(m.span(), surface, (hit.char_id,)), hit.char_id))
    return out


# --------------------------------------------------------------------------
# external clusters

def is_named_span(surface: str) -> bool:
    """Contains a capitalized token that is not a pronoun or sentence-opening function word."""
    for tok, _, _ in tokenize_with_offsets(surface):
        if tok[:1].isalpha() and tok[:1].isupper() and tok not in STOP_WORDS and tok.lower() not in PRONOUNS:
            return True
    return False


def match_cluster_to_entity(
    cluster: MentionCluster,
    characters: Sequence[CharacterEntity],
    quote_spans: Sequence[Span] = (),
    use_quote_internal: bool = True,
) -> ClusterMatch:
    """Resolve a coreference cluster against the character list.

    Uniq when every uniquely matched named span agrees, Mult when they
    disagree (or only ambiguous names are present), None when no named span
    matches anything.
    """
    if not characters:
        return ClusterMatch(cluster.cluster_id, NoMatch())
    matcher = get_matcher(characters)
    unique: set[int] = set()
    ambiguous: set[int] = set()
    for m in cluster.spans:
        if not use_quote_internal and any(s <= m.start and m.end <= e for s, e in quote_spans):
            continue
        if not is_named_span(m.surface):
            continue
        hit = matcher.match(m.surface)
        if isinstance(hit, Unique):
            unique.add(hit.char_id)
        elif isinstance(hit, Multiple):
            ambiguous |= hit.char_ids
    if len(unique) == 1:
        return ClusterMatch(cluster.cluster_id, Unique(next(iter(unique))))
    if len(unique) > 1:
        return ClusterMatch(cluster.cluster_id, Multiple(frozenset(unique)))
    if ambiguous:
        return ClusterMatch(cluster.cluster_id, Multiple(frozenset(ambiguous)))
    return ClusterMatch(cluster.cluster_id, NoMatch())


def load_coref_clusters(path: str | Path, text: str) -> tuple[list[MentionCluster], list[str]]:
    """Read a JSON-lines cluster dump; spans whose text disagrees with ``text`` are dropped.

    Returns the clusters and a list of rejection messages.
    """
    p = Path(path)
    if not p.is_file():
        raise MissingFile(str(p))
    clusters = []
    rejected = []
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            cid = int(obj["cluster_id"])
            raw_spans = obj["spans"]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise MalformedRow(str(p), lineno, str(exc)) from exc
        spans = []
        for sp in raw_spans:
            try:
                s, e = int(sp["start"]), int(sp["end"])
                surface = sp.get("text")
            except (KeyError, TypeError, ValueError):
                rejected.append(f"line {lineno}: unreadable span {sp!r}")
                continue
            if not (0 <= s < e <= len(text)) or (surface is not None and text[s:e] != surface):
                rejected.append(f"line {lineno}: span ({s}, {e}) does not match text")
                continue
            spans.append(MentionSpan((s, e), text[s:e]))
        clusters.append(MentionCluster(cid, tuple(spans)))
    if rejected:
        logger.warning("%s: rejected %d cluster spans", p.name, len(rejected))
    return clusters, rejected


def dump_coref_clusters(clusters: Sequence[MentionCluster]) -> str:
    lines = []
    for c in clusters:
        spans = [{"start": m.start, "end": m.end, "text": m.surface} for m in c.spans]
        lines.append(json.dumps({"cluster_id": c.cluster_id, "spans": spans}, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


# --------------------------------------------------------------------------
# curation

def gold_mentions(bundle: NovelBundle) -> list[tuple[MentionSpan, int]]:
    """Single-referent annotated mentions inside quotations."""
    out = []
    for q in bundle.quotations:
        for m in q.internal_mentions:
            ids = [i for i in m.entity_ids if i != UNKNOWN]
            if len(ids) == 1 and len(m.entity_ids) == 1:
                out.append((m, ids[0]))
    return out


def curate_candidates(
    bundle: NovelBundle,
    explicit: Sequence[tuple[MentionSpan, int]] = (),
    external_clusters: Sequence[MentionCluster] = (),
    matches: Sequence[ClusterMatch] | None = None,
    use_gold: bool = True,
    use_quote_internal: bool = True,
) -> CandidateInventory:
    """Merge gold, explicit and coreference mentions; gold wins overlaps, then explicit.

    Only clusters matched to a unique character contribute.  Overlapping gold
    mentions with different referents are kept first-come and listed in
    ``conflicts``.
    """
    if matches is None:
        quote_spans = [s for q in bundle.quotations for s in q.sub_spans]
        matches = [match_cluster_to_entity(c, bundle.characters, quote_spans, use_quote_internal) for c in external_clusters]
    resolved = {m.cluster_id: m.kind.char_id for m in matches if isinstance(m.kind, Unique)}

    pool: dict[tuple, InventoryMention] = {}

    def add(span: MentionSpan, cid: int, source: str) -> None:
        item = InventoryMention(MentionSpan(span.span, span.surface, (cid,)), cid, source)
        key = (_RANK[source], span.start, span.end, cid)
        pool.setdefault(key, item)

    if use_gold:
        for span, cid in gold_mentions(bundle):
            add(span, cid, "pdnc_gold")
    for span, cid in explicit:
        add(span, cid, "explicit_match")
    for c in external_clusters:
        cid = resolved.get(c.cluster_id)
        if cid is None:
            continue
        for span in c.spans:
            add(span, cid, "external_coref")

    known = bundle.char_ids
    accepted_starts: list[int] = []
    accepted: list[InventoryMention] = []
    conflicts = []
    for key in sorted(pool):
        item = pool[key]
        if item.char_id not in known:
            continue
        i = bisect.bisect_right(accepted_starts, item.start) - 1
        clash = None
        if i >= 0 and accepted[i].end > item.start:
            clash = accepted[i]
        elif i + 1 < len(accepted) and accepted[i + 1].start < item.end:
            clash = accepted[i + 1]
        if clash is not None:
            if item.source == "pdnc_gold" and clash.source == "pdnc_gold" and clash.char_id != item.char_id:
                conflicts.append((clash, item))
            continue
        accepted.insert(i + 1, item)
        accepted_starts.insert(i + 1, item.start)
    if conflicts:
        logger.warning("%s: %d overlapping gold mentions with different referents", bundle.novel_id, len(conflicts))
    return CandidateInventory(tuple(accepted), tuple(conflicts))


def build_inventory(
    bundle: NovelBundle,
    external_clusters: Sequence[MentionCluster] = (),
    use_gold: bool = True,
    use_quote_internal: bool = True,
) -> CandidateInventory:
    return curate_candidates(
        bundle,
        scan_explicit_mentions(bundle),
        external_clusters,
        use_gold=use_gold,
        use_quote_internal=use_quote_internal,
    )
