"""Quotation identification: parse quoted spans out of novel text."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import NovelBundle, Quotation, Span, Token, tokenize_with_offsets
from .lexicon import load_speech_verbs

logger = logging.getLogger(__name__)

PRONOUNS = frozenset(
    "i he she they we you it him her them me us one".split()
)

QUOTE_CHARS = "\"'“”‘’"
_OPEN_PUNCT = "([{—–-/"
_STYLE_NAMES = ("auto", "double", "single", "smart-double", "smart-single")


@dataclass(frozen=True)
class QuoteStyle:
    """Which mark family delimits dialogue.

    ``double``/``single`` accept both straight and curly marks of that family;
    the ``smart-`` variants accept curly marks only.
    """

    name: str
    primary: str  # "double" or "single"
    smart_only: bool = False

    @property
    def secondary(self) -> str:
        return "single" if self.primary == "double" else "double"

    @classmethod
    def named(cls, name: str) -> "QuoteStyle":
        if name not in _STYLE_NAMES or name == "auto":
            raise ValueError(f"unknown quote style {name!r}; expected one of {_STYLE_NAMES}")
        return cls(name, "single" if name.endswith("single") else "double", name.startswith("smart"))


@dataclass(frozen=True)
class QuoteSpanCandidate:
    span: Span
    paragraph_ids: tuple[int, ...]
    nesting_depth: int = 0
    children: tuple["QuoteSpanCandidate", ...] = ()
    # one piece per paragraph the span crosses
    pieces: tuple[Span, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if self.nesting_depth < 0:
            raise ValueError("nesting_depth must be >= 0")
        if not self.pieces:
            object.__setattr__(self, "pieces", (self.span,))

    @property
    def start(self) -> int:
        return self.span[0]

    @property
    def end(self) -> int:
        return self.span[1]


# --------------------------------------------------------------------------
# mark classification

def _family(ch: str) -> str | None:
    if ch in "\"“”":
        return "double"
    if ch in "'‘’":
        return "single"
    return None


def _is_word(ch: str) -> bool:
    return ch.isalnum()


def mark_role(text: str, i: int) -> str:
    """Role of the quote character at ``text[i]``.

    Returns one of ``open``, ``close``, ``either`` or ``apostrophe``.  A
    single mark with word characters on both sides is an apostrophe, which
    is what separates ``don't`` from a closing ``’``.
    """
    ch = text[i]
    prev = text[i - 1] if i > 0 else " "
    nxt = text[i + 1] if i + 1 < len(text) else " "
    if ch in "'’‘" and _is_word(prev) and _is_word(nxt):
        return "apostrophe"
    if ch in "“‘":
        return "open"
    if ch == "”":
        return "close"
    if ch == "’":
        if not _is_word(prev) and _is_word(nxt):
            return "apostrophe"  # ’tis, ’em: a right mark never opens
        if prev in "sS" and nxt == " " and text[i + 2:i + 3].islower():
            return "apostrophe"  # plural possessive: the girls’ room
        return "close"
    # straight marks
    prev_open = prev.isspace() or prev in _OPEN_PUNCT or prev in "“‘\"'"
    next_close = nxt.isspace() or nxt in ".,;:!?)]}—–-" or nxt in "”’\"'"
    if ch == "'":
        if prev.isspace() and _is_word(nxt) and text[i + 1:i + 3].lower() in ("em", "ti", "tw"):
            return "apostrophe"
        if prev in "sS" and nxt == " " and text[i + 2:i + 3].islower():
            return "apostrophe"
    if prev_open and not next_close:
        return "open"
    if next_close and not prev_open:
        return "close"
    if _is_word(prev) and not _is_word(nxt):
        return "close"
    if _is_word(nxt) and not _is_word(prev):
        return "open"
    return "either"


def _accepts(style: QuoteStyle, ch: str, family: str) -> bool:
    if _family(ch) != family:
        return False
    if style.smart_only and ch in "\"'":
        return False
    return True


def detect_style(text: str) -> QuoteStyle:
    """Pick the dialogue mark family by counting opening marks."""
    curly_d = text.count("“")
    straight_d = text.count('"') / 2
    curly_s = straight_s = 0
    for i, ch in enumerate(text):
        if ch == "‘" and mark_role(text, i) == "open":
            curly_s += 1
        elif ch == "'" and mark_role(text, i) == "open":
            straight_s += 1
    if curly_d + straight_d >= curly_s + straight_s:
        name = "smart-double" if curly_d > 0 and straight_d == 0 else "double"
    else:
        name = "smart-single" if curly_s > 0 and straight_s == 0 else "single"
    return QuoteStyle.named(name)


def resolve_style(style: QuoteStyle | str | None, text: str) -> QuoteStyle:
    if style is None or style == "auto":
        return detect_style(text)
    if isinstance(style, str):
        return QuoteStyle.named(style)
    return style


# --------------------------------------------------------------------------
# parsing

class _Open:
    __slots__ = ("start", "paragraphs", "pieces", "piece_start", "children", "stack")

    def __init__(self, start: int, para: int):
        self.start = start
        self.paragraphs = [para]
        self.pieces: list[Span] = []
        self.piece_start = start
        self.children: list[QuoteSpanCandidate] = []
        self.stack: list[tuple[int, int]] = []


def _first_mark(text: str, start: int, end: int) -> int | None:
    i = start
    while i < end and text[i].isspace():
        i += 1
    return i if i < end else None


def _last_nonspace(text: str, start: int, end: int) -> int:
    while end > start and text[end - 1].isspace():
        end -= 1
    return end


def extract_quotations(bundle_or_text: NovelBundle | str, style: QuoteStyle | str | None = None) -> list[QuoteSpanCandidate]:
    """Top-level quoted spans in document order.

    A paragraph left open whose successor starts with a fresh opening mark
    continues into that paragraph, so a multi-paragraph speech yields one
    candidate.  Marks of the other family inside a quote become nested
    children.  An unclosed quote that is not continued is closed at the end
    of its paragraph, with a logged warning.
    """
    if isinstance(bundle_or_text, NovelBundle):
        text, paragraphs = bundle_or_text.text, bundle_or_text.paragraph_index
    else:
        from .corpus import segment_paragraphs

        text = bundle_or_text
        paragraphs = tuple(segment_paragraphs(text))
    style = resolve_style(style, text)
    out: list[QuoteSpanCandidate] = []
    current: _Open | None = None
    prev_end = 0

    def finish(cur: _Open, end: int, warn: str | None = None) -> None:
        if warn:
            logger.warning("unbalanced quote at offset %d: %s", cur.start, warn)
        end = max(end, cur.piece_start + 1)
        cur.pieces.append((cur.piece_start, end))
        out.append(
            QuoteSpanCandidate(
                span=(cur.start, end),
                paragraph_ids=tuple(cur.paragraphs),
                nesting_depth=0,
                children=tuple(cur.children),
                pieces=tuple(cur.pieces),
            )
        )

    for pid, (p_start, p_end) in enumerate(paragraphs):
        scan_from = p_start
        if current is not None:
            first = _first_mark(text, p_start, p_end)
            if first is not None and _accepts(style, text[first], style.primary) and mark_role(text, first) in ("open", "either"):
                current.paragraphs.append(pid)
                current.pieces.append((current.piece_start, prev_end))
                current.piece_start = first
                current.stack.clear()
                scan_from = first + 1
            else:
                finish(current, prev_end, "closed at paragraph end")
                current = None
        for i in range(scan_from, p_end):
            ch = text[i]
            fam = _family(ch)
            if fam is None:
                continue
            role = mark_role(text, i)
            if role == "apostrophe":
                continue
            if current is None:
                if _accepts(style, ch, style.primary):
                    if role in ("open", "either"):
                        current = _Open(i, pid)
                    else:
                        logger.warning("dangling close mark at offset %d ignored", i)
                continue
            if _accepts(style, ch, style.primary):
                if role in ("close", "either"):
                    finish(current, i + 1)
                    current = None
                else:
                    # an opening mark while open: the previous close was missing
                    finish(current, _last_nonspace(text, current.piece_start, i), "reopened before closing")
                    current = _Open(i, pid)
                continue
            if _accepts(style, ch, style.secondary) or (fam == style.secondary and ch in "\"'"):
                if role == "open" or (role == "either" and not current.stack):
                    current.stack.append((i, len(current.stack) + 1))
                elif current.stack and role in ("close", "either"):
                    s, depth = current.stack.pop()
                    current.children.append(QuoteSpanCandidate((s, i + 1), (pid,), depth))
        prev_end = _last_nonspace(text, p_start, p_end)
    if current is not None:
        finish(current, prev_end, "closed at end of text")
    return out


# --------------------------------------------------------------------------
# narration next to a quotation

@dataclass(frozen=True)
class NarrationWindow:
    side: str  # "before" or "after"
    start: int
    end: int
    tokens: tuple[Token, ...]  # nearest-to-quote first


def _narration_tokens(text: str, start: int, end: int) -> list[Token]:
    # quote marks are delimiters, not narration
    return [t for t in tokenize_with_offsets(text, start, end) if t.text not in QUOTE_CHARS]


def adjacent_narration(
    text: str,
    paragraph: Span,
    fragments: Sequence[Span],
    blockers: Iterable[Span] = (),
    window: int = 5,
) -> list[NarrationWindow]:
    """Up to ``window`` tokens of unquoted text on each side of each fragment.

    Narration stops at the paragraph edge and at any span in ``blockers``
    (other quotations) or other fragments.  The interior between two
    fragments is reported once as ``after`` the first and once as ``before``
    the second.
    """
    p_start, p_end = paragraph
    walls = sorted({tuple(b) for b in blockers} | {tuple(f) for f in fragments})
    out = []
    for fs, fe in fragments:
        lo = max([p_start] + [e for s, e in walls if e <= fs])
        hi = min([p_end] + [s for s, e in walls if s >= fe])
        if lo < fs:
            toks = _narration_tokens(text, lo, fs)[-window:]
            if toks:
                out.append(NarrationWindow("before", toks[0].start, fs, tuple(reversed(toks))))
        if fe < hi:
            toks = _narration_tokens(text, fe, hi)[:window]
            if toks:
                out.append(NarrationWindow("after", fe, toks[-1].end, tuple(toks)))
    return out


def find_speech_verbs(tokens: Sequence[Token], verbs: frozenset[tuple[str, ...]] | None = None) -> list[int]:
    """Indices into ``tokens`` (assumed in text order) where a speech verb begins."""
    verbs = verbs if verbs is not None else load_speech_verbs()
    longest = max((len(v) for v in verbs), default=1)
    lowered = [t.text.lower() for t in tokens]
    hits = []
    for i in range(len(tokens)):
        for n in range(longest, 0, -1):
            if tuple(lowered[i:i + n]) in verbs:
                hits.append(i)
                break
    return hits


def _is_name_token(tok: str) -> bool:
    from .charid import STOP_WORDS

    return tok[:1].isupper() and tok[:1].isalpha() and tok not in STOP_WORDS and tok.lower() not in PRONOUNS


def classify_narration(windows: Sequence[NarrationWindow], verbs=None, allow_explicit: bool = True) -> str:
    explicit = anaphoric = False
    for w in windows:
        toks = sorted(w.tokens, key=lambda t: t.start)
        if not find_speech_verbs(toks, verbs):
            continue
        for t in toks:
            if allow_explicit and _is_name_token(t.text):
                explicit = True
            elif t.text.lower() in PRONOUNS:
                anaphoric = True
    if explicit:
        return "explicit"
    if anaphoric:
        return "anaphoric"
    return "implicit"


def classify_quote_type(
    q: QuoteSpanCandidate,
    bundle: NovelBundle,
    referring: Span | None = None,
    others: Sequence[Span] = (),
    verbs=None,
    window: int = 5,
) -> str:
    """explicit / anaphoric / implicit from the narration next to the quote.

    ``others`` are the remaining quotation spans of the novel, which bound
    the narration that is inspected.
    """
    if referring is not None:
        return "explicit"
    windows = []
    for pid in sorted({q.paragraph_ids[0], q.paragraph_ids[-1]}):
        para = bundle.paragraph_index[pid]
        frags = [p for p in q.pieces if para[0] <= p[0] < para[1]]
        windows += adjacent_narration(bundle.text, para, frags, [o for o in others if tuple(o) != tuple(q.span)], window)
    return classify_narration(windows, verbs)


def classify_gold_quotation(q: Quotation, bundle: NovelBundle, window: int = 5) -> str:
    """anaphoric or implicit for an annotated quotation lacking a referring expression."""
    others = [s for o in bundle.quotations if o.quote_id != q.quote_id for s in o.sub_spans]
    windows = []
    for frag in q.sub_spans:
        para = bundle.paragraph_index[bundle.paragraph_of(frag[0])]
        windows += adjacent_narration(bundle.text, para, [frag], others + [f for f in q.sub_spans if f != frag], window)
    return classify_narration(windows, allow_explicit=False)


def quotes_to_jsonl_rows(cands: Sequence[QuoteSpanCandidate], types: Sequence[str]) -> list[dict]:
    return [
        {
            "start": c.start,
            "end": c.end,
            "paragraphs": list(c.paragraph_ids),
            "pieces": [list(p) for p in c.pieces],
            "depth": c.nesting_depth,
            "type": t,
        }
        for c, t in zip(cands, types)
    ]


def candidates_from_rows(rows: Iterable[dict]) -> list[QuoteSpanCandidate]:
    """Inverse of :func:`quotes_to_jsonl_rows` (children are not restored)."""
    out = []
    for r in rows:
        pieces = tuple(tuple(p) for p in r.get("pieces") or [(r["start"], r["end"])])
        out.append(QuoteSpanCandidate((r["start"], r["end"]), tuple(r.get("paragraphs", ())), r.get("depth", 0), (), pieces))
    return out
