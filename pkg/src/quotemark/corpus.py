"""Novel bundles: text, character list and quotation annotations.

All offsets are end-exclusive indices into the normalized ``text`` (code
points, i.e. plain Python string indices).  Normalization turns every line
break into ``"\\n"``, strips trailing blanks and leaves exactly one blank line
between paragraphs; :func:`normalize_text` returns the raw-to-normalized
offset map used to carry third-party annotations across.
"""

from __future__ import annotations

import ast
import csv
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DanglingReference, MalformedRow, MissingFile, QuotemarkError

logger = logging.getLogger(__name__)

UNKNOWN = -1
QUOTE_TYPES = ("explicit", "anaphoric", "implicit")
BUNDLE_KEYS = ("novel_id", "title", "text", "characters", "quotations")

# speaker names that PDNC uses for unidentifiable utterers
RESERVED_UNKNOWN_NAMES = frozenset({"_unknowable", "_group", "_unknown", "unknown", "unknowable"})

Span = tuple[int, int]


@dataclass(frozen=True)
class CharacterEntity:
    char_id: int
    main_name: str
    aliases: frozenset[str]

    def __post_init__(self) -> None:
        aliases = frozenset(a.strip() for a in self.aliases if a and a.strip())
        if self.main_name.strip():
            aliases = aliases | {self.main_name.strip()}
        if not aliases:
            raise ValueError(f"character {self.char_id} has an empty alias set")
        object.__setattr__(self, "aliases", aliases)

    def to_json(self) -> dict:
        return {"char_id": self.char_id, "main_name": self.main_name, "aliases": sorted(self.aliases)}

    @classmethod
    def from_json(cls, obj: dict) -> "CharacterEntity":
        return cls(int(obj["char_id"]), obj["main_name"], frozenset(obj["aliases"]))


@dataclass(frozen=True)
class MentionSpan:
    span: Span
    surface: str
    entity_ids: tuple[int, ...] = ()

    @property
    def start(self) -> int:
        return self.span[0]

    @property
    def end(self) -> int:
        return self.span[1]

    def to_json(self) -> dict:
        return {"span": list(self.span), "surface": self.surface, "entity_ids": list(self.entity_ids)}

    @classmethod
    def from_json(cls, obj: dict) -> "MentionSpan":
        return cls(tuple(obj["span"]), obj["surface"], tuple(int(i) for i in obj.get("entity_ids", ())))


@dataclass(frozen=True)
class Quotation:
    """One uttered quotation.

    ``span`` runs from the first character of the first fragment to the end
    of the last one.  A quotation interrupted by narration (``"Hi," Liz
    whispered, "again."``) keeps its pieces in ``sub_spans``; the narration
    between them is not part of the quotation.
    """

    quote_id: str
    span: Span
    speaker_id: int = UNKNOWN
    addressee_ids: tuple[int, ...] = ()
    referring_expression: Span | None = None
    quote_type: str = "implicit"
    internal_mentions: tuple[MentionSpan, ...] = ()
    sub_spans: tuple[Span, ...] = ()

    def __post_init__(self) -> None:
        if self.quote_type not in QUOTE_TYPES:
            raise ValueError(f"bad quote_type {self.quote_type!r}")
        if not self.sub_spans:
            object.__setattr__(self, "sub_spans", (tuple(self.span),))

    @property
    def start(self) -> int:
        return self.span[0]

    @property
    def end(self) -> int:
        return self.span[1]

    def covers(self, start: int, end: int) -> bool:
        """True if [start, end) lies inside one of the quoted fragments."""
        return any(s <= start and end <= e for s, e in self.sub_spans)

    def to_json(self) -> dict:
        return {
            "quote_id": self.quote_id,
            "span": list(self.span),
            "speaker_id": self.speaker_id,
            "addressee_ids": list(self.addressee_ids),
            "referring_expression": list(self.referring_expression) if self.referring_expression else None,
            "quote_type": self.quote_type,
            "internal_mentions": [m.to_json() for m in self.internal_mentions],
            "sub_spans": [list(s) for s in self.sub_spans],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Quotation":
        ref = obj.get("referring_expression")
        return cls(
            quote_id=str(obj["quote_id"]),
            span=tuple(obj["span"]),
            speaker_id=int(obj.get("speaker_id", UNKNOWN)),
            addressee_ids=tuple(int(a) for a in obj.get("addressee_ids", ())),
            referring_expression=tuple(ref) if ref else None,
            quote_type=obj.get("quote_type", "implicit"),
            internal_mentions=tuple(MentionSpan.from_json(m) for m in obj.get("internal_mentions", ())),
            sub_spans=tuple(tuple(s) for s in obj.get("sub_spans", ())),
        )


@dataclass(frozen=True)
class NovelBundle:
    novel_id: str
    title: str
    text: str
    characters: tuple[CharacterEntity, ...]
    quotations: tuple[Quotation, ...]
    paragraph_index: tuple[Span, ...] = ()
    # loader notes (which quote-type path was taken, dropped rows); not serialized
    provenance: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "characters", tuple(self.characters))
        object.__setattr__(self, "quotations", tuple(sorted(self.quotations, key=lambda q: (q.span, q.quote_id))))
        if not self.paragraph_index:
            object.__setattr__(self, "paragraph_index", tuple(segment_paragraphs(self.text)))

    def character(self, char_id: int) -> CharacterEntity:
        for c in self.characters:
            if c.char_id == char_id:
                return c
        raise KeyError(char_id)

    @property
    def char_ids(self) -> frozenset[int]:
        return frozenset(c.char_id for c in self.characters)

    def paragraph_of(self, offset: int) -> int:
        """Index of the paragraph containing ``offset`` (or the next one after it)."""
        starts = [s for s, _ in self.paragraph_index]
        i = int(np.searchsorted(starts, offset, side="right")) - 1
        if i >= 0 and offset < self.paragraph_index[i][1]:
            return i
        return min(i + 1, len(self.paragraph_index) - 1)

    def validate(self) -> None:
        n = len(self.text)
        ids = self.char_ids
        if len(ids) != len(self.characters):
            raise QuotemarkError(f"{self.novel_id}: duplicate char_id in character list")
        for q in self.quotations:
            s, e = q.span
            if not (0 <= s < e <= n):
                raise QuotemarkError(f"{self.novel_id}: quotation {q.quote_id} span {q.span} out of bounds")
            for ss, se in q.sub_spans:
                if not (s <= ss < se <= e):
                    raise QuotemarkError(f"{self.novel_id}: quotation {q.quote_id} fragment outside span")
            if q.speaker_id != UNKNOWN and q.speaker_id not in ids:
                raise DanglingReference(str(q.speaker_id), f"{self.novel_id} {q.quote_id} speaker")
            for a in q.addressee_ids:
                if a != UNKNOWN and a not in ids:
                    raise DanglingReference(str(a), f"{self.novel_id} {q.quote_id} addressee")
            if q.referring_expression is not None:
                rs, re_ = q.referring_expression
                if not (0 <= rs < re_ <= n) or any(rs < fe and fs < re_ for fs, fe in q.sub_spans):
                    raise QuotemarkError(f"{self.novel_id}: quotation {q.quote_id} referring expression overlaps quote")
            for m in q.internal_mentions:
                if self.text[m.start:m.end] != m.surface:
                    raise QuotemarkError(f"{self.novel_id}: mention {m.span} surface mismatch")
                for eid in m.entity_ids:
                    if eid != UNKNOWN and eid not in ids:
                        raise DanglingReference(str(eid), f"{self.novel_id} {q.quote_id} mention")

    def to_json(self) -> dict:
        return {
            "novel_id": self.novel_id,
            "title": self.title,
            "text": self.text,
            "characters": [c.to_json() for c in self.characters],
            "quotations": [q.to_json() for q in self.quotations],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "NovelBundle":
        missing = [k for k in BUNDLE_KEYS if k not in obj]
        if missing:
            raise QuotemarkError(f"bundle JSON lacks keys {missing}")
        b = cls(
            novel_id=obj["novel_id"],
            title=obj["title"],
            text=obj["text"],
            characters=tuple(CharacterEntity.from_json(c) for c in obj["characters"]),
            quotations=tuple(Quotation.from_json(q) for q in obj["quotations"]),
        )
        b.validate()
        return b


def save_bundle(bundle: NovelBundle, path: str | Path) -> None:
    Path(path).write_text(json.dumps(bundle.to_json(), ensure_ascii=False, indent=1) + "\n", encoding="utf-8")


def load_bundle(path: str | Path) -> NovelBundle:
    p = Path(path)
    if not p.is_file():
        raise MissingFile(str(p))
    try:
        obj = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise QuotemarkError(f"{p}: not valid JSON ({exc})") from exc
    return NovelBundle.from_json(obj)


# --------------------------------------------------------------------------
# text utilities

_PARA_RE = re.compile(r"[^\n]+(?:\n[^\n]+)*")
_TOKEN_RE = re.compile(r"[^\W_]+(?:['’][^\W_]+)*|[^\w\s]|_")


class Token(NamedTuple):
    text: str
    start: int
    end: int


def segment_paragraphs(text: str) -> list[Span]:
    """Maximal runs of non-blank lines."""
    return [m.span() for m in _PARA_RE.finditer(text)]


def tokenize_with_offsets(text: str, start: int = 0, end: int | None = None) -> list[Token]:
    """Word tokens (letters/digits with internal apostrophes) and single punctuation marks.

    With ``start``/``end`` only that window is tokenized; offsets stay
    absolute.
    """
    pattern_end = len(text) if end is None else end
    return [Token(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text, start, pattern_end)]


def _sub_with_map(text: str, pattern: re.Pattern, repl: str) -> tuple[str, np.ndarray]:
    out: list[str] = []
    mapping = np.empty(len(text) + 1, dtype=np.int64)
    pos = o = 0
    for m in pattern.finditer(text):
        s, e = m.span()
        if s == e:
            continue
        out.append(text[pos:s])
        mapping[pos:s] = np.arange(o, o + s - pos)
        o += s - pos
        out.append(repl)
        mapping[s:e] = o + np.minimum(np.arange(e - s), len(repl))
        o += len(repl)
        pos = e
    out.append(text[pos:])
    mapping[pos:len(text)] = np.arange(o, o + len(text) - pos)
    mapping[len(text)] = o + len(text) - pos
    return "".join(out), mapping


_NORMALIZE_STEPS = (
    (re.compile(r"\r\n?"), "\n"),
    (re.compile(r"[ \t\f\v 　]+(?=\n|\Z)"), ""),
    (re.compile(r"\n{3,}"), "\n\n"),
    (re.compile(r"\A\n+|\n+\Z"), ""),
)


def normalize_text(raw: str) -> tuple[str, np.ndarray]:
    """Normalize line breaks; return the text and a raw->normalized offset map.

    The map has ``len(raw) + 1`` entries so end offsets translate too.
    Characters are never altered, only line-break runs and trailing blanks
    removed, so quote marks in particular keep their identity.
    """
    text = raw
    mapping = np.arange(len(raw) + 1, dtype=np.int64)
    for pattern, repl in _NORMALIZE_STEPS:
        text, step = _sub_with_map(text, pattern, repl)
        mapping = step[mapping]
    return text, mapping


# --------------------------------------------------------------------------
# PDNC adapter

_TEXT_FILES = ("novel_text.txt", "text.txt", "novel.txt")
_CHAR_FILES = ("character_info.csv", "characters.csv", "charInfo.csv", "character_list.csv")
_QUOTE_FILES = ("quotation_info.csv", "quote_info.csv", "quotations.csv")

_CHAR_COLS = {
    "id": ("characterid", "charid", "id"),
    "main": ("mainname", "name", "main"),
    "aliases": ("aliases", "alias", "names"),
}
_QUOTE_COLS = {
    "id": ("quoteid", "qid", "id"),
    "text": ("quotetext", "qtext", "text"),
    "subs": ("subquotationlist", "subquotations"),
    "spans": ("quotebytespans", "quotespans", "qspan", "spans", "bytespans"),
    "speaker": ("speaker",),
    "addressees": ("addressees", "addressee"),
    "type": ("quotetype", "qtype", "type"),
    "refexp": ("referringexpression", "refexp", "referringexp"),
    "mtexts": ("mentiontextslist", "mentiontexts"),
    "mspans": ("mentionspanslist", "mentionspans"),
    "ments": ("mentionentitieslist", "mentionentities"),
}


def _find_file(directory: Path, names: Sequence[str]) -> Path:
    for name in names:
        if (directory / name).is_file():
            return directory / name
    raise MissingFile(f"{directory}: none of {', '.join(names)} found")


def _column_map(header: Sequence[str], wanted: dict[str, tuple[str, ...]]) -> dict[str, int]:
    norm = [re.sub(r"[\s_\-]", "", h).lower() for h in header]
    cols = {}
    for key, options in wanted.items():
        for opt in options:
            if opt in norm:
                cols[key] = norm.index(opt)
                break
    return cols


def _literal(cell: str) -> Any:
    cell = (cell or "").strip()
    if not cell:
        return None
    if cell[0] in "[{(":
        try:
            return ast.literal_eval(cell)
        except (ValueError, SyntaxError):
            pass
        try:
            return json.loads(cell)
        except json.JSONDecodeError:
            pass
    return cell


def _as_list(value: Any) -> list:
    if value is None:
        return []
    if isinstance(value, (list, tuple, set, frozenset)):
        return list(value)
    if isinstance(value, str):
        return [v.strip() for v in re.split(r"[;|]", value) if v.strip()]
    return [value]


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with path.open(newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise MalformedRow(str(path), 0, "empty file")
    return rows[0], rows[1:]


def _loose(s: str) -> str:
    return re.sub(r"[\s\"'“”‘’`_]", "", s)


class _NameIndex:
    def __init__(self, characters: Sequence[CharacterEntity]):
        self.by_main = {c.main_name: c.char_id for c in characters}
        alias_owner: dict[str, set[int]] = {}
        for c in characters:
            for a in c.aliases:
                alias_owner.setdefault(a, set()).add(c.char_id)
        self.by_alias = {a: next(iter(ids)) for a, ids in alias_owner.items() if len(ids) == 1}
        self.by_id = {str(c.char_id): c.char_id for c in characters}
        self.characters = characters

    def resolve(self, name: Any, where: str) -> int:
        if isinstance(name, int):
            if name in self.by_id.values():
                return name
            raise DanglingReference(str(name), where)
        name = str(name).strip()
        if name in self.by_main:
            return self.by_main[name]
        if name in self.by_alias:
            return self.by_alias[name]
        if name in self.by_id:
            return self.by_id[name]
        if name.lower() in RESERVED_UNKNOWN_NAMES:
            return UNKNOWN
        from .charid import match_name, Unique

        hit = match_name(name, self.characters)
        if isinstance(hit, Unique):
            return hit.char_id
        raise DanglingReference(name, where)


def _byte_to_char_map(raw: str) -> dict[int, int]:
    out = {}
    b = 0
    for i, ch in enumerate(raw):
        out[b] = i
        b += len(ch.encode("utf-8"))
    out[b] = len(raw)
    return out


def _parse_spans(value: Any) -> list[Span]:
    vals = _as_list(value)
    if len(vals) == 2 and all(isinstance(v, int) for v in vals):
        return [(vals[0], vals[1])]
    spans = []
    for v in vals:
        if isinstance(v, (list, tuple)) and len(v) == 2:
            spans.append((int(v[0]), int(v[1])))
        else:
            raise ValueError(f"bad span {v!r}")
    return spans


def load_pdnc_bundle(path: str | Path) -> NovelBundle:
    """Load one PDNC novel folder (``novel_text.txt``, character and quotation tables).

    Column names are matched loosely so both the original and the revised
    release layouts load.  Quote offsets are checked by slicing the text
    against the annotated quotation text, trying code-point offsets first and
    UTF-8 byte offsets second.
    """
    directory = Path(path)
    if not directory.is_dir():
        raise MissingFile(f"{directory}: not a directory")
    text_path = _find_file(directory, _TEXT_FILES)
    char_path = _find_file(directory, _CHAR_FILES)
    quote_path = _find_file(directory, _QUOTE_FILES)
    raw = text_path.read_text(encoding="utf-8")
    text, offset_map = normalize_text(raw)
    notes: dict[str, Any] = {"source": str(directory), "warnings": []}

    characters = _load_characters(char_path)
    _check_alias_overlap(characters, notes)
    names = _NameIndex(characters)

    header, rows = _read_csv(quote_path)
    cols = _column_map(header, _QUOTE_COLS)
    for required in ("id", "spans", "speaker"):
        if required not in cols:
            raise MalformedRow(str(quote_path), 0, f"missing column for {required!r} in header {header}")
    use_bytes = _detect_byte_offsets(raw, rows, cols)
    byte_map = _byte_to_char_map(raw) if use_bytes else None
    notes["offset_unit"] = "utf8-bytes" if use_bytes else "code-points"
    annotated_types = "type" in cols and any(r[cols["type"]].strip() for r in rows if len(r) > cols["type"])
    notes["quote_type_source"] = "annotated" if annotated_types else "derived"

    def to_norm(raw_offset: int) -> int:
        if byte_map is not None:
            if raw_offset not in byte_map:
                raise ValueError(f"offset {raw_offset} splits a UTF-8 sequence")
            raw_offset = byte_map[raw_offset]
        if not 0 <= raw_offset <= len(raw):
            raise ValueError(f"offset {raw_offset} out of range")
        return int(offset_map[raw_offset])

    quotations = []
    pending_types = []
    for rowno, row in enumerate(rows, start=2):
        if not any(cell.strip() for cell in row):
            continue
        try:
            cell = lambda key: row[cols[key]] if key in cols and cols[key] < len(row) else ""
            qid = cell("id").strip()
            raw_spans = sorted(_parse_spans(_literal(cell("spans"))))
            if not raw_spans:
                raise ValueError("no quotation span")
            sub_texts = [str(s) for s in _as_list(_literal(cell("subs")))] if "subs" in cols else []
            if len(sub_texts) != len(raw_spans):
                sub_texts = []
            subs = []
            for i, (rs, re_) in enumerate(raw_spans):
                s, e = to_norm(rs), to_norm(re_)
                expected = sub_texts[i] if sub_texts else None
                s, e = _verify_span(text, s, e, expected)
                subs.append((s, e))
            if not sub_texts and cell("text"):
                joined = "".join(text[s:e] for s, e in subs)
                if _loose(cell("text")) and _loose(cell("text")) not in _loose(joined) and _loose(joined) not in _loose(cell("text")):
                    raise ValueError("quotation text does not match its spans")
            speaker = names.resolve(cell("speaker"), f"{quote_path.name} row {rowno}")
            addressees = tuple(
                names.resolve(a, f"{quote_path.name} row {rowno} addressee")
                for a in _as_list(_literal(cell("addressees")))
            )
            mentions = _row_mentions(row, cols, text, to_norm, names, f"{quote_path.name} row {rowno}", notes)
            span = (subs[0][0], subs[-1][1])
            ref = _locate_referring(text, cell("refexp"), span, subs)
            qtype = _normalize_type(cell("type")) if annotated_types else None
        except (ValueError, SyntaxError, TypeError) as exc:
            raise MalformedRow(str(quote_path), rowno, str(exc)) from exc
        quotations.append(
            Quotation(
                quote_id=qid,
                span=span,
                speaker_id=speaker,
                addressee_ids=addressees,
                referring_expression=ref,
                quote_type=qtype or "implicit",
                internal_mentions=tuple(mentions),
                sub_spans=tuple(subs),
            )
        )
        pending_types.append(qtype is None)

    bundle = NovelBundle(
        novel_id=directory.name,
        title=directory.name.replace("_", " "),
        text=text,
        characters=tuple(characters),
        quotations=tuple(quotations),
        provenance=notes,
    )
    if any(pending_types):
        bundle = _derive_quote_types(bundle)
    bundle.validate()
    if notes["warnings"]:
        logger.warning("%s: %d annotation warnings", directory.name, len(notes["warnings"]))
    return bundle


def _load_characters(path: Path) -> list[CharacterEntity]:
    header, rows = _read_csv(path)
    cols = _column_map(header, _CHAR_COLS)
    if "main" not in cols:
        raise MalformedRow(str(path), 0, f"no main-name column in header {header}")
    characters = []
    seen = set()
    for rowno, row in enumerate(rows, start=2):
        if not any(c.strip() for c in row):
            continue
        try:
            main = row[cols["main"]].strip()
            if not main:
                raise ValueError("empty main name")
            cid = int(row[cols["id"]]) if "id" in cols and row[cols["id"]].strip() else len(characters)
            aliases = {str(a).strip() for a in _as_list(_literal(row[cols["aliases"]]))} if "aliases" in cols else set()
        except (IndexError, ValueError) as exc:
            raise MalformedRow(str(path), rowno, str(exc)) from exc
        if cid in seen:
            raise MalformedRow(str(path), rowno, f"duplicate character id {cid}")
        seen.add(cid)
        characters.append(CharacterEntity(cid, main, frozenset(aliases | {main})))
    return characters


def _check_alias_overlap(characters: Sequence[CharacterEntity], notes: dict) -> None:
    owner: dict[str, int] = {}
    for c in characters:
        for a in c.aliases:
            if a in owner and owner[a] != c.char_id and len(a.split()) > 1:
                notes["warnings"].append(f"alias {a!r} shared by characters {owner[a]} and {c.char_id}")
            owner.setdefault(a, c.char_id)


def _detect_byte_offsets(raw: str, rows: list[list[str]], cols: dict[str, int]) -> bool:
    if raw.isascii():
        return False
    text_col = cols.get("subs", cols.get("text"))
    if text_col is None:
        return False
    votes_char = votes_byte = 0
    data = raw.encode("utf-8")
    for row in rows[:200]:
        try:
            spans = _parse_spans(_literal(row[cols["spans"]]))
            texts = _as_list(_literal(row[text_col])) if "subs" in cols else [row[text_col]]
        except (ValueError, IndexError, SyntaxError):
            continue
        for (s, e), t in zip(spans, texts):
            want = _loose(str(t))
            if not want:
                continue
            if _loose(raw[s:e]) == want:
                votes_char += 1
            if _loose(data[s:e].decode("utf-8", errors="ignore")) == want:
                votes_byte += 1
    return votes_byte > votes_char


def _verify_span(text: str, s: int, e: int, expected: str | None, slack: int = 200) -> Span:
    if not 0 <= s < e <= len(text):
        raise ValueError(f"span ({s}, {e}) out of bounds")
    if expected is None or not _loose(expected):
        return s, e
    want = _loose(expected)
    if _loose(text[s:e]) == want:
        return s, e
    # offsets drifted: look for the annotated text nearby
    core = expected.strip().strip("\"'“”‘’").strip()
    lo, hi = max(0, s - slack), min(len(text), e + slack)
    pos = text.find(core, lo, hi) if core else -1
    if pos >= 0:
        ns, ne = pos, pos + len(core)
        # re-attach enclosing marks if the original span included them
        if ns > 0 and text[ns - 1] in "\"'“”‘’" and text[s] in "\"'“”‘’":
            ns -= 1
        if ne < len(text) and text[ne] in "\"'“”‘’" and text[e - 1] in "\"'“”‘’":
            ne += 1
        return ns, ne
    raise ValueError(f"span ({s}, {e}) text {text[s:e][:40]!r} does not match {expected[:40]!r}")


def _row_mentions(row, cols, text, to_norm, names: _NameIndex, where: str, notes: dict) -> list[MentionSpan]:
    if "mspans" not in cols or cols["mspans"] >= len(row):
        return []
    spans = _as_list(_literal(row[cols["mspans"]]))
    texts = _as_list(_literal(row[cols["mtexts"]])) if "mtexts" in cols and cols["mtexts"] < len(row) else []
    ents = _as_list(_literal(row[cols["ments"]])) if "ments" in cols and cols["ments"] < len(row) else []
    out = []
    for i, sp in enumerate(spans):
        try:
            (rs, re_), = _parse_spans([sp])
            s, e = to_norm(rs), to_norm(re_)
            s, e = _verify_span(text, s, e, str(texts[i]) if i < len(texts) else None, slack=60)
        except (ValueError, TypeError) as exc:
            notes["warnings"].append(f"{where}: mention {sp!r} dropped ({exc})")
            continue
        referents = _as_list(ents[i]) if i < len(ents) else []
        ids = tuple(dict.fromkeys(names.resolve(r, f"{where} mention") for r in referents))
        out.append(MentionSpan((s, e), text[s:e], ids))
    return out


def _normalize_type(value: str) -> str | None:
    v = value.strip().lower()
    for t in QUOTE_TYPES:
        if v.startswith(t[:4]):
            return t
    return None


def _locate_referring(text: str, refexp: str, span: Span, subs: Sequence[Span], reach: int = 300) -> Span | None:
    """Find the annotated referring expression text next to the quotation."""
    refexp = (refexp or "").strip()
    if not refexp or refexp.lower() in {"none", "nan", "[]"}:
        return None
    pattern = re.compile(r"\s+".join(re.escape(w) for w in refexp.split()))
    lo, hi = max(0, span[0] - reach), min(len(text), span[1] + reach)
    best = None
    for m in pattern.finditer(text, lo, hi):
        s, e = m.span()
        if any(s < fe and fs < e for fs, fe in subs):
            continue
        dist = min(abs(s - span[1]), abs(span[0] - e), *(abs(s - fe) for _, fe in subs))
        if best is None or dist < best[0]:
            best = (dist, (s, e))
    return best[1] if best else None


def _derive_quote_types(bundle: NovelBundle) -> NovelBundle:
    from dataclasses import replace

    from .quotes import classify_gold_quotation

    quotations = []
    for q in bundle.quotations:
        if q.referring_expression is not None:
            qtype = "explicit"
        else:
            qtype = classify_gold_quotation(q, bundle)
        quotations.append(replace(q, quote_type=qtype))
    return replace(bundle, quotations=tuple(quotations), provenance=bundle.provenance)


def load_corpus(paths: Iterable[str | Path]) -> list[NovelBundle]:
    """Load bundle JSON files and/or directories of them, sorted by novel id."""
    bundles = []
    for p in map(Path, paths):
        if p.is_dir():
            files = sorted(p.glob("*.json"))
            if not files and any(p.glob("*.csv")):
                bundles.append(load_pdnc_bundle(p))
                continue
            bundles.extend(load_bundle(f) for f in files)
        else:
            bundles.append(load_bundle(p))
    return sorted(bundles, key=lambda b: b.novel_id)
