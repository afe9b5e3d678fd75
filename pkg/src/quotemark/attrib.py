"""Rule-based speaker attribution."""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from statistics import fmean
from typing import Mapping, Sequence

from .corpus import NovelBundle, Quotation, Span
from .errors import EmptyInput
from .mentions import CandidateInventory, InventoryMention
from .quotes import PRONOUNS, adjacent_narration, find_speech_verbs

UNRESOLVED = None
METHODS = ("explicit_rule", "nearest_mention", "seq_model")


@dataclass(frozen=True)
class Attribution:
    quote_id: str
    predicted: int | None
    method: str
    evidence: Span | None = None

    @property
    def resolved(self) -> bool:
        return self.predicted is not None

    def to_row(self) -> dict:
        return {
            "quote_id": self.quote_id,
            "predicted_char_id": self.predicted,
            "method": self.method,
            "evidence": list(self.evidence) if self.evidence else None,
        }

    @classmethod
    def from_row(cls, row: dict) -> "Attribution":
        ev = row.get("evidence")
        return cls(str(row["quote_id"]), row.get("predicted_char_id"), row.get("method", "explicit_rule"), tuple(ev) if ev else None)


class QuoteMask:
    """Fast "is this span inside some quotation fragment" test."""

    def __init__(self, fragments: Sequence[Span]):
        self.fragments = sorted(tuple(f) for f in fragments)
        self._starts = [s for s, _ in self.fragments]

    @classmethod
    def of(cls, bundle: NovelBundle) -> "QuoteMask":
        return cls([s for q in bundle.quotations for s in q.sub_spans])

    def covers(self, start: int, end: int) -> bool:
        i = bisect.bisect_right(self._starts, start) - 1
        # fragments can nest only through bad input; check a few back
        for j in range(i, max(i - 3, -1), -1):
            s, e = self.fragments[j]
            if s <= start and end <= e:
                return True
        return False


def _blockers(bundle: NovelBundle, q: Quotation, mask: QuoteMask | None) -> list[Span]:
    frags = mask.fragments if mask is not None else [s for o in bundle.quotations for s in o.sub_spans]
    own = set(q.sub_spans)
    return [f for f in frags if f not in own]


def detect_referring_expression(
    q: Quotation,
    bundle: NovelBundle,
    inventory: CandidateInventory,
    window: int = 5,
    verbs=None,
    mask: QuoteMask | None = None,
) -> tuple[Span, int] | None:
    """Nearest ⟨mention, speech verb⟩ pair in the narration touching the quote.

    Both the verb and the mention must fall within ``window`` tokens of a
    quote boundary, in the same paragraph.  Pronoun mentions are ignored.
    """
    mask = mask or QuoteMask.of(bundle)
    blockers = _blockers(bundle, q, mask)
    best = None
    for frag_no, frag in enumerate(q.sub_spans):
        para = bundle.paragraph_index[bundle.paragraph_of(frag[0])]
        for w in adjacent_narration(bundle.text, para, [frag], blockers + [f for f in q.sub_spans if f != frag], window):
            toks = sorted(w.tokens, key=lambda t: t.start)
            verb_idx = find_speech_verbs(toks, verbs)
            if not verb_idx:
                continue
            n = len(toks)
            tok_starts = [t.start for t in toks]
            for m in _window_mentions(inventory, w, mask):
                if m.span.surface.lower() in PRONOUNS:
                    continue
                k_first = bisect.bisect_left(tok_starts, m.start)
                k_last = min(max(bisect.bisect_left(tok_starts, m.end) - 1, k_first), n - 1)
                # token distance from the quote boundary
                m_dist = k_first if w.side == "after" else n - 1 - k_last
                for v in verb_idx:
                    if k_first <= v <= k_last:
                        continue
                    v_dist = v if w.side == "after" else n - 1 - v
                    score = (max(m_dist, v_dist), 0 if w.side == "after" else 1, frag_no, m.start)
                    if best is None or score < best[0]:
                        best = (score, m)
    if best is None:
        return None
    m = best[1]
    return (m.start, m.end), m.char_id


def _window_mentions(inventory: CandidateInventory, w, mask: QuoteMask) -> list[InventoryMention]:
    out = []
    if w.side == "after":
        i = inventory.index_from(w.start)
        while i < len(inventory) and inventory.mentions[i].start < w.end:
            out.append(inventory.mentions[i])
            i += 1
    else:
        # a mention may begin just before the window (``Mr`` of ``Mr. Darcy``)
        i = inventory.index_before(w.start)
        while i < len(inventory) and inventory.mentions[i].start < w.end:
            if w.start < inventory.mentions[i].end <= w.end:
                out.append(inventory.mentions[i])
            i += 1
    return [m for m in out if not mask.covers(m.start, m.end)]


def attribute_explicit(
    q: Quotation,
    bundle: NovelBundle,
    inventory: CandidateInventory,
    oracle: bool = False,
    window: int = 5,
    verbs=None,
    mask: QuoteMask | None = None,
) -> Attribution:
    """Speaker from a detected referring expression, else UNRESOLVED.

    With ``oracle=True`` an annotated referring expression is trusted and the
    annotated speaker returned.
    """
    if oracle and q.referring_expression is not None:
        return Attribution(q.quote_id, q.speaker_id, "explicit_rule", q.referring_expression)
    hit = detect_referring_expression(q, bundle, inventory, window, verbs, mask)
    if hit is None:
        return Attribution(q.quote_id, UNRESOLVED, "explicit_rule")
    span, cid = hit
    return Attribution(q.quote_id, cid, "explicit_rule", span)


def attribute_nearest(
    q: Quotation,
    bundle: NovelBundle,
    inventory: CandidateInventory,
    paragraphs: int = 2,
    mask: QuoteMask | None = None,
) -> Attribution:
    """Closest resolved mention outside quotations, within ``paragraphs`` of the quote.

    Distances are in characters; on a tie the mention before the quote wins.
    """
    mask = mask or QuoteMask.of(bundle)
    first_p = bundle.paragraph_of(q.start)
    last_p = bundle.paragraph_of(max(q.end - 1, q.start))
    lo = bundle.paragraph_index[max(0, first_p - paragraphs)][0]
    hi = bundle.paragraph_index[min(len(bundle.paragraph_index) - 1, last_p + paragraphs)][1]

    back = None
    i = inventory.index_before(q.start) - 1
    while i >= 0 and inventory.mentions[i].end > lo:
        m = inventory.mentions[i]
        if m.start >= lo and not mask.covers(m.start, m.end):
            back = (q.start - m.end, m)
            break
        i -= 1

    fwd = None
    anchor = q.sub_spans[0][1]
    i = inventory.index_from(anchor)
    while i < len(inventory) and inventory.mentions[i].start < hi:
        m = inventory.mentions[i]
        if m.end <= hi and not mask.covers(m.start, m.end) and not q.covers(m.start, m.end):
            prior_end = max(e for s, e in q.sub_spans if e <= m.start)
            fwd = (m.start - prior_end, m)
            break
        i += 1

    options = [o for o in (back, fwd) if o is not None]
    if not options:
        return Attribution(q.quote_id, UNRESOLVED, "nearest_mention")
    dist, m = min(options, key=lambda o: (o[0], 0 if o is back else 1))
    return Attribution(q.quote_id, m.char_id, "nearest_mention", (m.start, m.end))


def attribute_novel(
    bundle: NovelBundle,
    inventory: CandidateInventory,
    method: str = "explicit_rule",
    quotations: Sequence[Quotation] | None = None,
    **kwargs,
) -> list[Attribution]:
    mask = QuoteMask.of(bundle)
    quotations = bundle.quotations if quotations is None else quotations
    if method == "explicit_rule":
        return [attribute_explicit(q, bundle, inventory, mask=mask, **kwargs) for q in quotations]
    if method == "nearest_mention":
        return [attribute_nearest(q, bundle, inventory, mask=mask, **kwargs) for q in quotations]
    raise ValueError(f"unknown rule method {method!r}")


@dataclass(frozen=True)
class UnresolvedReport:
    per_novel: dict[str, float]
    mean: float
    min: float
    max: float

    def to_json(self) -> dict:
        return {"per_novel": dict(sorted(self.per_novel.items())), "mean": self.mean, "min": self.min, "max": self.max}


def compute_unresolved_rate(attributions: Mapping[str, Sequence[Attribution]]) -> UnresolvedReport:
    """Share of quotations left UNRESOLVED, per novel, with macro mean and range."""
    if not attributions or any(len(v) == 0 for v in attributions.values()):
        raise EmptyInput("unresolved rate needs at least one attribution per novel")
    per = {nid: sum(1 for a in atts if a.predicted is None) / len(atts) for nid, atts in attributions.items()}
    vals = list(per.values())
    return UnresolvedReport(per, fmean(vals), min(vals), max(vals))


def write_attributions(path, attributions: Sequence[Attribution]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in attributions:
            fh.write(json.dumps(a.to_row(), ensure_ascii=False) + "\n")
