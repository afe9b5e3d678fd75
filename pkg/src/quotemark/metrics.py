"""Evaluation: character identification, coreference, quotation
identification, attribution accuracy and cross-validation folds."""

from __future__ import annotations

import bisect
import random
from collections import defaultdict
from itertools import accumulate
from dataclasses import asdict, dataclass, field
from statistics import fmean
from typing import Iterable, Mapping, Sequence, Union

from .attrib import Attribution
from .charid import Multiple, Unique, get_matcher
from .corpus import CharacterEntity, MentionSpan, NovelBundle, Quotation, Span
from .errors import EmptyGold, EmptyInput, MissingPrediction, TooFewNovels
from .mentions import ClusterMatch, MentionCluster, match_cluster_to_entity
from .quotes import QUOTE_CHARS, QuoteSpanCandidate

AliasGroup = Union[CharacterEntity, Iterable[str]]


def _alias_sets(entities: Sequence[AliasGroup]) -> list[frozenset[str]]:
    out = []
    for e in entities:
        out.append(e.aliases if isinstance(e, CharacterEntity) else frozenset(e))
    return out


def _linked_ids(aliases: Iterable[str], gold: Sequence[CharacterEntity]) -> set[int]:
    matcher = get_matcher(gold)
    ids = set()
    for a in aliases:
        hit = matcher.match(a)
        if isinstance(hit, Unique):
            ids.add(hit.char_id)
    return ids


def _mean_or_none(values: Sequence[float | None]) -> float | None:
    vals = [v for v in values if v is not None]
    return fmean(vals) if vals else None


# --------------------------------------------------------------------------
# character identification

@dataclass(frozen=True)
class CharacterRecognitionReport:
    n_gold: int
    n_pred_entities: int
    n_matched_pred: int
    n_matched_gold: int
    cr: float

    def to_json(self) -> dict:
        return asdict(self)


def character_recognition_score(pred_entities: Sequence[AliasGroup], gold_characters: Sequence[CharacterEntity]) -> CharacterRecognitionReport:
    """M/N: share of gold characters hit by at least one predicted entity."""
    if not gold_characters:
        raise EmptyGold("character recognition needs a non-empty gold list")
    hit_gold: set[int] = set()
    matched_pred = 0
    for aliases in _alias_sets(pred_entities):
        ids = _linked_ids(aliases, gold_characters)
        if ids:
            matched_pred += 1
            hit_gold |= ids
    n = len(gold_characters)
    return CharacterRecognitionReport(n, len(pred_entities), matched_pred, len(hit_gold), len(hit_gold) / n)


def v_score(h: float | None, c: float | None) -> float | None:
    """Harmonic mean 2hc/(h+c); completeness may exceed 1."""
    if h is None or c is None:
        return None
    if h + c == 0:
        return 0.0
    return 2.0 * h * c / (h + c)


@dataclass(frozen=True)
class ClusteringReport:
    n_clusters: int
    homogeneity: float | None
    completeness: float | None
    v_score: float | None

    def to_json(self) -> dict:
        return asdict(self)


def clustering_scores(pred_entities: Sequence[AliasGroup], gold_characters: Sequence[CharacterEntity]) -> ClusteringReport:
    """Homogeneity, completeness and their harmonic mean.

    Homogeneity is the share of predicted clusters (matched or not) whose
    aliases link to exactly one gold character.  Completeness is, over gold
    characters owning at least one such cluster, the mean number of
    homogeneous clusters per character (1 is ideal, larger means split).
    """
    groups = _alias_sets(pred_entities)
    if not groups:
        return ClusteringReport(0, None, None, None)
    per_gold: dict[int, int] = defaultdict(int)
    homogeneous = 0
    for aliases in groups:
        ids = _linked_ids(aliases, gold_characters) if gold_characters else set()
        if len(ids) == 1:
            homogeneous += 1
            per_gold[next(iter(ids))] += 1
    h = homogeneous / len(groups)
    c = fmean(per_gold.values()) if per_gold else None
    return ClusteringReport(len(groups), h, c, v_score(h, c))


@dataclass(frozen=True)
class CharacterIdRow:
    novel: str
    n_chars: int
    cr: float
    n_clusters: int
    homogeneity: float | None
    completeness: float | None
    v_score: float | None


def character_id_row(novel: str, pred: Sequence[AliasGroup], gold: Sequence[CharacterEntity]) -> CharacterIdRow:
    cr = character_recognition_score(pred, gold)
    cl = clustering_scores(pred, gold)
    return CharacterIdRow(novel, len(gold), cr.cr, cl.n_clusters, cl.homogeneity, cl.completeness, cl.v_score)


def character_id_table(rows: Sequence[CharacterIdRow]) -> dict:
    """Per-novel rows plus a column-wise mean row."""
    rows = sorted(rows, key=lambda r: r.novel)
    mean = {
        "novel": "Mean",
        "n_chars": _mean_or_none([r.n_chars for r in rows]),
        "cr": _mean_or_none([r.cr for r in rows]),
        "n_clusters": _mean_or_none([r.n_clusters for r in rows]),
        "homogeneity": _mean_or_none([r.homogeneity for r in rows]),
        "completeness": _mean_or_none([r.completeness for r in rows]),
        "v_score": _mean_or_none([r.v_score for r in rows]),
    }
    return {
        "columns": ["novel", "n_chars", "cr", "n_clusters", "homogeneity", "completeness", "v_score"],
        "rows": [asdict(r) for r in rows],
        "mean": mean,
    }


# --------------------------------------------------------------------------
# coreference

@dataclass(frozen=True)
class MentionClusterStats:
    n_clusters: int
    uniq: float
    mult: float
    none: float

    def to_json(self) -> dict:
        return asdict(self)


def mention_cluster_stats(
    clusters: Sequence[MentionCluster],
    characters: Sequence[CharacterEntity],
    quote_spans: Sequence[Span] = (),
    use_quote_internal: bool = True,
) -> MentionClusterStats:
    if not clusters:
        raise EmptyInput("no clusters")
    kinds = [match_cluster_to_entity(c, characters, quote_spans, use_quote_internal).kind for c in clusters]
    n = len(kinds)
    u = sum(isinstance(k, Unique) for k in kinds)
    m = sum(isinstance(k, Multiple) for k in kinds)
    return MentionClusterStats(n, u / n, m / n, (n - u - m) / n)


def mention_resolution_accuracy(
    clusters: Sequence[MentionCluster],
    gold_internal_mentions: Sequence[MentionSpan],
    characters: Sequence[CharacterEntity] | None = None,
    matches: Sequence[ClusterMatch] | None = None,
) -> tuple[int, float | None]:
    """(# evaluated, accuracy) over gold mentions found in a uniquely matched cluster."""
    if matches is None:
        if characters is None:
            raise ValueError("need characters or precomputed matches")
        matches = [match_cluster_to_entity(c, characters) for c in clusters]
    resolved = {m.cluster_id: m.kind.char_id for m in matches if isinstance(m.kind, Unique)}
    span_entity: dict[Span, int] = {}
    for c in sorted(clusters, key=lambda c: c.cluster_id):
        if c.cluster_id in resolved:
            for s in c.spans:
                span_entity.setdefault(s.span, resolved[c.cluster_id])
    n_eval = correct = 0
    for g in gold_internal_mentions:
        if g.span in span_entity:
            n_eval += 1
            correct += span_entity[g.span] in g.entity_ids
    return n_eval, (correct / n_eval if n_eval else None)


# --------------------------------------------------------------------------
# quotation identification

@dataclass(frozen=True)
class QuoteIdReport:
    n_gold: int
    n_pred: int
    exact_match_rate: float
    overlap_recall: float
    precision_proxy: float | None

    def to_json(self) -> dict:
        return asdict(self)


def trim_span(text: str, span: Span) -> Span:
    """Drop quote marks and whitespace at both ends."""
    s, e = span
    strip = QUOTE_CHARS + " \t\n"
    while s < e and text[s] in strip:
        s += 1
    while e > s and text[e - 1] in strip:
        e -= 1
    return s, e


def quotation_identification_score(
    pred_spans: Sequence[QuoteSpanCandidate | Span],
    gold_quotations: Sequence[Quotation],
    text: str | None = None,
    trim: bool = True,
) -> QuoteIdReport:
    """Exact-match rate and overlap recall over gold quotations; overlap precision over predictions.

    A gold quotation matches exactly when every one of its fragments equals a
    predicted span (or a per-paragraph piece of one) after trimming marks.
    """
    if not gold_quotations:
        raise EmptyGold("no gold quotations")
    preds: list[Span] = []
    targets: set[Span] = set()
    for p in pred_spans:
        if isinstance(p, QuoteSpanCandidate):
            preds.append(p.span)
            pieces = (p.span,) + tuple(p.pieces)
        else:
            preds.append(tuple(p))
            pieces = (tuple(p),)
        for piece in pieces:
            targets.add(trim_span(text, piece) if trim and text is not None else piece)
    preds.sort()

    def norm(span):
        return trim_span(text, span) if trim and text is not None else tuple(span)

    gold_frags = sorted(f for q in gold_quotations for f in q.sub_spans)
    exact = sum(all(norm(f) in targets for f in q.sub_spans) for q in gold_quotations)
    pred_index = _OverlapIndex(preds)
    gold_index = _OverlapIndex(gold_frags)
    recall = sum(any(pred_index.hits(f) for f in q.sub_spans) for q in gold_quotations)
    precise = sum(gold_index.hits(p) for p in preds)
    n = len(gold_quotations)
    return QuoteIdReport(n, len(preds), exact / n, recall / n, precise / len(preds) if preds else None)


class _OverlapIndex:
    """Answers "does any stored span overlap (s, e)" in log time."""

    def __init__(self, spans: Iterable[Span]):
        ordered = sorted(spans)
        self.starts = [a for a, _ in ordered]
        self.max_end = list(accumulate((b for _, b in ordered), max))

    def hits(self, span: Span) -> bool:
        hi = bisect.bisect_left(self.starts, span[1])
        return hi > 0 and self.max_end[hi - 1] > span[0]


# --------------------------------------------------------------------------
# attribution accuracy

@dataclass(frozen=True)
class AttributionReport:
    overall: float
    n: int
    by_type: dict[str, float | None]
    counts: dict[str, int]
    per_novel: dict[str, dict]
    macro_mean: float

    def to_json(self) -> dict:
        return asdict(self)


def _score(pairs: Sequence[tuple[Quotation, Attribution]]) -> dict:
    by: dict[str, list[bool]] = defaultdict(list)
    for q, a in pairs:
        ok = a.predicted is not None and a.predicted == q.speaker_id
        by[q.quote_type].append(ok)
        by["rest" if q.quote_type != "explicit" else "_exp"].append(ok)
    all_ok = [ok for t in ("explicit", "anaphoric", "implicit") for ok in by.get(t, [])]
    rate = lambda xs: (sum(xs) / len(xs)) if xs else None
    return {
        "overall": rate(all_ok),
        "n": len(all_ok),
        "by_type": {t: rate(by.get(t, [])) for t in ("explicit", "anaphoric", "implicit", "rest")},
        "counts": {t: len(by.get(t, [])) for t in ("explicit", "anaphoric", "implicit", "rest")},
    }


def attribution_accuracy_report(
    attributions: Mapping[str, Sequence[Attribution]],
    gold: Sequence[NovelBundle],
) -> AttributionReport:
    """Accuracy with UNRESOLVED counted wrong, split by quote type and novel.

    ``rest`` pools anaphoric and implicit quotations.
    """
    missing = []
    pairs_by_novel = {}
    for b in sorted(gold, key=lambda b: b.novel_id):
        preds = {a.quote_id: a for a in attributions.get(b.novel_id, ())}
        pairs = []
        for q in b.quotations:
            if q.quote_id not in preds:
                missing.append(f"{b.novel_id}:{q.quote_id}")
            else:
                pairs.append((q, preds[q.quote_id]))
        pairs_by_novel[b.novel_id] = pairs
    if missing:
        raise MissingPrediction(missing)
    all_pairs = [p for ps in pairs_by_novel.values() for p in ps]
    if not all_pairs:
        raise EmptyGold("no gold quotations to score")
    pooled = _score(all_pairs)
    per_novel = {nid: _score(ps) for nid, ps in pairs_by_novel.items() if ps}
    macro = fmean(r["overall"] for r in per_novel.values())
    return AttributionReport(pooled["overall"], pooled["n"], pooled["by_type"], pooled["counts"], per_novel, macro)


def attribution_table(reports: Mapping[tuple[str, str], AttributionReport]) -> dict:
    """Rows of method x split with overall, Exp. and Rest columns."""
    rows = []
    for (method, split), r in sorted(reports.items()):
        rows.append({"method": method, "split": split, "overall": r.overall, "exp": r.by_type["explicit"], "rest": r.by_type["rest"]})
    return {"columns": ["method", "split", "overall", "exp", "rest"], "rows": rows}


# --------------------------------------------------------------------------
# cross-validation

@dataclass(frozen=True)
class FoldSpec:
    mode: str
    folds: tuple[tuple, ...]
    seed: int
    k: int = field(default=5)

    def train_test(self, i: int) -> tuple[frozenset, frozenset]:
        test = frozenset(self.folds[i])
        train = frozenset(x for j, f in enumerate(self.folds) if j != i for x in f)
        return train, test

    def to_json(self) -> dict:
        return {"mode": self.mode, "seed": self.seed, "k": self.k, "folds": [[list(x) if isinstance(x, tuple) else x for x in f] for f in self.folds]}


def make_cv_folds(bundles: Sequence[NovelBundle], mode: str, seed: int, k: int = 5) -> FoldSpec:
    """Deterministic k-fold split over quotations (stratified per novel) or whole novels.

    In quotation mode each novel's quotations are shuffled and dealt round
    robin, continuing the deal where the previous novel stopped so that
    global fold sizes stay within one of each other.
    """
    if mode not in ("quotations", "novels"):
        raise ValueError(f"unknown split mode {mode!r}")
    rng = random.Random(seed)
    ordered = sorted(bundles, key=lambda b: b.novel_id)
    folds: list[list] = [[] for _ in range(k)]
    if mode == "novels":
        if len(ordered) < k:
            raise TooFewNovels(f"{k}-fold novel split needs at least {k} novels, got {len(ordered)}")
        ids = [b.novel_id for b in ordered]
        rng.shuffle(ids)
        for i, nid in enumerate(ids):
            folds[i % k].append(nid)
    else:
        cursor = 0
        for b in ordered:
            qids = sorted(q.quote_id for q in b.quotations)
            rng.shuffle(qids)
            for qid in qids:
                folds[cursor % k].append((b.novel_id, qid))
                cursor += 1
    return FoldSpec(mode, tuple(tuple(sorted(f)) for f in folds), seed, k)
