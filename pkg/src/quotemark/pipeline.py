"""End-to-end helpers shared by the CLI and the benchmark harness."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .attrib import UNRESOLVED, Attribution, attribute_novel
from .corpus import NovelBundle
from .mentions import CandidateInventory, MentionCluster, build_inventory
from .metrics import FoldSpec, make_cv_folds
from .seqmodel import SeqConfig, TrainResult, encode_context, predict_batch, train_model

logger = logging.getLogger(__name__)

# CLI spellings -> internal method names
METHOD_ALIASES = {"explicit-rule": "explicit_rule", "nearest": "nearest_mention", "seq": "seq_model"}


def build_inventories(
    bundles: Sequence[NovelBundle],
    clusters: Mapping[str, Sequence[MentionCluster]] | None = None,
    use_gold: bool = True,
    use_quote_internal: bool = True,
) -> dict[str, CandidateInventory]:
    clusters = clusters or {}
    return {
        b.novel_id: build_inventory(b, clusters.get(b.novel_id, ()), use_gold=use_gold, use_quote_internal=use_quote_internal)
        for b in bundles
    }


def rule_attributions(
    bundles: Sequence[NovelBundle],
    inventories: Mapping[str, CandidateInventory],
    method: str,
    **kwargs,
) -> dict[str, list[Attribution]]:
    method = METHOD_ALIASES.get(method, method)
    return {b.novel_id: attribute_novel(b, inventories[b.novel_id], method, **kwargs) for b in bundles}


@dataclass
class CrossValidationResult:
    folds: FoldSpec
    attributions: dict[str, list[Attribution]]
    traces: list[TrainResult | None] = field(default_factory=list)


def _fold_members(spec: FoldSpec, i: int, bundles: Sequence[NovelBundle]):
    """(train, test) lists of (bundle, quotation) for fold ``i``."""
    _, test_keys = spec.train_test(i)
    train, test = [], []
    for b in bundles:
        for q in b.quotations:
            key = b.novel_id if spec.mode == "novels" else (b.novel_id, q.quote_id)
            (test if key in test_keys else train).append((b, q))
    return train, test


def cross_validate_seq(
    bundles: Sequence[NovelBundle],
    inventories: Mapping[str, CandidateInventory],
    mode: str,
    seed: int,
    config: SeqConfig | None = None,
    k: int = 5,
) -> CrossValidationResult:
    """Out-of-fold sequential-model predictions for every quotation.

    A fold whose training side is empty (tiny corpora) predicts UNRESOLVED
    for its test quotations instead of failing.
    """
    config = config or SeqConfig(seed=seed)
    bundles = sorted(bundles, key=lambda b: b.novel_id)
    spec = make_cv_folds(bundles, mode, seed, k)
    predicted: dict[tuple[str, str], Attribution] = {}
    traces: list[TrainResult | None] = []
    for i in range(k):
        train, test = _fold_members(spec, i, bundles)
        if not test:
            traces.append(None)
            continue
        if not train:
            logger.warning("fold %d has no training quotations; predicting UNRESOLVED", i)
            for b, q in test:
                predicted[(b.novel_id, q.quote_id)] = Attribution(q.quote_id, UNRESOLVED, "seq_model")
            traces.append(None)
            continue
        data = [encode_context(q, inventories[b.novel_id], config=config) for b, q in train]
        result = train_model(data, config)
        traces.append(result)
        by_novel: dict[str, list] = {}
        for b, q in test:
            by_novel.setdefault(b.novel_id, []).append(q)
        for nid, qs in by_novel.items():
            for a in predict_batch(result.params, qs, inventories[nid]):
                predicted[(nid, a.quote_id)] = a
    out = {b.novel_id: [predicted[(b.novel_id, q.quote_id)] for q in b.quotations] for b in bundles}
    return CrossValidationResult(spec, out, traces)


def train_full(
    bundles: Sequence[NovelBundle],
    inventories: Mapping[str, CandidateInventory],
    config: SeqConfig,
) -> TrainResult:
    data = [encode_context(q, inventories[b.novel_id], config=config) for b in sorted(bundles, key=lambda b: b.novel_id) for q in b.quotations]
    return train_model(data, config)
