"""Command-line entry point: ``quotemark <command> [options]``.

Every command writes its outputs together with the resolved run
configuration and a manifest of SHA-256 hashes for inputs and outputs.
Exit status is 0 on success, 1 on a data or validation error and 2 on a
usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Sequence

from .attrib import Attribution, compute_unresolved_rate
from .charid import build_character_list
from .corpus import CharacterEntity, NovelBundle, load_corpus, load_pdnc_bundle, save_bundle
from .errors import EmptyInput, MissingFile, QuotemarkError
from .lexicon import LEXICON_ENV
from .mentions import MentionCluster, build_inventory, load_coref_clusters
from .metrics import (
    attribution_accuracy_report,
    attribution_table,
    character_id_row,
    character_id_table,
    character_recognition_score,
    clustering_scores,
    mention_cluster_stats,
    mention_resolution_accuracy,
    quotation_identification_score,
)
from .pipeline import METHOD_ALIASES, build_inventories, cross_validate_seq, rule_attributions, train_full
from .quotes import candidates_from_rows, classify_quote_type, extract_quotations, quotes_to_jsonl_rows, resolve_style
from .seqmodel import SeqConfig, load_model, predict_batch, save_model

logger = logging.getLogger("quotemark")

COMMANDS = ("ingest", "characters", "quotes", "mentions", "attribute", "train", "evaluate", "report")
EVAL_TASKS = ("charid", "quotes", "mentions", "attribution", "unresolved")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    quote_style: str = "auto"
    lexicon_dir: str | None = None
    split: str = "quotations"
    folds: int = 5
    include_internal: bool = False
    use_gold_mentions: bool = True
    min_count: int = 2
    window: int = 5
    nearest_paragraphs: int = 2
    seq: SeqConfig = field(default_factory=SeqConfig)

    def to_json(self) -> dict:
        out = asdict(self)
        out["seq"] = asdict(self.seq)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise QuotemarkError(f"unknown config keys: {sorted(unknown)}")
        obj = dict(obj)
        seq = obj.pop("seq", None) or {}
        seq_known = {f.name for f in fields(SeqConfig)}
        if set(seq) - seq_known:
            raise QuotemarkError(f"unknown seq config keys: {sorted(set(seq) - seq_known)}")
        return cls(seq=SeqConfig(**seq), **obj)


# --------------------------------------------------------------------------
# io helpers

def _dump(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def _jsonl(rows: Sequence[dict]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in rows)


def _write(path: Path, content: str) -> Path:
    """Atomic write (temp file then rename)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(content, encoding="utf-8")
    os.replace(tmp, path)
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _hash_inputs(paths: Sequence[str]) -> dict[str, str]:
    out = {}
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            for f in sorted(x for x in p.rglob("*") if x.is_file()):
                out[str(f)] = _sha256(f)
        elif p.is_file():
            out[str(p)] = _sha256(p)
    return out


class Outputs:
    """Collects written files; sidecars live next to a file output or inside a directory output."""

    def __init__(self, out: str):
        self.root = Path(out)
        self.is_file = bool(self.root.suffix)
        self.written: list[Path] = []

    def path(self, name: str | None = None) -> Path:
        if self.is_file and name is None:
            return self.root
        base = self.root.parent if self.is_file else self.root
        return base / name

    def write(self, content: str, name: str | None = None) -> Path:
        p = _write(self.path(name), content)
        self.written.append(p)
        return p

    def _sidecar(self, kind: str) -> Path:
        if self.is_file:
            return self.root.with_name(f"{self.root.name}.{kind}.json")
        return self.root / f"{kind}.json"

    def finish(self, command: str, config: RunConfig, inputs: Sequence[str]) -> None:
        _write(self._sidecar("config"), _dump(config.to_json()))
        base = self.root.parent if self.is_file else self.root
        manifest = {
            "command": command,
            "config": config.to_json(),
            "inputs": _hash_inputs(inputs),
            "outputs": {str(p.relative_to(base)): _sha256(p) for p in sorted(set(self.written))},
        }
        _write(self._sidecar("manifest"), _dump(manifest))


def _load_bundles(args) -> list[NovelBundle]:
    bundles = []
    for d in args.pdnc_dir or []:
        bundles.extend(load_pdnc_release(d))
    if args.corpus:
        bundles.extend(load_corpus(args.corpus))
    if not bundles:
        raise EmptyInput("no novels given; use --corpus or --pdnc-dir")
    ids = [b.novel_id for b in bundles]
    if len(set(ids)) != len(ids):
        raise QuotemarkError(f"duplicate novel ids in input: {sorted(i for i in set(ids) if ids.count(i) > 1)}")
    return sorted(bundles, key=lambda b: b.novel_id)


def load_pdnc_release(path: str | Path) -> list[NovelBundle]:
    """One novel folder, or a release root holding one folder per novel."""
    p = Path(path)
    if not p.is_dir():
        raise MissingFile(str(p))
    if any(p.glob("*.csv")):
        return [load_pdnc_bundle(p)]
    novels = [d for d in sorted(p.iterdir()) if d.is_dir() and any(d.glob("*.csv"))]
    if not novels:
        raise MissingFile(f"{p}: no PDNC novel folders found")
    return [load_pdnc_bundle(d) for d in novels]


def _input_paths(args) -> list[str]:
    paths = list(args.corpus or []) + list(args.pdnc_dir or [])
    for extra in ("coref", "model", "gold", "pred", "config"):
        v = getattr(args, extra, None)
        if v:
            paths.extend(v if isinstance(v, list) else [v])
    return paths


def _coref_for(args, bundles: Sequence[NovelBundle]) -> dict[str, list[MentionCluster]]:
    """--coref is a cluster file (single novel) or a directory of <novel_id>.jsonl files."""
    if not getattr(args, "coref", None):
        return {}
    p = Path(args.coref)
    out = {}
    if p.is_dir():
        for b in bundles:
            f = p / f"{b.novel_id}.jsonl"
            if f.is_file():
                out[b.novel_id], rejected = load_coref_clusters(f, b.text)
    else:
        if len(bundles) != 1:
            raise QuotemarkError("--coref FILE needs exactly one novel; pass a directory of <novel_id>.jsonl files")
        out[bundles[0].novel_id], rejected = load_coref_clusters(p, bundles[0].text)
    return out


# --------------------------------------------------------------------------
# commands

def cmd_ingest(args, config: RunConfig, out: Outputs) -> None:
    for b in _load_bundles(args):
        path = out.path(f"{b.novel_id}.json")
        path.parent.mkdir(parents=True, exist_ok=True)
        save_bundle(b, path)
        out.written.append(path)
        if b.provenance:
            out.write(_dump(b.provenance), f"{b.novel_id}.provenance.json")


def predicted_characters(bundles: Sequence[NovelBundle], config: RunConfig) -> dict[str, list[CharacterEntity]]:
    return {b.novel_id: build_character_list(b, config.min_count) for b in bundles}


def character_rows(pred: dict[str, list[CharacterEntity]]) -> dict:
    return {"novels": {nid: [c.to_json() for c in chars] for nid, chars in sorted(pred.items())}}


def cmd_characters(args, config: RunConfig, out: Outputs) -> None:
    pred = {}
    for b in _load_bundles(args):
        try:
            pred[b.novel_id] = build_character_list(b, config.min_count)
        except EmptyInput:
            logger.warning("%s: no name candidates", b.novel_id)
            pred[b.novel_id] = []
    out.write(_dump(character_rows(pred)), None if out.is_file else "characters.json")


def extract_rows(b: NovelBundle, config: RunConfig) -> list[dict]:
    cands = extract_quotations(b, resolve_style(config.quote_style, b.text))
    spans = [c.span for c in cands]
    types = [classify_quote_type(c, b, others=spans, window=config.window) for c in cands]
    return [{"novel_id": b.novel_id, **r} for r in quotes_to_jsonl_rows(cands, types)]


def cmd_quotes(args, config: RunConfig, out: Outputs) -> None:
    rows = [r for b in _load_bundles(args) for r in extract_rows(b, config)]
    out.write(_jsonl(rows), None if out.is_file else "quotes.jsonl")


def cmd_mentions(args, config: RunConfig, out: Outputs) -> None:
    bundles = _load_bundles(args)
    clusters = _coref_for(args, bundles)
    rows = []
    for b in bundles:
        inv = build_inventory(b, clusters.get(b.novel_id, ()), use_gold=config.use_gold_mentions)
        rows += [{"novel_id": b.novel_id, **r} for r in inv.to_rows()]
        if inv.conflicts:
            logger.warning("%s: %d gold mention conflicts", b.novel_id, len(inv.conflicts))
    out.write(_jsonl(rows), None if out.is_file else "mentions.jsonl")


def _attribution_rows(atts: dict[str, list[Attribution]]) -> list[dict]:
    return [{"novel_id": nid, **a.to_row()} for nid in sorted(atts) for a in atts[nid]]


def _rule_kwargs(method: str, config: RunConfig) -> dict:
    if method == "explicit_rule":
        return {"window": config.window}
    return {"paragraphs": config.nearest_paragraphs}


def cmd_attribute(args, config: RunConfig, out: Outputs) -> None:
    bundles = _load_bundles(args)
    method = METHOD_ALIASES[args.method]
    inventories = build_inventories(bundles, _coref_for(args, bundles), use_gold=config.use_gold_mentions)
    if method == "seq_model":
        if not args.model:
            raise QuotemarkError("--method seq needs --model (see `quotemark train`)")
        params = load_model(args.model)
        atts = {b.novel_id: predict_batch(params, b.quotations, inventories[b.novel_id]) for b in bundles}
    else:
        atts = rule_attributions(bundles, inventories, method, **_rule_kwargs(method, config))
    out.write(_jsonl(_attribution_rows(atts)), None if out.is_file else "attributions.jsonl")
    stem = out.root.stem if out.is_file else "attributions"
    out.write(_dump(compute_unresolved_rate(atts).to_json()), f"{stem}.unresolved.json")


def cmd_train(args, config: RunConfig, out: Outputs) -> None:
    bundles = _load_bundles(args)
    inventories = build_inventories(bundles, _coref_for(args, bundles), use_gold=config.use_gold_mentions)
    cv = cross_validate_seq(bundles, inventories, config.split, config.seed, config.seq, config.folds)
    report = attribution_accuracy_report(cv.attributions, bundles)
    out.write(_dump(cv.folds.to_json()), "folds.json")
    out.write(_jsonl(_attribution_rows(cv.attributions)), "attributions.jsonl")
    out.write(_dump({"split": config.split, "accuracy": report.to_json()}), "report.json")
    for i, t in enumerate(cv.traces):
        if t is not None:
            out.write(t.trace_csv(), f"trace_fold{i}.csv")
    final = train_full(bundles, inventories, config.seq)
    model_path = out.path("model.json")
    save_model(final.params, model_path)
    out.written.append(model_path)


def _read_json(path: str) -> Any:
    p = Path(path)
    if not p.is_file():
        raise MissingFile(str(p))
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise QuotemarkError(f"{p}: not valid JSON ({exc})") from exc


def _read_jsonl(path: str) -> list[dict]:
    p = Path(path)
    if not p.is_file():
        raise MissingFile(str(p))
    rows = []
    for i, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        if line.strip():
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise QuotemarkError(f"{p}: line {i}: {exc}") from exc
    return rows


def _entities(obj: Any) -> list:
    """Character entities or alias groups from a list of dicts / lists of names."""
    out = []
    for i, e in enumerate(obj):
        if isinstance(e, dict):
            out.append(CharacterEntity.from_json(e))
        else:
            names = sorted(e, key=lambda n: (-len(n), n))
            out.append(CharacterEntity(i, names[0], frozenset(names)))
    return out


def read_character_lists(path: str) -> dict[str, list]:
    """Character lists keyed by novel id from a bundle, a ``characters`` output or a bare list."""
    obj = _read_json(path)
    if isinstance(obj, list):
        return {"_": _entities(obj)}
    if "novels" in obj:
        return {nid: _entities(v) for nid, v in obj["novels"].items()}
    if "characters" in obj and "novel_id" in obj:
        return {obj["novel_id"]: _entities(obj["characters"])}
    raise QuotemarkError(f"{path}: unrecognised character list layout")


def _pair_by_novel(gold: dict, pred: dict) -> list[tuple[str, Any, Any]]:
    if len(gold) == 1 and len(pred) == 1:
        (gk, gv), (pk, pv) = next(iter(gold.items())), next(iter(pred.items()))
        return [(gk if gk != "_" else pk, gv, pv)]
    missing = sorted(set(gold) - set(pred))
    if missing:
        raise QuotemarkError(f"no predictions for novels {missing}")
    return [(nid, gold[nid], pred[nid]) for nid in sorted(gold)]


def _group_rows(rows: list[dict]) -> dict[str, list[dict]]:
    out: dict[str, list[dict]] = {}
    for r in rows:
        out.setdefault(str(r.get("novel_id", "_")), []).append(r)
    return out


def _gold_bundles(args) -> list[NovelBundle]:
    if not args.gold:
        raise QuotemarkError("--gold is required for this task")
    return load_corpus(args.gold)


def evaluate(task: str, args) -> dict:
    if not args.pred:
        raise QuotemarkError("--pred is required")
    if task == "charid":
        gold: dict[str, list] = {}
        for g in args.gold or []:
            gold.update(read_character_lists(g))
        if not gold:
            raise QuotemarkError("--gold is required for this task")
        pred = read_character_lists(args.pred)
        rows = [character_id_row(nid, p, g) for nid, g, p in _pair_by_novel(gold, pred)]
        details = {nid: {"cr": character_recognition_score(p, g).to_json(), "clustering": clustering_scores(p, g).to_json()}
                   for nid, g, p in _pair_by_novel(gold, pred)}
        return {"task": task, "table": character_id_table(rows), "details": details}

    bundles = _gold_bundles(args)
    by_id = {b.novel_id: b for b in bundles}
    if task == "quotes":
        rows = _group_rows(_read_jsonl(args.pred))
        if "_" in rows and len(bundles) == 1:
            rows = {bundles[0].novel_id: rows.pop("_")}
        per = {}
        for nid, b in by_id.items():
            per[nid] = quotation_identification_score(candidates_from_rows(rows.get(nid, [])), b.quotations, b.text).to_json()
        pooled = _pool_quote_reports(per)
        return {"task": task, "per_novel": per, "pooled": pooled}
    if task in ("attribution", "unresolved"):
        atts: dict[str, list[Attribution]] = {}
        for r in _read_jsonl(args.pred):
            nid = str(r.get("novel_id", bundles[0].novel_id if len(bundles) == 1 else "_"))
            atts.setdefault(nid, []).append(Attribution.from_row(r))
        if task == "unresolved":
            return {"task": task, "unresolved": compute_unresolved_rate(atts).to_json()}
        return {"task": task, "accuracy": attribution_accuracy_report(atts, bundles).to_json()}
    if task == "mentions":
        if len(bundles) != 1:
            raise QuotemarkError("mention evaluation takes one gold novel")
        b = bundles[0]
        clusters, rejected = load_coref_clusters(args.pred, b.text)
        quote_spans = [s for q in b.quotations for s in q.sub_spans]
        stats = mention_cluster_stats(clusters, b.characters, quote_spans)
        gold_mentions = [m for q in b.quotations for m in q.internal_mentions]
        n_eval, acc = mention_resolution_accuracy(clusters, gold_mentions, b.characters)
        return {"task": task, "clusters": stats.to_json(), "resolution": {"n_eval": n_eval, "accuracy": acc}, "rejected_spans": len(rejected)}
    raise QuotemarkError(f"unknown task {task!r}")


def _pool_quote_reports(per: dict[str, dict]) -> dict:
    n_gold = sum(r["n_gold"] for r in per.values())
    n_pred = sum(r["n_pred"] for r in per.values())
    exact = sum(r["exact_match_rate"] * r["n_gold"] for r in per.values())
    recall = sum(r["overlap_recall"] * r["n_gold"] for r in per.values())
    prec = sum((r["precision_proxy"] or 0.0) * r["n_pred"] for r in per.values())
    return {
        "n_gold": n_gold,
        "n_pred": n_pred,
        "exact_match_rate": exact / n_gold if n_gold else None,
        "overlap_recall": recall / n_gold if n_gold else None,
        "precision_proxy": prec / n_pred if n_pred else None,
    }


def _summary(report: dict) -> str:
    if report["task"] == "charid":
        parts = []
        for r in report["table"]["rows"]:
            fmt = lambda v: "null" if v is None else f"{v:.3f}"
            parts.append(f"{r['novel']}: CR {fmt(r['cr'])} h {fmt(r['homogeneity'])} c {fmt(r['completeness'])} v {fmt(r['v_score'])}")
        return "\n".join(parts)
    return _dump(report).rstrip()


def cmd_evaluate(args, config: RunConfig, out: Outputs | None) -> None:
    report = evaluate(args.task, args)
    print(_summary(report))
    if out is not None:
        out.write(_dump(report), None if out.is_file else "evaluation.json")


def cmd_report(args, config: RunConfig, out: Outputs) -> None:
    """Full pipeline: characters, quotes, rule and sequential attribution, with all scores."""
    bundles = _load_bundles(args)
    report: dict[str, Any] = {"novels": [b.novel_id for b in bundles]}

    rows = []
    pred_chars = {}
    for b in bundles:
        try:
            pred_chars[b.novel_id] = build_character_list(b, config.min_count)
        except EmptyInput:
            pred_chars[b.novel_id] = []
        if b.characters:
            rows.append(character_id_row(b.novel_id, pred_chars[b.novel_id], b.characters))
    out.write(_dump(character_rows(pred_chars)), "characters.json")
    report["character_identification"] = character_id_table(rows)

    quote_rows = []
    quote_scores = {}
    for b in bundles:
        r = extract_rows(b, config)
        quote_rows += r
        if b.quotations:
            quote_scores[b.novel_id] = quotation_identification_score(candidates_from_rows(r), b.quotations, b.text).to_json()
    out.write(_jsonl(quote_rows), "quotes.jsonl")
    report["quotation_identification"] = {"per_novel": quote_scores, "pooled": _pool_quote_reports(quote_scores)}

    scored = [b for b in bundles if b.quotations]
    inventories = build_inventories(scored, _coref_for(args, scored), use_gold=config.use_gold_mentions)
    accuracy = {}
    unresolved = {}
    for cli_name in ("explicit-rule", "nearest"):
        method = METHOD_ALIASES[cli_name]
        atts = rule_attributions(scored, inventories, method, **_rule_kwargs(method, config))
        out.write(_jsonl(_attribution_rows(atts)), f"attributions_{method}.jsonl")
        accuracy[(method, "none")] = attribution_accuracy_report(atts, scored)
        unresolved[method] = compute_unresolved_rate(atts).to_json()
    splits = [config.split] if args.split else ["quotations", "novels"]
    for split in splits:
        if split == "novels" and len(scored) < config.folds:
            logger.warning("skipping novels split: %d novels < %d folds", len(scored), config.folds)
            continue
        cv = cross_validate_seq(scored, inventories, split, config.seed, config.seq, config.folds)
        out.write(_jsonl(_attribution_rows(cv.attributions)), f"attributions_seq_model_{split}.jsonl")
        accuracy[("seq_model", split)] = attribution_accuracy_report(cv.attributions, scored)
    report["attribution"] = attribution_table(accuracy)
    report["attribution_detail"] = {f"{m}/{s}": r.to_json() for (m, s), r in sorted(accuracy.items())}
    report["unresolved"] = unresolved
    out.write(_dump(report), "report.json")


# --------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quotemark", description="Quotation attribution pipeline for novels.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
        p.add_argument("--corpus", nargs="+", metavar="PATH", help="bundle JSON files or directories")
        p.add_argument("--pdnc-dir", nargs="+", metavar="DIR", help="PDNC novel folder(s) or release root")
        p.add_argument("--out", required=out_required, help="output file (with suffix) or directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--config", metavar="FILE", help="JSON run configuration")
        p.add_argument("--quote-style", choices=("auto", "double", "single", "smart-double", "smart-single"))
        p.add_argument("--coref", metavar="PATH", help="cluster JSONL file or directory of <novel_id>.jsonl")
        p.add_argument("--lexicon-dir", metavar="DIR", help=f"overrides ${LEXICON_ENV}")
        p.add_argument("--no-gold-mentions", action="store_true", help="leave annotated mentions out of the inventory")

    helps = {
        "ingest": "load PDNC folders or bundles and write normalized bundle JSON",
        "characters": "extract character lists from raw text",
        "quotes": "extract quotation spans",
        "mentions": "build the curated mention inventory",
        "attribute": "attribute speakers with a rule or a trained model",
        "train": "cross-validate and train the sequential model",
        "evaluate": "score predictions against gold",
        "report": "run the whole pipeline and write a report",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        common(p, out_required=name != "evaluate")
        if name in ("characters", "report"):
            p.add_argument("--min-count", type=int)
        if name == "attribute":
            p.add_argument("--method", choices=tuple(METHOD_ALIASES), default="explicit-rule")
            p.add_argument("--model", metavar="FILE")
        if name in ("train", "report"):
            p.add_argument("--split", choices=("quotations", "novels"))
            p.add_argument("--folds", type=int)
            p.add_argument("--include-internal", action="store_true", default=None)
        if name == "evaluate":
            p.add_argument("--task", choices=EVAL_TASKS, required=True)
            p.add_argument("--gold", nargs="+", metavar="PATH")
            p.add_argument("--pred", metavar="PATH")
    return parser


def resolve_config(args) -> RunConfig:
    config = RunConfig()
    if args.config:
        obj = _read_json(args.config)
        if not isinstance(obj, dict):
            raise QuotemarkError(f"{args.config}: config must be a JSON object")
        config = RunConfig.from_json(obj)
    updates: dict[str, Any] = {}
    for flag, key in (("seed", "seed"), ("quote_style", "quote_style"), ("lexicon_dir", "lexicon_dir"),
                      ("split", "split"), ("folds", "folds"), ("min_count", "min_count"), ("include_internal", "include_internal")):
        v = getattr(args, flag, None)
        if v is not None:
            updates[key] = v
    if getattr(args, "no_gold_mentions", False):
        updates["use_gold_mentions"] = False
    config = replace(config, **updates)
    # the run seed and the internal-mention flag drive the model as well
    return replace(config, seq=replace(config.seq, seed=config.seed, include_internal=config.include_internal))


HANDLERS: dict[str, Callable] = {
    "ingest": cmd_ingest,
    "characters": cmd_characters,
    "quotes": cmd_quotes,
    "mentions": cmd_mentions,
    "attribute": cmd_attribute,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def run_command(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve_config(args)
        if config.lexicon_dir:
            os.environ[LEXICON_ENV] = config.lexicon_dir
        out = Outputs(args.out) if args.out else None
        HANDLERS[args.command](args, config, out)
        if out is not None:
            out.finish(args.command, config, _input_paths(args))
    except (QuotemarkError, ValueError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1
    return 0


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
