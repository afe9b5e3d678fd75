from __future__ import annotations

import dataclasses

import pytest

from conftest import make_bundle
from quotemark.attrib import (
    UNRESOLVED,
    Attribution,
    QuoteMask,
    attribute_explicit,
    attribute_nearest,
    attribute_novel,
    compute_unresolved_rate,
    detect_referring_expression,
)
from quotemark.corpus import MentionSpan, NovelBundle, Quotation
from quotemark.errors import EmptyInput
from quotemark.mentions import build_inventory


def _explicit(text, quoted, chars):
    b = make_bundle(text, chars, [(quoted, 0, "explicit")])
    return attribute_explicit(b.quotations[0], b, build_inventory(b)), b


@pytest.mark.parametrize(
    "text, quoted, speaker, surface",
    [
        ("“Hello,” said Liz.", "“Hello,”", 0, "Liz"),
        ("“Hello,” Mary replied.", "“Hello,”", 1, "Mary"),
        ("Mary said, “Hello.”", "“Hello.”", 1, "Mary"),
        ("“Hello,” said Elizabeth Bennet to Mary.", "“Hello,”", 0, "Elizabeth Bennet"),
    ],
)
def test_explicit_rule_finds_speaker(bennets, text, quoted, speaker, surface):
    att, b = _explicit(text, quoted, bennets)
    assert att.predicted == speaker
    assert b.text[att.evidence[0]:att.evidence[1]] == surface


@pytest.mark.parametrize(
    "text, quoted",
    [
        ("“Hello.” The door slammed.", "“Hello.”"),
        ("“Hello,” she said.", "“Hello,”"),  # pronouns are left to other methods
        ("“Hello.” Liz looked away.", "“Hello.”"),  # no speech verb
    ],
)
def test_explicit_rule_unresolved(bennets, text, quoted):
    att, _ = _explicit(text, quoted, bennets)
    assert att.predicted is UNRESOLVED and att.evidence is None and not att.resolved


def test_explicit_rule_on_split_quote(bennets):
    text = "“Hi,” Liz whispered, “again.”"
    q = Quotation("Q0", (0, len(text)), 0, sub_spans=((0, 5), (21, len(text))))
    b = NovelBundle("n", "n", text, bennets, (q,))
    att = attribute_explicit(q, b, build_inventory(b))
    assert (att.predicted, att.evidence) == (0, (6, 9))


def test_explicit_rule_ignores_mentions_inside_other_quotes(bennets):
    text = "“Hello,” said “Mary.”"
    b = make_bundle(text, bennets, [("“Hello,”", 0, "explicit"), ("“Mary.”", 1, "implicit")])
    assert detect_referring_expression(b.quotations[0], b, build_inventory(b)) is None


def test_explicit_rule_oracle_mode(bennets):
    text = "“Hello.” The door slammed."
    q = Quotation("Q0", (0, 8), 1, (), (12, 16), "explicit")
    b = NovelBundle("n", "n", text, bennets, (q,))
    inv = build_inventory(b)
    assert attribute_explicit(q, b, inv).predicted is UNRESOLVED
    assert attribute_explicit(q, b, inv, oracle=True).predicted == 1


def test_explicit_rule_window_limit(bennets):
    far = "“Hello,” she murmured to the others in the room as she rose and then Liz said."
    att, _ = _explicit(far, "“Hello,”", bennets)
    assert att.predicted is UNRESOLVED


def _nearest(text, quoted, chars, **kw):
    b = make_bundle(text, chars, [(quoted, 0, "implicit")])
    return attribute_nearest(b.quotations[0], b, build_inventory(b), **kw), b


def test_nearest_prefers_closer_mention(bennets):
    text = "Here is Liz. “Hi.” " + "x" * 50 + " Mary."
    att, b = _nearest(text, "“Hi.”", bennets)
    assert att.predicted == 0 and b.text[att.evidence[0]:att.evidence[1]] == "Liz"
    text = "Liz is here" + " y" * 30 + ". “Hi.” Mary."
    att, _ = _nearest(text, "“Hi.”", bennets)
    assert att.predicted == 1


def test_nearest_tie_goes_backwards(bennets):
    att, _ = _nearest("Liz “Hi.” Mary", "“Hi.”", bennets)
    assert att.predicted == 0


def test_nearest_respects_paragraph_window(bennets):
    text = "Liz.\n\nA.\n\nB.\n\nC.\n\n“Hi.”\n\nD.\n\nE.\n\nF.\n\nMary."
    att, _ = _nearest(text, "“Hi.”", bennets)
    assert att.predicted is UNRESOLVED
    att, _ = _nearest(text, "“Hi.”", bennets, paragraphs=4)
    assert att.predicted == 1  # Mary is 14 characters after, Liz 15 before


def test_nearest_skips_mentions_inside_quotes(bennets):
    text = "Mary sat. “Liz!” “Hi.”"
    b = make_bundle(text, bennets, [("“Liz!”", 1, "implicit"), ("“Hi.”", 0, "implicit")])
    att = attribute_nearest(b.quotations[1], b, build_inventory(b))
    assert att.predicted == 1


def _shift(bundle: NovelBundle, prefix: str) -> NovelBundle:
    d = len(prefix)

    def sp(s):
        return None if s is None else (s[0] + d, s[1] + d)

    quotes = tuple(
        dataclasses.replace(
            q,
            span=sp(q.span),
            sub_spans=tuple(sp(s) for s in q.sub_spans),
            referring_expression=sp(q.referring_expression),
            internal_mentions=tuple(MentionSpan(sp(m.span), m.surface, m.entity_ids) for m in q.internal_mentions),
        )
        for q in bundle.quotations
    )
    return NovelBundle(bundle.novel_id, bundle.title, prefix + bundle.text, bundle.characters, quotes)


@pytest.mark.parametrize("method", ["explicit_rule", "nearest_mention"])
def test_translation_invariance(synth_corpus, method):
    b = synth_corpus[0]
    moved = _shift(b, "A quiet prologue with nobody in it.\n\n")
    d = len(moved.text) - len(b.text)
    before = attribute_novel(b, build_inventory(b), method)
    after = attribute_novel(moved, build_inventory(moved), method)
    assert [a.predicted for a in before] == [a.predicted for a in after]
    assert [a.evidence for a in after] == [None if a.evidence is None else (a.evidence[0] + d, a.evidence[1] + d) for a in before]


def test_explicit_rule_is_precise_on_synthetic(synth_corpus):
    for b in synth_corpus:
        atts = attribute_novel(b, build_inventory(b), "explicit_rule")
        resolved = [(a, q) for a, q in zip(atts, b.quotations) if a.resolved]
        assert resolved
        assert all(a.predicted == q.speaker_id for a, q in resolved)


def test_attribute_novel_rejects_unknown_method(two_paragraphs):
    with pytest.raises(ValueError):
        attribute_novel(two_paragraphs, build_inventory(two_paragraphs), "seq_model")


def test_quote_mask():
    mask = QuoteMask([(10, 20), (0, 5)])
    assert mask.covers(0, 5) and mask.covers(12, 18)
    assert not mask.covers(4, 11) and not mask.covers(21, 22)


def _atts(*preds):
    return [Attribution(f"Q{i}", p, "explicit_rule") for i, p in enumerate(preds)]


def test_unresolved_rate():
    r = compute_unresolved_rate({"a": _atts(0, 1, None, 2), "b": _atts(0, 0)})
    assert r.per_novel == {"a": 0.25, "b": 0.0}
    assert (r.mean, r.min, r.max) == (0.125, 0.0, 0.25)
    with pytest.raises(EmptyInput):
        compute_unresolved_rate({})
    with pytest.raises(EmptyInput):
        compute_unresolved_rate({"a": []})


def test_attribution_row_round_trip():
    a = Attribution("Q1", None, "nearest_mention")
    assert a.to_row()["predicted_char_id"] is None
    assert Attribution.from_row(a.to_row()) == a
    b = Attribution("Q2", 3, "explicit_rule", (4, 9))
    assert Attribution.from_row(b.to_row()) == b


@pytest.mark.parametrize("seed", range(5))
def test_singleton_cast_always_resolves(seed):
    import random

    from quotemark.corpus import CharacterEntity

    rng = random.Random(seed)
    chars = (CharacterEntity(0, "Liz", frozenset()),)
    paras = ["The rain fell." for _ in range(6)]
    paras[rng.randrange(6)] = "Liz waited."
    quotes = []
    for i in rng.sample(range(6), 3):
        paras[i] += f" “Line {i}.”"
        quotes.append((f"“Line {i}.”", 0, "implicit"))
    text = "\n\n".join(paras)
    quotes.sort(key=lambda q: text.index(q[0]))
    b = make_bundle(text, chars, quotes)
    atts = attribute_novel(b, build_inventory(b), "nearest_mention", paragraphs=len(paras))
    assert all(a.predicted == 0 for a in atts)
