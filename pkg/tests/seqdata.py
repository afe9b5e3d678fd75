"""Hand-built inventories for exercising the sequence model without text."""

from __future__ import annotations

from typing import Sequence

from quotemark.corpus import MentionSpan, Quotation
from quotemark.mentions import CandidateInventory, InventoryMention
from quotemark.seqmodel import ContextEncoding, SeqConfig, encode_context
from oracles import most_recent_mention_dataset

QUOTE = (60, 70)


def context(pre: Sequence[int], after: Sequence[int], speaker: int, internal: Sequence[int] = ()):
    """One quotation at ``QUOTE`` with mentions laid out around it."""
    ms = [InventoryMention(MentionSpan((i * 10, i * 10 + 3), f"c{c}", (c,)), c, "pdnc_gold") for i, c in enumerate(pre)]
    ms += [InventoryMention(MentionSpan((62 + 2 * j, 63 + 2 * j), f"c{c}", (c,)), c, "pdnc_gold") for j, c in enumerate(internal)]
    ms += [InventoryMention(MentionSpan((75 + 5 * j, 78 + 5 * j), f"c{c}", (c,)), c, "pdnc_gold") for j, c in enumerate(after)]
    return Quotation("Q", QUOTE, speaker), CandidateInventory(tuple(ms))


def recency_dataset(n: int, seed: int, config: SeqConfig | None = None) -> list[ContextEncoding]:
    out = []
    for pre, after, speaker in most_recent_mention_dataset(n, seed):
        q, inv = context(pre, [after], speaker)
        out.append(encode_context(q, inv, config=config))
    return out
