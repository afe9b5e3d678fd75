"""Speaker attribution for quotations in novels.

The pipeline runs in four stages: character identification (:mod:`.charid`),
coreference curation (:mod:`.mentions`), quotation extraction (:mod:`.quotes`)
and speaker attribution (:mod:`.attrib` rules plus the recurrent model in
:mod:`.seqmodel`).  :mod:`.metrics` holds the scoring and the fold builder.
"""

from .corpus import UNKNOWN, CharacterEntity, MentionSpan, NovelBundle, Quotation, load_bundle, load_corpus, load_pdnc_bundle
from .errors import QuotemarkError

__all__ = [
    "UNKNOWN",
    "CharacterEntity",
    "MentionSpan",
    "NovelBundle",
    "Quotation",
    "QuotemarkError",
    "load_bundle",
    "load_corpus",
    "load_pdnc_bundle",
]

__version__ = "0.1.0"
