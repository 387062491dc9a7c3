from .adapters import FORMATS, AdapterError, adapt
from .canonical import (
    CorpusError,
    EpisodeCorpus,
    corpus_hash,
    load_canonical,
    save_canonical,
    validate_corpus,
)
from .subsets import FAMILY_KINDS, BaselineIndex, EmptySubsetError, select_probe_subset

__all__ = [
    "FORMATS", "AdapterError", "adapt", "CorpusError", "EpisodeCorpus", "corpus_hash", "load_canonical",
    "save_canonical", "validate_corpus", "FAMILY_KINDS", "BaselineIndex", "EmptySubsetError",
    "select_probe_subset",
]
