"""Corpus ingestion, vocabulary, synthetic domains and meta-learning splits."""
from .data import MAX_LEN, DomainCorpus, clean_pairs, ingest, read_pairs, write_pairs
from .split import MetaSplit, MetaSplitConfig, make_meta_split
from .synth import SynthSpec, substitution_tables, synthesize
from .vocab import RESERVED, Vocabulary, build_vocab, tokenize

__all__ = [
    "MAX_LEN", "RESERVED", "DomainCorpus", "MetaSplit", "MetaSplitConfig", "SynthSpec", "Vocabulary",
    "build_vocab", "clean_pairs", "ingest", "make_meta_split", "read_pairs", "substitution_tables",
    "synthesize", "tokenize", "write_pairs",
]
