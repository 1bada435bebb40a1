from dal_dialogue.text.corpus import Corpus, QRPair, batch_iter, load_corpus, read_queries, write_corpus
from dal_dialogue.text.synthetic import SyntheticLayout, SyntheticSpec, synthesize_corpus
from dal_dialogue.text.vocab import Vocab, build_vocab, decode, encode

__all__ = [
    "Corpus",
    "QRPair",
    "SyntheticLayout",
    "SyntheticSpec",
    "Vocab",
    "batch_iter",
    "build_vocab",
    "decode",
    "encode",
    "load_corpus",
    "read_queries",
    "synthesize_corpus",
    "write_corpus",
]
