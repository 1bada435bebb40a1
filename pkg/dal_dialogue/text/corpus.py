from __future__ import annotations

import hashlib
import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dal_dialogue.errors import CorpusError
from dal_dialogue.paths import atomic_write_text
from dal_dialogue.states import Direction
from dal_dialogue.text.vocab import EOS_ID, TokenSeq, Vocab, build_vocab, check_ids, decode, encode

logger = logging.getLogger(__name__)

DEFAULT_MAX_LEN = 20
DEFAULT_MAX_VOCAB = 2_000


@dataclass(frozen=True)
class QRPair:
    query: TokenSeq
    response: TokenSeq

    def __post_init__(self) -> None:
        if not self.query or not self.response:
            raise CorpusError("query and response must both be non-empty")


@dataclass(frozen=True)
class Corpus:
    pairs: tuple[QRPair, ...]
    vocab: Vocab
    # Lines skipped by load_corpus (no TAB or an empty side).
    malformed: int = 0

    def __post_init__(self) -> None:
        size = len(self.vocab)
        for p in self.pairs:
            check_ids(p.query, size, what="query")
            check_ids(p.response, size, what="response")

    def __len__(self) -> int:
        return len(self.pairs)

    def queries(self) -> list[TokenSeq]:
        return [p.query for p in self.pairs]

    def responses(self) -> list[TokenSeq]:
        return [p.response for p in self.pairs]


def truncate(seq: TokenSeq, max_len: int) -> TokenSeq:
    return seq if max_len <= 0 else seq[:max_len]


def _split_line(line: str) -> tuple[str, str] | None:
    query, sep, response = line.partition("\t")
    if not sep:
        return None
    query, response = query.strip(), response.strip()
    if not query or not response:
        return None
    return query, response


def load_corpus(
    path: Path,
    vocab: Vocab | None = None,
    *,
    max_len: int = DEFAULT_MAX_LEN,
    min_count: int = 1,
    max_vocab: int = DEFAULT_MAX_VOCAB,
) -> Corpus:
    """Read a ``query<TAB>response`` file; builds the vocab from it when none is given."""

    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise CorpusError(f"cannot read corpus {path}: {e}") from e

    raw: list[tuple[str, str]] = []
    malformed = 0
    for line in text.split("\n"):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        parsed = _split_line(line)
        if parsed is None:
            malformed += 1
            continue
        raw.append(parsed)

    if malformed:
        logger.warning("skipped %d malformed line(s) in %s", malformed, path)
    if not raw:
        raise CorpusError(f"no valid query/response lines in {path}")

    if vocab is None:
        vocab = build_vocab(raw, min_count=min_count, max_size=max_vocab)
    pairs = tuple(
        QRPair(truncate(encode(q, vocab), max_len), truncate(encode(r, vocab), max_len)) for q, r in raw
    )
    logger.info("loaded %d pairs from %s (vocab size %d)", len(pairs), path, len(vocab))
    return Corpus(pairs=pairs, vocab=vocab, malformed=malformed)


def corpus_to_tsv(corpus: Corpus) -> str:
    return "".join(f"{decode(p.query, corpus.vocab)}\t{decode(p.response, corpus.vocab)}\n" for p in corpus.pairs)


def write_corpus(corpus: Corpus, path: Path) -> None:
    atomic_write_text(path, corpus_to_tsv(corpus))


def corpus_fingerprint(corpus: Corpus) -> str:
    return hashlib.sha256(corpus_to_tsv(corpus).encode("utf-8")).hexdigest()


def read_queries(path: Path, vocab: Vocab, *, max_len: int = DEFAULT_MAX_LEN) -> list[TokenSeq]:
    """One query per line; for TSV input only the first field is used. Blank lines are skipped."""

    try:
        lines = path.read_text(encoding="utf-8").split("\n")
    except (OSError, UnicodeDecodeError) as e:
        raise CorpusError(f"cannot read queries {path}: {e}") from e
    out: list[TokenSeq] = []
    for line in lines:
        query = line.rstrip("\r").partition("\t")[0].strip()
        if query:
            out.append(truncate(encode(query, vocab), max_len))
    return out


def batch_iter(corpus: Corpus, batch_size: int, shuffle_seed: int) -> Iterator[list[QRPair]]:
    """One epoch over ``corpus`` in a seeded permutation; the last batch may be short."""

    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = np.random.default_rng(shuffle_seed).permutation(len(corpus.pairs))
    for start in range(0, len(order), batch_size):
        yield [corpus.pairs[int(i)] for i in order[start : start + batch_size]]


def split_pairs(pairs: Sequence[QRPair], holdout: int, seed: int) -> tuple[list[QRPair], list[QRPair]]:
    """Seeded split into (kept, held_out) with ``holdout`` pairs held out; kept keeps corpus order."""

    if not 0 <= holdout <= len(pairs):
        raise ValueError(f"holdout must be in [0, {len(pairs)}]")
    chosen = set(np.random.default_rng(seed).permutation(len(pairs))[:holdout].tolist())
    kept = [p for i, p in enumerate(pairs) if i not in chosen]
    held = [p for i, p in enumerate(pairs) if i in chosen]
    return kept, held


def orient(pairs: Sequence[QRPair], direction: Direction) -> tuple[list[TokenSeq], list[TokenSeq]]:
    """(sources, targets) for a generation direction: queries->responses for qr, the reverse for rq."""

    if direction == Direction.QR:
        return [p.query for p in pairs], [p.response for p in pairs]
    return [p.response for p in pairs], [p.query for p in pairs]


def as_pair(source: TokenSeq, output: TokenSeq, direction: Direction) -> QRPair:
    """Re-assemble a (query, response) pair from a source and a generated output.

    Empty outputs are presented as a lone EOS so the pair stays valid.
    """

    output = output or (EOS_ID,)
    if direction == Direction.QR:
        return QRPair(query=source, response=output)
    return QRPair(query=output, response=source)
