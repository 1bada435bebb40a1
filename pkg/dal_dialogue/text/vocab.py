from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from dal_dialogue.errors import VocabError

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
UNK_ID = 3

RESERVED_TOKENS = ("<pad>", "<bos>", "<eos>", "<unk>")
NUM_RESERVED = len(RESERVED_TOKENS)

TokenSeq = tuple[int, ...]


@dataclass(frozen=True)
class Vocab:
    tokens: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.tokens[:NUM_RESERVED] != RESERVED_TOKENS:
            raise VocabError("vocab must start with the reserved tokens <pad> <bos> <eos> <unk>")
        index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise VocabError("duplicate token in vocab")
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_tokens(cls, content: Iterable[str]) -> Vocab:
        return cls(tokens=RESERVED_TOKENS + tuple(content))

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def size(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        # Reserved spellings in text are ordinary words, never control ids.
        idx = self._index.get(token, UNK_ID)
        return UNK_ID if idx < NUM_RESERVED else idx

    def token_of(self, idx: int) -> str:
        if not 0 <= idx < len(self.tokens):
            raise VocabError(f"id {idx} out of range for vocab of size {len(self.tokens)}")
        return self.tokens[idx]

    def content_tokens(self) -> tuple[str, ...]:
        return self.tokens[NUM_RESERVED:]


def build_vocab(raw_pairs: Sequence[tuple[str, str]], min_count: int = 1, max_size: int = 2_000) -> Vocab:
    """Frequency-ranked vocab over whitespace tokens of both sides.

    Ties are broken by lexicographic token order; ``max_size`` includes the four
    reserved tokens.
    """

    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if max_size < NUM_RESERVED:
        raise ValueError(f"max_size must be >= {NUM_RESERVED}")
    if not raw_pairs:
        raise VocabError("cannot build a vocab from zero pairs")

    counts: Counter[str] = Counter()
    for query, response in raw_pairs:
        counts.update(query.split())
        counts.update(response.split())
    for tok in RESERVED_TOKENS:
        counts.pop(tok, None)

    ranked = sorted((tok for tok, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return Vocab.from_tokens(ranked[: max_size - NUM_RESERVED])


def encode(text: str, vocab: Vocab) -> TokenSeq:
    return tuple(vocab.id_of(tok) for tok in text.split())


def decode(seq: Sequence[int], vocab: Vocab) -> str:
    return " ".join(vocab.token_of(int(i)) for i in seq)


def check_ids(seq: Sequence[int], vocab_size: int, *, what: str = "sequence") -> None:
    for i in seq:
        if not 0 <= int(i) < vocab_size:
            raise VocabError(f"{what} contains id {i} outside vocab of size {vocab_size}")
