from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dal_dialogue.errors import CorpusError
from dal_dialogue.paths import atomic_write_text
from dal_dialogue.text.corpus import Corpus, QRPair, split_pairs
from dal_dialogue.text.vocab import TokenSeq, Vocab, build_vocab, decode, encode

# Above this many possible utterances we sample with rejection instead of enumerating.
_ENUMERATE_LIMIT = 200_000


@dataclass(frozen=True)
class SyntheticSpec:
    """Many-to-one corpus: ``n_safe`` responses shared by ``m`` queries each, plus one-to-one pairs."""

    n_safe: int = 3
    m: int = 20
    n_diverse: int = 200
    alphabet: int = 50
    min_len: int = 4
    max_len: int = 7

    def __post_init__(self) -> None:
        for name in ("n_safe", "m", "n_diverse", "alphabet", "min_len", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.min_len > self.max_len:
            raise ValueError("min_len must be <= max_len")

    @property
    def utterances_needed(self) -> int:
        # Every query and every response is a distinct string.
        return self.n_safe * self.m + self.n_diverse + self.n_safe + self.n_diverse

    @property
    def capacity(self) -> int:
        return sum(self.alphabet**n for n in range(self.min_len, self.max_len + 1))


@dataclass(frozen=True)
class SyntheticLayout:
    """Which responses are shared (safe) and which pairs are one-to-one (diverse)."""

    safe_responses: tuple[TokenSeq, ...]
    diverse_pairs: tuple[QRPair, ...]

    def restrict_to(self, pairs: list[QRPair]) -> SyntheticLayout:
        keep = set(pairs)
        return SyntheticLayout(
            safe_responses=self.safe_responses,
            diverse_pairs=tuple(p for p in self.diverse_pairs if p in keep),
        )

    def to_json(self, vocab: Vocab) -> str:
        payload = {
            "safe_responses": [decode(r, vocab) for r in self.safe_responses],
            "diverse_pairs": [[decode(p.query, vocab), decode(p.response, vocab)] for p in self.diverse_pairs],
        }
        return json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str, vocab: Vocab) -> SyntheticLayout:
        obj = json.loads(text)
        if not isinstance(obj, dict):
            raise CorpusError("layout must be a JSON object")
        return cls(
            safe_responses=tuple(encode(s, vocab) for s in obj.get("safe_responses", [])),
            diverse_pairs=tuple(QRPair(encode(q, vocab), encode(r, vocab)) for q, r in obj.get("diverse_pairs", [])),
        )


def _token(i: int, width: int) -> str:
    return f"w{i:0{width}d}"


def _draw_utterances(spec: SyntheticSpec, rng: np.random.Generator) -> list[tuple[int, ...]]:
    need = spec.utterances_needed
    if spec.capacity < need:
        raise CorpusError(
            f"alphabet of {spec.alphabet} with lengths {spec.min_len}-{spec.max_len} gives only "
            f"{spec.capacity} distinct utterances, {need} needed"
        )

    if spec.capacity <= _ENUMERATE_LIMIT:
        space = [
            u
            for n in range(spec.min_len, spec.max_len + 1)
            for u in itertools.product(range(spec.alphabet), repeat=n)
        ]
        picks = rng.choice(len(space), size=need, replace=False)
        return [space[int(i)] for i in picks]

    seen: set[tuple[int, ...]] = set()
    out: list[tuple[int, ...]] = []
    while len(out) < need:
        n = int(rng.integers(spec.min_len, spec.max_len + 1))
        u = tuple(int(x) for x in rng.integers(0, spec.alphabet, size=n))
        if u not in seen:
            seen.add(u)
            out.append(u)
    return out


def synthesize_corpus(spec: SyntheticSpec, seed: int) -> tuple[Corpus, SyntheticLayout]:
    rng = np.random.default_rng(seed)
    width = len(str(spec.alphabet - 1))
    utterances = [" ".join(_token(i, width) for i in u) for u in _draw_utterances(spec, rng)]
    it = iter(utterances)

    raw: list[tuple[str, str]] = []
    safe_texts: list[str] = []
    for _ in range(spec.n_safe):
        response = next(it)
        safe_texts.append(response)
        raw.extend((next(it), response) for _ in range(spec.m))
    diverse_raw = [(next(it), next(it)) for _ in range(spec.n_diverse)]
    raw.extend(diverse_raw)

    vocab = build_vocab(raw, min_count=1, max_size=spec.alphabet + 4)
    pairs = tuple(QRPair(encode(q, vocab), encode(r, vocab)) for q, r in raw)
    layout = SyntheticLayout(
        safe_responses=tuple(encode(r, vocab) for r in safe_texts),
        diverse_pairs=tuple(QRPair(encode(q, vocab), encode(r, vocab)) for q, r in diverse_raw),
    )
    return Corpus(pairs=pairs, vocab=vocab), layout


def split_heldout(
    corpus: Corpus, layout: SyntheticLayout, holdout: int, seed: int
) -> tuple[Corpus, SyntheticLayout, list[QRPair]]:
    kept, held = split_pairs(corpus.pairs, holdout, seed)
    return Corpus(pairs=tuple(kept), vocab=corpus.vocab), layout.restrict_to(kept), held


def write_layout(layout: SyntheticLayout, vocab: Vocab, path: Path) -> None:
    atomic_write_text(path, layout.to_json(vocab))


def read_layout(path: Path, vocab: Vocab) -> SyntheticLayout:
    try:
        return SyntheticLayout.from_json(path.read_text(encoding="utf-8"), vocab)
    except (OSError, json.JSONDecodeError) as e:
        raise CorpusError(f"cannot read layout {path}: {e}") from e
