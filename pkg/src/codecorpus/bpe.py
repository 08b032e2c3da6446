"""Byte-level BPE encode/decode over externally supplied vocabulary files.

Loads the widely used interchange format (``vocab.json`` token table plus
ranked ``merges.txt``) and reproduces its ids exactly. The vocabulary is
never bundled; callers point at their own files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import regex

END_OF_TEXT = "<|endoftext|>"

# The standard byte-level pre-tokenization pattern: contractions, letter
# runs, number runs, punctuation runs, then whitespace.
_PRETOKEN_PATTERN = regex.compile(
    r"""'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+"""
)


class VocabularyError(ValueError):
    """Missing or malformed vocabulary files."""


@lru_cache(maxsize=1)
def _byte_to_unicode() -> dict[int, str]:
    # Printable bytes map to themselves; the rest shift into an unused
    # private range so every byte has a visible single-character form.
    bs = (list(range(ord("!"), ord("~") + 1))
          + list(range(ord("\xa1"), ord("\xac") + 1))
          + list(range(ord("\xae"), ord("\xff") + 1)))
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, map(chr, cs)))


@lru_cache(maxsize=1)
def _unicode_to_byte() -> dict[str, int]:
    return {c: b for b, c in _byte_to_unicode().items()}


@dataclass
class BpeVocabulary:
    """Immutable-after-load token table with ranked merges.

    Safe to share across threads: encode only reads, and the per-word
    merge cache is memoized idempotently.
    """

    token_to_id: dict[str, int]
    merge_ranks: dict[tuple[str, str], int]
    end_of_text_id: int
    id_to_token: dict[int, str] = field(init=False, repr=False)
    _word_cache: dict[str, tuple[str, ...]] = field(init=False, repr=False,
                                                    default_factory=dict)

    def __post_init__(self) -> None:
        self.id_to_token = {i: t for t, i in self.token_to_id.items()}

    def __len__(self) -> int:
        return len(self.token_to_id)

    def _merge_word(self, word: str) -> tuple[str, ...]:
        cached = self._word_cache.get(word)
        if cached is not None:
            return cached
        parts = list(word)
        while len(parts) > 1:
            pairs = set(zip(parts, parts[1:]))
            best = min(pairs, key=lambda p: self.merge_ranks.get(p, float("inf")))
            if best not in self.merge_ranks:
                break
            first, second = best
            merged: list[str] = []
            i = 0
            while i < len(parts):
                if i < len(parts) - 1 and parts[i] == first and parts[i + 1] == second:
                    merged.append(first + second)
                    i += 2
                else:
                    merged.append(parts[i])
                    i += 1
            parts = merged
        result = tuple(parts)
        self._word_cache[word] = result
        return result

    def encode(self, text: str) -> list[int]:
        """Deterministic token ids for UTF-8 text.

        Special tokens are never produced from raw text: the literal
        end-of-text string encodes like any other characters, so corpus
        text cannot forge document boundaries.
        """
        b2u = _byte_to_unicode()
        ids: list[int] = []
        for pretoken in _PRETOKEN_PATTERN.findall(text):
            mapped = "".join(b2u[b] for b in pretoken.encode("utf-8"))
            for piece in self._merge_word(mapped):
                ids.append(self.token_to_id[piece])
        return ids

    def decode(self, ids: list[int]) -> str:
        """Exact inverse of encode on encoder outputs; raises on unknown ids."""
        u2b = _unicode_to_byte()
        chars: list[str] = []
        for i in ids:
            token = self.id_to_token.get(i)
            if token is None:
                raise VocabularyError(f"unknown token id {i}")
            chars.append(token)
        data = bytes(u2b[c] for c in "".join(chars))
        return data.decode("utf-8", errors="replace")


def load_vocabulary(vocab_path: str | Path, merges_path: str | Path) -> BpeVocabulary:
    """Load a byte-level BPE vocabulary from interchange-format files."""
    vocab_path = Path(vocab_path)
    merges_path = Path(merges_path)
    if not vocab_path.is_file():
        raise VocabularyError(f"vocabulary file not found: {vocab_path}")
    if not merges_path.is_file():
        raise VocabularyError(f"merges file not found: {merges_path}")

    try:
        table = json.loads(vocab_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise VocabularyError(f"malformed token table {vocab_path}: {exc}") from exc
    if not isinstance(table, dict) or not table:
        raise VocabularyError(f"malformed token table {vocab_path}: expected a non-empty object")
    token_to_id: dict[str, int] = {}
    for token, token_id in table.items():
        if not isinstance(token_id, int) or token_id < 0:
            raise VocabularyError(f"malformed token table {vocab_path}: bad id for {token!r}")
        token_to_id[token] = token_id
    ids = sorted(token_to_id.values())
    if ids != list(range(len(ids))):
        raise VocabularyError(f"malformed token table {vocab_path}: ids are not dense")

    if END_OF_TEXT not in token_to_id:
        raise VocabularyError(f"vocabulary {vocab_path} lacks the {END_OF_TEXT} token")

    merge_ranks: dict[tuple[str, str], int] = {}
    lines = merges_path.read_text(encoding="utf-8").splitlines()
    if lines and lines[0].startswith("#"):
        lines = lines[1:]
    rank = 0
    for line in lines:
        if not line.strip():
            continue
        pieces = line.split(" ")
        if len(pieces) != 2:
            raise VocabularyError(f"malformed merges line in {merges_path}: {line!r}")
        merge_ranks[(pieces[0], pieces[1])] = rank
        rank += 1

    return BpeVocabulary(token_to_id=token_to_id, merge_ranks=merge_ranks,
                         end_of_text_id=token_to_id[END_OF_TEXT])
