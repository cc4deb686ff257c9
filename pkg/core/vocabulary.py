from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from core.errors import DataError


PAD, START, END, UNK = "<pad>", "<start>", "<end>", "<unk>"
RESERVED = (PAD, START, END, UNK)
PAD_ID, START_ID, END_ID, UNK_ID = range(4)


@dataclass
class Vocabulary:
    """
    Dense index over caption tokens. Reserved markers occupy indices 0-3.

    Attributes:
        tokens (list[str]): Tokens in index order, reserved markers first.
    """

    tokens: list[str]
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if tuple(self.tokens[:4]) != RESERVED:
            raise DataError(f"vocabulary must start with {RESERVED}")
        if len(set(self.tokens)) != len(self.tokens):
            raise DataError("vocabulary tokens must be distinct")
        self._index = {tok: i for i, tok in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def lookup(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def token_of(self, index: int) -> str:
        return self.tokens[index]

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls([line for line in lines if line])


def build_vocabulary(sentences: list[list[str]], min_count: int = 1) -> Vocabulary:
    """
    Builds a vocabulary ordered by descending count, then lexicographically.

    Args:
        sentences (list[list[str]]): Tokenized sentences.
        min_count (int, optional): Minimum occurrences for a token to be kept. Defaults to 1.

    Returns:
        Vocabulary: The vocabulary, reserved markers first.

    Raises:
        ValueError: If min_count < 1.
        DataError: If no sentence holds any token.
    """
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")

    counts = Counter(tok for sentence in sentences for tok in sentence if tok not in RESERVED)
    if not counts:
        raise DataError("empty corpus")

    kept = sorted(
        (tok for tok, n in counts.items() if n >= min_count),
        key=lambda tok: (-counts[tok], tok),
    )
    return Vocabulary(list(RESERVED) + kept)


def tokenize(text: list[str], vocab: Vocabulary) -> list[int]:
    return [vocab.lookup(tok) for tok in text]


def detokenize(ids: list[int], vocab: Vocabulary) -> list[str]:
    return [vocab.token_of(i) for i in ids]


def content(ids) -> list[int]:
    """Drops pad, start and end markers; unk is kept."""
    return [int(i) for i in ids if i not in (PAD_ID, START_ID, END_ID)]


def with_end(ids: list[int]) -> list[int]:
    return list(ids) + [END_ID]
