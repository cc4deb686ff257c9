import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from core.errors import DataError
from core.vocabulary import Vocabulary, detokenize, tokenize


TokenSequence = list[int]
Split = Literal["train", "val", "test", "all"]


@dataclass
class Scene:
    """
    One captioned scene.

    Attributes:
        id (int): Scene identifier, unique within a corpus.
        features (np.ndarray): Feature vector of dimension d_img.
        references (list[TokenSequence]): Reference captions as vocabulary indices, without end marker.
    """

    id: int
    features: np.ndarray
    references: list[TokenSequence]


@dataclass
class Corpus:
    scenes: list[Scene]
    vocabulary: Vocabulary
    split: Split = "all"
    _ids: set[int] = field(init=False, repr=False)

    def __post_init__(self):
        ids = [s.id for s in self.scenes]
        if len(set(ids)) != len(ids):
            raise DataError("scene ids must be unique")
        dims = {s.features.shape for s in self.scenes}
        if len(dims) > 1:
            raise DataError(f"feature dimensions differ across scenes: {sorted(dims)}")
        for scene in self.scenes:
            if not scene.references:
                raise DataError(f"scene {scene.id} has no references")
        self._ids = set(ids)

    def __len__(self) -> int:
        return len(self.scenes)

    @property
    def feature_dim(self) -> int:
        return self.scenes[0].features.shape[0] if self.scenes else 0

    def reference_sets(self) -> list[list[TokenSequence]]:
        return [scene.references for scene in self.scenes]


def load_corpus(path: str | Path, vocab: Vocabulary, split: Split = "all") -> Corpus:
    """
    Loads a JSON-lines corpus: one {"id", "features", "refs"} object per line.

    Raises:
        DataError: On malformed lines, naming the line number.
    """
    scenes = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                scenes.append(
                    Scene(
                        id=int(row["id"]),
                        features=np.asarray(row.get("features", []), dtype=np.float64),
                        references=[tokenize(ref, vocab) for ref in row["refs"]],
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise DataError(f"{path}:{line_no}: malformed scene ({e})") from e

    return Corpus(scenes, vocab, split)


def dump_corpus(corpus: Corpus) -> str:
    lines = [
        json.dumps(
            {
                "id": scene.id,
                "features": [float(x) for x in scene.features],
                "refs": [detokenize(ref, corpus.vocabulary) for ref in scene.references],
            },
            separators=(",", ":"),
        )
        for scene in corpus.scenes
    ]
    return "\n".join(lines) + "\n"


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(dump_corpus(corpus), encoding="utf-8")


def split_corpus(
    corpus: Corpus,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[Corpus, Corpus, Corpus]:
    """
    Partitions scenes into train/val/test by a seeded shuffle of scene ids.

    Raises:
        ValueError: If the fractions do not sum to 1 or a split would be empty.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must sum to 1, got {fractions}")

    order = sorted(corpus.scenes, key=lambda s: s.id)
    perm = np.random.default_rng(seed).permutation(len(order))
    n = len(order)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) <= 0 or fractions[2] <= 0:
        raise ValueError(f"empty split for fractions {fractions} over {n} scenes")

    shuffled = [order[i] for i in perm]
    parts = (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_val],
        shuffled[n_train + n_val :],
    )
    return tuple(
        Corpus(sorted(part, key=lambda s: s.id), corpus.vocabulary, name)
        for part, name in zip(parts, ("train", "val", "test"))
    )
