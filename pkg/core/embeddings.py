import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from core.errors import DataError
from core.vocabulary import PAD_ID, Vocabulary


logger = logging.getLogger(__name__)


@dataclass
class EmbeddingTable:
    """
    Word-index to vector map.

    Attributes:
        matrix (np.ndarray): |V| x d_emb rows; the pad row is all-zero.
        normalized (bool): Whether every non-pad row has unit Euclidean norm.
    """

    matrix: np.ndarray
    normalized: bool

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def rows(self, ids) -> np.ndarray:
        return self.matrix[np.asarray(ids, dtype=np.int64)]


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return matrix / norms


def random_embeddings(vocab_size: int, dim: int, seed: int = 0, normalize: bool = True) -> EmbeddingTable:
    rng = np.random.default_rng(seed)
    matrix = rng.standard_normal((vocab_size, dim))
    matrix[PAD_ID] = 0.0
    if normalize:
        matrix = _normalize_rows(matrix)
    return EmbeddingTable(matrix, normalize)


def load_embeddings(path: str | Path, vocab: Vocabulary, normalize: bool = True, seed: int = 0) -> EmbeddingTable:
    """
    Loads GloVe-style text vectors ("word f1 f2 ...") for the words of a vocabulary.

    Words missing from the file get seeded Gaussian rows; the pad row is zero.

    Args:
        path (str | Path): Embedding file.
        vocab (Vocabulary): Vocabulary whose rows are filled.
        normalize (bool, optional): Scale every non-pad row to unit norm. Defaults to True.
        seed (int, optional): Seed for the rows of missing words. Defaults to 0.

    Raises:
        DataError: On a malformed line or inconsistent dimensions, naming the line number.
    """
    found: dict[int, np.ndarray] = {}
    dim = None

    with open(path, "rb") as f:
        for line_no, raw in enumerate(f, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise DataError(f"{path}:{line_no}: invalid UTF-8 ({e.reason})") from e
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise DataError(f"{path}:{line_no}: malformed embedding line")
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError as e:
                raise DataError(f"{path}:{line_no}: malformed embedding line ({e})") from e
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise DataError(
                    f"{path}:{line_no}: dimension mismatch, expected {dim} got {vec.shape[0]}"
                )
            if parts[0] in vocab:
                found[vocab.lookup(parts[0])] = vec

    if dim is None:
        raise DataError(f"{path}: no embeddings found")

    rng = np.random.default_rng(seed)
    matrix = rng.standard_normal((len(vocab), dim))
    for idx, vec in found.items():
        matrix[idx] = vec
    matrix[PAD_ID] = 0.0

    missing = len(vocab) - 1 - len(found)
    if missing:
        logger.info("%d of %d vocabulary words missing from %s; using seeded rows", missing, len(vocab) - 1, path)

    if normalize:
        matrix = _normalize_rows(matrix)

    return EmbeddingTable(matrix, normalize)
