import numpy as np
import pytest

from core.corpus import Corpus, Scene, dump_corpus, load_corpus, save_corpus, split_corpus
from core.embeddings import load_embeddings, random_embeddings
from core.errors import DataError
from core.generator import GeneratorSpec, generate_synthetic_corpus, synthetic_embedding_lines
from core.vocabulary import (
    END_ID,
    PAD_ID,
    RESERVED,
    UNK_ID,
    Vocabulary,
    build_vocabulary,
    content,
    detokenize,
    tokenize,
)


def test_vocabulary_orders_by_count_then_token():
    vocab = build_vocabulary([["b", "a", "c"], ["c", "b"], ["c"]])
    assert vocab.tokens == list(RESERVED) + ["c", "b", "a"]


def test_vocabulary_min_count_drops_rare_tokens():
    vocab = build_vocabulary([["x", "y"], ["x"]], min_count=2)
    assert "x" in vocab
    assert vocab.lookup("y") == UNK_ID


def test_vocabulary_rejects_empty_corpus_and_bad_min_count():
    with pytest.raises(DataError):
        build_vocabulary([[], []])
    with pytest.raises(ValueError):
        build_vocabulary([["a"]], min_count=0)


def test_vocabulary_requires_reserved_prefix():
    with pytest.raises(DataError):
        Vocabulary(["a", "b"])


def test_tokenize_roundtrip_and_unknown_words():
    vocab = build_vocabulary([["a", "red", "dog"]])
    ids = tokenize(["a", "blue", "dog"], vocab)
    assert ids[1] == UNK_ID
    assert detokenize(ids, vocab) == ["a", "<unk>", "dog"]


def test_content_drops_markers_but_keeps_unknown():
    assert content([1, 5, UNK_ID, PAD_ID, 6, END_ID]) == [5, UNK_ID, 6]


def test_vocabulary_save_and_load(tmp_path):
    vocab = build_vocabulary([["one", "two", "two"]])
    vocab.save(tmp_path / "vocab.txt")
    assert Vocabulary.load(tmp_path / "vocab.txt").tokens == vocab.tokens


def test_generator_is_deterministic(tiny_spec):
    a = generate_synthetic_corpus(tiny_spec, seed=5)
    b = generate_synthetic_corpus(tiny_spec, seed=5)
    assert dump_corpus(a) == dump_corpus(b)
    assert dump_corpus(a) != dump_corpus(generate_synthetic_corpus(tiny_spec, seed=6))


def test_generator_emits_five_references_per_scene(corpus, tiny_spec):
    assert len(corpus) == tiny_spec.n_scenes
    assert all(len(scene.references) == 5 for scene in corpus.scenes)
    assert corpus.feature_dim == tiny_spec.d_img


def test_generator_rejects_small_feature_dimension():
    with pytest.raises(DataError, match="feature dimension"):
        generate_synthetic_corpus(GeneratorSpec(n_objects=8, n_attributes=4, d_img=6), seed=0)


def test_generator_multi_hot_code_marks_mentioned_objects():
    spec = GeneratorSpec(n_scenes=20, n_objects=4, n_attributes=2, d_img=6, noise_std=0.0)
    corpus = generate_synthetic_corpus(spec, seed=1)
    objects = ["dog", "cat", "horse", "bird"]
    for scene in corpus.scenes:
        words = {corpus.vocabulary.token_of(i) for ref in scene.references for i in ref}
        present = {objects[k] for k in range(4) if scene.features[k] == 1.0}
        assert words & set(objects)
        assert words & set(objects) <= present


def test_corpus_save_and_load(tmp_path, corpus):
    save_corpus(corpus, tmp_path / "corpus.jsonl")
    loaded = load_corpus(tmp_path / "corpus.jsonl", corpus.vocabulary)
    assert dump_corpus(loaded) == dump_corpus(corpus)


def test_load_corpus_names_the_malformed_line(tmp_path, corpus):
    path = tmp_path / "corpus.jsonl"
    path.write_text('{"id": 0, "features": [0.0], "refs": [["a"]]}\n{"id": 1, "features"\n')
    with pytest.raises(DataError, match=":2:"):
        load_corpus(path, corpus.vocabulary)


def test_corpus_rejects_duplicate_ids_and_missing_references(corpus):
    vocab = corpus.vocabulary
    with pytest.raises(DataError):
        Corpus([Scene(0, np.zeros(2), [[4]]), Scene(0, np.zeros(2), [[4]])], vocab)
    with pytest.raises(DataError):
        Corpus([Scene(0, np.zeros(2), [])], vocab)


def test_split_is_a_seeded_partition(corpus):
    train, val, test = split_corpus(corpus, (0.5, 0.25, 0.25), seed=0)
    ids = [s.id for part in (train, val, test) for s in part.scenes]
    assert sorted(ids) == sorted(s.id for s in corpus.scenes)
    assert (len(train), len(val), len(test)) == (6, 3, 3)
    again = split_corpus(corpus, (0.5, 0.25, 0.25), seed=0)
    assert [s.id for s in again[1].scenes] == [s.id for s in val.scenes]


def test_split_rejects_bad_fractions(corpus):
    with pytest.raises(ValueError):
        split_corpus(corpus, (0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        split_corpus(corpus, (1.0, 0.0, 0.0))


def test_random_embeddings_are_unit_norm_with_zero_pad():
    table = random_embeddings(10, 6, seed=2)
    norms = np.linalg.norm(table.matrix, axis=1)
    assert norms[PAD_ID] == 0.0
    assert np.allclose(norms[1:], 1.0)


def test_load_embeddings_fills_missing_words(tmp_path):
    vocab = build_vocabulary([["cat", "dog"]])
    path = tmp_path / "vectors.txt"
    path.write_text("cat 3 4\nzebra 1 1\n")
    table = load_embeddings(path, vocab, seed=0)
    assert table.dim == 2
    assert np.allclose(table.matrix[vocab.lookup("cat")], [0.6, 0.8])
    assert np.allclose(np.linalg.norm(table.matrix[vocab.lookup("dog")]), 1.0)


def test_load_embeddings_rejects_inconsistent_dimensions(tmp_path):
    vocab = build_vocabulary([["cat"]])
    path = tmp_path / "vectors.txt"
    path.write_text("cat 1 2\ndog 1 2 3\n")
    with pytest.raises(DataError, match=":2:"):
        load_embeddings(path, vocab)


def test_load_embeddings_accepts_trailing_whitespace(tmp_path):
    vocab = build_vocabulary([["cat", "dog"]])
    path = tmp_path / "vectors.txt"
    path.write_bytes(b"cat 3 4 \ndog 0 1\t\r\n")
    table = load_embeddings(path, vocab)
    assert table.dim == 2
    assert np.allclose(table.matrix[vocab.lookup("cat")], [0.6, 0.8])
    assert np.allclose(table.matrix[vocab.lookup("dog")], [0.0, 1.0])


def test_load_embeddings_names_the_line_with_bad_bytes(tmp_path):
    vocab = build_vocabulary([["cat"]])
    path = tmp_path / "vectors.txt"
    path.write_bytes(b"cat 1 2\n\xff\xfe 1 2\n")
    with pytest.raises(DataError, match=":2: invalid UTF-8"):
        load_embeddings(path, vocab)


def test_synthetic_embeddings_cluster_by_category(tiny_spec):
    vocab = build_vocabulary([["dog", "cat", "red"]])
    lines = synthetic_embedding_lines(vocab, tiny_spec, dim=32, seed=0)
    vectors = {line.split(" ")[0]: np.array([float(x) for x in line.split(" ")[1:]]) for line in lines}

    def cos(a, b):
        return float(vectors[a] @ vectors[b] / np.linalg.norm(vectors[a]) / np.linalg.norm(vectors[b]))

    # dog and cat share the animal centre; the attribute red does not
    assert cos("dog", "cat") > cos("dog", "red")
