import json
import logging
import math

import numpy as np
import pytest
from scipy.special import expit

from core.embeddings import EmbeddingTable, load_embeddings, random_embeddings
from core.errors import DataError, ModelError
from core.generator import GeneratorSpec, generate_synthetic_corpus, write_synthetic_embeddings
from core.vocabulary import END_ID
from nn import tensor as T
from nn.gradcheck import finite_difference_check
from nn.params import ParameterStore
from simscore.encoders import CELL_KINDS, ENCODER_KINDS, SentenceEncoder, encode, encode_batch
from simscore.kernel import kernel_cosine, kernel_cosine_multi
from simscore.reward_model import (
    build_reward_model,
    load_reward_model,
    save_reward_model,
    score_batch,
    snap_score,
    step_rewards,
    trl_reward,
    trl_step_rewards,
)
from simscore.scorer import PairScorer, pair_features, pair_score, pair_score_tensor
from simscore.training import (
    MIN_PAIRS,
    ScorerConfig,
    heldout_spearman,
    make_similarity_pairs,
    mean_squared_error,
    train_scorer,
)


def _one_hot_table(n_words: int) -> EmbeddingTable:
    matrix = np.zeros((4 + n_words, n_words))
    matrix[4:] = np.eye(n_words)
    return EmbeddingTable(matrix, True)


def _frozen_model(kind="bigru_maxpool", d_emb=6, d_h=4, seed=0, granularity="terminal", head_seed=None):
    model = build_reward_model(kind, d_emb, d_h, seed, granularity=granularity)
    if head_seed is not None:
        rng = np.random.default_rng(head_seed)
        model.store["head.W"].data[...] = rng.standard_normal(model.store["head.W"].shape)
    model.store.freeze()
    return model


@pytest.mark.parametrize("cell", CELL_KINDS)
@pytest.mark.parametrize("kind", ENCODER_KINDS)
def test_encoder_output_dimension_is_independent_of_length(kind, cell):
    store = ParameterStore()
    encoder = SentenceEncoder.create(kind, store, 6, 5, np.random.default_rng(0), cell=cell)
    emb = random_embeddings(20, 6, seed=1)
    rng = np.random.default_rng(2)
    for length in range(1, 31):
        tokens = [int(t) for t in rng.integers(4, 20, size=length)]
        assert encode(encoder, tokens, emb).shape == (10,)


def test_encoder_rejects_empty_sequences_and_dimension_mismatch():
    store = ParameterStore()
    encoder = SentenceEncoder.create("bigru_maxpool", store, 6, 5, np.random.default_rng(0))
    with pytest.raises(ValueError, match="empty"):
        encode(encoder, [], random_embeddings(10, 6))
    with pytest.raises(ValueError, match="does not match"):
        encode(encoder, [4], random_embeddings(10, 7))
    with pytest.raises(ValueError, match="unknown encoder"):
        SentenceEncoder.create("bilstm", ParameterStore(), 6, 5, np.random.default_rng(0))
    with pytest.raises(ValueError, match="unknown recurrent cell"):
        SentenceEncoder.create("bigru_maxpool", ParameterStore(), 6, 5, np.random.default_rng(0), cell="rnn")


def test_single_token_pools_to_its_own_state():
    store = ParameterStore()
    SentenceEncoder.create("bigru_maxpool", store, 6, 5, np.random.default_rng(0))
    emb = random_embeddings(10, 6, seed=3)
    max_pooled = encode(SentenceEncoder("bigru_maxpool", store, 6, 5), [7], emb)
    mean_pooled = encode(SentenceEncoder("bigru_meanpool", store, 6, 5), [7], emb)
    assert np.allclose(max_pooled.data, mean_pooled.data)


def test_uniform_attention_is_the_time_average():
    store = ParameterStore()
    SentenceEncoder.create("self_attentive", store, 6, 5, np.random.default_rng(0))
    store["enc.att.W"].data[...] = 0.0
    store["enc.att.b"].data[...] = 0.0
    emb = random_embeddings(12, 6, seed=4)
    tokens = [4, 9, 5, 11, 6]
    attended = encode(SentenceEncoder("self_attentive", store, 6, 5), tokens, emb)
    averaged = encode(SentenceEncoder("bigru_meanpool", store, 6, 5), tokens, emb)
    assert np.allclose(attended.data, averaged.data)


@pytest.mark.parametrize("cell", CELL_KINDS)
@pytest.mark.parametrize("kind", ENCODER_KINDS)
def test_padding_does_not_leak_into_shorter_sequences(kind, cell):
    store = ParameterStore()
    encoder = SentenceEncoder.create(kind, store, 6, 5, np.random.default_rng(0), cell=cell)
    emb = random_embeddings(12, 6, seed=5)
    batch = encode_batch(encoder, [[4, 5], [6, 7, 8, 9, 10]], emb)
    assert np.allclose(batch.data[0], encode(encoder, [4, 5], emb).data)
    assert np.allclose(batch.data[1], encode(encoder, [6, 7, 8, 9, 10], emb).data)


@pytest.mark.parametrize("cell", CELL_KINDS)
@pytest.mark.parametrize("kind", ENCODER_KINDS)
def test_encoder_and_head_gradients(kind, cell):
    rng = np.random.default_rng(6)
    store = ParameterStore()
    encoder = SentenceEncoder.create(kind, store, 4, 3, rng, cell=cell)
    scorer = PairScorer.create(store, 3)
    store["head.W"].data[...] = rng.standard_normal(store["head.W"].shape)
    emb = random_embeddings(10, 4, seed=7)
    first, second = [[4, 5, 6], [7, 8]], [[9, 4], [5, 6, 7, 8]]

    def f(s):
        scores = pair_score_tensor(scorer, encode_batch(encoder, first, emb), encode_batch(encoder, second, emb))
        return T.total(T.mul(scores, scores))

    assert finite_difference_check(f, store, probes=20) < 1e-4


def test_pair_features_layout():
    features = pair_features(np.array([1.0, 2.0]), np.array([3.0, 1.0]))
    assert features.data.tolist() == [1.0, 2.0, 3.0, 1.0, 2.0, 1.0, 3.0, 2.0]


def test_pair_features_difference_blocks_are_symmetric():
    rng = np.random.default_rng(8)
    h1, h2 = rng.standard_normal(4), rng.standard_normal(4)
    assert np.allclose(pair_features(h1, h2).data[8:], pair_features(h2, h1).data[8:])


def test_zero_head_scores_one_half():
    scorer = PairScorer.create(ParameterStore(), 2)
    rng = np.random.default_rng(9)
    assert pair_score(scorer, rng.standard_normal(4), rng.standard_normal(4)) == 0.5


def test_pair_score_rejects_dimension_mismatch():
    scorer = PairScorer.create(ParameterStore(), 2)
    with pytest.raises(ValueError, match="dimension mismatch"):
        pair_score(scorer, np.zeros(4), np.zeros(3))
    with pytest.raises(ValueError, match="dimension mismatch"):
        pair_score(scorer, np.zeros(6), np.zeros(6))


def test_kernel_cosine_hand_values():
    table = _one_hot_table(4)
    assert kernel_cosine([4], [4], table) == pytest.approx(expit(1.0))
    assert kernel_cosine([4], [4], table) == pytest.approx(0.73106, abs=1e-5)
    assert kernel_cosine([4, 5], [6, 7], table) == 0.5


def test_kernel_cosine_prefers_aligned_candidates():
    table = _one_hot_table(4)
    aligned = kernel_cosine([4, 5, 6], [4, 5, 6], table)
    shifted = kernel_cosine([7, 4, 5], [4, 5, 6], table)
    assert aligned == pytest.approx(expit(1.0))
    assert shifted == pytest.approx(expit(2.0 * math.exp(-1) / 3.0))
    assert shifted < aligned


def test_kernel_cosine_brevity_modes():
    table = _one_hot_table(4)
    short = kernel_cosine([4], [4, 5], table)
    assert short == pytest.approx(expit(math.exp(-1.0) / 2))
    assert kernel_cosine([4], [4, 5], table, bp_mode="paper_literal") == pytest.approx(expit(0.5))


def test_kernel_cosine_errors_and_aggregation():
    table = _one_hot_table(2)
    with pytest.raises(ValueError):
        kernel_cosine([4], [4], table, k=0)
    with pytest.raises(DataError, match="empty content"):
        kernel_cosine([END_ID], [4], table)
    assert kernel_cosine_multi([4], [[4], [5]], table, aggregation="max") == pytest.approx(expit(1.0))
    assert kernel_cosine_multi([4], [[4], [5]], table, aggregation="mean") == pytest.approx((expit(1.0) + 0.5) / 2)


def test_step_rewards_terminal_and_incremental():
    scores = {1: 0.25, 2: 0.5, 3: 0.375}
    assert step_rewards(scores.get, 3, "terminal") == [0.0, 0.0, 0.375]
    assert step_rewards(scores.get, 3, "incremental") == [0.25, 0.25, -0.125]
    assert step_rewards(scores.get, 0, "terminal") == []
    with pytest.raises(ValueError):
        step_rewards(scores.get, 3, "weekly")


def test_snapped_scores_lie_on_the_grid():
    value = snap_score(1 / 3)
    assert value * 2**40 == round(value * 2**40)
    assert abs(value - 1 / 3) < 2**-40


def test_zero_head_reward_model_is_constant():
    emb = random_embeddings(10, 6, seed=0)
    terminal = _frozen_model()
    incremental = _frozen_model(granularity="incremental")
    actions, refs = [4, 5, 6, END_ID], [[4, 7], [8]]
    assert trl_reward(terminal, actions, refs, emb) == 0.5
    assert trl_step_rewards(terminal, actions, refs, emb) == [0.0, 0.0, 0.0, 0.5]
    assert trl_step_rewards(incremental, actions, refs, emb) == [0.5, 0.0, 0.0, 0.0]


@pytest.mark.parametrize("kind", ENCODER_KINDS)
def test_incremental_rewards_telescope_exactly(kind):
    emb = random_embeddings(12, 6, seed=1)
    model = _frozen_model(kind, granularity="incremental", head_seed=2)
    rng = np.random.default_rng(3)
    for _ in range(10):
        actions = [int(t) for t in rng.integers(4, 12, size=int(rng.integers(1, 8)))] + [END_ID]
        refs = [[int(t) for t in rng.integers(4, 12, size=4)] for _ in range(2)]
        rewards = trl_step_rewards(model, actions, refs, emb)
        assert len(rewards) == len(actions)
        assert sum(rewards) == trl_reward(model, actions, refs, emb)


def test_incremental_rewards_telescope_on_a_thousand_episodes():
    emb = random_embeddings(12, 6, seed=4)
    model = _frozen_model(granularity="incremental", head_seed=5)
    rng = np.random.default_rng(6)
    for _ in range(1000):
        actions = [int(t) for t in rng.integers(4, 12, size=int(rng.integers(1, 6)))] + [END_ID]
        refs = [[int(t) for t in rng.integers(4, 12, size=int(rng.integers(1, 6)))]]
        assert sum(trl_step_rewards(model, actions, refs, emb)) == trl_reward(model, actions, refs, emb)


def test_scores_do_not_depend_on_batch_composition():
    emb = random_embeddings(12, 6, seed=1)
    model = _frozen_model(head_seed=4)
    refs = [[4, 5, 6]]
    alone = score_batch(model, [[7, 8]], refs, emb)[0]
    together = score_batch(model, [[9, 10, 11, 4], [7, 8], [END_ID]], refs, emb)
    assert together[1] == alone
    assert together[2] == 0.0


def test_trl_reward_requires_a_frozen_model():
    emb = random_embeddings(10, 6, seed=0)
    model = build_reward_model("bigru_maxpool", 6, 4)
    with pytest.raises(ModelError, match="reward model must be frozen"):
        trl_reward(model, [4], [[5]], emb)
    model.store.freeze()
    with pytest.raises(DataError, match="empty content"):
        trl_reward(model, [4], [[END_ID]], emb)


def test_mean_and_max_agree_on_duplicate_references():
    emb = random_embeddings(10, 6, seed=0)
    mean_model = _frozen_model(head_seed=5)
    max_model = _frozen_model(head_seed=5)
    max_model.aggregation = "max"
    refs = [[4, 5, 6], [4, 5, 6]]
    assert trl_reward(mean_model, [7, 8], refs, emb) == trl_reward(max_model, [7, 8], refs, emb)


def test_reward_model_save_and_load(tmp_path):
    model = _frozen_model("self_attentive", head_seed=6)
    path = tmp_path / "scorer.bin"
    save_reward_model(model, path)
    loaded = load_reward_model(path)
    assert loaded.frozen
    assert loaded.checksum() == model.checksum()
    assert loaded.encoder.kind == "self_attentive"

    emb = random_embeddings(10, 6, seed=0)
    assert trl_reward(loaded, [4, 5], [[6, 7]], emb) == trl_reward(model, [4, 5], [[6, 7]], emb)


def test_lstm_reward_model_keeps_its_cell_across_save_and_load(tmp_path):
    model = build_reward_model("bigru_maxpool", 6, 4, seed=1, cell="lstm")
    assert model.store["enc.fwd.W_h"].shape == (16, 4)
    model.store.freeze()
    path = tmp_path / "scorer.bin"
    save_reward_model(model, path)
    assert json.loads((tmp_path / "scorer.bin.json").read_text())["cell"] == "lstm"

    loaded = load_reward_model(path)
    assert loaded.encoder.cell == "lstm"
    emb = random_embeddings(10, 6, seed=0)
    assert trl_reward(loaded, [4, 5, 6], [[6, 7]], emb) == trl_reward(model, [4, 5, 6], [[6, 7]], emb)


def test_reward_model_load_rejects_tampering(tmp_path):
    path = tmp_path / "scorer.bin"
    save_reward_model(_frozen_model(), path)
    sidecar = tmp_path / "scorer.bin.json"
    meta = json.loads(sidecar.read_text())
    meta["checksum"] = "0" * 64
    sidecar.write_text(json.dumps(meta))
    with pytest.raises(DataError, match="checksum mismatch"):
        load_reward_model(path)
    sidecar.unlink()
    with pytest.raises(DataError, match="missing"):
        load_reward_model(path)


def test_save_requires_a_frozen_model(tmp_path):
    with pytest.raises(ModelError):
        save_reward_model(build_reward_model("bigru_maxpool", 6, 4), tmp_path / "scorer.bin")


def test_similarity_pairs_are_seeded_and_labelled(corpus):
    pairs = make_similarity_pairs(corpus, 200, seed=0)
    assert pairs == make_similarity_pairs(corpus, 200, seed=0)
    assert all(0.0 <= y <= 1.0 for _, _, y in pairs)
    # same-scene pairs mention overlapping concepts more often than random ones
    same = np.mean([y for k, (_, _, y) in enumerate(pairs) if k % 2 == 0])
    other = np.mean([y for k, (_, _, y) in enumerate(pairs) if k % 2 == 1])
    assert same > other


def test_train_scorer_rejects_small_or_invalid_sets(corpus, emb):
    pairs = make_similarity_pairs(corpus, MIN_PAIRS, seed=0)
    with pytest.raises(ValueError, match="at least"):
        train_scorer(pairs[:-1], ScorerConfig(), emb)
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        train_scorer([(a, b, 1.5) for a, b, _ in pairs], ScorerConfig(), emb)


def test_constant_labels_leave_a_zero_head_untouched(corpus, emb, caplog):
    pairs = [(a, b, 0.5) for a, b, _ in make_similarity_pairs(corpus, MIN_PAIRS, seed=0)]
    config = ScorerConfig(d_h=4, epochs=2, seed=1)
    untouched = build_reward_model(config.kind, emb.dim, config.d_h, config.seed)
    with caplog.at_level(logging.WARNING):
        model = train_scorer(pairs, config, emb)
    assert "cannot learn a ranking" in caplog.text
    assert model.frozen
    assert model.checksum() == untouched.checksum()
    assert model.history == [0.0, 0.0, 0.0]


def test_train_scorer_reduces_the_training_error(corpus, emb):
    pairs = make_similarity_pairs(corpus, 200, seed=0)
    model = train_scorer(pairs, ScorerConfig(d_h=6, epochs=8, seed=0), emb)
    assert model.frozen
    assert len(model.history) == 9
    assert model.history[-1] < model.history[0]
    assert mean_squared_error(model, pairs, emb) == pytest.approx(model.history[-1])


@pytest.mark.slow
def test_scorer_halves_the_error_and_ranks_held_out_pairs(tmp_path):
    spec = GeneratorSpec(n_scenes=60)
    corpus = generate_synthetic_corpus(spec, seed=0)
    write_synthetic_embeddings(corpus.vocabulary, spec, tmp_path / "vectors.txt", dim=16, seed=0)
    emb = load_embeddings(tmp_path / "vectors.txt", corpus.vocabulary)

    pairs = make_similarity_pairs(corpus, 600, seed=1)
    model = train_scorer(pairs[100:], ScorerConfig(d_h=16, epochs=30, seed=0), emb)
    assert model.history[-1] < 0.5 * model.history[0]
    assert heldout_spearman(model, pairs[:100], emb) > 0.0
