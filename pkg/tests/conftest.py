import numpy as np
import pytest

from core.corpus import Corpus, Scene
from core.embeddings import random_embeddings
from core.generator import GeneratorSpec, generate_synthetic_corpus
from core.vocabulary import build_vocabulary, tokenize
from harness.config import TrainConfig


@pytest.fixture
def tiny_spec():
    return GeneratorSpec(n_scenes=12, n_objects=4, n_attributes=2, d_img=8, noise_std=0.05)


@pytest.fixture
def corpus(tiny_spec):
    return generate_synthetic_corpus(tiny_spec, seed=3)


@pytest.fixture
def emb(corpus):
    return random_embeddings(len(corpus.vocabulary), 8, seed=0)


@pytest.fixture
def tiny_config():
    return TrainConfig(
        d_emb=8,
        d_h=8,
        batch=4,
        max_len=6,
        actor_pretrain_epochs=1,
        critic_pretrain_epochs=1,
        joint_epochs=1,
        beam=2,
        splits=(0.5, 0.25, 0.25),
    )


@pytest.fixture
def one_scene():
    """A single scene whose only caption is "a red dog"."""
    vocab = build_vocabulary([["a", "red", "dog"]])
    scene = Scene(id=0, features=np.array([1.0, 0.0, 0.5, -0.5]), references=[tokenize(["a", "red", "dog"], vocab)])
    return Corpus([scene], vocab)
