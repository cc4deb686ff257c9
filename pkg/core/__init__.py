from .corpus import Corpus, Scene, TokenSequence, load_corpus, save_corpus, split_corpus
from .embeddings import EmbeddingTable, load_embeddings
from .generator import GeneratorSpec, generate_synthetic_corpus
from .vocabulary import Vocabulary, build_vocabulary, tokenize
