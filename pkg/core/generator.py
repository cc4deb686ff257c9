from dataclasses import dataclass, field
from pathlib import Path
from string import Formatter

import numpy as np

from core.corpus import Corpus, Scene
from core.errors import DataError
from core.vocabulary import Vocabulary, build_vocabulary, tokenize


OBJECT_LEXICON = [
    ("dog", "animal"),
    ("cat", "animal"),
    ("horse", "animal"),
    ("bird", "animal"),
    ("car", "vehicle"),
    ("bus", "vehicle"),
    ("boat", "vehicle"),
    ("bike", "vehicle"),
    ("tree", "plant"),
    ("flower", "plant"),
    ("ball", "toy"),
    ("kite", "toy"),
]

ATTRIBUTE_LEXICON = [
    ("red", "color"),
    ("blue", "color"),
    ("green", "color"),
    ("white", "color"),
    ("small", "size"),
    ("large", "size"),
    ("old", "age"),
    ("young", "age"),
]

DEFAULT_TEMPLATES = [
    "a {attr1} {obj1}",
    "a photo of a {attr1} {obj1}",
    "there is a {attr1} {obj1} in the picture",
    "a {obj1} standing outside",
    "a {attr1} {obj1} next to a {attr2} {obj2}",
    "a {obj1} and a {obj2}",
    "there is a {obj1} near the {obj2}",
    "a {attr2} {obj2} behind a {obj1}",
    "the {obj1} is close to a {attr2} {obj2}",
]

REFERENCES_PER_SCENE = 5


@dataclass
class GeneratorSpec:
    """
    Parameters of the synthetic captioning corpus.

    Attributes:
        n_scenes (int): Number of scenes.
        n_objects (int): Size of the object lexicon in use.
        n_attributes (int): Size of the attribute lexicon in use.
        d_img (int): Feature dimension; the first n_objects + n_attributes entries are the multi-hot code.
        templates (list[str]): Caption templates with {obj1}, {obj2}, {attr1}, {attr2} slots.
        noise_std (float): Standard deviation of the Gaussian noise added to the features.
        max_objects (int): Upper bound on objects per scene (1 or 2).
    """

    n_scenes: int = 200
    n_objects: int = 8
    n_attributes: int = 4
    d_img: int = 16
    templates: list[str] = field(default_factory=lambda: list(DEFAULT_TEMPLATES))
    noise_std: float = 0.1
    max_objects: int = 2


def _lexicon(base: list[tuple[str, str]], n: int, prefix: str) -> list[tuple[str, str]]:
    words = list(base[:n])
    for k in range(len(words), n):
        words.append((f"{prefix}{k}", f"{prefix}-group{k % 3}"))
    return words


def object_words(spec: GeneratorSpec) -> list[tuple[str, str]]:
    return _lexicon(OBJECT_LEXICON, spec.n_objects, "object")


def attribute_words(spec: GeneratorSpec) -> list[tuple[str, str]]:
    return _lexicon(ATTRIBUTE_LEXICON, spec.n_attributes, "attribute")


def concept_words(spec: GeneratorSpec) -> set[str]:
    return {w for w, _ in object_words(spec)} | {w for w, _ in attribute_words(spec)}


def _slots(template: str) -> set[str]:
    return {name for _, name, _, _ in Formatter().parse(template) if name}


def generate_synthetic_corpus(spec: GeneratorSpec, seed: int) -> Corpus:
    """
    Generates a reproducible corpus of scenes with multi-hot features and templated captions.

    Args:
        spec (GeneratorSpec): Generator parameters.
        seed (int): Seed; equal (spec, seed) pairs give identical corpora.

    Returns:
        Corpus: Scenes with exactly five references each, split tag "all".

    Raises:
        ValueError: If n_scenes < 1 or no template is given.
        DataError: If d_img < n_objects + n_attributes.
    """
    if spec.n_scenes < 1:
        raise ValueError(f"n_scenes must be >= 1, got {spec.n_scenes}")
    if not spec.templates:
        raise ValueError("at least one template is required")
    if spec.d_img < spec.n_objects + spec.n_attributes:
        raise DataError(
            f"feature dimension too small: d_img={spec.d_img} < "
            f"{spec.n_objects} objects + {spec.n_attributes} attributes"
        )
    if spec.n_objects < spec.max_objects or spec.n_attributes < 1:
        raise ValueError("need at least max_objects objects and one attribute")

    rng = np.random.default_rng(seed)
    objects = [w for w, _ in object_words(spec)]
    attributes = [w for w, _ in attribute_words(spec)]

    raw_scenes = []
    for scene_id in range(spec.n_scenes):
        n_present = int(rng.integers(1, spec.max_objects + 1))
        chosen = [int(i) for i in rng.choice(len(objects), size=n_present, replace=False)]
        attrs = [int(rng.integers(len(attributes))) for _ in chosen]

        features = np.zeros(spec.d_img)
        features[chosen] = 1.0
        features[[spec.n_objects + a for a in attrs]] = 1.0
        if spec.noise_std > 0:
            features = features + rng.normal(0.0, spec.noise_std, size=spec.d_img)

        fill = {}
        for k, (o, a) in enumerate(zip(chosen, attrs), start=1):
            fill[f"obj{k}"] = objects[o]
            fill[f"attr{k}"] = attributes[a]

        usable = [t for t in spec.templates if _slots(t) <= fill.keys()]
        if not usable:
            raise ValueError(f"no template can be filled with slots {sorted(fill)}")
        picks = rng.integers(len(usable), size=REFERENCES_PER_SCENE)
        captions = [usable[int(i)].format(**fill).split() for i in picks]

        raw_scenes.append((scene_id, features, captions))

    vocab = build_vocabulary([cap for _, _, caps in raw_scenes for cap in caps], min_count=1)
    scenes = [
        Scene(id=scene_id, features=features, references=[tokenize(c, vocab) for c in captions])
        for scene_id, features, captions in raw_scenes
    ]
    return Corpus(scenes, vocab, "all")


def synthetic_embedding_lines(vocab: Vocabulary, spec: GeneratorSpec, dim: int, seed: int) -> list[str]:
    """
    Word vectors in GloVe text format; words of one semantic category share a centre.
    """
    rng = np.random.default_rng(seed)
    categories = dict(object_words(spec) + attribute_words(spec))
    centres = {cat: rng.standard_normal(dim) for cat in sorted(set(categories.values()))}

    lines = []
    for token in vocab.tokens[4:]:
        noise = rng.standard_normal(dim)
        vec = centres[categories[token]] + 0.6 * noise if token in categories else noise
        lines.append(token + " " + " ".join(format(float(x), ".17g") for x in vec))
    return lines


def write_synthetic_embeddings(vocab: Vocabulary, spec: GeneratorSpec, path: str | Path, dim: int = 32, seed: int = 0) -> None:
    Path(path).write_text("\n".join(synthetic_embedding_lines(vocab, spec, dim, seed)) + "\n", encoding="utf-8")
