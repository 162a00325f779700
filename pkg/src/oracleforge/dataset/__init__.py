"""Corpus synthesis, differential labeling and training-set assembly."""
from .build import build_dataset, load_mutants, mutate_corpus, mutate_family, save_mutants
from .corpus import (
    SIGN_FLIP_BUGGY,
    SIGN_FLIP_CORRECT,
    Corpus,
    Family,
    GenerationError,
    load_corpus,
    save_corpus,
    synth_corpus,
)
from .labeling import FAIL, PASS, LabelError, label_pair
from .pairs import (
    ClassWeights,
    DatasetSplit,
    DegenerateClasses,
    InsufficientData,
    LabeledPair,
    Triplet,
    build_pairs,
    build_triplets,
    class_weights,
    load_pairs,
    load_triplets,
    save_pairs,
    save_triplets,
    split,
)

__all__ = [
    "FAIL", "SIGN_FLIP_BUGGY", "SIGN_FLIP_CORRECT", "PASS", "ClassWeights", "Corpus", "DatasetSplit",
    "DegenerateClasses", "Family", "GenerationError", "InsufficientData", "LabelError", "LabeledPair",
    "Triplet", "build_dataset", "build_pairs", "build_triplets", "class_weights", "label_pair",
    "load_corpus", "load_mutants", "load_pairs", "load_triplets", "mutate_corpus", "mutate_family",
    "save_corpus", "save_mutants", "save_pairs", "save_triplets", "split", "synth_corpus",
]
