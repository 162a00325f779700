"""Labeled pairs, triplets, splits and class weights."""
from __future__ import annotations

import json
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ..extractor import ExtractedMUT, UnitTest, extract_mut, mut_from_text
from ..minilang import DEFAULT_STEP_LIMIT, parse_method
from ..mutator import Mutant
from .corpus import Corpus
from .labeling import FAIL, PASS, label_pair


class InsufficientData(ValueError):
    pass


class DegenerateClasses(ValueError):
    pass


@dataclass(frozen=True)
class LabeledPair:
    id: str
    family: str
    test_id: str
    test_text: str
    mut: ExtractedMUT
    label: str
    origin: str  # "original" | "hom"
    mutant_order: int
    mutant_id: str = ""
    # statement ids (in the ExtractedMUT numbering) touched by the mutation
    buggy_stmts: tuple[int, ...] = ()

    def __post_init__(self):
        if self.label not in (PASS, FAIL):
            raise ValueError(f"bad label {self.label!r}")
        if self.origin == "original" and (self.label != PASS or self.mutant_order != 0):
            raise ValueError("original pairs must pass with order 0")

    @property
    def mut_text(self) -> str:
        return self.mut.concatenated_source

    def to_json(self) -> dict:
        return {
            "id": self.id, "family": self.family, "test_id": self.test_id,
            "test_text": self.test_text, "mut_text": self.mut_text, "label": self.label,
            "origin": self.origin, "order": self.mutant_order, "mutant_id": self.mutant_id,
            "buggy_stmts": list(self.buggy_stmts),
        }

    @classmethod
    def from_json(cls, d: dict) -> "LabeledPair":
        return cls(
            d["id"], d["family"], d.get("test_id", d["id"]), d["test_text"], mut_from_text(d["mut_text"]),
            d["label"], d["origin"], int(d["order"]), d.get("mutant_id", ""),
            tuple(d.get("buggy_stmts", ())),
        )


@dataclass(frozen=True)
class Triplet:
    test_id: str
    family: str
    test_text: str
    mut_pass: ExtractedMUT
    mut_fail: ExtractedMUT
    pass_id: str = ""
    fail_id: str = ""

    def to_json(self) -> dict:
        return {
            "test_text": self.test_text, "mut_pass_text": self.mut_pass.concatenated_source,
            "mut_fail_text": self.mut_fail.concatenated_source, "family": self.family,
            "test_id": self.test_id, "pass_id": self.pass_id, "fail_id": self.fail_id,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Triplet":
        return cls(d.get("test_id", ""), d["family"], d["test_text"], mut_from_text(d["mut_pass_text"]),
                   mut_from_text(d["mut_fail_text"]), d.get("pass_id", ""), d.get("fail_id", ""))


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]
    ratios: tuple[float, float, float]
    seed: int


@dataclass(frozen=True)
class ClassWeights:
    w_pass: float
    w_fail: float

    def for_label(self, label: str) -> float:
        return self.w_pass if label == PASS else self.w_fail


def build_pairs(corpus: Corpus, mutants: Sequence[tuple[str, str, Mutant]],
                tests: Iterable[UnitTest] | None = None,
                step_limit: int = DEFAULT_STEP_LIMIT) -> list[LabeledPair]:
    """One pair per test and per {original program, each mutant of an invoked method}.

    ``mutants`` holds (family, mutant id, Mutant) triples.
    """
    by_parent: dict[tuple[str, str], list[tuple[str, Mutant]]] = defaultdict(list)
    for family, mid, mutant in mutants:
        by_parent[(family, mutant.parent)].append((mid, mutant))
    parsed: dict[tuple[str, str], object] = {}
    pairs = []
    for test in (tests if tests is not None else corpus.all_tests()):
        fam = corpus.family(test.family)
        reference = fam.program
        base = extract_mut(test, reference)
        pairs.append(LabeledPair(f"{test.id}#orig", fam.name, test.id, test.source_text, base,
                                 label_pair(test, reference, reference, step_limit), "original", 0))
        offsets, acc = {}, 0
        for name in base.constituents:
            offsets[name] = acc
            acc += fam.methods[name].n_statements
        for name in base.constituents:
            for mid, mutant in by_parent.get((fam.name, name), ()):
                key = (fam.name, mid)
                if key not in parsed:
                    parsed[key] = parse_method(mutant.source, fam.methods[name].signatures)
                mutated = parsed[key]
                candidate = [mutated if m.name == name else m for m in reference]
                mut = extract_mut(test, candidate)
                buggy = tuple(sorted({offsets[name] + m.stmt for m in mutant.applied}))
                label = label_pair(test, candidate, reference, step_limit)
                pairs.append(LabeledPair(f"{test.id}#{mid}", fam.name, test.id, test.source_text, mut,
                                         label, "hom", mutant.order, mid, buggy))
    return pairs


def build_triplets(pairs: Iterable[LabeledPair]) -> list[Triplet]:
    """All m x n (pass, fail) combinations per test."""
    groups: dict[str, tuple[list[LabeledPair], list[LabeledPair]]] = {}
    for p in pairs:
        passing, failing = groups.setdefault(p.test_id, ([], []))
        (passing if p.label == PASS else failing).append(p)
    out = []
    for test_id, (passing, failing) in groups.items():
        for pp in passing:
            for fp in failing:
                out.append(Triplet(test_id, pp.family, pp.test_text, pp.mut, fp.mut, pp.id, fp.id))
    return out


def _partition_sizes(n: int, ratios: Sequence[float]) -> tuple[int, int, int]:
    n_val = math.floor(n * ratios[1] + 0.5)
    n_test = math.floor(n * ratios[2] + 0.5)
    return n - n_val - n_test, n_val, n_test


def split(pairs: Sequence, ratios=(0.90, 0.05, 0.05), seed: int = 0,
          stratify_by_family: bool = False) -> DatasetSplit:
    """Seeded shuffle then partition of pair ids; optionally per family."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    if stratify_by_family:
        strata: dict[str, list[str]] = defaultdict(list)
        for p in pairs:
            strata[p.family].append(p.id)
        groups = [strata[k] for k in sorted(strata)]
    else:
        groups = [[p.id for p in pairs]]
    rng = random.Random(seed)
    train, val, test = [], [], []
    for ids in groups:
        ids = list(ids)
        rng.shuffle(ids)
        n_train, n_val, _ = _partition_sizes(len(ids), ratios)
        train += ids[:n_train]
        val += ids[n_train:n_train + n_val]
        test += ids[n_train + n_val:]
    for name, part, r in (("train", train, ratios[0]), ("validation", val, ratios[1]), ("test", test, ratios[2])):
        if r > 0 and not part:
            raise InsufficientData(f"{name} split would be empty ({len(pairs)} items)")
    return DatasetSplit(tuple(train), tuple(val), tuple(test), ratios, seed)


def class_weights(pairs: Iterable) -> ClassWeights:
    """w_c = N / (2 N_c), so each class carries half the total weight."""
    labels = [p.label for p in pairs]
    n_pass, n_fail = labels.count(PASS), labels.count(FAIL)
    if n_pass == 0 or n_fail == 0:
        raise DegenerateClasses(f"need both classes, got {n_pass} pass / {n_fail} fail")
    n = n_pass + n_fail
    return ClassWeights(n / (2 * n_pass), n / (2 * n_fail))


# -- JSONL --------------------------------------------------------------

def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def save_pairs(path, pairs: Iterable[LabeledPair]) -> None:
    write_jsonl(path, (p.to_json() for p in pairs))


def load_pairs(path) -> list[LabeledPair]:
    return [LabeledPair.from_json(d) for d in read_jsonl(path)]


def save_triplets(path, triplets: Iterable[Triplet]) -> None:
    write_jsonl(path, (t.to_json() for t in triplets))


def load_triplets(path) -> list[Triplet]:
    return [Triplet.from_json(d) for d in read_jsonl(Path(path))]
