"""Mutant generation over a corpus and dataset directory assembly."""
from __future__ import annotations

import json
import random
from pathlib import Path

from ..mutator import Mutant, NoMutant, generate_hom
from .corpus import Corpus
from .labeling import FAIL, PASS
from .pairs import build_pairs, build_triplets, read_jsonl, save_pairs, save_triplets, write_jsonl


def mutate_family(corpus: Corpus, family: str, order: int, per_method: int, seed: int) -> list[tuple[str, str, Mutant]]:
    """``per_method`` distinct HOMs per method, orders drawn from 1..order."""
    fam = corpus.family(family)
    rng = random.Random(f"{seed}:{family}")
    out = []
    for name, method in fam.methods.items():
        seen = {method.source}
        attempts = 0
        k = 0
        while k < per_method and attempts < per_method * 5:
            attempts += 1
            try:
                mutant = generate_hom(method, rng.randint(1, order), random.Random(rng.getrandbits(64)), shuffle=True)
            except NoMutant:
                break
            if mutant.source in seen:
                continue
            seen.add(mutant.source)
            out.append((family, f"{name}~{k}", mutant))
            k += 1
    return out


def mutate_corpus(corpus: Corpus, order: int, per_method: int, seed: int, families=None):
    out = []
    for name in families or corpus.families:
        out.extend(mutate_family(corpus, name, order, per_method, seed))
    return out


def save_mutants(path, mutants) -> None:
    write_jsonl(path, ({"family": f, "id": mid, **m.to_json()} for f, mid, m in mutants))


def load_mutants(path) -> list[tuple[str, str, Mutant]]:
    return [(d["family"], d["id"], Mutant.from_json(d)) for d in read_jsonl(path)]


def build_dataset(corpus: Corpus, mutants, out_dir, seed: int = 0) -> dict:
    """Label every pair, write pairs.jsonl / triplets.jsonl / dataset.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pairs = build_pairs(corpus, mutants)
    triplets = build_triplets(pairs)
    save_pairs(out / "pairs.jsonl", pairs)
    save_triplets(out / "triplets.jsonl", triplets)
    summary = {
        "seed": seed,
        "families": sorted(corpus.families),
        "n_tests": len(corpus.all_tests()),
        "n_mutants": len(mutants),
        "n_pairs": len(pairs),
        "n_pass": sum(p.label == PASS for p in pairs),
        "n_fail": sum(p.label == FAIL for p in pairs),
        "n_triplets": len(triplets),
    }
    (out / "dataset.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
