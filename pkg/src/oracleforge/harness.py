"""Experiment drivers (within-corpus and cross-family), config loading and reports."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch

from .dataset import (
    Corpus,
    LabeledPair,
    build_pairs,
    build_triplets,
    load_corpus,
    load_mutants,
    load_pairs,
    mutate_corpus,
    split,
    synth_corpus,
)
from .dataset.labeling import FAIL, PASS
from .metrics import Metrics, compute_metrics, majority_baseline
from .mutator import Mutant
from .neural import ModelCheckpoint, lexemes, params_hash, save_checkpoint
from .plotting import plot_training_curves
from .trainer import Oracle, TrainConfig, TrainReport, fit, pass_probabilities

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

log = logging.getLogger(__name__)

SEED_ENV = "ORACLEFORGE_SEED"
# reference single-pair inference time on a datacenter GPU, echoed for comparison
REFERENCE_GPU_MS = 6.5


@dataclass
class CorpusConfig:
    n_families: int = 4
    methods_per_family: int = 12
    tests_per_method: int = 10
    mutant_order: int = 4
    mutants_per_method: int = 3
    seed: Optional[int] = None


@dataclass
class ExperimentConfig:
    mode: str = "within"  # "within" | "cross_family"
    out_dir: str = "runs/experiment"
    seed: Optional[int] = None
    split_seed: Optional[int] = None
    ratios: tuple[float, float, float] = (0.90, 0.05, 0.05)
    held_out: tuple[str, ...] = ()
    k_grid: str = "5:50:5"
    latency_samples: int = 100
    positive: str = PASS
    corpus_dir: Optional[str] = None
    mutants_file: Optional[str] = None
    dataset_dir: Optional[str] = None
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.mode not in ("within", "cross_family"):
            raise ValueError(f"mode must be 'within' or 'cross_family', not {self.mode!r}")
        self.ratios = tuple(float(r) for r in self.ratios)
        self.held_out = tuple(self.held_out)
        if self.mode == "cross_family" and not self.held_out:
            raise ValueError("cross_family mode needs at least one held-out family")
        if self.positive not in (PASS, FAIL):
            raise ValueError("positive class must be P or F")

    def seeds(self) -> dict[str, int]:
        base = self.seed if self.seed is not None else 0
        return {
            "corpus": self.corpus.seed if self.corpus.seed is not None else base,
            "split": self.split_seed if self.split_seed is not None else base,
            "train": self.train.seed,
        }

    def to_json(self) -> dict:
        d = asdict(self)
        d["train"] = self.train.to_json()
        d["ratios"] = list(self.ratios)
        d["held_out"] = list(self.held_out)
        return d


def _flat(section: dict, where: str) -> dict:
    for k, v in section.items():
        if isinstance(v, dict):
            raise ValueError(f"nested table [{where}.{k}] is not supported")
    return dict(section)


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None, env=None) -> ExperimentConfig:
    """Read a TOML config ([experiment], [corpus], [train] tables) and apply overrides.

    ``overrides`` uses ``section.key`` or bare experiment keys. The global seed
    falls back to the ``ORACLEFORGE_SEED`` environment variable.
    """
    env = os.environ if env is None else env
    doc: dict = {}
    if path is not None:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    unknown = set(doc) - {"experiment", "corpus", "train"}
    if unknown:
        raise ValueError(f"unknown config tables: {', '.join(sorted(unknown))}")
    exp = _flat(doc.get("experiment", {}), "experiment")
    corp = _flat(doc.get("corpus", {}), "corpus")
    train = _flat(doc.get("train", {}), "train")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        section, _, name = key.rpartition(".")
        {"": exp, "experiment": exp, "corpus": corp, "train": train}[section][name] = value
    if exp.get("seed") is None and env.get(SEED_ENV):
        exp["seed"] = int(env[SEED_ENV])
    known = {f.name for f in fields(ExperimentConfig)} - {"corpus", "train"}
    bad = set(exp) - known
    if bad:
        raise ValueError(f"unknown experiment options: {', '.join(sorted(bad))}")
    bad = set(corp) - {f.name for f in fields(CorpusConfig)}
    if bad:
        raise ValueError(f"unknown corpus options: {', '.join(sorted(bad))}")
    if "seed" not in train and exp.get("seed") is not None:
        train["seed"] = exp["seed"]
    return ExperimentConfig(**exp, corpus=CorpusConfig(**corp), train=TrainConfig.from_mapping(train))


# -- data -----------------------------------------------------------------

@dataclass
class ExperimentData:
    corpus: Corpus
    mutants: list[tuple[str, str, Mutant]]
    pairs: list[LabeledPair]
    seconds: float

    def mutant(self, family: str, mutant_id: str) -> Mutant:
        for f, mid, m in self.mutants:
            if f == family and mid == mutant_id:
                return m
        raise KeyError(f"no mutant {family}/{mutant_id}")


def prepare_data(cfg: ExperimentConfig) -> ExperimentData:
    """Load or synthesize the corpus and mutants, then label every pair."""
    start = time.perf_counter()
    seeds = cfg.seeds()
    c = cfg.corpus
    if cfg.corpus_dir:
        corpus = load_corpus(cfg.corpus_dir)
    else:
        corpus = synth_corpus(c.n_families, c.methods_per_family, c.tests_per_method, seed=seeds["corpus"])
    if cfg.mutants_file:
        mutants = load_mutants(cfg.mutants_file)
    else:
        mutants = mutate_corpus(corpus, c.mutant_order, c.mutants_per_method, seeds["corpus"])
    if cfg.dataset_dir:
        pairs = load_pairs(Path(cfg.dataset_dir) / "pairs.jsonl")
    else:
        pairs = build_pairs(corpus, mutants)
    return ExperimentData(corpus, mutants, pairs, time.perf_counter() - start)


def program_for_pair(data_corpus: Corpus, mutants: dict, pair: LabeledPair):
    """The program a pair was labeled against: reference, or with one method mutated."""
    fam = data_corpus.family(pair.family)
    if pair.origin == "original":
        return fam.program
    from .minilang import parse_method

    mutant = mutants[(pair.family, pair.mutant_id)]
    mutated = parse_method(mutant.source, fam.methods[mutant.parent].signatures)
    return [mutated if m.name == mutant.parent else m for m in fam.program]


# -- reporting ------------------------------------------------------------

def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False)


def report_hash(report: dict) -> str:
    """SHA-256 of the report minus wall-clock timings, the output directory and the hash itself."""
    body = {k: v for k, v in report.items() if k not in ("timings", "report_hash")}
    if isinstance(body.get("config"), dict):
        body["config"] = {k: v for k, v in body["config"].items() if k != "out_dir"}
    return hashlib.sha256(canonical_json(body).encode()).hexdigest()


def _metrics_json(m: Metrics) -> dict:
    return m.to_json()


def write_verdicts(path, pairs: Sequence[LabeledPair], predicted: Sequence[str], probs) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["pair_id", "family", "gold", "predicted", "pass_probability"])
        for p, y, pr in zip(pairs, predicted, probs):
            out.writerow([p.id, p.family, p.label, y, repr(float(pr))])
    return Path(path)


def read_verdicts(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_family_metrics(path, per_family: dict[str, Metrics]) -> Path:
    cols = ["family", "tp", "fp", "tn", "fn", "total", "accuracy", "precision", "recall", "f1"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(cols)
        for fam, m in per_family.items():
            j = m.to_json()
            out.writerow([fam] + ["" if j[c] is None else j[c] for c in cols[1:]])
    return Path(path)


def vocab_overlap(texts: Sequence[str], vocab_tokens) -> float:
    """Fraction of distinct lexemes in ``texts`` that the vocabulary knows."""
    seen = set()
    for t in texts:
        seen.update(lexemes(t))
    if not seen:
        return 1.0
    known = set(vocab_tokens)
    return len(seen & known) / len(seen)


def _pair_texts(pairs: Sequence[LabeledPair]) -> list[str]:
    return [t for p in pairs for t in (p.test_text, p.mut_text)]


def evaluate(model, vocab, pairs: Sequence[LabeledPair], positive: str = PASS):
    probs = pass_probabilities(model, vocab, pairs)
    predicted = [PASS if p >= 0.5 else FAIL for p in probs]
    overall, per_family = compute_metrics(predicted, [p.label for p in pairs], [p.family for p in pairs],
                                          positive)
    return predicted, probs, overall, per_family


def measure_latency(oracle: Oracle, data: ExperimentData, pairs: Sequence[LabeledPair], n: int) -> float:
    """Mean wall milliseconds of the full predict pipeline over up to ``n`` pairs."""
    mutants = {(f, mid): m for f, mid, m in data.mutants}
    sample = list(pairs)[:n]
    jobs = [(data.corpus.test(p.family, p.test_id), program_for_pair(data.corpus, mutants, p)) for p in sample]
    if not jobs:
        return float("nan")
    oracle.predict(*jobs[0])  # warm-up
    times = []
    for test, program in jobs:
        t0 = time.perf_counter()
        oracle.predict(test, program)
        times.append((time.perf_counter() - t0) * 1e3)
    return float(np.mean(times))


def _training_json(r1: TrainReport, r2: TrainReport) -> dict:
    return {"phase1": r1.to_json(timings=False), "phase2": r2.to_json(timings=False)}


def _dataset_json(pairs: Sequence[LabeledPair], corpus: Corpus) -> dict:
    return {
        "n_families": len(corpus.families),
        "n_methods": sum(len(f.methods) for f in corpus.families.values()),
        "n_tests": len(corpus.all_tests()),
        "n_pairs": len(pairs),
        "n_pass": sum(p.label == PASS for p in pairs),
        "n_fail": sum(p.label == FAIL for p in pairs),
        "n_triplets": len(build_triplets(pairs)),
    }


def _train_and_score(cfg: ExperimentConfig, data: ExperimentData, pairs: Sequence[LabeledPair], out: Path):
    seeds = cfg.seeds()
    sp = split(pairs, cfg.ratios, seeds["split"], stratify_by_family=True)
    by_id = {p.id: p for p in pairs}
    train = [by_id[i] for i in sp.train]
    val = [by_id[i] for i in sp.validation]
    test = [by_id[i] for i in sp.test]
    result = fit(train, val, cfg.train)
    ckpt = result.checkpoint(cfg.train, {"seeds": seeds, "mode": cfg.mode})
    save_checkpoint(ckpt, out / "model.json")
    model = ckpt.build_model()  # score exactly what was saved
    plot_training_curves([result.phase1, result.phase2], out / "training_curves.svg")
    return sp, train, val, test, result, ckpt, model


def _finish(report: dict, out: Path) -> dict:
    report["report_hash"] = report_hash(report)
    (out / "report.json").write_text(canonical_json(report) + "\n", encoding="utf-8")
    return report


def run_within_experiment(cfg: ExperimentConfig, data: Optional[ExperimentData] = None) -> dict:
    """Stratified 90/5/5 split, two-phase training, test metrics and baseline."""
    torch.set_num_threads(1)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    data = data or prepare_data(cfg)
    sp, train, val, test, result, ckpt, model = _train_and_score(cfg, data, data.pairs, out)
    predicted, probs, overall, per_family = evaluate(model, ckpt.vocab, test, cfg.positive)
    write_verdicts(out / "verdicts.csv", test, predicted, probs)
    write_family_metrics(out / "metrics_per_family.csv", per_family)
    base_label, base_acc = majority_baseline([p.label for p in test])
    latency = measure_latency(Oracle(model, ckpt.vocab), data, test, cfg.latency_samples)
    report = {
        "mode": "within",
        "config": cfg.to_json(),
        "seeds": cfg.seeds(),
        "dataset": {**_dataset_json(data.pairs, data.corpus),
                    "split": {"train": len(train), "validation": len(val), "test": len(test)}},
        "metrics": _metrics_json(overall),
        "per_family": {f: _metrics_json(m) for f, m in per_family.items()},
        "baseline": {"label": base_label, "accuracy": base_acc},
        "training": _training_json(result.phase1, result.phase2),
        "checkpoint_params_hash": params_hash(ckpt),
        "timings": {
            "data_seconds": data.seconds,
            "phase1_seconds": result.seconds["phase1"],
            "phase2_seconds": result.seconds["phase2"],
            "phase1_epoch_seconds": result.phase1.epoch_seconds,
            "phase2_epoch_seconds": result.phase2.epoch_seconds,
            "total_seconds": time.perf_counter() - t0,
            "mean_inference_ms": latency,
            "reference_gpu_inference_ms": REFERENCE_GPU_MS,
        },
    }
    return _finish(report, out)


def run_cross_family_experiment(cfg: ExperimentConfig, data: Optional[ExperimentData] = None) -> dict:
    """Train without the held-out families; score them next to the within-corpus split."""
    torch.set_num_threads(1)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    data = data or prepare_data(cfg)
    families = set(data.corpus.families)
    held = set(cfg.held_out)
    if held - families:
        raise ValueError(f"unknown held-out families: {', '.join(sorted(held - families))}")
    if len(families - held) < 1:
        raise ValueError("no training families left after holding out")
    inside = [p for p in data.pairs if p.family not in held]
    outside = [p for p in data.pairs if p.family in held]
    sp, train, val, test, result, ckpt, model = _train_and_score(cfg, data, inside, out)
    w_pred, w_probs, within, _ = evaluate(model, ckpt.vocab, test, cfg.positive)
    h_pred, h_probs, held_m, per_family = evaluate(model, ckpt.vocab, outside, cfg.positive)
    write_verdicts(out / "verdicts.csv", outside, h_pred, h_probs)
    write_verdicts(out / "verdicts_within.csv", test, w_pred, w_probs)
    write_family_metrics(out / "metrics_per_family.csv", per_family)

    def delta(a, b):
        return None if a is None or b is None else a - b

    row = {
        "precision": held_m.precision, "recall": held_m.recall,
        "delta_precision": delta(held_m.precision, within.precision),
        "delta_recall": delta(held_m.recall, within.recall),
        "vocab_overlap": vocab_overlap(_pair_texts(outside), ckpt.vocab.tokens),
        "within_vocab_overlap": vocab_overlap(_pair_texts(test), ckpt.vocab.tokens),
    }
    with open(out / "cross_family.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(row))
        w.writerow(["" if v is None else v for v in row.values()])
    latency = measure_latency(Oracle(model, ckpt.vocab), data, outside, cfg.latency_samples)
    report = {
        "mode": "cross_family",
        "config": cfg.to_json(),
        "seeds": cfg.seeds(),
        "held_out": sorted(held),
        "dataset": {**_dataset_json(data.pairs, data.corpus), "held_out_pairs": len(outside),
                    "split": {"train": len(train), "validation": len(val), "test": len(test)}},
        "within": _metrics_json(within),
        "held_out_metrics": _metrics_json(held_m),
        "per_family": {f: _metrics_json(m) for f, m in per_family.items()},
        "cross_family": row,
        "baseline": dict(zip(("label", "accuracy"), majority_baseline([p.label for p in outside]))),
        "training": _training_json(result.phase1, result.phase2),
        "checkpoint_params_hash": params_hash(ckpt),
        "timings": {
            "data_seconds": data.seconds,
            "phase1_seconds": result.seconds["phase1"],
            "phase2_seconds": result.seconds["phase2"],
            "total_seconds": time.perf_counter() - t0,
            "mean_inference_ms": latency,
            "reference_gpu_inference_ms": REFERENCE_GPU_MS,
        },
    }
    return _finish(report, out)


def run_experiment(cfg: ExperimentConfig, data: Optional[ExperimentData] = None) -> dict:
    if cfg.mode == "within":
        return run_within_experiment(cfg, data)
    return run_cross_family_experiment(cfg, data)
