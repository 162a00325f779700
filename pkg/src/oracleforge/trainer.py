"""Two-phase training (joint embedding, then classification) and inference."""
from __future__ import annotations

import copy
import logging
import math
import random
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from .dataset.labeling import FAIL, PASS
from .dataset.pairs import (
    ClassWeights,
    InsufficientData,
    LabeledPair,
    Triplet,
    build_triplets,
    class_weights,
)
from .extractor import UnitTest, extract_mut, render_test_text
from .metrics import Metrics, confusion
from .minilang import SourceMethod
from .neural import (
    AdamW,
    ModelCheckpoint,
    ModelConfig,
    NonFinite,
    OracleModel,
    Vocab,
    collate,
    lexemes,
    margin_ranking_loss,
    weighted_cross_entropy,
)
from .neural.losses import FAIL_INDEX, PASS_INDEX

log = logging.getLogger(__name__)

LABEL_INDEX = {PASS: PASS_INDEX, FAIL: FAIL_INDEX}


@dataclass
class TrainConfig:
    phase1_lr: float = 1.34e-4
    phase2_lr: float = 1.34e-6
    batch_size: int = 16
    patience: int = 5
    max_epochs: int = 100
    seed: int = 0
    alpha: float = 0.2
    weight_decay: float = 0.01
    freeze_encoders: bool = False
    class_weights_source: str = "train"  # "train" or "uniform"
    phase1_val_fraction: float = 0.05
    device: str = "cpu"
    precision: str = "float32"  # parameter dtype while training; "float64" for exact work
    # architecture
    max_len: int = 256
    token_dim: int = 64
    embed_dim: int = 64
    heads: int = 4
    layers: int = 2
    ff_dim: int = 128
    hidden: tuple[int, ...] = (128, 32)

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not (self.phase1_lr > 0 and self.phase2_lr > 0):
            raise ValueError("learning rates must be positive")
        if self.batch_size < 1 or self.patience < 1 or self.max_epochs < 1:
            raise ValueError("batch_size, patience and max_epochs must be >= 1")
        if self.class_weights_source not in ("train", "uniform"):
            raise ValueError(f"class_weights_source must be 'train' or 'uniform', not {self.class_weights_source!r}")
        if not 0 < self.phase1_val_fraction < 1:
            raise ValueError("phase1_val_fraction must lie in (0, 1)")
        if self.device != "cpu":
            raise ValueError("only the cpu device is supported")
        if self.precision not in ("float32", "float64"):
            raise ValueError(f"precision must be 'float32' or 'float64', not {self.precision!r}")

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(vocab_size, self.max_len, self.token_dim, self.embed_dim, self.heads,
                           self.layers, self.ff_dim, self.hidden, self.precision)

    def to_json(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_mapping(cls, values: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown training options: {', '.join(sorted(unknown))}")
        return cls(**values)


@dataclass
class TrainReport:
    phase: int
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    stop_epoch: int = 0
    stop_reason: str = ""
    best_epoch: int = 0

    @property
    def best_val_loss(self) -> float:
        return self.val_losses[self.best_epoch - 1]

    def to_json(self, timings: bool = True) -> dict:
        d = asdict(self)
        if not timings:
            d.pop("epoch_seconds")
        return d


class EarlyStopping:
    """Stop once the validation loss has not improved for ``patience`` epochs."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.epoch = 0

    def update(self, val_loss: float) -> bool:
        """Record one epoch; True if it is a new best."""
        self.epoch += 1
        if val_loss < self.best:
            self.best = val_loss
            self.best_epoch = self.epoch
            return True
        return False

    @property
    def should_stop(self) -> bool:
        return self.epoch - self.best_epoch >= self.patience


class TextEncoder:
    """Memoized text -> token ids under one vocabulary."""

    def __init__(self, vocab: Vocab, max_len: int):
        self.vocab = vocab
        self.max_len = max_len
        self._cache: dict[str, tuple[list[int], bool]] = {}

    def __call__(self, text: str) -> list[int]:
        return self.encode(text)[0]

    def encode(self, text: str) -> tuple[list[int], bool]:
        hit = self._cache.get(text)
        if hit is None:
            hit = self.vocab.encode(text, self.max_len)
            self._cache[text] = hit
        return hit


def build_vocab(pairs: Sequence[LabeledPair]) -> Vocab:
    texts = []
    for p in pairs:
        texts += [p.test_text, p.mut_text]
    return Vocab.build(texts)


def new_model(vocab: Vocab, config: TrainConfig) -> OracleModel:
    torch.manual_seed(config.seed)
    return OracleModel(config.model_config(len(vocab)))


def split_triplets(triplets: Sequence[Triplet], val_fraction: float = 0.05, seed: int = 0):
    """Seeded train/validation split of triplets for phase 1."""
    order = list(range(len(triplets)))
    random.Random(f"{seed}:triplets").shuffle(order)
    n_val = max(1, math.floor(len(order) * val_fraction + 0.5))
    if len(order) - n_val < 1:
        raise InsufficientData(f"{len(order)} triplets cannot be split for phase 1")
    return [triplets[i] for i in order[n_val:]], [triplets[i] for i in order[:n_val]]


def batches(n: int, size: int, rng: random.Random, drop_last: bool) -> list[list[int]]:
    order = list(range(n))
    rng.shuffle(order)
    out = [order[i:i + size] for i in range(0, n, size)]
    # a lone short batch survives dropping so that tiny sets still train
    if drop_last and len(out) > 1 and len(out[-1]) < size:
        out.pop()
    return out


def _non_finite(phase: int, epoch: int, what: str) -> NonFinite:
    err = NonFinite(f"phase {phase}: {what} became non-finite in epoch {epoch}")
    err.epoch = epoch
    return err


def _run(phase: int, model: OracleModel, params, lr: float, config: TrainConfig, n_train: int,
         drop_last: bool, step: Callable[[list[int]], tuple[torch.Tensor, float]],
         val_loss: Callable[[], float], max_epochs: Optional[int] = None) -> TrainReport:
    """Epoch loop shared by both phases: early stopping and best-state restore.

    ``step`` returns the loss to differentiate and the per-item loss total
    used for the recorded epoch average.
    """
    opt = AdamW(params, lr=lr, weight_decay=config.weight_decay)
    rng = random.Random(f"{config.seed}:phase{phase}")
    stopper = EarlyStopping(config.patience)
    report = TrainReport(phase)
    best_state = copy.deepcopy(model.state_dict())
    limit = max_epochs or config.max_epochs
    for epoch in range(1, limit + 1):
        start = time.perf_counter()
        model.train()
        total, count = 0.0, 0
        for batch in batches(n_train, config.batch_size, rng, drop_last):
            opt.zero_grad()
            loss, item_total = step(batch)
            if not math.isfinite(loss.item()):
                raise _non_finite(phase, epoch, "training loss")
            loss.backward()
            try:
                opt.step()
            except NonFinite as err:
                raise _non_finite(phase, epoch, "a parameter update") from err
            total += item_total
            count += len(batch)
        v = val_loss()
        if not math.isfinite(v):
            raise _non_finite(phase, epoch, "validation loss")
        report.train_losses.append(total / count)
        report.val_losses.append(v)
        report.epoch_seconds.append(time.perf_counter() - start)
        if stopper.update(v):
            best_state = copy.deepcopy(model.state_dict())
        log.info("phase %d epoch %d: train %.6f val %.6f", phase, epoch, report.train_losses[-1], v)
        if stopper.should_stop:
            report.stop_reason = "patience"
            break
    else:
        report.stop_reason = "max_epochs"
    report.stop_epoch = len(report.val_losses)
    report.best_epoch = stopper.best_epoch
    model.load_state_dict(best_state)
    model.eval()
    return report


# -- phase 1 --------------------------------------------------------------

def _triplet_batch_loss(model: OracleModel, enc: TextEncoder, batch: Sequence[Triplet], alpha: float):
    t_ids, t_mask = collate([enc(t.test_text) for t in batch])
    m_ids, m_mask = collate([enc(t.mut_pass.concatenated_source) for t in batch]
                            + [enc(t.mut_fail.concatenated_source) for t in batch])
    d_t, _ = model.psi(t_ids, t_mask)
    d_m, _ = model.phi(m_ids, m_mask)
    return margin_ranking_loss(d_t, d_m[: len(batch)], d_m[len(batch):], alpha)


@torch.no_grad()
def triplet_loss(model: OracleModel, vocab: Vocab, triplets: Sequence[Triplet], alpha: float = 0.2,
                 enc: Optional[TextEncoder] = None, chunk: int = 64) -> float:
    """Mean per-triplet margin ranking loss."""
    if not triplets:
        raise InsufficientData("no triplets")
    enc = enc or TextEncoder(vocab, model.cfg.max_len)
    model.eval()
    total = sum(float(_triplet_batch_loss(model, enc, triplets[i:i + chunk], alpha))
                for i in range(0, len(triplets), chunk))
    return total / len(triplets)


def train_phase1(train_triplets: Sequence[Triplet], val_triplets: Sequence[Triplet], config: TrainConfig,
                 vocab: Vocab, model: Optional[OracleModel] = None,
                 max_epochs: Optional[int] = None) -> tuple[OracleModel, TrainReport]:
    """Fit the test (psi) and MUT (phi) encoders with the margin ranking loss.

    The optimized batch loss is the sum over the batch; recorded losses are
    per-triplet averages. Only encoder parameters are updated.
    """
    train_triplets, val_triplets = list(train_triplets), list(val_triplets)
    if not train_triplets or not val_triplets:
        raise InsufficientData("phase 1 needs non-empty training and validation triplets")
    model = model if model is not None else new_model(vocab, config)
    enc = TextEncoder(vocab, config.max_len)

    def step(batch):
        loss = _triplet_batch_loss(model, enc, [train_triplets[i] for i in batch], config.alpha)
        return loss, loss.item()

    report = _run(1, model, model.encoder_parameters(), config.phase1_lr, config, len(train_triplets),
                  drop_last=True, step=step,
                  val_loss=lambda: triplet_loss(model, vocab, val_triplets, config.alpha, enc),
                  max_epochs=max_epochs)
    return model, report


# -- phase 2 --------------------------------------------------------------

def _pair_logits(model: OracleModel, enc: TextEncoder, batch: Sequence[LabeledPair]):
    t_ids, t_mask = collate([enc(p.test_text) for p in batch])
    m_ids, m_mask = collate([enc(p.mut_text) for p in batch])
    logits, _, _ = model(t_ids, t_mask, m_ids, m_mask)
    return logits


def _labels(batch: Sequence[LabeledPair]) -> torch.Tensor:
    return torch.tensor([LABEL_INDEX[p.label] for p in batch], dtype=torch.long)


@torch.no_grad()
def pair_loss(model: OracleModel, vocab: Vocab, pairs: Sequence[LabeledPair], weights: ClassWeights,
              enc: Optional[TextEncoder] = None, chunk: int = 64) -> float:
    """Weighted cross-entropy over ``pairs``, normalized by the summed weights."""
    if not pairs:
        raise InsufficientData("no pairs")
    enc = enc or TextEncoder(vocab, model.cfg.max_len)
    model.eval()
    total = norm = 0.0
    for i in range(0, len(pairs), chunk):
        batch = pairs[i:i + chunk]
        total += float(weighted_cross_entropy(_pair_logits(model, enc, batch), _labels(batch), weights, "sum"))
        norm += sum(weights.for_label(p.label) for p in batch)
    return total / norm


@torch.no_grad()
def pass_probabilities(model: OracleModel, vocab: Vocab, pairs: Sequence[LabeledPair],
                       chunk: int = 64) -> np.ndarray:
    enc = TextEncoder(vocab, model.cfg.max_len)
    model.eval()
    out = []
    for i in range(0, len(pairs), chunk):
        logits = _pair_logits(model, enc, pairs[i:i + chunk])
        out.append(torch.softmax(logits, dim=-1)[:, PASS_INDEX].numpy())
    return np.concatenate(out) if out else np.zeros(0)


def predict_labels(model: OracleModel, vocab: Vocab, pairs: Sequence[LabeledPair]) -> list[str]:
    # argmax of a two-way softmax: pass wins ties exactly like torch.argmax (first index)
    return [PASS if p >= 0.5 else FAIL for p in pass_probabilities(model, vocab, pairs)]


def train_phase2(train_pairs: Sequence[LabeledPair], val_pairs: Sequence[LabeledPair], model: OracleModel,
                 config: TrainConfig, vocab: Vocab,
                 max_epochs: Optional[int] = None) -> tuple[OracleModel, TrainReport, ClassWeights]:
    """Train the classifier (and, unless frozen, fine-tune the encoders) with WCEL.

    Class weights come from the training split; the final short batch is kept.
    """
    train_pairs, val_pairs = list(train_pairs), list(val_pairs)
    if not train_pairs or not val_pairs:
        raise InsufficientData("phase 2 needs non-empty training and validation pairs")
    weights = class_weights(train_pairs)  # raises DegenerateClasses
    if config.class_weights_source == "uniform":
        weights = ClassWeights(1.0, 1.0)
    enc = TextEncoder(vocab, config.max_len)
    params = list(model.classifier.parameters()) if config.freeze_encoders else list(model.parameters())
    for p in model.encoder_parameters():
        p.requires_grad_(not config.freeze_encoders)

    def step(batch):
        items = [train_pairs[i] for i in batch]
        loss = weighted_cross_entropy(_pair_logits(model, enc, items), _labels(items), weights, "mean")
        return loss, loss.item() * len(items)

    try:
        report = _run(2, model, params, config.phase2_lr, config, len(train_pairs), drop_last=False, step=step,
                      val_loss=lambda: pair_loss(model, vocab, val_pairs, weights, enc), max_epochs=max_epochs)
    finally:
        for p in model.parameters():
            p.requires_grad_(True)
    return model, report, weights


# -- full fit -------------------------------------------------------------

@dataclass
class FitResult:
    model: OracleModel
    vocab: Vocab
    phase1: TrainReport
    phase2: TrainReport
    weights: ClassWeights
    n_triplets: int
    seconds: dict[str, float]

    def checkpoint(self, config: TrainConfig, metadata: Optional[dict] = None) -> ModelCheckpoint:
        meta = {"class_weights": [self.weights.w_pass, self.weights.w_fail], **(metadata or {})}
        return ModelCheckpoint.from_model(self.model, self.vocab, config.to_json(), meta)


def fit(train_pairs: Sequence[LabeledPair], val_pairs: Sequence[LabeledPair], config: TrainConfig,
        vocab: Optional[Vocab] = None) -> FitResult:
    """Vocabulary, phase 1 on training-split triplets, then phase 2 on pairs."""
    vocab = vocab or build_vocab(train_pairs)
    triplets = build_triplets(train_pairs)
    if not triplets:
        raise InsufficientData("training pairs yield no (pass, fail) triplets")
    t_train, t_val = split_triplets(triplets, config.phase1_val_fraction, config.seed)
    t0 = time.perf_counter()
    model, r1 = train_phase1(t_train, t_val, config, vocab)
    t1 = time.perf_counter()
    model, r2, weights = train_phase2(train_pairs, val_pairs, model, config, vocab)
    t2 = time.perf_counter()
    return FitResult(model, vocab, r1, r2, weights, len(triplets), {"phase1": t1 - t0, "phase2": t2 - t1})


# -- inference ------------------------------------------------------------

@dataclass
class OracleVerdict:
    label: str
    pass_probability: float
    fail_probability: float
    d_test: np.ndarray
    d_mut: np.ndarray
    # MUT-encoder attention, [layer][head] -> n x n
    attention: list = field(repr=False)
    mut_tokens: tuple[str, ...] = field(repr=False)
    truncated: bool = False
    millis: float = 0.0

    def to_json(self) -> dict:
        return {
            "label": self.label, "pass_probability": self.pass_probability,
            "fail_probability": self.fail_probability, "truncated": self.truncated,
            "millis": self.millis,
        }


class Oracle:
    """A loaded model answering pass/fail for (test, program)."""

    def __init__(self, model: OracleModel, vocab: Vocab):
        self.model = model.eval()
        self.vocab = vocab
        self.max_len = model.cfg.max_len

    @classmethod
    def from_checkpoint(cls, ckpt: ModelCheckpoint) -> "Oracle":
        return cls(ckpt.build_model(), ckpt.vocab)

    @torch.no_grad()
    def verdict_for_texts(self, test_text: str, mut_text: str) -> OracleVerdict:
        start = time.perf_counter()
        t_ids, t_trunc = self.vocab.encode(test_text, self.max_len)
        m_ids, m_trunc = self.vocab.encode(mut_text, self.max_len)
        ti, tm = collate([t_ids])
        mi, mm = collate([m_ids])
        d_t, _ = self.model.psi(ti, tm)
        d_m, maps = self.model.phi(mi, mm)
        probs = torch.softmax(self.model.classifier(d_t, d_m)[0], dim=-1)
        p_pass, p_fail = float(probs[PASS_INDEX]), float(probs[FAIL_INDEX])
        label = PASS if int(torch.argmax(probs)) == PASS_INDEX else FAIL
        attention = [[layer[0, h].numpy().copy() for h in range(layer.shape[1])] for layer in maps]
        tokens = tuple(lexemes(mut_text)[: len(m_ids)])
        millis = (time.perf_counter() - start) * 1e3
        return OracleVerdict(label, p_pass, p_fail, d_t[0].numpy().copy(), d_m[0].numpy().copy(), attention,
                             tokens, t_trunc or m_trunc, millis)

    def predict(self, test: UnitTest, program: Sequence[SourceMethod]) -> OracleVerdict:
        """Extract the MUT, encode both sides and classify. Raises AbsentMethodError."""
        start = time.perf_counter()
        mut = extract_mut(test, program)
        v = self.verdict_for_texts(render_test_text(test), mut.concatenated_source)
        v.millis = (time.perf_counter() - start) * 1e3
        return v


def predict(checkpoint: ModelCheckpoint, test: UnitTest, program: Sequence[SourceMethod]) -> OracleVerdict:
    return Oracle.from_checkpoint(checkpoint).predict(test, program)


# -- k-fold ---------------------------------------------------------------

@dataclass
class FoldResult:
    fold: int
    checkpoint: ModelCheckpoint
    metrics: Metrics
    val_loss: float
    validation_ids: tuple[str, ...]


def kfold_assignment(n: int, k: int, seed: int) -> list[list[int]]:
    """Seeded partition of range(n) into k folds whose sizes differ by at most one."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise InsufficientData(f"{n} items cannot fill {k} folds")
    order = list(range(n))
    random.Random(f"{seed}:kfold").shuffle(order)
    return [sorted(order[i::k]) for i in range(k)]


def kfold(pairs: Sequence[LabeledPair], k: int = 10, config: Optional[TrainConfig] = None,
          fit_fn: Callable = fit) -> tuple[list[FoldResult], FoldResult]:
    """Train on k-1 folds and validate on the remaining one, k times.

    Returns every fold's result and the one with the lowest validation loss.
    """
    config = config or TrainConfig()
    pairs = list(pairs)
    results = []
    for i, fold in enumerate(kfold_assignment(len(pairs), k, config.seed)):
        held = set(fold)
        val = [pairs[j] for j in fold]
        train = [p for j, p in enumerate(pairs) if j not in held]
        res = fit_fn(train, val, config)
        predicted = predict_labels(res.model, res.vocab, val)
        metrics = confusion(predicted, [p.label for p in val])
        results.append(FoldResult(i, res.checkpoint(config, {"fold": i}), metrics, res.phase2.best_val_loss,
                                  tuple(p.id for p in val)))
    best = min(results, key=lambda r: (r.val_loss, r.fold))
    return results, best
