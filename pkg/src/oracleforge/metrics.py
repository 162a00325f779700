"""Confusion-matrix metrics with a configurable positive class (default: pass)."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

PASS, FAIL = "P", "F"


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int
    positive: str = PASS

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> Optional[float]:
        return (self.tp + self.tn) / self.total if self.total else None

    @property
    def precision(self) -> Optional[float]:
        d = self.tp + self.fp
        return self.tp / d if d else None

    @property
    def recall(self) -> Optional[float]:
        d = self.tp + self.fn
        return self.tp / d if d else None

    @property
    def f1(self) -> Optional[float]:
        p, r = self.precision, self.recall
        if p is None or r is None or p + r == 0:
            return None
        return 2 * p * r / (p + r)

    def __add__(self, other: "Metrics") -> "Metrics":
        if self.positive != other.positive:
            raise ValueError("cannot add metrics with different positive classes")
        return Metrics(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn, self.positive)

    def to_json(self) -> dict:
        d = asdict(self)
        d.update(total=self.total, accuracy=self.accuracy, precision=self.precision,
                 recall=self.recall, f1=self.f1)
        return d


def confusion(predicted: Sequence[str], gold: Sequence[str], positive: str = PASS) -> Metrics:
    if len(predicted) != len(gold):
        raise ValueError(f"{len(predicted)} predictions for {len(gold)} gold labels")
    tp = fp = tn = fn = 0
    for p, g in zip(predicted, gold):
        if p == positive:
            if g == positive:
                tp += 1
            else:
                fp += 1
        elif g == positive:
            fn += 1
        else:
            tn += 1
    return Metrics(tp, fp, tn, fn, positive)


def compute_metrics(predicted: Sequence[str], gold: Sequence[str], families: Sequence[str] | None = None,
                    positive: str = PASS) -> tuple[Metrics, dict[str, Metrics]]:
    """Overall metrics plus a per-family breakdown (empty if no families given)."""
    if not gold:
        raise EmptyInput("no verdicts to score")
    overall = confusion(predicted, gold, positive)
    per_family: dict[str, Metrics] = {}
    if families is not None:
        groups: dict[str, tuple[list, list]] = defaultdict(lambda: ([], []))
        for p, g, f in zip(predicted, gold, families):
            groups[f][0].append(p)
            groups[f][1].append(g)
        per_family = {f: confusion(ps, gs, positive) for f, (ps, gs) in sorted(groups.items())}
    return overall, per_family


def majority_baseline(gold: Sequence[str]) -> tuple[str, float]:
    """Most frequent label of ``gold`` and the accuracy of always predicting it."""
    gold = list(gold)
    if not gold:
        raise EmptyInput("no labels")
    label = PASS if gold.count(PASS) > gold.count(FAIL) else FAIL
    return label, gold.count(label) / len(gold)
