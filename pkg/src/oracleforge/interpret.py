"""Attention analysis, bug-localization curves, LDA separation and heatmaps.

Attended tokens are chosen per attention row (the top ``ceil(k% * n)``
weights, ties to the lower index) and merged by (token, index). A statement
counts as attended when more than k% of its tokens are attended; a statement
whose tokens are all attended always counts, which keeps ``k = 100``
meaningful.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Hashable, Mapping, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .dataset.pairs import DegenerateClasses

ROW_SUM_TOL = 1e-6
MAX_HEATMAP = 200
LDA_EPS = 1e-6
LDA_BINS = 64


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class AttentionMatrix:
    weights: np.ndarray
    tokens: tuple[str, ...]
    stmt_spans: tuple[int, ...] = ()  # statement id of every token (empty: unknown)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "stmt_spans", tuple(self.stmt_spans))
        n = len(self.tokens)
        if w.ndim != 2 or w.shape != (n, n) or n < 1:
            raise ValueError(f"attention must be n x n with n = {n} tokens, got shape {w.shape}")
        if (w < 0).any() or not np.allclose(w.sum(axis=1), 1.0, atol=ROW_SUM_TOL, rtol=0):
            raise ValueError("attention rows must be non-negative and sum to 1")
        if self.stmt_spans and len(self.stmt_spans) != n:
            raise ValueError("stmt_spans must give one statement id per token")

    @property
    def n(self) -> int:
        return len(self.tokens)

    def statement_tokens(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for i, s in enumerate(self.stmt_spans):
            out.setdefault(s, []).append(i)
        return out


@dataclass(frozen=True)
class AttentionReport:
    atkn: frozenset  # of (token, index)
    asmt: frozenset  # of statement ids
    k: float

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "attended_tokens": [[t, i] for t, i in sorted(self.atkn, key=lambda x: x[1])],
            "attended_statements": sorted(self.asmt),
        }


def collapse_attention(per_layer_per_head: Sequence[Sequence[np.ndarray]], tokens: Sequence[str],
                       stmt_spans: Sequence[int] = ()) -> AttentionMatrix:
    """Head-mean of the final layer, rows renormalized to sum to one."""
    if not per_layer_per_head or not per_layer_per_head[-1]:
        raise ValueError("need at least one layer with one head")
    mean = np.mean([np.asarray(h, dtype=np.float64) for h in per_layer_per_head[-1]], axis=0)
    sums = mean.sum(axis=1, keepdims=True)
    mean = np.divide(mean, sums, out=np.full_like(mean, 1.0 / mean.shape[1]), where=sums > 0)
    return AttentionMatrix(mean, tuple(tokens), tuple(stmt_spans))


def _check_k(k: float) -> Fraction:
    if not 0 < k <= 100:
        raise ValueError(f"k must lie in (0, 100], got {k}")
    return Fraction(str(k)) / 100


def top_count(k: float, n: int) -> int:
    """ceil(k% of n), computed exactly."""
    return math.ceil(_check_k(k) * n)


def attention_analysis(sa: AttentionMatrix, k: float) -> AttentionReport:
    frac = _check_k(k)
    m = top_count(k, sa.n)
    chosen: set[int] = set()
    for row in sa.weights:
        # stable sort on -weight keeps lower indices first among ties
        chosen.update(np.argsort(-row, kind="stable")[:m].tolist())
    atkn = frozenset((sa.tokens[i], i) for i in chosen)
    asmt = set()
    for sid, idx in sa.statement_tokens().items():
        hits = sum(1 for i in idx if i in chosen)
        if hits > frac * len(idx) or hits == len(idx):
            asmt.add(sid)
    return AttentionReport(atkn, frozenset(asmt), k)


def localization_curve(reports: Mapping[float, Mapping[str, AttentionReport]],
                       ground_truth: Mapping[str, Sequence[int]],
                       k_grid: Sequence[float]) -> list[tuple[float, float]]:
    """Per k: percentage of pairs with at least one buggy statement attended."""
    pair_ids = sorted(ground_truth)
    if not pair_ids:
        raise ValueError("no pairs")
    curve = []
    for k in k_grid:
        by_pair = reports[k]
        hit = sum(1 for pid in pair_ids if by_pair[pid].asmt & set(ground_truth[pid]))
        curve.append((k, 100.0 * hit / len(pair_ids)))
    return curve


def parse_k_grid(spec: str) -> list[float]:
    """``"5:50:5"`` -> [5, 10, ..., 50]; ``"5,10,20"`` -> [5, 10, 20]."""
    if ":" in spec:
        lo, hi, step = (float(x) for x in spec.split(":"))
        if step <= 0 or lo > hi:
            raise ValueError(f"bad k grid {spec!r}")
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        grid = [lo + i * step for i in range(n)]
    else:
        grid = [float(x) for x in spec.split(",") if x.strip()]
    out = [int(k) if float(k).is_integer() else k for k in grid]
    for k in out:
        _check_k(k)
    return out


# -- LDA ------------------------------------------------------------------

@dataclass
class LdaProjection:
    w: np.ndarray
    projections: np.ndarray
    labels: list
    classes: tuple  # (class 0, class 1); w points from class 0 toward class 1
    means: tuple[float, float]
    variances: tuple[float, float]
    overlap: float
    edges: np.ndarray = field(repr=False)
    hist0: np.ndarray = field(repr=False)
    hist1: np.ndarray = field(repr=False)

    def to_json(self) -> dict:
        return {
            "classes": [str(c) for c in self.classes], "w": self.w.tolist(),
            "means": list(self.means), "variances": list(self.variances), "overlap": self.overlap,
            "n": [int(sum(1 for l in self.labels if l == c)) for c in self.classes],
        }


def fisher_criterion(w: np.ndarray, x0: np.ndarray, x1: np.ndarray) -> float:
    """(w . (mu1 - mu0))^2 / w^T S_W w."""
    d = x1.mean(axis=0) - x0.mean(axis=0)
    c0, c1 = x0 - x0.mean(axis=0), x1 - x1.mean(axis=0)
    sw = c0.T @ c0 + c1.T @ c1
    return float((w @ d) ** 2 / (w @ sw @ w))


def overlap_coefficient(a: np.ndarray, b: np.ndarray, bins: int = LDA_BINS):
    """Shared area of two density histograms over their joint range."""
    lo, hi = float(min(a.min(), b.min())), float(max(a.max(), b.max()))
    if hi <= lo:
        edges = np.array([lo, lo])
        return 1.0, edges, np.ones(1), np.ones(1)
    edges = np.linspace(lo, hi, bins + 1)
    h0, _ = np.histogram(a, bins=edges, density=True)
    h1, _ = np.histogram(b, bins=edges, density=True)
    width = (hi - lo) / bins
    return float(np.minimum(h0, h1).sum() * width), edges, h0, h1


def lda_project(embeddings, labels: Sequence[Hashable], eps: float = LDA_EPS, bins: int = LDA_BINS,
                classes: Optional[tuple] = None) -> LdaProjection:
    """Two-class Fisher discriminant: w ~ (S_W + eps*s*I)^-1 (mu1 - mu0), |w| = 1.

    The ridge is scaled by s, the mean within-class variance per dimension, so
    rescaling all embeddings leaves the direction (and the overlap) unchanged.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    labels = list(labels)
    if x.ndim != 2 or x.shape[0] != len(labels) or x.shape[1] < 1:
        raise ValueError("embeddings must be an (instances x d) array aligned with labels")
    classes = tuple(classes) if classes is not None else tuple(sorted(set(labels), key=str))
    if len(classes) != 2 or set(labels) - set(classes):
        raise DegenerateClasses(f"need exactly two classes, got {sorted(set(labels), key=str)}")
    mask1 = np.array([l == classes[1] for l in labels])
    x0, x1 = x[~mask1], x[mask1]
    if len(x0) < 2 or len(x1) < 2:
        raise DegenerateClasses(f"need >= 2 instances per class, got {len(x0)} and {len(x1)}")
    mu0, mu1 = x0.mean(axis=0), x1.mean(axis=0)
    c0, c1 = x0 - mu0, x1 - mu1
    sw = c0.T @ c0 + c1.T @ c1
    d = x.shape[1]
    scale = np.trace(sw) / d
    ridge = eps * (scale if scale > 0 else 1.0)
    diff = mu1 - mu0
    w = np.linalg.solve(sw + ridge * np.eye(d), diff)
    norm = np.linalg.norm(w)
    if not np.isfinite(norm) or norm == 0:
        # indistinguishable means: fall back to the first axis
        w = np.zeros(d)
        w[0] = 1.0
    else:
        w = w / norm
    proj = x @ w
    p0, p1 = proj[~mask1], proj[mask1]
    overlap, edges, h0, h1 = overlap_coefficient(p0, p1, bins)
    return LdaProjection(w, proj, labels, classes, (float(p0.mean()), float(p1.mean())),
                         (float(p0.var()), float(p1.var())), overlap, edges, h0, h1)


# -- heatmaps -------------------------------------------------------------

def gray_levels(weights: np.ndarray) -> np.ndarray:
    """0..255 per cell: weight 0 -> 255 (white), the row maximum -> 0 (black)."""
    w = np.asarray(weights, dtype=np.float64)
    rmax = w.max(axis=1, keepdims=True)
    rel = np.divide(w, rmax, out=np.zeros_like(w), where=rmax > 0)
    return np.rint(255 * (1 - rel)).astype(int)


def write_weights_csv(sa: AttentionMatrix, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["token", *[f"{i}:{t}" for i, t in enumerate(sa.tokens)]])
        for i, row in enumerate(sa.weights):
            out.writerow([f"{i}:{sa.tokens[i]}", *[repr(float(v)) for v in row]])
    return path


def read_weights_csv(path) -> tuple[np.ndarray, list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    tokens = [h.split(":", 1)[1] for h in rows[0][1:]]
    return np.array([[float(v) for v in r[1:]] for r in rows[1:]]), tokens


def emit_heatmap(sa: AttentionMatrix, path, cell: int = 14) -> tuple[Path, Path]:
    """Grayscale SVG heatmap (row-normalized) plus a CSV of the raw weights."""
    if sa.n > MAX_HEATMAP:
        raise TooLarge(f"{sa.n} tokens exceed the heatmap cap of {MAX_HEATMAP}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    levels = gray_levels(sa.weights)
    margin = 8 + 7 * max(len(t) for t in sa.tokens)
    size = margin + cell * sa.n + 4
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}" font-family="monospace" font-size="10">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
    ]
    for i, tok in enumerate(sa.tokens):
        t = escape(tok)
        y = margin + cell * i + cell * 0.75
        x = margin + cell * i + cell * 0.75
        parts.append(f'<text class="row-label" x="{margin - 4}" y="{y:.1f}" text-anchor="end">{t}</text>')
        parts.append(f'<text class="col-label" x="{x:.1f}" y="{margin - 4}" '
                     f'transform="rotate(-90 {x:.1f} {margin - 4})">{t}</text>')
    for i in range(sa.n):
        for j in range(sa.n):
            g = levels[i, j]
            parts.append(f'<rect class="cell" data-row="{i}" data-col="{j}" x="{margin + cell * j}" '
                         f'y="{margin + cell * i}" width="{cell}" height="{cell}" fill="rgb({g},{g},{g})"/>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path, write_weights_csv(sa, path.with_suffix(".csv"))


# -- model-facing helpers ---------------------------------------------------

def attention_for(oracle, test_text: str, mut) -> tuple[AttentionMatrix, object]:
    """Collapsed MUT-encoder attention for one (test text, ExtractedMUT)."""
    verdict = oracle.verdict_for_texts(test_text, mut.concatenated_source)
    n = len(verdict.mut_tokens)
    sa = collapse_attention(verdict.attention, verdict.mut_tokens, mut.stmt_spans[:n])
    return sa, verdict


def explain_pair(oracle, pair, k: float):
    """(attention matrix, attention report, verdict) for a labeled pair."""
    sa, verdict = attention_for(oracle, pair.test_text, pair.mut)
    return sa, attention_analysis(sa, k), verdict


def localize(oracle, pairs, k_grid: Sequence[float]):
    """Localization curve over ``pairs`` plus the per-k, per-pair reports behind it."""
    matrices = {p.id: attention_for(oracle, p.test_text, p.mut)[0] for p in pairs}
    reports = {k: {pid: attention_analysis(sa, k) for pid, sa in matrices.items()} for k in k_grid}
    truth = {p.id: list(p.buggy_stmts) for p in pairs}
    return localization_curve(reports, truth, k_grid), reports
