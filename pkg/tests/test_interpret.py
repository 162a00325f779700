from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracleforge.dataset.pairs import DegenerateClasses
from oracleforge.interpret import (
    AttentionMatrix,
    AttentionReport,
    TooLarge,
    attention_analysis,
    collapse_attention,
    emit_heatmap,
    fisher_criterion,
    gray_levels,
    lda_project,
    localization_curve,
    overlap_coefficient,
    parse_k_grid,
    read_weights_csv,
    top_count,
)

K_GRID = list(range(5, 101, 5))


def toks(n):
    return tuple(f"t{i}" for i in range(n))


def random_stochastic(rng, n, ties=False):
    if ties:
        w = rng.integers(0, 4, size=(n, n)).astype(float)
        w[w.sum(axis=1) == 0, 0] = 1.0
    else:
        w = rng.random((n, n)) ** 3
    return w / w.sum(axis=1, keepdims=True)


def reference_analysis(weights, spans, k):
    """Rank counting: j is picked in a row iff fewer than m entries precede it
    (strictly larger weight, or equal weight at a lower index)."""
    n = len(weights)
    m = -(-k * n // 100)  # ceil for integer k
    chosen = set()
    for row in weights:
        for j in range(n):
            ahead = sum(1 for i in range(n) if row[i] > row[j] or (row[i] == row[j] and i < j))
            if ahead < m:
                chosen.add(j)
    stmts = {}
    for i, s in enumerate(spans):
        stmts.setdefault(s, []).append(i)
    asmt = set()
    for s, idx in stmts.items():
        hits = len(set(idx) & chosen)
        if Fraction(hits) > Fraction(k, 100) * len(idx) or hits == len(idx):
            asmt.add(s)
    return chosen, asmt


# -- collapse ---------------------------------------------------------------

def test_collapse_single_head_identity():
    w = np.array([[0.25, 0.75], [0.6, 0.4]])
    sa = collapse_attention([[w]], ["a", "b"])
    assert np.array_equal(sa.weights, w)


def test_collapse_two_heads_uniform():
    sa = collapse_attention([[np.zeros((2, 2))], [np.eye(2), np.eye(2)[::-1]]], ["a", "b"])
    assert np.array_equal(sa.weights, np.full((2, 2), 0.5))


def test_collapse_rows_sum_to_one():
    rng = np.random.default_rng(0)
    for n in (1, 3, 9):
        heads = [random_stochastic(rng, n) for _ in range(4)]
        sa = collapse_attention([heads], toks(n))
        assert np.allclose(sa.weights.sum(axis=1), 1.0, atol=1e-12)


def test_attention_matrix_validation():
    with pytest.raises(ValueError):
        AttentionMatrix(np.array([[0.5, 0.4], [0.5, 0.5]]), ("a", "b"))
    with pytest.raises(ValueError):
        AttentionMatrix(np.ones((2, 3)) / 3, ("a", "b"))
    with pytest.raises(ValueError):
        AttentionMatrix(np.eye(2), ("a", "b"), (0,))


# -- attention analysis -----------------------------------------------------

def test_two_by_two_example():
    sa = AttentionMatrix(np.array([[0.9, 0.1], [0.2, 0.8]]), ("tok0", "tok1"), (0, 0))
    report = attention_analysis(sa, 50)
    assert report.atkn == {("tok0", 0), ("tok1", 1)}


def test_uniform_k100_saturates():
    n = 7
    sa = AttentionMatrix(np.full((n, n), 1 / n), toks(n), (0, 0, 1, 1, 1, 2, 3))
    report = attention_analysis(sa, 100)
    assert report.atkn == {(t, i) for i, t in enumerate(toks(n))}
    assert report.asmt == {0, 1, 2, 3}


def test_one_of_ten_tokens_not_enough_at_k20():
    # 10 tokens, every row puts its top-2 on tokens outside the statement except token 0
    n = 12
    w = np.full((n, n), 0.01)
    w[:, 10] = 0.5
    w[:, 11] = 0.3
    w[0, 0] = 0.9
    w = w / w.sum(axis=1, keepdims=True)
    spans = (0,) * 10 + (1, 1)
    report = attention_analysis(AttentionMatrix(w, toks(n), spans), 20)
    hits = sum(1 for _, i in report.atkn if i < 10)
    assert hits == 1 and 0 not in report.asmt


def test_top_count_exact():
    assert top_count(5, 20) == 1
    assert top_count(10, 30) == 3  # a float product would give 3.0000000000000004
    assert top_count(100, 7) == 7
    assert top_count(0.5, 1) == 1
    with pytest.raises(ValueError):
        top_count(0, 5)
    with pytest.raises(ValueError):
        top_count(101, 5)


def test_brute_force_equivalence_random_matrices():
    rng = np.random.default_rng(42)
    for trial in range(200):
        n = int(rng.integers(1, 21))
        w = random_stochastic(rng, n, ties=trial % 2 == 0)
        n_stmts = int(rng.integers(1, n + 1))
        spans = tuple(sorted(int(s) for s in rng.integers(0, n_stmts, size=n)))
        sa = AttentionMatrix(w, toks(n), spans)
        previous = frozenset()
        for k in K_GRID:
            report = attention_analysis(sa, k)
            chosen, asmt = reference_analysis(w, spans, k)
            assert {i for _, i in report.atkn} == chosen
            assert all(t == sa.tokens[i] for t, i in report.atkn)
            assert set(report.asmt) == asmt
            assert previous <= report.atkn  # attended tokens grow with k
            previous = report.atkn


@given(st.integers(1, 15), st.integers(0, 2**31), st.sampled_from(K_GRID))
@settings(max_examples=80, deadline=None)
def test_pigeonhole_rule(n, seed, k):
    rng = np.random.default_rng(seed)
    spans = tuple(sorted(int(s) for s in rng.integers(0, 3, size=n)))
    sa = AttentionMatrix(random_stochastic(rng, n), toks(n), spans)
    report = attention_analysis(sa, k)
    idx = {i for _, i in report.atkn}
    for s, members in sa.statement_tokens().items():
        covered = len(set(members) & idx)
        if covered * 100 > k * len(members):
            assert s in report.asmt
        if s in report.asmt:
            assert covered * 100 > k * len(members) or covered == len(members)


# -- localization curve -------------------------------------------------------

def _report(asmt, k):
    return AttentionReport(frozenset(), frozenset(asmt), k)


def test_curve_perfect_and_disjoint():
    truth = {"a": [1], "b": [0, 2]}
    perfect = {k: {"a": _report({1}, k), "b": _report({2}, k)} for k in (5, 10)}
    assert localization_curve(perfect, truth, [5, 10]) == [(5, 100.0), (10, 100.0)]
    none = {k: {"a": _report({0}, k), "b": _report({1}, k)} for k in (5, 10)}
    assert localization_curve(none, truth, [5, 10]) == [(5, 0.0), (10, 0.0)]


def test_curve_recount():
    rng = np.random.default_rng(3)
    ids = [f"p{i}" for i in range(30)]
    truth = {pid: [int(rng.integers(0, 4))] for pid in ids}
    reports = {k: {pid: _report(set(rng.choice(4, size=int(rng.integers(0, 3)), replace=False).tolist()), k)
                   for pid in ids} for k in K_GRID}
    curve = localization_curve(reports, truth, K_GRID)
    for k, pct in curve:
        hits = 0
        for pid in ids:
            if any(s in reports[k][pid].asmt for s in truth[pid]):
                hits += 1
        assert pct == 100.0 * hits / len(ids)


def test_parse_k_grid():
    assert parse_k_grid("5:50:5") == list(range(5, 51, 5))
    assert parse_k_grid("5,10, 20") == [5, 10, 20]
    assert parse_k_grid("2.5,100") == [2.5, 100]
    with pytest.raises(ValueError):
        parse_k_grid("0:10:5")
    with pytest.raises(ValueError):
        parse_k_grid("10:5:1")


# -- LDA --------------------------------------------------------------------

def clusters(rng, c0, c1, n=400, cov=None):
    cov = np.eye(2) if cov is None else cov
    x0 = rng.multivariate_normal(c0, cov, size=n)
    x1 = rng.multivariate_normal(c1, cov, size=n)
    return np.vstack([x0, x1]), ["correct"] * n + ["buggy"] * n


def test_lda_isotropic_clusters():
    x, y = clusters(np.random.default_rng(0), (0, 0), (10, 0))
    proj = lda_project(x, y)
    assert abs(abs(proj.w[0]) - 1) < 0.01 and abs(proj.w[1]) < 0.1
    assert abs(np.linalg.norm(proj.w) - 1) < 1e-12
    assert proj.overlap < 0.05


def test_lda_identical_clouds_overlap():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(500, 3))
    proj = lda_project(np.vstack([x, x]), [0] * 500 + [1] * 500)
    assert proj.overlap > 0.9


def test_lda_beats_random_search():
    rng = np.random.default_rng(2)
    cov = np.array([[4.0, 1.8], [1.8, 1.0]])
    x, y = clusters(rng, (0, 0), (1.5, -1.0), cov=cov)
    proj = lda_project(x, y)
    x0 = x[np.array(y) == proj.classes[0]]
    x1 = x[np.array(y) == proj.classes[1]]
    angles = rng.uniform(0, np.pi, size=10_000)
    best = max(fisher_criterion(np.array([np.cos(a), np.sin(a)]), x0, x1) for a in angles)
    assert fisher_criterion(proj.w, x0, x1) >= 0.98 * best


@pytest.mark.parametrize("c", [1e-3, 0.5, 7.0, 1e4])
def test_lda_scale_invariance(c):
    rng = np.random.default_rng(4)
    x, y = clusters(rng, (0, 0, 0), (1, 2, 0), n=200, cov=np.diag([1.0, 2.0, 0.5]))
    a, b = lda_project(x, y), lda_project(c * x, y)
    assert abs(a.overlap - b.overlap) <= 1e-9
    assert np.allclose(a.w, b.w, atol=1e-9)


def test_lda_degenerate():
    with pytest.raises(DegenerateClasses):
        lda_project(np.ones((4, 2)), [0, 0, 0, 0])
    with pytest.raises(DegenerateClasses):
        lda_project(np.eye(3), [0, 1, 1])


def test_overlap_histograms_are_densities():
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=300), rng.normal(1, 1, size=300)
    ov, edges, h0, h1 = overlap_coefficient(a, b, 64)
    width = edges[1] - edges[0]
    assert len(edges) == 65
    assert abs(h0.sum() * width - 1) < 1e-9 and abs(h1.sum() * width - 1) < 1e-9
    assert abs(ov - np.minimum(h0, h1).sum() * width) < 1e-12
    assert 0 <= ov <= 1


# -- heatmaps ---------------------------------------------------------------

def test_single_cell_heatmap(tmp_path):
    svg, csv = emit_heatmap(AttentionMatrix(np.array([[1.0]]), ("ret",)), tmp_path / "h.svg")
    text = svg.read_text()
    assert text.count('class="cell"') == 1
    assert 'fill="rgb(0,0,0)"' in text
    assert ">ret</text>" in text


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    w = random_stochastic(rng, 9)
    names = ("int", "f", "(", ")", "{", "return", "a", "<", "}")
    _, csv_path = emit_heatmap(AttentionMatrix(w, names), tmp_path / "h.svg")
    back, tokens = read_weights_csv(csv_path)
    assert tokens == list(names)
    assert np.max(np.abs(back - w)) <= 1e-9


def test_heatmap_too_large(tmp_path):
    n = 201
    with pytest.raises(TooLarge):
        emit_heatmap(AttentionMatrix(np.full((n, n), 1 / n), toks(n)), tmp_path / "h.svg")


@given(st.integers(1, 12), st.integers(0, 2**31))
@settings(max_examples=60, deadline=None)
def test_gray_levels_monotone(n, seed):
    w = random_stochastic(np.random.default_rng(seed), n)
    g = gray_levels(w)
    assert g.min() >= 0 and g.max() <= 255
    for row, grow in zip(w, g):
        order = np.argsort(row)
        assert all(grow[order[i]] >= grow[order[i + 1]] for i in range(n - 1))
        assert grow[np.argmax(row)] == 0
