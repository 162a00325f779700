import math
from collections import Counter, namedtuple

import pytest
from hypothesis import given, settings, strategies as st

from oracleforge.dataset import (
    FAIL,
    SIGN_FLIP_BUGGY,
    SIGN_FLIP_CORRECT,
    PASS,
    Corpus,
    DegenerateClasses,
    Family,
    InsufficientData,
    LabelError,
    LabeledPair,
    build_dataset,
    build_pairs,
    build_triplets,
    class_weights,
    label_pair,
    load_corpus,
    load_pairs,
    load_triplets,
    mutate_corpus,
    save_corpus,
    save_pairs,
    save_triplets,
    split,
    synth_corpus,
)
from oracleforge.extractor import UnitTest, mut_from_text
from oracleforge.minilang import Invocation, RuntimeFault, Values, evaluate, parse_method
from oracleforge.mutator import Mutable, Mutant, MutationOperator

Item = namedtuple("Item", "id family label")

GRID = [(i - 20) / 5 for i in range(41)]  # -4.0, -3.8, ..., 4.0


def sign_flip_family(xs):
    m = parse_method(SIGN_FLIP_CORRECT)
    tests = [UnitTest(f"fix_t{i}", "fixture", (Invocation("f", (x,)),)) for i, x in enumerate(xs)]
    return Family("fixture", {"f": m}, tests)


def sign_flip_mutant():
    return Mutant(SIGN_FLIP_BUGGY, (Mutable(MutationOperator.ParenShift, 0, 0),), 1, "f")


def hand_label(x):
    correct = abs(x) * (x + 2.0) * (x - 2.0)
    buggy = abs(x * (x + 2.0) * (x - 2.0))
    return PASS if correct == buggy else FAIL


# -- labeling -------------------------------------------------------------

def test_sign_flip_grid_labels():
    ref = [parse_method(SIGN_FLIP_CORRECT)]
    bug = [parse_method(SIGN_FLIP_BUGGY)]
    got = [label_pair(UnitTest("t", "fixture", (Invocation("f", (x,)),)), bug, ref) for x in GRID]
    assert got == [hand_label(x) for x in GRID]
    assert got == [FAIL if (-2 < x < 0 or 0 < x < 2) else PASS for x in GRID]
    assert got.count(FAIL) == 18


def test_sign_flip_point_values():
    ref = [parse_method(SIGN_FLIP_CORRECT)]
    bug = [parse_method(SIGN_FLIP_BUGGY)]
    t = UnitTest("t", "fixture", (Invocation("f", (0.5,)),))
    assert evaluate(ref, t.calls) == Values((-1.875,))
    assert evaluate(bug, t.calls) == Values((1.875,))
    assert label_pair(t, bug, ref) == FAIL
    assert label_pair(UnitTest("t", "fixture", (Invocation("f", (3.0,)),)), bug, ref) == PASS


def test_reference_against_itself_always_passes():
    corpus = synth_corpus(4, 12, 3, seed=7)
    for fam in corpus.families.values():
        for t in fam.tests:
            assert label_pair(t, fam.program, fam.program) == PASS


def test_label_error_when_reference_lacks_method():
    ref = [parse_method(SIGN_FLIP_CORRECT)]
    t = UnitTest("t", "fixture", (Invocation("nope", (1,)),))
    with pytest.raises(LabelError):
        label_pair(t, ref, ref)


def test_fault_versus_value_is_fail():
    ref = [parse_method("int d(int a){ return 10 / (a + 1); }")]
    bug = [parse_method("int d(int a){ return 10 / (a - 1); }")]
    # d(1): 10 / 2 = 5 against a division by zero
    assert label_pair(UnitTest("t", "x", (Invocation("d", (1,)),)), bug, ref) == FAIL
    # d(-1): both sides fault, same kind at the same call
    assert label_pair(UnitTest("t", "x", (Invocation("d", (-1,)),)), ref, ref) == PASS
    # d(0): 10 against -10
    assert label_pair(UnitTest("t", "x", (Invocation("d", (0,)),)), bug, ref) == FAIL


# -- pairs ------------------------------------------------------------------

def test_pair_count_one_test_two_mutants():
    m = parse_method("int g(int a){ return a + 2; }")
    fam = Family("fam", {"g": m}, [UnitTest("fam_t0", "fam", (Invocation("g", (1,)),))])
    muts = [
        ("fam", "g~0", Mutant("int g(int a){ return a - 2; }", (Mutable(MutationOperator.AOR, 0, 0),), 1, "g")),
        ("fam", "g~1", Mutant("int g(int a){ return a + 3; }", (Mutable(MutationOperator.ConstRep, 0, 2),), 1, "g")),
    ]
    pairs = build_pairs(Corpus({"fam": fam}), muts)
    assert len(pairs) == 3
    assert [p.origin for p in pairs] == ["original", "hom", "hom"]
    assert [p.label for p in pairs] == [PASS, FAIL, FAIL]
    assert pairs[0].mutant_order == 0 and pairs[1].mutant_order == 1


def test_sign_flip_family_pairs_reproduce_interval():
    fam = sign_flip_family(GRID)
    pairs = build_pairs(Corpus({"fixture": fam}), [("fixture", "f~0", sign_flip_mutant())])
    hom = [p for p in pairs if p.origin == "hom"]
    assert len(hom) == len(GRID)
    for x, p in zip(GRID, hom):
        assert p.label == hand_label(x)
        assert p.buggy_stmts == (0,)
        assert p.mut_text == SIGN_FLIP_BUGGY


def _outputs_match(a, b):
    """Independent outcome comparison: plain floats, NaN == NaN, zeros equal."""
    if isinstance(a, RuntimeFault) or isinstance(b, RuntimeFault):
        return isinstance(a, RuntimeFault) and isinstance(b, RuntimeFault) and (a.kind, a.at) == (b.kind, b.at) \
            and _outputs_match(Values(a.partial), Values(b.partial))
    if len(a.values) != len(b.values):
        return False
    for x, y in zip(a.values, b.values):
        if type(x) is not type(y):
            return False
        if isinstance(x, float) and math.isnan(x) and math.isnan(y):
            continue
        if x != y:
            return False
    return True


@pytest.fixture(scope="module")
def small_dataset():
    corpus = synth_corpus(3, 8, 3, seed=21)
    mutants = mutate_corpus(corpus, 3, 2, seed=21)
    return corpus, mutants, build_pairs(corpus, mutants)


def test_labels_agree_with_reexecution(small_dataset):
    corpus, mutants, pairs = small_dataset
    by_id = {(f, mid): m for f, mid, m in mutants}
    tests = {t.id: t for t in corpus.all_tests()}
    for p in pairs:
        fam = corpus.family(p.family)
        t = tests[p.test_id]
        if p.origin == "original":
            assert p.label == PASS
            continue
        mutant = by_id[(p.family, p.mutant_id)]
        mutated = parse_method(mutant.source, fam.signatures())
        program = [mutated if m.name == mutant.parent else m for m in fam.program]
        same = _outputs_match(evaluate(program, t.calls), evaluate(fam.program, t.calls))
        assert p.label == (PASS if same else FAIL)


def test_pairs_deterministic(small_dataset):
    corpus, mutants, pairs = small_dataset
    again = build_pairs(corpus, mutants)
    assert [p.to_json() for p in pairs] == [p.to_json() for p in again]


def test_pairs_jsonl_round_trip(small_dataset, tmp_path):
    _, _, pairs = small_dataset
    save_pairs(tmp_path / "pairs.jsonl", pairs)
    assert load_pairs(tmp_path / "pairs.jsonl") == pairs


# -- triplets -----------------------------------------------------------------

def _fake_pairs(test_id, n_pass, n_fail):
    mut = mut_from_text("int g(){ return 1; }")
    out = []
    for i in range(n_pass):
        origin = "original" if i == 0 else "hom"
        out.append(LabeledPair(f"{test_id}#p{i}", "fam", test_id, "g();", mut, PASS, origin, 0 if i == 0 else 1))
    for i in range(n_fail):
        out.append(LabeledPair(f"{test_id}#f{i}", "fam", test_id, "g();", mut, FAIL, "hom", 1))
    return out


def test_triplet_counts():
    assert len(build_triplets(_fake_pairs("a", 2, 3))) == 6
    assert build_triplets(_fake_pairs("a", 3, 0)) == []
    assert len(build_triplets(_fake_pairs("a", 2, 3) + _fake_pairs("b", 1, 4))) == 10


def test_triplet_census_matches_double_loop(small_dataset):
    _, _, pairs = small_dataset
    triplets = build_triplets(pairs)
    count = 0
    for a in pairs:
        for b in pairs:
            if a.test_id == b.test_id and a.label == PASS and b.label == FAIL:
                count += 1
    assert len(triplets) == count
    label = {p.id: p.label for p in pairs}
    for t in triplets:
        assert label[t.pass_id] == PASS and label[t.fail_id] == FAIL


def test_triplets_jsonl_round_trip(small_dataset, tmp_path):
    _, _, pairs = small_dataset
    triplets = build_triplets(pairs)[:50]
    save_triplets(tmp_path / "t.jsonl", triplets)
    assert load_triplets(tmp_path / "t.jsonl") == triplets


# -- splits -------------------------------------------------------------------

def items(n, families=1):
    return [Item(f"i{k}", f"fam{k % families}", PASS) for k in range(n)]


def test_split_sizes_90_5_5():
    s = split(items(100), seed=0)
    assert (len(s.train), len(s.validation), len(s.test)) == (90, 5, 5)


def test_split_deterministic_and_partitioning():
    data = items(237, 3)
    a, b = split(data, seed=5), split(data, seed=5)
    assert a == b
    ids = [x.id for x in data]
    parts = [set(a.train), set(a.validation), set(a.test)]
    assert set.union(*parts) == set(ids)
    assert sum(len(p) for p in parts) == len(ids)
    assert split(data, seed=6) != a


def test_stratified_split_per_family():
    data = items(120, 3)
    s = split(data, seed=3, stratify_by_family=True)
    fam = {x.id: x.family for x in data}
    for part, size in ((s.train, 36), (s.validation, 2), (s.test, 2)):
        assert Counter(fam[i] for i in part) == {"fam0": size, "fam1": size, "fam2": size}


def test_split_errors():
    with pytest.raises(InsufficientData):
        split(items(5), seed=0)
    with pytest.raises(ValueError):
        split(items(100), ratios=(0.5, 0.2, 0.2))


# -- class weights ----------------------------------------------------------

def labelled(n_pass, n_fail):
    return [Item(str(i), "f", PASS) for i in range(n_pass)] + [Item(f"x{i}", "f", FAIL) for i in range(n_fail)]


def test_class_weight_examples():
    w = class_weights(labelled(50, 50))
    assert (w.w_pass, w.w_fail) == (1.0, 1.0)
    w = class_weights(labelled(25, 75))
    assert w.w_pass == 2.0
    assert abs(w.w_fail - 0.6667) < 1e-4 and abs(w.w_fail - 2 / 3) < 1e-9
    with pytest.raises(DegenerateClasses):
        class_weights(labelled(0, 10))


@given(st.integers(1, 5000), st.integers(1, 5000))
@settings(max_examples=100, deadline=None)
def test_class_weights_balance(n_pass, n_fail):
    w = class_weights(labelled(n_pass, n_fail))
    assert w.w_pass > 0 and w.w_fail > 0
    assert math.isclose(w.w_pass * n_pass, w.w_fail * n_fail, rel_tol=1e-12)
    assert math.isclose(w.w_pass * n_pass + w.w_fail * n_fail, n_pass + n_fail, rel_tol=1e-12)


# -- corpus -----------------------------------------------------------------

def test_corpus_counts_on_disk(tmp_path):
    corpus = synth_corpus(4, 12, 6, seed=0)
    save_corpus(corpus, tmp_path)
    dirs = [d for d in tmp_path.iterdir() if d.is_dir()]
    assert len(dirs) == 4
    assert len(list(tmp_path.glob("*/methods/*.mj"))) == 48
    assert len(corpus.all_tests()) == 288


def test_corpus_regeneration_byte_identical(tmp_path):
    for name in ("a", "b"):
        save_corpus(synth_corpus(4, 12, 6, seed=13), tmp_path / name, {"seed": 13})
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_corpus_contains_sign_flip_and_tests_run_clean(tmp_path):
    corpus = synth_corpus(4, 12, 6, seed=0)
    first = next(iter(corpus.families.values()))
    assert first.methods["f"].source == SIGN_FLIP_CORRECT
    for fam in corpus.families.values():
        for t in fam.tests:
            assert isinstance(evaluate(fam.program, t.calls), Values)
    save_corpus(corpus, tmp_path)
    loaded = load_corpus(tmp_path)
    assert {n: [t.calls for t in f.tests] for n, f in loaded.families.items()} == \
        {n: [t.calls for t in f.tests] for n, f in corpus.families.items()}


def test_build_dataset_summary(tmp_path):
    corpus = synth_corpus(2, 6, 2, seed=2)
    mutants = mutate_corpus(corpus, 2, 2, seed=2)
    summary = build_dataset(corpus, mutants, tmp_path)
    pairs = load_pairs(tmp_path / "pairs.jsonl")
    assert summary["n_pairs"] == len(pairs) == summary["n_pass"] + summary["n_fail"]
    assert summary["n_triplets"] == len(load_triplets(tmp_path / "triplets.jsonl"))
