"""Command-line entry point: ``oracleforge <subcommand> ...``.

Exit codes: 0 success, 1 domain error (bad program, missing data, training
failure), 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import interpret
from .dataset import (
    DegenerateClasses,
    InsufficientData,
    build_dataset,
    build_pairs,
    load_corpus,
    load_mutants,
    load_pairs,
    mutate_corpus,
    save_corpus,
    save_mutants,
    save_pairs,
    split,
    synth_corpus,
)
from .dataset.labeling import FAIL, PASS, LabelError
from .extractor import AbsentMethodError, parse_test_text
from .harness import (
    SEED_ENV,
    load_config,
    run_experiment,
    write_family_metrics,
    write_verdicts,
)
from .metrics import EmptyInput, compute_metrics
from .minilang import MjError, RuntimeFault, evaluate, parse_methods, signature_of
from .minilang.method import parse_method
from .neural import NonFinite, SequenceTooLong, load_checkpoint, save_checkpoint
from .plotting import plot_lda_histogram, plot_localization_curve, plot_training_curves
from .trainer import Oracle, TrainConfig, fit, pass_probabilities

DOMAIN_ERRORS = (MjError, LabelError, AbsentMethodError, InsufficientData, DegenerateClasses, NonFinite,
                 SequenceTooLong, EmptyInput, interpret.TooLarge, FileNotFoundError, KeyError, ValueError)


class DomainError(Exception):
    pass


def _seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    return int(os.environ.get(SEED_ENV, "0"))


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(rows: list[tuple], header: tuple | None = None) -> None:
    """Tab-delimited stdout block."""
    if header:
        print("\t".join(str(h) for h in header))
    for r in rows:
        print("\t".join("" if v is None else str(v) for v in r))


def _fmt(v):
    return None if v is None else f"{v:.4f}"


# -- pipeline commands ----------------------------------------------------

def cmd_corpus(args) -> int:
    seed = _seed(args)
    corpus = synth_corpus(args.families, args.methods, args.tests, seed=seed)
    conf = {"n_families": args.families, "methods_per_family": args.methods, "tests_per_method": args.tests,
            "seed": seed}
    save_corpus(corpus, args.out, conf)
    _emit([(f.name, len(f.methods), len(f.tests)) for f in corpus.families.values()],
          ("family", "methods", "tests"))
    return 0


def _file_or_dir(out: str, default_name: str) -> Path:
    """``--out`` naming a file (with suffix) or a directory to hold ``default_name``."""
    path = Path(out)
    if path.suffix:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path
    path.mkdir(parents=True, exist_ok=True)
    return path / default_name


def cmd_mutate(args) -> int:
    corpus = load_corpus(args.corpus)
    mutants = mutate_corpus(corpus, args.order, args.per_method, _seed(args), families=args.family)
    save_mutants(_file_or_dir(args.out, "mutants.jsonl"), mutants)
    orders = [m.order for _, _, m in mutants]
    _emit([(len(mutants), max(orders, default=0))], ("mutants", "max_order"))
    return 0


def cmd_label(args) -> int:
    corpus = load_corpus(args.corpus)
    pairs = build_pairs(corpus, load_mutants(args.mutants))
    save_pairs(_out(args) / "pairs.jsonl", pairs)
    _emit([(len(pairs), sum(p.label == PASS for p in pairs), sum(p.label == FAIL for p in pairs))],
          ("pairs", "pass", "fail"))
    return 0


def cmd_dataset(args) -> int:
    corpus = load_corpus(args.corpus)
    seed = _seed(args)
    out = _out(args)
    summary = build_dataset(corpus, load_mutants(args.mutants), out, seed)
    pairs = load_pairs(out / "pairs.jsonl")
    sp = split(pairs, (0.90, 0.05, 0.05), seed, stratify_by_family=True)
    doc = {"seed": seed, "ratios": list(sp.ratios), "train": list(sp.train), "validation": list(sp.validation),
           "test": list(sp.test)}
    (out / "split.json").write_text(json.dumps(doc, indent=1) + "\n")
    _emit(sorted(summary.items()), ("key", "value"))
    return 0


def _load_split(dataset: Path, seed: int):
    pairs = load_pairs(dataset / "pairs.jsonl")
    path = dataset / "split.json"
    if path.exists():
        doc = json.loads(path.read_text())
        ids = doc["train"], doc["validation"], doc["test"]
    else:
        sp = split(pairs, seed=seed, stratify_by_family=True)
        ids = sp.train, sp.validation, sp.test
    by_id = {p.id: p for p in pairs}
    return pairs, [[by_id[i] for i in part] for part in ids]


def cmd_train(args) -> int:
    overrides = {"train.seed": args.seed, "train.max_epochs": args.max_epochs}
    if args.freeze_encoders:
        overrides["train.freeze_encoders"] = True
    cfg = load_config(args.config, overrides)
    import torch

    torch.set_num_threads(1)
    _, (train, val, _) = _load_split(Path(args.dataset), cfg.seeds()["split"])
    result = fit(train, val, cfg.train)
    out = _out(args)
    ckpt = result.checkpoint(cfg.train, {"dataset": str(args.dataset)})
    save_checkpoint(ckpt, out / "model.json")
    report = {"phase1": result.phase1.to_json(), "phase2": result.phase2.to_json(),
              "seconds": result.seconds, "n_triplets": result.n_triplets}
    (out / "train_report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    plot_training_curves([result.phase1, result.phase2], out / "training_curves.svg")
    _emit([(r.phase, r.stop_epoch, r.stop_reason, r.best_epoch, f"{r.best_val_loss:.6f}")
           for r in (result.phase1, result.phase2)], ("phase", "epochs", "stop", "best_epoch", "best_val_loss"))
    return 0


def cmd_predict(args) -> int:
    oracle = Oracle.from_checkpoint(load_checkpoint(args.ckpt))
    if args.test is not None:
        if not args.program:
            raise DomainError("--test needs --program")
        program = _program_from_file(args.program)
        test = parse_test_text(args.test)
    else:
        if not (args.corpus and args.family and args.test_id):
            raise DomainError("give --corpus, --family and --test-id (or --test with --program)")
        corpus = load_corpus(args.corpus)
        test = corpus.test(args.family, args.test_id)
        program = corpus.family(args.family).program
        if args.mutant_id:
            if not args.mutants:
                raise DomainError("--mutant-id needs --mutants")
            mutants = {(f, mid): m for f, mid, m in load_mutants(args.mutants)}
            if (args.family, args.mutant_id) not in mutants:
                raise KeyError(f"no mutant {args.mutant_id} in family {args.family}")
            m = mutants[(args.family, args.mutant_id)]
            fam = corpus.family(args.family)
            mutated = parse_method(m.source, fam.methods[m.parent].signatures)
            program = [mutated if x.name == m.parent else x for x in program]
    verdict = oracle.predict(test, program)
    print(json.dumps(verdict.to_json(), sort_keys=True))
    return 0


def _program_from_file(path):
    """Every method of an MJ file, typechecked against each other."""
    text = Path(path).read_text(encoding="utf-8")
    tokens, methods, _ = parse_methods(text)
    sigs = {pm.decl.name: signature_of(pm.decl) for pm in methods}
    raw = text.encode("utf-8")
    sources = [raw[tokens[pm.token_start].start:tokens[pm.token_end - 1].end].decode("utf-8") for pm in methods]
    return [parse_method(src, sigs) for src in sources]


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    model = ckpt.build_model()
    dataset = Path(args.dataset)
    pairs, (train, val, test) = _load_split(dataset, _seed(args))
    chosen = {"train": train, "validation": val, "test": test, "all": pairs}[args.split]
    probs = pass_probabilities(model, ckpt.vocab, chosen)
    predicted = [PASS if p >= 0.5 else FAIL for p in probs]
    overall, per_family = compute_metrics(predicted, [p.label for p in chosen], [p.family for p in chosen],
                                          args.positive_class)
    out = _out(args)
    write_verdicts(out / "verdicts.csv", chosen, predicted, probs)
    write_family_metrics(out / "metrics_per_family.csv", per_family)
    (out / "metrics.json").write_text(json.dumps({"split": args.split, "overall": overall.to_json(),
                                                  "per_family": {f: m.to_json() for f, m in per_family.items()}},
                                                 indent=1, sort_keys=True) + "\n")
    rows = [(f, m.total, _fmt(m.accuracy), _fmt(m.precision), _fmt(m.recall), _fmt(m.f1))
            for f, m in [*per_family.items(), ("ALL", overall)]]
    _emit(rows, ("family", "n", "accuracy", "precision", "recall", "f1"))
    return 0


def _pairs_arg(args):
    path = Path(args.pairs)
    return load_pairs(path / "pairs.jsonl" if path.is_dir() else path)


def cmd_explain(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    oracle = Oracle.from_checkpoint(ckpt)
    pairs = {p.id: p for p in _pairs_arg(args)}
    if args.pair_id not in pairs:
        raise KeyError(f"no pair {args.pair_id!r}")
    pair = pairs[args.pair_id]
    sa, report, verdict = interpret.explain_pair(oracle, pair, args.k)
    out = _out(args)
    doc = {"pair_id": pair.id, "gold": pair.label, "verdict": verdict.to_json(), "report": report.to_json(),
           "buggy_statements": list(pair.buggy_stmts), "tokens": list(sa.tokens), "stmt_spans": list(sa.stmt_spans)}
    (out / "explain.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    interpret.emit_heatmap(sa, out / "heatmap.svg")
    _emit([(pair.id, verdict.label, len(report.atkn), " ".join(map(str, sorted(report.asmt))))],
          ("pair", "verdict", "attended_tokens", "attended_statements"))
    return 0


def cmd_embed_viz(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    oracle = Oracle.from_checkpoint(ckpt)
    pairs = _pairs_arg(args)
    emb = np.array([oracle.verdict_for_texts(p.test_text, p.mut_text).d_mut for p in pairs])
    labels = ["buggy" if p.label == FAIL else "correct" for p in pairs]
    proj = interpret.lda_project(emb, labels, classes=("correct", "buggy"))
    out = _out(args)
    (out / "lda.json").write_text(json.dumps(proj.to_json(), indent=1, sort_keys=True) + "\n")
    with open(out / "lda_histogram.csv", "w", encoding="utf-8") as fh:
        fh.write("bin_lo,bin_hi,correct_density,buggy_density\n")
        for i in range(len(proj.hist0)):
            fh.write(f"{proj.edges[i]!r},{proj.edges[i + 1]!r},{proj.hist0[i]!r},{proj.hist1[i]!r}\n")
    plot_lda_histogram(proj, out / "lda_histogram.svg")
    _emit([(len(pairs), f"{proj.overlap:.4f}")], ("instances", "overlap"))
    return 0


def cmd_localize(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    oracle = Oracle.from_checkpoint(ckpt)
    pairs = [p for p in _pairs_arg(args) if p.label == FAIL and p.buggy_stmts]
    if not pairs:
        raise InsufficientData("no failing pairs with known buggy statements")
    grid = interpret.parse_k_grid(args.k_grid)
    curve, reports = interpret.localize(oracle, pairs, grid)
    out = _out(args)
    with open(out / "curve.csv", "w", encoding="utf-8") as fh:
        fh.write("k,percent\n")
        for k, v in curve:
            fh.write(f"{k},{v!r}\n")
    doc = {str(k): {pid: r.to_json() for pid, r in by_pair.items()} for k, by_pair in reports.items()}
    (out / "reports.json").write_text(json.dumps({"pairs": [p.id for p in pairs],
                                                  "ground_truth": {p.id: list(p.buggy_stmts) for p in pairs},
                                                  "reports": doc}, sort_keys=True) + "\n")
    plot_localization_curve(curve, out / "curve.svg")
    _emit([(k, f"{v:.2f}") for k, v in curve], ("k", "percent"))
    return 0


def cmd_experiment(args) -> int:
    overrides = {"experiment.mode": args.mode, "experiment.out_dir": args.out, "experiment.seed": args.seed,
                 "train.max_epochs": args.max_epochs}
    if args.held_out:
        overrides["experiment.held_out"] = args.held_out
    report = run_experiment(load_config(args.config, overrides))
    m = report["metrics"] if report["mode"] == "within" else report["held_out_metrics"]
    rows = [("mode", report["mode"]), ("accuracy", _fmt(m["accuracy"])), ("precision", _fmt(m["precision"])),
            ("recall", _fmt(m["recall"])), ("f1", _fmt(m["f1"])),
            ("baseline_accuracy", _fmt(report["baseline"]["accuracy"])),
            ("mean_inference_ms", _fmt(report["timings"]["mean_inference_ms"])),
            ("report_hash", report["report_hash"])]
    if report["mode"] == "cross_family":
        rows += [(k, _fmt(v)) for k, v in report["cross_family"].items()]
    _emit(rows, ("key", "value"))
    return 0


# -- mj -------------------------------------------------------------------

def cmd_mj_check(args) -> int:
    program = _program_from_file(args.file)
    _emit([(m.name, ", ".join(f"{t} {n}" for n, t in m.params), m.return_type, m.n_statements)
           for m in program], ("method", "params", "returns", "statements"))
    return 0


def cmd_mj_run(args) -> int:
    if args.test is not None:
        program = _program_from_file(args.target)
        test = parse_test_text(args.test)
    else:
        if args.test_id is None:
            raise DomainError("give FAMILY TEST_ID (with --corpus) or FILE --test TEXT")
        corpus = load_corpus(args.corpus)
        test = corpus.test(args.target, args.test_id)
        program = corpus.family(args.target).program
    outcome = evaluate(program, test.calls, args.step_limit)
    if isinstance(outcome, RuntimeFault):
        print(json.dumps({"fault": outcome.kind, "at": outcome.at, "partial": list(outcome.partial)}))
    else:
        print(json.dumps({"values": list(outcome.values)}))
    return 0


# -- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oracleforge", description="Learned test oracle toolkit for MJ programs.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def cmd(name, fn, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(fn=fn)
        return sp

    s = cmd("corpus", cmd_corpus, "synthesize an MJ corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--families", type=int, default=4)
    s.add_argument("--methods", type=int, default=12)
    s.add_argument("--tests", type=int, default=10)
    s.add_argument("--seed", type=int)

    s = cmd("mutate", cmd_mutate, "generate higher-order mutants for every method")
    s.add_argument("--corpus", required=True)
    s.add_argument("--family", action="append", help="restrict to this family (repeatable)")
    s.add_argument("--order", type=int, default=4)
    s.add_argument("--per-method", type=int, default=3)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)

    s = cmd("label", cmd_label, "label every (test, program variant) pair by differential execution")
    s.add_argument("--corpus", required=True)
    s.add_argument("--mutants", required=True)
    s.add_argument("--out", required=True)

    s = cmd("dataset", cmd_dataset, "label pairs, build triplets and a seeded split")
    s.add_argument("action", nargs="?", choices=("build",), default="build")
    s.add_argument("--corpus", required=True)
    s.add_argument("--mutants", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)

    s = cmd("train", cmd_train, "two-phase training on a dataset directory")
    s.add_argument("--dataset", required=True)
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--max-epochs", type=int)
    s.add_argument("--freeze-encoders", action="store_true")
    s.add_argument("--out", required=True)

    s = cmd("predict", cmd_predict, "print the oracle verdict for one test as JSON")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--corpus")
    s.add_argument("--family")
    s.add_argument("--test-id")
    s.add_argument("--mutants")
    s.add_argument("--mutant-id")
    s.add_argument("--test", help='literal test text, e.g. "f(0.5);"')
    s.add_argument("--program", help="MJ source file (with --test)")

    s = cmd("eval", cmd_eval, "score a checkpoint on a dataset split")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--dataset", required=True)
    s.add_argument("--split", choices=("train", "validation", "test", "all"), default="test")
    s.add_argument("--positive-class", choices=(PASS, FAIL), default=PASS)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)

    s = cmd("explain", cmd_explain, "attention analysis and heatmap for one pair")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--pairs", required=True, help="pairs.jsonl or a dataset directory")
    s.add_argument("--pair-id", required=True)
    s.add_argument("--k", type=float, default=20)
    s.add_argument("--out", required=True)

    s = cmd("embed-viz", cmd_embed_viz, "LDA separation of MUT embeddings")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--pairs", required=True)
    s.add_argument("--out", required=True)

    s = cmd("localize", cmd_localize, "bug-localization curve over failing pairs")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--pairs", required=True)
    s.add_argument("--k-grid", default="5:50:5")
    s.add_argument("--out", required=True)

    s = cmd("experiment", cmd_experiment, "run a full within-corpus or cross-family experiment")
    s.add_argument("--config")
    s.add_argument("--mode", choices=("within", "cross_family"))
    s.add_argument("--held-out", nargs="+")
    s.add_argument("--seed", type=int)
    s.add_argument("--max-epochs", type=int)
    s.add_argument("--out", required=True)

    mj = sub.add_parser("mj", help="MJ language tools", description="MJ language tools")
    mjs = mj.add_subparsers(dest="mj_command", required=True, metavar="ACTION")
    s = mjs.add_parser("check", help="parse and typecheck an MJ file")
    s.add_argument("file")
    s.set_defaults(fn=cmd_mj_check)
    s = mjs.add_parser("run", help="run a corpus test (FAMILY TEST_ID) or a literal test against an MJ file")
    s.add_argument("target", help="family name, or an MJ file with --test")
    s.add_argument("test_id", nargs="?")
    s.add_argument("--corpus", default="corpus")
    s.add_argument("--test", help='literal test text, e.g. "f(0.5);"')
    s.add_argument("--step-limit", type=int, default=100_000)
    s.set_defaults(fn=cmd_mj_run)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.fn(args)
    except (DomainError, *DOMAIN_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
