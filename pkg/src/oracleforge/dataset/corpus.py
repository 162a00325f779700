"""On-disk corpus of MJ project families and the synthetic corpus generator.

Layout::

    <root>/corpus.json            generator config echo
    <root>/<family>/methods/<name>.mj
    <root>/<family>/tests.json    {family, tests: [{id, calls: [{method, args}]}]}
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ..extractor import UnitTest
from ..minilang import (
    Invocation,
    MjError,
    RuntimeFault,
    SourceMethod,
    evaluate,
    parse_method,
    parse_methods,
    signature_of,
)

# Verbatim correct implementation of f(x) = |x| * (x + 2) * (x - 2).
SIGN_FLIP_CORRECT = "num f(num x){ return abs(x)*(x+2.0)*(x-2.0); }"
SIGN_FLIP_BUGGY = "num f(num x){ return abs(x*(x+2.0)*(x-2.0)); }"

FAMILY_NAMES = ("fixture", "ledger", "geometry", "signal", "inventory", "sensor", "grading", "routing")

DEFAULT_INPUT_GRID = tuple(x / 2 for x in range(-8, 9))  # -4.0 .. 4.0 step 0.5
INT_RANGE = (-10, 10)


class GenerationError(RuntimeError):
    pass


@dataclass
class Family:
    name: str
    methods: dict[str, SourceMethod]
    tests: list[UnitTest] = field(default_factory=list)

    @property
    def program(self) -> list[SourceMethod]:
        return list(self.methods.values())

    def signatures(self) -> dict:
        return {name: m.signature for name, m in self.methods.items()}


@dataclass
class Corpus:
    families: dict[str, Family]

    def family(self, name: str) -> Family:
        try:
            return self.families[name]
        except KeyError:
            raise KeyError(f"unknown family {name!r}") from None

    def test(self, family: str, test_id: str) -> UnitTest:
        for t in self.family(family).tests:
            if t.id == test_id:
                return t
        raise KeyError(f"unknown test {test_id!r} in family {family!r}")

    def all_tests(self) -> list[UnitTest]:
        return [t for f in self.families.values() for t in f.tests]


# -- serialization -------------------------------------------------------

def _arg_from_json(a):
    if isinstance(a, (bool, int, float)):
        return a
    raise ValueError(f"unsupported literal {a!r}")


def tests_to_json(family: str, tests: list[UnitTest]) -> dict:
    return {
        "family": family,
        "tests": [
            {"id": t.id, "calls": [{"method": c.method_name, "args": list(c.args)} for c in t.calls]}
            for t in tests
        ],
    }


def tests_from_json(doc: dict) -> list[UnitTest]:
    family = doc["family"]
    return [
        UnitTest(
            t["id"], family,
            tuple(Invocation(c["method"], tuple(_arg_from_json(a) for a in c["args"])) for c in t["calls"]),
        )
        for t in doc["tests"]
    ]


def parse_family_methods(sources: dict[str, str]) -> dict[str, SourceMethod]:
    """Typecheck a family's methods against each other's signatures."""
    sigs = {}
    for name, src in sources.items():
        _, pms, _ = parse_methods(src)
        sigs[pms[0].decl.name] = signature_of(pms[0].decl)
    return {name: parse_method(src, sigs) for name, src in sources.items()}


def load_family(path: Path) -> Family:
    path = Path(path)
    sources = {}
    for f in sorted((path / "methods").glob("*.mj")):
        sources[f.stem] = f.read_text(encoding="utf-8").rstrip("\n")
    methods = parse_family_methods(sources)
    for stem, m in methods.items():
        if m.name != stem:
            raise ValueError(f"{path}/methods/{stem}.mj declares {m.name!r}")
    doc = json.loads((path / "tests.json").read_text(encoding="utf-8"))
    return Family(doc["family"], methods, tests_from_json(doc))


def load_corpus(root) -> Corpus:
    root = Path(root)
    families = {}
    for d in sorted(p for p in root.iterdir() if (p / "tests.json").exists()):
        fam = load_family(d)
        families[fam.name] = fam
    if not families:
        raise FileNotFoundError(f"no families under {root}")
    return Corpus(families)


def save_corpus(corpus: Corpus, root, config: dict | None = None) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    if config is not None:
        (root / "corpus.json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    for fam in corpus.families.values():
        mdir = root / fam.name / "methods"
        mdir.mkdir(parents=True, exist_ok=True)
        for name, m in fam.methods.items():
            (mdir / f"{name}.mj").write_text(m.source + "\n", encoding="utf-8")
        doc = tests_to_json(fam.name, fam.tests)
        (root / fam.name / "tests.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


# -- synthesis ----------------------------------------------------------

@dataclass(frozen=True)
class _Template:
    name: str
    params: tuple[str, ...]  # parameter types
    build: Callable[[random.Random, str, dict], str]
    # optional per-parameter input domain override: index -> list of values
    domains: dict = field(default_factory=dict)
    needs_helper: bool = False


def _c(rng, choices):
    return rng.choice(choices)


def _numc(rng):
    return _c(rng, ["0.5", "1.0", "1.5", "2.0", "2.5", "3.0"])


def _intc(rng, lo=1, hi=5):
    return str(rng.randint(lo, hi))


def _t_poly(rng, name, ctx):
    a, b = _numc(rng), _numc(rng)
    form = rng.randrange(3)
    if form == 0:
        body = f"return abs(x)*(x+{a})*(x-{b});"
    elif form == 1:
        body = f"return (x-{a})*(x+{b})/{_numc(rng)};"
    else:
        body = f"num y = x*x-{a};\n    return abs(y)*(x+{b});"
    return f"num {name}(num x){{\n    {body}\n}}"


def _t_piecewise(rng, name, ctx):
    op = _c(rng, [">", ">=", "<"])
    k = _intc(rng, 2, 4)
    return (f"int {name}(int a, int b){{\n    if (a {op} b) {{\n        return a - b;\n"
            f"    }} else {{\n        return b * {k} + a;\n    }}\n}}")


def _t_loop_sum(rng, name, ctx):
    k = _intc(rng, 1, 3)
    acc = _c(rng, ["s", "acc", "total"])
    return (f"int {name}(int n){{\n    int {acc} = 0;\n    int i = 0;\n    while (i < n) {{\n"
            f"        {acc} = {acc} + i * {k};\n        i = i + 1;\n    }}\n    return {acc};\n}}")


def _t_predicate(rng, name, ctx):
    m, lo = _intc(rng, 2, 4), _intc(rng, -3, 3)
    join = _c(rng, ["&&", "||"])
    return f"bool {name}(int a){{\n    return a % {m} == 0 {join} a > {lo};\n}}"


def _t_cast(rng, name, ctx):
    k = _numc(rng)
    return f"int {name}(num x){{\n    return (int) (x * {k}) + 1;\n}}"


def _t_clamp(rng, name, ctx):
    lo = _c(rng, ["-2.0", "-1.5", "-1.0", "-0.5"])
    hi = _c(rng, ["0.5", "1.0", "1.5", "2.0"])
    return (f"num {name}(num x){{\n    if (x < {lo}) {{\n        return {lo};\n    }}\n"
            f"    if (x > {hi}) {{\n        return {hi};\n    }}\n    return x;\n}}")


def _t_helper(rng, name, ctx):
    helper = ctx["helper"]
    k = _numc(rng)
    return f"num {name}(num x){{\n    return {helper}(x) * {k} + x;\n}}"


def _t_count(rng, name, ctx):
    return (f"int {name}(int n, int k){{\n    int c = 0;\n    int i = 1;\n    while (i <= n) {{\n"
            f"        if (i % k == 0) {{\n            c = c + 1;\n        }}\n        i = i + 1;\n"
            f"    }}\n    return c;\n}}")


def _t_sign(rng, name, ctx):
    k, z = _intc(rng, 2, 5), _intc(rng, 1, 9)
    return (f"int {name}(int a){{\n    if (a < 0) {{\n        return -a * {k};\n"
            f"    }} else if (a == 0) {{\n        return {z};\n    }}\n    return a + {k};\n}}")


def _t_bool_combine(rng, name, ctx):
    c1, c2 = _numc(rng), _numc(rng)
    join = _c(rng, ["&&", "||"])
    return f"bool {name}(num x, num y){{\n    return x * y > {c1} {join} x - y < {c2};\n}}"


def _t_mean(rng, name, ctx):
    return (f"num {name}(num a, num b){{\n    num m = (a + b) / 2.0;\n"
            f"    return m * m - a * b;\n}}")


def _t_gcd(rng, name, ctx):
    return (f"int {name}(int a, int b){{\n    int x = abs(a);\n    int y = abs(b);\n"
            f"    while (y != 0) {{\n        int t = x % y;\n        x = y;\n        y = t;\n"
            f"    }}\n    return x;\n}}")


TEMPLATES = (
    _Template("poly", ("num",), _t_poly),
    _Template("piecewise", ("int", "int"), _t_piecewise),
    _Template("loop_sum", ("int",), _t_loop_sum, {0: list(range(0, 13))}),
    _Template("predicate", ("int",), _t_predicate),
    _Template("cast", ("num",), _t_cast),
    _Template("clamp", ("num",), _t_clamp),
    _Template("helper", ("num",), _t_helper, needs_helper=True),
    _Template("count", ("int", "int"), _t_count, {0: list(range(0, 13)), 1: list(range(1, 6))}),
    _Template("sign", ("int",), _t_sign),
    _Template("bool_combine", ("num", "num"), _t_bool_combine),
    _Template("mean", ("num", "num"), _t_mean),
    _Template("gcd", ("int", "int"), _t_gcd),
)


def _family_templates(index: int, rng: random.Random) -> list[_Template]:
    """Each family draws from a family-specific subset of the template pool."""
    pool = list(TEMPLATES)
    drop = set(rng.sample(range(len(pool)), 2)) if index > 0 else set()
    return [t for i, t in enumerate(pool) if i not in drop]


def _draw_input(rng, template: _Template, i: int, ptype: str, grid):
    if i in template.domains:
        return rng.choice(template.domains[i])
    if ptype == "num":
        return float(rng.choice(grid))
    if ptype == "int":
        return rng.randint(*INT_RANGE)
    return rng.random() < 0.5


def synth_corpus(n_families: int = 4, methods_per_family: int = 12, tests_per_method: int = 6,
                 input_grid=DEFAULT_INPUT_GRID, seed: int = 0, max_retries: int = 50) -> Corpus:
    """Generate a deterministic corpus; family 0 carries the Fig.-2 method ``f``."""
    if min(n_families, methods_per_family, tests_per_method) < 1:
        raise ValueError("corpus dimensions must be positive")
    if n_families > len(FAMILY_NAMES):
        names = [f"family{i}" for i in range(n_families)]
    else:
        names = list(FAMILY_NAMES[:n_families])
    rng = random.Random(seed)
    families = {}
    for fi, fname in enumerate(names):
        frng = random.Random(rng.getrandbits(64))
        templates = _family_templates(fi, frng)
        sources: dict[str, str] = {}
        method_templates: dict[str, _Template] = {}
        prefix = fname[:3]
        if fi == 0:
            sources["f"] = SIGN_FLIP_CORRECT
            method_templates["f"] = TEMPLATES[0]
        j = 0
        while len(sources) < methods_per_family:
            t = templates[j % len(templates)]
            name = f"{prefix}_{t.name}{j}"
            j += 1
            helpers = [n for n, tt in method_templates.items() if tt.params == ("num",) and not tt.needs_helper
                       and _returns(sources[n]) == "num"]
            if t.needs_helper and not helpers:
                continue
            ctx = {"helper": frng.choice(helpers) if helpers else None}
            for _ in range(max_retries):
                src = t.build(frng, name, ctx)
                try:
                    parse_family_methods({**sources, name: src})
                except MjError:
                    continue
                sources[name] = src
                method_templates[name] = t
                break
            else:
                raise GenerationError(f"template {t.name} failed to typecheck after {max_retries} tries")
        methods = parse_family_methods(sources)
        program = list(methods.values())
        tests = []
        for mi, (mname, m) in enumerate(methods.items()):
            t = method_templates[mname]
            for k in range(tests_per_method):
                for _ in range(max_retries):
                    calls = []
                    for _ in range(frng.choice((1, 1, 2))):
                        args = tuple(_draw_input(frng, t, i, p, input_grid) for i, p in enumerate(t.params))
                        calls.append(Invocation(mname, args))
                    if frng.random() < 0.2 and len(methods) > 1:
                        other = frng.choice([n for n in methods if n != mname])
                        ot = method_templates[other]
                        args = tuple(_draw_input(frng, ot, i, p, input_grid) for i, p in enumerate(ot.params))
                        calls.append(Invocation(other, args))
                    if not isinstance(evaluate(program, calls), RuntimeFault):
                        break
                else:
                    raise GenerationError(f"no fault-free test found for {mname}")
                tests.append(UnitTest(f"{prefix}_t{mi:02d}_{k}", fname, tuple(calls)))
        families[fname] = Family(fname, methods, tests)
    return Corpus(families)


def _returns(src: str) -> str:
    _, pms, _ = parse_methods(src)
    return pms[0].decl.return_type
