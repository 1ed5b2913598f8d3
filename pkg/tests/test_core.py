import random

import pytest

from bideval.core import (
    EApp, EConst, EFun, EVar, Env, PVar, UncoercibleClosure, VClosure, VConst,
    VList, VRecord, free_vars, match_pattern, pat_vars, val_equal, val_to_exp,
)
from bideval.interp import evaluate
from bideval.syntax import parse, unparse


def fv(src):
    return set(free_vars(parse(src)))


def test_free_vars_binder_removes():
    assert fv("\\x -> x + y") == {"y"}


def test_free_vars_nonrecursive_let():
    # the bound expression scopes outside its own binding
    assert fv("let x = x in x") == {"x"}


def test_free_vars_letrec_scopes_inside():
    assert fv("letrec f = \\n -> f n in f") == set()


def test_free_vars_case():
    assert fv("case l of [] -> a; h :: t -> h") == {"l", "a"}


def _naive_fv(e, bound):
    """Independent recursive free-variable oracle with explicit bound sets."""
    from bideval.core import (
        EApp, EApplyLens, ECase, ECons, EConst, EFreeze, EFun, EIf, EList,
        ELet, EParen, EProj, ERecord, ERecordExtend, EVar,
    )
    if isinstance(e, EConst):
        return set()
    if isinstance(e, EVar):
        return set() if (e.phantom or e.name in bound) else {e.name}
    if isinstance(e, EFun):
        return _naive_fv(e.body, bound | set(pat_vars(e.pat)))
    if isinstance(e, EApp):
        return _naive_fv(e.fn, bound) | _naive_fv(e.arg, bound)
    if isinstance(e, ECons):
        return _naive_fv(e.head, bound) | _naive_fv(e.tail, bound)
    if isinstance(e, EList):
        out = set()
        for item in e.items:
            out |= _naive_fv(item, bound)
        return out
    if isinstance(e, ERecord):
        out = set()
        for f in e.fields:
            out |= _naive_fv(f.value, bound)
        return out
    if isinstance(e, ERecordExtend):
        return _naive_fv(e.base, bound) | _naive_fv(e.value, bound)
    if isinstance(e, EProj):
        return _naive_fv(e.base, bound)
    if isinstance(e, ELet):
        binders = set(pat_vars(e.pat))
        if e.rec:
            return (_naive_fv(e.bound, bound | binders)
                    | _naive_fv(e.body, bound | binders))
        return _naive_fv(e.bound, bound) | _naive_fv(e.body, bound | binders)
    if isinstance(e, EIf):
        return (_naive_fv(e.guard, bound) | _naive_fv(e.then, bound)
                | _naive_fv(e.els, bound))
    if isinstance(e, ECase):
        out = _naive_fv(e.scrutinee, bound)
        for br in e.branches:
            out |= _naive_fv(br.body, bound | set(pat_vars(br.pat)))
        return out
    if isinstance(e, EFreeze):
        return _naive_fv(e.arg, bound)
    if isinstance(e, EApplyLens):
        return _naive_fv(e.lens, bound) | _naive_fv(e.arg, bound)
    if isinstance(e, EParen):
        return _naive_fv(e.inner, bound)
    raise AssertionError(type(e))


def test_free_vars_matches_naive_oracle():
    from progen import gen_program
    for seed in range(120):
        e = parse(gen_program(seed, depth=6))
        assert set(free_vars(e)) == _naive_fv(e, set()), seed


def test_match_pattern_three_element_row():
    from bideval.syntax import parse_value
    p = parse("\\[state, abbrev, cap] -> state").pat
    v = parse_value('["Alabama", "AL?", ""]')
    got = match_pattern(p, v)
    assert [name for name, _ in got] == ["state", "abbrev", "cap"]
    assert got[0][1].value == "Alabama"
    assert got[1][1].value == "AL?"
    assert got[2][1].value == ""


def test_match_pattern_var_and_nomatch():
    assert match_pattern(PVar(name="x"), VConst(42.0))[0][0] == "x"
    p = parse("\\l -> case l of h :: t -> h").body.branches[0].pat
    assert match_pattern(p, VList(())) is None


def test_match_pattern_binding_order_property():
    from progen import Gen
    rng = random.Random(7)
    pats = ["[a, b, c]", "x :: rest", "{m = q, n = r}", "[x, [y, z]]"]
    vals = ['[1, 2, 3]', '[1, 2, 3]', '{m = 1, n = 2}', '[1, [2, 3]]']
    from bideval.syntax import parse_value
    for psrc, vsrc in zip(pats, vals):
        p = parse(f"\\{psrc} -> 0").pat
        got = match_pattern(p, parse_value(vsrc))
        assert [name for name, _ in got] == pat_vars(p)


def test_val_equal_nested_lists():
    from bideval.syntax import parse_value
    assert val_equal(parse_value("[1, [2]]"), parse_value("[1, [2]]"))
    assert not val_equal(parse_value('"a"'), parse_value('"A"'))
    assert not val_equal(VConst(True), VConst(1.0))


def test_val_equal_closures_restrict_to_free_vars():
    body = parse("y + x")
    env1 = Env(None, "x", VConst(1.0))
    env2 = Env(Env(None, "x", VConst(1.0)), "z", VConst(9.0))
    c1 = VClosure(env1, PVar(name="y"), body)
    c2 = VClosure(env2, PVar(name="y"), body)
    assert val_equal(c1, c2)  # z is not free in the body
    env3 = Env(None, "x", VConst(2.0))
    assert not val_equal(c1, VClosure(env3, PVar(name="y"), body))


def test_val_to_exp_literals():
    from bideval.syntax import parse_value, print_value
    v = parse_value('["Delaware", "DE", "Dover"]')
    assert unparse(val_to_exp(v)) == '["Delaware", "DE", "Dover"]'
    assert unparse(val_to_exp(VConst(5.0))) == "5"


def test_val_to_exp_rejects_capturing_closure():
    env = Env(None, "n", VConst(3.0))
    c = VClosure(env, PVar(name="y"), parse("y + n"))
    with pytest.raises(UncoercibleClosure):
        val_to_exp(c)


def random_value(rng, depth=3):
    from bideval.core import VDict
    roll = rng.random()
    if depth <= 0 or roll < 0.45:
        kind = rng.randrange(3)
        if kind == 0:
            return VConst(float(rng.randint(-20, 99)))
        if kind == 1:
            return VConst("".join(rng.choice("abc xyz?")
                                  for _ in range(rng.randint(0, 7))))
        return VConst(rng.random() < 0.5)
    if roll < 0.8:
        return VList(tuple(random_value(rng, depth - 1)
                           for _ in range(rng.randint(0, 5))))
    return VRecord({name: random_value(rng, depth - 1)
                    for name in ["a", "b"][:rng.randint(1, 2)]})


def test_val_to_exp_eval_round_trip():
    rng = random.Random(21)
    for _ in range(300):
        v = random_value(rng)
        assert val_equal(evaluate(None, val_to_exp(v)), v)
