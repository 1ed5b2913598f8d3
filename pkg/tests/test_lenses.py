import pytest

from bideval.core import VConst, VList, VRecord, val_equal
from bideval.interp import EvalError, Session, UpdateConfig, evaluate
from bideval.lenses import eval_lens_apply, prim_diff, prim_merge
from bideval.prelude import prelude_env
from bideval.syntax import parse, parse_value, print_value, unparse
from bideval.update import update


def sols(src, newv, env=None, n=10, mode="three-way"):
    cfg = UpdateConfig(merge_mode=mode)
    stream = update(env, parse(src), parse_value(newv), cfg)
    return [(unparse(s.new_exp), dict(s.env_diff)) for s in stream.take(n)]


IDENT_LENS = "{apply = \\x -> x, update = \\r -> {values = [r.outputNew]}}"


def test_eval_lens_apply_identity():
    v = eval_lens_apply(None, parse(IDENT_LENS), parse("[1, 2]"))
    assert print_value(v) == "[1, 2]"


def test_eval_lens_missing_apply():
    with pytest.raises(EvalError) as exc:
        evaluate(None, parse("Update.applyLens {update = \\r -> r} 5"))
    assert exc.value.kind == "lens-shape-error"


def test_lens_forward_needs_only_apply():
    v = evaluate(None, parse("Update.applyLens {apply = \\x -> x + 1} 2"))
    assert v.value == 3.0


def test_u_lens_identity_pushback():
    got = sols(f"Update.applyLens {IDENT_LENS} 5", "9")
    assert [g[0] for g in got] == [f"Update.applyLens {IDENT_LENS} 9"]


def test_u_lens_never_touches_lens_expr():
    env = prelude_env()
    e = parse("Update.applyLens (maybeMapLens 0) [\\x -> x + 1, [3]]")
    stream = update(env, e, parse_value("[9]"), UpdateConfig())
    got = stream.take(10)
    assert got
    for sol in got:
        assert sol.new_exp.lens is e.lens


def test_u_lens_respects_returned_diffs():
    lens = ("{apply = \\x -> x, update = \\r -> "
            "{values = [r.outputNew], diffs = [Update.diff r.input r.outputNew]}}")
    got = sols(f"Update.applyLens {lens} [1, 2]", "[1, 5]")
    assert got[0][0] == f"Update.applyLens {lens} [1, 5]"


def test_u_lens_diffs_length_mismatch():
    lens = ("{apply = \\x -> x, update = \\r -> "
            "{values = [r.outputNew], diffs = []}}")
    with pytest.raises(EvalError) as exc:
        sols(f"Update.applyLens {lens} 1", "2")
    assert exc.value.kind == "lens-shape-error"


def test_update_app_plus_residual():
    v = evaluate(None, parse(
        "Update.updateApp {fun = \\x -> x + 1, input = 2, outputNew = 5}"))
    assert print_value(v) == "{values = [4]}"


def test_update_app_identity():
    v = evaluate(None, parse(
        "Update.updateApp {fun = \\x -> x, input = [1], outputNew = [1]}"))
    assert print_value(v) == "{values = [[1]]}"


def test_update_app_pair_trick_updates_functions():
    # pushing a changed output through (g, w) pairs lets the function change
    src = """Update.updateApp
      { fun = \\gw -> case gw of [g, w] -> g w
      , input = [\\x -> x + 1, 5]
      , outputNew = 9 }"""
    v = evaluate(None, parse(src))
    values = v.fields["values"]
    assert values.items, "expected at least one candidate"
    for pair in values.items:
        g, w = pair.items
        assert _apply(g, w) == "9"  # every candidate hits the target


def _apply(g, w):
    from bideval.core import Env
    from bideval.interp import apply_k, drive, Emitted, Session
    r = drive(apply_k(Session(), g, w, lambda v: Emitted(v, None), None))
    return print_value(r.value)


def test_update_app_fixes_env_and_body():
    # a candidate that must edit the function body is not offered
    v = evaluate(None, parse(
        'Update.updateApp {fun = \\x -> "const", input = 1, '
        'outputNew = "other"}'))
    assert print_value(v) == "{values = []}"


def test_prim_diff_maybe_encoding():
    assert print_value(prim_diff(parse_value("[1, 2]"),
                                 parse_value("[1, 2]"))) == "[]"
    got = prim_diff(parse_value('["a", "b"]'), parse_value('["a", "c", "b"]'))
    assert print_value(got) == \
        '[[{kind = "Keep"}, {kind = "Insert", value = "c"}, {kind = "Keep"}]]'
    got2 = prim_diff(parse_value("1"), parse_value('"a"'))
    assert print_value(got2) == '[{kind = "Replace", value = "a"}]'


def test_prim_merge_fold():
    assert prim_merge(parse_value("1"), parse_value("[1]")).value == 1.0
    assert prim_merge(parse_value("1"), parse_value("[2, 3]")).value == 3.0
    v = prim_merge(parse_value("[1, 1]"), parse_value("[[2, 1], [1, 2]]"))
    assert print_value(v) == "[2, 2]"


def test_prim_merge_closures():
    env = prelude_env()
    src = """let f = \\x -> x + 1 in
             let f1 = \\x -> x + 2 in
             let f2 = \\x -> x + 1 in
             Update.merge f [f1, f2]"""
    v = evaluate(env, parse(src))
    assert _apply(v, VConst(10.0)) == "12"


def test_update_app_identity_round_trip():
    # outputNew equal to the real output returns the input unchanged
    v = evaluate(None, parse(
        "Update.updateApp {fun = \\x -> [x, x], input = 7, "
        "outputNew = [7, 7]}"))
    assert print_value(v) == "{values = [7]}"
