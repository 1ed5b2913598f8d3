import random

from bideval.core import VConst, VList, val_equal
from bideval.interp import Session, UpdateConfig, evaluate
from bideval.prelude import prelude_env
from bideval.syntax import parse, parse_value, print_value, unparse
from bideval.update import update

ENV = prelude_env()


def run(src):
    return evaluate(ENV, parse(src))


def sols(src, newv, n=10, mode="three-way"):
    stream = update(ENV, parse(src), parse_value(newv),
                    UpdateConfig(merge_mode=mode))
    return [(unparse(s.new_exp), dict(s.env_diff)) for s in stream.take(n)]


def test_range():
    assert print_value(run("List.range -2 2")) == "[-2, -1, 0, 1, 2]"
    assert print_value(run("List.range 3 2")) == "[]"


def test_forward_behaviors_match_reference():
    rng = random.Random(8)
    for _ in range(60):
        xs = [rng.randint(-5, 9) for _ in range(rng.randint(0, 6))]
        lit = "[" + ", ".join(map(str, xs)) + "]"
        got = run(f"List.map (\\x -> x + 1) {lit}")
        assert [v.value for v in got.items] == [x + 1 for x in xs]
        got = run(f"List.indexedMap (\\i x -> i * x) {lit}")
        assert [v.value for v in got.items] == [i * x for i, x in enumerate(xs)]
        ys = [rng.randint(0, 3) for _ in range(rng.randint(0, 4))]
        lit2 = "[" + ", ".join(map(str, ys)) + "]"
        got = run(f"List.append {lit} {lit2}")
        assert [v.value for v in got.items] == xs + ys
        assert run(f"List.length {lit}").value == len(xs)


def test_indexed_map_parity_coloring():
    src = ('List.indexedMap (\\i x -> if Num.mod2 i < 1 '
           'then "lightgray" else "white") [0, 0, 0, 0]')
    assert print_value(run(src)) == \
        '["lightgray", "white", "lightgray", "white"]'


def test_maybe_map_forward():
    assert print_value(run("maybeMap 0 (\\x -> x * 2) [21]")) == "[42]"
    assert print_value(run("maybeMap 0 (\\x -> x * 2) []")) == "[]"


def test_if_lens_behaviors():
    assert print_value(run("if_ True 1 2")) == "1"
    got = sols("if_ True 1 2", "2")
    codes = [c for c, _ in got]
    assert codes[0] == "if_ True 2 2"  # same-branch first
    assert "if_ False 1 2" in codes   # then the guard flip
    assert sols("if_ True 1 2", "1") == [("if_ True 1 2", {})]


def test_map_lens_single_update():
    # forward output is [2, 3, 4]; change the middle element only
    got = sols("map (\\x -> x + 1) [1, 2, 3]", "[2, 9, 4]", n=3)
    codes = [c for c, _ in got]
    assert "map (\\x -> x + 1) [1, 8, 3]" in codes
    # the element-only repair reproduces the goal exactly
    out = evaluate(ENV, parse("map (\\x -> x + 1) [1, 8, 3]"))
    assert print_value(out) == "[2, 9, 4]"


def test_map_lens_empty_unchanged():
    assert sols("map (\\x -> x + 1) []", "[]") == \
        [("map (\\x -> x + 1) []", {})]


def test_map_lens_insertion_seeds_from_neighbor():
    got = sols('map (\\x -> x + "!") ["a", "b"]', '["a!", "b!", "c!"]', n=5)
    codes = [c for c, _ in got]
    assert 'map (\\x -> x + "!") ["a", "b", "c"]' in codes


def test_map_lens_multi_edit_with_insertions():
    # updates plus insertions, as in the motivating map display
    got = sols('map (\\x -> x + "!") ["v1", "v3", "v4"]',
               '["v1x!", "v2!", "v3!", "v4x!", "v5!"]', n=10)
    codes = [c for c, _ in got]
    assert 'map (\\x -> x + "!") ["v1x", "v2", "v3", "v4x", "v5"]' in codes


def test_map_lens_no_seed_no_insert():
    assert sols("map (\\x -> x + 1) []", "[5]") == []


def test_append_lens_boundary():
    got = sols("List.append [1] [2]", "[1, 9, 2]", n=5)
    codes = [c for c, _ in got]
    assert set(codes) == {"List.append [1] [9,2]",
                          "List.append [1,9] [2]"}
    assert codes[0] == "List.append [1] [9,2]"  # right side first
    for code, _ in got:
        out = evaluate(ENV, parse(code))
        assert print_value(out) == "[1, 9, 2]"


def test_append_lens_interior():
    got = sols("List.append [1, 2] [3]", "[1, 9, 3]", n=5)
    codes = [c for c, _ in got]
    assert "List.append [1, 9] [3]" in codes


def test_fold_diff_sees_only_keeps():
    src = """Update.foldDiff
      { onKeep = \\a -> a ++ ["k"]
      , onDelete = \\a -> a ++ ["d"]
      , onInsert = \\v a -> a ++ ["i"]
      , onUpdate = \\d a -> a ++ ["u"] }
      []
      [{kind = "Keep"}, {kind = "Keep"}]"""
    assert print_value(run(src)) == '["k", "k"]'


def test_prelude_never_edited():
    # a change that could only be absorbed by a library body yields nothing
    from bideval.program import update_source
    src = 'main = maybeMapSimple (\\x -> x + 1) [3]\n'
    got = list(update_source(src, parse_value("[4, 9]")))
    assert got == []


def test_states_table_two_cell_edit_single_solution():
    from bideval.bundled import example_source, replace_text
    from bideval.program import run_source, update_source
    src = example_source("states-table")
    v = run_source(src)
    v1 = replace_text(v, "Montgomery, AL?", "Montgomery, AL")
    v1 = replace_text(v1, "Juneau, AL?", "Juneau, AK")
    sols = list(update_source(src, v1))
    assert len(sols) == 1
    assert sols[0].summary == "L2 Removed [?] L3 Replaced [L?] by [K]"


def test_states_table_color_edit_propagates_to_all_rows():
    # editing one cell's style repairs the shared color literal, so every
    # alternating row changes on re-evaluation
    from bideval.bundled import example_source, replace_text
    from bideval.program import run_source, update_source
    src = example_source("states-table")
    v = run_source(src)
    v2 = replace_text(v, "background-color:lightgray",
                      "background-color:yellow")
    sols = list(update_source(src, v2))
    assert len(sols) == 1
    assert "Replaced [lightgray] by [yellow]" in sols[0].summary
    out = print_value(run_source(sols[0].code))
    assert out.count("yellow") == 8 and "lightgray" not in out


def test_states_table_attr_insertion_pretty_local():
    # a new [name, value] attribute pair lands inside a user list literal
    from bideval.bundled import example_source
    from bideval.program import run_source, update_source
    src = example_source("states-table")
    v = run_source(src)
    table = v
    header_row = table.items[2].items[0]
    th = header_row.items[2].items[0]
    new_attrs = VList(th.items[1].items + (
        VList((VConst("style"), VConst("background-color:orange"))),))
    new_th = VList((th.items[0], new_attrs, th.items[2]))
    new_hr = VList((header_row.items[0], header_row.items[1],
                    VList((new_th,) + header_row.items[2].items[1:])))
    v2 = VList((table.items[0], table.items[1],
                VList((new_hr,) + table.items[2].items[1:])))
    sols = list(update_source(src, v2))
    assert len(sols) == 1
    assert 'Inserted [["style", "background-color:orange"]]' in sols[0].summary
    out = print_value(run_source(sols[0].code))
    assert "background-color:orange" in out


def test_html_constructors():
    v = run('Html.td [["background-color", "white"]] [] [Html.text "hi"]')
    assert print_value(v) == \
        '["td", [["style", "background-color:white"]], [["TEXT", "hi"]]]'
    v2 = run('Html.tr [] [["id", "row1"]] []')
    assert print_value(v2) == '["tr", [["id", "row1"]], []]'
