"""Bundled example programs and their scripted edits (for bench/tests)."""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from typing import Optional

from .core import Val, VConst, VList


@dataclass(frozen=True)
class Example:
    id: str
    title: str
    filename: str


EXAMPLES = [
    Example("states-table", "HTML table of US states and capitals",
            "states_table.leo"),
    Example("map-abs", "Control-flow repair through a map lens",
            "map_abs.leo"),
    Example("maybe-rows", "maybeMap lens over optional table rows",
            "maybe_rows.leo"),
    Example("arith", "A single ambiguous addition", "arith.leo"),
    Example("greeting", "Concatenated greeting text", "greeting.leo"),
    Example("dict-demo", "Dictionary lookups", "dict_demo.leo"),
]


def example_ids() -> list:
    return [ex.id for ex in EXAMPLES]


def example_source(example_id: str) -> Optional[str]:
    for ex in EXAMPLES:
        if ex.id == example_id:
            path = importlib.resources.files("bideval").joinpath(
                "examples", ex.filename)
            return path.read_text(encoding="utf-8")
    return None


# ---------------------------------------------------------------------------
# Scripted single edits over example outputs, for benchmarks and parity tests.


def replace_text(v: Val, old: str, new: str) -> Val:
    """Replace string leaves equal to `old` (first match) in a value tree."""
    done = [False]

    def walk(x: Val) -> Val:
        if done[0]:
            return x
        if isinstance(x, VConst) and x.value == old:
            done[0] = True
            return VConst(new)
        if isinstance(x, VList):
            return VList(tuple(walk(i) for i in x.items))
        return x
    out = walk(v)
    return out if done[0] else v


SCRIPTED_EDITS: dict = {
    "states-table": lambda v: replace_text(v, "Montgomery, AL?",
                                           "Montgomery, AL"),
    "map-abs": lambda v: VList(v.items[:-1] + (VConst(2.0),)),
    "maybe-rows": lambda v: VList((VList(()),) + v.items[1:]),
    "arith": lambda v: VConst(4.0),
    "greeting": lambda v: VConst("Hello, world?"),
    "dict-demo": lambda v: VList((VList((VConst(7.0),)),) + v.items[1:]),
}
