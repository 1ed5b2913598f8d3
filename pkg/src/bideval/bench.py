"""Timing harness: evaluation vs optimized vs wholesale update."""

from __future__ import annotations

import contextlib
import gc
import time
from dataclasses import dataclass

from .bundled import EXAMPLES, SCRIPTED_EDITS, example_source
from .core import VConst, VList, val_equal
from .diffs import diff_vals
from .interp import Session, UpdateConfig, evaluate
from .prelude import prelude_env
from .syntax import parse_program
from .update import update_with_diff

CSV_COLUMNS = ["example", "loc", "eval_ms", "upd_ms_opt", "upd_ms_naive",
               "speedup", "n_solutions"]


@dataclass
class BenchRow:
    example: str
    loc: int
    eval_ms: float
    upd_ms_opt: float
    upd_ms_naive: float
    speedup: float
    n_solutions: int


@contextlib.contextmanager
def _quiet_gc():
    was_enabled = gc.isenabled()
    gc.collect()
    gc.disable()
    try:
        yield
    finally:
        if was_enabled:
            gc.enable()


def _time_ms(fn, trials: int, stat: str = "mean") -> float:
    with _quiet_gc():
        times = []
        for _ in range(trials):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
    if stat == "min":
        return min(times) * 1000.0
    return sum(times) * 1000.0 / trials


def bench_case(name: str, src: str, edit, trials: int,
               stat: str = "mean") -> BenchRow:
    env = prelude_env()
    exp = parse_program(src)
    loc = src.count("\n")
    pick = min if stat == "min" else (lambda xs: sum(xs) / len(xs))

    def do_eval():
        evaluate(env, exp, Session())
    eval_ms = _time_ms(do_eval, trials, stat=stat)

    v_old = evaluate(env, exp, Session())
    v_new = edit(v_old)
    if val_equal(v_old, v_new):
        return BenchRow(name, loc, eval_ms, 0.0, 0.0, 1.0, 0)
    d = diff_vals(v_old, v_new)

    n_solutions = 0

    def do_update(cfg):
        # forward-pass memo warmed first, as in real update sessions, so the
        # timing isolates backward propagation
        nonlocal n_solutions
        session = Session(cfg)
        evaluate(env, exp, session)
        t0 = time.perf_counter()
        stream = update_with_diff(env, exp, v_old, d, cfg, session,
                                  accept=lambda sol: not sol.env_diff)
        n_solutions = len(stream.take(cfg.max_solutions))
        return time.perf_counter() - t0

    with _quiet_gc():
        opt_ms = pick([do_update(UpdateConfig())
                       for _ in range(trials)]) * 1000.0
        naive_ms = pick([do_update(UpdateConfig(wholesale=True))
                         for _ in range(trials)]) * 1000.0
    speedup = naive_ms / opt_ms if opt_ms > 0 else float("inf")
    return BenchRow(name, loc, eval_ms, opt_ms, naive_ms, speedup, n_solutions)


def synthetic_case(size: int, trials: int, stat: str = "mean") -> BenchRow:
    """A large string-list literal with one element changed in the output."""
    filler = "lorem ipsum dolor sit amet consectetur adipiscing elit " * 4
    items = ", ".join(f'"entry {i}: {filler}"' for i in range(size))
    src = f"main = [{items}]\n"
    def edit(v):
        idx = int(size * 0.7)
        new_items = list(v.items)
        new_items[idx] = VConst("the replacement element")
        return VList(tuple(new_items))
    return bench_case(f"synthetic-{size}", src, edit, trials, stat=stat)


def run_bench(trials: int = 10, synthetic_size: int = 10000) -> list:
    rows = []
    for ex in EXAMPLES:
        edit = SCRIPTED_EDITS.get(ex.id)
        if edit is None:
            continue
        rows.append(bench_case(ex.id, example_source(ex.id), edit, trials))
    rows.append(synthetic_case(synthetic_size, max(1, trials // 2)))
    return rows


def render_csv(rows: list) -> str:
    out = [",".join(CSV_COLUMNS)]
    for r in rows:
        out.append(",".join([
            r.example, str(r.loc), f"{r.eval_ms:.3f}", f"{r.upd_ms_opt:.3f}",
            f"{r.upd_ms_naive:.3f}", f"{r.speedup:.2f}", str(r.n_solutions),
        ]))
    return "\n".join(out) + "\n"
