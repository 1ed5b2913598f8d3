"""Program-level operations: run and update whole source files.

A program is a definitions file with a `main`; it evaluates under the shared
prelude environment.  Update solutions that would modify prelude bindings are
discarded: library definitions are not editable through output changes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

from .core import Val
from .diffs import VDiff, diff_vals
from .interp import Session, UpdateConfig, evaluate
from .prelude import prelude_env
from .syntax import parse_program, summarize_text_diff, unparse
from .update import Solution, SolutionStream, update_with_diff


@dataclass(eq=False)
class ProgramSolution:
    code: str
    summary: str
    solution: Solution

    def output(self, step_budget: Optional[int] = None) -> Val:
        """Re-evaluate this solution's program."""
        return run_source(self.code, step_budget=step_budget)


def run_source(src: str, step_budget: Optional[int] = None,
               session: Optional[Session] = None) -> Val:
    env = prelude_env()
    exp = parse_program(src)
    s = session or Session(UpdateConfig(step_budget=step_budget))
    return evaluate(env, exp, s)


def update_source(src: str, new_output: Val,
                  cfg: Optional[UpdateConfig] = None,
                  output_diff: Optional[VDiff] = None,
                  session: Optional[Session] = None):
    """Lazily enumerate whole-program repairs for a new `main` output.

    Yields ProgramSolution values; the stream is deduplicated, capped by the
    config, and never contains prelude edits.
    """
    cfg = cfg or UpdateConfig()
    env = prelude_env()
    exp = parse_program(src)
    s = session or Session(cfg)
    v_old = evaluate(env, exp, s)
    d = output_diff if output_diff is not None \
        else diff_vals(v_old, new_output)
    stream = update_with_diff(env, exp, v_old, d, cfg, s,
                              accept=lambda sol: not sol.env_diff)
    return _program_solutions(src, stream)


def _program_solutions(src: str, stream: SolutionStream) -> Iterator[ProgramSolution]:
    for sol in stream:
        code = unparse(sol.new_exp)
        yield ProgramSolution(code, summarize_text_diff(src, code), sol)
