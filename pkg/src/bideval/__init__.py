"""bideval: a bidirectional interpreter for a small functional language.

Programs evaluate forward as usual; pushing a changed output value backward
through a program synthesizes candidate repairs.  Custom lenses let library
code take over the backward direction for specific call shapes.
"""

from .core import (
    Env, Exp, Pat, Val, VClosure, VConst, VDict, VList, VRecord,
    UncoercibleClosure, free_vars, match_pattern, val_equal, val_to_exp,
)
from .diffs import (
    DiffError, VDiff, apply_vdiff, decode_diff, diff_vals, encode_diff,
    merge_envs2, merge_envs3, merge_vals3, string_concat_split,
)
from .interp import EvalError, Session, UpdateConfig, evaluate
from .lenses import eval_lens_apply, prim_diff, prim_merge
from .prelude import build_env, prelude_env, prelude_source
from .program import ProgramSolution, run_source, update_source
from .syntax import (
    ParseError, parse, parse_program, parse_value, print_value,
    summarize_text_diff, unparse,
)
from .update import Solution, SolutionStream, update, update_with_diff

__all__ = [
    "Env", "Exp", "Pat", "Val", "VClosure", "VConst", "VDict", "VList",
    "VRecord", "UncoercibleClosure", "free_vars", "match_pattern",
    "val_equal", "val_to_exp",
    "DiffError", "VDiff", "apply_vdiff", "decode_diff", "diff_vals",
    "encode_diff", "merge_envs2", "merge_envs3", "merge_vals3",
    "string_concat_split",
    "EvalError", "Session", "UpdateConfig", "evaluate",
    "eval_lens_apply", "prim_diff", "prim_merge",
    "build_env", "prelude_env", "prelude_source",
    "ProgramSolution", "run_source", "update_source",
    "ParseError", "parse", "parse_program", "parse_value", "print_value",
    "summarize_text_diff", "unparse",
    "Solution", "SolutionStream", "update", "update_with_diff",
]

__version__ = "0.1.0"
