"""Forward evaluation on a shared trampoline.

Both evaluation and update run in continuation-passing style: every step is
a zero-argument callable returning the next step, so deeply nested programs
never grow the host call stack.  Forward results are memoized per session so
the update engine can re-examine operand values cheaply.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .core import (
    EMPTY_DICT, EApp, EApplyLens, ECase, ECons, EConst, EFreeze, EFun, EIf,
    EList, ELet, EParen, EProj, ERecord, ERecordExtend, EVar, Exp, Op,
    OP_ARITY, Env, Val, VClosure, VConst, VDict, VList, VPartial, VRecord,
    env_lookup, match_pattern, strip_parens, struct_key, val_equal, vbool,
)

ERROR_KINDS = frozenset([
    "unbound-variable", "type-mismatch", "no-matching-branch",
    "division-by-zero", "missing-field", "lens-shape-error",
    "stack-budget-exceeded",
])


class EvalError(Exception):
    def __init__(self, kind: str, message: str, pos=None):
        assert kind in ERROR_KINDS, kind
        self.kind = kind
        self.message = message
        self.pos = pos
        where = f" at {pos[0]}:{pos[1]}" if pos else ""
        super().__init__(f"{kind}{where}: {message}")


@dataclass
class UpdateConfig:
    merge_mode: str = "three-way"
    max_solutions: int = 10
    step_budget: Optional[int] = None
    # Wholesale mode disables edit-difference propagation: every visited node
    # re-derives its change from full old/new values (benchmark baseline).
    wholesale: bool = False

    def __post_init__(self):
        if self.merge_mode not in ("two-way", "three-way"):
            raise ValueError(f"bad merge mode {self.merge_mode!r}")
        if self.max_solutions < 1:
            raise ValueError("max_solutions must be >= 1")


class Session:
    """Per-run engine state: step budget, eval memo, instrumentation."""

    def __init__(self, cfg: Optional[UpdateConfig] = None):
        self.cfg = cfg or UpdateConfig()
        self.steps = 0
        self.memo: dict = {}
        # extended environments built during evaluation, reused by update
        # rules so their re-evaluations stay memoized
        self.ext_memo: dict = {}
        self.node_visits = 0  # update-rule dispatches (diff-path instrumentation)

    def tick(self):
        self.steps += 1
        budget = self.cfg.step_budget
        if budget is not None and self.steps > budget:
            raise EvalError("stack-budget-exceeded",
                            f"step budget of {budget} exhausted")


# ---------------------------------------------------------------------------
# Trampoline


class Emitted:
    """A delivered result plus the paused machine to resume for more."""

    __slots__ = ("value", "resume")

    def __init__(self, value, resume):
        self.value = value
        self.resume = resume


def drive(step):
    """Run steps until the next emission; None when the machine is exhausted."""
    while step is not None:
        r = step()
        if isinstance(r, Emitted):
            return r
        step = r
    return None


def evaluate(env: Optional[Env], e: Exp, session: Optional[Session] = None) -> Val:
    """Big-step evaluation of `e` under `env`."""
    s = session or Session()
    r = drive(eval_k(s, env, e, lambda v: Emitted(v, None)))
    assert r is not None
    return r.value


# ---------------------------------------------------------------------------
# Evaluation in CPS


def eval_k(S: Session, env, e: Exp, k: Callable):
    def step():
        S.tick()
        t = type(e)
        # atoms: no memo entry, value computed in place
        if t is EConst:
            if e.value is EMPTY_DICT:
                return k(VDict({}))
            return k(VConst(e.value))
        if t is EVar:
            hit = env_lookup(env, e.name)
            if hit is None:
                raise EvalError("unbound-variable",
                                f"unbound variable {e.name!r}", e.pos)
            return k(hit[1])
        key = (env, e)
        hit = S.memo.get(key)
        if hit is not None:
            return k(hit)

        def done(v):
            # Bounce: invoking the continuation through the driver keeps the
            # host stack flat even when results ascend from deep subtrees.
            S.memo[key] = v
            return lambda: k(v)

        return _eval_dispatch(S, env, e, done)

    return step


def _eval_dispatch(S, env, e, k):
    if isinstance(e, EConst):
        if e.value is EMPTY_DICT:
            return k(VDict({}))
        return k(VConst(e.value))

    if isinstance(e, EVar):
        hit = env_lookup(env, e.name)
        if hit is None:
            raise EvalError("unbound-variable", f"unbound variable {e.name!r}",
                            e.pos)
        return k(hit[1])

    if isinstance(e, EParen):
        return eval_k(S, env, e.inner, k)

    if isinstance(e, EFun):
        return k(VClosure(env, e.pat, e.body))

    if isinstance(e, EApp):
        def k_fn(fv):
            def k_arg(av):
                return apply_k(S, fv, av, k, e.pos)
            return eval_k(S, env, e.arg, k_arg)
        return eval_k(S, env, e.fn, k_fn)

    if isinstance(e, ECons):
        def k_head(hv):
            def k_tail(tv):
                if not isinstance(tv, VList):
                    raise EvalError("type-mismatch",
                                    "cons onto a non-list value", e.pos)
                return k(VList((hv,) + tv.items))
            return eval_k(S, env, e.tail, k_tail)
        return eval_k(S, env, e.head, k_head)

    if isinstance(e, EList):
        items = e.items
        acc: list = []

        def go(i):
            if i == len(items):
                return k(VList(tuple(acc)))
            def k_item(v, i=i):
                acc.append(v)
                return go(i + 1)
            return eval_k(S, env, items[i], k_item)
        return go(0)

    if isinstance(e, ERecord):
        fields = e.fields
        out: dict = {}

        def go_r(i):
            if i == len(fields):
                return k(VRecord(out))
            def k_field(v, i=i):
                out[fields[i].name] = v
                return go_r(i + 1)
            return eval_k(S, env, fields[i].value, k_field)
        return go_r(0)

    if isinstance(e, ERecordExtend):
        def k_base(bv):
            if not isinstance(bv, VRecord):
                raise EvalError("type-mismatch",
                                "record extension of a non-record", e.pos)
            def k_val(fv):
                out = dict(bv.fields)
                out[e.name] = fv
                return k(VRecord(out))
            return eval_k(S, env, e.value, k_val)
        return eval_k(S, env, e.base, k_base)

    if isinstance(e, EProj):
        def k_base(bv):
            if not isinstance(bv, VRecord):
                raise EvalError("type-mismatch",
                                f"projection .{e.name} of a non-record", e.pos)
            if e.name not in bv.fields:
                raise EvalError("missing-field",
                                f"record has no field {e.name!r}", e.pos)
            return k(bv.fields[e.name])
        return eval_k(S, env, e.base, k_base)

    if isinstance(e, ELet):
        cached = S.ext_memo.get((env, e))
        if cached is not None:
            return eval_k(S, cached, e.body, k)
        if e.rec:
            inner = strip_parens(e.bound)
            if isinstance(inner, EFun):
                clo = VClosure(env, inner.pat, inner.body, rec_name=e.pat.name)
                env2 = Env(env, e.pat.name, clo)
                S.ext_memo[(env, e)] = env2
                return eval_k(S, env2, e.body, k)
        def k_bound(bv):
            bindings = match_pattern(e.pat, bv)
            if bindings is None:
                raise EvalError("no-matching-branch",
                                "let pattern does not match bound value", e.pos)
            env2 = env
            for name, val in bindings:
                env2 = Env(env2, name, val)
            S.ext_memo[(env, e)] = env2
            return eval_k(S, env2, e.body, k)
        return eval_k(S, env, e.bound, k_bound)

    if isinstance(e, EIf):
        def k_guard(gv):
            if not (isinstance(gv, VConst) and isinstance(gv.value, bool)):
                raise EvalError("type-mismatch", "if guard is not a boolean",
                                e.pos)
            return eval_k(S, env, e.then if gv.value else e.els, k)
        return eval_k(S, env, e.guard, k_guard)

    if isinstance(e, ECase):
        def k_scrut(sv):
            hit = S.ext_memo.get((env, e))
            if hit is not None:
                idx, env2 = hit
                return eval_k(S, env2, e.branches[idx].body, k)
            for idx, br in enumerate(e.branches):
                bindings = match_pattern(br.pat, sv)
                if bindings is not None:
                    env2 = env
                    for name, val in bindings:
                        env2 = Env(env2, name, val)
                    S.ext_memo[(env, e)] = (idx, env2)
                    return eval_k(S, env2, br.body, k)
            raise EvalError("no-matching-branch",
                            "no case branch matches the scrutinee", e.pos)
        return eval_k(S, env, e.scrutinee, k_scrut)

    if isinstance(e, EFreeze):
        return eval_k(S, env, e.arg, k)

    if isinstance(e, EApplyLens):
        def k_lens(lv):
            apply_fn = lens_field(lv, "apply", e.pos)
            def k_arg(av):
                return apply_k(S, apply_fn, av, k, e.pos)
            return eval_k(S, env, e.arg, k_arg)
        return eval_k(S, env, e.lens, k_lens)

    raise TypeError(f"cannot evaluate {type(e).__name__}")


def lens_field(lens_val: Val, name: str, pos) -> Val:
    if not isinstance(lens_val, VRecord):
        raise EvalError("lens-shape-error", "lens is not a record", pos)
    fn = lens_val.fields.get(name)
    if fn is None:
        raise EvalError("lens-shape-error", f"lens lacks the {name!r} field", pos)
    if not isinstance(fn, (VClosure, VConst, VPartial)):
        raise EvalError("lens-shape-error",
                        f"lens field {name!r} is not callable", pos)
    return fn


def apply_k(S, fv: Val, av: Val, k, pos):
    if isinstance(fv, VClosure):
        env2 = S.ext_memo.get((fv, av))
        if env2 is None:
            bindings = match_pattern(fv.pat, av)
            if bindings is None:
                raise EvalError("no-matching-branch",
                                "function argument does not match its pattern",
                                pos)
            env2 = fv.env
            if fv.rec_name is not None:
                env2 = Env(env2, fv.rec_name, fv)
            for name, val in bindings:
                env2 = Env(env2, name, val)
            S.ext_memo[(fv, av)] = env2
        return eval_k(S, env2, fv.body, k)
    if isinstance(fv, VConst) and isinstance(fv.value, Op):
        op = fv.value
        if OP_ARITY[op] == 1:
            return apply_prim_k(S, op, (av,), k, pos)
        return k(VPartial(op, (av,)))
    if isinstance(fv, VPartial):
        args = fv.args + (av,)
        if len(args) == OP_ARITY[fv.op]:
            return apply_prim_k(S, fv.op, args, k, pos)
        return k(VPartial(fv.op, args))
    raise EvalError("type-mismatch", "applied a non-function value", pos)


# ---------------------------------------------------------------------------
# Primitive operators


def _num(v: Val, pos, what: str) -> float:
    if isinstance(v, VConst) and isinstance(v.value, float) \
            and not isinstance(v.value, bool):
        return v.value
    raise EvalError("type-mismatch", f"{what} expects numbers", pos)


def _bool(v: Val, pos, what: str) -> bool:
    if isinstance(v, VConst) and isinstance(v.value, bool):
        return v.value
    raise EvalError("type-mismatch", f"{what} expects booleans", pos)


def _is_str(v: Val) -> bool:
    return isinstance(v, VConst) and isinstance(v.value, str)


def _is_num(v: Val) -> bool:
    return isinstance(v, VConst) and isinstance(v.value, float) \
        and not isinstance(v.value, bool)


def dict_key(v: Val, pos) -> str:
    if _contains_closure(v):
        raise EvalError("type-mismatch", "dictionary keys must be closure-free",
                        pos)
    return struct_key(v)


def _contains_closure(v: Val) -> bool:
    stack = [v]
    while stack:
        x = stack.pop()
        if isinstance(x, (VClosure, VPartial)):
            return True
        if isinstance(x, VList):
            stack.extend(x.items)
        elif isinstance(x, VRecord):
            stack.extend(x.fields.values())
        elif isinstance(x, VDict):
            for kv, val in x.entries.values():
                stack.append(kv)
                stack.append(val)
    return False


def apply_prim_k(S, op: Op, args: tuple, k, pos):
    if op is Op.UPDATE_APP:
        from .lenses import prim_update_app_k
        return prim_update_app_k(S, args[0], k, pos)
    if op is Op.DIFF:
        from .lenses import prim_diff
        return k(prim_diff(args[0], args[1]))
    if op is Op.MERGE:
        from .lenses import prim_merge
        return k(prim_merge(args[0], args[1], pos))
    return k(apply_prim(op, args, pos))


def apply_prim(op: Op, args: tuple, pos=None) -> Val:
    """Pure primitive operator semantics (everything but the lens trio)."""
    if op is Op.PLUS:
        a, b = args
        if _is_str(a) and _is_str(b):
            return VConst(a.value + b.value)
        return VConst(_num(a, pos, "+") + _num(b, pos, "+"))
    if op is Op.TIMES:
        return VConst(_num(args[0], pos, "*") * _num(args[1], pos, "*"))
    if op is Op.CONCAT:
        a, b = args
        if _is_str(a) and _is_str(b):
            return VConst(a.value + b.value)
        if isinstance(a, VList) and isinstance(b, VList):
            return VList(a.items + b.items)
        raise EvalError("type-mismatch", "++ expects two strings or two lists",
                        pos)
    if op is Op.AND:
        return vbool(_bool(args[0], pos, "&&") and _bool(args[1], pos, "&&"))
    if op is Op.OR:
        return vbool(_bool(args[0], pos, "||") or _bool(args[1], pos, "||"))
    if op is Op.NOT:
        return vbool(not _bool(args[0], pos, "not"))
    if op in (Op.LT, Op.LEQ, Op.GT, Op.GEQ):
        a, b = args
        if _is_str(a) and _is_str(b):
            x, y = a.value, b.value
        else:
            x, y = _num(a, pos, op.value), _num(b, pos, op.value)
        if op is Op.LT:
            return vbool(x < y)
        if op is Op.LEQ:
            return vbool(x <= y)
        if op is Op.GT:
            return vbool(x > y)
        return vbool(x >= y)
    if op is Op.EQ:
        return vbool(val_equal(args[0], args[1]))
    if op is Op.DICT_FROMLIST:
        pairs = args[0]
        if not isinstance(pairs, VList):
            raise EvalError("type-mismatch", "Dict.fromList expects a list", pos)
        entries: dict = {}
        for pair in pairs.items:
            if not (isinstance(pair, VList) and len(pair.items) == 2):
                raise EvalError("type-mismatch",
                                "Dict.fromList expects [key, value] pairs", pos)
            kv, val = pair.items
            entries[dict_key(kv, pos)] = (kv, val)
        return VDict(entries)
    if op is Op.DICT_GET:
        kv, d = args
        if not isinstance(d, VDict):
            raise EvalError("type-mismatch", "Dict.get expects a dictionary",
                            pos)
        hit = d.entries.get(dict_key(kv, pos))
        return VList((hit[1],)) if hit is not None else VList(())
    if op is Op.DICT_INSERT:
        kv, val, d = args
        if not isinstance(d, VDict):
            raise EvalError("type-mismatch", "Dict.insert expects a dictionary",
                            pos)
        entries = dict(d.entries)
        entries[dict_key(kv, pos)] = (kv, val)
        return VDict(entries)
    if op is Op.DICT_REMOVE:
        kv, d = args
        if not isinstance(d, VDict):
            raise EvalError("type-mismatch", "Dict.remove expects a dictionary",
                            pos)
        entries = dict(d.entries)
        entries.pop(dict_key(kv, pos), None)
        return VDict(entries)
    raise TypeError(f"unhandled primitive {op}")
