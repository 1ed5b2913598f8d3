"""The evaluation-update engine.

Given a program (environment + expression) and a change to its output, the
engine enumerates candidate repairs: new (environment, expression) pairs that
reproduce the changed output.  Rules mirror forward evaluation; differences
are propagated as `VDiff` values so untouched subtrees are returned verbatim.

Control flow uses the shared trampoline: rules are written with success and
failure continuations (`sk(result, resume)` / `fk()`), every call returning a
thunk, so solution enumeration is lazy and host-stack safe.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

from .core import (
    EApp, EApplyLens, ECase, ECons, EConst, EFreeze, EFun, EIf, EList, ELet,
    EParen, EProj, ERecord, ERecordExtend, EVar, Exp, Op, OP_ARITY, Env,
    EMPTY_DICT, Pat, PConst, PCons, PList, PRecord, PVar, PWild,
    UncoercibleClosure, Val, VClosure, VConst, VDict, VList, VRecord,
    env_get, env_len, env_lookup, env_rebind, free_vars, match_pattern,
    pat_vars, strip_parens, struct_eq, struct_key, val_equal, val_to_exp,
    visible_positions,
)
from .diffs import (
    DClosure, DDict, DList, DRecord, DReplace, DELETE, DiffError, KEEP,
    OpInsert, OpUpdate, VDiff, apply_vdiff, diff_vals, merge_envs2,
    merge_envs3, merge_vals3, string_concat_split,
)
from .interp import Emitted, EvalError, Session, UpdateConfig, eval_k


@dataclass(eq=False)
class UpdRes:
    """One candidate outcome for a subprogram update."""

    env: Optional[Env]
    env_diff: dict          # absolute env position -> VDiff
    exp: Exp
    exp_changed: bool
    note: str = ""


@dataclass(eq=False)
class ExpDiff:
    """Textual + structural expression change; the summary renders lazily."""

    changed: bool
    _old: Optional[Exp] = None
    _new: Optional[Exp] = None
    _text: Optional[str] = None

    @property
    def text(self) -> str:
        if self._text is None:
            if not self.changed:
                self._text = ""
            else:
                from .syntax import summarize_text_diff, unparse
                self._text = summarize_text_diff(unparse(self._old),
                                                 unparse(self._new))
        return self._text


@dataclass(eq=False)
class Solution:
    new_env: Optional[Env]
    new_exp: Exp
    env_diff: dict
    exp_diff: ExpDiff
    note: str


def _identity(env, e) -> UpdRes:
    return UpdRes(env, {}, e, False, "")


def _emit(sk, res, fk):
    """Deliver a result to a success continuation via the trampoline."""
    return lambda: sk(res, fk)


def _note(tag: str, *children: str) -> str:
    inner = next((c for c in children if c), "")
    out = f"{tag}>{inner}" if inner else tag
    return out[:72]


# ---------------------------------------------------------------------------
# Merging candidate environments


def _vis(cfg, env, exprs, drop=frozenset()):
    if cfg.merge_mode != "two-way":
        return frozenset()
    names = set()
    for x in exprs:
        names |= free_vars(x)
    names -= set(drop)
    return visible_positions(env, names)


def merge_solutions(cfg: UpdateConfig, env, left, vis1, right, vis2):
    """Merge two (env, diff) updates of `env`; None = two-way conflict.

    Two-way mode must consider even an untouched side: a change to a variable
    free in an expression whose value is being kept would silently alter that
    value on re-evaluation.
    """
    e1, d1 = left
    e2, d2 = right
    if cfg.merge_mode != "two-way":
        if not d1:
            return right
        if not d2:
            return left
        return merge_envs3(env, e1, d1, e2, d2)
    return merge_envs2(env, e1, d1, e2, d2, vis1, vis2)


def _untouched_ok(cfg, env, diff: dict, exprs) -> bool:
    """In two-way mode, changed bindings must not feed untouched operands."""
    if cfg.merge_mode != "two-way" or not diff or not exprs:
        return True
    gv = _vis(cfg, env, list(exprs))
    return not any(p in gv for p in diff)


# ---------------------------------------------------------------------------
# Entry points


def upd_k(S: Session, cfg: UpdateConfig, env, e: Exp, d: Optional[VDiff],
          sk: Callable, fk: Callable):
    """Update `e` under `env` so its output absorbs `d`."""
    if d is None:
        return lambda: sk(_identity(env, e), fk)

    if cfg.wholesale:
        # Baseline without edit-difference propagation: rebuild the change
        # from whole values at every node.
        def step_whole():
            S.tick()
            S.node_visits += 1

            def k_old(v_old):
                try:
                    v_new = apply_vdiff(v_old, d)
                except DiffError:
                    return fk
                dd = diff_vals(v_old, v_new)
                if dd is None:
                    return _emit(sk, _identity(env, e), fk)
                return _dispatch(S, cfg, env, e, dd, sk, fk)
            return eval_k(S, env, e, k_old)
        return step_whole

    def step():
        S.tick()
        S.node_visits += 1
        return _dispatch(S, cfg, env, e, d, sk, fk)

    return step


class SolutionStream:
    """Lazy, deduplicated, capped enumeration of update solutions.

    An optional `accept` predicate discards candidates before they count
    against the cap (used to drop solutions that would edit the prelude).
    """

    def __init__(self, start_step, cap: int, accept=None):
        self._step = start_step
        self._cap = cap
        self._accept = accept
        self._emitted = 0
        self._first: Optional[Solution] = None  # key computed lazily
        self._seen: Optional[set] = None

    def _key_of(self, sol) -> tuple:
        return _solution_key(sol)

    def _is_dup(self, sol) -> bool:
        # Keys cost a structural pass; skip them entirely for the common
        # single-solution case.
        if self._first is None and self._seen is None:
            self._first = sol
            return False
        if self._seen is None:
            self._seen = {self._key_of(self._first)}
        key = self._key_of(sol)
        if key in self._seen:
            return True
        self._seen.add(key)
        return False

    def next(self) -> Optional[Solution]:
        if self._emitted >= self._cap:
            return None
        while self._step is not None:
            r = self._step()
            if isinstance(r, Emitted):
                self._step = r.resume
                sol = r.value
                if self._accept is not None and not self._accept(sol):
                    continue
                if self._is_dup(sol):
                    continue
                self._emitted += 1
                return sol
            self._step = r
        return None

    def take(self, n: int) -> list:
        out = []
        for _ in range(n):
            sol = self.next()
            if sol is None:
                break
            out.append(sol)
        return out

    def __iter__(self):
        while True:
            sol = self.next()
            if sol is None:
                return
            yield sol


def _solution_key(sol: Solution) -> tuple:
    env_part = tuple(sorted(
        (pos, struct_key(env_get(sol.new_env, pos)))
        for pos in sol.env_diff
    ))
    return (struct_key(sol.new_exp), env_part)


def update(env, e: Exp, v_new: Val, cfg: Optional[UpdateConfig] = None,
           session: Optional[Session] = None,
           accept=None) -> SolutionStream:
    """Enumerate repairs making `e` (under `env`) evaluate to `v_new`."""
    cfg = cfg or UpdateConfig()
    S = session or Session(cfg)
    from .interp import evaluate
    v_old = evaluate(env, e, S)
    d = diff_vals(v_old, v_new)
    return update_with_diff(env, e, v_old, d, cfg, S, accept=accept)


def update_with_diff(env, e: Exp, v_old: Val, d: Optional[VDiff],
                     cfg: Optional[UpdateConfig] = None,
                     session: Optional[Session] = None,
                     accept=None) -> SolutionStream:
    cfg = cfg or UpdateConfig()
    S = session or Session(cfg)

    def sk(res: UpdRes, fk):
        sol = Solution(res.env, res.exp, res.env_diff,
                       _exp_diff(e, res), res.note)
        return Emitted(sol, fk)

    def fk():
        return None

    if d is None:
        start = lambda: sk(_identity(env, e), fk)
    else:
        start = upd_k(S, cfg, env, e, d, sk, fk)
    return SolutionStream(start, cfg.max_solutions, accept=accept)


def _exp_diff(old: Exp, res: UpdRes) -> ExpDiff:
    if not res.exp_changed:
        return ExpDiff(False)
    return ExpDiff(True, old, res.exp)


# ---------------------------------------------------------------------------
# Rule dispatch


def _dispatch(S, cfg, env, e, d, sk, fk):
    if isinstance(e, EParen):
        def sk_inner(res, fk2):
            exp = replace(e, inner=res.exp) if res.exp_changed else e
            return _emit(sk, UpdRes(res.env, res.env_diff, exp, res.exp_changed,
                             res.note), fk2)
        return upd_k(S, cfg, env, e.inner, d, sk_inner, fk)

    if isinstance(e, EConst):
        return _u_const(S, cfg, env, e, d, sk, fk)
    if isinstance(e, EVar):
        return _u_var(S, cfg, env, e, d, sk, fk)
    if isinstance(e, EFun):
        return _u_fun(S, cfg, env, e, d, sk, fk)
    if isinstance(e, EFreeze):
        return fk  # frozen subtrees accept no change
    if isinstance(e, EApp):
        prim = _prim_spine(e)
        if prim is not None:
            return _u_prim(S, cfg, env, e, prim, d, sk, fk)
        return _u_app(S, cfg, env, e, d, sk, fk)
    if isinstance(e, ECons):
        return _u_cons(S, cfg, env, e, d, sk, fk)
    if isinstance(e, EList):
        return _u_list(S, cfg, env, e, d, sk, fk)
    if isinstance(e, ERecord):
        return _u_record(S, cfg, env, e, d, sk, fk)
    if isinstance(e, ERecordExtend):
        return _u_record_extend(S, cfg, env, e, d, sk, fk)
    if isinstance(e, EProj):
        def sk_base(res, fk2):
            exp = replace(e, base=res.exp) if res.exp_changed else e
            return _emit(sk, UpdRes(res.env, res.env_diff, exp, res.exp_changed,
                             _note("U-Proj", res.note)), fk2)
        return upd_k(S, cfg, env, e.base, DRecord({e.name: d}), sk_base, fk)
    if isinstance(e, ELet):
        return _u_let(S, cfg, env, e, d, sk, fk)
    if isinstance(e, EIf):
        return _u_if(S, cfg, env, e, d, sk, fk)
    if isinstance(e, ECase):
        return _u_case(S, cfg, env, e, d, sk, fk)
    if isinstance(e, EApplyLens):
        return _u_lens(S, cfg, env, e, d, sk, fk)
    raise TypeError(f"cannot update {type(e).__name__}")


# -- replacement rules -------------------------------------------------------


def _u_const(S, cfg, env, e, d, sk, fk):
    v_old = VDict({}) if e.value is EMPTY_DICT else VConst(e.value)
    try:
        v_new = apply_vdiff(v_old, d)
        exp = replace(val_to_exp(v_new), ws=e.ws)
    except (DiffError, UncoercibleClosure):
        return fk
    return lambda: sk(UpdRes(env, {}, exp, True, "U-Const"), fk)


def _u_var(S, cfg, env, e, d, sk, fk):
    hit = env_lookup(env, e.name)
    if hit is None:
        return fk
    pos, v_old = hit
    try:
        v_new = apply_vdiff(v_old, d)
    except DiffError:
        return fk
    new_env = env_rebind(env, {pos: v_new})
    return lambda: sk(UpdRes(new_env, {pos: d}, e, False, "U-Var"), fk)


def _u_fun(S, cfg, env, e, d, sk, fk):
    if isinstance(d, DClosure):
        env_diff = dict(d.env_diff) if d.env_diff else {}
        try:
            updates = {pos: apply_vdiff(env_get(env, pos), sub)
                       for pos, sub in env_diff.items()}
        except DiffError:
            return fk
        new_env = env_rebind(env, updates) if updates else env
        if d.body is not None and not struct_eq(d.body, e.body):
            exp = replace(e, body=d.body)
            changed = True
        else:
            exp = e
            changed = False
        return lambda: sk(UpdRes(new_env, env_diff, exp, changed, "U-Fun"), fk)
    if isinstance(d, DReplace) and isinstance(d.new, VClosure):
        from .core import env_equivalent
        c = d.new
        if struct_key(c.pat) != struct_key(e.pat):
            return fk
        if not env_equivalent(c.env, env):
            return fk
        names = free_vars(c.body) - frozenset(pat_vars(c.pat))
        if c.rec_name:
            names -= frozenset([c.rec_name])
        env_diff = {}
        updates = {}
        for pos in visible_positions(env, names):
            dv = diff_vals(env_get(env, pos), _closure_binding(c, env, pos))
            if dv is not None:
                env_diff[pos] = dv
                updates[pos] = apply_vdiff(env_get(env, pos), dv)
        new_env = env_rebind(env, updates) if updates else env
        if struct_eq(c.body, e.body):
            exp = e
            changed = False
        else:
            exp = replace(e, body=c.body)
            changed = True
        return lambda: sk(UpdRes(new_env, env_diff, exp, changed, "U-Fun"), fk)
    return fk


def _closure_binding(c: VClosure, env, pos: int) -> Val:
    from .core import env_cells
    for cc in env_cells(c.env):
        if cc.length - 1 == pos:
            return cc.val
    return env_get(env, pos)


# -- binders -----------------------------------------------------------------


def _peel(res: UpdRes, n_outer: int, n_bound: int):
    """Split a result over an extended env into outer and binding parts."""
    outer_diff = {}
    bind_diffs = {}
    for pos, dv in res.env_diff.items():
        if pos < n_outer:
            outer_diff[pos] = dv
        else:
            bind_diffs[pos - n_outer] = dv
    outer_env = res.env
    from .core import env_cells
    cell = res.env
    while cell is not None and cell.length > n_outer:
        cell = cell.parent
    return cell, outer_diff, bind_diffs


class _PatchFail(Exception):
    pass


def _patch_by_pattern(pat: Pat, v: Val, new_vals: list, idx: list) -> Val:
    """Substitute updated binding values back into `v` along `pat`."""
    if isinstance(pat, PVar):
        i = idx[0]
        idx[0] += 1
        nv = new_vals[i]
        return v if nv is None else nv
    if isinstance(pat, (PWild, PConst)):
        return v
    if isinstance(pat, PCons):
        if not (isinstance(v, VList) and v.items):
            raise _PatchFail()
        h = _patch_by_pattern(pat.head, v.items[0], new_vals, idx)
        t = _patch_by_pattern(pat.tail, VList(v.items[1:]), new_vals, idx)
        if not isinstance(t, VList):
            raise _PatchFail()
        return VList((h,) + t.items)
    if isinstance(pat, PList):
        if not (isinstance(v, VList) and len(v.items) == len(pat.items)):
            raise _PatchFail()
        return VList(tuple(_patch_by_pattern(q, item, new_vals, idx)
                           for q, item in zip(pat.items, v.items)))
    if isinstance(pat, PRecord):
        if not isinstance(v, VRecord):
            raise _PatchFail()
        out = dict(v.fields)
        for f in pat.fields:
            sub = f.pat if f.pat is not None else PVar(f.name)
            out[f.name] = _patch_by_pattern(sub, out[f.name], new_vals, idx)
        return VRecord(out)
    raise _PatchFail()


def _rebound_arg(pat, v_old, bind_diffs, res_env, n_outer):
    """New argument value and diff from per-binding updates; None = unchanged."""
    if isinstance(pat, PVar):
        # single binding: its diff is the argument diff, no re-diffing needed
        if 0 not in bind_diffs:
            return None
        return env_get(res_env, n_outer), bind_diffs[0]
    names = pat_vars(pat)
    new_vals = [None] * len(names)
    for i in bind_diffs:
        if i >= len(names):
            return None
        new_vals[i] = env_get(res_env, n_outer + i)
    try:
        v_new = _patch_by_pattern(pat, v_old, new_vals, [0])
    except _PatchFail:
        return None
    return v_new, diff_vals(v_old, v_new)


def _u_let(S, cfg, env, e, d, sk, fk):
    pat = e.pat
    rec_fun = strip_parens(e.bound) if e.rec else None
    if e.rec and isinstance(rec_fun, EFun):
        cached = S.ext_memo.get((env, e))
        if cached is not None:
            clo = cached.val
        else:
            clo = VClosure(env, rec_fun.pat, rec_fun.body, rec_name=pat.name)
        return _u_let_impl(S, cfg, env, e, d, sk, fk, clo,
                           [(pat.name, clo)])

    def k_v1(v1):
        bindings = match_pattern(pat, v1)
        if bindings is None:
            return fk
        return _u_let_impl(S, cfg, env, e, d, sk, fk, v1, bindings)
    return eval_k(S, env, e.bound, k_v1)


def _u_let_impl(S, cfg, env, e, d, sk, fk, v1, bindings):
    n_outer = env_len(env)
    pat = e.pat
    benv = S.ext_memo.get((env, e))
    if benv is None:
        benv = env
        for name, val in bindings:
            benv = Env(benv, name, val)
        S.ext_memo[(env, e)] = benv
    drop = frozenset([pat.name]) if e.rec else frozenset()
    vis_bound = _vis(cfg, env, [e.bound], drop=drop)
    vis_body = _vis_body(cfg, env, benv, e.body, n_outer)

    def sk_body(res_b, fkb):
        outer_env, outer_diff, bind_diffs = _peel(res_b, n_outer,
                                                  len(bindings))
        if not bind_diffs:
            merged = merge_solutions(cfg, env, (env, {}), vis_bound,
                                     (outer_env, outer_diff), vis_body)
            if merged is None:
                return fkb
            exp = replace(e, body=res_b.exp) if res_b.exp_changed else e
            return _emit(sk, UpdRes(merged[0], merged[1], exp, res_b.exp_changed,
                             _note("U-Let", res_b.note)), fkb)
        got = _rebound_arg(pat, v1, bind_diffs, res_b.env, n_outer)
        if got is None:
            return fkb
        _v1_new, d1 = got

        def sk_bound(res_1, fk1):
            merged = merge_solutions(cfg, env, (res_1.env, res_1.env_diff),
                                     vis_bound, (outer_env, outer_diff),
                                     vis_body)
            if merged is None:
                return fk1
            changed = res_b.exp_changed or res_1.exp_changed
            exp = e
            if changed:
                exp = replace(e, bound=res_1.exp, body=res_b.exp)
            return _emit(sk, UpdRes(merged[0], merged[1], exp, changed,
                             _note("U-LetRec" if e.rec else "U-Let",
                                   res_1.note, res_b.note)), fk1)
        return upd_k(S, cfg, env, e.bound, d1, sk_bound, fkb)

    return upd_k(S, cfg, benv, e.body, d, sk_body, fk)


def _vis_body(cfg, env, benv, body, n_outer):
    if cfg.merge_mode != "two-way":
        return frozenset()
    return frozenset(p for p in visible_positions(benv, free_vars(body))
                     if p < n_outer)


def _u_app(S, cfg, env, e, d, sk, fk):
    def k_f(fv):
        if not isinstance(fv, VClosure):
            return fk  # primitive partials and misapplications: no rule

        def k_arg(v2):
            bindings = match_pattern(fv.pat, v2)
            if bindings is None:
                return fk
            return _u_app_impl(S, cfg, env, e, d, sk, fk, fv, v2, bindings)
        return eval_k(S, env, e.arg, k_arg)
    return eval_k(S, env, e.fn, k_f)


def _u_app_impl(S, cfg, env, e, d, sk, fk, fv, v2, bindings):
    f_env = fv.env
    n_f = env_len(f_env)
    rec_pos = n_f if fv.rec_name is not None else None
    base = n_f + (1 if rec_pos is not None else 0)
    benv = S.ext_memo.get((fv, v2))
    if benv is None:
        benv = f_env
        if rec_pos is not None:
            benv = Env(benv, fv.rec_name, fv)
        for name, val in bindings:
            benv = Env(benv, name, val)
        S.ext_memo[(fv, v2)] = benv
    vis_fn = _vis(cfg, env, [e.fn])
    vis_arg = _vis(cfg, env, [e.arg])

    def sk_body(res_b, fkb):
        # split: closure-env part, optional rec slot, argument bindings
        bind_diffs = {}
        clo_diff = {}
        rec_diff = None
        for pos, dv in res_b.env_diff.items():
            if pos >= base:
                bind_diffs[pos - base] = dv
            elif rec_pos is not None and pos == rec_pos:
                rec_diff = dv
            else:
                clo_diff[pos] = dv

        # new argument value
        d2 = None
        if bind_diffs:
            got = _rebound_arg(fv.pat, v2, bind_diffs, res_b.env, base)
            if got is None:
                return fkb
            _v2n, d2 = got

        # new closure to reconcile with e.fn
        d1 = _closure_obligation(cfg, fv, res_b, clo_diff, rec_diff)
        if d1 is _CONFLICT:
            return fkb

        def sk_fn(res_1, fk1):
            def sk_arg(res_2, fk2):
                merged = merge_solutions(
                    cfg, env, (res_1.env, res_1.env_diff), vis_fn,
                    (res_2.env, res_2.env_diff), vis_arg)
                if merged is None:
                    return fk2
                changed = res_1.exp_changed or res_2.exp_changed
                exp = e
                if changed:
                    exp = replace(e, fn=res_1.exp, arg=res_2.exp)
                return _emit(sk, UpdRes(merged[0], merged[1], exp, changed,
                                 _note("U-App", res_1.note, res_2.note,
                                       res_b.note)), fk2)
            return upd_k(S, cfg, env, e.arg, d2, sk_arg, fk1)
        return upd_k(S, cfg, env, e.fn, d1, sk_fn, fkb)

    return upd_k(S, cfg, benv, fv.body, d, sk_body, fk)


_CONFLICT = object()


def _closure_obligation(cfg, fv, res_b, clo_diff, rec_diff):
    """Diff to push back through the function expression; None = unchanged."""
    body_changed = res_b.exp_changed
    if not clo_diff and not body_changed and rec_diff is None:
        return None
    c_a = None
    if clo_diff or body_changed:
        c_a = DClosure(clo_diff, res_b.exp if body_changed else None)
    if rec_diff is None:
        return c_a
    # the recursive self-binding saw its own updates; reconcile
    try:
        c_rec = apply_vdiff(fv, rec_diff)
        c_from_body = apply_vdiff(fv, c_a) if c_a is not None else fv
    except DiffError:
        return _CONFLICT
    if c_a is None:
        return rec_diff
    if val_equal(c_rec, c_from_body):
        return c_a
    if cfg.merge_mode == "two-way":
        return _CONFLICT
    merged = merge_vals3(fv, c_from_body, c_rec)
    return diff_vals(fv, merged)


def _u_if(S, cfg, env, e, d, sk, fk):
    def k_guard(gv):
        if not (isinstance(gv, VConst) and isinstance(gv.value, bool)):
            return fk
        branch = e.then if gv.value else e.els
        vis_guard = _vis(cfg, env, [e.guard])
        vis_branch = _vis(cfg, env, [branch])

        def sk_branch(res, fkb):
            merged = merge_solutions(cfg, env, (env, {}), vis_guard,
                                     (res.env, res.env_diff), vis_branch)
            if merged is None:
                return fkb
            exp = e
            if res.exp_changed:
                exp = replace(e, then=res.exp) if gv.value \
                    else replace(e, els=res.exp)
            tag = "U-If-True" if gv.value else "U-If-False"
            return _emit(sk, UpdRes(merged[0], merged[1], exp, res.exp_changed,
                             _note(tag, res.note)), fkb)
        return upd_k(S, cfg, env, branch, d, sk_branch, fk)
    return eval_k(S, env, e.guard, k_guard)


def _u_case(S, cfg, env, e, d, sk, fk):
    n_outer = env_len(env)

    def k_scrut(sv):
        taken = None
        bindings = None
        for i, br in enumerate(e.branches):
            bindings = match_pattern(br.pat, sv)
            if bindings is not None:
                taken = i
                break
        if taken is None:
            return fk
        br = e.branches[taken]
        hit = S.ext_memo.get((env, e))
        if hit is not None and hit[0] == taken:
            benv = hit[1]
        else:
            benv = env
            for name, val in bindings:
                benv = Env(benv, name, val)
            S.ext_memo[(env, e)] = (taken, benv)
        vis_scrut = _vis(cfg, env, [e.scrutinee])
        vis_branch = _vis_body(cfg, env, benv, br.body, n_outer)

        def sk_body(res_b, fkb):
            outer_env, outer_diff, bind_diffs = _peel(res_b, n_outer,
                                                      len(bindings))
            d_s = None
            if bind_diffs:
                got = _rebound_arg(br.pat, sv, bind_diffs, res_b.env, n_outer)
                if got is None:
                    return fkb
                sv_new, d_s = got
                if cfg.merge_mode == "two-way" and \
                        not _branch_stable(e, taken, sv_new):
                    return fkb

            def sk_scrut(res_s, fks):
                merged = merge_solutions(
                    cfg, env, (res_s.env, res_s.env_diff), vis_scrut,
                    (outer_env, outer_diff), vis_branch)
                if merged is None:
                    return fks
                changed = res_b.exp_changed or res_s.exp_changed
                exp = e
                if changed:
                    branches = list(e.branches)
                    branches[taken] = replace(br, body=res_b.exp)
                    exp = replace(e, scrutinee=res_s.exp,
                                  branches=tuple(branches))
                return _emit(sk, UpdRes(merged[0], merged[1], exp, changed,
                                 _note("U-Case", res_s.note, res_b.note)),
                          fks)
            return upd_k(S, cfg, env, e.scrutinee, d_s, sk_scrut, fkb)
        return upd_k(S, cfg, benv, br.body, d, sk_body, fk)
    return eval_k(S, env, e.scrutinee, k_scrut)


def _branch_stable(e: ECase, taken: int, sv_new: Val) -> bool:
    for i in range(taken):
        if match_pattern(e.branches[i].pat, sv_new) is not None:
            return False
    return match_pattern(e.branches[taken].pat, sv_new) is not None


# -- lists, records ----------------------------------------------------------


def _u_cons(S, cfg, env, e, d, sk, fk):
    if not isinstance(d, DList) or not d.ops:
        return fk
    head_op = d.ops[0]
    if head_op is DELETE or isinstance(head_op, OpInsert):
        return fk  # cons structure is preserved; only literals grow/shrink
    d_head = head_op.diff if isinstance(head_op, OpUpdate) else None
    rest = d.ops[1:]
    d_tail = DList(rest) if any(op is not KEEP for op in rest) else None
    vis_head = _vis(cfg, env, [e.head])
    vis_tail = _vis(cfg, env, [e.tail])

    def sk_head(res_h, fkh):
        def sk_tail(res_t, fkt):
            merged = merge_solutions(cfg, env, (res_h.env, res_h.env_diff),
                                     vis_head, (res_t.env, res_t.env_diff),
                                     vis_tail)
            if merged is None:
                return fkt
            changed = res_h.exp_changed or res_t.exp_changed
            exp = e
            if changed:
                exp = replace(e, head=res_h.exp, tail=res_t.exp)
            return _emit(sk, UpdRes(merged[0], merged[1], exp, changed,
                             _note("U-Cons", res_h.note, res_t.note)), fkt)
        return upd_k(S, cfg, env, e.tail, d_tail, sk_tail, fkh)
    return upd_k(S, cfg, env, e.head, d_head, sk_head, fk)


def _u_list(S, cfg, env, e, d, sk, fk):
    if not isinstance(d, DList):
        return fk
    if not any(op is DELETE or isinstance(op, OpInsert) for op in d.ops):
        return _u_list_updates_only(S, cfg, env, e, d, sk, fk)
    plan = []  # ("old", exp, old_idx) | ("upd", exp, diff, old_idx) | ("ins", val)
    i = 0
    for op in d.ops:
        if op is KEEP:
            if i >= len(e.items):
                return fk
            plan.append(("old", e.items[i], i))
            i += 1
        elif op is DELETE:
            if i >= len(e.items):
                return fk
            i += 1
        elif isinstance(op, OpUpdate):
            if i >= len(e.items):
                return fk
            plan.append(("upd", e.items[i], op.diff, i))
            i += 1
        else:
            plan.append(("ins", op.value))
    if i != len(e.items):
        return fk

    # insertions must be expressible as literals
    exprs: list = [None] * len(plan)
    for j, entry in enumerate(plan):
        if entry[0] == "old":
            exprs[j] = entry[1]
        elif entry[0] == "ins":
            try:
                exprs[j] = val_to_exp(entry[1])
            except UncoercibleClosure:
                return fk

    upd_slots = [j for j, entry in enumerate(plan) if entry[0] == "upd"]

    def finish(envpair, notes, fkz):
        items = _inherit_ws(e, plan, exprs)
        exp = replace(e, items=tuple(items[0]), seps=tuple(items[1]))
        changed = True
        return _emit(sk, UpdRes(envpair[0], envpair[1], exp, changed,
                         _note("U-List", *notes)), fkz)

    def go(kidx, envpair, acc_vis, notes, fkk):
        if kidx_done(kidx):
            return finish(envpair, notes, fkk)
        j = upd_slots[kidx]
        _tag, item, dff, _oi = plan[j]
        vis_i = _vis(cfg, env, [item])

        def sk_i(res, fk2):
            merged = merge_solutions(cfg, env, envpair, acc_vis,
                                     (res.env, res.env_diff), vis_i)
            if merged is None:
                return fk2
            exprs[j] = res.exp
            return go(kidx + 1, merged, acc_vis | vis_i,
                      notes + [res.note], fk2)
        return upd_k(S, cfg, env, item, dff, sk_i, fkk)

    def kidx_done(kidx):
        return kidx == len(upd_slots)

    structural = len(plan) != len(e.items) or \
        any(entry[0] != "old" for entry in plan)
    if not upd_slots and not structural:
        # an all-Keep diff (possible from lens-supplied diffs) is a no-op
        return lambda: sk(_identity(env, e), fk)
    kept_vis = frozenset()
    if cfg.merge_mode == "two-way":
        kept_vis = _vis(cfg, env, [entry[1] for entry in plan
                                   if entry[0] == "old"])
    return go(0, (env, {}), kept_vis, [], fk)


def _u_list_updates_only(S, cfg, env, e, d, sk, fk):
    """Element updates without inserts/deletes: items and trivia stay put."""
    if len(d.ops) != len(e.items):
        return fk
    upd_slots = [(i, op.diff) for i, op in enumerate(d.ops)
                 if isinstance(op, OpUpdate)]
    if not upd_slots:
        return lambda: sk(_identity(env, e), fk)
    new_items = list(e.items)
    kept_vis = frozenset()
    if cfg.merge_mode == "two-way":
        kept_idx = {i for i, _ in upd_slots}
        kept_vis = _vis(cfg, env, [item for i, item in enumerate(e.items)
                                   if i not in kept_idx])

    def go(k, envpair, acc_vis, notes, fkk):
        if k == len(upd_slots):
            exp = replace(e, items=tuple(new_items))
            return _emit(sk, UpdRes(envpair[0], envpair[1], exp, True,
                                    _note("U-List", *notes)), fkk)
        idx, dff = upd_slots[k]
        item = e.items[idx]
        vis_i = _vis(cfg, env, [item])

        def sk_i(res, fk2):
            merged = merge_solutions(cfg, env, envpair, acc_vis,
                                     (res.env, res.env_diff), vis_i)
            if merged is None:
                return fk2
            new_items[idx] = res.exp
            return go(k + 1, merged, acc_vis | vis_i,
                      notes + [res.note], fk2)
        return upd_k(S, cfg, env, item, dff, sk_i, fkk)

    return go(0, (env, {}), kept_vis, [], fk)


def _inherit_ws(e: EList, plan, exprs):
    """Assemble items and separators, inheriting trivia from old siblings."""
    old_seps = list(e.seps)
    items = []
    seps = []
    prev_old_idx = None
    for j, entry in enumerate(plan):
        exp = exprs[j]
        if entry[0] == "ins":
            prev_ws = next((plan[k][1].ws for k in range(j - 1, -1, -1)
                            if plan[k][0] != "ins"), None)
            next_ws = next((plan[k][1].ws for k in range(j + 1, len(plan))
                            if plan[k][0] != "ins"), None)
            # trailing inserts mimic the previous sibling; interior inserts
            # mimic the following one (its slot is being taken)
            if next_ws is not None and j < len(plan) - 1:
                ws = next_ws
            else:
                ws = prev_ws
            if ws is None:
                ws = "" if not items else " "
            exp = replace(exp, ws=ws)
        if items:
            # separator before this element
            sep = ""
            if old_seps:
                left_old = prev_old_idx
                if left_old is None:
                    sep = old_seps[0]
                elif left_old < len(old_seps):
                    sep = old_seps[left_old]
                else:
                    sep = old_seps[-1]
            seps.append(sep)
        items.append(exp)
        if entry[0] != "ins":
            prev_old_idx = entry[-1]
    return items, seps


def _u_record(S, cfg, env, e, d, sk, fk):
    if not isinstance(d, DRecord):
        return fk
    by_name = {f.name: (idx, f) for idx, f in enumerate(e.fields)}
    for name in d.fields:
        if name not in by_name:
            return fk
    slots = [(by_name[name][0], by_name[name][1], sub)
             for name, sub in d.fields.items()]
    slots.sort(key=lambda t: t[0])
    new_fields = list(e.fields)
    untouched_vis = _vis(cfg, env, [f.value for f in e.fields
                                    if f.name not in d.fields])

    def go(k, envpair, acc_vis, notes, fkk):
        if k == len(slots):
            exp = replace(e, fields=tuple(new_fields))
            return _emit(sk, UpdRes(envpair[0], envpair[1], exp, True,
                             _note("U-Record", *notes)), fkk)
        idx, fld, sub = slots[k]
        vis_i = _vis(cfg, env, [fld.value])

        def sk_i(res, fk2):
            merged = merge_solutions(cfg, env, envpair, acc_vis,
                                     (res.env, res.env_diff), vis_i)
            if merged is None:
                return fk2
            new_fields[idx] = replace(fld, value=res.exp)
            return go(k + 1, merged, acc_vis | vis_i, notes + [res.note], fk2)
        return upd_k(S, cfg, env, fld.value, sub, sk_i, fkk)
    return go(0, (env, {}), untouched_vis, [], fk)


def _u_record_extend(S, cfg, env, e, d, sk, fk):
    if not isinstance(d, DRecord):
        return fk
    own = d.fields.get(e.name)
    rest = {name: sub for name, sub in d.fields.items() if name != e.name}
    d_base = DRecord(rest) if rest else None
    vis_base = _vis(cfg, env, [e.base])
    vis_own = _vis(cfg, env, [e.value])

    def sk_base(res_b, fkb):
        def sk_own(res_o, fko):
            merged = merge_solutions(cfg, env, (res_b.env, res_b.env_diff),
                                     vis_base, (res_o.env, res_o.env_diff),
                                     vis_own)
            if merged is None:
                return fko
            changed = res_b.exp_changed or res_o.exp_changed
            exp = e
            if changed:
                exp = replace(e, base=res_b.exp, value=res_o.exp)
            return _emit(sk, UpdRes(merged[0], merged[1], exp, changed,
                             _note("U-Record-Extend", res_b.note,
                                   res_o.note)), fko)
        return upd_k(S, cfg, env, e.value, own, sk_own, fkb)
    return upd_k(S, cfg, env, e.base, d_base, sk_base, fk)


# -- primitive operator rules -------------------------------------------------


def _prim_spine(e: EApp):
    """(op, head node, [app nodes outer..inner], [arg exprs]) for a saturated
    primitive application, else None."""
    apps = []
    cur = e
    while isinstance(cur, EApp):
        apps.append(cur)
        cur = cur.fn
    head = strip_parens(cur)
    if not (isinstance(head, EConst) and isinstance(head.value, Op)):
        return None
    op = head.value
    if len(apps) != OP_ARITY[op]:
        return None
    args = [a.arg for a in reversed(apps)]
    return op, cur, apps, args


def _rebuild_spine(apps, head, new_args):
    cur = head
    for k in range(len(apps) - 1, -1, -1):
        cur = replace(apps[k], fn=cur, arg=new_args[len(apps) - 1 - k])
    return cur


def _u_prim(S, cfg, env, e, prim, d, sk, fk):
    op, head, apps, args = prim

    def k_args(vals):
        return _u_prim_vals(S, cfg, env, e, op, head, apps, args, vals, d,
                            sk, fk)

    # evaluate all operands (memoized)
    vals = []

    def go(i):
        if i == len(args):
            return k_args(vals)
        def k_i(v, i=i):
            vals.append(v)
            return go(i + 1)
        return eval_k(S, env, args[i], k_i)
    return go(0)


_FLIP = {Op.LT: Op.GEQ, Op.GT: Op.LEQ, Op.LEQ: Op.GT, Op.GEQ: Op.LT}


def _u_prim_vals(S, cfg, env, e, op, head, apps, args, vals, d, sk, fk):
    from .interp import apply_prim
    rebuild = lambda new_args: _rebuild_spine(apps, head, new_args)

    def push_one(idx, dv, tag, sk_done, fkc, guard_exprs=()):
        def sk_i(res, fk2):
            if not _untouched_ok(cfg, env, res.env_diff, guard_exprs):
                return fk2
            new_args = list(args)
            new_args[idx] = res.exp
            exp = rebuild(new_args) if res.exp_changed else e
            return _emit(sk_done, UpdRes(res.env, res.env_diff, exp,
                                  res.exp_changed, _note(tag, res.note)), fk2)
        return upd_k(S, cfg, env, args[idx], dv, sk_i, fkc)

    def push_both(d1, d2, tag, fkc):
        vis1 = _vis(cfg, env, [args[0]])
        vis2 = _vis(cfg, env, [args[1]])

        def sk_1(res_1, fk1):
            def sk_2(res_2, fk2):
                merged = merge_solutions(cfg, env,
                                         (res_1.env, res_1.env_diff), vis1,
                                         (res_2.env, res_2.env_diff), vis2)
                if merged is None:
                    return fk2
                changed = res_1.exp_changed or res_2.exp_changed
                exp = rebuild([res_1.exp, res_2.exp]) if changed else e
                return _emit(sk, UpdRes(merged[0], merged[1], exp, changed,
                                 _note(tag, res_1.note, res_2.note)), fk2)
            return upd_k(S, cfg, env, args[1], d2, sk_2, fk1)
        return upd_k(S, cfg, env, args[0], d1, sk_1, fkc)

    if op in (Op.PLUS, Op.TIMES):
        a, b = vals
        if isinstance(a, VConst) and isinstance(a.value, str):
            return _u_concat(S, cfg, env, e, args, vals, d, push_both, sk, fk)
        if not (isinstance(d, DReplace) and isinstance(d.new, VConst)
                and isinstance(d.new.value, float)
                and not isinstance(d.new.value, bool)):
            return fk
        n_new = d.new.value
        n1, n2 = a.value, b.value
        cands = []
        if op is Op.PLUS:
            left = n_new - n2
            if left + n2 == n_new and left != n1:
                cands.append((0, left))
            right = n_new - n1
            if n1 + right == n_new and right != n2:
                cands.append((1, right))
            tag = "U-Plus"
        else:
            if n2 != 0:
                left = n_new / n2
                if left * n2 == n_new and left != n1:
                    cands.append((0, left))
            if n1 != 0:
                right = n_new / n1
                if n1 * right == n_new and right != n2:
                    cands.append((1, right))
            tag = "U-Times"

        def try_cand(i):
            if i == len(cands):
                return fk
            idx, nv = cands[i]
            dv = diff_vals(vals[idx], VConst(nv))
            return push_one(idx, dv, tag, sk, lambda: try_cand(i + 1),
                            guard_exprs=(args[1 - idx],))
        return lambda: try_cand(0)

    if op is Op.CONCAT:
        a, b = vals
        if isinstance(a, VConst) and isinstance(a.value, str):
            return _u_concat(S, cfg, env, e, args, vals, d, push_both, sk, fk)
        return fk  # list append is repaired by the library lens, not built in

    if op in _FLIP:
        old = apply_prim(op, tuple(vals))
        try:
            new = apply_vdiff(old, d)
        except DiffError:
            return fk
        if not (isinstance(new, VConst) and isinstance(new.value, bool)):
            return fk
        if new.value == old.value:
            return fk
        if not isinstance(strip_parens(head), EConst):
            return fk
        inner = strip_parens(head)
        flipped = replace(inner, value=_FLIP[op], text=None)
        exp = _rebuild_spine(apps, _graft_head(head, flipped), list(args))
        return lambda: sk(UpdRes(env, {}, exp, True, "U-Lt"), fk)

    if op is Op.EQ:
        return fk  # only the no-change update is supported for ==

    if op in (Op.AND, Op.OR):
        try:
            new = apply_vdiff(apply_prim(op, tuple(vals)), d)
        except DiffError:
            return fk
        if not (isinstance(new, VConst) and isinstance(new.value, bool)):
            return fk
        want = new.value
        both_target = want if op is Op.AND else (not want)
        if (op is Op.AND and want) or (op is Op.OR and not want):
            tv = VConst(op is Op.AND)
            d1 = diff_vals(vals[0], tv)
            d2 = diff_vals(vals[1], tv)
            tag = "U-And-True" if op is Op.AND else "U-Or-False"
            return push_both(d1, d2, tag, fk)
        # one operand forces the result; left first, then right
        forcing = VConst(want)
        tag = "U-And-False" if op is Op.AND else "U-Or-True"

        def try_side(i):
            if i == 2:
                return fk
            dv = diff_vals(vals[i], forcing)
            if dv is None:
                return try_side(i + 1)
            return push_one(i, dv, f"{tag}-{i + 1}", sk,
                            lambda: try_side(i + 1))
        return lambda: try_side(0)

    if op is Op.NOT:
        old = apply_prim(op, tuple(vals))
        try:
            new = apply_vdiff(old, d)
        except DiffError:
            return fk
        if not (isinstance(new, VConst) and isinstance(new.value, bool)):
            return fk
        dv = diff_vals(vals[0], VConst(not new.value))
        return push_one(0, dv, "U-Not", sk, fk)

    if op in (Op.DICT_FROMLIST, Op.DICT_GET, Op.DICT_INSERT, Op.DICT_REMOVE):
        return _u_dict_prim(S, cfg, env, e, op, args, vals, d, push_one,
                            push_both, sk, fk)

    return fk


def _graft_head(head, new_inner):
    """Replace the operator constant inside a possibly parenthesized head."""
    if isinstance(head, EParen):
        return replace(head, inner=_graft_head(head.inner, new_inner))
    return new_inner


def _u_concat(S, cfg, env, e, args, vals, d, push_both, sk, fk):
    s1 = vals[0].value
    s2 = vals[1].value
    try:
        new = apply_vdiff(VConst(s1 + s2), d)
    except DiffError:
        return fk
    if not (isinstance(new, VConst) and isinstance(new.value, str)):
        return fk
    cands = string_concat_split(s1, s2, new.value)

    def try_cand(i):
        if i == len(cands):
            return fk
        s1n, s2n = cands[i]
        d1 = diff_vals(VConst(s1), VConst(s1n))
        d2 = diff_vals(VConst(s2), VConst(s2n))
        return push_both(d1, d2, "U-Concat", lambda: try_cand(i + 1))
    return lambda: try_cand(0)


def _u_dict_prim(S, cfg, env, e, op, args, vals, d, push_one, push_both,
                 sk, fk):
    from .interp import apply_prim
    try:
        old = apply_prim(op, tuple(vals))
        new = apply_vdiff(old, d)
    except (EvalError, DiffError):
        return fk

    if op is Op.DICT_FROMLIST:
        if not (isinstance(new, VDict) and isinstance(vals[0], VList)):
            return fk
        ops = []
        seen = set()
        for pair in vals[0].items:
            kr = struct_key(pair.items[0])
            if kr in seen:
                ops.append(KEEP)
                continue
            seen.add(kr)
            if kr not in new.entries:
                ops.append(DELETE)
            else:
                dv = diff_vals(pair.items[1], new.entries[kr][1])
                if dv is None:
                    ops.append(KEEP)
                else:
                    ops.append(OpUpdate(DList((KEEP, OpUpdate(dv)))))
        for kr in sorted(new.entries):
            if kr not in seen:
                kv, val = new.entries[kr]
                ops.append(OpInsert(VList((kv, val))))
        dv_list = DList(tuple(ops)) if any(o is not KEEP for o in ops) else None
        if dv_list is None:
            return fk
        return push_one(0, dv_list, "U-Dict-FromList", sk, fk)

    if op is Op.DICT_GET:
        kv = vals[0]
        kr = struct_key(kv)
        if not isinstance(new, VList) or len(new.items) > 1:
            return fk
        had = isinstance(old, VList) and len(old.items) == 1
        has = len(new.items) == 1
        if had and has:
            dv = diff_vals(old.items[0], new.items[0])
            dd = DDict({}, {}, {kr: (kv, dv)})
        elif had and not has:
            dd = DDict({}, {kr: kv}, {})
        elif not had and has:
            dd = DDict({kr: (kv, new.items[0])}, {}, {})
        else:
            return fk
        return push_one(1, dd, "U-Dict-Get", sk, fk, guard_exprs=(args[0],))

    if op is Op.DICT_INSERT:
        kv, vv, dct = vals
        kr = struct_key(kv)
        if not (isinstance(new, VDict) and isinstance(dct, VDict)):
            return fk
        if kr not in new.entries:
            return fk  # the inserted key cannot vanish through this call
        d_val = diff_vals(vv, new.entries[kr][1])
        rest_target = {r: pair for r, pair in new.entries.items() if r != kr}
        if kr in dct.entries:
            rest_target[kr] = dct.entries[kr]  # shadowed entry is unobservable
        d_rest = diff_vals(dct, VDict(rest_target))
        if d_val is None and d_rest is None:
            return fk
        if d_rest is None:
            return push_one(1, d_val, "U-Dict-Insert", sk, fk,
                            guard_exprs=(args[0], args[2]))
        if d_val is None:
            return push_one(2, d_rest, "U-Dict-Insert", sk, fk,
                            guard_exprs=(args[0], args[1]))
        # value operand first, then the dictionary operand
        vis_v = _vis(cfg, env, [args[1]])
        vis_d = _vis(cfg, env, [args[2]])

        def sk_v(res_v, fkv):
            def sk_d(res_d, fkd):
                merged = merge_solutions(cfg, env,
                                         (res_v.env, res_v.env_diff), vis_v,
                                         (res_d.env, res_d.env_diff), vis_d)
                if merged is None:
                    return fkd
                if not _untouched_ok(cfg, env, merged[1], (args[0],)):
                    return fkd
                changed = res_v.exp_changed or res_d.exp_changed
                new_args = [args[0], res_v.exp, res_d.exp]
                exp = e
                if changed:
                    exp = _rebuild_spine(
                        _prim_spine(e)[2], _prim_spine(e)[1], new_args)
                return _emit(sk, UpdRes(merged[0], merged[1], exp, changed,
                                 _note("U-Dict-Insert", res_v.note,
                                       res_d.note)), fkd)
            return upd_k(S, cfg, env, args[2], d_rest, sk_d, fkv)
        return upd_k(S, cfg, env, args[1], d_val, sk_v, fk)

    if op is Op.DICT_REMOVE:
        kv, dct = vals
        kr = struct_key(kv)
        if not (isinstance(new, VDict) and isinstance(dct, VDict)):
            return fk
        if kr in new.entries:
            return fk  # the removed key cannot reappear through this call
        target = dict(new.entries)
        if kr in dct.entries:
            target[kr] = dct.entries[kr]
        d_rest = diff_vals(dct, VDict(target))
        if d_rest is None:
            return fk
        return push_one(1, d_rest, "U-Dict-Remove", sk, fk,
                        guard_exprs=(args[0],))

    return fk


# -- lenses -------------------------------------------------------------------


def _u_lens(S, cfg, env, e, d, sk, fk):
    from .lenses import update_lens_apply_k
    return update_lens_apply_k(S, cfg, env, e, d, sk, fk)
