"""Lens application and the host primitives exposed to object-language code.

A lens is an object-language record with an `apply` closure (forward) and an
`update` closure (backward).  The backward direction receives
`{input, outputOld, outputNew, diffs}` and returns `{values = [...]}` with an
optional parallel `diffs` list.  `Update.updateApp`, `Update.diff`, and
`Update.merge` re-enter the engine so lenses can bootstrap from the built-in
rules; they run on the same trampoline as the caller.
"""

from __future__ import annotations

from dataclasses import replace

from .core import (
    EApplyLens, PVar, Val, VClosure, VList, VRecord, Env, env_get, env_len,
    struct_key,
)
from .diffs import (
    DiffError, apply_vdiff, decode_diff, diff_vals, encode_diff, merge_vals3,
)
from .interp import EvalError, Session, apply_k, eval_k, lens_field


def eval_lens_apply(env, e_lens, e_arg, session=None) -> Val:
    """Forward lens application: apply the lens's `apply` field to the arg."""
    from .interp import evaluate
    node = EApplyLens(lens=e_lens, arg=e_arg)
    return evaluate(env, node, session)


def update_lens_apply_k(S: Session, cfg, env, e: EApplyLens, d, sk, fk):
    """U-Lens: reverse through the lens's `update` closure.

    The lens expression itself is never modified; each candidate value (and
    optional diff) returned by `update` is pushed back through the argument.
    """
    from .update import UpdRes, _emit, _note, upd_k

    def k_lens(lens_v):
        update_fn = lens_field(lens_v, "update", e.pos)

        def k_arg(v2):
            def k_old(v_out_old):
                try:
                    v_out_new = apply_vdiff(v_out_old, d)
                except DiffError:
                    return fk
                arg_rec = VRecord({
                    "input": v2,
                    "outputOld": v_out_old,
                    "outputNew": v_out_new,
                    "diffs": encode_diff(d),
                })

                def k_res(res_v):
                    values, diffs = _update_result(res_v, e.pos)

                    def try_cand(i):
                        if i == len(values):
                            return fk
                        v2n = values[i]
                        if diffs is not None:
                            d2 = _decode_maybe(diffs[i], e.pos)
                        else:
                            d2 = diff_vals(v2, v2n)

                        def sk_arg(res, fk2):
                            from .update import _untouched_ok
                            if not _untouched_ok(cfg, env, res.env_diff,
                                                 (e.lens,)):
                                return fk2
                            exp = replace(e, arg=res.exp) \
                                if res.exp_changed else e
                            return _emit(sk, UpdRes(res.env, res.env_diff, exp,
                                             res.exp_changed,
                                             _note("U-Lens", res.note)), fk2)
                        return upd_k(S, cfg, env, e.arg, d2, sk_arg,
                                     lambda: try_cand(i + 1))
                    return try_cand(0)
                return apply_k(S, update_fn, arg_rec, k_res, e.pos)
            return eval_k(S, env, e, k_old)
        return eval_k(S, env, e.arg, k_arg)
    return eval_k(S, env, e.lens, k_lens)


def _update_result(res_v: Val, pos):
    if not isinstance(res_v, VRecord) or "values" not in res_v.fields:
        raise EvalError("lens-shape-error",
                        "lens update must return a record with `values`", pos)
    values = res_v.fields["values"]
    if not isinstance(values, VList):
        raise EvalError("lens-shape-error", "lens `values` must be a list", pos)
    diffs = None
    if "diffs" in res_v.fields:
        dl = res_v.fields["diffs"]
        if not isinstance(dl, VList) or len(dl.items) != len(values.items):
            raise EvalError("lens-shape-error",
                            "lens `diffs` must parallel `values`", pos)
        diffs = list(dl.items)
    return list(values.items), diffs


def _decode_maybe(v: Val, pos):
    """A lens-side diff is Maybe-encoded: [] for no change, [enc] otherwise."""
    if isinstance(v, VList) and len(v.items) == 0:
        return None
    if isinstance(v, VList) and len(v.items) == 1:
        try:
            return decode_diff(v.items[0])
        except DiffError as err:
            raise EvalError("lens-shape-error",
                            f"malformed lens diff: {err}", pos)
    raise EvalError("lens-shape-error",
                    "lens diffs entries must be [] or [diff]", pos)


# ---------------------------------------------------------------------------
# Primitives


def prim_update_app_k(S: Session, arg: Val, k, pos):
    """`Update.updateApp {fun, input, outputNew}`: all argument repairs.

    Runs the update engine on the closure body with only the argument binding
    allowed to change (the closure's environment and body stay fixed), and
    returns `{values = [...]}` capped by the session's solution limit.
    """
    from .update import upd_k

    if not isinstance(arg, VRecord):
        raise EvalError("lens-shape-error", "updateApp expects a record", pos)
    fun = arg.fields.get("fun")
    if not isinstance(fun, VClosure):
        raise EvalError("lens-shape-error", "updateApp `fun` must be a function",
                        pos)
    if not isinstance(fun.pat, PVar):
        raise EvalError("lens-shape-error",
                        "updateApp `fun` must take a simple variable", pos)
    if "input" not in arg.fields or "outputNew" not in arg.fields:
        raise EvalError("lens-shape-error",
                        "updateApp needs `input` and `outputNew`", pos)
    v_in = arg.fields["input"]
    v_new = arg.fields["outputNew"]

    bind_pos = env_len(fun.env) + (1 if fun.rec_name is not None else 0)
    benv = S.ext_memo.get((fun, v_in))
    if benv is None:
        benv = fun.env
        if fun.rec_name is not None:
            benv = Env(benv, fun.rec_name, fun)
        benv = Env(benv, fun.pat.name, v_in)
        S.ext_memo[(fun, v_in)] = benv

    def with_old(v_old):
        if "diffs" in arg.fields:
            try:
                d = decode_diff(arg.fields["diffs"])
            except DiffError as err:
                raise EvalError("lens-shape-error",
                                f"malformed updateApp diff: {err}", pos)
        else:
            d = diff_vals(v_old, v_new)
        if d is None:
            return k(VRecord({"values": VList((v_in,))}))

        out: list = []
        seen: set = set()
        cap = S.cfg.max_solutions

        def finish():
            return k(VRecord({"values": VList(tuple(out))}))

        def sk_res(res, fk2):
            # E-Update-App fixes the closure env and body; only the argument
            # binding may differ.
            if res.exp_changed:
                return fk2
            if any(p != bind_pos for p in res.env_diff):
                return fk2
            if bind_pos not in res.env_diff:
                return fk2
            v2n = env_get(res.env, bind_pos)
            key = struct_key(v2n)
            if key not in seen:
                seen.add(key)
                out.append(v2n)
                if len(out) >= cap:
                    return finish()
            return fk2

        return upd_k(S, S.cfg, benv, fun.body, d, sk_res, finish)

    if "outputOld" in arg.fields:
        return with_old(arg.fields["outputOld"])
    return apply_k(S, fun, v_in, with_old, pos)


def prim_diff(v1: Val, v2: Val) -> Val:
    """`Update.diff v1 v2`: Maybe-encoded edit difference."""
    d = diff_vals(v1, v2)
    if d is None:
        return VList(())
    return VList((encode_diff(d),))


def prim_merge(v1: Val, modified: Val, pos=None) -> Val:
    """`Update.merge original [v2, ..., vn]`: folded three-way merge."""
    if not isinstance(modified, VList):
        raise EvalError("type-mismatch", "Update.merge expects a list", pos)
    items = list(modified.items)
    if not items:
        return v1
    out = items[-1]
    for v in reversed(items[:-1]):
        out = merge_vals3(v1, v, out)
    return out
