"""Edit differences between values, plus two-way and three-way merging.

A `VDiff` compactly describes how an old value becomes a new one; absence of
a diff (None) encodes "no change".  List diffs are edit scripts found by
dynamic programming that favors keeping contiguous runs of the original.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass, replace
from typing import Optional

from .core import (
    Env, Exp, EApp, EApplyLens, ECase, ECons, EConst, EFreeze, EFun, EIf,
    EList, ELet, EParen, EProj, ERecord, ERecordExtend, EVar, Val, VClosure,
    VConst, VDict, VList, VRecord, closure_restricted_names,
    env_equivalent, env_get, env_rebind, struct_eq, struct_key, val_equal,
    visible_positions,
)


class DiffError(Exception):
    """Raised on malformed encoded diffs and shape-mismatched applications."""


# ---------------------------------------------------------------------------
# Diff representation


@dataclass(eq=False)
class VDiff:
    pass


@dataclass(eq=False)
class DReplace(VDiff):
    """Wholesale replacement (constants, kind changes, closure swaps)."""

    new: Val = None


@dataclass(eq=False)
class DString(VDiff):
    new: str = ""


@dataclass(eq=False)
class DList(VDiff):
    ops: tuple = ()


@dataclass(eq=False)
class DRecord(VDiff):
    fields: dict = None  # field name -> VDiff, changed fields only


@dataclass(eq=False)
class DDict(VDiff):
    inserts: dict = None   # key-repr -> (key, value), key-repr sorted
    removes: dict = None   # key-repr -> key, key-repr sorted
    updates: dict = None   # key-repr -> (key, VDiff), key-repr sorted


@dataclass(eq=False)
class DClosure(VDiff):
    env_diff: dict = None        # closure-env position -> VDiff
    body: Optional[Exp] = None   # replacement body, None when unchanged


class OpKeep:
    __slots__ = ()

    def __repr__(self):
        return "Keep"


class OpDelete:
    __slots__ = ()

    def __repr__(self):
        return "Delete"


KEEP = OpKeep()
DELETE = OpDelete()


@dataclass(eq=False)
class OpInsert:
    value: Val

    def __repr__(self):
        return f"Insert({struct_key(self.value)})"


@dataclass(eq=False)
class OpUpdate:
    diff: VDiff

    def __repr__(self):
        return "Update(..)"


def check_list_diff(ops: tuple, old_len: int, new_len: int):
    keeps = sum(1 for o in ops if o is KEEP)
    dels = sum(1 for o in ops if o is DELETE)
    upds = sum(1 for o in ops if isinstance(o, OpUpdate))
    ins = sum(1 for o in ops if isinstance(o, OpInsert))
    assert keeps + dels + upds == old_len, "list diff loses old elements"
    assert keeps + ins + upds == new_len, "list diff loses new elements"


# ---------------------------------------------------------------------------
# Computing diffs


def diff_vals(old: Val, new: Val) -> Optional[VDiff]:
    """Edit difference turning `old` into `new`; None when equal."""
    if val_equal(old, new):
        return None
    if isinstance(old, VConst) and isinstance(new, VConst):
        if isinstance(old.value, str) and isinstance(new.value, str):
            return DString(new.value)
        return DReplace(new)
    if isinstance(old, VList) and isinstance(new, VList):
        return DList(list_diff(old.items, new.items))
    if isinstance(old, VRecord) and isinstance(new, VRecord):
        if set(old.fields) != set(new.fields):
            return DReplace(new)
        changed = {}
        for name in old.fields:
            d = diff_vals(old.fields[name], new.fields[name])
            if d is not None:
                changed[name] = d
        return DRecord(changed)
    if isinstance(old, VDict) and isinstance(new, VDict):
        inserts = {}
        removes = {}
        updates = {}
        for k in sorted(new.entries):
            if k not in old.entries:
                inserts[k] = new.entries[k]
        for k in sorted(old.entries):
            if k not in new.entries:
                removes[k] = old.entries[k][0]
                continue
            d = diff_vals(old.entries[k][1], new.entries[k][1])
            if d is not None:
                updates[k] = (old.entries[k][0], d)
        return DDict(inserts, removes, updates)
    if isinstance(old, VClosure) and isinstance(new, VClosure):
        d = closure_diff(old, new)
        if d is not None:
            return d
        return DReplace(new)
    return DReplace(new)


def closure_diff(old: VClosure, new: VClosure) -> Optional[DClosure]:
    """Fine-grained closure diff; None when only wholesale replacement works."""
    if struct_key(old.pat) != struct_key(new.pat):
        return None
    if old.rec_name != new.rec_name:
        return None
    if not struct_eq(old.body, new.body):
        return None  # body changes degrade to replacement
    if not env_equivalent(old.env, new.env):
        return None
    env_diff = {}
    for pos in visible_positions(old.env, closure_restricted_names(old)):
        d = diff_vals(env_get(old.env, pos), env_get(new.env, pos))
        if d is not None:
            env_diff[pos] = d
    return DClosure(env_diff, None)


def same_kind(a: Val, b: Val) -> bool:
    if isinstance(a, VConst) and isinstance(b, VConst):
        x, y = a.value, b.value
        if isinstance(x, bool) or isinstance(y, bool):
            return isinstance(x, bool) and isinstance(y, bool)
        return type(x) is type(y)
    return type(a) is type(b)


# Guard against quadratic blowup on huge unaligned middles; beyond this the
# diff falls back to pairwise updates plus tail inserts/deletes.
_DP_CELL_LIMIT = 400_000


def list_diff(old: tuple, new: tuple) -> tuple:
    """Edit script (Keep/Delete/Insert/Update) minimizing operation count.

    Ties prefer Keep, then Update, then Delete, then Insert, which keeps
    contiguous runs of the original aligned as early as possible.
    """
    lo = 0
    hi = 0
    max_trim = min(len(old), len(new))
    while lo < max_trim and val_equal(old[lo], new[lo]):
        lo += 1
    while hi < max_trim - lo and \
            val_equal(old[len(old) - 1 - hi], new[len(new) - 1 - hi]):
        hi += 1
    mid_old = old[lo:len(old) - hi]
    mid_new = new[lo:len(new) - hi]
    ops = [KEEP] * lo
    ops.extend(_list_diff_middle(mid_old, mid_new))
    ops.extend([KEEP] * hi)
    out = tuple(ops)
    check_list_diff(out, len(old), len(new))
    return out


def _list_diff_middle(old: tuple, new: tuple) -> list:
    m, n = len(old), len(new)
    if m == 0:
        return [OpInsert(v) for v in new]
    if n == 0:
        return [DELETE] * m
    if m * n > _DP_CELL_LIMIT:
        ops: list = []
        for i in range(min(m, n)):
            if val_equal(old[i], new[i]):
                ops.append(KEEP)
            elif same_kind(old[i], new[i]):
                ops.append(OpUpdate(diff_vals(old[i], new[i])))
            else:
                ops.append(DELETE)
                ops.append(OpInsert(new[i]))
        ops.extend(DELETE for _ in range(n, m))
        ops.extend(OpInsert(v) for v in new[m:])
        return ops
    # dp[i][j] = min ops to turn old[i:] into new[j:]
    INF = m + n + 1
    dp = [[0] * (n + 1) for _ in range(m + 1)]
    eq = [[False] * n for _ in range(m)]
    upd_ok = [[False] * n for _ in range(m)]
    for i in range(m):
        for j in range(n):
            if val_equal(old[i], new[j]):
                eq[i][j] = True
            elif same_kind(old[i], new[j]):
                upd_ok[i][j] = True
    for i in range(m, -1, -1):
        for j in range(n, -1, -1):
            if i == m:
                dp[i][j] = n - j
            elif j == n:
                dp[i][j] = m - i
            else:
                best = INF
                if eq[i][j]:
                    best = dp[i + 1][j + 1]
                if upd_ok[i][j]:
                    best = min(best, 1 + dp[i + 1][j + 1])
                best = min(best, 1 + dp[i + 1][j], 1 + dp[i][j + 1])
                dp[i][j] = best
    ops = []
    i = j = 0
    while i < m or j < n:
        cost = dp[i][j]
        if i < m and j < n and eq[i][j] and cost == dp[i + 1][j + 1]:
            ops.append(KEEP)
            i += 1
            j += 1
        elif i < m and j < n and upd_ok[i][j] and cost == 1 + dp[i + 1][j + 1]:
            ops.append(OpUpdate(diff_vals(old[i], new[j])))
            i += 1
            j += 1
        elif i < m and cost == 1 + dp[i + 1][j]:
            ops.append(DELETE)
            i += 1
        else:
            ops.append(OpInsert(new[j]))
            j += 1
    return ops


# ---------------------------------------------------------------------------
# Applying diffs


def apply_vdiff(v: Val, d: Optional[VDiff]) -> Val:
    if d is None:
        return v
    if isinstance(d, DReplace):
        return d.new
    if isinstance(d, DString):
        if not (isinstance(v, VConst) and isinstance(v.value, str)):
            raise DiffError("string diff applied to a non-string")
        return VConst(d.new)
    if isinstance(d, DList):
        if not isinstance(v, VList):
            raise DiffError("list diff applied to a non-list")
        out = []
        i = 0
        for op in d.ops:
            if op is KEEP:
                _need(i < len(v.items), "list diff walks past the end")
                out.append(v.items[i])
                i += 1
            elif op is DELETE:
                _need(i < len(v.items), "list diff walks past the end")
                i += 1
            elif isinstance(op, OpInsert):
                out.append(op.value)
            else:
                _need(i < len(v.items), "list diff walks past the end")
                out.append(apply_vdiff(v.items[i], op.diff))
                i += 1
        _need(i == len(v.items), "list diff is too short")
        return VList(tuple(out))
    if isinstance(d, DRecord):
        if not isinstance(v, VRecord):
            raise DiffError("record diff applied to a non-record")
        out = dict(v.fields)
        for name, sub in d.fields.items():
            _need(name in out, f"record diff mentions unknown field {name!r}")
            out[name] = apply_vdiff(out[name], sub)
        return VRecord(out)
    if isinstance(d, DDict):
        if not isinstance(v, VDict):
            raise DiffError("dict diff applied to a non-dict")
        entries = dict(v.entries)
        for k in d.removes:
            entries.pop(k, None)
        for k, (_kv, sub) in d.updates.items():
            _need(k in entries, "dict diff updates a missing key")
            kv, val = entries[k]
            entries[k] = (kv, apply_vdiff(val, sub))
        for k, pair in d.inserts.items():
            entries[k] = pair
        return VDict(entries)
    if isinstance(d, DClosure):
        if not isinstance(v, VClosure):
            raise DiffError("closure diff applied to a non-closure")
        env = v.env
        if d.env_diff:
            updates = {pos: apply_vdiff(env_get(env, pos), sub)
                       for pos, sub in d.env_diff.items()}
            env = env_rebind(env, updates)
        body = d.body if d.body is not None else v.body
        return VClosure(env, v.pat, body, rec_name=v.rec_name)
    raise DiffError(f"unknown diff {type(d).__name__}")


def _need(cond: bool, msg: str):
    if not cond:
        raise DiffError(msg)


# ---------------------------------------------------------------------------
# Three-way merge (optimistic, right-biased)


def merge_vals3(orig: Val, a: Val, b: Val) -> Val:
    """Recursive three-way merge; at conflicting leaves the right side wins."""
    if val_equal(orig, a):
        return b
    if val_equal(orig, b):
        return a
    if isinstance(orig, VList) and isinstance(a, VList) and isinstance(b, VList):
        if len(orig.items) == len(a.items) == len(b.items):
            return VList(tuple(merge_vals3(o, x, y) for o, x, y in
                               zip(orig.items, a.items, b.items)))
        return b
    if isinstance(orig, VRecord) and isinstance(a, VRecord) \
            and isinstance(b, VRecord):
        if set(orig.fields) == set(a.fields) == set(b.fields):
            return VRecord({name: merge_vals3(orig.fields[name],
                                              a.fields[name], b.fields[name])
                            for name in orig.fields})
        return b
    if isinstance(orig, VDict) and isinstance(a, VDict) and isinstance(b, VDict):
        if set(orig.entries) == set(a.entries) == set(b.entries):
            return VDict({k: (orig.entries[k][0],
                              merge_vals3(orig.entries[k][1],
                                          a.entries[k][1], b.entries[k][1]))
                          for k in orig.entries})
        return b
    if isinstance(orig, VClosure) and isinstance(a, VClosure) \
            and isinstance(b, VClosure):
        merged = _merge_closures3(orig, a, b)
        if merged is not None:
            return merged
        return b
    return b


def _merge_closures3(orig, a, b):
    if not (struct_key(orig.pat) == struct_key(a.pat) == struct_key(b.pat)):
        return None
    if not (orig.rec_name == a.rec_name == b.rec_name):
        return None
    if not (env_equivalent(orig.env, a.env) and env_equivalent(orig.env, b.env)):
        return None
    body = merge_exps3(orig.body, a.body, b.body)
    updates = {}
    for pos in visible_positions(orig.env, closure_restricted_names(orig)):
        vo = env_get(orig.env, pos)
        merged = merge_vals3(vo, env_get(a.env, pos), env_get(b.env, pos))
        if not val_equal(vo, merged):
            updates[pos] = merged
    env = env_rebind(orig.env, updates) if updates else orig.env
    return VClosure(env, orig.pat, body, rec_name=orig.rec_name)


def merge_exps3(orig: Exp, a: Exp, b: Exp) -> Exp:
    """Three-way expression merge; right side wins at conflicting leaves."""
    if struct_eq(orig, a):
        return b
    if struct_eq(orig, b):
        return a
    ko, ka, kb = type(orig), type(a), type(b)
    if not (ko is ka is kb):
        return b
    kids_o = _merge_kids(orig)
    kids_a = _merge_kids(a)
    kids_b = _merge_kids(b)
    if kids_o is None or _merge_shape(orig) != _merge_shape(a) or \
            _merge_shape(orig) != _merge_shape(b):
        return b
    merged = [merge_exps3(o, x, y) for o, x, y in zip(kids_o, kids_a, kids_b)]
    return _merge_rebuild(b, merged)


def _merge_shape(e: Exp):
    """Node head used to decide whether children can merge pointwise."""
    if isinstance(e, EConst):
        return ("const",)
    if isinstance(e, EVar):
        return ("var", e.name)
    if isinstance(e, EFun):
        return ("fun", struct_key(e.pat))
    if isinstance(e, EApp):
        return ("app",)
    if isinstance(e, ECons):
        return ("cons",)
    if isinstance(e, EList):
        return ("list", len(e.items))
    if isinstance(e, ERecord):
        return ("record", tuple(f.name for f in e.fields))
    if isinstance(e, ERecordExtend):
        return ("extend", e.name)
    if isinstance(e, EProj):
        return ("proj", e.name)
    if isinstance(e, ELet):
        return ("let", e.rec, struct_key(e.pat))
    if isinstance(e, EIf):
        return ("if",)
    if isinstance(e, ECase):
        return ("case", tuple(struct_key(b.pat) for b in e.branches))
    if isinstance(e, EFreeze):
        return ("freeze",)
    if isinstance(e, EApplyLens):
        return ("applylens",)
    if isinstance(e, EParen):
        return ("paren",)
    return None


def _merge_kids(e: Exp):
    from .core import _fv_children
    try:
        return _fv_children(e)
    except TypeError:
        return None


def _merge_rebuild(b: Exp, kids: list) -> Exp:
    if isinstance(b, EConst):
        return b
    if isinstance(b, EVar):
        return b
    if isinstance(b, EFun):
        return replace(b, body=kids[0])
    if isinstance(b, EApp):
        return replace(b, fn=kids[0], arg=kids[1])
    if isinstance(b, ECons):
        return replace(b, head=kids[0], tail=kids[1])
    if isinstance(b, EList):
        return replace(b, items=tuple(kids))
    if isinstance(b, ERecord):
        fields = tuple(replace(f, value=v) for f, v in zip(b.fields, kids))
        return replace(b, fields=fields)
    if isinstance(b, ERecordExtend):
        return replace(b, base=kids[0], value=kids[1])
    if isinstance(b, EProj):
        return replace(b, base=kids[0])
    if isinstance(b, ELet):
        return replace(b, bound=kids[0], body=kids[1])
    if isinstance(b, EIf):
        return replace(b, guard=kids[0], then=kids[1], els=kids[2])
    if isinstance(b, ECase):
        branches = tuple(replace(br, body=kid)
                         for br, kid in zip(b.branches, kids[1:]))
        return replace(b, scrutinee=kids[0], branches=branches)
    if isinstance(b, EFreeze):
        return replace(b, arg=kids[0])
    if isinstance(b, EApplyLens):
        return replace(b, lens=kids[0], arg=kids[1])
    if isinstance(b, EParen):
        return replace(b, inner=kids[0])
    raise TypeError(type(b).__name__)


# ---------------------------------------------------------------------------
# Environment merges (position-indexed diffs)


def merge_envs3(env: Env, e1: Env, d1: dict, e2: Env, d2: dict):
    """Three-way merge of two updated environments against the original.

    Returns (merged env, merged position diff).
    """
    changed = set(d1) | set(d2)
    updates = {}
    out_diff = {}
    for pos in changed:
        vo = env_get(env, pos)
        if pos in d1 and pos in d2:
            merged = merge_vals3(vo, env_get(e1, pos), env_get(e2, pos))
        elif pos in d1:
            merged = env_get(e1, pos)
        else:
            merged = env_get(e2, pos)
        d = diff_vals(vo, merged)
        if d is not None:
            updates[pos] = merged
            out_diff[pos] = d
    if not updates:
        return env, {}
    return env_rebind(env, updates), out_diff


def merge_envs2(env: Env, e1: Env, d1: dict, e2: Env, d2: dict,
                vis1: frozenset, vis2: frozenset):
    """Conservative two-way merge; None on conflict.

    `vis1`/`vis2` hold the positions of bindings visible to and free in the
    two expressions whose updates produced `e1`/`e2`.
    """
    changed = set(d1) | set(d2)
    updates = {}
    out_diff = {}
    for pos in changed:
        vo = env_get(env, pos)
        v1 = env_get(e1, pos) if pos in d1 else vo
        v2 = env_get(e2, pos) if pos in d2 else vo
        if val_equal(v1, v2):
            pick = v1
        elif pos not in vis2:
            pick = v1
        elif pos not in vis1:
            pick = v2
        else:
            return None
        d = diff_vals(vo, pick)
        if d is not None:
            updates[pos] = pick
            out_diff[pos] = d
    if not updates:
        return env, {}
    return env_rebind(env, updates), out_diff


# ---------------------------------------------------------------------------
# String concatenation splitting


def string_regions(old: str, new: str) -> list:
    """Contiguous changed regions: (start, end, replacement) on `old`."""
    sm = difflib.SequenceMatcher(None, old, new, autojunk=False)
    regions = []
    for tag, i1, i2, j1, j2 in sm.get_opcodes():
        if tag == "equal":
            continue
        repl = new[j1:j2]
        if regions and regions[-1][1] == i1:
            a, _, r = regions[-1]
            regions[-1] = (a, i2, r + repl)
        else:
            regions.append((i1, i2, repl))
    return regions


def string_concat_split(s1: str, s2: str, s_new: str) -> list:
    """Candidate (s1', s2') splits with s1' ++ s2' == s_new.

    Changed regions falling strictly inside one operand stay there; an
    insertion at the seam yields two candidates, assigning the new text to
    the right operand first, then to the left.
    """
    old = s1 + s2
    n1 = len(s1)
    regions = string_regions(old, s_new)
    ambiguous = [i for i, (a, b, repl) in enumerate(regions)
                 if repl and a <= n1 <= b]
    choice_sets = [("right", "left")] * len(ambiguous)
    candidates = []
    seen = set()
    import itertools
    for choices in itertools.product(*choice_sets) if ambiguous else [()]:
        assign = dict(zip(ambiguous, choices))
        out1 = []
        out2 = []
        pos = 0
        for idx, (a, b, repl) in enumerate(regions):
            out1.append(old[pos:min(a, n1)])
            out2.append(old[max(pos, n1):a])
            if repl:
                side = assign.get(idx)
                if side is None:
                    side = "left" if b < n1 else "right"
                if side == "left":
                    out1.append(repl)
                else:
                    out2.append(repl)
            pos = b
        out1.append(old[pos:min(len(old), n1)])
        out2.append(old[max(pos, n1):])
        pair = ("".join(out1), "".join(out2))
        if pair[0] + pair[1] != s_new:
            continue
        if pair not in seen:
            seen.add(pair)
            candidates.append(pair)
    return candidates


# ---------------------------------------------------------------------------
# Object-language encoding of diffs


def encode_diff(d: VDiff) -> Val:
    if isinstance(d, DList):
        ops = []
        for op in d.ops:
            if op is KEEP:
                ops.append(VRecord({"kind": VConst("Keep")}))
            elif op is DELETE:
                ops.append(VRecord({"kind": VConst("Delete")}))
            elif isinstance(op, OpInsert):
                ops.append(VRecord({"kind": VConst("Insert"),
                                    "value": op.value}))
            else:
                ops.append(VRecord({"kind": VConst("Update"),
                                    "diff": encode_diff(op.diff)}))
        return VList(tuple(ops))
    if isinstance(d, DReplace):
        return VRecord({"kind": VConst("Replace"), "value": d.new})
    if isinstance(d, DString):
        return VRecord({"kind": VConst("StringReplace"), "value": VConst(d.new)})
    if isinstance(d, DRecord):
        return VRecord({"kind": VConst("Record"),
                        "fields": VRecord({name: encode_diff(sub)
                                           for name, sub in d.fields.items()})})
    if isinstance(d, DDict):
        return VRecord({
            "kind": VConst("Dict"),
            "inserts": VList(tuple(VList((kv, val))
                                   for kv, val in d.inserts.values())),
            "removes": VList(tuple(d.removes.values())),
            "updates": VList(tuple(VList((kv, encode_diff(sub)))
                                   for kv, sub in d.updates.values())),
        })
    if isinstance(d, DClosure):
        from .syntax import unparse
        env_pairs = tuple(
            VList((VConst(float(pos)), encode_diff(sub)))
            for pos, sub in sorted(d.env_diff.items())
        ) if d.env_diff else ()
        body = VList((VConst(unparse(d.body)),)) if d.body is not None \
            else VList(())
        return VRecord({"kind": VConst("Closure"), "env": VList(env_pairs),
                        "body": body})
    raise DiffError(f"cannot encode {type(d).__name__}")


def decode_diff(v: Val) -> VDiff:
    if isinstance(v, VList):
        ops = []
        for opv in v.items:
            if not isinstance(opv, VRecord) or "kind" not in opv.fields:
                raise DiffError("malformed list-diff op")
            kind = opv.fields["kind"]
            if not (isinstance(kind, VConst) and isinstance(kind.value, str)):
                raise DiffError("malformed list-diff op kind")
            if kind.value == "Keep":
                ops.append(KEEP)
            elif kind.value == "Delete":
                ops.append(DELETE)
            elif kind.value == "Insert":
                if "value" not in opv.fields:
                    raise DiffError("Insert op lacks a value")
                ops.append(OpInsert(opv.fields["value"]))
            elif kind.value == "Update":
                if "diff" not in opv.fields:
                    raise DiffError("Update op lacks a diff")
                ops.append(OpUpdate(decode_diff(opv.fields["diff"])))
            else:
                raise DiffError(f"unknown list-diff op {kind.value!r}")
        return DList(tuple(ops))
    if not isinstance(v, VRecord) or "kind" not in v.fields:
        raise DiffError("malformed encoded diff")
    kind = v.fields["kind"]
    if not (isinstance(kind, VConst) and isinstance(kind.value, str)):
        raise DiffError("malformed encoded diff kind")
    k = kind.value
    if k == "Replace":
        return DReplace(_field(v, "value"))
    if k == "StringReplace":
        s = _field(v, "value")
        if not (isinstance(s, VConst) and isinstance(s.value, str)):
            raise DiffError("StringReplace value is not a string")
        return DString(s.value)
    if k == "Record":
        fields = _field(v, "fields")
        if not isinstance(fields, VRecord):
            raise DiffError("Record diff fields must be a record")
        return DRecord({name: decode_diff(sub)
                        for name, sub in fields.fields.items()})
    if k == "Dict":
        inserts = {}
        for pair in _pair_list(v, "inserts"):
            kv, val = pair
            inserts[struct_key(kv)] = (kv, val)
        removes = {}
        rv = _field(v, "removes")
        if not isinstance(rv, VList):
            raise DiffError("Dict diff removes must be a list")
        for kv in rv.items:
            removes[struct_key(kv)] = kv
        updates = {}
        for kv, sub in _pair_list(v, "updates"):
            updates[struct_key(kv)] = (kv, decode_diff(sub))
        return DDict(inserts, dict(sorted(removes.items())),
                     dict(sorted(updates.items())))
    if k == "Closure":
        from .syntax import parse
        env_diff = {}
        for pos_v, sub in _pair_list(v, "env"):
            if not (isinstance(pos_v, VConst) and isinstance(pos_v.value, float)):
                raise DiffError("Closure diff env position must be a number")
            env_diff[int(pos_v.value)] = decode_diff(sub)
        body_v = _field(v, "body")
        if not isinstance(body_v, VList) or len(body_v.items) > 1:
            raise DiffError("Closure diff body must be [] or [source]")
        body = None
        if body_v.items:
            src = body_v.items[0]
            if not (isinstance(src, VConst) and isinstance(src.value, str)):
                raise DiffError("Closure diff body must be source text")
            body = parse(src.value)
        return DClosure(env_diff, body)
    raise DiffError(f"unknown diff kind {k!r}")


def _field(v: VRecord, name: str) -> Val:
    if name not in v.fields:
        raise DiffError(f"encoded diff lacks field {name!r}")
    return v.fields[name]


def _pair_list(v: VRecord, name: str) -> list:
    lv = _field(v, name)
    if not isinstance(lv, VList):
        raise DiffError(f"encoded diff field {name!r} must be a list")
    out = []
    for pair in lv.items:
        if not (isinstance(pair, VList) and len(pair.items) == 2):
            raise DiffError(f"encoded diff field {name!r} must hold pairs")
        out.append(pair.items)
    return out
