"""Core language data: expressions, patterns, values, environments.

Expression and pattern nodes carry their concrete leading trivia (whitespace
and comments) so that unparsing reproduces source text byte for byte.  All
nodes compare by identity (eq=False); structural comparison that ignores
trivia is provided by `struct_eq`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional, Union


class Op(enum.Enum):
    """Primitive operator constants."""

    PLUS = "+"
    TIMES = "*"
    CONCAT = "++"
    AND = "&&"
    OR = "||"
    NOT = "not"
    LT = "<"
    LEQ = "<="
    GT = ">"
    GEQ = ">="
    EQ = "=="
    DICT_GET = "Dict.get"
    DICT_INSERT = "Dict.insert"
    DICT_REMOVE = "Dict.remove"
    DICT_FROMLIST = "Dict.fromList"
    UPDATE_APP = "Update.updateApp"
    DIFF = "Update.diff"
    MERGE = "Update.merge"


OP_ARITY = {
    Op.PLUS: 2,
    Op.TIMES: 2,
    Op.CONCAT: 2,
    Op.AND: 2,
    Op.OR: 2,
    Op.NOT: 1,
    Op.LT: 2,
    Op.LEQ: 2,
    Op.GT: 2,
    Op.GEQ: 2,
    Op.EQ: 2,
    Op.DICT_GET: 2,
    Op.DICT_INSERT: 3,
    Op.DICT_REMOVE: 2,
    Op.DICT_FROMLIST: 1,
    Op.UPDATE_APP: 1,
    Op.DIFF: 2,
    Op.MERGE: 2,
}

# Operators writable as ordinary atoms in source text (prefix position).
ATOM_OPS = {
    "not": Op.NOT,
    "Dict.get": Op.DICT_GET,
    "Dict.insert": Op.DICT_INSERT,
    "Dict.remove": Op.DICT_REMOVE,
    "Dict.fromList": Op.DICT_FROMLIST,
    "Update.updateApp": Op.UPDATE_APP,
    "Update.diff": Op.DIFF,
    "Update.merge": Op.MERGE,
}


class _EmptyDict:
    """Marker constant for the empty dictionary literal `Dict.empty`."""

    _inst: Optional["_EmptyDict"] = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "Dict.empty"


EMPTY_DICT = _EmptyDict()

# A constant payload: 64-bit float, bool, str, operator, or the dict marker.
Const = Union[float, bool, str, Op, _EmptyDict]

Pos = tuple  # (line, col), 1-based


# ---------------------------------------------------------------------------
# Patterns


@dataclass(eq=False)
class Pat:
    ws: str = field(default="", kw_only=True)
    pos: Optional[Pos] = field(default=None, kw_only=True)


@dataclass(eq=False)
class PVar(Pat):
    name: str = ""


@dataclass(eq=False)
class PWild(Pat):
    pass


@dataclass(eq=False)
class PConst(Pat):
    value: Const = 0.0
    text: Optional[str] = None


@dataclass(eq=False)
class PCons(Pat):
    head: Pat = None
    ws_op: str = ""
    tail: Pat = None


@dataclass(eq=False)
class PList(Pat):
    items: tuple = ()
    seps: tuple = ()  # trivia before each comma
    ws_close: str = ""


@dataclass(eq=False)
class PRecField:
    ws_name: str
    name: str
    ws_eq: Optional[str]  # None when punned ({x} binds x)
    pat: Optional[Pat]


@dataclass(eq=False)
class PRecord(Pat):
    fields: tuple = ()
    seps: tuple = ()
    ws_close: str = ""


# ---------------------------------------------------------------------------
# Expressions


@dataclass(eq=False)
class Exp:
    ws: str = field(default="", kw_only=True)
    pos: Optional[Pos] = field(default=None, kw_only=True)


@dataclass(eq=False)
class EConst(Exp):
    value: Const = 0.0
    # Exact source lexeme, kept so unparsing is byte-faithful; None for
    # synthesized constants, which render canonically.
    text: Optional[str] = None


@dataclass(eq=False)
class EVar(Exp):
    name: str = ""
    # Phantom vars carry only trivia (the implicit `main` reference that ends
    # a desugared source file).
    phantom: bool = False


@dataclass(eq=False)
class EFun(Exp):
    pat: Pat = None
    ws_arrow: str = ""
    body: Exp = None
    # True when this lambda's tokens are rendered by its parent (multi-arg
    # lambda sugar or `let f x y = ...` definition sugar).
    sugar: bool = False


@dataclass(eq=False)
class EApp(Exp):
    fn: Exp = None
    arg: Exp = None
    # True when this application renders as an infix operator use; the
    # operator constant then lives at `fn.fn` (left operand at `fn.arg`).
    infix: bool = False


@dataclass(eq=False)
class ECons(Exp):
    head: Exp = None
    ws_op: str = ""
    tail: Exp = None


@dataclass(eq=False)
class EList(Exp):
    items: tuple = ()
    seps: tuple = ()
    ws_close: str = ""


@dataclass(eq=False)
class RecField:
    ws_name: str
    name: str
    ws_eq: str
    value: Exp


@dataclass(eq=False)
class ERecord(Exp):
    fields: tuple = ()
    seps: tuple = ()
    ws_close: str = ""


@dataclass(eq=False)
class ERecordExtend(Exp):
    base: Exp = None
    ws_bar: str = ""
    ws_name: str = ""
    name: str = ""
    ws_eq: str = ""
    value: Exp = None
    ws_close: str = ""


@dataclass(eq=False)
class EProj(Exp):
    base: Exp = None
    name: str = ""


@dataclass(eq=False)
class ELet(Exp):
    rec: bool = False
    pat: Pat = None
    ws_eq: str = ""
    bound: Exp = None
    ws_in: str = ""
    body: Exp = None
    # Top-level definitions print without `let`/`in` tokens.
    toplevel: bool = False


@dataclass(eq=False)
class EIf(Exp):
    guard: Exp = None
    ws_then: str = ""
    then: Exp = None
    ws_else: str = ""
    els: Exp = None


@dataclass(eq=False)
class Branch:
    pat: Pat
    ws_arrow: str
    body: Exp


@dataclass(eq=False)
class ECase(Exp):
    scrutinee: Exp = None
    ws_of: str = ""
    branches: tuple = ()
    # Trivia before an explicit `;` separator, or None for layout breaks.
    seps: tuple = ()


@dataclass(eq=False)
class EFreeze(Exp):
    arg: Exp = None


@dataclass(eq=False)
class EApplyLens(Exp):
    lens: Exp = None
    arg: Exp = None


@dataclass(eq=False)
class EParen(Exp):
    inner: Exp = None
    ws_close: str = ""


# ---------------------------------------------------------------------------
# Values


@dataclass(eq=False)
class Val:
    pass


@dataclass(eq=False)
class VConst(Val):
    value: Const = 0.0


@dataclass(eq=False)
class VList(Val):
    items: tuple = ()


@dataclass(eq=False)
class VRecord(Val):
    fields: dict = field(default_factory=dict)  # insertion-ordered


@dataclass(eq=False)
class VDict(Val):
    # key-repr -> (key value, value); key reprs come from `struct_key`.
    entries: dict = field(default_factory=dict)


@dataclass(eq=False)
class VClosure(Val):
    env: "Env" = None
    pat: Pat = None
    body: Exp = None
    rec_name: Optional[str] = None


@dataclass(eq=False)
class VPartial(Val):
    """Partially applied primitive operator (internal)."""

    op: Op = None
    args: tuple = ()


TRUE = VConst(True)
FALSE = VConst(False)


def vbool(b: bool) -> VConst:
    return TRUE if b else FALSE


def vnum(n: float) -> VConst:
    return VConst(float(n))


def vstr(s: str) -> VConst:
    return VConst(s)


# ---------------------------------------------------------------------------
# Environments: immutable cons cells, innermost binding last.


class Env:
    __slots__ = ("parent", "name", "val", "length")

    def __init__(self, parent: Optional["Env"], name: str, val: Val):
        self.parent = parent
        self.name = name
        self.val = val
        self.length = (parent.length if parent else 0) + 1

    def __repr__(self):
        return f"<Env {self.length} bindings>"


def env_extend(env: Optional[Env], bindings) -> Optional[Env]:
    for name, val in bindings:
        env = Env(env, name, val)
    return env


def env_len(env: Optional[Env]) -> int:
    return env.length if env else 0


def env_lookup(env: Optional[Env], name: str):
    """Rightmost binding for `name`: (position, value) or None."""
    cell = env
    while cell is not None:
        if cell.name == name:
            return cell.length - 1, cell.val
        cell = cell.parent
    return None


def env_get(env: Optional[Env], pos: int) -> Val:
    cell = env
    while cell.length - 1 > pos:
        cell = cell.parent
    return cell.val


def env_cells(env: Optional[Env]):
    """Cells from innermost to outermost."""
    cell = env
    while cell is not None:
        yield cell
        cell = cell.parent


def env_names(env: Optional[Env]) -> list:
    names = [c.name for c in env_cells(env)]
    names.reverse()
    return names


def env_rebind(env: Env, updates: dict) -> Env:
    """Functionally rebind positions given by `updates` (pos -> new value)."""
    if not updates:
        return env
    deepest = min(updates)
    spine = []
    cell = env
    while cell is not None and cell.length - 1 >= deepest:
        spine.append(cell)
        cell = cell.parent
    out = cell  # shared tail below the deepest change
    for c in reversed(spine):
        pos = c.length - 1
        out = Env(out, c.name, updates.get(pos, c.val))
    return out


def env_equivalent(e1: Optional[Env], e2: Optional[Env]) -> bool:
    """Same length and same identifier sequence."""
    if env_len(e1) != env_len(e2):
        return False
    for c1, c2 in zip(env_cells(e1), env_cells(e2)):
        if c1 is c2:
            return True
        if c1.name != c2.name:
            return False
    return True


def visible_positions(env: Optional[Env], names) -> frozenset:
    """Positions of the rightmost (visible) binding of each name in `names`."""
    wanted = set(names)
    out = set()
    for cell in env_cells(env):
        if not wanted:
            break
        if cell.name in wanted:
            wanted.discard(cell.name)
            out.add(cell.length - 1)
    return frozenset(out)


# ---------------------------------------------------------------------------
# Pattern helpers


def pat_vars(p: Pat) -> list:
    """Variable names bound by `p`, in left-to-right order."""
    out = []
    work = [p]
    while work:
        q = work.pop(0)
        if isinstance(q, PVar):
            out.append(q.name)
        elif isinstance(q, PCons):
            work.insert(0, q.tail)
            work.insert(0, q.head)
        elif isinstance(q, PList):
            for i, item in enumerate(q.items):
                work.insert(i, item)
        elif isinstance(q, PRecord):
            for i, f in enumerate(q.fields):
                work.insert(i, f.pat if f.pat is not None else PVar(f.name))
    return out


class MatchFail(Exception):
    pass


def match_pattern(p: Pat, v: Val):
    """Match `v` against `p`: ordered (name, value) list, or None on no-match."""
    out = []
    try:
        _match(p, v, out)
    except MatchFail:
        return None
    return out


def _match(p: Pat, v: Val, out: list):
    if isinstance(p, PWild):
        return
    if isinstance(p, PVar):
        out.append((p.name, v))
        return
    if isinstance(p, PConst):
        if not (isinstance(v, VConst) and const_equal(p.value, v.value)):
            raise MatchFail()
        return
    if isinstance(p, PCons):
        if not (isinstance(v, VList) and v.items):
            raise MatchFail()
        _match(p.head, v.items[0], out)
        _match(p.tail, VList(v.items[1:]), out)
        return
    if isinstance(p, PList):
        if not (isinstance(v, VList) and len(v.items) == len(p.items)):
            raise MatchFail()
        for q, item in zip(p.items, v.items):
            _match(q, item, out)
        return
    if isinstance(p, PRecord):
        if not isinstance(v, VRecord):
            raise MatchFail()
        for f in p.fields:
            if f.name not in v.fields:
                raise MatchFail()
            sub = f.pat if f.pat is not None else PVar(f.name)
            _match(sub, v.fields[f.name], out)
        return
    raise MatchFail()


# ---------------------------------------------------------------------------
# Free variables (iterative, cached on the node)


def free_vars(e: Exp) -> frozenset:
    """Free variable names of `e`, respecting binders."""
    hit = getattr(e, "_fv", None)
    if hit is not None:
        return hit
    # Post-order: compute child sets first with an explicit stack.
    result: dict = {}
    stack = [(e, False)]
    while stack:
        node, seen = stack.pop()
        nid = id(node)
        hit = getattr(node, "_fv", None)
        if hit is not None:
            result[nid] = hit
            continue
        if nid in result:
            continue
        kids = _fv_children(node)
        if not seen:
            stack.append((node, True))
            for kid in kids:
                stack.append((kid, False))
            continue
        fv = _fv_combine(node, [result[id(k)] for k in kids])
        result[nid] = fv
        node._fv = fv
    return result[id(e)]


def _fv_children(e: Exp) -> list:
    if isinstance(e, (EConst,)):
        return []
    if isinstance(e, EVar):
        return []
    if isinstance(e, EFun):
        return [e.body]
    if isinstance(e, EApp):
        return [e.fn, e.arg]
    if isinstance(e, ECons):
        return [e.head, e.tail]
    if isinstance(e, EList):
        return list(e.items)
    if isinstance(e, ERecord):
        return [f.value for f in e.fields]
    if isinstance(e, ERecordExtend):
        return [e.base, e.value]
    if isinstance(e, EProj):
        return [e.base]
    if isinstance(e, ELet):
        return [e.bound, e.body]
    if isinstance(e, EIf):
        return [e.guard, e.then, e.els]
    if isinstance(e, ECase):
        return [e.scrutinee] + [b.body for b in e.branches]
    if isinstance(e, EFreeze):
        return [e.arg]
    if isinstance(e, EApplyLens):
        return [e.lens, e.arg]
    if isinstance(e, EParen):
        return [e.inner]
    raise TypeError(f"unknown expression node {type(e).__name__}")


def _fv_combine(e: Exp, kid_sets: list) -> frozenset:
    if isinstance(e, EVar):
        return frozenset() if e.phantom else frozenset([e.name])
    if isinstance(e, EFun):
        return kid_sets[0] - frozenset(pat_vars(e.pat))
    if isinstance(e, ELet):
        binders = frozenset(pat_vars(e.pat))
        if e.rec:
            return (kid_sets[0] | kid_sets[1]) - binders
        return kid_sets[0] | (kid_sets[1] - binders)
    if isinstance(e, ECase):
        fv = kid_sets[0]
        for br, body_fv in zip(e.branches, kid_sets[1:]):
            fv = fv | (body_fv - frozenset(pat_vars(br.pat)))
        return fv
    out = frozenset()
    for s in kid_sets:
        out = out | s
    return out


# ---------------------------------------------------------------------------
# Structural equality and keys (trivia-insensitive)


def const_equal(a: Const, b: Const) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, float) and isinstance(b, float):
        return a == b
    return type(a) is type(b) and a == b


def strip_parens(e: Exp) -> Exp:
    while isinstance(e, EParen):
        e = e.inner
    return e


def struct_eq(a: Exp, b: Exp) -> bool:
    """Structural expression equality, ignoring trivia and lexeme spellings."""
    return struct_key(a) == struct_key(b)


def struct_key(e) -> str:
    """Canonical string for expressions, patterns, and values (for dedup)."""
    if isinstance(e, (Exp, Pat)):
        hit = getattr(e, "_skey", None)
        if hit is not None:
            return hit
        parts: list = []
        _skey(e, parts, set())
        key = "".join(parts)
        e._skey = key
        return key
    parts = []
    _skey(e, parts, set())
    return "".join(parts)


def _const_key(c: Const) -> str:
    if isinstance(c, bool):
        return "True" if c else "False"
    if isinstance(c, float):
        return render_number(c)
    if isinstance(c, str):
        return '"' + c.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(c, Op):
        return c.value
    return "Dict.empty"


def _skey(e, parts: list, seen: set):
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, str):
            parts.append(node)
            continue
        if isinstance(node, EConst):
            parts.append(_const_key(node.value))
        elif isinstance(node, EVar):
            parts.append("$" if node.phantom else node.name)
        elif isinstance(node, EFun):
            parts.append("(\\")
            stack += [")", node.body, "->", node.pat]
        elif isinstance(node, EApp):
            parts.append("(")
            stack += [")", node.arg, " ", node.fn]
        elif isinstance(node, ECons):
            parts.append("(")
            stack += [")", node.tail, "::", node.head]
        elif isinstance(node, EList):
            parts.append("[")
            stack.append("]")
            for item in reversed(node.items):
                stack += [item, ","]
        elif isinstance(node, ERecord):
            parts.append("{")
            stack.append("}")
            for f in reversed(node.fields):
                stack += [f.value, f.name + "=", ","]
        elif isinstance(node, ERecordExtend):
            parts.append("{")
            stack += ["}", node.value, "|" + node.name + "=", node.base]
        elif isinstance(node, EProj):
            stack += ["." + node.name, node.base]
        elif isinstance(node, ELet):
            parts.append("(letrec " if node.rec else "(let ")
            stack += [")", node.body, " in ", node.bound, "=", node.pat]
        elif isinstance(node, EIf):
            parts.append("(if ")
            stack += [")", node.els, " else ", node.then, " then ", node.guard]
        elif isinstance(node, ECase):
            parts.append("(case ")
            stack.append(")")
            for br in reversed(node.branches):
                stack += [br.body, "->", br.pat, ";"]
            stack.append(node.scrutinee)
        elif isinstance(node, EFreeze):
            parts.append("(freeze ")
            stack += [")", node.arg]
        elif isinstance(node, EApplyLens):
            parts.append("(applyLens ")
            stack += [")", node.arg, " ", node.lens]
        elif isinstance(node, EParen):
            stack.append(node.inner)
        elif isinstance(node, PVar):
            parts.append(node.name)
        elif isinstance(node, PWild):
            parts.append("_")
        elif isinstance(node, PConst):
            parts.append(_const_key(node.value))
        elif isinstance(node, PCons):
            parts.append("(")
            stack += [")", node.tail, "::", node.head]
        elif isinstance(node, PList):
            parts.append("[")
            stack.append("]")
            for item in reversed(node.items):
                stack += [item, ","]
        elif isinstance(node, PRecord):
            parts.append("{")
            stack.append("}")
            for f in reversed(node.fields):
                stack += [f.pat if f.pat is not None else PVar(f.name),
                          f.name + "=", ","]
        elif isinstance(node, VConst):
            parts.append(_const_key(node.value))
        elif isinstance(node, VList):
            parts.append("[")
            stack.append("]")
            for item in reversed(node.items):
                stack += [item, ","]
        elif isinstance(node, VRecord):
            parts.append("{")
            stack.append("}")
            for name in reversed(list(node.fields)):
                stack += [node.fields[name], name + "=", ","]
        elif isinstance(node, VDict):
            parts.append("dict{")
            stack.append("}")
            for k in sorted(node.entries, reverse=True):
                stack += [node.entries[k][1], k + "=>", ","]
        elif isinstance(node, VClosure):
            if id(node) in seen:
                parts.append("<rec-closure>")
                continue
            seen.add(id(node))
            parts.append("<closure ")
            stack += [">"]
            names = sorted(free_vars(node.body) - frozenset(pat_vars(node.pat)))
            for name in reversed(names):
                if name == node.rec_name:
                    continue
                hit = env_lookup(node.env, name)
                if hit is not None:
                    stack += [hit[1], name + "=", ";"]
            stack += [node.body, "->", node.pat, "\\"]
        elif isinstance(node, VPartial):
            parts.append("<partial " + node.op.value)
            stack.append(">")
            for a in reversed(node.args):
                stack += [a, " "]
        else:
            raise TypeError(f"cannot key {type(node).__name__}")


def render_number(n: float) -> str:
    if n == int(n) and abs(n) < 1e16:
        return str(int(n))
    return repr(n)


# ---------------------------------------------------------------------------
# Value equality


def val_equal(a: Val, b: Val) -> bool:
    """Structural value equality.

    Closures compare by body syntax (trivia ignored) plus environment
    agreement restricted to the body's free variables.
    """
    if a is b:
        return True
    if isinstance(a, VConst) and isinstance(b, VConst):
        return const_equal(a.value, b.value)
    if isinstance(a, VList) and isinstance(b, VList):
        if len(a.items) != len(b.items):
            return False
        return all(val_equal(x, y) for x, y in zip(a.items, b.items))
    if isinstance(a, VRecord) and isinstance(b, VRecord):
        if set(a.fields) != set(b.fields):
            return False
        return all(val_equal(a.fields[k], b.fields[k]) for k in a.fields)
    if isinstance(a, VDict) and isinstance(b, VDict):
        if set(a.entries) != set(b.entries):
            return False
        return all(val_equal(a.entries[k][1], b.entries[k][1]) for k in a.entries)
    if isinstance(a, VClosure) and isinstance(b, VClosure):
        return closure_equal(a, b)
    if isinstance(a, VPartial) and isinstance(b, VPartial):
        return (a.op is b.op and len(a.args) == len(b.args)
                and all(val_equal(x, y) for x, y in zip(a.args, b.args)))
    return False


def closure_equal(a: VClosure, b: VClosure) -> bool:
    if struct_key(a.pat) != struct_key(b.pat):
        return False
    if not struct_eq(a.body, b.body):
        return False
    if a.rec_name != b.rec_name:
        return False
    names = free_vars(a.body) - frozenset(pat_vars(a.pat))
    for name in names:
        if name == a.rec_name:
            continue  # the recursive self-binding is compared by name only
        ha = env_lookup(a.env, name)
        hb = env_lookup(b.env, name)
        if (ha is None) != (hb is None):
            return False
        if ha is not None and not val_equal(ha[1], hb[1]):
            return False
    return True


def closure_restricted_names(c: VClosure) -> frozenset:
    return (free_vars(c.body) - frozenset(pat_vars(c.pat))) - (
        frozenset([c.rec_name]) if c.rec_name else frozenset()
    )


# ---------------------------------------------------------------------------
# Value-to-expression coercion


class UncoercibleClosure(Exception):
    """A closure with captured bindings cannot be written as a literal."""


def val_to_exp(v: Val) -> Exp:
    """An expression that evaluates to `v` in any environment.

    Fails with UncoercibleClosure when `v` contains a closure that captures
    anything (such a value cannot be expressed as a literal insertion).
    """
    if isinstance(v, VConst):
        return EConst(v.value)
    if isinstance(v, VList):
        items = []
        for i, item in enumerate(v.items):
            sub = val_to_exp(item)
            items.append(replace(sub, ws=("" if i == 0 else " ")))
        return EList(items=tuple(items), seps=("",) * max(0, len(items) - 1))
    if isinstance(v, VRecord):
        fields = []
        for i, (name, fv) in enumerate(v.fields.items()):
            sub = replace(val_to_exp(fv), ws=" ")
            fields.append(RecField("" if i == 0 else " ", name, " ", sub))
        return ERecord(fields=tuple(fields),
                       seps=("",) * max(0, len(fields) - 1))
    if isinstance(v, VDict):
        pairs = VList(tuple(VList((kv, val)) for kv, val in
                            (v.entries[k] for k in sorted(v.entries))))
        arg = replace(val_to_exp(pairs), ws=" ")
        return EApp(fn=EConst(Op.DICT_FROMLIST), arg=arg)
    if isinstance(v, VClosure):
        if closure_restricted_names(v):
            raise UncoercibleClosure(
                "closure captures bindings and has no literal form")
        return EFun(pat=v.pat, ws_arrow=" ",
                    body=replace(v.body, ws=" "))
    if isinstance(v, VPartial):
        raise UncoercibleClosure("partially applied primitive has no literal form")
    raise TypeError(f"cannot coerce {type(v).__name__}")
