"""Random well-typed program generation for engine properties.

Programs are emitted as source text (fully parenthesized) so they carry
normal token trivia; every generated program evaluates successfully and
terminates.  Types keep generation honest: num, str, bool, list t,
rec {a: t1, b: t2}, fun t1 t2.
"""

from __future__ import annotations

import random

NUM = ("num",)
STR = ("str",)
BOOL = ("bool",)


def t_list(t):
    return ("list", t)


def t_rec(fields):
    return ("rec", tuple(sorted(fields.items())))


def t_fun(a, b):
    return ("fun", a, b)


BASE_TYPES = [NUM, STR, BOOL]


class Gen:
    def __init__(self, seed: int):
        self.rng = random.Random(seed)
        self.counter = 0

    def fresh(self) -> str:
        self.counter += 1
        return f"v{self.counter}"

    def random_type(self, depth: int):
        if depth <= 0:
            return self.rng.choice(BASE_TYPES)
        roll = self.rng.random()
        if roll < 0.5:
            return self.rng.choice(BASE_TYPES)
        if roll < 0.7:
            return t_list(self.random_type(depth - 1))
        if roll < 0.85:
            return t_rec({"a": self.random_type(depth - 1),
                          "b": self.random_type(depth - 1)})
        return t_fun(self.rng.choice(BASE_TYPES),
                     self.random_type(depth - 1))

    # -- leaves ---------------------------------------------------------------

    def literal(self, ty) -> str:
        if ty == NUM:
            return str(self.rng.randint(-9, 99))
        if ty == STR:
            n = self.rng.randint(0, 6)
            return '"' + "".join(self.rng.choice("abcxyz ?,.")
                                 for _ in range(n)) + '"'
        if ty == BOOL:
            return self.rng.choice(["True", "False"])
        if ty[0] == "list":
            n = self.rng.randint(0, 3)
            return "[" + ", ".join(self.literal(ty[1]) for _ in range(n)) + "]"
        if ty[0] == "rec":
            inner = ", ".join(f"{name} = {self.literal(t)}"
                              for name, t in ty[1])
            return "{" + inner + "}"
        if ty[0] == "fun":
            x = self.fresh()
            return f"(\\{x} -> {self.literal(ty[2])})"
        raise AssertionError(ty)

    # -- expressions ----------------------------------------------------------

    def expr(self, ctx: list, ty, depth: int) -> str:
        """ctx: list of (name, type) in scope."""
        rng = self.rng
        matching = [name for name, t in ctx if t == ty]
        if depth <= 0:
            if matching and rng.random() < 0.5:
                return rng.choice(matching)
            return self.literal(ty)
        forms = ["let", "if", "freeze", "lens", "app"]
        if matching:
            forms.append("var")
        if ty == NUM:
            forms += ["plus", "times", "letrec"]
        if ty == STR:
            forms += ["concat"]
        if ty == BOOL:
            forms += ["cmp", "and", "or", "not", "eq"]
        if ty[0] == "list":
            forms += ["listlit", "cons", "case"]
        else:
            forms += ["case"]
        if ty[0] == "rec":
            forms += ["record", "extend"]
        forms.append("proj")
        form = rng.choice(forms)
        d = depth - 1

        if form == "var":
            return rng.choice(matching)
        if form == "let":
            x = self.fresh()
            bt = self.random_type(1)
            bound = self.expr(ctx, bt, d)
            body = self.expr(ctx + [(x, bt)], ty, d)
            return f"(let {x} = {bound} in {body})"
        if form == "letrec":
            f = self.fresh()
            n = self.fresh()
            arg = self.expr(ctx, NUM, d)
            # terminates: the recursive call zeroes its argument
            return (f"(letrec {f} = (\\{n} -> (if {n} < 1 then 0 else "
                    f"{f} ({n} * 0))) in {f} {self._atomize(arg)})")
        if form == "if":
            g = self.expr(ctx, BOOL, d)
            a = self.expr(ctx, ty, d)
            b = self.expr(ctx, ty, d)
            return f"(if {g} then {a} else {b})"
        if form == "freeze":
            return f"Update.freeze {self._atomize(self.expr(ctx, ty, d))}"
        if form == "lens":
            # a lawful identity lens
            arg = self.expr(ctx, ty, d)
            lens = ("{apply = (\\i -> i), update = "
                    "(\\r -> {values = [r.outputNew]})}")
            return f"Update.applyLens {lens} {self._atomize(arg)}"
        if form == "app":
            x = self.fresh()
            at = self.random_type(0)
            body = self.expr(ctx + [(x, at)], ty, d)
            arg = self.expr(ctx, at, d)
            return f"((\\{x} -> {body}) {self._atomize(arg)})"
        if form == "plus":
            return (f"({self.expr(ctx, NUM, d)} + {self.expr(ctx, NUM, d)})")
        if form == "times":
            return (f"({self.expr(ctx, NUM, d)} * {self.expr(ctx, NUM, d)})")
        if form == "concat":
            op = rng.choice(["+", "++"])
            return (f"({self.expr(ctx, STR, d)} {op} {self.expr(ctx, STR, d)})")
        if form == "cmp":
            op = rng.choice(["<", "<=", ">", ">="])
            bt = rng.choice([NUM, STR])
            return (f"({self.expr(ctx, bt, d)} {op} {self.expr(ctx, bt, d)})")
        if form == "and":
            return (f"({self.expr(ctx, BOOL, d)} && {self.expr(ctx, BOOL, d)})")
        if form == "or":
            return (f"({self.expr(ctx, BOOL, d)} || {self.expr(ctx, BOOL, d)})")
        if form == "not":
            return f"(not {self._atomize(self.expr(ctx, BOOL, d))})"
        if form == "eq":
            bt = rng.choice([NUM, STR])
            return (f"({self.expr(ctx, bt, d)} == {self.expr(ctx, bt, d)})")
        if form == "listlit":
            n = rng.randint(0, 3)
            inner = ", ".join(self.expr(ctx, ty[1], d) for _ in range(n))
            return f"[{inner}]"
        if form == "cons":
            h = self.expr(ctx, ty[1], d)
            t = self.expr(ctx, ty, d)
            return f"({h} :: {t})"
        if form == "case":
            et = self.random_type(0)
            scrut = self.expr(ctx, t_list(et), d)
            h = self.fresh()
            r = self.fresh()
            nil = self.expr(ctx, ty, d)
            cons = self.expr(ctx + [(h, et), (r, t_list(et))], ty, d)
            return (f"(case {scrut} of [] -> {nil}; "
                    f"{h} :: {r} -> {cons})")
        if form == "record":
            inner = ", ".join(f"{name} = {self.expr(ctx, t, d)}"
                              for name, t in ty[1])
            return "{" + inner + "}"
        if form == "extend":
            base = self.expr(ctx, ty, d)
            name, t = rng.choice(ty[1])
            return ("{" + f"{self._atomize(base)} | {name} = "
                    f"{self.expr(ctx, t, d)}" + "}")
        if form == "proj":
            field = rng.choice(["a", "b"])
            rt = t_rec({"a": ty if field == "a" else self.random_type(0),
                        "b": ty if field == "b" else self.random_type(0)})
            rec = self.expr(ctx, rt, d)
            return f"{self._atomize(rec)}.{field}"
        raise AssertionError(form)

    def _atomize(self, src: str) -> str:
        if src.startswith(("(", "[", "{", '"')) or \
                src.replace("-", "").replace(".", "").isalnum():
            return src
        return f"({src})"


def gen_program(seed: int, depth: int = 5) -> str:
    g = Gen(seed)
    ty = g.random_type(2)
    return g.expr([], ty, depth)


def perturb_leaf(v, rng: random.Random):
    """A copy of `v` with one constant leaf changed; None when no leaf."""
    from bideval.core import VConst, VDict, VList, VRecord

    leaves = []

    def walk(x, path):
        if isinstance(x, VConst) and not isinstance(x.value, tuple):
            if isinstance(x.value, (bool, float, str)):
                leaves.append(path)
        elif isinstance(x, VList):
            for i, item in enumerate(x.items):
                walk(item, path + (("list", i),))
        elif isinstance(x, VRecord):
            for name, fv in x.fields.items():
                walk(fv, path + (("rec", name),))
    walk(v, ())
    if not leaves:
        return None
    target = rng.choice(leaves)

    def rebuild(x, path):
        from bideval.core import VConst, VList, VRecord
        if not path:
            val = x.value
            if isinstance(val, bool):
                return VConst(not val)
            if isinstance(val, float):
                return VConst(val + 1.0)
            return VConst(val + "x" if rng.random() < 0.5 or not val
                          else val[:-1])
        (kind, key), rest = path[0], path[1:]
        if kind == "list":
            items = list(x.items)
            items[key] = rebuild(items[key], rest)
            return VList(tuple(items))
        fields = dict(x.fields)
        fields[key] = rebuild(fields[key], rest)
        return VRecord(fields)

    return rebuild(v, target)
