"""Surface syntax: lexer, parser, whitespace-faithful unparser, value I/O.

The parser records every token's leading trivia (spaces, newlines, `--`
comments) in the AST so that `unparse(parse(src)) == src` byte for byte.
Program files are a sequence of top-level definitions (one of which must be
`main`); they desugar to nested let/letrec expressions ending in a phantom
reference to `main`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .core import (
    ATOM_OPS, EMPTY_DICT, Branch, EApp, EApplyLens, ECase, ECons, EConst,
    EFreeze, EFun, EIf, EList, ELet, EParen, EProj, ERecord, ERecordExtend,
    EVar, Exp, Op, Pat, PConst, PCons, PList, PRecField, PRecord, PVar, PWild,
    RecField, Val, VConst, VDict, VList, VRecord, VClosure, VPartial,
    render_number, struct_key,
)


class ParseError(Exception):
    def __init__(self, line: int, col: int, message: str, expected: str = ""):
        self.line = line
        self.col = col
        self.message = message
        self.expected = expected
        hint = f" (expected {expected})" if expected else ""
        super().__init__(f"{line}:{col}: {message}{hint}")


KEYWORDS = {"let", "letrec", "in", "if", "then", "else", "case", "of"}

_NUM_RE = re.compile(r"-?\d+(\.\d+)?")
_IDENT_START = re.compile(r"[A-Za-z_]")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")

_SYMBOLS = ["->", "::", "++", "&&", "||", "<=", ">=", "==",
            "(", ")", "[", "]", "{", "}", ",", ";", "|", "=",
            "<", ">", "+", "*", "\\", "."]


@dataclass
class Token:
    kind: str  # ident, qident, number, string, sym:<s>, kw:<k>, bool, op, eof,
               # freeze, applylens, emptydict
    text: str
    value: object
    ws: str
    line: int
    col: int
    line_lead: bool  # first non-trivia token on its line


def tokenize(src: str) -> list:
    toks = []
    i = 0
    line = 1
    col = 1
    n = len(src)
    last_line_with_token = 0
    while True:
        ws_start = i
        while i < n:
            c = src[i]
            if c in " \t":
                i += 1
                col += 1
            elif c == "\n":
                i += 1
                line += 1
                col = 1
            elif c == "\r":
                i += 1
            elif c == "-" and src.startswith("--", i):
                while i < n and src[i] != "\n":
                    i += 1
                    col += 1
            else:
                break
        ws = src[ws_start:i]
        lead = line != last_line_with_token
        if i >= n:
            toks.append(Token("eof", "", None, ws, line, col, lead))
            return toks
        start_line, start_col = line, col
        c = src[i]
        tok: Optional[Token] = None
        if c.isdigit() or (c == "-" and i + 1 < n and src[i + 1].isdigit()):
            m = _NUM_RE.match(src, i)
            text = m.group(0)
            val = float(text)
            if val != val or val in (float("inf"), float("-inf")):
                raise ParseError(line, col, f"number out of range: {text}")
            tok = Token("number", text, val, ws, line, col, lead)
        elif c == '"':
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise ParseError(start_line, start_col,
                                     "unterminated string literal")
                ch = src[j]
                if ch == '"':
                    j += 1
                    break
                if ch == "\n":
                    raise ParseError(start_line, start_col,
                                     "unterminated string literal")
                if ch == "\\":
                    if j + 1 >= n:
                        raise ParseError(start_line, start_col,
                                         "unterminated string escape")
                    esc = src[j + 1]
                    mapped = {"n": "\n", "t": "\t", "r": "\r",
                              '"': '"', "\\": "\\"}.get(esc)
                    if mapped is None:
                        raise ParseError(line, col + (j - i),
                                         f"unknown escape \\{esc}")
                    buf.append(mapped)
                    j += 2
                else:
                    buf.append(ch)
                    j += 1
            text = src[i:j]
            tok = Token("string", text, "".join(buf), ws, line, col, lead)
        elif _IDENT_START.match(c):
            m = _IDENT_RE.match(src, i)
            name = m.group(0)
            j = m.end()
            # Qualified name: Upper.seg(.seg)*, lexed as one identifier.
            if name[0].isupper():
                while j < n and src[j] == "." and j + 1 < n and \
                        _IDENT_START.match(src[j + 1]):
                    m2 = _IDENT_RE.match(src, j + 1)
                    name = name + "." + m2.group(0)
                    j = m2.end()
            text = src[i:j]
            if name == "True":
                tok = Token("bool", text, True, ws, line, col, lead)
            elif name == "False":
                tok = Token("bool", text, False, ws, line, col, lead)
            elif name in KEYWORDS:
                tok = Token("kw:" + name, text, None, ws, line, col, lead)
            elif name == "Update.freeze":
                tok = Token("freeze", text, None, ws, line, col, lead)
            elif name == "Update.applyLens":
                tok = Token("applylens", text, None, ws, line, col, lead)
            elif name == "Dict.empty":
                tok = Token("emptydict", text, EMPTY_DICT, ws, line, col, lead)
            elif name in ATOM_OPS:
                tok = Token("op", text, ATOM_OPS[name], ws, line, col, lead)
            elif "." in name:
                tok = Token("qident", text, name, ws, line, col, lead)
            else:
                tok = Token("ident", text, name, ws, line, col, lead)
        else:
            for sym in _SYMBOLS:
                if src.startswith(sym, i):
                    tok = Token("sym:" + sym, sym, None, ws, line, col, lead)
                    break
            if tok is None:
                raise ParseError(line, col, f"unexpected character {c!r}")
        toks.append(tok)
        i += len(tok.text)
        col += len(tok.text)
        last_line_with_token = start_line
    # unreachable


_INFIX_LEVELS = [
    {"sym:||": Op.OR},
    {"sym:&&": Op.AND},
    {"sym:<": Op.LT, "sym:<=": Op.LEQ, "sym:>": Op.GT,
     "sym:>=": Op.GEQ, "sym:==": Op.EQ},
    # cons level handled separately
    {"sym:+": Op.PLUS, "sym:++": Op.CONCAT},
    {"sym:*": Op.TIMES},
]

_ATOM_STARTS = {"number", "string", "bool", "ident", "qident", "op",
                "emptydict", "freeze", "applylens",
                "sym:(", "sym:[", "sym:{"}


class Parser:
    def __init__(self, toks: list):
        self.toks = toks
        self.i = 0
        self.layout: list = [0]  # active layout columns

    # -- token plumbing ------------------------------------------------------

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, kind: str) -> bool:
        t = self.peek()
        return t.kind == kind and not self.broke(t)

    def expect(self, kind: str, what: str) -> Token:
        t = self.peek()
        if t.kind != kind:
            raise ParseError(t.line, t.col,
                             f"unexpected {t.text or 'end of input'!r}", what)
        return self.next()

    def broke(self, t: Token) -> bool:
        """True when `t` falls outside the current layout block."""
        if t.kind == "eof":
            return True
        return t.line_lead and t.col <= self.layout[-1]

    # -- expressions ---------------------------------------------------------

    def expr(self) -> Exp:
        if self.at("kw:let") or self.at("kw:letrec"):
            return self.let_expr()
        if self.at("kw:if"):
            return self.if_expr()
        if self.at("kw:case"):
            return self.case_expr()
        if self.at("sym:\\"):
            return self.lambda_expr()
        return self.op_expr(0)

    def let_expr(self) -> Exp:
        kw = self.next()
        rec = kw.kind == "kw:letrec"
        pat = self.pattern()
        if rec and not isinstance(pat, PVar):
            raise ParseError(kw.line, kw.col, "letrec requires a simple name")
        params = []
        while isinstance(pat, PVar) and self.pat_start():
            params.append(self.pattern())
        eq = self.expect("sym:=", "'='")
        bound = self.expr()
        for p in reversed(params):
            bound = EFun(pat=p, ws_arrow="", body=bound, sugar=True)
        intok = self.expect("kw:in", "'in'")
        body = self.expr()
        return ELet(ws=kw.ws, pos=(kw.line, kw.col), rec=rec, pat=pat,
                    ws_eq=eq.ws, bound=bound, ws_in=intok.ws, body=body)

    def if_expr(self) -> Exp:
        kw = self.next()
        guard = self.expr()
        then_t = self.expect("kw:then", "'then'")
        then = self.expr()
        else_t = self.expect("kw:else", "'else'")
        els = self.expr()
        return EIf(ws=kw.ws, pos=(kw.line, kw.col), guard=guard,
                   ws_then=then_t.ws, then=then, ws_else=else_t.ws, els=els)

    def case_expr(self) -> Exp:
        kw = self.next()
        scrut = self.expr()
        of_t = self.expect("kw:of", "'of'")
        first = self.peek()
        if first.kind == "eof":
            raise ParseError(first.line, first.col, "missing case branches")
        branch_col = first.col
        branches = []
        seps = []
        self.layout.append(branch_col)
        try:
            while True:
                branches.append(self.case_branch())
                t = self.peek()
                if t.kind == "sym:;" and not (t.line_lead and
                                              t.col < branch_col):
                    self.next()
                    seps.append(t.ws)
                    continue
                if t.line_lead and t.col == branch_col and \
                        t.kind != "eof" and self._branch_start(t):
                    seps.append(None)
                    continue
                break
        finally:
            self.layout.pop()
        return ECase(ws=kw.ws, pos=(kw.line, kw.col), scrutinee=scrut,
                     ws_of=of_t.ws, branches=tuple(branches), seps=tuple(seps))

    def _branch_start(self, t: Token) -> bool:
        return t.kind in {"ident", "qident", "number", "string", "bool",
                          "sym:[", "sym:{"}

    def case_branch(self) -> Branch:
        pat = self.pattern()
        arrow = self.expect("sym:->", "'->'")
        # Branch bodies live strictly to the right of the branch column.
        self.layout.append(self.layout[-1])
        try:
            body = self.expr()
        finally:
            self.layout.pop()
        return Branch(pat=pat, ws_arrow=arrow.ws, body=body)

    def lambda_expr(self) -> Exp:
        bs = self.next()
        pats = [self.pattern()]
        while self.pat_start():
            pats.append(self.pattern())
        arrow = self.expect("sym:->", "'->'")
        body = self.expr()
        for p in reversed(pats[1:]):
            body = EFun(pat=p, ws_arrow="", body=body, sugar=True)
        return EFun(ws=bs.ws, pos=(bs.line, bs.col), pat=pats[0],
                    ws_arrow=arrow.ws, body=body)

    def op_expr(self, level: int) -> Exp:
        if level == 3:
            return self.cons_expr()
        if level >= len(_INFIX_LEVELS) + 1:
            return self.app_expr()
        table = _INFIX_LEVELS[level if level < 3 else level - 1]
        sub = level + 1
        first = self.op_expr(sub)
        chain = [first]
        ops = []
        while True:
            t = self.peek()
            if t.kind in table and not self.broke(t):
                self.next()
                ops.append((t, table[t.kind]))
                chain.append(self.op_expr(sub))
                if level == 2 and len(ops) > 1:
                    raise ParseError(t.line, t.col,
                                     "comparison operators do not chain")
            else:
                break
        # fold right-associatively
        out = chain[-1]
        for k in range(len(ops) - 1, -1, -1):
            t, op = ops[k]
            opconst = EConst(ws=t.ws, pos=(t.line, t.col), value=op, text=t.text)
            out = EApp(fn=EApp(fn=opconst, arg=chain[k], infix=True),
                       arg=out, infix=True, pos=chain[k].pos)
        return out

    def cons_expr(self) -> Exp:
        head = self.op_expr(4)
        t = self.peek()
        if t.kind == "sym:::" and not self.broke(t):
            self.next()
            tail = self.cons_expr()
            return ECons(head=head, ws_op=t.ws, tail=tail, pos=head.pos)
        return head

    def app_expr(self) -> Exp:
        out = self.atom()
        while True:
            t = self.peek()
            if t.kind in _ATOM_STARTS and not self.broke(t):
                arg = self.atom()
                out = EApp(fn=out, arg=arg, pos=out.pos)
            else:
                break
        return out

    def atom(self) -> Exp:
        t = self.peek()
        if self.broke(t):
            raise ParseError(t.line, t.col, "unexpected end of expression")
        if t.kind == "number":
            self.next()
            e: Exp = EConst(ws=t.ws, pos=(t.line, t.col), value=t.value,
                            text=t.text)
        elif t.kind == "string":
            self.next()
            e = EConst(ws=t.ws, pos=(t.line, t.col), value=t.value, text=t.text)
        elif t.kind == "bool":
            self.next()
            e = EConst(ws=t.ws, pos=(t.line, t.col), value=t.value, text=t.text)
        elif t.kind == "op":
            self.next()
            e = EConst(ws=t.ws, pos=(t.line, t.col), value=t.value, text=t.text)
        elif t.kind == "emptydict":
            self.next()
            e = EConst(ws=t.ws, pos=(t.line, t.col), value=EMPTY_DICT,
                       text=t.text)
        elif t.kind in ("ident", "qident"):
            self.next()
            e = EVar(ws=t.ws, pos=(t.line, t.col), name=t.value)
        elif t.kind == "freeze":
            self.next()
            arg = self.atom()
            e = EFreeze(ws=t.ws, pos=(t.line, t.col), arg=arg)
        elif t.kind == "applylens":
            self.next()
            lens = self.atom()
            arg = self.atom()
            e = EApplyLens(ws=t.ws, pos=(t.line, t.col), lens=lens, arg=arg)
        elif t.kind == "sym:(":
            self.next()
            inner = self.expr()
            close = self.expect("sym:)", "')'")
            e = EParen(ws=t.ws, pos=(t.line, t.col), inner=inner,
                       ws_close=close.ws)
        elif t.kind == "sym:[":
            e = self.list_literal(t)
        elif t.kind == "sym:{":
            e = self.record_literal(t)
        else:
            raise ParseError(t.line, t.col,
                             f"unexpected {t.text or 'end of input'!r}",
                             "an expression")
        return self.postfix(e)

    def postfix(self, e: Exp) -> Exp:
        while True:
            t = self.peek()
            if t.kind == "sym:." and t.ws == "":
                nxt = self.toks[self.i + 1]
                if nxt.kind == "ident" and nxt.ws == "":
                    self.next()
                    self.next()
                    e = EProj(ws="", pos=e.pos, base=e, name=nxt.value)
                    continue
            return e

    def list_literal(self, opener: Token) -> Exp:
        self.next()
        items = []
        seps = []
        if self.peek().kind == "sym:]":
            close = self.next()
            return EList(ws=opener.ws, pos=(opener.line, opener.col),
                         ws_close=close.ws)
        while True:
            items.append(self.expr())
            t = self.peek()
            if t.kind == "sym:,":
                self.next()
                seps.append(t.ws)
                continue
            close = self.expect("sym:]", "']' or ','")
            return EList(ws=opener.ws, pos=(opener.line, opener.col),
                         items=tuple(items), seps=tuple(seps),
                         ws_close=close.ws)

    def record_literal(self, opener: Token) -> Exp:
        self.next()
        if self.peek().kind == "sym:}":
            close = self.next()
            return ERecord(ws=opener.ws, pos=(opener.line, opener.col),
                           ws_close=close.ws)
        t = self.peek()
        nxt = self.toks[self.i + 1]
        if t.kind == "ident" and nxt.kind == "sym:=":
            fields = []
            seps = []
            while True:
                name_t = self.expect("ident", "field name")
                eq = self.expect("sym:=", "'='")
                value = self.expr()
                fields.append(RecField(name_t.ws, name_t.value, eq.ws, value))
                t2 = self.peek()
                if t2.kind == "sym:,":
                    self.next()
                    seps.append(t2.ws)
                    continue
                close = self.expect("sym:}", "'}' or ','")
                names = [f.name for f in fields]
                if len(set(names)) != len(names):
                    raise ParseError(opener.line, opener.col,
                                     "duplicate record field names")
                return ERecord(ws=opener.ws, pos=(opener.line, opener.col),
                               fields=tuple(fields), seps=tuple(seps),
                               ws_close=close.ws)
        base = self.expr()
        bar = self.expect("sym:|", "'|' or a field binding")
        name_t = self.expect("ident", "field name")
        eq = self.expect("sym:=", "'='")
        value = self.expr()
        close = self.expect("sym:}", "'}'")
        return ERecordExtend(ws=opener.ws, pos=(opener.line, opener.col),
                             base=base, ws_bar=bar.ws, ws_name=name_t.ws,
                             name=name_t.value, ws_eq=eq.ws, value=value,
                             ws_close=close.ws)

    # -- patterns ------------------------------------------------------------

    def pat_start(self) -> bool:
        t = self.peek()
        if self.broke(t):
            return False
        return t.kind in {"ident", "qident", "number", "string", "bool",
                          "sym:[", "sym:{"} or t.text == "_"

    def pattern(self) -> Pat:
        p = self.pattern_atom()
        t = self.peek()
        if t.kind == "sym:::" and not self.broke(t):
            self.next()
            tail = self.pattern()
            pc = PCons(ws="", pos=p.pos, head=p, ws_op=t.ws, tail=tail)
            self._check_linear(pc)
            return pc
        return p

    def pattern_atom(self) -> Pat:
        t = self.peek()
        if t.kind == "sym:(":
            raise ParseError(t.line, t.col,
                             "tuple and parenthesized patterns are not "
                             "supported; use a two-element list instead")
        if t.kind in ("ident", "qident"):
            self.next()
            if t.value == "_":
                return PWild(ws=t.ws, pos=(t.line, t.col))
            return PVar(ws=t.ws, pos=(t.line, t.col), name=t.value)
        if t.kind == "number" or t.kind == "string" or t.kind == "bool":
            self.next()
            return PConst(ws=t.ws, pos=(t.line, t.col), value=t.value,
                          text=t.text)
        if t.kind == "sym:[":
            self.next()
            items = []
            seps = []
            if self.peek().kind == "sym:]":
                close = self.next()
                return PList(ws=t.ws, pos=(t.line, t.col), ws_close=close.ws)
            while True:
                items.append(self.pattern())
                t2 = self.peek()
                if t2.kind == "sym:,":
                    self.next()
                    seps.append(t2.ws)
                    continue
                close = self.expect("sym:]", "']' or ','")
                pl = PList(ws=t.ws, pos=(t.line, t.col), items=tuple(items),
                           seps=tuple(seps), ws_close=close.ws)
                self._check_linear(pl)
                return pl
        if t.kind == "sym:{":
            self.next()
            fields = []
            seps = []
            if self.peek().kind == "sym:}":
                close = self.next()
                return PRecord(ws=t.ws, pos=(t.line, t.col), ws_close=close.ws)
            while True:
                name_t = self.expect("ident", "field name")
                if self.peek().kind == "sym:=":
                    eq = self.next()
                    sub = self.pattern()
                    fields.append(PRecField(name_t.ws, name_t.value, eq.ws, sub))
                else:
                    fields.append(PRecField(name_t.ws, name_t.value, None, None))
                t2 = self.peek()
                if t2.kind == "sym:,":
                    self.next()
                    seps.append(t2.ws)
                    continue
                close = self.expect("sym:}", "'}' or ','")
                pr = PRecord(ws=t.ws, pos=(t.line, t.col), fields=tuple(fields),
                             seps=tuple(seps), ws_close=close.ws)
                self._check_linear(pr)
                return pr
        raise ParseError(t.line, t.col,
                         f"unexpected {t.text or 'end of input'!r}", "a pattern")

    def _check_linear(self, p: Pat):
        from .core import pat_vars
        names = pat_vars(p)
        if len(set(names)) != len(names):
            raise ParseError(p.pos[0] if p.pos else 1,
                             p.pos[1] if p.pos else 1,
                             "duplicate variable in pattern")


def parse(src: str) -> Exp:
    """Parse a single expression."""
    e, _trailing = parse_with_trailing(src)
    return e


def parse_with_trailing(src: str):
    toks = tokenize(src)
    if toks[0].kind == "eof":
        raise ParseError(1, 1, "empty input")
    p = Parser(toks)
    e = p.expr()
    t = p.peek()
    if t.kind != "eof":
        raise ParseError(t.line, t.col, f"unexpected {t.text!r} after expression")
    return e, t.ws


def _parse_defs(src: str):
    toks = tokenize(src)
    if toks[0].kind == "eof":
        raise ParseError(1, 1, "empty input")
    p = Parser(toks)
    defs = []
    while p.peek().kind != "eof":
        t = p.peek()
        if not t.line_lead and defs:
            raise ParseError(t.line, t.col, "definitions must start at column 1")
        rec = False
        lead_ws = t.ws
        kw_pos = (t.line, t.col)
        if t.kind == "kw:letrec":
            p.next()
            rec = True
            name_t = p.peek()
            if name_t.kind not in ("ident", "qident"):
                raise ParseError(name_t.line, name_t.col,
                                 "definition name expected")
            p.next()
        elif t.kind in ("ident", "qident"):
            p.next()
            name_t = t
            lead_ws = ""
        else:
            raise ParseError(t.line, t.col,
                             f"unexpected {t.text or 'end of input'!r}",
                             "a top-level definition")
        pat = PVar(ws=(t.ws if not rec else name_t.ws), pos=kw_pos,
                   name=name_t.value)
        p.layout.append(1)
        try:
            params = []
            while p.pat_start():
                params.append(p.pattern())
            eq = p.expect("sym:=", "'='")
            rhs = p.expr()
        finally:
            p.layout.pop()
        for q in reversed(params):
            rhs = EFun(pat=q, ws_arrow="", body=rhs, sugar=True)
        defs.append((lead_ws if rec else "", rec, pat, eq.ws, rhs, kw_pos))
    names = [d[2].name for d in defs]
    if len(set(names)) != len(names):
        dup = next(n for n in names if names.count(n) > 1)
        raise ParseError(1, 1, f"duplicate definition of {dup!r}")
    return defs, toks[-1].ws


def parse_definitions(src: str) -> list:
    """Parse a definitions-only file: [(rec, name, rhs)] in source order."""
    defs, _trailing = _parse_defs(src)
    return [(rec, pat.name, rhs) for _ws, rec, pat, _eq, rhs, _pos in defs]


def parse_program(src: str) -> Exp:
    """Parse a source file of top-level definitions into a nested-let chain.

    Definitions see earlier definitions; exactly one `main` is required and
    the chain ends in a phantom reference to it carrying trailing trivia.
    """
    defs, trailing = _parse_defs(src)
    names = [d[2].name for d in defs]
    if "main" not in names:
        raise ParseError(1, 1, "missing `main` definition")
    body: Exp = EVar(ws=trailing, name="main", phantom=True)
    for lead_ws, rec, pat, ws_eq, rhs, pos in reversed(defs):
        body = ELet(ws=lead_ws, pos=pos, rec=rec, pat=pat, ws_eq=ws_eq,
                    bound=rhs, ws_in="", body=body, toplevel=True)
    return body


# ---------------------------------------------------------------------------
# Unparsing (iterative; emits stored trivia verbatim)


def unparse(e: Exp) -> str:
    parts: list = []
    stack: list = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, str):
            parts.append(node)
            continue
        if isinstance(node, EConst):
            parts.append(node.ws)
            parts.append(node.text if node.text is not None
                         else render_const(node.value))
        elif isinstance(node, EVar):
            parts.append(node.ws)
            if not node.phantom:
                parts.append(node.name)
        elif isinstance(node, EFun):
            if node.sugar:
                # printed by the parent (lambda chain or let sugar)
                stack.append(node.body)
                stack.append(node.pat)
                continue
            parts.append(node.ws)
            parts.append("\\")
            pats, inner = _sugar_chain(node)
            stack.append(inner)
            stack.append(node.ws_arrow + "->")
            for q in reversed(pats):
                stack.append(q)
        elif isinstance(node, EApp):
            if node.infix and isinstance(node.fn, EApp) and node.fn.infix \
                    and isinstance(node.fn.fn, EConst):
                opc = node.fn.fn
                optext = opc.text if opc.text is not None else \
                    render_const(opc.value)
                stack.append(node.arg)
                stack.append(opc.ws + optext)
                stack.append(node.fn.arg)
            else:
                stack.append(node.arg)
                stack.append(node.fn)
        elif isinstance(node, ECons):
            stack.append(node.tail)
            stack.append(node.ws_op + "::")
            stack.append(node.head)
        elif isinstance(node, EList):
            parts.append(node.ws)
            parts.append("[")
            stack.append(node.ws_close + "]")
            rev = []
            for i, item in enumerate(node.items):
                if i:
                    rev.append(node.seps[i - 1] + ",")
                rev.append(item)
            for piece in reversed(rev):
                stack.append(piece)
        elif isinstance(node, ERecord):
            parts.append(node.ws)
            parts.append("{")
            stack.append(node.ws_close + "}")
            rev = []
            for i, f in enumerate(node.fields):
                if i:
                    rev.append(node.seps[i - 1] + ",")
                rev.append(f.ws_name + f.name + f.ws_eq + "=")
                rev.append(f.value)
            for piece in reversed(rev):
                stack.append(piece)
        elif isinstance(node, ERecordExtend):
            parts.append(node.ws)
            parts.append("{")
            stack.append(node.ws_close + "}")
            stack.append(node.value)
            stack.append(node.ws_bar + "|" + node.ws_name + node.name +
                         node.ws_eq + "=")
            stack.append(node.base)
        elif isinstance(node, EProj):
            stack.append("." + node.name)
            stack.append(node.base)
        elif isinstance(node, ELet):
            pats, inner = _sugar_chain_let(node)
            if node.toplevel:
                parts.append(node.ws)
                if node.rec:
                    parts.append("letrec")
                stack.append(node.body)
                stack.append(inner)
                stack.append(node.ws_eq + "=")
                for q in reversed(pats):
                    stack.append(q)
                stack.append(node.pat)
            else:
                parts.append(node.ws)
                parts.append("letrec" if node.rec else "let")
                stack.append(node.body)
                stack.append(node.ws_in + "in")
                stack.append(inner)
                stack.append(node.ws_eq + "=")
                for q in reversed(pats):
                    stack.append(q)
                stack.append(node.pat)
        elif isinstance(node, EIf):
            parts.append(node.ws)
            parts.append("if")
            stack.append(node.els)
            stack.append(node.ws_else + "else")
            stack.append(node.then)
            stack.append(node.ws_then + "then")
            stack.append(node.guard)
        elif isinstance(node, ECase):
            parts.append(node.ws)
            parts.append("case")
            rev = [node.scrutinee, node.ws_of + "of"]
            for i, br in enumerate(node.branches):
                if i:
                    sep = node.seps[i - 1]
                    if sep is not None:
                        rev.append(sep + ";")
                rev.append(br.pat)
                rev.append(br.ws_arrow + "->")
                rev.append(br.body)
            for piece in reversed(rev):
                stack.append(piece)
        elif isinstance(node, EFreeze):
            parts.append(node.ws)
            parts.append("Update.freeze")
            stack.append(node.arg)
        elif isinstance(node, EApplyLens):
            parts.append(node.ws)
            parts.append("Update.applyLens")
            stack.append(node.arg)
            stack.append(node.lens)
        elif isinstance(node, EParen):
            parts.append(node.ws)
            parts.append("(")
            stack.append(node.ws_close + ")")
            stack.append(node.inner)
        elif isinstance(node, Pat):
            _unparse_pat(node, parts)
        else:
            raise TypeError(f"cannot unparse {type(node).__name__}")
    return "".join(parts)


def _sugar_chain(fun: EFun):
    pats = [fun.pat]
    inner = fun.body
    while isinstance(inner, EFun) and inner.sugar:
        pats.append(inner.pat)
        inner = inner.body
    return pats, inner


def _sugar_chain_let(let: ELet):
    pats = []
    inner = let.bound
    while isinstance(inner, EFun) and inner.sugar:
        pats.append(inner.pat)
        inner = inner.body
    return pats, inner


def _unparse_pat(p: Pat, parts: list):
    if isinstance(p, PVar):
        parts.append(p.ws + p.name)
    elif isinstance(p, PWild):
        parts.append(p.ws + "_")
    elif isinstance(p, PConst):
        parts.append(p.ws + (p.text if p.text is not None
                             else render_const(p.value)))
    elif isinstance(p, PCons):
        _unparse_pat(p.head, parts)
        parts.append(p.ws_op + "::")
        _unparse_pat(p.tail, parts)
    elif isinstance(p, PList):
        parts.append(p.ws + "[")
        for i, item in enumerate(p.items):
            if i:
                parts.append(p.seps[i - 1] + ",")
            _unparse_pat(item, parts)
        parts.append(p.ws_close + "]")
    elif isinstance(p, PRecord):
        parts.append(p.ws + "{")
        for i, f in enumerate(p.fields):
            if i:
                parts.append(p.seps[i - 1] + ",")
            parts.append(f.ws_name + f.name)
            if f.pat is not None:
                parts.append(f.ws_eq + "=")
                _unparse_pat(f.pat, parts)
        parts.append(p.ws_close + "}")
    else:
        raise TypeError(f"cannot unparse pattern {type(p).__name__}")


def render_const(c) -> str:
    if isinstance(c, bool):
        return "True" if c else "False"
    if isinstance(c, float):
        return render_number(c)
    if isinstance(c, str):
        return render_string(c)
    if isinstance(c, Op):
        return c.value
    return "Dict.empty"


def render_string(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


# ---------------------------------------------------------------------------
# Value literals


def print_value(v: Val) -> str:
    """Value-literal text; closure-free values re-parse to equal values."""
    parts: list = []
    _pv(v, parts)
    return "".join(parts)


def _pv(v: Val, parts: list):
    if isinstance(v, VConst):
        parts.append(render_const(v.value))
    elif isinstance(v, VList):
        parts.append("[")
        for i, item in enumerate(v.items):
            if i:
                parts.append(", ")
            _pv(item, parts)
        parts.append("]")
    elif isinstance(v, VRecord):
        parts.append("{")
        for i, (name, fv) in enumerate(v.fields.items()):
            if i:
                parts.append(", ")
            parts.append(f"{name} = ")
            _pv(fv, parts)
        parts.append("}")
    elif isinstance(v, VDict):
        if not v.entries:
            parts.append("Dict.empty")
            return
        parts.append("Dict.fromList [")
        for i, k in enumerate(sorted(v.entries)):
            if i:
                parts.append(", ")
            kv, val = v.entries[k]
            parts.append("[")
            _pv(kv, parts)
            parts.append(", ")
            _pv(val, parts)
            parts.append("]")
        parts.append("]")
    elif isinstance(v, VClosure):
        parts.append("<closure>")
    elif isinstance(v, VPartial):
        parts.append("<partial>")
    else:
        raise TypeError(f"cannot print {type(v).__name__}")


def parse_value(src: str) -> Val:
    """Parse a value literal (`.leov` syntax)."""
    toks = tokenize(src)
    if toks[0].kind == "eof":
        raise ParseError(1, 1, "empty value literal")
    p = _ValueParser(toks)
    v = p.value()
    t = p.toks[p.i]
    if t.kind != "eof":
        raise ParseError(t.line, t.col, f"unexpected {t.text!r} after value")
    return v


class _ValueParser:
    def __init__(self, toks):
        self.toks = toks
        self.i = 0

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def value(self) -> Val:
        t = self.next()
        if t.kind in ("number", "string", "bool"):
            return VConst(t.value)
        if t.kind == "op" and t.value is Op.DICT_FROMLIST \
                and self.toks[self.i].kind == "sym:[":
            # printed dict form
            pairs = self.value()
            if not isinstance(pairs, VList):
                raise ParseError(t.line, t.col, "Dict.fromList needs a list")
            entries = {}
            for pair in pairs.items:
                if not (isinstance(pair, VList) and len(pair.items) == 2):
                    raise ParseError(t.line, t.col,
                                     "Dict.fromList needs [key, value] pairs")
                k, val = pair.items
                entries[struct_key(k)] = (k, val)
            return VDict(entries)
        if t.kind == "op":
            return VConst(t.value)
        if t.kind == "emptydict":
            return VDict({})
        if t.kind == "sym:[":
            items = []
            if self.toks[self.i].kind == "sym:]":
                self.next()
                return VList(())
            while True:
                items.append(self.value())
                t2 = self.next()
                if t2.kind == "sym:,":
                    continue
                if t2.kind == "sym:]":
                    return VList(tuple(items))
                raise ParseError(t2.line, t2.col,
                                 f"unexpected {t2.text!r}", "']' or ','")
        if t.kind == "sym:{":
            fields = {}
            if self.toks[self.i].kind == "sym:}":
                self.next()
                return VRecord({})
            while True:
                name_t = self.next()
                if name_t.kind != "ident":
                    raise ParseError(name_t.line, name_t.col,
                                     f"unexpected {name_t.text!r}", "field name")
                eq = self.next()
                if eq.kind != "sym:=":
                    raise ParseError(eq.line, eq.col,
                                     f"unexpected {eq.text!r}", "'='")
                fields[name_t.value] = self.value()
                t2 = self.next()
                if t2.kind == "sym:,":
                    continue
                if t2.kind == "sym:}":
                    return VRecord(fields)
                raise ParseError(t2.line, t2.col,
                                 f"unexpected {t2.text!r}", "'}' or ','")
        raise ParseError(t.line, t.col,
                         f"unexpected {t.text or 'end of input'!r}", "a value")


# ---------------------------------------------------------------------------
# Line-oriented text-diff summaries


def summarize_text_diff(old: str, new: str) -> str:
    """Bracketed per-line change summary, e.g. `L2 Removed [?]`."""
    import difflib

    old_lines = old.split("\n")
    new_lines = new.split("\n")
    sm = difflib.SequenceMatcher(None, old_lines, new_lines, autojunk=False)
    chunks = []
    for tag, i1, i2, j1, j2 in sm.get_opcodes():
        if tag == "equal":
            continue
        if tag == "replace":
            for k in range(max(i2 - i1, j2 - j1)):
                oi = i1 + k
                nj = j1 + k
                if oi < i2 and nj < j2:
                    chunks.append(_line_change(oi + 1, old_lines[oi],
                                               new_lines[nj]))
                elif oi < i2:
                    chunks.append(f"L{oi + 1} Removed line [{old_lines[oi]}]")
                else:
                    chunks.append(f"L{nj + 1} Added line [{new_lines[nj]}]")
        elif tag == "delete":
            for oi in range(i1, i2):
                chunks.append(f"L{oi + 1} Removed line [{old_lines[oi]}]")
        elif tag == "insert":
            for nj in range(j1, j2):
                chunks.append(f"L{nj + 1} Added line [{new_lines[nj]}]")
    return " ".join(chunks)


def _line_change(lineno: int, old: str, new: str) -> str:
    p = 0
    limit = min(len(old), len(new))
    while p < limit and old[p] == new[p]:
        p += 1
    q = 0
    while q < limit - p and old[len(old) - 1 - q] == new[len(new) - 1 - q]:
        q += 1
    removed = old[p:len(old) - q]
    added = new[p:len(new) - q]
    if not added:
        return f"L{lineno} Removed [{removed}]"
    if not removed:
        return f"L{lineno} Inserted [{added}]"
    return f"L{lineno} Replaced [{removed}] by [{added}]"
