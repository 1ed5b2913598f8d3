"""Loading the bundled prelude into a base environment."""

from __future__ import annotations

import importlib.resources
from typing import Optional

from .core import EFun, Env, VClosure, strip_parens
from .interp import Session, evaluate
from .syntax import parse_definitions

_PRELUDE_ENV: Optional[Env] = None
_PRELUDE_LEN: Optional[int] = None


def prelude_source() -> str:
    return importlib.resources.files("bideval").joinpath("prelude.leo") \
        .read_text(encoding="utf-8")


def prelude_env() -> Env:
    """The shared base environment; built once, shared immutably."""
    global _PRELUDE_ENV, _PRELUDE_LEN
    if _PRELUDE_ENV is None:
        _PRELUDE_ENV = build_env(prelude_source())
        _PRELUDE_LEN = _PRELUDE_ENV.length
    return _PRELUDE_ENV


def prelude_size() -> int:
    prelude_env()
    return _PRELUDE_LEN


def build_env(src: str, base: Optional[Env] = None) -> Env:
    """Evaluate a definitions file into an environment extension of `base`."""
    env = base
    session = Session()
    for rec, name, rhs in parse_definitions(src):
        inner = strip_parens(rhs)
        if rec and isinstance(inner, EFun):
            val = VClosure(env, inner.pat, inner.body, rec_name=name)
        else:
            val = evaluate(env, rhs, session)
        env = Env(env, name, val)
    return env
