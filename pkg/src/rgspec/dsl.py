"""Concrete syntax for commands, predicates and termination conditions.

Commands, loosest first::

    c | c        choice
    c /\\ c       weak conjunction
    c ; c        sequence
    c^w          iteration (zero or more, possibly infinitely)

All three binary operators associate to the right.  Atoms are
``rely(r)``, ``guar(r)``, ``pre(p)``, ``spec x, y : [r]``, ``with x { c }``,
``with x await p { c }``, ``terminate t``, ``encode(t)``, ``term``,
``envstep(r)``, a call ``name(args)`` of a module definition, and ``(c)``.

Expressions, loosest first: ``=>`` (right), ``or``, ``and``, ``not``, the
comparisons ``= != < <= prefixof suffixof``, ``++``, prefix ``#``.  Terms are
variables (``x``, primed ``x'``), integers, ``null``, ``true``/``false``,
sequence literals ``[a, b]`` and ``id(x, y)``.

Termination conditions: ``or``, ``and``, ``not``, ``<>``, ``[]``; a state
atom is a predicate in parentheses, ``{ t }`` groups, ``[]e(r)`` and
``<>e(r)`` constrain environment steps, and ``all_env(r)``/``some_pgm(r)``
and friends are bare step atoms.

A module file holds ``var``, ``const``, ``resource`` and ``def`` items; see
``parse_module``.  ``//`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources as _res

from . import kernel as K


class DslError(Exception):
    """Syntax error, reported with a 1-based line and column."""

    def __init__(self, msg, line=0, col=0):
        self.line, self.col = line, col
        where = f"line {line}, column {col}: " if line else ""
        super().__init__(where + msg)


class UnknownVariable(DslError):
    def __init__(self, name, line=0, col=0):
        self.name = name
        super().__init__(f"unknown variable {name!r}", line, col)


# ---------------------------------------------------------------------------
# Lexer

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<int>-?\d+)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>/\\|\^w|\+\+|=>|!=|<=|<>|[=<#'\[\](){},:;|])
""", re.VERBOSE)

KEYWORDS = {
    "and", "or", "not", "true", "false", "null", "id", "prefixof", "suffixof",
    "rely", "guar", "pre", "spec", "with", "await", "terminate", "encode", "term",
    "envstep", "var", "const", "resource", "def", "seq", "scalar", "values", "cap",
    "invariant", "initially",
}

_STEP_NAMES = {f"{m}_{k}": (k, m) for m in ("all", "some") for k in K.STEP_KINDS}


@dataclass(frozen=True)
class Tok:
    kind: str  # "int" | "name" | "op" | "eof"
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    out = []
    pos, line, start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise DslError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind != "ws":
            out.append(Tok(kind, m.group(), line, pos - start + 1))
        for i, ch in enumerate(m.group()):
            if ch == "\n":
                line, start = line + 1, pos + i + 1
        pos = m.end()
    out.append(Tok("eof", "", line, pos - start + 1))
    return out


# ---------------------------------------------------------------------------
# Parser


@dataclass
class Definition:
    name: str
    params: tuple
    body: object


@dataclass
class Module:
    decls: tuple = ()
    consts: dict = field(default_factory=dict)
    resources: dict = field(default_factory=dict)
    defs: dict = field(default_factory=dict)

    def get(self, name):
        """Body of a definition, parameters left as ``Param`` nodes."""
        if name not in self.defs:
            raise KeyError(f"no definition {name!r}")
        return self.defs[name].body

    def instantiate(self, name, *args):
        d = self.defs[name]
        if len(args) != len(d.params):
            raise TypeError(f"{name} takes {len(d.params)} argument(s), got {len(args)}")
        return K.substitute(d.body, dict(zip(d.params, args)))


class _Parser:
    def __init__(self, text, variables=None, params=(), consts=None, defs=None):
        self.toks = tokenize(text)
        self.i = 0
        self.variables = None if variables is None else set(variables)
        self.params = set(params)
        self.consts = dict(consts or {})
        self.defs = defs if defs is not None else {}

    # token helpers

    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k=1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text, kind=None) -> bool:
        t = self.tok
        return t.text == text and t.kind != "eof" and (kind is None or t.kind == kind)

    def error(self, msg, tok=None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        return DslError(f"{msg}, found {found}", tok.line, tok.col)

    def expect(self, text):
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        self.i += 1

    def accept(self, text) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def name(self, what="name") -> Tok:
        t = self.tok
        if t.kind != "name" or t.text in KEYWORDS:
            raise self.error(f"expected {what}")
        self.i += 1
        return t

    def var_name(self) -> str:
        t = self.name("variable")
        self.check_var(t)
        return t.text

    def check_var(self, t):
        if self.variables is not None and t.text not in self.variables:
            raise UnknownVariable(t.text, t.line, t.col)

    def end(self):
        if self.tok.kind != "eof":
            raise self.error("expected end of input")

    # expressions

    def expr(self):
        left = self.disj()
        if self.accept("=>"):
            return K.Implies(left, self.expr())
        return left

    def disj(self):
        out = self.conj()
        while self.accept("or"):
            out = K.Or(out, self.conj())
        return out

    def conj(self):
        out = self.neg()
        while self.accept("and"):
            out = K.And(out, self.neg())
        return out

    def neg(self):
        if self.accept("not"):
            return K.Not(self.neg())
        return self.cmp()

    def cmp(self):
        left = self.cat()
        if self.tok.text in K.CMP_OPS and self.tok.kind in ("op", "name"):
            op = self.tok.text
            self.i += 1
            return K.Cmp(op, left, self.cat())
        return left

    def cat(self):
        out = self.unary()
        while self.accept("++"):
            out = K.Cat(out, self.unary())
        return out

    def unary(self):
        if self.accept("#"):
            return K.Len(self.unary())
        return self.atom()

    def atom(self):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return K.Lit(int(t.text))
        if self.accept("null"):
            return K.Lit(None)
        if self.accept("true"):
            return K.TRUE
        if self.accept("false"):
            return K.FALSE
        if self.accept("("):
            out = self.expr()
            self.expect(")")
            return out
        if self.accept("["):
            items = []
            if not self.at("]"):
                items.append(self.expr())
                while self.accept(","):
                    items.append(self.expr())
            self.expect("]")
            return K.SeqLit(tuple(items))
        if self.accept("id"):
            self.expect("(")
            names = [self.var_name()]
            while self.accept(","):
                names.append(self.var_name())
            self.expect(")")
            return K.Id(frozenset(names))
        if t.kind == "name" and t.text not in KEYWORDS:
            self.i += 1
            primed = self.accept("'")
            if t.text in self.params:
                if primed:
                    raise DslError(f"parameter {t.text!r} cannot be primed", t.line, t.col)
                return K.Param(t.text)
            if t.text in self.consts:
                if primed:
                    raise DslError(f"constant {t.text!r} cannot be primed", t.line, t.col)
                return K.lift(self.consts[t.text])
            self.check_var(t)
            return K.Var(t.text, primed)
        raise self.error("expected an expression")

    # termination conditions

    def tformula(self):
        left = self.tand()
        if self.accept("or"):
            return K.TOr(left, self.tformula())
        return left

    def tand(self):
        left = self.tunary()
        if self.accept("and"):
            return K.TAnd(left, self.tand())
        return left

    def _env_sugar(self) -> bool:
        return self.tok.text == "e" and self.tok.kind == "name" and self.peek().text == "("

    def tunary(self):
        if self.accept("not"):
            return K.TNot(self.tunary())
        if self.accept("<>"):
            if self._env_sugar():
                self.i += 1
                return K.Eventually(K.StepAtom("env", self.paren_expr(), "some"))
            return K.Eventually(self.tunary())
        if self.at("[") and self.peek().text == "]":
            self.i += 2
            if self._env_sugar():
                self.i += 1
                return K.Always(K.StepAtom("env", self.paren_expr(), "all"))
            return K.Always(self.tunary())
        if self.accept("{"):
            out = self.tformula()
            self.expect("}")
            return out
        if self.tok.kind == "name" and self.tok.text in _STEP_NAMES:
            kind, mode = _STEP_NAMES[self.tok.text]
            self.i += 1
            return K.StepAtom(kind, self.paren_expr(), mode)
        if self.at("("):
            return K.StateAtom(self.paren_expr())
        raise self.error("expected a termination condition")

    def paren_expr(self):
        self.expect("(")
        out = self.expr()
        self.expect(")")
        return out

    # commands

    def command(self):
        left = self.conj_cmd()
        if self.accept("|"):
            return K.Choice(left, self.command())
        return left

    def conj_cmd(self):
        left = self.seq_cmd()
        if self.accept("/\\"):
            return K.Conj(left, self.conj_cmd())
        return left

    def seq_cmd(self):
        left = self.postfix()
        if self.accept(";"):
            return K.Seq(left, self.seq_cmd())
        return left

    def postfix(self):
        out = self.cmd_atom()
        while self.accept("^w"):
            out = K.Iter(out)
        return out

    def cmd_atom(self):
        t = self.tok
        if self.accept("("):
            out = self.command()
            self.expect(")")
            return out
        if self.accept("rely"):
            return K.Rely(self.paren_expr())
        if self.accept("guar"):
            return K.Guar(self.paren_expr())
        if self.accept("pre"):
            return K.Pre(self.paren_expr())
        if self.accept("envstep"):
            return K.EnvAtomic(self.paren_expr())
        if self.accept("term"):
            return K.TERM
        if self.accept("terminate"):
            return K.Terminate(self.tformula())
        if self.accept("encode"):
            self.expect("(")
            out = self.tformula()
            self.expect(")")
            return K.Encode(out)
        if self.accept("spec"):
            frame = []
            if not self.at(":"):
                frame.append(self.var_name())
                while self.accept(","):
                    frame.append(self.var_name())
            self.expect(":")
            self.expect("[")
            post = self.expr()
            self.expect("]")
            return K.Spec(frozenset(frame), post)
        if self.accept("with"):
            var = self.var_name()
            guard = None
            if self.accept("await"):
                guard = self.expr()
            self.expect("{")
            body = self.command()
            self.expect("}")
            return K.With(var, body) if guard is None else K.AwaitWith(var, guard, body)
        if t.kind == "name" and t.text not in KEYWORDS:
            return self.call()
        raise self.error("expected a command")

    def call(self):
        t = self.name()
        d = self.defs.get(t.text)
        if d is None:
            raise DslError(f"unknown command {t.text!r}", t.line, t.col)
        args = []
        if self.accept("("):
            if not self.at(")"):
                args.append(self.expr())
                while self.accept(","):
                    args.append(self.expr())
            self.expect(")")
        if len(args) != len(d.params):
            raise DslError(f"{t.text} takes {len(d.params)} argument(s), got {len(args)}",
                           t.line, t.col)
        return K.substitute(d.body, dict(zip(d.params, args)))

    # modules

    def module(self) -> Module:
        mod = Module()
        decls = []
        self.variables = set()
        self.defs = mod.defs
        while self.tok.kind != "eof":
            if self.accept("var"):
                decls.append(self.var_decl())
                self.variables.add(decls[-1].name)
            elif self.accept("const"):
                t = self.name("constant name")
                self.expect("=")
                val = self.value()
                # caller-supplied constants win over the file's defaults
                mod.consts[t.text] = self.consts.setdefault(t.text, val)
            elif self.accept("resource"):
                var = self.var_name()
                inv = init = K.TRUE
                if self.accept("invariant"):
                    inv = self.paren_expr()
                if self.accept("initially"):
                    init = self.paren_expr()
                mod.resources[var] = K.ResourceDecl(var, inv, init)
            elif self.accept("def"):
                t = self.name("definition name")
                if t.text in mod.defs:
                    raise DslError(f"duplicate definition {t.text!r}", t.line, t.col)
                params = []
                if self.accept("("):
                    if not self.at(")"):
                        params.append(self.name("parameter").text)
                        while self.accept(","):
                            params.append(self.name("parameter").text)
                    self.expect(")")
                self.expect("=")
                saved, self.params = self.params, set(params)
                body = self.command()
                self.params = saved
                mod.defs[t.text] = Definition(t.text, tuple(params), body)
            else:
                raise self.error("expected 'var', 'const', 'resource' or 'def'")
        mod.decls = tuple(decls)
        return mod

    def value(self):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return int(t.text)
        if self.accept("null"):
            return None
        raise self.error("expected an integer or null")

    def var_decl(self) -> K.VarDecl:
        t = self.name("variable name")
        self.expect(":")
        if self.accept("seq"):
            kind = "seq"
        elif self.accept("scalar"):
            kind = "scalar"
        else:
            raise self.error("expected 'seq' or 'scalar'")
        values, cap = K.DEFAULT_VALUES, K.DEFAULT_CAP
        if self.accept("values"):
            self.expect("{")
            vals = [self.value()]
            while self.accept(","):
                vals.append(self.value())
            self.expect("}")
            values = tuple(vals)
        if kind == "seq" and self.accept("cap"):
            c = self.tok
            if c.kind != "int" or int(c.text) < 0:
                raise self.error("expected a non-negative capacity")
            self.i += 1
            cap = int(c.text)
        return K.VarDecl(t.text, kind, values, cap if kind == "seq" else None)


def parse_command(text, variables=None, params=(), consts=None, defs=None):
    """Parse one command.  With ``variables`` given, any other name is an
    ``UnknownVariable`` error."""
    p = _Parser(text, variables, params, consts, defs)
    out = p.command()
    p.end()
    return out


def parse_expr(text, variables=None, params=(), consts=None):
    p = _Parser(text, variables, params, consts)
    out = p.expr()
    p.end()
    return out


def parse_temporal(text, variables=None, params=(), consts=None):
    p = _Parser(text, variables, params, consts)
    out = p.tformula()
    p.end()
    return out


def parse_module(text, consts=None) -> Module:
    """Parse a module file.

    ::

        var qu : seq values {null, 1, 2} cap 3
        var res : scalar
        const N = 2
        resource qu invariant (#qu <= N) initially (qu = [])
        def write(v) = rely(qu' suffixof qu) /\\ with qu { spec qu : [qu' = qu ++ [v]] }

    ``consts`` overrides the file's constants.  Definitions may call earlier
    ones; variables must be declared before use.
    """
    return _Parser(text, consts=consts).module()


def corpus_names() -> list:
    files = _res.files("rgspec").joinpath("corpus")
    return sorted(p.name[:-3] for p in files.iterdir() if p.name.endswith(".rg"))


def corpus_text(name) -> str:
    return _res.files("rgspec").joinpath("corpus", f"{name}.rg").read_text()


def load_corpus(name, consts=None) -> Module:
    return parse_module(corpus_text(name), consts)


# ---------------------------------------------------------------------------
# Printer

_EXPR_PREC = {K.Implies: 1, K.Or: 2, K.And: 3, K.Not: 4, K.Cmp: 5, K.Cat: 6, K.Len: 7}


def _eprec(e) -> int:
    return _EXPR_PREC.get(type(e), 8)


def format_expr(e) -> str:
    if isinstance(e, K.Var):
        return e.name + ("'" if e.primed else "")
    if isinstance(e, K.Lit):
        return "null" if e.value is None else str(e.value)
    if isinstance(e, K.Param):
        return e.name
    if isinstance(e, K.Bool):
        return "true" if e.value else "false"
    if isinstance(e, K.SeqLit):
        return "[" + ", ".join(format_expr(x) for x in e.items) + "]"
    if isinstance(e, K.Id):
        return "id(" + ", ".join(sorted(e.names)) + ")"
    if isinstance(e, K.Len):
        return "#" + _wrap(e.arg, _eprec(e.arg) < 7)
    if isinstance(e, K.Not):
        return "not " + _wrap(e.arg, _eprec(e.arg) < 4)
    p = _eprec(e)
    if isinstance(e, K.Implies):
        # right associative
        left, right = _wrap(e.left, _eprec(e.left) <= p), _wrap(e.right, _eprec(e.right) < p)
        return f"{left} => {right}"
    if isinstance(e, K.Cmp):
        return f"{_wrap(e.left, _eprec(e.left) <= p)} {e.op} {_wrap(e.right, _eprec(e.right) <= p)}"
    if isinstance(e, (K.Or, K.And, K.Cat)):
        op = {K.Or: "or", K.And: "and", K.Cat: "++"}[type(e)]
        return f"{_wrap(e.left, _eprec(e.left) < p)} {op} {_wrap(e.right, _eprec(e.right) <= p)}"
    raise TypeError(f"not an expression: {e!r}")


def _wrap(e, paren, fmt=format_expr) -> str:
    s = fmt(e)
    return f"({s})" if paren else s


_TF_PREC = {K.TOr: 1, K.TAnd: 2, K.TNot: 3, K.Eventually: 3, K.Always: 3}


def _tprec(tf) -> int:
    return _TF_PREC.get(type(tf), 4)


def _tgroup(tf, paren) -> str:
    s = format_temporal(tf)
    return "{" + s + "}" if paren else s


def format_temporal(tf) -> str:
    if isinstance(tf, K.StateAtom):
        return f"({format_expr(tf.pred)})"
    if isinstance(tf, K.StepAtom):
        return f"{tf.mode}_{tf.kind}({format_expr(tf.rel)})"
    if isinstance(tf, (K.Eventually, K.Always)):
        a = tf.arg
        if isinstance(a, K.StepAtom) and a.kind == "env":
            if isinstance(tf, K.Always) and a.mode == "all":
                return f"[]e({format_expr(a.rel)})"
            if isinstance(tf, K.Eventually) and a.mode == "some":
                return f"<>e({format_expr(a.rel)})"
        inner = _tgroup(a, _tprec(a) < 3)
        sep = " " if inner[0].isalpha() else ""
        return ("<>" if isinstance(tf, K.Eventually) else "[]") + sep + inner
    if isinstance(tf, K.TNot):
        return "not " + _tgroup(tf.arg, _tprec(tf.arg) < 3)
    if isinstance(tf, (K.TAnd, K.TOr)):
        p = _tprec(tf)
        op = "and" if isinstance(tf, K.TAnd) else "or"
        return f"{_tgroup(tf.left, _tprec(tf.left) <= p)} {op} {_tgroup(tf.right, _tprec(tf.right) < p)}"
    raise TypeError(f"not a termination condition: {tf!r}")


_CMD_PREC = {K.Choice: 1, K.Conj: 2, K.Seq: 3, K.Iter: 4}


def _cprec(c) -> int:
    return _CMD_PREC.get(type(c), 5)


def format_command(c) -> str:
    if isinstance(c, K.Rely):
        return f"rely({format_expr(c.rel)})"
    if isinstance(c, K.Guar):
        return f"guar({format_expr(c.rel)})"
    if isinstance(c, K.Pre):
        return f"pre({format_expr(c.pred)})"
    if isinstance(c, K.EnvAtomic):
        return f"envstep({format_expr(c.rel)})"
    if isinstance(c, K.Term):
        return "term"
    if isinstance(c, K.Terminate):
        return f"terminate {format_temporal(c.formula)}"
    if isinstance(c, K.Encode):
        return f"encode({format_temporal(c.formula)})"
    if isinstance(c, K.Spec):
        frame = ", ".join(sorted(c.frame))
        head = f"spec {frame} :" if frame else "spec :"
        return f"{head} [{format_expr(c.post)}]"
    if isinstance(c, K.With):
        return f"with {c.var} {{ {format_command(c.body)} }}"
    if isinstance(c, K.AwaitWith):
        return f"with {c.var} await {format_expr(c.guard)} {{ {format_command(c.body)} }}"
    if isinstance(c, K.Iter):
        return _wrap(c.body, _cprec(c.body) < 5, format_command) + "^w"
    if isinstance(c, (K.Choice, K.Conj, K.Seq)):
        p = _CMD_PREC[type(c)]
        op = {K.Choice: " | ", K.Conj: " /\\ ", K.Seq: " ; "}[type(c)]
        left, right = (c.left, c.right) if not isinstance(c, K.Seq) else (c.first, c.second)
        return (_wrap(left, _cprec(left) <= p, format_command)
                + op + _wrap(right, _cprec(right) < p, format_command))
    raise TypeError(f"not a command: {c!r}")


def format_module(mod: Module) -> str:
    lines = []
    for d in mod.decls:
        vals = ", ".join("null" if v is None else str(v) for v in d.values)
        cap = f" cap {d.cap}" if d.kind == "seq" else ""
        lines.append(f"var {d.name} : {d.kind} values {{{vals}}}{cap}")
    for k, v in mod.consts.items():
        lines.append(f"const {k} = {'null' if v is None else v}")
    for r in mod.resources.values():
        lines.append(f"resource {r.var} invariant ({format_expr(r.invariant)})"
                     f" initially ({format_expr(r.initially)})")
    for d in mod.defs.values():
        params = f"({', '.join(d.params)})" if d.params else ""
        lines.append(f"def {d.name}{params} = {format_command(d.body)}")
    return "\n".join(lines) + "\n"


__all__ = [
    "DslError", "UnknownVariable", "Module", "Definition", "tokenize",
    "parse_command", "parse_expr", "parse_temporal", "parse_module",
    "corpus_names", "corpus_text", "load_corpus",
    "format_expr", "format_temporal", "format_command", "format_module",
]
