"""Finite state model and the abstract syntax of the command language.

Values are ``None`` (null) or small ints; sequences are tuples of values.
Predicates and relations share one expression language: a predicate is
simply an expression that mentions no primed variable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Optional, Union

NULL = None
DEFAULT_VALUES = (None, 1, 2)
DEFAULT_CAP = 3


class DeclarationError(Exception):
    """A variable or parameter is used without being bound."""


class ConfigError(Exception):
    """A configuration asks for something the checker cannot represent."""


class EvalError(Exception):
    """An expression was applied to values of the wrong kind."""


# ---------------------------------------------------------------------------
# Declarations and states


@dataclass(frozen=True)
class VarDecl:
    name: str
    kind: str = "scalar"  # "scalar" | "seq"
    values: tuple = DEFAULT_VALUES
    cap: Optional[int] = DEFAULT_CAP

    def __post_init__(self):
        if not self.name:
            raise ConfigError("variable name must be nonempty")
        if self.kind not in ("scalar", "seq"):
            raise ConfigError(f"unknown variable kind {self.kind!r}")

    def domain(self) -> list:
        if self.kind == "scalar":
            return list(self.values)
        if self.cap is None:
            raise ConfigError(f"sequence variable {self.name!r} has no length cap")
        out = []
        for n in range(self.cap + 1):
            out.extend(itertools.product(self.values, repeat=n))
        return out

    def admits(self, value) -> bool:
        if self.kind == "scalar":
            return value in self.values
        return (
            isinstance(value, tuple)
            and (self.cap is None or len(value) <= self.cap)
            and all(v in self.values for v in value)
        )


def seq_var(name, values=DEFAULT_VALUES, cap=DEFAULT_CAP) -> VarDecl:
    return VarDecl(name, "seq", tuple(values), cap)


def scalar_var(name, values=DEFAULT_VALUES) -> VarDecl:
    return VarDecl(name, "scalar", tuple(values), None)


class State:
    """Immutable total binding of variable names to values."""

    __slots__ = ("items", "_map", "_hash")

    def __init__(self, bindings: Union[Mapping, Iterable] = ()):
        if isinstance(bindings, Mapping):
            bindings = bindings.items()
        self.items = tuple(sorted(bindings))
        self._map = dict(self.items)
        self._hash = hash(self.items)

    def __getitem__(self, name):
        try:
            return self._map[name]
        except KeyError:
            raise DeclarationError(f"unbound variable {name!r}") from None

    def __contains__(self, name):
        return name in self._map

    def get(self, name, default=None):
        return self._map.get(name, default)

    @property
    def names(self) -> tuple:
        return tuple(k for k, _ in self.items)

    def replace(self, **changes) -> "State":
        m = dict(self._map)
        m.update(changes)
        return State(m)

    def restrict(self, names) -> "State":
        return State({k: v for k, v in self.items if k in names})

    def as_dict(self) -> dict:
        return dict(self._map)

    def __eq__(self, other):
        return isinstance(other, State) and self.items == other.items

    def __hash__(self):
        return self._hash

    def __lt__(self, other):
        return _state_key(self) < _state_key(other)

    def __repr__(self):
        return f"State({format_state(self)})"


def _value_key(v):
    if v is None:
        return (0, 0)
    if isinstance(v, tuple):
        return (2, len(v), tuple(_value_key(x) for x in v))
    return (1, v)


def _state_key(s: State):
    return tuple((k, _value_key(v)) for k, v in s.items)


def format_value(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, tuple):
        return "[" + ",".join(format_value(x) for x in v) + "]"
    return str(v)


def format_state(s: State) -> str:
    return " ".join(f"{k}={format_value(v)}" for k, v in s.items)


def enumerate_states(decls: Iterable[VarDecl]) -> list:
    """All well-formed states over ``decls`` in a fixed order."""
    decls = list(decls)
    names = [d.name for d in decls]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate variable declaration")
    domains = [d.domain() for d in decls]
    return [State(zip(names, combo)) for combo in itertools.product(*domains)]


# ---------------------------------------------------------------------------
# Expressions: terms and formulas over a (pre, post) pair of states


def node(cls):
    """Frozen dataclass for syntax trees; the structural hash is computed
    once per node, and equality short-cuts on identity and hash."""
    cls = dataclass(frozen=True)(cls)
    field_hash, field_eq = cls.__hash__, cls.__eq__

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = field_hash(self)
            object.__setattr__(self, "_hash", h)
        return h

    def __eq__(self, other):
        if self is other:
            return True
        if other.__class__ is not self.__class__ or hash(self) != hash(other):
            return False
        return field_eq(self, other)

    cls.__hash__, cls.__eq__ = __hash__, __eq__
    return cls


@node
class Var:
    name: str
    primed: bool = False


@node
class Lit:
    value: object


@node
class Param:
    """A named operation argument, replaced by a literal before evaluation."""

    name: str


@node
class SeqLit:
    items: tuple = ()


@node
class Cat:
    left: object
    right: object


@node
class Len:
    arg: object


@node
class Bool:
    value: bool


CMP_OPS = ("=", "!=", "<", "<=", "prefixof", "suffixof")


@node
class Cmp:
    op: str
    left: object
    right: object

    def __post_init__(self):
        if self.op not in CMP_OPS:
            raise ValueError(f"unknown comparison {self.op!r}")


@node
class Id:
    """Every named variable keeps its value across the step."""

    names: frozenset


@node
class Not:
    arg: object


@node
class And:
    left: object
    right: object


@node
class Or:
    left: object
    right: object


@node
class Implies:
    left: object
    right: object


TRUE = Bool(True)
FALSE = Bool(False)


def eval_term(t, pre: State, post: Optional[State] = None):
    if isinstance(t, Var):
        if t.primed:
            if post is None:
                raise DeclarationError(f"primed variable {t.name}' in a state predicate")
            return post[t.name]
        return pre[t.name]
    if isinstance(t, Lit):
        return t.value
    if isinstance(t, SeqLit):
        return tuple(eval_term(x, pre, post) for x in t.items)
    if isinstance(t, Cat):
        a, b = eval_term(t.left, pre, post), eval_term(t.right, pre, post)
        if not (isinstance(a, tuple) and isinstance(b, tuple)):
            raise EvalError("concatenation of non-sequences")
        return a + b
    if isinstance(t, Len):
        a = eval_term(t.arg, pre, post)
        if not isinstance(a, tuple):
            raise EvalError("length of a non-sequence")
        return len(a)
    if isinstance(t, Param):
        raise DeclarationError(f"unbound parameter {t.name!r}")
    raise TypeError(f"not a term: {t!r}")


def _is_prefix(a, b) -> bool:
    return isinstance(a, tuple) and isinstance(b, tuple) and b[: len(a)] == a


def eval_expr(f, pre: State, post: Optional[State] = None) -> bool:
    """Evaluate a predicate (``post`` omitted) or relation on a state pair."""
    if isinstance(f, Bool):
        return f.value
    if isinstance(f, Cmp):
        a, b = eval_term(f.left, pre, post), eval_term(f.right, pre, post)
        op = f.op
        if op == "=":
            return a == b
        if op == "!=":
            return a != b
        if op == "prefixof":
            return _is_prefix(a, b)
        if op == "suffixof":
            return isinstance(a, tuple) and isinstance(b, tuple) and (
                len(a) <= len(b) and b[len(b) - len(a):] == a
            )
        if not (isinstance(a, int) and isinstance(b, int)):
            raise EvalError(f"ordering {op} on non-integers")
        return a < b if op == "<" else a <= b
    if isinstance(f, Id):
        if post is None:
            return True
        return all(pre[n] == post[n] for n in f.names)
    if isinstance(f, Not):
        return not eval_expr(f.arg, pre, post)
    if isinstance(f, And):
        return eval_expr(f.left, pre, post) and eval_expr(f.right, pre, post)
    if isinstance(f, Or):
        return eval_expr(f.left, pre, post) or eval_expr(f.right, pre, post)
    if isinstance(f, Implies):
        return (not eval_expr(f.left, pre, post)) or eval_expr(f.right, pre, post)
    raise TypeError(f"not a formula: {f!r}")


def eval_pred(p, state: State) -> bool:
    return eval_expr(p, state, None)


def eval_rel(r, pre: State, post: State) -> bool:
    return eval_expr(r, pre, post)


def negate(f):
    """Logical negation with the obvious local simplifications."""
    if isinstance(f, Bool):
        return Bool(not f.value)
    if isinstance(f, Not):
        return f.arg
    if isinstance(f, Cmp):
        if f.op == "=":
            return Cmp("!=", f.left, f.right)
        if f.op == "!=":
            return Cmp("=", f.left, f.right)
        if f.op == "<":
            return Cmp("<=", f.right, f.left)
        if f.op == "<=":
            return Cmp("<", f.right, f.left)
    return Not(f)


def conj(*fs):
    fs = [f for f in fs if f != TRUE]
    if not fs:
        return TRUE
    out = fs[0]
    for f in fs[1:]:
        out = And(out, f)
    return out


def expr_vars(f, primed: Optional[bool] = None) -> set:
    """Names of variables referenced by an expression.

    ``primed=True`` keeps only primed occurrences, ``False`` only unprimed.
    """
    out = set()

    def walk(x):
        if isinstance(x, Var):
            if primed is None or x.primed == primed:
                out.add(x.name)
        elif isinstance(x, Id):
            out.update(x.names)
        elif isinstance(x, (Lit, Param, Bool)):
            pass
        elif isinstance(x, SeqLit):
            for y in x.items:
                walk(y)
        elif isinstance(x, Len):
            walk(x.arg)
        elif isinstance(x, Not):
            walk(x.arg)
        elif isinstance(x, (Cat, Cmp, And, Or, Implies)):
            walk(x.left)
            walk(x.right)
        else:
            raise TypeError(f"not an expression: {x!r}")

    walk(f)
    return out


# Named relation/predicate builders used throughout the case studies.

def v(name, primed=False) -> Var:
    return Var(name, primed)


def _term(x):
    return lift(x)


def non_empty(var) -> Cmp:
    return Cmp("!=", Var(var), SeqLit(()))


def is_empty(var) -> Cmp:
    return Cmp("=", Var(var), SeqLit(()))


def len_lt(var, n) -> Cmp:
    return Cmp("<", Len(Var(var)), _term(n))


def len_le(var, n) -> Cmp:
    return Cmp("<=", Len(Var(var)), _term(n))


def eq(var, value) -> Cmp:
    return Cmp("=", Var(var), _term(value))


def neq(var, value) -> Cmp:
    return Cmp("!=", Var(var), _term(value))


def eq_primed(var) -> Cmp:
    """``var' = var``"""
    return Cmp("=", Var(var, True), Var(var))


def neq_primed(var) -> Cmp:
    """``var' != var``"""
    return Cmp("!=", Var(var, True), Var(var))


def prefix_of(var) -> Cmp:
    """``var prefixof var'``"""
    return Cmp("prefixof", Var(var), Var(var, True))


def suffix_of(var) -> Cmp:
    """``var' suffixof var``"""
    return Cmp("suffixof", Var(var, True), Var(var))


def append_lit(var, item) -> Cmp:
    """``var' = var ++ [item]``"""
    return Cmp("=", Var(var, True), Cat(Var(var), SeqLit((_term(item),))))


def push_front(var, item) -> Cmp:
    """``var' = [item] ++ var``"""
    return Cmp("=", Var(var, True), Cat(SeqLit((_term(item),)), Var(var)))


def cons_head(var, head_var) -> Cmp:
    """``var = [head'] ++ var'``"""
    return Cmp("=", Var(var), Cat(SeqLit((Var(head_var, True),)), Var(var, True)))


def ident(*names) -> Id:
    return Id(frozenset(names))


UNIVERSAL = TRUE


# ---------------------------------------------------------------------------
# Temporal formulas


@node
class StateAtom:
    pred: object


STEP_KINDS = ("env", "pgm", "any")


@node
class StepAtom:
    """A constraint on the step leaving the current position.

    ``mode="all"``: if the step has the given kind it satisfies ``rel``
    (vacuously true where there is no step).  ``mode="some"``: the step has
    the given kind and satisfies ``rel`` (false where there is no step).
    The two modes are each other's negation up to negating ``rel``.
    """

    kind: str
    rel: object
    mode: str = "all"

    def __post_init__(self):
        if self.kind not in STEP_KINDS or self.mode not in ("all", "some"):
            raise ValueError(f"bad step atom {self.kind}/{self.mode}")


@node
class TNot:
    arg: object


@node
class TAnd:
    left: object
    right: object


@node
class TOr:
    left: object
    right: object


@node
class Eventually:
    arg: object


@node
class Always:
    arg: object


def eventually(x):
    return Eventually(_tf(x))


def always(x):
    return Always(_tf(x))


def _tf(x):
    if isinstance(x, (StateAtom, StepAtom, TNot, TAnd, TOr, Eventually, Always)):
        return x
    return StateAtom(x)


def always_env(rel):
    """``[]e(rel)``: every environment step from here on satisfies ``rel``."""
    return Always(StepAtom("env", rel, "all"))


def eventually_env(rel):
    """``<>e(rel)``: some later environment step satisfies ``rel``."""
    return Eventually(StepAtom("env", rel, "some"))


# ---------------------------------------------------------------------------
# Commands


@node
class Spec:
    """Specification command ``frame: [post]``; an empty frame leaves every
    variable modifiable."""

    frame: frozenset
    post: object


@node
class Pre:
    pred: object


@node
class Rely:
    rel: object


@node
class Guar:
    rel: object


@node
class Conj:
    left: object
    right: object


@node
class Seq:
    first: object
    second: object


@node
class Choice:
    left: object
    right: object


@node
class Iter:
    body: object


@node
class With:
    var: str
    body: object


@node
class AwaitWith:
    var: str
    guard: object
    body: object


@node
class EnvAtomic:
    rel: object


@node
class Term:
    pass


@node
class Encode:
    formula: object


@node
class Terminate:
    formula: object


TERM = Term()

COMMAND_TYPES = (Spec, Pre, Rely, Guar, Conj, Seq, Choice, Iter, With, AwaitWith,
                 EnvAtomic, Term, Encode, Terminate)


def spec(frame, post) -> Spec:
    if isinstance(frame, str):
        frame = [frame]
    return Spec(frozenset(frame), post)


def conj_all(*cmds):
    """Right-nested weak conjunction ``c1 /\\ (c2 /\\ ...)``."""
    out = cmds[-1]
    for c in reversed(cmds[:-1]):
        out = Conj(c, out)
    return out


def seq_all(*cmds):
    out = cmds[-1]
    for c in reversed(cmds[:-1]):
        out = Seq(c, out)
    return out


def normalize(c):
    """Expand derived forms: ``terminate t`` becomes ``term | encode(not t)``."""
    if isinstance(c, Terminate):
        return Choice(TERM, Encode(TNot(c.formula)))
    if isinstance(c, (Conj, Choice)):
        return type(c)(normalize(c.left), normalize(c.right))
    if isinstance(c, Seq):
        return Seq(normalize(c.first), normalize(c.second))
    if isinstance(c, Iter):
        return Iter(normalize(c.body))
    if isinstance(c, With):
        return With(c.var, normalize(c.body))
    if isinstance(c, AwaitWith):
        return AwaitWith(c.var, c.guard, normalize(c.body))
    return c


def substitute(node, binding: Mapping):
    """Replace every ``Param`` whose name is bound by the corresponding literal."""
    if isinstance(node, Param):
        return lift(binding[node.name]) if node.name in binding else node
    if isinstance(node, (Var, Lit, Bool, Id, Term)) or node is None:
        return node
    if isinstance(node, (str, int, frozenset, bool)):
        return node
    if isinstance(node, tuple):
        return tuple(substitute(x, binding) for x in node)
    kwargs = {}
    for f in node.__dataclass_fields__:
        kwargs[f] = substitute(getattr(node, f), binding)
    return type(node)(**kwargs)


def lift(val):
    """Turn a plain value into a literal term; terms pass through."""
    if isinstance(val, tuple):
        return SeqLit(tuple(lift(x) for x in val))
    if val is None or isinstance(val, int):
        return Lit(val)
    return val


@dataclass(frozen=True)
class ResourceDecl:
    var: str
    invariant: object = TRUE
    initially: object = TRUE

    def preserved(self):
        """Relation: a step from an invariant state keeps the invariant."""
        return Implies(self.invariant, prime(self.invariant))

    def discipline(self, cmd):
        """``cmd`` with every ``with`` body on this resource assuming the
        invariant on entry and re-establishing it on exit."""
        keep = Spec(frozenset(), prime(self.invariant))

        def walk(c):
            if isinstance(c, (With, AwaitWith)) and c.var == self.var:
                body = Seq(Pre(self.invariant), Conj(keep, walk(c.body)))
                if isinstance(c, With):
                    return With(c.var, body)
                return AwaitWith(c.var, c.guard, body)
            if isinstance(c, (Conj, Choice)):
                return type(c)(walk(c.left), walk(c.right))
            if isinstance(c, Seq):
                return Seq(walk(c.first), walk(c.second))
            if isinstance(c, Iter):
                return Iter(walk(c.body))
            if isinstance(c, (With, AwaitWith)):
                return replace(c, body=walk(c.body))
            return c

        return walk(cmd)

    def check(self, decls) -> bool:
        """``initially`` implies ``invariant`` on every enumerated state."""
        return all(
            eval_pred(self.invariant, s)
            for s in enumerate_states(decls)
            if eval_pred(self.initially, s)
        )


def prime(pred):
    """The predicate evaluated on the post-state of a step."""
    if isinstance(pred, Var):
        return Var(pred.name, True)
    if isinstance(pred, (Lit, Bool, Param)):
        return pred
    if isinstance(pred, tuple):
        return tuple(prime(x) for x in pred)
    if isinstance(pred, (str, int, frozenset, bool)) or pred is None:
        return pred
    return type(pred)(**{f: prime(getattr(pred, f)) for f in pred.__dataclass_fields__})


def is_stable(p, r, decls) -> bool:
    states = enumerate_states(decls)
    return all(
        eval_pred(p, b)
        for a in states if eval_pred(p, a)
        for b in states if eval_rel(r, a, b)
    )


def is_reflexive(r, decls) -> bool:
    return all(eval_rel(r, s, s) for s in enumerate_states(decls))


def lint(cmd, resources=(), decls=None, fmt=repr) -> list:
    """Syntactic warnings; never fatal.  ``fmt`` renders expressions."""
    warnings = []
    res = {r.var if isinstance(r, ResourceDecl) else r for r in resources}

    def walk(c, held):
        if isinstance(c, Spec):
            if not held:
                warnings.append(f"specification [{fmt(c.post)}] outside any with-statement")
            for d in res - held:
                if d in c.frame:
                    warnings.append(f"resource {d} modified outside with {d}")
        elif isinstance(c, Guar) and decls is not None:
            if not is_reflexive(c.rel, decls):
                warnings.append(f"guarantee {fmt(c.rel)} is not reflexive")
        elif isinstance(c, (Conj, Choice)):
            walk(c.left, held)
            walk(c.right, held)
        elif isinstance(c, Seq):
            walk(c.first, held)
            walk(c.second, held)
        elif isinstance(c, Iter):
            walk(c.body, held)
        elif isinstance(c, (With, AwaitWith)):
            walk(c.body, held | {c.var})

    walk(cmd, frozenset())
    return warnings
