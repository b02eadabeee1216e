"""Deciding whether a trace is a behaviour of a command.

Each command is compiled into a small nondeterministic machine whose
configurations are hashable tuples.  A machine is run over the steps of a
trace; acceptance of a finite trace means some run can stop at the end,
acceptance of a lasso means some run loops through the lasso visiting an
accepting transition infinitely often (a Buchi condition, decided by
strongly connected components of the run graph).  Reaching an abort marker
means every continuation is allowed from that point on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import networkx as nx

from . import kernel as K
from .temporal import holds_at_end, negation_normal, progress_step, residue_holds
from .traces import ENV, PGM, Step, Trace


class _Abort:
    def __init__(self, name):
        self.name = name

    def __repr__(self):
        return self.name


# Abort before the step being processed (or at the current position when
# returned from ``begin``), and abort at the position after the step.
ABORT_NOW = _Abort("ABORT_NOW")
ABORT_NEXT = _Abort("ABORT_NEXT")
_ABORTS = (ABORT_NOW, ABORT_NEXT)


@dataclass(frozen=True)
class Verdict:
    outcome: str  # "terminated" | "infinite" | "aborted" | "rejected"
    index: Optional[int] = None
    reason: str = ""

    @property
    def accepted(self) -> bool:
        return self.outcome in ("terminated", "infinite")

    @property
    def aborted(self) -> bool:
        return self.outcome == "aborted"

    def __str__(self):
        if self.outcome == "terminated":
            return "acceptedTerminated"
        if self.outcome == "infinite":
            return "acceptedInfinite"
        if self.outcome == "aborted":
            return f"abortedAt({self.index})"
        return f"rejected({self.index}: {self.reason})"


TERMINATED = Verdict("terminated")
INFINITE = Verdict("infinite")


class Universe:
    """The finite state space a check ranges over.

    Used to decide whether a configuration is productive: whether some
    continuation of the trace lets it terminate, abort, or run forever
    accepting.  Runs that cannot do any of these are not behaviours, so an
    abort next to one of them does not count.
    """

    def __init__(self, decls):
        self.decls = tuple(decls)
        self.states = K.enumerate_states(self.decls)
        self._steps = {}
        self._productive = {}
        self._machines = {}  # keeps ids in the cache keys unique
        self._ctx = Context(universe=self, optimistic=True)

    def steps_from(self, state):
        out = self._steps.get(state)
        if out is None:
            out = [Step(k, state, b) for k in (PGM, ENV) for b in self.states]
            self._steps[state] = out
        return out

    def productive(self, m, cfg, state) -> bool:
        key = (id(m), state, cfg)
        hit = self._productive.get(key)
        if hit is None:
            self._explore(m, cfg, state)
            hit = self._productive[key]
        return hit

    def _explore(self, m, cfg, state):
        ctx = self._ctx
        mid = id(m)
        self._machines[mid] = m
        g = nx.DiGraph()
        root = (state, cfg)
        g.add_node(root)
        good, acc_edges = set(), []
        todo = [root]
        while todo:
            node = todo.pop()
            if (mid,) + node in self._productive:
                if self._productive[(mid,) + node]:
                    good.add(node)
                continue
            st0, c = node
            if m.done(c, st0):
                good.add(node)
                continue
            for st in self.steps_from(st0):
                for c2, acc in m.step(c, st, 0, ctx):
                    if c2 in _ABORTS:
                        good.add(node)
                        continue
                    nxt = (st.post, c2)
                    if nxt not in g:
                        g.add_node(nxt)
                        todo.append(nxt)
                    g.add_edge(node, nxt)
                    if acc:
                        acc_edges.append((node, nxt))
        comp = {}
        for i, scc in enumerate(nx.strongly_connected_components(g)):
            for n in scc:
                comp[n] = i
        for u, w in acc_edges:
            if comp[u] == comp[w] and (u != w or g.has_edge(u, u)):
                good.add(u)
        reached = set(good)
        rev = g.reverse(copy=False)
        frontier = list(good)
        while frontier:
            n = frontier.pop()
            for p in rev.successors(n):
                if p not in reached:
                    reached.add(p)
                    frontier.append(p)
        for n in g.nodes:
            self._productive[(mid,) + n] = n in reached


class Context:
    """Per-trace information a machine may consult: ``encode`` reads the
    trace, weak conjunction asks the universe about productivity."""

    def __init__(self, trace: Optional[Trace] = None, universe: Optional[Universe] = None,
                 optimistic: bool = False):
        self.trace = trace
        self.universe = universe
        # productivity search: any satisfiable temporal residue may still be met
        self.optimistic = optimistic
        self._memo = {}

    def productive(self, m, cfg, state) -> bool:
        if self.universe is None:
            return True
        return self.universe.productive(m, cfg, state)

    def residue_holds(self, residue, pos) -> bool:
        if self.optimistic:
            return residue is not False
        if self.trace is None or self.trace.loop is None:
            return False
        key = (residue, pos)
        if key not in self._memo:
            self._memo[key] = residue_holds(residue, self.trace, pos)
        return self._memo[key]


def _productive(ctx, m, cfg, state) -> bool:
    return ctx is None or ctx.productive(m, cfg, state)


def _shift(cfgs):
    return [ABORT_NEXT if c is ABORT_NOW else c for c in cfgs]


def _allowed_outside(st: Step) -> bool:
    """Steps a command may take while not doing anything: env steps and
    program stutters."""
    return st.kind == ENV or st.is_stutter


class Machine:
    """Protocol for compiled commands.

    ``begin(state, pos, ctx)`` -> list of configs (maybe ``ABORT_NOW``);
    ``step(cfg, st, pos, ctx)`` -> list of ``(config, accepting)`` pairs;
    ``done(cfg, state)`` -> whether the command may terminate here.
    """

    pure = True  # independent of the trace context; steps may be cached

    def begin(self, state, pos, ctx):
        raise NotImplementedError

    def step(self, cfg, st, pos, ctx):
        raise NotImplementedError

    def done(self, cfg, state):
        raise NotImplementedError


class SpecM(Machine):
    def __init__(self, frame, post):
        self.frame = frame
        self.post = post
        # the initial state is only needed where the postcondition reads it
        self.reads = frozenset(K.expr_vars(post, primed=False))

    def begin(self, state, pos, ctx):
        return [state.restrict(self.reads)]

    def step(self, cfg, st, pos, ctx):
        if st.kind == PGM and self.frame:
            for name in st.pre.names:
                if name not in self.frame and st.pre[name] != st.post[name]:
                    return []
        return [(cfg, False)]

    def done(self, cfg, state):
        return K.eval_rel(self.post, cfg, state)


class PreM(Machine):
    def __init__(self, pred):
        self.pred = pred

    def begin(self, state, pos, ctx):
        return [()] if K.eval_pred(self.pred, state) else [ABORT_NOW]

    def step(self, cfg, st, pos, ctx):
        return []

    def done(self, cfg, state):
        return True


class RelyM(Machine):
    def __init__(self, rel):
        self.rel = rel

    def begin(self, state, pos, ctx):
        return [()]

    def step(self, cfg, st, pos, ctx):
        if st.kind == ENV and not K.eval_rel(self.rel, st.pre, st.post):
            return [(ABORT_NOW, False)]
        return [((), True)]

    def done(self, cfg, state):
        return True


class GuarM(Machine):
    def __init__(self, rel):
        self.rel = rel

    def begin(self, state, pos, ctx):
        return [()]

    def step(self, cfg, st, pos, ctx):
        if st.kind == PGM and not K.eval_rel(self.rel, st.pre, st.post):
            return []
        return [((), True)]

    def done(self, cfg, state):
        return True


class TermM(Machine):
    def begin(self, state, pos, ctx):
        return [()]

    def step(self, cfg, st, pos, ctx):
        return [((), False)]

    def done(self, cfg, state):
        return True


class EncodeM(Machine):
    """Tracks the progression residue; infinite runs are accepting exactly
    when the residue holds on the remaining lasso."""

    pure = False

    def __init__(self, formula):
        self.formula = negation_normal(formula)

    def begin(self, state, pos, ctx):
        return [self.formula]

    def step(self, cfg, st, pos, ctx):
        nxt = progress_step(cfg, st)
        if nxt is False:
            return []
        return [(nxt, ctx is not None and ctx.residue_holds(cfg, pos))]

    def done(self, cfg, state):
        return holds_at_end(cfg, state)


class EnvAtomicM(Machine):
    """Finitely many idle steps, one env step satisfying ``rel``, finitely
    many idle steps."""

    def __init__(self, rel):
        self.rel = rel

    def begin(self, state, pos, ctx):
        return [0]

    def step(self, cfg, st, pos, ctx):
        if not _allowed_outside(st):
            return []
        out = [(cfg, False)]
        if cfg == 0 and st.kind == ENV and K.eval_rel(self.rel, st.pre, st.post):
            out.append((1, False))
        return out

    def done(self, cfg, state):
        return cfg == 1


class ChoiceM(Machine):
    def __init__(self, left, right):
        self.sides = (left, right)
        self.pure = left.pure and right.pure

    def begin(self, state, pos, ctx):
        out = []
        for i, m in enumerate(self.sides):
            out.extend(c if c in _ABORTS else (i, c) for c in m.begin(state, pos, ctx))
        return out

    def step(self, cfg, st, pos, ctx):
        i, inner = cfg
        return [(c, a) if c in _ABORTS else ((i, c), a)
                for c, a in self.sides[i].step(inner, st, pos, ctx)]

    def done(self, cfg, state):
        return self.sides[cfg[0]].done(cfg[1], state)


class SeqM(Machine):
    def __init__(self, first, second, carry=False):
        self.first, self.second = first, second
        self.pure = first.pure and second.pure
        # in counting mode the second half remembers the first half's count
        self.carry = carry

    def _second(self, x, c):
        if not self.carry:
            return (1, x)
        return (1, x, counter_of(self.first, c))

    def _after_first(self, cfgs, state, pos, ctx):
        out = []
        for c in cfgs:
            if c in _ABORTS:
                out.append(c)
            else:
                out.append((0, c))
                if self.first.done(c, state):
                    out.extend(x if x in _ABORTS else self._second(x, c)
                               for x in self.second.begin(state, pos, ctx))
        return out

    def begin(self, state, pos, ctx):
        return self._after_first(self.first.begin(state, pos, ctx), state, pos, ctx)

    def step(self, cfg, st, pos, ctx):
        side, inner = cfg[0], cfg[1]
        if side == 1:
            return [(c, a) if c in _ABORTS else ((1, c) + cfg[2:], a)
                    for c, a in self.second.step(inner, st, pos, ctx)]
        out = []
        nxt = ctx_next(ctx, pos)
        for c, a in self.first.step(inner, st, pos, ctx):
            if c in _ABORTS:
                out.append((c, a))
                continue
            out.append(((0, c), a))
            if self.first.done(c, st.post):
                for x in _shift(self.second.begin(st.post, nxt, ctx)):
                    out.append((x, a) if x in _ABORTS else (self._second(x, c), a))
        return out

    def done(self, cfg, state):
        # finishing the first half is represented by the second half's configs
        return cfg[0] == 1 and self.second.done(cfg[1], state)


class ConjM(Machine):
    """Weak conjunction: both sides step together and must stop together;
    an abort of either side aborts both while the other side can still
    produce a behaviour.
    The phase bit degeneralises the pair of Buchi conditions."""

    def __init__(self, left, right, track_phase=True):
        self.left, self.right = left, right
        self.pure = left.pure and right.pure
        # finite-only runs ignore acceptance and need no phase bit
        self.track_phase = track_phase

    def begin(self, state, pos, ctx):
        ls = self.left.begin(state, pos, ctx)
        rs = self.right.begin(state, pos, ctx)
        lrun = [c for c in ls if c not in _ABORTS]
        rrun = [c for c in rs if c not in _ABORTS]
        if self._licensed(ABORT_NOW in ls, ABORT_NOW in rs, lrun, rrun, state, ctx):
            return [ABORT_NOW]
        return [(a, b, 0) for a in lrun for b in rrun]

    def _licensed(self, labort, rabort, lrun, rrun, state, ctx) -> bool:
        """An abort of one side stands when the other side aborts too or
        still has a productive run."""
        if labort and rabort:
            return True
        if labort:
            return any(_productive(ctx, self.right, c, state) for c in rrun)
        if rabort:
            return any(_productive(ctx, self.left, c, state) for c in lrun)
        return False

    def step(self, cfg, st, pos, ctx):
        a, b, phase = cfg
        ls = self.left.step(a, st, pos, ctx)
        rs = self.right.step(b, st, pos, ctx)
        lkeys = {c for c, _ in ls}
        rkeys = {c for c, _ in rs}
        if self._licensed(ABORT_NOW in lkeys, ABORT_NOW in rkeys, [a], [b], st.pre, ctx):
            return [(ABORT_NOW, False)]
        lrun = [x for x in ls if x[0] not in _ABORTS]
        rrun = [x for x in rs if x[0] not in _ABORTS]
        out = []
        if self._licensed(ABORT_NEXT in lkeys, ABORT_NEXT in rkeys,
                          [c for c, _ in lrun], [c for c, _ in rrun], st.post, ctx):
            out.append((ABORT_NEXT, False))
        for c1, acc1 in lrun:
            for c2, acc2 in rrun:
                if not self.track_phase:
                    out.append(((c1, c2, 0), False))
                elif phase == 0:
                    out.append(((c1, c2, 1 if acc1 else 0), False))
                else:
                    out.append(((c1, c2, 0 if acc2 else 1), acc2))
        return out

    def done(self, cfg, state):
        return self.left.done(cfg[0], state) and self.right.done(cfg[1], state)


class IterM(Machine):
    """Zero or more (possibly infinitely many) iterations of the body.

    ``("idle",)`` sits between iterations; ``("in", c)`` is inside one.
    Completing an iteration is an accepting transition, so infinitely many
    iterations are accepted; a run stuck inside one iteration inherits the
    body's own condition.  Iterations that take no steps are irrelevant and
    never started on their own.
    """

    IDLE = ("idle",)

    def __init__(self, body, count_cap=None):
        self.body = body
        self.pure = body.pure
        self.count_cap = count_cap

    def _idle(self, n):
        return self.IDLE if self.count_cap is None else ("idle", n)

    def _in(self, c, n):
        return ("in", c) if self.count_cap is None else ("in", c, n)

    def begin(self, state, pos, ctx):
        starts = self.body.begin(state, pos, ctx)
        out = [self._idle(0)]
        if ABORT_NOW in starts:
            out.append(ABORT_NOW)
        return out

    def step(self, cfg, st, pos, ctx):
        n = cfg[-1] if self.count_cap is not None else 0
        if cfg[0] == "idle":
            inners = [c for c in self.body.begin(st.pre, pos, ctx) if c not in _ABORTS]
        else:
            inners = [cfg[1]]
        out = []
        nxt = ctx_next(ctx, pos)
        for inner in inners:
            for c, a in self.body.step(inner, st, pos, ctx):
                if c in _ABORTS:
                    out.append((c, False))
                    continue
                out.append((self._in(c, n), a))
                if self.body.done(c, st.post):
                    m = n if self.count_cap is None else min(n + 1, self.count_cap)
                    out.append((self._idle(m), True))
                    if ABORT_NOW in self.body.begin(st.post, nxt, ctx):
                        out.append((ABORT_NEXT, False))
        return out

    def done(self, cfg, state):
        if cfg[0] == "idle":
            return True
        return False


class WithM(Machine):
    """``with d { body }`` and its await form.

    Phases: ``("pre",)`` idles until the body is entered; ``("body", c,
    changed)`` runs the body while the environment may not touch ``d``, and
    at most one program step of the body may change ``d`` (the body's
    atomic point); ``("post",)`` idles finitely.  The await guard must hold
    on entry; waiting is only accepted forever when the guard is false
    infinitely often (weak fairness).
    """

    PRE, POST = ("pre",), ("post",)

    def __init__(self, var, body, guard=None):
        self.var, self.body, self.guard = var, body, guard
        self.pure = body.pure

    def _enter(self, state, pos, ctx):
        if self.guard is not None and not K.eval_pred(self.guard, state):
            return []
        out = []
        for c in self.body.begin(state, pos, ctx):
            if c in _ABORTS:
                out.append(c)
                continue
            out.append(("body", c, False))
            if self.body.done(c, state):
                out.append(self.POST)
        return out

    def begin(self, state, pos, ctx):
        return [self.PRE] + self._enter(state, pos, ctx)

    def step(self, cfg, st, pos, ctx):
        phase = cfg[0]
        if phase == "pre":
            if not _allowed_outside(st):
                return []
            if self.guard is None:
                acc = True
            else:
                acc = not K.eval_pred(self.guard, st.pre)
            out = [(self.PRE, acc)]
            for c in _shift(self._enter(st.post, ctx_next(ctx, pos), ctx)):
                out.append((c, False))
            return out
        if phase == "post":
            return [(self.POST, False)] if _allowed_outside(st) else []
        _, inner, changed = cfg
        touches = st.pre[self.var] != st.post[self.var]
        if touches:
            if st.kind == ENV or changed:
                return []
            changed = True
        out = []
        for c, a in self.body.step(inner, st, pos, ctx):
            if c in _ABORTS:
                out.append((c, False))
                continue
            out.append((("body", c, changed), False))
            if self.body.done(c, st.post):
                out.append((self.POST, False))
        return out

    def done(self, cfg, state):
        return cfg[0] == "post"


class CachedM(Machine):
    """Memoises the steps of a pure sub-machine; results may depend on the
    universe, which is part of the key."""

    def __init__(self, inner: Machine):
        self.inner = inner
        self._memo = {}

    def begin(self, state, pos, ctx):
        return self.inner.begin(state, pos, ctx)

    def step(self, cfg, st, pos, ctx):
        key = (cfg, st, ctx.universe if ctx is not None else None)
        out = self._memo.get(key)
        if out is None:
            out = self._memo[key] = self.inner.step(cfg, st, pos, ctx)
        return out

    def done(self, cfg, state):
        return self.inner.done(cfg, state)


def _cache_pure(m: Machine) -> Machine:
    if m.pure:
        return CachedM(m)
    for attr in ("left", "right", "first", "second", "body"):
        if hasattr(m, attr):
            setattr(m, attr, _cache_pure(getattr(m, attr)))
    if isinstance(m, ChoiceM):
        m.sides = tuple(_cache_pure(x) for x in m.sides)
    return m


def ctx_next(ctx, pos):
    if ctx is not None and ctx.trace is not None:
        return ctx.trace.next_pos(pos)
    return pos + 1


def compile_command(cmd, count_iter=None, finite=False) -> Machine:
    """Build the machine for a command.

    ``count_iter`` names an ``Iter`` node (by identity) whose completed
    iterations are counted, saturating at the given cap:
    ``(node, cap)``.  ``finite`` drops the bookkeeping only infinite runs
    need; such machines must not be used to decide lassos.
    """
    cmd = K.normalize(cmd) if count_iter is None else cmd

    def build(c):
        if isinstance(c, K.Terminate):
            return build(K.normalize(c))
        if isinstance(c, K.Spec):
            return SpecM(c.frame, c.post)
        if isinstance(c, K.Pre):
            return PreM(c.pred)
        if isinstance(c, K.Rely):
            return RelyM(c.rel)
        if isinstance(c, K.Guar):
            return GuarM(c.rel)
        if isinstance(c, K.Term):
            return TermM()
        if isinstance(c, K.Encode):
            return EncodeM(c.formula)
        if isinstance(c, K.EnvAtomic):
            return EnvAtomicM(c.rel)
        if isinstance(c, K.Conj):
            return ConjM(build(c.left), build(c.right), track_phase=not finite)
        if isinstance(c, K.Seq):
            return SeqM(build(c.first), build(c.second), carry=count_iter is not None)
        if isinstance(c, K.Choice):
            return ChoiceM(build(c.left), build(c.right))
        if isinstance(c, K.Iter):
            cap = count_iter[1] if count_iter is not None and c is count_iter[0] else None
            return IterM(build(c.body), cap)
        if isinstance(c, K.With):
            return WithM(c.var, build(c.body))
        if isinstance(c, K.AwaitWith):
            return WithM(c.var, build(c.body), c.guard)
        raise TypeError(f"not a command: {c!r}")

    m = build(cmd)
    # counting needs the bare machine structure
    return m if count_iter is not None else _cache_pure(m)


# ---------------------------------------------------------------------------
# Running machines


class Runner:
    """Set-of-configurations simulation with a step cache for pure machines."""

    def __init__(self, machine: Machine, universe: Optional[Universe] = None):
        self.m = machine
        self.ctx = Context(universe=universe)
        self._cache = {} if machine.pure else None
        self._sets = {}

    def begin(self, state, ctx=None):
        cfgs = self.m.begin(state, 0, ctx or self.ctx)
        return frozenset(c for c in cfgs if c not in _ABORTS), ABORT_NOW in cfgs

    def advance(self, cfgs, st: Step, pos=0, ctx=None):
        """One step from a set of configurations.

        Returns ``(next_configs, abort_now, abort_next)``.
        """
        if self._cache is not None:
            key = (cfgs, st)
            hit = self._sets.get(key)
            if hit is None:
                hit = self._sets[key] = self._advance(cfgs, st, pos, self.ctx)
            return hit
        return self._advance(cfgs, st, pos, ctx or self.ctx)

    def _advance(self, cfgs, st, pos, ctx):
        nxt, now, later = set(), False, False
        for c in cfgs:
            for c2, _ in self._step(c, st, pos, ctx):
                if c2 is ABORT_NOW:
                    now = True
                elif c2 is ABORT_NEXT:
                    later = True
                else:
                    nxt.add(c2)
        return frozenset(nxt), now, later

    def _step(self, c, st, pos, ctx):
        if self._cache is None:
            return self.m.step(c, st, pos, ctx)
        key = (c, st)
        r = self._cache.get(key)
        if r is None:
            r = self.m.step(c, st, pos, self.ctx)
            self._cache[key] = r
        return r

    def any_done(self, cfgs, state) -> bool:
        return any(self.m.done(c, state) for c in cfgs)


def _run_prefix(runner: Runner, trace: Trace, ctx):
    """Simulate over the (unrolled) trace; returns the verdict-so-far data.

    For a lasso the simulation stops once (position, configuration set)
    repeats, after which no new abort or death can appear.
    Returns ``(abort_index, dead_index, configs, time)``.
    """
    cfgs, now = runner.begin(trace.start, ctx)
    if now:
        return 0, None, cfgs, 0
    if not cfgs:
        return None, 0, cfgs, 0
    pos, t = 0, 0
    seen = set()
    while True:
        if trace.loop is None:
            if pos >= len(trace.steps):
                return None, None, cfgs, t
        else:
            key = (pos, cfgs)
            if key in seen:
                return None, None, cfgs, t
            seen.add(key)
        st = trace.steps[pos]
        nxt, now, later = runner.advance(cfgs, st, pos, ctx)
        if now:
            return t, None, cfgs, t
        if later:
            return t + 1, None, nxt, t + 1
        if not nxt:
            return None, t, nxt, t
        cfgs = nxt
        pos = trace.next_pos(pos)
        t += 1


def _buchi(machine: Machine, trace: Trace, ctx) -> bool:
    """Is there an infinite run along the lasso with infinitely many
    accepting transitions?"""
    g = nx.DiGraph()
    start = [c for c in machine.begin(trace.start, 0, ctx) if c not in _ABORTS]
    frontier = [(0, c) for c in start]
    seen = set(frontier)
    accepting_edges = []
    while frontier:
        node = frontier.pop()
        pos, cfg = node
        st = trace.steps[pos]
        npos = trace.next_pos(pos)
        # positions before the loop cannot lie on a cycle
        on_cycle = pos >= trace.loop
        for c2, acc in machine.step(cfg, st, pos, ctx):
            if c2 in _ABORTS:
                continue
            nnode = (npos, c2)
            if on_cycle:
                g.add_edge(node, nnode)
                if acc:
                    accepting_edges.append((node, nnode))
            if nnode not in seen:
                seen.add(nnode)
                frontier.append(nnode)
    if not accepting_edges:
        return False
    comp = {}
    for i, scc in enumerate(nx.strongly_connected_components(g)):
        for n in scc:
            comp[n] = i
    for u, w in accepting_edges:
        if comp[u] == comp[w] and (u != w or g.has_edge(u, u)):
            return True
    return False


def as_universe(universe) -> Optional[Universe]:
    if universe is None or isinstance(universe, Universe):
        return universe
    return Universe(universe)


def accepts(cmd, trace: Trace, machine: Optional[Machine] = None, universe=None) -> Verdict:
    """Verdict of matching ``trace`` against ``cmd``.

    Abort dominates: if any run aborts, the verdict is the earliest abort.
    ``universe`` (declarations or a ``Universe``) enables the productivity
    test for aborts under weak conjunction; without it every run counts as
    productive.
    """
    m = machine or compile_command(cmd)
    universe = as_universe(universe)
    ctx = Context(trace, universe)
    runner = Runner(m, universe)
    abort_at, dead_at, cfgs, t = _run_prefix(runner, trace, ctx)
    if abort_at is not None:
        return Verdict("aborted", abort_at)
    if trace.loop is None:
        if dead_at is not None:
            return Verdict("rejected", dead_at, "no matching behaviour")
        if runner.any_done(cfgs, trace.final):
            return TERMINATED
        return Verdict("rejected", len(trace.steps), "cannot terminate here")
    if dead_at is not None:
        return Verdict("rejected", dead_at, "no matching behaviour")
    if _buchi(m, trace, ctx):
        return INFINITE
    return Verdict("rejected", len(trace.steps), "no acceptable infinite behaviour")


def partial_accepts(cmd, trace: Trace, machine: Optional[Machine] = None,
                    universe=None) -> bool:
    """Is the finite ``trace`` a prefix of some behaviour of ``cmd``?

    A prefix counts when some run is still alive at its end or has aborted.
    """
    if trace.loop is not None:
        raise ValueError("partial_accepts takes a finite trace")
    m = machine or compile_command(cmd)
    universe = as_universe(universe)
    runner = Runner(m, universe)
    abort_at, dead_at, cfgs, _ = _run_prefix(runner, trace, Context(trace, universe))
    if abort_at is not None:
        return True
    return dead_at is None and bool(cfgs)


def iteration_counts(cmd, iter_node, trace: Trace, cap: int = 8) -> set:
    """Numbers of completed ``iter_node`` iterations over all accepting runs
    of ``cmd`` on a finite trace (counts saturate at ``cap``)."""
    if trace.loop is not None:
        raise ValueError("iteration counting takes a finite trace")
    m = compile_command(cmd, count_iter=(iter_node, cap))
    ctx = Context(trace)
    cfgs = [c for c in m.begin(trace.start, 0, ctx) if c not in _ABORTS]
    for i, st in enumerate(trace.steps):
        nxt = set()
        for c in cfgs:
            nxt.update(c2 for c2, _ in m.step(c, st, i, ctx) if c2 not in _ABORTS)
        cfgs = nxt
    final = trace.final
    counts = set()
    for c in cfgs:
        if m.done(c, final):
            n = counter_of(m, c)
            counts.add(0 if n is None else n)
    return counts


def counter_of(m, c):
    """Completed-iteration count recorded in configuration ``c``, if any."""
    if c in _ABORTS:
        return None
    if isinstance(m, IterM):
        if m.count_cap is not None:
            return c[-1]
        return counter_of(m.body, c[1]) if c[0] == "in" else None
    if isinstance(m, SeqM):
        if c[0] == 0:
            return counter_of(m.first, c[1])
        inner = counter_of(m.second, c[1])
        if inner is not None:
            return inner
        return c[2] if len(c) > 2 else None
    if isinstance(m, ChoiceM):
        return counter_of(m.sides[c[0]], c[1])
    if isinstance(m, ConjM):
        n = counter_of(m.left, c[0])
        return n if n is not None else counter_of(m.right, c[1])
    if isinstance(m, WithM) and c[0] == "body":
        return counter_of(m.body, c[1])
    return None
