"""Instruction-level implementation models and their conformance checks.

An ``Lts`` is a closed system of threads, each running a fixed list of
operation instances.  Every instruction is one atomic program step over the
global state, which holds the shared variables, each thread's locals, and
two counters per thread: ``op<i>`` (the operation it is in) and ``pc<i>``
(the instruction within it).

``explore`` enumerates every interleaving up to a bound.  A run is cut into
per-operation windows and projected to the shared variable plus the
operation's result slot (renamed ``res``): the operation's own instructions
become program steps and everybody else's become environment steps.
Conformance checks every projected window against the operation's
specification.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from . import kernel as K
from .refinement import CheckResult
from .semantics import Universe, accepts, compile_command, partial_accepts
from .specs import (
    QUEUE, RES, STACK, bounded_queue_await_spec, bounded_queue_terminate_spec, queue_spec_srsw,
    stack_explicit_spec, stack_terminate_spec,
)
from .traces import ENV, PGM, BudgetExceeded, Step, Trace

MAX_THREADS = 3
MAX_OPS = 2
OP_NAMES = ("write", "read", "push", "pop")


@dataclass(frozen=True)
class OpInstance:
    thread: int
    name: str
    arg: object = None
    index: int = 0

    def __post_init__(self):
        if self.name not in OP_NAMES:
            raise K.ConfigError(f"unknown operation {self.name!r}")

    @property
    def result(self) -> Optional[str]:
        """Name of the global result slot, for operations that return."""
        if self.name in ("read", "pop"):
            return f"res{self.thread}_{self.index}"
        return None

    def __str__(self):
        arg = "" if self.arg is None else K.format_value(self.arg)
        return f"t{self.thread}.{self.name}({arg})#{self.index}"


@dataclass(frozen=True)
class Instr:
    """A guarded atomic instruction.

    ``update(state, me)`` returns ``(changes, next_pc)``; a ``next_pc`` of
    ``None`` completes the current operation.
    """

    label: str
    update: Callable
    guard: Callable = lambda state, me: True


def loc(name, me) -> str:
    return f"{name}{me}"


@dataclass
class Lts:
    shared: dict
    threads: list  # per thread: list of (OpInstance, [Instr, ...])
    locals: dict = field(default_factory=dict)  # base name -> initial value
    view: tuple = ()  # shared variables kept by projections
    decls: tuple = ()  # declarations of the projected state space

    def __post_init__(self):
        if len(self.threads) > MAX_THREADS:
            raise K.ConfigError(f"at most {MAX_THREADS} threads, got {len(self.threads)}")
        for ops in self.threads:
            if len(ops) > MAX_OPS:
                raise K.ConfigError(f"at most {MAX_OPS} operations per thread")

    @property
    def ops(self) -> list:
        return [op for ops in self.threads for op, _ in ops]

    def initial(self) -> K.State:
        b = dict(self.shared)
        for i, ops in enumerate(self.threads):
            b[loc("op", i)] = 0
            b[loc("pc", i)] = 0
            for name, v in self.locals.items():
                b[loc(name, i)] = v
            for op, _ in ops:
                if op.result:
                    b[op.result] = K.NULL
        return K.State(b)

    def enabled(self, state: K.State) -> list:
        """``(thread, label, next_state)`` for every enabled instruction."""
        out = []
        for i, ops in enumerate(self.threads):
            k = state[loc("op", i)]
            if k >= len(ops):
                continue
            instr = ops[k][1][state[loc("pc", i)]]
            if not instr.guard(state, i):
                continue
            changes, nxt = instr.update(state, i)
            b = dict(changes)
            if nxt is None:
                b[loc("op", i)] = k + 1
                b[loc("pc", i)] = 0
            else:
                b[loc("pc", i)] = nxt
            out.append((i, instr.label, state.replace(**b)))
        return out

    def finished(self, state: K.State) -> bool:
        return all(state[loc("op", i)] >= len(ops) for i, ops in enumerate(self.threads))


# ---------------------------------------------------------------------------
# Treiber stack over the abstract sequence ``s``


def _push_code(v):
    return [
        Instr("read-top", lambda st, me: ({loc("snap", me): st[STACK]}, 1)),
        Instr("build", lambda st, me: ({loc("new", me): (v,) + st[loc("snap", me)]}, 2)),
        Instr("cas", lambda st, me: (
            ({STACK: st[loc("new", me)]}, None) if st[STACK] == st[loc("snap", me)]
            else ({}, 0))),
    ]


def _pop_code(slot, check_empty=True):
    def read_top(st, me):
        snap = st[STACK]
        if not snap and check_empty:
            return {loc("snap", me): snap, slot: K.NULL}, None
        return {loc("snap", me): snap}, 1

    def cas(st, me):
        snap = st[loc("snap", me)]
        if not snap:
            return {}, 0  # only reachable without the empty check: spin
        if st[STACK] == snap:
            return {STACK: snap[1:], slot: snap[0]}, None
        return {}, 0

    return [Instr("read-top", read_top), Instr("cas", cas)]


def cas_label(label: str, before: K.State, after: K.State) -> str:
    """Refine the ``cas`` label into commit or fail by its effect."""
    if label != "cas":
        return label
    return "cas-commit" if before[STACK] != after[STACK] else "cas-fail"


def _ops_of(threads):
    out = []
    for i, names in enumerate(threads):
        ops = []
        for k, spec in enumerate(names):
            name, arg = spec if isinstance(spec, tuple) else (spec, None)
            ops.append(OpInstance(i, name, arg, k))
        out.append(ops)
    return out


def _stack_decls(values, cap):
    return (K.seq_var(STACK, values, cap), K.scalar_var(RES, (K.NULL,) + tuple(values)))


def treiber_impl(threads, values=(1, 2), cap=3, pop_checks_empty=True) -> Lts:
    """Treiber stack; ``threads`` lists per thread ``("push", v)`` or ``"pop"``.

    ``pop_checks_empty=False`` is the mutation whose pop never returns null
    and spins while the stack is empty.
    """
    code = []
    for ops in _ops_of(threads):
        row = []
        for op in ops:
            if op.name == "push":
                row.append((op, _push_code(op.arg)))
            elif op.name == "pop":
                row.append((op, _pop_code(op.result, pop_checks_empty)))
            else:
                raise K.ConfigError(f"the stack has no {op.name} operation")
        code.append(row)
    return Lts({STACK: ()}, code, {"snap": (), "new": ()}, (STACK,), _stack_decls(values, cap))


# ---------------------------------------------------------------------------
# Lock-based bounded queue

LOCK = "lock"


def _acquire(nxt):
    return Instr("acquire", lambda st, me: ({LOCK: me + 1}, nxt),
                 guard=lambda st, me: st[LOCK] == 0)


def _write_code(v, n, check_capacity=True):
    def test(st, me):
        if not check_capacity or len(st[QUEUE]) < n:
            return {}, 2
        return {}, 3

    return [
        _acquire(1),
        Instr("test-full", test),
        Instr("append", lambda st, me: ({QUEUE: st[QUEUE] + (v,)}, 4)),
        Instr("release-retry", lambda st, me: ({LOCK: 0}, 0)),
        Instr("release", lambda st, me: ({LOCK: 0}, None)),
    ]


def _read_code(slot):
    return [
        _acquire(1),
        Instr("test-empty", lambda st, me: ({}, 2 if st[QUEUE] else 3)),
        Instr("remove", lambda st, me: ({QUEUE: st[QUEUE][1:], slot: st[QUEUE][0]}, 4)),
        Instr("release-retry", lambda st, me: ({LOCK: 0}, 0)),
        Instr("release", lambda st, me: ({LOCK: 0}, None)),
    ]


def lock_queue_impl(n, threads, values=(1, 2), write_checks_capacity=True) -> Lts:
    """Bounded queue behind one mutex; ``threads`` lists ``("write", v)`` or
    ``"read"`` per thread.  ``write_checks_capacity=False`` is the mutation
    that appends to a full queue."""
    if not isinstance(n, int) or n < 1:
        raise K.ConfigError(f"queue capacity must be a positive integer, got {n!r}")
    code = []
    for ops in _ops_of(threads):
        row = []
        for op in ops:
            if op.name == "write":
                row.append((op, _write_code(op.arg, n, write_checks_capacity)))
            elif op.name == "read":
                row.append((op, _read_code(op.result)))
            else:
                raise K.ConfigError(f"the queue has no {op.name} operation")
        code.append(row)
    # the unchecked write may exceed the capacity by one per writer
    cap = n + (0 if write_checks_capacity else MAX_THREADS * MAX_OPS)
    decls = (K.seq_var(QUEUE, values, cap), K.scalar_var(RES, (K.NULL,) + tuple(values)))
    return Lts({QUEUE: (), LOCK: 0}, code, {}, (QUEUE,), decls)


# ---------------------------------------------------------------------------
# Exploration


@dataclass(frozen=True)
class Run:
    """One maximal interleaving: ``status`` is ``complete`` (all threads
    done), ``deadlock``, ``lasso`` (a state repeated) or ``truncated``.

    A lasso is ``fair`` when every thread enabled somewhere on its cycle
    also takes a step on it (strong fairness); other runs are always fair.
    """

    trace: Trace
    actors: tuple
    labels: tuple
    status: str
    fair: bool = True


@dataclass
class Exploration:
    lts: Lts
    runs: list

    @property
    def traces(self) -> list:
        return [r.trace for r in self.runs]

    def complete(self) -> list:
        return [r for r in self.runs if r.status == "complete"]

    def lassos(self) -> list:
        return [r for r in self.runs if r.status == "lasso"]


def _fair(lts, trace, actors) -> bool:
    cycle = range(trace.loop, len(trace.steps))
    moved = {actors[k] for k in cycle}
    for k in cycle:
        if any(who not in moved for who, _, _ in lts.enabled(trace.steps[k].pre)):
            return False
    return True


def explore(lts: Lts, max_len: int = 24, budget: Optional[int] = None,
            visits: int = 1) -> Exploration:
    """Every interleaving up to ``max_len`` steps, in a fixed order (thread
    index first).

    Reaching a state already on the current path closes a lasso; the path
    is still extended until a state occurs ``visits`` times, so spinning
    that precedes other threads' progress is also covered.
    """
    if visits < 1:
        raise K.ConfigError("visits must be at least 1")
    runs = []
    s0 = lts.initial()
    stacked = STACK in lts.shared

    def emit(run):
        runs.append(run)
        if budget is not None and len(runs) > budget:
            raise BudgetExceeded(f"more than {budget} runs", len(runs) - 1)

    def dfs(state, steps, actors, labels, on_path):
        moves = lts.enabled(state)
        if not moves:
            status = "complete" if lts.finished(state) else "deadlock"
            emit(Run(Trace(s0, steps), actors, labels, status))
            return
        if len(steps) >= max_len:
            emit(Run(Trace(s0, steps), actors, labels, "truncated"))
            return
        for who, label, nxt in moves:
            path = steps + (Step(PGM, state, nxt),)
            acts = actors + (who,)
            labs = labels + (cas_label(label, state, nxt) if stacked else label,)
            seen = on_path.setdefault(nxt, [])
            if seen:
                t = Trace(s0, path, seen[-1])
                emit(Run(t, acts, labs, "lasso", _fair(lts, t, acts)))
            if len(seen) < visits:
                seen.append(len(path))
                dfs(nxt, path, acts, labs, on_path)
                seen.pop()
            if not seen:
                del on_path[nxt]

    dfs(s0, (), (), (), {s0: [0]})
    return Exploration(lts, runs)


# ---------------------------------------------------------------------------
# Projection


def _project_state(state, lts, op):
    b = {name: state[name] for name in lts.view}
    if op.result:
        b[RES] = state[op.result]
    return K.State(b)


def project(run: Run, lts: Lts, op: OpInstance):
    """The window of ``op`` in ``run`` from its own viewpoint.

    Returns ``(trace, complete)`` or ``None`` when the operation never
    started.  ``complete`` is false for windows cut short by the bound or a
    deadlock.  Operation counters only grow and a lasso's cycle returns to
    the same state, so an unfinished operation starts before the cycle.
    """
    t = run.trace
    opvar = loc("op", op.thread)
    states = t.states
    start = next((p for p, s in enumerate(states) if s[opvar] == op.index), None)
    if start is None:
        return None
    end = next((q for q, s in enumerate(states) if s[opvar] > op.index), None)
    complete = end is not None or t.loop is not None
    loop = None
    if end is None:
        end = len(t.steps)
        if t.loop is not None:
            loop = t.loop - start
    steps = tuple(
        Step(PGM if run.actors[k] == op.thread else ENV,
             _project_state(t.steps[k].pre, lts, op), _project_state(t.steps[k].post, lts, op))
        for k in range(start, end)
    )
    trace = Trace(_project_state(states[start], lts, op), steps, loop)
    return trace, complete


# ---------------------------------------------------------------------------
# Conformance


def default_spec_of(kind: str, n: int = 2):
    """Operation instance -> specification command for a named spec family."""
    if kind == "stack-explicit":
        ops = stack_explicit_spec()
        return lambda op: ops.push(op.arg) if op.name == "push" else ops.pop
    if kind == "stack-terminate":
        ops = stack_terminate_spec()
        return lambda op: ops.push(op.arg) if op.name == "push" else ops.pop
    if kind == "queue-srsw":
        ops = queue_spec_srsw()
    elif kind == "queue-await":
        ops = bounded_queue_await_spec(n)
    elif kind == "queue-terminate":
        ops = bounded_queue_terminate_spec(n)
    else:
        raise K.ConfigError(f"unknown specification family {kind!r}")
    return lambda op: ops.write(op.arg) if op.name == "write" else ops.read


def conformance(exploration: Exploration, spec_of: Callable) -> CheckResult:
    """Every projected window must be a behaviour (or covered by an abort)
    of its operation's specification."""
    lts = exploration.lts
    universe = Universe(lts.decls)
    machines, seen = {}, set()
    checked = 0
    for run in exploration.runs:
        if not run.fair:
            continue
        for op in lts.ops:
            proj = project(run, lts, op)
            if proj is None:
                continue
            trace, complete = proj
            key = (op.name, op.arg, trace, complete)
            if key in seen:
                continue
            seen.add(key)
            checked += 1
            cmd = spec_of(op)
            m = machines.get(key[:2])
            if m is None:
                m = machines[key[:2]] = compile_command(cmd)
            if complete or trace.is_lasso:
                verdict = accepts(cmd, trace, m, universe)
                ok = verdict.accepted or verdict.aborted
            else:
                ok = partial_accepts(cmd, trace, m, universe)
                verdict = accepts(cmd, trace, m, universe)
            if not ok:
                res = CheckResult("counterexample", trace, verdict, None, checked)
                res.info.update(op=str(op), labels=run.labels, decls=lts.decls,
                                complete=complete or trace.is_lasso)
                return res
    return CheckResult("pass", checked=checked,
                       note=f"{len(exploration.runs)} runs, {checked} distinct windows")
