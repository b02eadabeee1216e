"""Steps, finite traces, lasso traces and their bounded enumerators."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Optional

from .kernel import State, enumerate_states, eval_rel, format_state, format_value

PGM = "pgm"
ENV = "env"
KINDS = (PGM, ENV)


class BudgetExceeded(Exception):
    """Enumeration or search hit its configured budget."""

    def __init__(self, message, count=0):
        super().__init__(message)
        self.count = count


@dataclass(frozen=True)
class Step:
    kind: str
    pre: State
    post: State

    @property
    def is_stutter(self) -> bool:
        return self.pre == self.post

    def changes(self, name) -> bool:
        return self.pre[name] != self.post[name]

    def __str__(self):
        return f"{self.kind} {format_state(self.pre)} -> {format_state(self.post)}"


@dataclass(frozen=True)
class Trace:
    """A finite trace, or a lasso when ``loop`` is set.

    A lasso denotes ``steps[:loop]`` followed by ``steps[loop:]`` repeated
    forever.  Empty traces still know their start state.
    """

    start: State
    steps: tuple = ()
    loop: Optional[int] = None

    @classmethod
    def of(cls, steps, loop=None, start=None):
        steps = tuple(steps)
        if start is None:
            start = steps[0].pre
        return cls(start, steps, loop)

    @property
    def is_lasso(self) -> bool:
        return self.loop is not None

    def __len__(self):
        return len(self.steps)

    def state_at(self, i) -> State:
        return self.start if i == 0 else self.steps[i - 1].post

    @property
    def states(self) -> list:
        return [self.start] + [s.post for s in self.steps]

    @property
    def final(self) -> State:
        return self.state_at(len(self.steps))

    def next_pos(self, i) -> int:
        """Successor of position ``i``; positions of a lasso wrap into the loop."""
        j = i + 1
        if self.loop is not None and j == len(self.steps):
            return self.loop
        return j

    def prefix(self, n) -> "Trace":
        """The finite prefix with ``n`` steps of the (unrolled) trace."""
        return Trace(self.start, tuple(self.unrolled_steps(n)))

    def unrolled_steps(self, n) -> Iterator[Step]:
        if self.loop is None:
            yield from self.steps[:n]
            return
        pos = 0
        for _ in range(n):
            yield self.steps[pos]
            pos = self.next_pos(pos)

    def suffix(self, i) -> "Trace":
        """The trace starting at position ``i`` (a lasso stays a lasso)."""
        if self.loop is None or i <= self.loop:
            loop = None if self.loop is None else self.loop - i
            return Trace(self.state_at(i), self.steps[i:], loop)
        tail = self.steps[i:]
        cycle = self.steps[self.loop:]
        return Trace(self.state_at(i), tail + cycle, len(tail))

    def with_kinds(self, kind_of) -> "Trace":
        return Trace(self.start, tuple(Step(kind_of(i, s), s.pre, s.post)
                                       for i, s in enumerate(self.steps)), self.loop)

    def __str__(self):
        return serialize(self)


def well_formed(t: Trace) -> bool:
    cur = t.start
    for s in t.steps:
        if s.kind not in KINDS or s.pre != cur or s.pre.names != s.post.names:
            return False
        cur = s.post
    if t.loop is not None:
        if not (0 <= t.loop < len(t.steps)):
            return False
        if t.steps[-1].post != t.steps[t.loop].pre:
            return False
    return True


def _successors(states, kinds, step_filter):
    succ = {}
    for a in states:
        out = []
        for kind in kinds:
            rel = (step_filter or {}).get(kind)
            for b in states:
                if rel is None or eval_rel(rel, a, b):
                    out.append(Step(kind, a, b))
        succ[a] = out
    return succ


def enumerate_traces(decls, max_len, kinds=KINDS, step_filter=None,
                     budget=None, start_states=None) -> Iterator[Trace]:
    """Every well-formed finite trace with at most ``max_len`` steps.

    Order: by start state, then depth-first with shorter traces first
    along each branch.  ``step_filter`` maps a kind to a relation every step
    of that kind must satisfy.
    """
    states = enumerate_states(decls)
    succ = _successors(states, kinds, step_filter)
    count = 0
    for s0 in (start_states if start_states is not None else states):
        stack = [(s0, ())]
        while stack:
            cur, steps = stack.pop()
            count += 1
            if budget is not None and count > budget:
                raise BudgetExceeded(f"more than {budget} traces", count - 1)
            yield Trace(s0, steps)
            if len(steps) < max_len:
                for st in reversed(succ[cur]):
                    stack.append((st.post, steps + (st,)))


def enumerate_lassos(decls, max_len, kinds=KINDS, step_filter=None,
                     budget=None) -> Iterator[Trace]:
    """Every well-formed lasso whose total length is at most ``max_len``."""
    count = 0
    for t in enumerate_traces(decls, max_len, kinds, step_filter):
        if not t.steps:
            continue
        end = t.final
        for k, st in enumerate(t.steps):
            if st.pre == end:
                count += 1
                if budget is not None and count > budget:
                    raise BudgetExceeded(f"more than {budget} lassos", count - 1)
                yield Trace(t.start, t.steps, k)


# ---------------------------------------------------------------------------
# Text format: one step per line, ``kind pre -> post``; ``loop@i`` marks lassos.


def serialize(t: Trace) -> str:
    lines = []
    if not t.steps:
        lines.append(f"start {format_state(t.start)}")
    lines.extend(str(s) for s in t.steps)
    if t.loop is not None:
        lines.append(f"loop@{t.loop}")
    return "\n".join(lines) + "\n"


_BIND = re.compile(r"(\w+)=(\S+)")


def parse_value(text: str):
    text = text.strip()
    if text == "null":
        return None
    if text.startswith("["):
        if not text.endswith("]"):
            raise ValueError(f"bad sequence value {text!r}")
        inner = text[1:-1].strip()
        if not inner:
            return ()
        return tuple(parse_value(x) for x in inner.split(","))
    return int(text)


def parse_state(text: str) -> State:
    return State({m.group(1): parse_value(m.group(2)) for m in _BIND.finditer(text)})


def parse_trace(text: str) -> Trace:
    steps, loop, start = [], None, None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("loop@"):
            loop = int(line[5:])
        elif line.startswith("start"):
            start = parse_state(line[5:])
        else:
            kind, rest = line.split(None, 1)
            pre, post = rest.split("->")
            steps.append(Step(kind, parse_state(pre), parse_state(post)))
    if start is None:
        if not steps:
            raise ValueError("empty trace text without a start line")
        start = steps[0].pre
    t = Trace(start, tuple(steps), loop)
    if not well_formed(t):
        raise ValueError("trace is not well formed")
    return t


__all__ = [
    "PGM", "ENV", "KINDS", "Step", "Trace", "BudgetExceeded", "well_formed",
    "enumerate_traces", "enumerate_lassos", "serialize", "parse_trace",
    "parse_state", "parse_value", "format_value",
]
