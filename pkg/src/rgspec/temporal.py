"""Temporal termination conditions on finite and lasso traces.

Finite traces are read position by position (``[]`` over every position,
``<>`` needs a witness); a step atom at the last position of a finite trace
has no step to look at, so ``all``-mode atoms hold there and ``some``-mode
atoms do not.  Lassos are decided exactly on their infinite unrolling.
"""

from __future__ import annotations

from functools import lru_cache

from .kernel import (Always, Eventually, StateAtom, StepAtom, TAnd, TNot, TOr,
                     eval_pred, eval_rel, negate)
from .traces import Step, Trace


def negation_normal(tf):
    """Push every negation down to the atoms."""
    if isinstance(tf, TNot):
        return _neg(tf.arg)
    if isinstance(tf, (StateAtom, StepAtom)):
        return tf
    if isinstance(tf, (TAnd, TOr)):
        return type(tf)(negation_normal(tf.left), negation_normal(tf.right))
    if isinstance(tf, (Eventually, Always)):
        return type(tf)(negation_normal(tf.arg))
    raise TypeError(f"not a temporal formula: {tf!r}")


def _neg(tf):
    if isinstance(tf, TNot):
        return negation_normal(tf.arg)
    if isinstance(tf, StateAtom):
        return StateAtom(negate(tf.pred))
    if isinstance(tf, StepAtom):
        return StepAtom(tf.kind, negate(tf.rel), "some" if tf.mode == "all" else "all")
    if isinstance(tf, TAnd):
        return TOr(_neg(tf.left), _neg(tf.right))
    if isinstance(tf, TOr):
        return TAnd(_neg(tf.left), _neg(tf.right))
    if isinstance(tf, Eventually):
        return Always(_neg(tf.arg))
    if isinstance(tf, Always):
        return Eventually(_neg(tf.arg))
    raise TypeError(f"not a temporal formula: {tf!r}")


def step_atom_holds(atom: StepAtom, step) -> bool:
    if step is None:
        return atom.mode == "all"
    matches = atom.kind == "any" or step.kind == atom.kind
    if atom.mode == "all":
        return (not matches) or eval_rel(atom.rel, step.pre, step.post)
    return matches and eval_rel(atom.rel, step.pre, step.post)


def truth_table(tf, t: Trace) -> list:
    """Truth value of ``tf`` at every position of ``t``.

    Finite traces have positions ``0..len``; lassos have ``0..len-1`` (the
    position after the last step is the loop start again).
    """
    if t.loop is None:
        n = len(t.steps) + 1
    else:
        n = len(t.steps)
    states = t.states

    def step_at(k):
        return t.steps[k] if k < len(t.steps) else None

    def table(f):
        if isinstance(f, StateAtom):
            return [eval_pred(f.pred, states[k]) for k in range(n)]
        if isinstance(f, StepAtom):
            return [step_atom_holds(f, step_at(k)) for k in range(n)]
        if isinstance(f, TNot):
            return [not x for x in table(f.arg)]
        if isinstance(f, TAnd):
            return [a and b for a, b in zip(table(f.left), table(f.right))]
        if isinstance(f, TOr):
            return [a or b for a, b in zip(table(f.left), table(f.right))]
        if isinstance(f, (Eventually, Always)):
            inner = table(f.arg)
            pick = any if isinstance(f, Eventually) else all
            out = [False] * n
            if t.loop is None:
                acc = inner[n - 1]
                out[n - 1] = acc
                for k in range(n - 2, -1, -1):
                    acc = pick((inner[k], acc))
                    out[k] = acc
                return out
            cyc = pick(inner[t.loop:])
            for k in range(t.loop, n):
                out[k] = cyc
            acc = cyc
            for k in range(t.loop - 1, -1, -1):
                acc = pick((inner[k], acc))
                out[k] = acc
            return out
        raise TypeError(f"not a temporal formula: {f!r}")

    return table(tf)


def eval_temporal(tf, t: Trace, pos: int = 0) -> bool:
    return truth_table(tf, t)[pos]


# ---------------------------------------------------------------------------
# Progression: rewrite a formula after consuming one position.  Used by the
# matcher to track ``encode`` incrementally; formulas are kept in negation
# normal form with flattened, sorted and/or so the set of residues is finite.


def _flatten(cls, items):
    out = []
    for x in items:
        if isinstance(x, cls):
            out.extend(_flatten(cls, (x.left, x.right)))
        else:
            out.append(x)
    return out


def _mk(cls, items):
    unit = cls is TAnd
    parts = []
    for x in _flatten(cls, items):
        if x is unit:
            continue
        if x is (not unit):
            return not unit
        parts.append(x)
    parts = sorted(set(parts), key=repr)
    if not parts:
        return unit
    out = parts[-1]
    for x in reversed(parts[:-1]):
        out = cls(x, out)
    return out


def progress(tf, state, step: Step):
    """Residue of ``tf`` for the position after ``step`` (NNF input)."""
    if tf is True or tf is False:
        return tf
    if isinstance(tf, StateAtom):
        return eval_pred(tf.pred, state)
    if isinstance(tf, StepAtom):
        return step_atom_holds(tf, step)
    if isinstance(tf, TAnd):
        return _mk(TAnd, (progress(tf.left, state, step), progress(tf.right, state, step)))
    if isinstance(tf, TOr):
        return _mk(TOr, (progress(tf.left, state, step), progress(tf.right, state, step)))
    if isinstance(tf, Eventually):
        return _mk(TOr, (progress(tf.arg, state, step), tf))
    if isinstance(tf, Always):
        return _mk(TAnd, (progress(tf.arg, state, step), tf))
    raise TypeError(f"not a temporal formula in negation normal form: {tf!r}")


@lru_cache(maxsize=1 << 18)
def progress_step(tf, step: Step):
    """``progress`` over ``step`` from its pre-state, memoised."""
    return progress(tf, step.pre, step)


def holds_at_end(tf, state) -> bool:
    """Truth of a residue at the last position of a finite trace."""
    if tf is True or tf is False:
        return tf
    if isinstance(tf, StateAtom):
        return eval_pred(tf.pred, state)
    if isinstance(tf, StepAtom):
        return tf.mode == "all"
    if isinstance(tf, TAnd):
        return holds_at_end(tf.left, state) and holds_at_end(tf.right, state)
    if isinstance(tf, TOr):
        return holds_at_end(tf.left, state) or holds_at_end(tf.right, state)
    if isinstance(tf, (Eventually, Always)):
        return holds_at_end(tf.arg, state)
    raise TypeError(f"not a temporal formula in negation normal form: {tf!r}")


def eval_by_progression(tf, t: Trace) -> bool:
    """Finite-trace evaluation through progression; agrees with ``eval_temporal``."""
    if t.loop is not None:
        raise ValueError("progression evaluation is for finite traces")
    cur = negation_normal(tf)
    for st in t.steps:
        cur = progress_step(cur, st)
    return holds_at_end(cur, t.final)


def residue_holds(residue, t: Trace, pos: int) -> bool:
    if residue is True or residue is False:
        return residue
    return eval_temporal(residue, t, pos)
