"""Builders for the queue and stack specifications.

Operation arguments may be plain values or ``Param`` placeholders; the
latter is how the DSL corpus files are compared against these builders.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .kernel import (
    NULL, TERM, Always, And, AwaitWith, ResourceDecl, Cmp, Conj, ConfigError, EnvAtomic, Eventually,
    Guar, Implies, Iter, Pre, Rely, StateAtom, Terminate, Var, With, always_env,
    append_lit, conj_all, cons_head, eq_primed, eventually, is_empty, len_le, len_lt, lift,
    neq_primed, non_empty, prefix_of, push_front, seq_all, spec, suffix_of,
)

QUEUE = "qu"
STACK = "s"
RES = "res"


@dataclass(frozen=True)
class QueueOps:
    write: Callable
    read: object


@dataclass(frozen=True)
class StackOps:
    push: Callable
    pop: object
    push_fail: object = None
    pop_fail: object = None


def write_post(v):
    return append_lit(QUEUE, lift(v))


def read_post():
    return cons_head(QUEUE, RES)


def queue_spec_srsw() -> QueueOps:
    """Single-reader/single-writer queue with atomic read and write."""

    def write(v):
        return conj_all(
            Rely(suffix_of(QUEUE)),
            Guar(prefix_of(QUEUE)),
            With(QUEUE, spec(QUEUE, write_post(v))),
        )

    read = conj_all(
        Rely(prefix_of(QUEUE)),
        Guar(suffix_of(QUEUE)),
        seq_all(Pre(non_empty(QUEUE)), With(QUEUE, spec([QUEUE, RES], read_post()))),
    )
    return QueueOps(write, read)


def _check_n(n):
    if not isinstance(n, int) or n < 1:
        raise ConfigError(f"queue capacity must be a positive integer, got {n!r}")


def queue_resource(n) -> ResourceDecl:
    """The bounded queue resource: at most ``n`` messages, initially empty."""
    _check_n(n)
    return ResourceDecl(QUEUE, len_le(QUEUE, n), is_empty(QUEUE))


def bounded_queue_await_spec(n) -> QueueOps:
    """Blocking bounded queue written with ``with ... await``."""
    _check_n(n)
    not_full = len_lt(QUEUE, n)

    def write(v):
        return conj_all(
            Rely(suffix_of(QUEUE)),
            Guar(prefix_of(QUEUE)),
            AwaitWith(QUEUE, not_full,
                      seq_all(Pre(not_full), spec(QUEUE, write_post(v)))),
        )

    read = conj_all(
        Rely(prefix_of(QUEUE)),
        Guar(suffix_of(QUEUE)),
        AwaitWith(QUEUE, non_empty(QUEUE),
                  seq_all(Pre(non_empty(QUEUE)), spec([QUEUE, RES], read_post()))),
    )
    return QueueOps(write, read)


def bounded_queue_terminate_spec(n) -> QueueOps:
    """Bounded queue whose blocking is given by termination conditions."""
    _check_n(n)

    def write(v):
        return conj_all(
            Terminate(eventually(len_lt(QUEUE, n))),
            Rely(suffix_of(QUEUE)),
            Guar(prefix_of(QUEUE)),
            With(QUEUE, spec(QUEUE, write_post(v))),
        )

    read = conj_all(
        Terminate(eventually(non_empty(QUEUE))),
        Rely(prefix_of(QUEUE)),
        Guar(suffix_of(QUEUE)),
        With(QUEUE, spec([QUEUE, RES], read_post())),
    )
    return QueueOps(write, read)


def multi_client_terminate_spec(fairness, n) -> QueueOps:
    """Bounded queue for many readers and writers: no relies, and a
    termination condition strengthened for weak (``<>[]``) or strong
    (``[]<>``) fairness."""
    _check_n(n)
    if fairness == "weak":
        cond = lambda p: Eventually(Always(StateAtom(p)))
    elif fairness == "strong":
        cond = lambda p: Always(Eventually(StateAtom(p)))
    else:
        raise ConfigError(f"fairness must be 'weak' or 'strong', got {fairness!r}")

    def write(v):
        return conj_all(
            Terminate(cond(len_lt(QUEUE, n))),
            Guar(prefix_of(QUEUE)),
            With(QUEUE, spec(QUEUE, write_post(v))),
        )

    read = conj_all(
        Terminate(cond(non_empty(QUEUE))),
        Guar(suffix_of(QUEUE)),
        With(QUEUE, spec([QUEUE, RES], read_post())),
    )
    return QueueOps(write, read)


def push_post(v):
    return push_front(STACK, lift(v))


def pop_post():
    # (s != [] => s = [res'] ++ s') and (s = [] => res' = null)
    return And(
        Implies(non_empty(STACK), cons_head(STACK, RES)),
        Implies(is_empty(STACK), Cmp("=", Var(RES, True), lift(NULL))),
    )


def push_success(v):
    return Conj(With(STACK, spec(STACK, push_post(v))), TERM)


def pop_success():
    return Conj(With(STACK, spec([STACK, RES], pop_post())), TERM)


STACK_FAIL = EnvAtomic(neq_primed(STACK))


def stack_explicit_spec() -> StackOps:
    """Stack whose operations may fail any number of times before succeeding."""

    def push(v):
        return seq_all(Pre(_v_not_null(v)), Iter(STACK_FAIL), push_success(v))

    pop = seq_all(Iter(STACK_FAIL), pop_success())
    return StackOps(push, pop, STACK_FAIL, STACK_FAIL)


def _v_not_null(v):
    return Cmp("!=", lift(v), lift(NULL))


QUIESCENT = Eventually(always_env(eq_primed(STACK)))


def stack_terminate_spec() -> StackOps:
    """Stack operations that must terminate once the environment stops
    changing the stack."""

    def push(v):
        return seq_all(
            Pre(_v_not_null(v)),
            Conj(Terminate(QUIESCENT), With(STACK, spec(STACK, push_post(v)))),
        )

    pop = Conj(Terminate(QUIESCENT), With(STACK, spec([STACK, RES], pop_post())))
    return StackOps(push, pop)
