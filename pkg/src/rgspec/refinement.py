"""Bounded refinement and equivalence checking between commands.

``refines(abs, conc)`` holds at a bound when every trace the concrete
command accepts is accepted by the abstract one, or the abstract command
aborts no later than the end of that trace.  A concrete abort at ``i``
needs an abstract abort at some ``j <= i``.

Finite traces are explored as a product of (state, concrete configurations,
abstract configurations), breadth first, so the shortest counterexample is
reported and equal product nodes are visited once.  Lassos are enumerated
depth first on top of the same incremental simulation and decided with the
full ``accepts``.

Results hold at the stated bound only.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from . import kernel as K
from .semantics import Runner, Universe, Verdict, accepts, compile_command
from .traces import ENV, KINDS, BudgetExceeded, Step, Trace


class PreconditionError(ValueError):
    """A law was applied outside its side condition."""


@dataclass(frozen=True)
class CheckConfig:
    decls: tuple
    max_len: int = 4
    include_lassos: bool = False
    lasso_len: int = 4
    # None is an open environment; otherwise every env step satisfies it
    environment: Optional[object] = None
    init: Optional[object] = None
    budget: Optional[int] = None
    # lassos may be searched over a smaller universe than finite traces
    lasso_decls: Optional[tuple] = None

    def __post_init__(self):
        if self.max_len < 0 or self.lasso_len < 0:
            raise K.ConfigError("trace bounds must be non-negative")
        object.__setattr__(self, "decls", tuple(self.decls))
        if self.lasso_decls is not None:
            object.__setattr__(self, "lasso_decls", tuple(self.lasso_decls))

    def describe(self) -> str:
        doms = ", ".join(f"{d.name}:{len(d.domain())}" for d in self.decls)
        out = f"maxLen={self.max_len} states[{doms}]"
        if self.include_lassos:
            out += f" lassoLen={self.lasso_len}"
        return out


@dataclass
class CheckResult:
    status: str  # "pass" | "counterexample" | "budget"
    trace: Optional[Trace] = None
    abstract_verdict: Optional[Verdict] = None
    concrete_verdict: Optional[Verdict] = None
    checked: int = 0
    note: str = ""
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def __str__(self):
        if self.status == "pass":
            return f"pass ({self.checked} checked){' ' + self.note if self.note else ''}"
        if self.status == "budget":
            return f"budget exceeded after {self.checked} checked"
        return (f"counterexample: abstract {self.abstract_verdict}, "
                f"concrete {self.concrete_verdict}\n{self.trace}")


def covers(abstract: Verdict, concrete: Verdict) -> bool:
    """Does the abstract verdict license the concrete one on the same trace?"""
    if concrete.aborted:
        return abstract.aborted and abstract.index <= concrete.index
    if concrete.accepted:
        return abstract.accepted or abstract.aborted
    return True


def _successors(states, env_rel):
    succ = {}
    for a in states:
        out = []
        for kind in KINDS:
            for b in states:
                if kind == ENV and env_rel is not None and not K.eval_rel(env_rel, a, b):
                    continue
                out.append(Step(kind, a, b))
        succ[a] = out
    return succ


def _start_states(decls, init):
    return [s for s in K.enumerate_states(decls) if init is None or K.eval_pred(init, s)]


def _abort_covered(c_now, c_next, a_now, a_next) -> bool:
    if c_now:
        return a_now
    return a_now or a_next


class _Budget:
    def __init__(self, limit):
        self.limit = limit
        self.count = 0

    def tick(self):
        self.count += 1
        if self.limit is not None and self.count > self.limit:
            raise BudgetExceeded(f"more than {self.limit} product nodes", self.count - 1)


def _counterexample(abs_cmd, conc_cmd, t, budget, ma, mc, universe):
    res = CheckResult("counterexample", t, accepts(abs_cmd, t, ma, universe),
                      accepts(conc_cmd, t, mc, universe), budget.count)
    res.info["decls"] = universe.decls
    return res


def _finite_search(abs_cmd, conc_cmd, cfg, budget, ma, mc, ra, rc):
    u = ra.ctx.universe
    succ = _successors(u.states, cfg.environment)
    parent = {}
    queue = deque()

    def trace_of(node):
        steps = []
        while parent[node] is not None:
            node, st = parent[node]
            steps.append(st)
        return Trace(node[0], tuple(reversed(steps)))

    for s0 in _start_states(cfg.decls, cfg.init):
        budget.tick()
        cset, cnow = rc.begin(s0)
        aset, anow = ra.begin(s0)
        node = (s0, cset, aset)
        parent[node] = None
        if anow:
            continue
        if cnow:
            return _counterexample(abs_cmd, conc_cmd, Trace(s0), budget, ma, mc, u)
        if not cset:
            continue
        queue.append((node, 0))

    while queue:
        node, depth = queue.popleft()
        s, cset, aset = node
        if rc.any_done(cset, s) and not ra.any_done(aset, s):
            t = trace_of(node)
            return _counterexample(abs_cmd, conc_cmd, t, budget, ma, mc, u)
        if depth >= cfg.max_len:
            continue
        for st in succ[s]:
            c2, cnow, cnext = rc.advance(cset, st)
            if not (c2 or cnow or cnext):
                continue
            a2, anow, anext = ra.advance(aset, st)
            nxt = (st.post, c2, a2)
            if anow or (anext and not cnow):
                continue
            if cnow or cnext:
                if _abort_covered(cnow, cnext, anow, anext):
                    continue
                base = trace_of(node)
                t = Trace(base.start, base.steps + (st,))
                return _counterexample(abs_cmd, conc_cmd, t, budget, ma, mc, u)
            if not c2:
                continue
            if nxt in parent:
                continue
            budget.tick()
            parent[nxt] = (node, st)
            queue.append((nxt, depth + 1))
    return None


def _lasso_search(abs_cmd, conc_cmd, cfg, budget, ma, mc, ra, rc, memo):
    universe = ra.ctx.universe
    succ = _successors(universe.states, cfg.environment)

    def verdict(cmd, m, t):
        key = (cmd, t)
        v = memo.get(key)
        if v is None:
            v = memo[key] = accepts(cmd, t, m, universe)
        return v

    def check(start, steps, k):
        budget.tick()
        t = Trace(start, steps, k)
        vc = verdict(conc_cmd, mc, t)
        if vc.outcome == "rejected":
            return None
        va = verdict(abs_cmd, ma, t)
        if covers(va, vc):
            return None
        res = CheckResult("counterexample", t, va, vc, budget.count)
        res.info["decls"] = universe.decls
        return res

    def dfs(start, steps, cset, aset):
        s = steps[-1].post if steps else start
        for k, st in enumerate(steps):
            if st.pre == s:
                found = check(start, steps, k)
                if found is not None:
                    return found
        if len(steps) >= cfg.lasso_len:
            return None
        for st in succ[s]:
            c2, cnow, cnext = rc.advance(cset, st)
            # concrete aborts and deaths on a prefix are settled by the finite search
            if cnow or cnext or not c2:
                continue
            a2, anow, anext = ra.advance(aset, st)
            if anow or anext:
                continue
            found = dfs(start, steps + (st,), c2, a2)
            if found is not None:
                return found
        return None

    for s0 in _start_states(universe.decls, cfg.init):
        cset, cnow = rc.begin(s0)
        aset, anow = ra.begin(s0)
        if cnow or anow or not cset:
            continue
        found = dfs(s0, (), cset, aset)
        if found is not None:
            return found
    return None


def refines(abs_cmd, conc_cmd, cfg: CheckConfig, memo: Optional[dict] = None) -> CheckResult:
    """Check ``abs_cmd ⊑ conc_cmd`` at the bound given by ``cfg``.

    ``memo`` caches lasso verdicts; share one dict between checks with the
    same configuration (both directions of an equivalence, say).
    """
    memo = {} if memo is None else memo
    budget = _Budget(cfg.budget)
    ma, mc = compile_command(abs_cmd), compile_command(conc_cmd)
    # prefix simulation only needs the lighter finite-run machines
    fa, fc = compile_command(abs_cmd, finite=True), compile_command(conc_cmd, finite=True)
    try:
        u = Universe(cfg.decls)
        found = _finite_search(abs_cmd, conc_cmd, cfg, budget, ma, mc,
                               Runner(fa, u), Runner(fc, u))
        if found is None and cfg.include_lassos:
            if cfg.lasso_decls is not None:
                u = Universe(cfg.lasso_decls)
            found = _lasso_search(abs_cmd, conc_cmd, cfg, budget, ma, mc,
                                  Runner(fa, u), Runner(fc, u), memo)
    except BudgetExceeded as exc:
        return CheckResult("budget", checked=exc.count)
    if found is not None:
        return found
    return CheckResult("pass", checked=budget.count, note=f"validated at {cfg.describe()}")


def equivalent(c1, c2, cfg: CheckConfig) -> CheckResult:
    """Refinement in both directions; ``info["direction"]`` names the one
    that produced the result."""
    memo = {}
    fwd = refines(c1, c2, cfg, memo)
    if not fwd.passed:
        fwd.info["direction"] = "first refines second"
        return fwd
    back = refines(c2, c1, cfg, memo)
    back.info["direction"] = "second refines first"
    back.checked += fwd.checked
    return back


# ---------------------------------------------------------------------------
# Laws and derivations


def law_rely_with(r, d, c):
    """The two sides of the rely-with law."""
    lhs = K.Conj(K.Rely(r), K.With(d, c))
    rhs = K.With(d, K.Conj(K.Rely(K.And(r, K.eq_primed(d))), c))
    return lhs, rhs


def law_guar_with(gd, gx, d, c):
    """The two sides of the guar-with law, after checking its side condition."""
    extra = K.expr_vars(gd) - {d}
    if extra:
        raise PreconditionError(f"guarantee on {d} also mentions {sorted(extra)}")
    if d in K.expr_vars(gx):
        raise PreconditionError(f"remaining guarantee mentions the resource {d}")
    lhs = K.Conj(K.Guar(K.And(gd, gx)), K.With(d, c))
    rhs = K.With(d, K.Conj(K.Guar(gx), K.Conj(K.spec((), gd), c)))
    return lhs, rhs


def check_law_rely_with(r, d, c, cfg: CheckConfig) -> CheckResult:
    lhs, rhs = law_rely_with(r, d, c)
    res = refines(lhs, rhs, cfg)
    reverse = refines(rhs, lhs, cfg)
    res.info["reverse"] = reverse.status
    return res


def check_law_guar_with(gd, gx, d, c, cfg: CheckConfig) -> CheckResult:
    lhs, rhs = law_guar_with(gd, gx, d, c)
    return refines(lhs, rhs, cfg)


_REFINES = ("⊑", "<=", "refines")
_EQUALS = ("=", "==", "equiv")


def check_derivation_chain(steps, cfg: CheckConfig) -> list:
    """One result per ``(lhs, relation, rhs, note)`` step."""
    out = []
    for lhs, rel, rhs, note in steps:
        if rel in _REFINES:
            res = refines(lhs, rhs, cfg)
        elif rel in _EQUALS:
            res = equivalent(lhs, rhs, cfg)
        else:
            raise K.ConfigError(f"unknown derivation relation {rel!r}")
        res.info["step"] = note
        res.info["relation"] = "=" if rel in _EQUALS else "⊑"
        out.append(res)
    return out


def check_stability(p, r, decls) -> CheckResult:
    """Is ``p`` preserved by every ``r`` step?  A failure is one env step."""
    states = K.enumerate_states(decls)
    n = 0
    for a in states:
        if not K.eval_pred(p, a):
            continue
        for b in states:
            n += 1
            if K.eval_rel(r, a, b) and not K.eval_pred(p, b):
                return CheckResult("counterexample", Trace.of([Step(ENV, a, b)]), checked=n)
    return CheckResult("pass", checked=n)


__all__ = [
    "CheckConfig", "CheckResult", "PreconditionError", "covers", "refines",
    "equivalent", "law_rely_with", "law_guar_with", "check_law_rely_with",
    "check_law_guar_with", "check_derivation_chain", "check_stability",
]
