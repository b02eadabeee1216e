"""Named checks, addressable from the command line.

Each check takes an option dict (defaults merged with user settings) and
returns an ``Outcome``.  A failing outcome carries a counterexample record
that ``replay`` can re-run without the registry: declarations, commands and
trace are all stored as text.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import casestudies as CS
from . import dsl
from . import kernel as K
from . import specs as S
from .refinement import (CheckConfig, CheckResult, check_derivation_chain, check_law_guar_with,
                         check_law_rely_with, check_stability, law_guar_with, law_rely_with,
                         refines)
from .semantics import Universe, accepts, partial_accepts
from .traces import ENV, Step, Trace, parse_trace, serialize


class OptionError(ValueError):
    """A configuration value has the wrong form."""


@dataclass
class Outcome:
    check: str
    status: str  # "pass" | "fail" | "error"
    checked: int = 0
    details: list = field(default_factory=list)
    counterexample: Optional[dict] = None
    config: dict = field(default_factory=dict)
    budget_exceeded: bool = False
    wall_time: float = 0.0

    def record(self) -> dict:
        return {
            "check": self.check,
            "config": {k: _show(v) for k, v in sorted(self.config.items())},
            "status": self.status,
            "budget_exceeded": self.budget_exceeded,
            "checked": self.checked,
            "counterexample": self.counterexample,
            "details": self.details,
            "wall_time": round(self.wall_time, 3),
        }


def _show(v):
    if isinstance(v, tuple):
        return ",".join(_show(x) for x in v)
    if v is None:
        return "null"
    return v


# ---------------------------------------------------------------------------
# Options


def parse_values(text) -> tuple:
    if isinstance(text, tuple):
        return text
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if part == "null":
            out.append(None)
        elif part:
            try:
                out.append(int(part))
            except ValueError:
                raise OptionError(f"not a value: {part!r}") from None
    if not out:
        raise OptionError("empty value list")
    return tuple(out)


def parse_ints(text) -> tuple:
    vals = parse_values(text)
    if any(v is None or v < 0 for v in vals):
        raise OptionError(f"expected non-negative integers, got {text!r}")
    return vals


def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise OptionError(f"not a boolean: {text!r}")


def _int(opts, key) -> int:
    vals = parse_ints(opts[key])
    if len(vals) != 1:
        raise OptionError(f"{key} takes a single integer")
    return vals[0]


def _opt_int(opts, key) -> Optional[int]:
    if opts.get(key) in (None, "", "none"):
        return None
    return _int(opts, key)


def parse_scenario(text) -> list:
    """``push(1); pop | push(2)`` -> per-thread lists of operations."""
    threads = []
    for part in str(text).split("|"):
        ops = []
        for op in part.split(";"):
            op = op.strip()
            if not op:
                continue
            if "(" in op:
                if not op.endswith(")"):
                    raise OptionError(f"bad operation {op!r}")
                name, arg = op[:-1].split("(", 1)
                ops.append((name.strip(), parse_values(arg)[0]))
            else:
                ops.append(op)
        if not ops:
            raise OptionError(f"thread with no operations in {text!r}")
        threads.append(ops)
    return threads


# ---------------------------------------------------------------------------
# Counterexample records


def _decl_lines(decls) -> list:
    return dsl.format_module(dsl.Module(decls=tuple(decls))).splitlines()


def refinement_record(res: CheckResult, abstract, concrete) -> dict:
    return {
        "kind": "refinement",
        "decls": _decl_lines(res.info["decls"]),
        "abstract": dsl.format_command(abstract),
        "concrete": dsl.format_command(concrete),
        "trace": serialize(res.trace),
        "verdicts": {"abstract": str(res.abstract_verdict),
                     "concrete": str(res.concrete_verdict)},
    }


def _verdicts(cmd_text, decls, trace, partial=False) -> dict:
    cmd = dsl.parse_command(cmd_text, [d.name for d in decls])
    u = Universe(decls)
    out = {"verdict": str(accepts(cmd, trace, universe=u))}
    if partial:
        out["partial"] = partial_accepts(cmd, trace, universe=u)
    return out


def replay(record: dict) -> dict:
    """Recompute the verdicts of a counterexample record."""
    kind = record["kind"]
    if kind == "stability":
        decls = dsl.parse_module("\n".join(record["decls"])).decls
        names = [d.name for d in decls]
        p = dsl.parse_expr(record["pred"], names)
        r = dsl.parse_expr(record["rel"], names)
        st = parse_trace(record["trace"]).steps[0]
        return {"pre": K.eval_pred(p, st.pre), "rel": K.eval_rel(r, st.pre, st.post),
                "post": K.eval_pred(p, st.post)}
    decls = dsl.parse_module("\n".join(record["decls"])).decls
    trace = parse_trace(record["trace"])
    if kind == "refinement":
        return {"abstract": _verdicts(record["abstract"], decls, trace)["verdict"],
                "concrete": _verdicts(record["concrete"], decls, trace)["verdict"]}
    if kind == "conformance":
        v = _verdicts(record["spec"], decls, trace, partial=not record["complete"])
        out = {"spec": v["verdict"]}
        if "partial" in v:
            out["partial"] = v["partial"]
        return out
    raise OptionError(f"unknown counterexample kind {kind!r}")


# ---------------------------------------------------------------------------
# Registry


@dataclass(frozen=True)
class CheckSpec:
    name: str
    summary: str
    run: Callable
    defaults: dict


REGISTRY: dict = {}


def register(name, summary, **defaults):
    def wrap(fn):
        REGISTRY[name] = CheckSpec(name, summary, fn, defaults)
        return fn
    return wrap


def run_check(name, settings=None) -> Outcome:
    if name not in REGISTRY:
        raise KeyError(name)
    spec = REGISTRY[name]
    opts = dict(spec.defaults)
    for k, v in (settings or {}).items():
        if k not in opts:
            raise OptionError(f"{name} has no option {k!r}; options: {', '.join(sorted(opts))}")
        opts[k] = v
    t0 = time.perf_counter()
    out = spec.run(opts)
    out.check = name
    out.config = opts
    out.wall_time = time.perf_counter() - t0
    return out


class _Collect:
    """Fold CheckResults into one outcome; the first failure wins."""

    def __init__(self):
        self.out = Outcome("", "pass")

    def add(self, label, res: CheckResult, abstract=None, concrete=None) -> bool:
        self.out.checked += res.checked
        if res.status == "budget":
            self.out.status, self.out.budget_exceeded = "error", True
            self.out.details.append(f"{label}: budget exceeded after {res.checked}")
            return False
        if res.passed:
            self.out.details.append(f"{label}: pass ({res.checked} checked) {res.note}".rstrip())
            return True
        self.out.status = "fail"
        self.out.details.append(f"{label}: counterexample")
        if abstract is not None:
            self.out.counterexample = refinement_record(res, abstract, concrete)
        return False


def _qu(values, cap):
    return K.seq_var(S.QUEUE, values, cap)


def _with_res(decls, values):
    vals = tuple(dict.fromkeys((None,) + tuple(v for v in values if v is not None)))
    return tuple(decls) + (K.scalar_var(S.RES, vals),)


def _args(values) -> tuple:
    # operation arguments range over the value universe minus null
    return tuple(v for v in values if v is not None)


# Laws -----------------------------------------------------------------------


def _law_matrix(opts, run_one):
    col = _Collect()
    values = parse_values(opts["values"])
    for cap in parse_ints(opts["cap"]):
        for max_len in parse_ints(opts["max_len"]):
            cfg = CheckConfig((_qu(values, cap),), max_len=max_len, budget=_opt_int(opts, "budget"))
            for v in _args(values):
                label = f"cap={cap} maxLen={max_len} v={v}"
                if not run_one(cfg, v, col, label):
                    return col.out
    return col.out


def _write_body(v):
    return K.spec(S.QUEUE, S.write_post(v))


@register("law-rely-with", "rely-with law on the write operation over the law matrix",
          values="null,1,2", cap="1,2,3", max_len="4,6", budget=None)
def _law_rely(opts):
    def one(cfg, v, col, label):
        res = check_law_rely_with(K.suffix_of(S.QUEUE), S.QUEUE, _write_body(v), cfg)
        lhs, rhs = law_rely_with(K.suffix_of(S.QUEUE), S.QUEUE, _write_body(v))
        ok = col.add(label, res, lhs, rhs)
        if ok:
            col.out.details[-1] += f" [reverse direction: {res.info['reverse']}]"
        return ok

    return _law_matrix(opts, one)


@register("law-guar-with", "guar-with law on the write operation over the law matrix",
          values="null,1,2", cap="1,2,3", max_len="4,6", budget=None)
def _law_guar(opts):
    def one(cfg, v, col, label):
        res = check_law_guar_with(K.prefix_of(S.QUEUE), K.TRUE, S.QUEUE, _write_body(v), cfg)
        lhs, rhs = law_guar_with(K.prefix_of(S.QUEUE), K.TRUE, S.QUEUE, _write_body(v))
        return col.add(label, res, lhs, rhs)

    return _law_matrix(opts, one)


# Derivations ----------------------------------------------------------------


def rely_chain(v) -> list:
    q, w = S.QUEUE, _write_body(v)
    start = K.Conj(K.Rely(K.suffix_of(q)), K.With(q, w))
    mid = K.With(q, K.Conj(K.Rely(K.And(K.suffix_of(q), K.eq_primed(q))), w))
    end = K.With(q, K.Conj(K.Rely(K.eq_primed(q)), w))
    return [(start, "⊑", mid, "rely-with law"),
            (mid, "=", end, "strengthened rely implies the suffix rely")]


def guar_chain(v) -> list:
    q, w = S.QUEUE, _write_body(v)
    start = K.Conj(K.Guar(K.prefix_of(q)), K.With(q, w))
    law = K.With(q, K.Conj(K.Guar(K.TRUE), K.Conj(K.spec((), K.prefix_of(q)), w)))
    merged = K.With(q, K.spec(q, K.And(K.prefix_of(q), S.write_post(v))))
    end = K.With(q, w)
    return [(start, "⊑", law, "guar-with law"),
            (law, "=", merged, "trivial guarantee dropped, specifications merged"),
            (merged, "=", end, "append implies the prefix guarantee")]


def combined_chain(v) -> list:
    q, w = S.QUEUE, _write_body(v)
    start = K.conj_all(K.Rely(K.suffix_of(q)), K.Guar(K.prefix_of(q)), K.With(q, w))
    end = K.With(q, K.Conj(K.Rely(K.eq_primed(q)), w))
    return [(start, "⊑", end, "guar-with then rely-with")]


def _chain_check(chain_of):
    def run(opts):
        col = _Collect()
        values = parse_values(opts["values"])
        cfg = CheckConfig((_qu(values, _int(opts, "cap")),), max_len=_int(opts, "max_len"),
                          budget=_opt_int(opts, "budget"))
        for v in _args(values):
            steps = chain_of(v)
            results = check_derivation_chain(steps, cfg)
            for k, (res, (lhs, rel, rhs, note)) in enumerate(zip(results, steps), 1):
                label = f"v={v} step {k} ({res.info['relation']}, {note})"
                if not col.add(label, res, lhs, rhs):
                    if res.info.get("direction") == "second refines first":
                        # the record names the pair as checked
                        col.out.counterexample = refinement_record(res, rhs, lhs)
                    return col.out
        return col.out
    return run


_CHAIN_DEFAULTS = dict(values="null,1,2", cap=3, max_len=6, budget=None)
register("derivation-write-rely", "rely derivation chain for write",
         **_CHAIN_DEFAULTS)(_chain_check(rely_chain))
register("derivation-write-guar", "guarantee derivation chain for write",
         **_CHAIN_DEFAULTS)(_chain_check(guar_chain))
register("derivation-write-combined", "combined rely/guarantee refinement of write",
         **_CHAIN_DEFAULTS)(_chain_check(combined_chain))


# Equivalences ---------------------------------------------------------------


def _equiv_config(opts, var):
    values = parse_values(opts["values"])
    lvalues = parse_values(opts["lasso_values"])
    fin = _with_res((K.seq_var(var, values, _int(opts, "cap")),), values)
    las = _with_res((K.seq_var(var, lvalues, _int(opts, "lasso_cap")),), lvalues)
    return fin, las


def _pairwise(col, pairs, cfg):
    for label, a, b in pairs:
        memo = {}
        for x, y, tag in ((a, b, "first refines second"), (b, a, "second refines first")):
            res = refines(x, y, cfg, memo)
            if not col.add(f"{label} ({tag})", res, x, y):
                return False
    return True


@register("queue-await-equiv-terminate",
          "blocking-await queue operations equal their termination-condition versions",
          n=2, values="1,2", cap=3, max_len=4, lassos=True, lasso_values="1", lasso_cap=2,
          lasso_len=4, args="1", budget=None)
def _queue_equiv(opts):
    n = _int(opts, "n")
    fin, las = _equiv_config(opts, S.QUEUE)
    res = S.queue_resource(n)
    cfg = CheckConfig(fin, max_len=_int(opts, "max_len"), include_lassos=parse_bool(opts["lassos"]),
                      lasso_len=_int(opts, "lasso_len"), lasso_decls=las,
                      init=res.invariant, environment=res.preserved(),
                      budget=_opt_int(opts, "budget"))
    aw, te = S.bounded_queue_await_spec(n), S.bounded_queue_terminate_spec(n)
    pairs = [(f"write({v})", res.discipline(aw.write(v)), res.discipline(te.write(v)))
             for v in parse_values(opts["args"])]
    pairs.append(("read", res.discipline(aw.read), res.discipline(te.read)))
    col = _Collect()
    _pairwise(col, pairs, cfg)
    return col.out


@register("stack-explicit-equiv-terminate",
          "explicit-failure stack operations equal their termination-condition versions",
          values="1,2", cap=3, max_len=4, lassos=True, lasso_values="1", lasso_cap=2,
          lasso_len=4, args="1", budget=None)
def _stack_equiv(opts):
    fin, las = _equiv_config(opts, S.STACK)
    cfg = CheckConfig(fin, max_len=_int(opts, "max_len"), include_lassos=parse_bool(opts["lassos"]),
                      lasso_len=_int(opts, "lasso_len"), lasso_decls=las,
                      budget=_opt_int(opts, "budget"))
    ex, te = S.stack_explicit_spec(), S.stack_terminate_spec()
    pairs = [(f"push({v})", ex.push(v), te.push(v)) for v in parse_values(opts["args"])]
    pairs.append(("pop", ex.pop, te.pop))
    col = _Collect()
    _pairwise(col, pairs, cfg)
    return col.out


# Stability ------------------------------------------------------------------


def _stability(p, r, decls, expect_fail=False, expected=None):
    res = check_stability(p, r, decls)
    out = Outcome("", "pass", checked=res.checked)
    record = None
    if not res.passed:
        record = {"kind": "stability", "decls": _decl_lines(decls),
                  "pred": dsl.format_expr(p), "rel": dsl.format_expr(r),
                  "trace": serialize(res.trace),
                  "verdicts": {"pre": True, "rel": True, "post": False}}
        st = res.trace.steps[0]
        out.details.append(f"not stable: {K.format_state(st.pre)} -> {K.format_state(st.post)}")
    if expect_fail:
        got = None if res.passed else (res.trace.steps[0].pre, res.trace.steps[0].post)
        if got is None or (expected is not None and got != expected):
            out.status = "fail"
            out.details.append(f"expected the counterexample {expected}, got {got}")
        else:
            out.counterexample = record
            out.details.append("expected counterexample found")
    elif record is not None:
        out.status, out.counterexample = "fail", record
    else:
        out.details.append(f"stable over {res.checked} state pairs")
    return out


@register("stability-nonempty-prefix", "qu != [] is stable under qu prefixof qu'",
          values="null,1,2", cap=3)
def _stab1(opts):
    decls = (_qu(parse_values(opts["values"]), _int(opts, "cap")),)
    return _stability(K.non_empty(S.QUEUE), K.prefix_of(S.QUEUE), decls)


@register("stability-capacity-suffix", "#qu < n is stable under qu' suffixof qu",
          values="null,1,2", cap=3, n=2)
def _stab2(opts):
    decls = (_qu(parse_values(opts["values"]), _int(opts, "cap")),)
    return _stability(K.len_lt(S.QUEUE, _int(opts, "n")), K.suffix_of(S.QUEUE), decls)


@register("stability-negative-control",
          "qu != [] is not stable under qu' suffixof qu; expects [1] -> []",
          values="1", cap=1)
def _stab3(opts):
    decls = (_qu(parse_values(opts["values"]), _int(opts, "cap")),)
    first = parse_values(opts["values"])[0]
    expected = (K.State({S.QUEUE: (first,)}), K.State({S.QUEUE: ()}))
    return _stability(K.non_empty(S.QUEUE), K.suffix_of(S.QUEUE), decls,
                      expect_fail=True, expected=expected)


# Fairness -------------------------------------------------------------------


def alternating_lasso(values=(1,)) -> Trace:
    """The environment fills and empties the queue forever; the reader
    only stutters."""
    v = values[0]
    empty = K.State({S.QUEUE: (), S.RES: None})
    full = K.State({S.QUEUE: (v,), S.RES: None})
    return Trace(empty, (Step(ENV, empty, full), Step(ENV, full, empty)), 0)


@register("fairness-weak-strong",
          "strong-fairness read rejects stuttering on the alternating lasso, weak accepts; "
          "weak refines strong",
          n=2, values="1", cap=2, max_len=4, lassos=True, lasso_len=4, budget=None)
def _fairness(opts):
    n = _int(opts, "n")
    values = parse_values(opts["values"])
    decls = _with_res((_qu(values, _int(opts, "cap")),), values)
    weak, strong = S.multi_client_terminate_spec("weak", n), S.multi_client_terminate_spec("strong", n)
    t = alternating_lasso(_args(values))
    u = Universe(decls)
    vw, vs = accepts(weak.read, t, universe=u), accepts(strong.read, t, universe=u)
    col = _Collect()
    col.out.details.append(f"alternating lasso: weak {vw}, strong {vs}")
    if not (vw.accepted and vs.outcome == "rejected"):
        col.out.status = "fail"
        col.out.counterexample = {
            "kind": "refinement", "decls": _decl_lines(decls),
            "abstract": dsl.format_command(weak.read), "concrete": dsl.format_command(strong.read),
            "trace": serialize(t), "verdicts": {"abstract": str(vw), "concrete": str(vs)}}
        return col.out
    cfg = CheckConfig(decls, max_len=_int(opts, "max_len"), include_lassos=parse_bool(opts["lassos"]),
                      lasso_len=_int(opts, "lasso_len"), budget=_opt_int(opts, "budget"))
    for label, a, b in (("read", weak.read, strong.read),
                        *((f"write({v})", weak.write(v), strong.write(v)) for v in _args(values))):
        if not col.add(f"{label}: weak refines strong", refines(a, b, cfg), a, b):
            break
    return col.out


# Case studies ---------------------------------------------------------------


def _conformance(lts, spec_kind, n, opts, expect_fail=False):
    exp = CS.explore(lts, max_len=_int(opts, "explore_len"), budget=_opt_int(opts, "budget"),
                     visits=_int(opts, "visits"))
    spec_of = CS.default_spec_of(spec_kind, n)
    res = CS.conformance(exp, spec_of)
    out = Outcome("", "pass", checked=res.checked)
    out.details.append(f"{len(exp.runs)} runs explored ({sum(r.fair for r in exp.runs)} fair)")
    record = None
    if not res.passed:
        op = next(o for o in lts.ops if str(o) == res.info["op"])
        record = {"kind": "conformance", "decls": _decl_lines(res.info["decls"]),
                  "operation": res.info["op"], "schedule": list(res.info["labels"]),
                  "spec": dsl.format_command(spec_of(op)), "trace": serialize(res.trace),
                  "complete": res.info["complete"]}
        record["verdicts"] = replay(record)
        out.details.append(f"{res.info['op']} does not conform; schedule: "
                           + " ".join(res.info["labels"]))
    if expect_fail:
        if record is None:
            out.status = "fail"
            out.details.append("expected a counterexample, none found")
        else:
            out.counterexample = record
            out.details.append("expected counterexample found")
    elif record is not None:
        out.status, out.counterexample = "fail", record
    else:
        out.details.append(res.note)
    return out


def _ops(threads):
    out = []
    for ops in threads:
        out.append([o if isinstance(o, str) else tuple(o) for o in ops])
    return out


_EXPLORE = dict(explore_len=24, visits=1, budget=None)


@register("conformance-treiber", "Treiber stack conforms to the explicit-failure stack spec",
          threads="push(1) | push(2) | pop", spec="stack-explicit", **_EXPLORE)
def _conf_treiber(opts):
    lts = CS.treiber_impl(_ops(parse_scenario(opts["threads"])))
    return _conformance(lts, opts["spec"], 2, opts)


@register("conformance-lockqueue", "lock-based queue conforms to the single-reader/writer spec",
          threads="write(1); write(2) | read; read", n=2, spec="queue-srsw",
          **dict(_EXPLORE, visits=3))
def _conf_lockqueue(opts):
    n = _int(opts, "n")
    lts = CS.lock_queue_impl(n, _ops(parse_scenario(opts["threads"])))
    return _conformance(lts, opts["spec"], n, opts)


@register("mutation-pop-unchecked",
          "Treiber pop without the empty check is caught (expects a counterexample)",
          threads="push(1) | pop | pop", spec="stack-explicit", **_EXPLORE)
def _mut_pop(opts):
    lts = CS.treiber_impl(_ops(parse_scenario(opts["threads"])), pop_checks_empty=False)
    return _conformance(lts, opts["spec"], 2, opts, expect_fail=True)


@register("mutation-write-unchecked",
          "queue write without the capacity check is caught (expects a counterexample)",
          threads="write(1); write(2)", n=1, spec="queue-await", **_EXPLORE)
def _mut_write(opts):
    n = _int(opts, "n")
    lts = CS.lock_queue_impl(n, _ops(parse_scenario(opts["threads"])), write_checks_capacity=False)
    return _conformance(lts, opts["spec"], n, opts, expect_fail=True)


@register("final-states-treiber", "two concurrent pushes end in exactly [1,2] or [2,1]",
          threads="push(1) | push(2)", expected="1,2;2,1", **_EXPLORE)
def _final_states(opts):
    lts = CS.treiber_impl(_ops(parse_scenario(opts["threads"])))
    exp = CS.explore(lts, max_len=_int(opts, "explore_len"), budget=_opt_int(opts, "budget"),
                     visits=_int(opts, "visits"))
    finals = {r.trace.final[S.STACK] for r in exp.complete()}
    expected = {parse_values(x) for x in str(opts["expected"]).split(";")}
    show = sorted(K.format_value(f) for f in finals)
    out = Outcome("", "pass" if finals == expected else "fail", checked=len(exp.runs))
    out.details.append(f"{len(exp.complete())} complete runs; final stacks {', '.join(show)}")
    return out


# Generic refinement over a module --------------------------------------------


def _module(ref):
    if os.path.exists(ref):
        with open(ref) as fh:
            return dsl.parse_module(fh.read())
    return dsl.load_corpus(ref)


def _generic(opts, both):
    mod = _module(opts["module"])
    if opts["abstract"] is None or opts["concrete"] is None:
        raise OptionError("abstract and concrete commands are required")
    names = [d.name for d in mod.decls]
    a = dsl.parse_command(opts["abstract"], names, consts=mod.consts, defs=mod.defs)
    c = dsl.parse_command(opts["concrete"], names, consts=mod.consts, defs=mod.defs)
    cfg = CheckConfig(mod.decls, max_len=_int(opts, "max_len"),
                      include_lassos=parse_bool(opts["lassos"]), lasso_len=_int(opts, "lasso_len"),
                      budget=_opt_int(opts, "budget"))
    col = _Collect()
    if both:
        _pairwise(col, [("commands", a, c)], cfg)
    else:
        col.add("abstract refines concrete", refines(a, c, cfg), a, c)
    return col.out


_GENERIC = dict(module="queue_srsw", abstract=None, concrete=None, max_len=4, lassos=False,
                lasso_len=3, budget=None)
register("refines", "abstract refines concrete, commands given in module syntax",
         **_GENERIC)(lambda o: _generic(o, False))
register("equivalent", "refinement both ways, commands given in module syntax",
         **_GENERIC)(lambda o: _generic(o, True))


__all__ = ["REGISTRY", "Outcome", "OptionError", "run_check", "replay", "parse_scenario",
           "rely_chain", "guar_chain", "combined_chain", "alternating_lasso"]
