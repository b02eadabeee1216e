"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The lines are repeated in the terminal summary under "acceptance criteria".
"""

import time

from rgspec import checks
from rgspec import kernel as K
from rgspec import specs as S
from rgspec.kernel import Always, Conj, Eventually, Guar, Rely, StateAtom, StepAtom, TNot, With
from rgspec.semantics import Universe, accepts, compile_command, iteration_counts, partial_accepts
from rgspec.temporal import eval_temporal
from rgspec.traces import ENV, Trace, enumerate_lassos, enumerate_traces

from oracles import treiber_finals

MIN_TRACES = 10_000


def _run(names):
    outs = [checks.run_check(n, {}) for n in names]
    ok = all(o.status == "pass" for o in outs)
    detail = "; ".join(f"{o.check} {o.status} ({o.checked} checked, {o.wall_time:.1f}s)"
                       for o in outs)
    return ok, detail, outs


def test_law_suite(criterion):
    ok, detail, _ = _run(["law-rely-with", "law-guar-with"])
    assert criterion("law suite", ok, detail)


def test_derivation_suite(criterion):
    ok, detail, _ = _run(["derivation-write-rely", "derivation-write-guar",
                          "derivation-write-combined"])
    assert criterion("derivation suite", ok, detail)


def test_equivalence_suite(criterion):
    ok, detail, _ = _run(["queue-await-equiv-terminate", "stack-explicit-equiv-terminate"])
    assert criterion("equivalence suite", ok, detail)


def test_stability_suite(criterion):
    ok, detail, outs = _run(["stability-nonempty-prefix", "stability-capacity-suffix",
                             "stability-negative-control"])
    cx = outs[2].counterexample
    expected = cx is not None and cx["trace"].splitlines()[0] == "env qu=[1] -> qu=[]"
    assert criterion("stability suite", ok and expected, detail)


def test_fairness_distinction(criterion):
    ok, detail, _ = _run(["fairness-weak-strong"])
    assert criterion("fairness distinction", ok, detail)


def test_conformance_suite(criterion):
    ok, detail, _ = _run(["conformance-treiber", "conformance-lockqueue",
                          "mutation-pop-unchecked", "mutation-write-unchecked"])
    assert criterion("conformance suite", ok, detail)


def test_final_state_oracle(criterion):
    oracle = treiber_finals((1, 2))
    out = checks.run_check("final-states-treiber", {})
    ok = out.status == "pass" and oracle == {(1, 2), (2, 1)}
    assert criterion("final-state oracle", ok,
                     f"oracle {sorted(oracle)}; {out.details[0]}")


def test_infeasibility(criterion):
    decls = (K.seq_var("s", (1,), 2),)
    push = S.stack_explicit_spec().push(1)
    loop = push.second.first
    start = time.perf_counter()
    lassos = checked = violations = 0
    for t in enumerate_lassos(decls, 4):
        changing = [i for i, st in enumerate(t.steps) if st.kind == ENV and st.pre != st.post]
        if any(i >= t.loop for i in changing):
            continue
        lassos += 1
        k = changing[-1] + 1 if changing else 0
        if accepts(push, t).accepted:
            violations += 1
        # every finite cut of the unrolling, including those past the stem
        steps = list(t.unrolled_steps(len(t.steps) + 2 * (len(t.steps) - t.loop)))
        for n in range(len(steps) + 1):
            checked += 1
            if any(c > k for c in iteration_counts(push, loop, Trace(t.start, tuple(steps[:n])))):
                violations += 1
    ok = violations == 0 and lassos > 0
    assert criterion("infeasibility", ok,
                     f"{lassos} quiescent lassos, {checked} cuts, {violations} violations, "
                     f"{time.perf_counter() - start:.1f}s")


# ---------------------------------------------------------------------------
# semantics algebra over one shared enumeration

DECLS = (K.seq_var("qu", (1,), 2),)
TRACES = list(enumerate_traces(DECLS, 5)) + list(enumerate_lassos(DECLS, 4))
UNIVERSE = Universe(DECLS)

A = Rely(K.suffix_of("qu"))
B = Guar(K.prefix_of("qu"))
C = K.spec("qu", K.append_lit("qu", 1))
D = With("qu", K.spec("qu", K.prefix_of("qu")))
E = K.Terminate(K.eventually(K.non_empty("qu")))


def _verdicts(cmd):
    m = compile_command(cmd)
    return [accepts(cmd, t, m, UNIVERSE) for t in TRACES]


def _equal(pairs):
    bad = 0
    for x, y in pairs:
        bad += sum(1 for u, v in zip(_verdicts(x), _verdicts(y)) if u != v)
    return bad


def test_semantics_algebra(criterion):
    assert len(TRACES) >= MIN_TRACES
    start = time.perf_counter()
    results = {}
    results["spec-merge"] = _equal([
        (Conj(K.spec([], q1), K.spec("qu", q2)), K.spec("qu", K.And(q1, q2)))
        for q1, q2 in [(K.prefix_of("qu"), K.len_le("qu", 1)),
                       (K.suffix_of("qu"), K.TRUE)]])
    results["conj commutative"] = _equal(
        [(Conj(x, y), Conj(y, x)) for x, y in [(A, C), (B, D), (C, E), (A, E)]])
    results["conj associative"] = _equal(
        [(Conj(Conj(x, y), z), Conj(x, Conj(y, z))) for x, y, z in [(A, B, C), (B, D, E)]])
    results["guar(true) identity"] = _equal([(Conj(Guar(K.TRUE), x), x) for x in (A, C, D, E)])

    bad = 0
    for cmd in (Conj(A, C), D):
        fm = compile_command(cmd, finite=True)
        for t, v in zip(TRACES, _verdicts(cmd)):
            if v.accepted:
                cut = len(t.steps)
                bad += sum(1 for n in range(cut + 1)
                           if not partial_accepts(cmd, t.prefix(n), fm, UNIVERSE))
    results["prefix closure"] = bad

    bad = 0
    for p in (StateAtom(K.non_empty("qu")), StepAtom("env", K.neq_primed("qu"), "some")):
        for t in TRACES:
            bad += eval_temporal(TNot(Eventually(p)), t) != eval_temporal(Always(TNot(p)), t)
            bad += eval_temporal(TNot(Always(p)), t) != eval_temporal(Eventually(TNot(p)), t)
    results["eventually/always duality"] = bad

    ok = all(v == 0 for v in results.values())
    detail = ", ".join(f"{k} {v}" for k, v in results.items())
    assert criterion("semantics algebra", ok,
                     f"{len(TRACES)} traces; violations: {detail}; "
                     f"{time.perf_counter() - start:.1f}s")
