import pytest
from hypothesis import given, settings, strategies as st

from rgspec import kernel as K
from rgspec.kernel import (Always, Eventually, StateAtom, StepAtom, TAnd, TNot, TOr, eval_pred,
                           eval_rel)
from rgspec.temporal import (eval_by_progression, eval_temporal, negation_normal, truth_table)
from rgspec.traces import ENV, PGM, Step, Trace, enumerate_lassos, enumerate_traces

QU = K.seq_var("qu", (1,), 1)
DECLS = (QU,)
FINITE = list(enumerate_traces(DECLS, 3))
LASSOS = list(enumerate_lassos(DECLS, 3))


def S(**kw):
    return K.State(kw)


# ---------------------------------------------------------------------------
# oracle: direct recursion over positions of the infinite unrolling


def oracle(tf, t: Trace, i: int = 0) -> bool:
    if t.loop is None:
        return _finite(tf, t, i)
    period = len(t.steps) - t.loop

    def norm(j):
        return j if j < len(t.steps) else t.loop + (j - t.loop) % period

    def ev(f, j):
        j = norm(j)
        if isinstance(f, StateAtom):
            return eval_pred(f.pred, t.state_at(j))
        if isinstance(f, StepAtom):
            return _step_holds(f, t.steps[j])
        if isinstance(f, TNot):
            return not ev(f.arg, j)
        if isinstance(f, TAnd):
            return ev(f.left, j) and ev(f.right, j)
        if isinstance(f, TOr):
            return ev(f.left, j) or ev(f.right, j)
        # from max(j, loop) one period covers every later position
        window = range(j, max(j, t.loop) + period)
        if isinstance(f, Eventually):
            return any(ev(f.arg, k) for k in window)
        return all(ev(f.arg, k) for k in window)

    return ev(tf, i)


def _step_holds(f, step):
    if step is None:
        return f.mode == "all"
    kind_ok = f.kind == "any" or f.kind == step.kind
    rel_ok = eval_rel(f.rel, step.pre, step.post)
    return (not kind_ok or rel_ok) if f.mode == "all" else (kind_ok and rel_ok)


def _finite(tf, t, i):
    n = len(t.steps) + 1

    def ev(f, j):
        if isinstance(f, StateAtom):
            return eval_pred(f.pred, t.state_at(j))
        if isinstance(f, StepAtom):
            return _step_holds(f, t.steps[j] if j < len(t.steps) else None)
        if isinstance(f, TNot):
            return not ev(f.arg, j)
        if isinstance(f, TAnd):
            return ev(f.left, j) and ev(f.right, j)
        if isinstance(f, TOr):
            return ev(f.left, j) or ev(f.right, j)
        pick = any if isinstance(f, Eventually) else all
        return pick(ev(f.arg, k) for k in range(j, n))

    return ev(tf, i)


# ---------------------------------------------------------------------------
# formula generator

PREDS = [K.non_empty("qu"), K.is_empty("qu"), K.TRUE]
RELS = [K.eq_primed("qu"), K.neq_primed("qu"), K.prefix_of("qu")]

atoms = st.one_of(
    st.builds(StateAtom, st.sampled_from(PREDS)),
    st.builds(StepAtom, st.sampled_from(K.STEP_KINDS), st.sampled_from(RELS),
              st.sampled_from(["all", "some"])),
)
formulas = st.recursive(atoms, lambda sub: st.one_of(
    st.builds(TNot, sub), st.builds(TAnd, sub, sub), st.builds(TOr, sub, sub),
    st.builds(Eventually, sub), st.builds(Always, sub)), max_leaves=5)


# ---------------------------------------------------------------------------

E, F = S(qu=()), S(qu=(1,))
ALT = Trace(E, (Step(ENV, E, F), Step(ENV, F, E)), 0)
NONEMPTY = StateAtom(K.non_empty("qu"))


def test_eventually_fails_on_always_empty_lasso():
    t = Trace(E, (Step(ENV, E, E),), 0)
    assert not eval_temporal(Eventually(NONEMPTY), t)


def test_strong_and_weak_fairness_differ_on_alternating_lasso():
    assert eval_temporal(Always(Eventually(NONEMPTY)), ALT)
    assert not eval_temporal(Eventually(Always(NONEMPTY)), ALT)


def test_env_quiescence_on_lasso():
    s1, s2 = S(s=()), S(s=(1,))
    quiet = Trace(s1, (Step(ENV, s1, s2), Step(PGM, s2, s2), Step(ENV, s2, s2)), 1)
    assert eval_temporal(K.Eventually(K.always_env(K.eq_primed("s"))), quiet)
    busy = Trace(s1, (Step(ENV, s1, s2), Step(ENV, s2, s1)), 0)
    assert not eval_temporal(K.Eventually(K.always_env(K.eq_primed("s"))), busy)


def test_eventually_on_empty_trace():
    assert eval_temporal(Eventually(NONEMPTY), Trace(F))
    assert not eval_temporal(Eventually(NONEMPTY), Trace(E))


def test_step_atoms_at_the_end_of_a_finite_trace():
    t = Trace(E)
    assert eval_temporal(StepAtom("env", K.FALSE, "all"), t)
    assert not eval_temporal(StepAtom("env", K.TRUE, "some"), t)


def test_negation_normal_examples():
    assert negation_normal(TNot(Eventually(NONEMPTY))) == Always(StateAtom(K.is_empty("qu")))
    quiet = Eventually(K.always_env(K.eq_primed("s")))
    assert negation_normal(TNot(quiet)) == Always(K.eventually_env(K.neq_primed("s")))
    assert negation_normal(TNot(TNot(NONEMPTY))) == NONEMPTY


def test_truth_table_length():
    assert len(truth_table(NONEMPTY, ALT)) == 2
    assert len(truth_table(NONEMPTY, FINITE[-1])) == len(FINITE[-1].steps) + 1


@settings(max_examples=300, deadline=None)
@given(formulas, st.sampled_from(LASSOS + FINITE))
def test_agrees_with_unrolling_oracle(tf, t):
    n = len(t.steps) if t.is_lasso else len(t.steps) + 1
    assert truth_table(tf, t) == [oracle(tf, t, i) for i in range(n)]


@settings(max_examples=300, deadline=None)
@given(formulas, st.sampled_from(LASSOS + FINITE))
def test_negation_normal_form_preserves_truth(tf, t):
    assert eval_temporal(negation_normal(tf), t) == eval_temporal(tf, t)
    assert eval_temporal(negation_normal(TNot(tf)), t) == (not eval_temporal(tf, t))


@settings(max_examples=300, deadline=None)
@given(formulas, st.sampled_from(FINITE))
def test_progression_agrees_on_finite_traces(tf, t):
    assert eval_by_progression(tf, t) == eval_temporal(tf, t)


def test_duality_on_every_enumerated_trace():
    for p in (NONEMPTY, StepAtom("env", K.neq_primed("qu"), "some")):
        for t in LASSOS + FINITE:
            assert eval_temporal(TNot(Eventually(p)), t) == eval_temporal(Always(TNot(p)), t)
            assert eval_temporal(TNot(Always(p)), t) == eval_temporal(Eventually(TNot(p)), t)


def test_stable_predicate_makes_eventually_equal_eventually_always():
    decls = (K.seq_var("qu", (1,), 2),)
    ok_env = K.prefix_of("qu")
    n = 0
    for t in enumerate_lassos(decls, 4):
        if not all((eval_rel(ok_env, s.pre, s.post) if s.kind == ENV else s.pre == s.post)
                   for s in t.steps):
            continue
        n += 1
        assert eval_temporal(Eventually(NONEMPTY), t) == eval_temporal(
            Eventually(Always(NONEMPTY)), t)
    assert n > 0


def test_progression_rejects_lassos():
    with pytest.raises(ValueError):
        eval_by_progression(NONEMPTY, ALT)
