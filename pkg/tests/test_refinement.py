import itertools

import pytest

from rgspec import checks
from rgspec import kernel as K
from rgspec import specs as S
from rgspec.kernel import Conj, Guar, Iter, Rely, With
from rgspec.refinement import (CheckConfig, PreconditionError, check_derivation_chain,
                               check_law_guar_with, check_law_rely_with, check_stability, covers,
                               equivalent, law_guar_with, refines)
from rgspec.semantics import Universe, accepts
from rgspec.traces import ENV, enumerate_lassos, enumerate_traces, well_formed

QU1 = (K.seq_var("qu", (1,), 1),)
QU2 = (K.seq_var("qu", (1, 2), 2),)
SMALL = CheckConfig(QU1, max_len=3, include_lassos=True, lasso_len=2)


def brute_refines(abs_cmd, conc_cmd, cfg):
    """Oracle: enumerate every trace and compare verdicts directly."""
    u = Universe(cfg.decls)
    pool = list(enumerate_traces(cfg.decls, cfg.max_len))
    if cfg.include_lassos:
        pool += list(enumerate_lassos(cfg.decls, cfg.lasso_len))
    for t in pool:
        if not covers(accepts(abs_cmd, t, universe=u), accepts(conc_cmd, t, universe=u)):
            return False
    return True


POOL = [
    K.TERM,
    Rely(K.suffix_of("qu")),
    Guar(K.prefix_of("qu")),
    Guar(K.eq_primed("qu")),
    K.spec("qu", K.append_lit("qu", 1)),
    K.spec("qu", K.prefix_of("qu")),
    With("qu", K.spec("qu", K.prefix_of("qu"))),
    Iter(K.EnvAtomic(K.neq_primed("qu"))),
    K.Pre(K.non_empty("qu")),
    K.Terminate(K.eventually(K.non_empty("qu"))),
]


@pytest.mark.parametrize("i", range(len(POOL)))
def test_refines_agrees_with_brute_force(i):
    x = POOL[i]
    for y in POOL:
        got = refines(x, y, SMALL)
        assert got.passed == brute_refines(x, y, SMALL), (x, y)
        if not got.passed:
            assert well_formed(got.trace)
            assert not covers(accepts(x, got.trace, universe=QU1), accepts(y, got.trace, universe=QU1))


def test_reflexive_and_transitive_on_pool():
    ok = {(i, j): refines(POOL[i], POOL[j], SMALL).passed
          for i, j in itertools.product(range(len(POOL)), repeat=2)}
    assert all(ok[i, i] for i in range(len(POOL)))
    for i, j, k in itertools.product(range(len(POOL)), repeat=3):
        if ok[i, j] and ok[j, k]:
            assert ok[i, k]


def test_weaker_spec_refined_by_append():
    cfg = CheckConfig(QU2, max_len=3)
    for v in (1, 2):
        weak = K.spec("qu", K.prefix_of("qu"))
        strong = K.spec("qu", K.append_lit("qu", v))
        assert refines(weak, strong, cfg).passed
        res = refines(strong, weak, cfg)
        assert res.status == "counterexample"
        assert accepts(weak, res.trace).accepted and not accepts(strong, res.trace).accepted


def test_term_not_equivalent_to_fail_loop():
    cfg = CheckConfig((K.seq_var("s", (1,), 1),), max_len=2, include_lassos=True, lasso_len=2)
    res = equivalent(K.TERM, Iter(K.EnvAtomic(K.neq_primed("s"))), cfg)
    assert res.status == "counterexample"
    assert res.trace.is_lasso
    assert any(st.kind == ENV and st.pre != st.post for st in res.trace.steps)


def test_counterexample_replays_through_accepts():
    cfg = CheckConfig(QU2, max_len=2)
    res = refines(Guar(K.eq_primed("qu")), Guar(K.prefix_of("qu")), cfg)
    assert res.status == "counterexample"
    u = Universe(QU2)
    assert accepts(Guar(K.eq_primed("qu")), res.trace, universe=u) == res.abstract_verdict
    assert accepts(Guar(K.prefix_of("qu")), res.trace, universe=u) == res.concrete_verdict


def test_budget_is_reported():
    res = refines(K.TERM, K.TERM, CheckConfig(QU2, max_len=5, budget=5))
    assert res.status == "budget" and res.checked == 5


def test_negative_bound_rejected():
    with pytest.raises(K.ConfigError):
        CheckConfig(QU1, max_len=-1)


# --- laws

WRITE = K.spec("qu", K.append_lit("qu", 1))
LAW_CFG = CheckConfig((K.seq_var("qu", (None, 1, 2), 2),), max_len=4)


@pytest.mark.parametrize("r", [K.suffix_of("qu"), K.TRUE])
def test_rely_with_law(r):
    assert check_law_rely_with(r, "qu", WRITE, LAW_CFG).passed


def test_rely_with_simplified_rely():
    lhs = Conj(Rely(K.suffix_of("qu")), With("qu", WRITE))
    rhs = With("qu", Conj(Rely(K.eq_primed("qu")), WRITE))
    assert refines(lhs, rhs, LAW_CFG).passed


@pytest.mark.parametrize("gd,gx", [(K.prefix_of("qu"), K.TRUE), (K.TRUE, K.TRUE)])
def test_guar_with_law(gd, gx):
    assert check_law_guar_with(gd, gx, "qu", WRITE, LAW_CFG).passed


def test_guar_with_side_condition():
    with pytest.raises(PreconditionError):
        law_guar_with(K.eq_primed("res"), K.TRUE, "qu", WRITE)
    with pytest.raises(PreconditionError):
        law_guar_with(K.TRUE, K.prefix_of("qu"), "qu", WRITE)


# --- derivations


def test_chain_steps_small():
    cfg = CheckConfig((K.seq_var("qu", (None, 1, 2), 2),), max_len=4)
    for chain in (checks.rely_chain(1), checks.guar_chain(1), checks.combined_chain(1)):
        for res in check_derivation_chain(chain, cfg):
            assert res.passed, res.info["step"]


def test_identity_chain_and_unknown_relation():
    res = check_derivation_chain([(WRITE, "=", WRITE, "identity")], LAW_CFG)
    assert res[0].passed and res[0].info["relation"] == "="
    with pytest.raises(K.ConfigError):
        check_derivation_chain([(WRITE, "<", WRITE, "bad")], LAW_CFG)


def test_guar_chain_needs_the_append_for_the_last_step():
    # without the append, the prefix guarantee is not implied
    cfg = CheckConfig(QU2, max_len=3)
    merged = With("qu", K.spec("qu", K.prefix_of("qu")))
    arbitrary = With("qu", K.spec("qu", K.TRUE))
    assert not refines(merged, arbitrary, cfg).passed


# --- stability


def test_stability_examples():
    decls = (K.seq_var("qu", (1, 2), 3),)
    assert check_stability(K.non_empty("qu"), K.prefix_of("qu"), decls).passed
    assert check_stability(K.len_lt("qu", 2), K.suffix_of("qu"), decls).passed
    res = check_stability(K.non_empty("qu"), K.suffix_of("qu"), (K.seq_var("qu", (1,), 1),))
    assert res.status == "counterexample"
    (st,) = res.trace.steps
    assert st.kind == ENV and st.pre["qu"] == (1,) and st.post["qu"] == ()


def test_stability_oracle():
    decls = (K.seq_var("qu", (1, 2), 2),)
    states = K.enumerate_states(decls)
    for p in (K.non_empty("qu"), K.is_empty("qu"), K.len_lt("qu", 2)):
        for r in (K.prefix_of("qu"), K.suffix_of("qu"), K.eq_primed("qu")):
            stable = all(not (K.eval_pred(p, a) and K.eval_rel(r, a, b)) or K.eval_pred(p, b)
                         for a in states for b in states)
            assert check_stability(p, r, decls).passed == stable


def test_queue_equivalence_small():
    n = 1
    aw, te = S.bounded_queue_await_spec(n), S.bounded_queue_terminate_spec(n)
    decls = (K.seq_var("qu", (1,), n), K.scalar_var("res", (None, 1)))
    inv = S.queue_resource(n).invariant
    cfg = CheckConfig(decls, max_len=3, include_lassos=True, lasso_len=3, init=inv,
                      environment=S.queue_resource(n).preserved())
    assert equivalent(aw.read, te.read, cfg).passed
    assert equivalent(aw.write(1), te.write(1), cfg).passed
