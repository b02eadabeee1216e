import math

import pytest

from rgspec import kernel as K
from rgspec.casestudies import (Instr, Lts, OpInstance, conformance, default_spec_of, explore,
                                lock_queue_impl, project, treiber_impl)
from rgspec.traces import ENV, PGM, well_formed

from oracles import treiber_finals


def toy_lts(lengths):
    threads = []
    for t, n in enumerate(lengths):
        code = [Instr(f"i{k}", lambda st, me, k=k, n=n: ({"x": st["x"] + 1},
                                                         None if k == n - 1 else k + 1))
                for k in range(n)]
        threads.append([(OpInstance(t, "write", 1), code)])
    return Lts({"x": 0}, threads, view=("x",))


@pytest.mark.parametrize("lengths,count", [((1, 1), 2), ((2, 2), 6), ((1, 2, 1), 12)])
def test_interleaving_counts(lengths, count):
    runs = explore(toy_lts(lengths)).runs
    assert count == math.factorial(sum(lengths)) // math.prod(math.factorial(n) for n in lengths)
    assert len(runs) == count
    assert all(r.status == "complete" for r in runs)
    assert len({r.actors for r in runs}) == count


def test_two_pushes_match_oracle():
    ex = explore(treiber_impl([[("push", 1)], [("push", 2)]]))
    got = {r.trace.final["s"] for r in ex.complete()}
    assert got == treiber_finals((1, 2)) == {(1, 2), (2, 1)}
    assert len(ex.complete()) == len(ex.runs)


def test_single_push_no_contention():
    (run,) = explore(treiber_impl([[("push", 1)]])).runs
    assert run.labels == ("read-top", "build", "cas-commit")
    assert run.trace.final["s"] == (1,)


def test_race_produces_a_retry():
    # the popper pushes first so its pop has something to race for
    lts = treiber_impl([[("push", 1)], [("push", 2), "pop"]])
    ex = explore(lts)
    fails = {r.actors[k] for r in ex.runs for k, lab in enumerate(r.labels) if lab == "cas-fail"}
    assert fails == {0, 1}


def test_stack_changes_only_at_commits():
    ex = explore(treiber_impl([[("push", 1)], [("push", 2)], ["pop"]]))
    for r in ex.runs:
        for st, label in zip(r.trace.steps, r.labels):
            if st.pre["s"] != st.post["s"]:
                assert label == "cas-commit"


def test_projection_partitions_steps():
    lts = treiber_impl([[("push", 1)], [("push", 2)], ["pop"]])
    for r in explore(lts).complete():
        pgm = 0
        for op in lts.ops:
            trace, complete = project(r, lts, op)
            assert complete and well_formed(trace)
            pgm += sum(1 for st in trace.steps if st.kind == PGM)
        assert pgm == len(r.trace.steps)


def test_exploration_is_deterministic():
    lts = treiber_impl([[("push", 1)], ["pop"]])
    assert explore(lts).traces == explore(lts).traces


def test_scale_limits():
    with pytest.raises(K.ConfigError):
        treiber_impl([["pop"]] * 4)
    with pytest.raises(K.ConfigError):
        treiber_impl([["pop", "pop", "pop"]])
    with pytest.raises(K.ConfigError):
        lock_queue_impl(0, [])
    with pytest.raises(K.ConfigError):
        explore(treiber_impl([]), visits=0)


# ---------------------------------------------------------------------------
# lock queue

SRSW = [[("write", 1), ("write", 2)], ["read", "read"]]


@pytest.fixture(scope="module")
def srsw():
    lts = lock_queue_impl(2, SRSW)
    return lts, explore(lts)


def test_fifo_in_every_interleaving(srsw):
    lts, ex = srsw
    done = ex.complete()
    assert done
    for r in done:
        f = r.trace.final
        assert (f["res1_0"], f["res1_1"]) == (1, 2)


def test_capacity_invariant(srsw):
    _, ex = srsw
    for r in ex.runs:
        assert all(len(s["qu"]) <= 2 for s in r.trace.states)


def test_relies_and_guarantees_hold_on_projections(srsw):
    lts, ex = srsw
    for r in ex.runs:
        for op in lts.ops:
            proj = project(r, lts, op)
            if proj is None:
                continue
            for st in proj[0].steps:
                a, b = st.pre, st.post
                grow = K.eval_rel(K.prefix_of("qu"), a, b)
                shrink = K.eval_rel(K.suffix_of("qu"), a, b)
                if op.name == "write":
                    assert shrink if st.kind == ENV else grow
                else:
                    assert grow if st.kind == ENV else shrink


def test_full_queue_without_reader_spins():
    ex = explore(lock_queue_impl(1, [[("write", 1), ("write", 2)]]))
    assert ex.lassos()
    assert not ex.complete()


def test_no_threads_only_initial_state():
    (run,) = explore(lock_queue_impl(2, [])).runs
    assert run.trace.steps == () and run.status == "complete"


# ---------------------------------------------------------------------------
# conformance


def test_treiber_conforms():
    lts = treiber_impl([[("push", 1)], [("push", 2)], ["pop"]])
    assert conformance(explore(lts), default_spec_of("stack-explicit")).passed


def test_lock_queue_conforms(srsw):
    _, ex = srsw
    assert conformance(ex, default_spec_of("queue-srsw", 2)).passed


def test_unchecked_pop_is_caught():
    lts = treiber_impl([[("push", 1)], ["pop"], ["pop"]], pop_checks_empty=False)
    res = conformance(explore(lts), default_spec_of("stack-explicit"))
    assert res.status == "counterexample"
    assert "pop" in res.info["op"]
    assert well_formed(res.trace)


def test_unchecked_write_is_caught():
    lts = lock_queue_impl(1, [[("write", 1), ("write", 2)]], write_checks_capacity=False)
    res = conformance(explore(lts), default_spec_of("queue-await", 1))
    assert res.status == "counterexample"


def test_unknown_spec_family():
    with pytest.raises(K.ConfigError):
        default_spec_of("heap")
