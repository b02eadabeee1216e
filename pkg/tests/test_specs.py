import pytest

from rgspec import kernel as K
from rgspec import specs as S
from rgspec.kernel import ConfigError
from rgspec.semantics import accepts
from rgspec.traces import ENV, PGM, Step, Trace


def q(qu, res=None):
    return K.State({"qu": tuple(qu), "res": res})


def s(st, res=None):
    return K.State({"s": tuple(st), "res": res})


QDECLS = (K.seq_var("qu", (1, 2), 2), K.scalar_var("res", (None, 1, 2)))
SDECLS = (K.seq_var("s", (1, 2), 2), K.scalar_var("res", (None, 1, 2)))


def stutter_lasso(state, kind=ENV):
    return Trace(state, (Step(kind, state, state),), 0)


# --- single-reader/single-writer queue


def test_srsw_shape():
    ops = S.queue_spec_srsw()
    w = ops.write(1)
    assert w == K.conj_all(K.Rely(K.suffix_of("qu")), K.Guar(K.prefix_of("qu")),
                           K.With("qu", K.spec("qu", K.append_lit("qu", 1))))


def test_srsw_write_read():
    ops = S.queue_spec_srsw()
    t = Trace(q([]), (Step(PGM, q([]), q([2])),))
    assert accepts(ops.write(2), t, universe=QDECLS).outcome == "terminated"
    v = accepts(ops.read, Trace(q([])), universe=QDECLS)
    assert v.aborted and v.index == 0
    t = Trace(q([1]), (Step(PGM, q([1]), q([], 1)),))
    assert accepts(ops.read, t, universe=QDECLS).outcome == "terminated"


# --- blocking bounded queue


def test_await_write_blocks_forever_on_full_queue():
    ops = S.bounded_queue_await_spec(1)
    assert accepts(ops.write(1), stutter_lasso(q([2])), universe=QDECLS).outcome == "infinite"


def test_await_read_on_nonempty_queue_terminates():
    ops = S.bounded_queue_await_spec(2)
    t = Trace(q([1]), (Step(PGM, q([1]), q([], 1)),))
    assert accepts(ops.read, t, universe=QDECLS).outcome == "terminated"


def test_await_write_after_reader_makes_room():
    ops = S.bounded_queue_await_spec(1)
    full, empty = q([2]), q([])
    t = Trace(full, (Step(PGM, full, full), Step(ENV, full, empty), Step(PGM, empty, q([1]))))
    assert accepts(ops.write(1), t, universe=QDECLS).outcome == "terminated"


@pytest.mark.parametrize("n", [0, -1, "2"])
def test_capacity_must_be_positive(n):
    with pytest.raises(ConfigError):
        S.bounded_queue_await_spec(n)
    with pytest.raises(ConfigError):
        S.bounded_queue_terminate_spec(n)
    with pytest.raises(ConfigError):
        S.queue_resource(n)


# --- termination-condition queue


def test_terminate_read_may_wait_on_empty_queue_forever():
    ops = S.bounded_queue_terminate_spec(2)
    assert accepts(ops.read, stutter_lasso(q([])), universe=QDECLS).outcome == "infinite"


def test_terminate_read_must_finish_once_data_arrives():
    ops = S.bounded_queue_terminate_spec(2)
    e, one = q([]), q([1])
    t = Trace(e, (Step(ENV, e, one), Step(ENV, one, one)), 1)
    assert not accepts(ops.read, t, universe=QDECLS).accepted


def test_terminate_write_single_step():
    ops = S.bounded_queue_terminate_spec(2)
    t = Trace(q([]), (Step(PGM, q([]), q([2])),))
    assert accepts(ops.write(2), t, universe=QDECLS).outcome == "terminated"


# --- many readers and writers


def test_fairness_variants_differ_on_alternating_lasso():
    e, one = q([]), q([1])
    alt = Trace(e, (Step(ENV, e, one), Step(ENV, one, e)), 0)
    weak = S.multi_client_terminate_spec("weak", 2).read
    strong = S.multi_client_terminate_spec("strong", 2).read
    assert accepts(weak, alt, universe=QDECLS).outcome == "infinite"
    assert not accepts(strong, alt, universe=QDECLS).accepted


def test_fairness_variant_single_client_like_terminate_spec():
    e = q([])
    t = Trace(e, (Step(PGM, e, q([1])),))
    for f in ("weak", "strong"):
        assert accepts(S.multi_client_terminate_spec(f, 2).write(1), t, universe=QDECLS).accepted


def test_unknown_fairness_rejected():
    with pytest.raises(ConfigError):
        S.multi_client_terminate_spec("medium", 2)


# --- stacks


def test_pop_from_empty_stack_returns_null():
    pop = S.stack_explicit_spec().pop
    t = Trace(s([], 2), (Step(PGM, s([], 2), s([], None)),))
    assert accepts(pop, t).outcome == "terminated"
    t = Trace(s([], 2), (Step(PGM, s([], 2), s([], 1)),))
    assert not accepts(pop, t).accepted


def test_push_null_aborts():
    v = accepts(S.stack_explicit_spec().push(None), Trace(s([])))
    assert v.aborted and v.index == 0
    v = accepts(S.stack_terminate_spec().push(None), Trace(s([])), universe=SDECLS)
    assert v.aborted and v.index == 0


def test_push_fails_forever_under_constant_interference():
    e, one = s([]), s([2])
    t = Trace(e, (Step(ENV, e, one), Step(ENV, one, e)), 0)
    assert accepts(S.stack_explicit_spec().push(1), t).outcome == "infinite"


def test_terminate_push_after_quiescence():
    e, one, two = s([]), s([2]), s([1, 2])
    push = S.stack_terminate_spec().push(1)
    # two changes, then quiet stuttering forever: must terminate instead
    idle = Trace(e, (Step(ENV, e, one), Step(ENV, one, e), Step(ENV, e, e)), 2)
    assert not accepts(push, idle, universe=SDECLS).accepted
    done = Trace(e, (Step(ENV, e, one), Step(PGM, one, two)))
    assert accepts(push, done, universe=SDECLS).outcome == "terminated"


def test_terminate_push_may_wait_under_constant_interference():
    e, one = s([]), s([2])
    busy = Trace(e, (Step(ENV, e, one), Step(ENV, one, e)), 0)
    push = S.stack_terminate_spec().push(1)
    assert accepts(push, busy, universe=SDECLS).outcome == "infinite"
    fin = Trace(e, (Step(ENV, e, one), Step(PGM, one, s([1, 2]))))
    assert accepts(push, fin, universe=SDECLS).outcome == "terminated"


def test_sequential_push_then_pop():
    ops = S.stack_terminate_spec()
    cmd = K.Seq(ops.push(1), ops.pop)
    t = Trace(s([]), (Step(PGM, s([]), s([1])), Step(PGM, s([1]), s([], 1))))
    assert accepts(cmd, t, universe=SDECLS).outcome == "terminated"
    bad = Trace(s([]), (Step(PGM, s([]), s([1])), Step(PGM, s([1]), s([], 2))))
    assert not accepts(cmd, bad, universe=SDECLS).accepted


def test_builders_accept_params():
    w = S.queue_spec_srsw().write(K.Param("v"))
    assert K.substitute(w, {"v": 1}) == S.queue_spec_srsw().write(1)
