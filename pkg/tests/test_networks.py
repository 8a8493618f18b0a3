import numpy as np
import pytest

from exprgan import autodiff as ad
from exprgan import networks as nets
from exprgan.autodiff import Tape
from exprgan.networks import Bound, NetConfig

from oracles import central_differences, max_rel_error

SMALL = NetConfig(hidden_g=12, hidden_e=8, hidden_d=6, mapping_hidden=10)


@pytest.fixture
def store():
    return nets.init_params(SMALL, seed=3)


def bound(store, trainable=()):
    return Bound(Tape(store.dtype), store, trainable)


def seq(seed=0, batch=2, n=10):
    return np.random.default_rng(seed).normal(size=(batch, n, 51)).astype(np.float32)


def test_translate_shapes(store):
    P = bound(store)
    out = nets.translate(P, seq(), P.tape.constant(np.zeros((2, 16))))
    assert len(out) == 10 and all(t.dims == (2, 51) for t in out)


def test_zero_output_affine_is_identity(store):
    store.set_value("G.out.W", np.zeros((12, 51)))
    store.set_value("G.out.b", np.zeros(51))
    s = seq(1)
    P = bound(store)
    style = P.tape.constant(np.random.default_rng(2).normal(size=(2, 16)))
    out = np.stack([t.data for t in nets.translate(P, s, style)], axis=1)
    np.testing.assert_array_equal(out, s)


def test_translate_is_deterministic(store):
    def run():
        P = bound(store)
        return [t.data.tobytes() for t in nets.translate(P, seq(), P.tape.constant(np.ones((2, 16))))]

    assert run() == run()


def test_encode_style_shape_and_zero_head(store):
    assert nets.encode_style(bound(store), seq()).dims == (2, 16)
    store.set_value("E.head.W", np.zeros((8, 16)))
    store.set_value("E.head.b", np.zeros(16))
    np.testing.assert_array_equal(nets.encode_style(bound(store), seq()).data, 0.0)


def test_encode_style_is_order_sensitive(store):
    s = seq(4, batch=1)
    swapped = s.copy()
    swapped[0, [2, 7]] = swapped[0, [7, 2]]
    a = nets.encode_style(bound(store), s).data
    b = nets.encode_style(bound(store), swapped).data
    assert not np.array_equal(a, b)


def test_map_latent_shapes_and_labels(store):
    z = np.random.default_rng(5).normal(size=(1, 4))
    styles = [nets.map_latent(bound(store), z, [y]).data for y in range(7)]
    assert styles[0].shape == (1, 16)
    assert not np.array_equal(styles[1], styles[2])


def test_map_latent_zero_head_for_one_label(store):
    W = store.value("M.head.W").copy()
    b = store.value("M.head.b").copy()
    W[:, 3 * 16:4 * 16] = 0
    b[3 * 16:4 * 16] = 0
    store.set_value("M.head.W", W)
    store.set_value("M.head.b", b)
    z = np.random.default_rng(6).normal(size=(5, 4))
    np.testing.assert_array_equal(nets.map_latent(bound(store), z, [3] * 5).data, 0.0)
    assert np.any(nets.map_latent(bound(store), z, [2] * 5).data != 0)


def test_map_latent_rejects_bad_label(store):
    with pytest.raises(ValueError):
        nets.map_latent(bound(store), np.zeros((1, 4)), [7])


def test_discriminate_shape_and_zero_weights(store):
    assert nets.discriminate(bound(store), seq()).dims == (2, 7)
    store.set_value("D.head.W", np.zeros((6, 7)))
    out = nets.discriminate(bound(store), seq()).data
    np.testing.assert_array_equal(out, np.broadcast_to(store.value("D.head.b"), (2, 7)))


def test_select_branch(store):
    P = bound(store)
    scores = P.tape.constant(np.arange(14.0).reshape(2, 7))
    np.testing.assert_array_equal(nets.select_branch(P, scores, [3, 6]).data, [[3.0], [13.0]])


def test_discriminator_branch_gradient_matches_finite_differences():
    st = nets.init_params(NetConfig(hidden_g=4, hidden_e=4, hidden_d=5, mapping_hidden=4),
                          seed=7, dtype=np.float64)
    s = np.random.default_rng(8).uniform(-1, 1, size=(2, 4, 51))

    def loss(tape, store):
        P = Bound(tape, store, nets.DISCRIMINATOR_GROUPS)
        return ad.sum_all(nets.select_branch(P, nets.discriminate(P, s), [2, 5]))

    tape = Tape(np.float64)
    tape.backward(loss(tape, st))
    names = [k for k in st if k.startswith("D.")]
    rng = np.random.default_rng(9)
    coords = {k: rng.choice(st[k].value.size, size=min(12, st[k].value.size), replace=False)
              for k in names}
    numeric = central_differences(lambda x: float(loss(Tape(np.float64), x)), st, names,
                                  coords=coords)
    assert max_rel_error({k: st[k].grad for k in names}, numeric) < 1e-4
    assert all(st[k].grad is None for k in st if not k.startswith("D."))


def test_translator_gradient_matches_finite_differences():
    st = nets.init_params(NetConfig(hidden_g=5, hidden_e=4, hidden_d=4, mapping_hidden=4),
                          seed=10, dtype=np.float64)
    s = np.random.default_rng(11).uniform(-1, 1, size=(2, 3, 51))
    z = np.random.default_rng(12).normal(size=(2, 4))

    def loss(tape, store):
        P = Bound(tape, store, nets.GENERATOR_GROUPS)
        style = nets.map_latent(P, z, [1, 4])
        out = nets.translate(P, s, style)
        return ad.sum_all(ad.tanh(nets.encode_style(P, out)))

    tape = Tape(np.float64)
    tape.backward(loss(tape, st))
    names = ["G.in.W", "G.lstm.Wh", "G.out.b", "M.fc1.W", "M.head.W", "E.lstm.Wx"]
    rng = np.random.default_rng(13)
    coords = {k: rng.choice(st[k].value.size, size=10, replace=False) for k in names}
    numeric = central_differences(lambda x: float(loss(Tape(np.float64), x)), st, names,
                                  coords=coords)
    assert max_rel_error({k: st[k].grad for k in names}, numeric) < 1e-4


def test_forget_gate_bias_initialized_to_one(store):
    b = store.value("G.lstm.b")
    np.testing.assert_array_equal(b[12:24], 1.0)


def test_init_is_seeded():
    a, b = nets.init_params(SMALL, seed=1), nets.init_params(SMALL, seed=1)
    assert all(np.array_equal(a.value(k), b.value(k)) for k in a)
    c = nets.init_params(SMALL, seed=2)
    assert not np.array_equal(a.value("G.in.W"), c.value("G.in.W"))


def test_config_round_trip(store):
    assert nets.config_from_store(store) == SMALL


def test_label_index():
    assert nets.label_index("Happy") == 1
    assert nets.label_index(6) == 6
    with pytest.raises(ValueError):
        nets.label_index("bored")
    with pytest.raises(ValueError):
        nets.label_index(7)


def test_check_finite_raises():
    with pytest.raises(nets.DivergenceError):
        nets.check_finite("x", np.array([1.0, np.nan]))
