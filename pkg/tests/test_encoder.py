import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgcn.autodiff import LSTM_PARAM_NAMES, Tape, Tensor, check_gradients, lstm_scan, sum_all
from sgcn.encoder import (
    OOV_INDEX,
    EmbeddingTable,
    LstmParams,
    bilstm_encode,
    embed_sequence,
    lstm_step,
)
from sgcn.errors import EmptyInputError, ShapeError
from sgcn.rng import SplitMix64


def oracle_scan(p: dict, xs: np.ndarray, reverse=False) -> np.ndarray:
    """Textbook column-vector LSTM, written independently of the package."""
    sig = lambda z: 1.0 / (1.0 + np.exp(-z))  # noqa: E731
    H = p["W_i"].shape[0]
    h, c = np.zeros(H), np.zeros(H)
    out = np.zeros((len(xs), H))
    steps = range(len(xs) - 1, -1, -1) if reverse else range(len(xs))
    for t in steps:
        x = xs[t]
        i = sig(p["W_i"] @ h + p["U_i"] @ x + p["b_i"][0])
        f = sig(p["W_f"] @ h + p["U_f"] @ x + p["b_f"][0])
        o = sig(p["W_o"] @ h + p["U_o"] @ x + p["b_o"][0])
        c = f * c + i * np.tanh(p["W_c"] @ h + p["U_c"] @ x + p["b_c"][0])
        h = o * np.tanh(c)
        out[t] = h
    return out


def random_lstm(seed, H, d_e, scale=0.8):
    r = np.random.default_rng(seed)
    arrays = {}
    for name in LSTM_PARAM_NAMES:
        shape = (H, H) if name[0] == "W" else (H, d_e) if name[0] == "U" else (1, H)
        arrays[name] = r.normal(scale=scale, size=shape)
    return LstmParams(arrays)


def test_embed_known_and_unknown_tokens():
    r = SplitMix64(3)
    table = EmbeddingTable.from_vectors(["the", "cat"], np.array([[0.1, 0.2], [0.3, 0.4]]), r)
    out = embed_sequence(table, ["The", "dog", "cat"])
    assert out.value[0].tolist() == [0.1, 0.2]
    assert np.array_equal(out.value[1], table.matrix[OOV_INDEX])
    assert out.value[2].tolist() == [0.3, 0.4]
    with pytest.raises(EmptyInputError):
        embed_sequence(table, [])


def test_oov_row_is_distinct_and_in_range():
    table = EmbeddingTable.from_vectors(["a"], np.ones((1, 4)), SplitMix64(9))
    assert OOV_INDEX not in table.vocab.values()
    assert np.all(np.abs(table.matrix[OOV_INDEX]) <= 0.05)
    assert all(0 <= v < len(table) for v in table.vocab.values())


def test_duplicate_token_gradient_is_sum_of_occurrences(rng):
    table = EmbeddingTable.from_vectors(["a", "b"], rng.normal(size=(2, 3)), SplitMix64(0))
    w = rng.normal(size=(3, 3))

    def build(m):
        return _weighted(embed_sequence(table, ["a", "b", "a"], m), w)

    assert check_gradients(build, [table.matrix]) < 1e-6
    tape = Tape()
    m = tape.watch(table.matrix)
    tape.backward(_weighted(embed_sequence(table, ["a", "b", "a"], m), w))
    row_a = table.vocab["a"]
    assert np.allclose(tape.grad(m)[row_a], w[0] + w[2], atol=1e-15)


def _weighted(out, w):
    from sgcn.autodiff import hadamard

    return sum_all(hadamard(out, Tensor(w)))


def test_lstm_step_zero_weights():
    H, d_e = 3, 2
    p = LstmParams({n: np.zeros((H, H) if n[0] == "W" else (H, d_e) if n[0] == "U" else (1, H)) for n in LSTM_PARAM_NAMES})
    h, c = lstm_step(p, Tensor(np.array([[0.7, -2.0]])), Tensor(np.zeros((1, H))), Tensor(np.zeros((1, H))))
    assert np.array_equal(h.value, np.zeros((1, H)))
    assert np.array_equal(c.value, np.zeros((1, H)))


def test_lstm_step_gates_are_half_at_zero():
    from sgcn.autodiff import sigmoid

    assert sigmoid(Tensor(np.zeros((1, 4)))).value.tolist() == [[0.5] * 4]


def test_lstm_step_shape_errors():
    p = random_lstm(0, 3, 2)
    with pytest.raises(ShapeError):
        lstm_step(p, Tensor(np.zeros((1, 5))), Tensor(np.zeros((1, 3))), Tensor(np.zeros((1, 3))))
    with pytest.raises(ShapeError):
        lstm_step(p, Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 4))), Tensor(np.zeros((1, 3))))


def test_lstm_step_gradient_all_parameters(rng):
    p = random_lstm(1, 3, 2)
    x, h0, c0 = rng.normal(size=(1, 2)), rng.normal(size=(1, 3)), rng.normal(size=(1, 3))

    def build(*ts):
        h, _ = lstm_step(list(ts[:12]), ts[12], ts[13], ts[14])
        return sum_all(h)

    assert check_gradients(build, p.ordered() + [x, h0, c0]) < 1e-5


@pytest.mark.parametrize("T", [1, 2, 3, 4])
@pytest.mark.parametrize("reverse", [False, True])
def test_lstm_scan_matches_independent_oracle(T, reverse):
    p = random_lstm(T, 4, 3)
    xs = np.random.default_rng(100 + T).normal(size=(T, 3))
    got = lstm_scan(Tensor(xs), [Tensor(a) for a in p.ordered()], reverse=reverse).value
    assert np.max(np.abs(got - oracle_scan(p.arrays, xs, reverse))) < 1e-12


def test_lstm_scan_matches_composed_steps(rng):
    p = random_lstm(5, 3, 2)
    xs = rng.normal(size=(4, 2))
    h = Tensor(np.zeros((1, 3)))
    c = Tensor(np.zeros((1, 3)))
    rows = []
    for t in range(4):
        h, c = lstm_step(p, Tensor(xs[t:t + 1]), h, c)
        rows.append(h.value[0])
    fused = lstm_scan(Tensor(xs), [Tensor(a) for a in p.ordered()]).value
    assert np.max(np.abs(fused - np.array(rows))) < 1e-12


@pytest.mark.parametrize("reverse", [False, True])
def test_lstm_scan_gradient(reverse):
    p = random_lstm(7, 3, 2)
    xs = np.random.default_rng(8).normal(size=(4, 2))
    w = np.random.default_rng(9).normal(size=(4, 3))

    def build(x, *ps):
        return _weighted(lstm_scan(x, list(ps), reverse=reverse), w)

    assert check_gradients(build, [xs] + p.ordered()) < 1e-5


def test_bilstm_single_step():
    fwd, bwd = random_lstm(1, 3, 2), random_lstm(2, 3, 2)
    x = np.array([[0.3, -0.4]])
    out = bilstm_encode(fwd, bwd, Tensor(x)).value
    assert out.shape == (1, 6)
    assert np.allclose(out[0, :3], oracle_scan(fwd.arrays, x)[0], atol=1e-12)
    assert np.allclose(out[0, 3:], oracle_scan(bwd.arrays, x)[0], atol=1e-12)


def test_bilstm_empty_input():
    p = random_lstm(0, 2, 2)
    with pytest.raises(EmptyInputError):
        bilstm_encode(p, p, Tensor(np.zeros((0, 2))))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 10_000))
def test_bilstm_shape_range_and_reversal_symmetry(T, H, seed):
    d_e = 3
    fwd, bwd = random_lstm(seed, H, d_e, scale=1.5), random_lstm(seed + 1, H, d_e, scale=1.5)
    x = np.random.default_rng(seed).normal(scale=2.0, size=(T, d_e))
    out = bilstm_encode(fwd, bwd, Tensor(x)).value
    assert out.shape == (T, 2 * H)
    assert np.all(np.abs(out) < 1.0)
    swapped = bilstm_encode(bwd, fwd, Tensor(x[::-1].copy())).value
    expected = np.concatenate([out[::-1, H:], out[::-1, :H]], axis=1)
    assert np.max(np.abs(swapped - expected)) <= 1e-12


def test_bilstm_gradient_every_parameter():
    H, d_e, T = 3, 2, 4
    fwd, bwd = random_lstm(11, H, d_e), random_lstm(12, H, d_e)
    x = np.random.default_rng(13).normal(size=(T, d_e))

    def build(*ts):
        return sum_all(bilstm_encode(list(ts[:12]), list(ts[12:24]), ts[24]))

    assert check_gradients(build, fwd.ordered() + bwd.ordered() + [x]) < 1e-5


def test_lstm_init_forget_bias_and_glorot_range():
    p = LstmParams.init(6, 4, SplitMix64(1))
    assert np.all(p.arrays["b_f"] == 1.0)
    assert np.all(p.arrays["b_i"] == 0.0)
    assert np.all(np.abs(p.arrays["W_i"]) <= np.sqrt(6 / 12))
    assert np.all(np.abs(p.arrays["U_i"]) <= np.sqrt(6 / 10))
    literal = LstmParams.init(6, 4, SplitMix64(1), forget_bias=0.0)
    assert np.all(literal.arrays["b_f"] == 0.0)
