import numpy as np
import pytest

from transferids.data import Dataset
from transferids.nn import (
    AdamState, MlpConfig, MlpModel, NumericalError, adam_step, cross_entropy, input_gradient, predict_proba,
    softmax, train_mlp,
)

from conftest import random_mlp
from oracles import draw_gradient_case, fd_input_grad, fd_param_grads, rel_err

def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        model, x, y = draw_gradient_case(rng)
        worst = max(worst, rel_err(model.input_gradient(x, y), fd_input_grad(model, x, y)).max())
    assert worst <= 1e-3


def test_parameter_gradients_match_finite_differences():
    rng = np.random.default_rng(8)
    for _ in range(25):
        model, x, y = draw_gradient_case(rng)
        analytic = model.param_gradients(x[None, :], [y])
        for a, n in zip(analytic, fd_param_grads(model, x[None, :], [y])):
            assert rel_err(a, n).max() <= 1e-3


def test_linear_softmax_gradient_closed_form():
    W = np.array([[0.3, -1.2], [2.0, 0.5]])
    b = np.array([0.1, -0.4])
    model = MlpModel([W], [b], MlpConfig(hidden_sizes=()), ("0", "1"))
    x = np.array([0.25, 0.7])
    p = softmax(x @ W + b)
    for y in (0, 1):
        expected = W @ (p - np.eye(2)[y])
        np.testing.assert_allclose(input_gradient(model, x, y), expected, rtol=1e-12)


def test_zero_weights_give_zero_gradient_and_uniform_probs():
    model = random_mlp(np.random.default_rng(0), n_in=4, n_classes=3, hidden=(5,))
    for w in model.weights:
        w[...] = 0
    for b in model.biases:
        b[...] = 0
    x = np.random.default_rng(1).random(4)
    np.testing.assert_array_equal(model.input_gradient(x, 1), np.zeros(4))
    np.testing.assert_allclose(predict_proba(model, x)[0], np.full(3, 1 / 3))


def test_zero_final_layer_is_uniform():
    model = random_mlp(np.random.default_rng(2), n_in=3, n_classes=2, hidden=(4,))
    model.weights[-1][...] = 0
    model.biases[-1][...] = 0
    np.testing.assert_allclose(model.predict_proba(np.random.default_rng(3).random((5, 3))), 0.5)


def test_probabilities_sum_to_one_and_are_stable():
    rng = np.random.default_rng(4)
    model = random_mlp(rng, n_in=5)
    p = model.predict_proba(rng.random((50, 5)))
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-6)
    big = softmax(np.array([[1e4, -1e4, 0.0], [-1e4, -1e4, -1e4]]))
    assert np.all(np.isfinite(big))
    np.testing.assert_allclose(big.sum(axis=1), 1.0)
    assert np.all(np.isfinite(cross_entropy(np.array([[1e4, -1e4]]), np.array([1]))))


def test_cross_entropy_nonnegative_and_zero_at_certainty():
    ce = cross_entropy(np.array([[50.0, -50.0], [0.0, 0.0]]), np.array([0, 0]))
    assert np.all(ce >= 0)
    assert ce[0] < 1e-40
    assert ce[1] == pytest.approx(np.log(2))


def test_dimension_mismatch():
    model = random_mlp(np.random.default_rng(5), n_in=3)
    with pytest.raises(ValueError):
        model.predict_proba(np.zeros(4))
    with pytest.raises(ValueError):
        model.input_gradient(np.zeros(2), 0)


# Adam ---------------------------------------------------------------------

def test_adam_first_step_by_hand():
    p = [np.array([1.0, 2.0, 3.0])]
    g = [np.array([0.5, -2.0, 0.0])]
    state = AdamState.zeros_like(p)
    adam_step(state, p, g, lr=0.01)
    # m_hat = g, v_hat = g^2 after bias correction
    expected = np.array([1.0 - 0.01 * 0.5 / (0.5 + 1e-8), 2.0 + 0.01 * 2.0 / (2.0 + 1e-8), 3.0])
    np.testing.assert_allclose(p[0], expected, rtol=0, atol=1e-15)
    assert state.t == 1
    np.testing.assert_allclose(state.m[0], 0.1 * g[0])
    np.testing.assert_allclose(state.v[0], 0.001 * g[0] ** 2)


def test_adam_zero_gradient_decays_moments():
    p = [np.array([1.0, -1.0])]
    state = AdamState([np.array([0.2, 0.4])], [np.array([0.01, 0.02])], t=3)
    adam_step(state, p, [np.array([0.0, 0.0])])
    np.testing.assert_allclose(state.m[0], [0.18, 0.36])
    np.testing.assert_allclose(state.v[0], [0.00999, 0.01998])


def test_adam_zero_gradient_from_rest():
    p = [np.array([1.0, -1.0])]
    state = AdamState.zeros_like(p)
    adam_step(state, p, [np.zeros(2)])
    np.testing.assert_array_equal(p[0], [1.0, -1.0])
    np.testing.assert_array_equal(state.m[0], 0.0)


def test_adam_constant_gradient_moves_monotonically():
    p = [np.array([0.0, 0.0])]
    g = np.array([1.0, -3.0])
    state = AdamState.zeros_like(p)
    traj = [p[0].copy()]
    for _ in range(2):
        adam_step(state, p, [g])
        traj.append(p[0].copy())
    assert traj[0][0] > traj[1][0] > traj[2][0]
    assert traj[0][1] < traj[1][1] < traj[2][1]


def test_adam_rejects_non_finite():
    p = [np.zeros(2)]
    with pytest.raises(NumericalError):
        adam_step(AdamState.zeros_like(p), p, [np.array([np.nan, 0.0])])


# Training -----------------------------------------------------------------

def _xor_dataset(reps=50):
    base = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    X = np.tile(base, (reps, 1))
    y = np.tile([0, 1, 1, 0], reps)
    return Dataset(X, y, (("a", None), ("b", None)), ("0", "1"))


XOR_CFG = MlpConfig(hidden_sizes=(16,), dropout_rate=0.0, lr=0.02, epochs=150, batch_size=32, seed=0)


def test_xor_is_learned():
    model = train_mlp(_xor_dataset(), XOR_CFG)
    assert model.train_accuracy >= 0.95
    assert model.predict_proba(np.array([0.0, 1.0]))[0, 1] > 0.5


def test_training_is_bit_deterministic():
    cfg = MlpConfig(hidden_sizes=(8, 8), dropout_rate=0.2, epochs=5, batch_size=16, seed=3)
    a = train_mlp(_xor_dataset(10), cfg)
    b = train_mlp(_xor_dataset(10), cfg)
    for p, q in zip(a.params, b.params):
        assert p.tobytes() == q.tobytes()


def test_single_class_fit():
    ds = _xor_dataset(10)
    ds = Dataset(ds.matrix, np.zeros(len(ds), dtype=np.int64), ds.schema, ds.class_names)
    model = train_mlp(ds, MlpConfig(hidden_sizes=(4,), lr=0.01, epochs=30, batch_size=8, seed=0))
    assert model.train_accuracy == 1.0


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported():
    ds = _xor_dataset(10)
    with pytest.raises(NumericalError):
        train_mlp(Dataset(ds.matrix * 1e308, ds.labels, ds.schema, ds.class_names),
                  MlpConfig(hidden_sizes=(4,), epochs=2, batch_size=8))


def test_dropout_zero_train_equals_inference():
    model = random_mlp(np.random.default_rng(9), n_in=4, hidden=(6, 6))
    x = np.random.default_rng(10).random((7, 4))
    a, _ = model.forward(x, rng=np.random.default_rng(0))
    b, _ = model.forward(x)
    np.testing.assert_array_equal(a, b)


def test_inverted_dropout_preserves_expectation():
    rng = np.random.default_rng(11)
    model = random_mlp(rng, n_in=3, n_classes=2, hidden=(5,))
    model.config = MlpConfig(hidden_sizes=(5,), dropout_rate=0.5)
    model.weights[0] = np.abs(model.weights[0])
    model.biases[0] = np.abs(model.biases[0])
    x = np.tile(rng.random(3), (200_000, 1))
    train_logits, _ = model.forward(x, rng=np.random.default_rng(1))
    infer_logits, _ = model.forward(x[:1])
    np.testing.assert_allclose(train_logits.mean(axis=0), infer_logits[0], rtol=0.02, atol=0.02)


def test_persistence_roundtrip(tmp_path):
    model = train_mlp(_xor_dataset(5), MlpConfig(hidden_sizes=(4,), epochs=2, batch_size=4))
    model.save(tmp_path / "m.model")
    back = MlpModel.load(tmp_path / "m.model")
    assert back.fingerprint == model.fingerprint
    assert back.config == model.config
    from transferids.container import ContainerError
    with pytest.raises(ContainerError):
        MlpModel.load(tmp_path / "m.model", expect_schema="deadbeef")
