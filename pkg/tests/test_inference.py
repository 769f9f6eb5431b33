import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import archs_for, random_quantized, small_tree
from oracles import oracle_label, oracle_logit, sdiv
from poimlab.errors import DimensionMismatch, EmptyValidationSet, KernelTooLarge, MalformedTree, UnsupportedArch
from poimlab.fixedpoint import Scale
from poimlab.inference import (
    certified_scale,
    classify,
    dequantize,
    forward,
    forward_cnn1d,
    forward_linear,
    forward_mlp,
    forward_rnn,
    forward_tree,
    label_mismatches,
    micro_train_step,
    predict,
    quantize,
    quantize_input,
    reference_forward,
    reference_predict,
    sign_consistency,
)
from poimlab.models import (
    Cnn1d,
    DecisionTree,
    FloatModel,
    Linear,
    Mlp,
    QuantizedModel,
    Rnn,
    TreeNode,
    zero_model,
)

S6 = Scale(6)
S = S6.value


def qm(arch, w, b, scale=S6):
    return QuantizedModel(arch, w, b, scale)


# -- quantize -----------------------------------------------------------------

def test_quantize_examples():
    m = FloatModel(Linear(2), (1.0, -0.5), (0.0,))
    assert quantize(m, S6).weights == (1_000_000, -500_000)
    z = quantize(zero_model(Mlp(3, (2, 1))), S6)
    assert set(z.weights + z.biases) == {0}


def test_quantize_matches_exact_truncation(rng):
    w = rng.uniform(-10, 10, 50).tolist()
    q = quantize(FloatModel(Linear(50), w, (0.0,)), Scale(12))
    for wi, raw in zip(w, q.weights):
        # exact rational of the decimal repr, truncated toward zero
        assert raw == math.trunc(Fraction(repr(wi)) * 10 ** 12)


def test_dequantize_round_trip():
    m = FloatModel(Cnn1d(3, 2, 2), [0.5, -0.25, 1.5, 2.0, 0.1, 0.2, 0.3, 0.4], [0.0, 1.0, -1.0])
    assert quantize(dequantize(quantize(m, S6)), S6).params_equal(quantize(m, S6))


# -- forward passes, examples -------------------------------------------------

def test_linear_examples():
    m = qm(Linear(3), (S, -S, 0), (0,))
    assert forward_linear((2 * S, S, 5 * S), m) == S
    m2 = qm(Linear(3), (123, -456, 789), (42,))
    assert forward_linear((0, 0, 0), m2) == 42


def test_mlp_identity_and_relu():
    ident = qm(Mlp(1, (1,)), (S,), (0,))
    for k in (-3, 0, 5):
        assert forward_mlp((k * S,), ident) == k * S
    # hidden pre-activation is -S, ReLU zeroes it, output is just the bias
    m = qm(Mlp(1, (1, 1)), (S, S), (-2 * S, 7))
    assert forward_mlp((S,), m) == 7


def test_no_relu_after_final_layer():
    m = qm(Mlp(1, (1, 1)), (S, -S), (0, 0))
    assert forward_mlp((S,), m) == -S


def test_cnn_examples():
    m = qm(Cnn1d(3, 1, 1), (S, S, S, S), (0, 0))
    assert forward_cnn1d((S, 2 * S, 3 * S), m) == 6 * S
    rnd = qm(Cnn1d(3, 2, 2), (5, -3, 8, 1, 2, 2, -1, -1), (0, 0, 0))
    assert forward_cnn1d((0, 0, 0), rnd) == 0
    with pytest.raises(KernelTooLarge):
        Cnn1d(3, 1, 4)


def test_rnn_examples():
    m = qm(Rnn(1, 1, 1), (S, 0, S), (0, 0))
    for k in (1, 4):
        assert forward_rnn((k * S,), m) == k * S
    z = qm(Rnn(3, 2, 2), tuple(range(1, 11)), (0, 0, 0))
    assert forward_rnn((0, 0, 0), z) == 0


def test_rnn_pads_when_timesteps_exceed_width():
    arch = Rnn(3, 8, 4)
    assert arch.step_width == 1
    m = random_quantized(arch, np.random.default_rng(0), S=10)
    x = (7, -3, 12)
    assert forward_rnn(x, m) == oracle_logit(m, x)


def test_tree_examples():
    tree = DecisionTree(1, (TreeNode(0, 1, 2), TreeNode(label=0), TreeNode(label=1)))
    m = qm(tree, (0, 0, 0), ())
    assert forward_tree((-S,), m) == 0
    assert forward_tree((S,), m) == 1
    assert forward_tree((0,), m) == 0   # x <= t goes left
    with pytest.raises(UnsupportedArch):
        forward((0,), m)


def test_tree_validation():
    with pytest.raises(MalformedTree):
        DecisionTree(1, (TreeNode(0, 0, 1), TreeNode(label=0)))
    with pytest.raises(MalformedTree):
        DecisionTree(1, (TreeNode(3, 1, 2), TreeNode(label=0), TreeNode(label=1)))
    with pytest.raises(MalformedTree):
        DecisionTree(1, (TreeNode(label=2),))


def test_dimension_mismatch():
    m = qm(Linear(3), (1, 2, 3), (0,))
    with pytest.raises(DimensionMismatch):
        forward_linear((1, 2), m)


@pytest.mark.parametrize("logit,label", [(S, 1), (1, 1), (0, 0), (-1, 0)])
def test_classify(logit, label):
    assert classify(logit) == label


# -- forward passes against the brute-force oracle ---------------------------

@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_all_archs_match_oracle_random(d):
    rng = np.random.default_rng(d)
    for arch in archs_for(d):
        for _ in range(5):
            m = random_quantized(arch, rng, S=100)
            for _ in range(40):
                x = tuple(rng.integers(-200, 201, d).tolist())
                assert predict(x, m) == oracle_label(m, x)
                if not isinstance(arch, DecisionTree):
                    assert forward(x, m) == oracle_logit(m, x)


@given(st.data())
def test_mlp_matches_oracle_property(data):
    sizes = tuple(data.draw(st.lists(st.integers(1, 4), min_size=0, max_size=2))) + (1,)
    d = data.draw(st.integers(1, 4))
    arch = Mlp(d, sizes)
    w = data.draw(st.lists(st.integers(-10 ** 8, 10 ** 8), min_size=arch.n_weights, max_size=arch.n_weights))
    b = data.draw(st.lists(st.integers(-10 ** 8, 10 ** 8), min_size=arch.n_biases, max_size=arch.n_biases))
    x = data.draw(st.lists(st.integers(-10 ** 8, 10 ** 8), min_size=d, max_size=d))
    m = qm(arch, w, b)
    assert forward_mlp(x, m) == oracle_logit(m, x)


def test_sdiv_oracle_agrees_with_floor_division_on_positives():
    assert all(sdiv(a, 7) == a // 7 for a in range(0, 200))


# -- float reference ----------------------------------------------------------

def _np_reference(m, x):
    """Second float implementation, vectorised with numpy."""
    arch, w, b = m.arch, np.array(m.weights), np.array(m.biases)
    x = np.array(x, dtype=float)
    relu = lambda v: np.maximum(v, 0.0)  # noqa: E731
    if isinstance(arch, Linear):
        return float(w @ x + b[0])
    if isinstance(arch, Mlp):
        act, wi, bi, n_in = x, 0, 0, arch.d
        for li, n in enumerate(arch.layer_sizes):
            z = w[wi:wi + n * n_in].reshape(n, n_in) @ act + b[bi:bi + n]
            act = z if li == len(arch.layer_sizes) - 1 else relu(z)
            wi, bi, n_in = wi + n * n_in, bi + n, n
        return float(act[0])
    if isinstance(arch, Cnn1d):
        F, K = arch.filters, arch.kernel
        o = arch.d - K + 1
        ker = w[:F * K].reshape(F, K)
        feats = np.array([[ker[f] @ x[p:p + K] + b[f] for p in range(o)] for f in range(F)])
        return float(w[F * K:] @ relu(feats).ravel() + b[F])
    if isinstance(arch, Rnn):
        U, T, d_in = arch.units, arch.timesteps, arch.step_width
        Wx = w[:U * d_in].reshape(U, d_in)
        Wh = w[U * d_in:U * d_in + U * U].reshape(U, U)
        xs = np.concatenate([x, np.zeros(T * d_in - arch.d)])
        h = np.zeros(U)
        for t in range(T):
            h = relu(Wx @ xs[t * d_in:(t + 1) * d_in] + Wh @ h + b[:U])
        return float(w[U * d_in + U * U:] @ h + b[U])
    raise TypeError(arch)


def test_reference_forward_examples():
    assert reference_forward([0.7], FloatModel(Linear(1), (1.0,), (0.0,))) == pytest.approx(0.7)
    assert reference_forward([1.0, 2.0], zero_model(Linear(2))) == 0.0


def test_reference_forward_matches_numpy(rng):
    for arch in archs_for(4)[:4]:
        for _ in range(10):
            m = FloatModel(arch, rng.uniform(-3, 3, arch.n_weights), rng.uniform(-3, 3, arch.n_biases))
            x = rng.uniform(-2, 2, 4).tolist()
            assert reference_forward(x, m) == pytest.approx(_np_reference(m, x), rel=1e-12, abs=1e-12)


def test_tree_float_threshold_oracle(rng):
    tree = DecisionTree(3, (
        TreeNode(0, 1, 2), TreeNode(1, 3, 4), TreeNode(2, 5, 6),
        TreeNode(label=0), TreeNode(label=1), TreeNode(label=1), TreeNode(label=0),
    ))
    for _ in range(20):
        fm = FloatModel(tree, rng.uniform(-1, 1, 7), ())
        q = quantize(fm, S6)
        for _ in range(30):
            x = rng.uniform(-2, 2, 3).tolist()
            if any(abs(x[n.feature] - t) < 2.0 / S for n, t in zip(tree.nodes, fm.weights) if n.feature >= 0):
                continue
            assert forward_tree(quantize_input(x, S6), q) == reference_predict(x, fm)


# -- micro-step ---------------------------------------------------------------

def test_micro_step_analytic():
    m = qm(Linear(3), (0, 0, 0), (0,))
    out = micro_train_step(m, ((S, 0, 0), 1), S // 2)
    assert out.weights == (S // 2, 0, 0)
    assert out.biases == (S // 2,)
    assert out.version == m.version + 1


def test_micro_step_correct_sample_is_noop():
    m = qm(Linear(2), (S, S), (0,))
    assert micro_train_step(m, ((S, S), 1), S) is m


def test_micro_step_negative_label_moves_weights_down(rng):
    for _ in range(50):
        w = rng.integers(-S, S, 3).tolist()
        m = qm(Linear(3), w, (S,))
        x = tuple(rng.integers(-S, S, 3).tolist())
        if predict(x, m) == 0:
            continue
        eta = S // 4
        out = micro_train_step(m, (x, 0), eta)
        assert list(out.weights) == [wi + sdiv(-eta * xi, S) for wi, xi in zip(w, x)]
        assert out.biases == (S - eta,)


def test_micro_step_only_touches_readout():
    rng = np.random.default_rng(5)
    for arch in (Mlp(3, (3, 1)), Cnn1d(3, 2, 2), Rnn(3, 2, 2)):
        m = random_quantized(arch, rng, S=100)
        for _ in range(30):
            x = tuple(rng.integers(-200, 201, 3).tolist())
            y = 1 - predict(x, m)
            out = micro_train_step(m, (x, y), 100)
            readout = {Mlp: 3 * 3, Cnn1d: 2 * 2, Rnn: 2 * 2 + 2 * 2}[type(arch)]
            assert out.weights[:readout] == m.weights[:readout]
            assert out.biases[:-1] == m.biases[:-1]


def test_micro_step_rejects_tree():
    m = qm(small_tree(), (0,) * 5, ())
    with pytest.raises(UnsupportedArch):
        micro_train_step(m, ((0, 0, 0), 1), S)


# -- sign consistency ---------------------------------------------------------

def test_sign_consistency_zero_logit_never_holds():
    m = FloatModel(Linear(1), (1.0,), (0.0,))
    rep = sign_consistency(m, Scale(12), [[0.0], [1.0]])
    assert rep.gamma == 0.0
    assert not rep.holds


def test_sign_consistency_empty():
    with pytest.raises(EmptyValidationSet):
        sign_consistency(zero_model(Linear(1)), S6, [])


def test_sign_consistency_linear_high_scale(rng):
    m = FloatModel(Linear(3), rng.uniform(-10, 10, 3), rng.uniform(-1, 1, 1))
    pts = rng.uniform(-1, 1, (100, 3)).tolist()
    rep = sign_consistency(m, Scale(12), pts)
    assert rep.holds
    assert label_mismatches(m, Scale(12), pts) == 0


def test_certificate_is_sound_for_every_arch(rng):
    # wherever the certificate holds, fixed and float labels must agree
    for arch in archs_for(3)[:4]:
        for _ in range(5):
            m = FloatModel(arch, rng.uniform(-3, 3, arch.n_weights), rng.uniform(-3, 3, arch.n_biases))
            pts = rng.uniform(-2, 2, (20, 3)).tolist()
            for e in (2, 4, 6, 9):
                if sign_consistency(m, Scale(e), pts).holds:
                    assert label_mismatches(m, Scale(e), pts) == 0


def test_delta_shrinks_with_scale(rng):
    m = FloatModel(Mlp(3, (4, 1)), rng.uniform(-1, 1, 16), rng.uniform(-1, 1, 5))
    pts = rng.uniform(-1, 1, (10, 3)).tolist()
    deltas = [sign_consistency(m, Scale(e), pts).delta for e in range(2, 16, 2)]
    assert deltas == sorted(deltas, reverse=True)


def test_certified_scale_is_monotone(rng):
    m = FloatModel(Linear(3), rng.uniform(-10, 10, 3), (0.5,))
    pts = rng.uniform(-1, 1, (30, 3)).tolist()
    s_star = certified_scale(m, pts)
    assert s_star is not None
    for e in range(s_star.exponent, 19):
        assert sign_consistency(m, Scale(e), pts).holds
