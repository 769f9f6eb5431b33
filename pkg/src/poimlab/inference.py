"""Quantized forward passes, float reference, micro-steps and sign consistency.

The integer passes mirror the on-chain loop: each layer starts from its
bias and accumulates ``idiv(w * x, S)`` left to right, with ReLU between
hidden layers and never after the read-out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

from .errors import (
    EmptyValidationSet,
    MalformedTree,
    UnsupportedArch,
)
from .fixedpoint import (
    MAX_EXPONENT,
    MIN_EXPONENT,
    Real,
    Scale,
    ScaledInt,
    check_int128,
    check_int256,
    from_fixed,
    idiv,
    mac,
    to_fixed_raw,
)
from .models import (
    Cnn1d,
    DecisionTree,
    FloatModel,
    Linear,
    Mlp,
    QuantizedModel,
    Rnn,
    check_input,
)

UNIT_ROUNDOFF = 2.0 ** -53

Vector = Sequence[int]


def quantize(m: FloatModel, scale: Scale, version: int = 0) -> QuantizedModel:
    return QuantizedModel(
        arch=m.arch,
        weights=tuple(to_fixed_raw(w, scale) for w in m.weights),
        biases=tuple(to_fixed_raw(b, scale) for b in m.biases),
        scale=scale,
        version=version,
    )


def dequantize(q: QuantizedModel) -> FloatModel:
    S = q.S
    return FloatModel(
        q.arch,
        tuple(from_fixed(w, S) for w in q.weights),
        tuple(from_fixed(b, S) for b in q.biases),
    )


def quantize_input(x: Sequence[Real], scale: Scale) -> Tuple[int, ...]:
    return tuple(to_fixed_raw(v, scale) for v in x)


# -- integer forward passes ---------------------------------------------------

def _dense(inp: Vector, w: Vector, w_off: int, b: Vector, b_off: int,
           n_out: int, S: int, relu: bool) -> List[int]:
    n_in = len(inp)
    out = []
    for i in range(n_out):
        z = b[b_off + i]
        row = w_off + i * n_in
        for j in range(n_in):
            z = mac(z, w[row + j], inp[j], S)
        out.append(max(z, 0) if relu else z)
    return out


def _expect(model: QuantizedModel, kind) -> None:
    if not isinstance(model.arch, kind):
        raise UnsupportedArch(f"expected {kind.__name__}, got {model.arch.label}")


def forward_linear(x: Vector, model: QuantizedModel) -> int:
    _expect(model, Linear)
    check_input(x, model.arch)
    return _dense(x, model.weights, 0, model.biases, 0, 1, model.S, relu=False)[0]


def _mlp_hidden(x: Vector, model: QuantizedModel) -> List[int]:
    """Activations feeding the final layer."""
    arch: Mlp = model.arch
    act = list(x)
    layers = list(arch.layers())
    for n_in, n_out, w_off, b_off in layers[:-1]:
        act = _dense(act, model.weights, w_off, model.biases, b_off, n_out, model.S, relu=True)
    return act


def forward_mlp(x: Vector, model: QuantizedModel) -> int:
    _expect(model, Mlp)
    check_input(x, model.arch)
    hidden = _mlp_hidden(x, model)
    _, _, w_off, b_off = list(model.arch.layers())[-1]
    return _dense(hidden, model.weights, w_off, model.biases, b_off, 1, model.S, relu=False)[0]


def _cnn_features(x: Vector, model: QuantizedModel) -> List[int]:
    """Post-ReLU conv activations, flattened as ``f * o + p``."""
    arch: Cnn1d = model.arch
    F, K, o, S = arch.filters, arch.kernel, arch.positions, model.S
    w, b = model.weights, model.biases
    acts = []
    for f in range(F):
        for p in range(o):
            z = b[f]
            for k in range(K):
                z = mac(z, w[f * K + k], x[p + k], S)
            acts.append(max(z, 0))
    return acts


def forward_cnn1d(x: Vector, model: QuantizedModel) -> int:
    _expect(model, Cnn1d)
    check_input(x, model.arch)
    arch: Cnn1d = model.arch
    acts = _cnn_features(x, model)
    return _dense(acts, model.weights, arch.filters * arch.kernel,
                  model.biases, arch.filters, 1, model.S, relu=False)[0]


def _rnn_final_state(x: Vector, model: QuantizedModel) -> List[int]:
    arch: Rnn = model.arch
    U, T, d_in, S = arch.units, arch.timesteps, arch.step_width, model.S
    w, b = model.weights, model.biases
    padded = list(x) + [0] * (T * d_in - len(x))
    whh_off = U * d_in
    h = [0] * U
    for t in range(T):
        xt = padded[t * d_in:(t + 1) * d_in]
        nxt = []
        for u in range(U):
            z = b[u]
            for j in range(d_in):
                z = mac(z, w[u * d_in + j], xt[j], S)
            for v in range(U):
                z = mac(z, w[whh_off + u * U + v], h[v], S)
            nxt.append(max(z, 0))
        h = nxt
    return h


def forward_rnn(x: Vector, model: QuantizedModel) -> int:
    _expect(model, Rnn)
    check_input(x, model.arch)
    arch: Rnn = model.arch
    h = _rnn_final_state(x, model)
    out_off = arch.units * arch.step_width + arch.units * arch.units
    return _dense(h, model.weights, out_off, model.biases, arch.units, 1, model.S, relu=False)[0]


def _tree_leaf(x: Sequence, tree: DecisionTree, thresholds: Sequence) -> int:
    i = 0
    for _ in range(len(tree.nodes)):
        node = tree.nodes[i]
        if node.is_leaf:
            return node.label
        i = node.left if x[node.feature] <= thresholds[i] else node.right
    raise MalformedTree("descent did not reach a leaf")


def forward_tree(x: Vector, model: QuantizedModel) -> int:
    _expect(model, DecisionTree)
    check_input(x, model.arch)
    return _tree_leaf(x, model.arch, model.weights)


_FORWARDS = {
    Linear: forward_linear,
    Mlp: forward_mlp,
    Cnn1d: forward_cnn1d,
    Rnn: forward_rnn,
}


def forward(x: Vector, model: QuantizedModel) -> int:
    """Raw integer logit for any logit-producing architecture."""
    fn = _FORWARDS.get(type(model.arch))
    if fn is None:
        raise UnsupportedArch(f"{model.arch.label} has no logit; use predict()")
    return fn(x, model)


def classify(logit: int) -> int:
    # zero logit is benign
    return 1 if logit > 0 else 0


def predict(x: Vector, model: QuantizedModel) -> int:
    if isinstance(model.arch, DecisionTree):
        return forward_tree(x, model)
    return classify(forward(x, model))


# -- float reference ----------------------------------------------------------

def _fdense(inp: Sequence[float], w, w_off, b, b_off, n_out, relu) -> List[float]:
    n_in = len(inp)
    out = []
    for i in range(n_out):
        z = b[b_off + i]
        row = w_off + i * n_in
        for j in range(n_in):
            z += w[row + j] * inp[j]
        out.append(max(z, 0.0) if relu else z)
    return out


def reference_forward(x: Sequence[float], m: FloatModel) -> float:
    """Real-arithmetic logit with the same dataflow as the integer passes.

    Decision trees return 1.0 or 0.0 so that ``classify`` still applies.
    """
    arch = m.arch
    check_input(x, arch)
    x = [float(v) for v in x]
    w, b = m.weights, m.biases
    if isinstance(arch, Linear):
        return _fdense(x, w, 0, b, 0, 1, False)[0]
    if isinstance(arch, Mlp):
        act = x
        layers = list(arch.layers())
        for _, n_out, w_off, b_off in layers[:-1]:
            act = _fdense(act, w, w_off, b, b_off, n_out, True)
        _, _, w_off, b_off = layers[-1]
        return _fdense(act, w, w_off, b, b_off, 1, False)[0]
    if isinstance(arch, Cnn1d):
        F, K, o = arch.filters, arch.kernel, arch.positions
        acts = []
        for f in range(F):
            for p in range(o):
                z = b[f]
                for k in range(K):
                    z += w[f * K + k] * x[p + k]
                acts.append(max(z, 0.0))
        return _fdense(acts, w, F * K, b, F, 1, False)[0]
    if isinstance(arch, Rnn):
        U, T, d_in = arch.units, arch.timesteps, arch.step_width
        padded = x + [0.0] * (T * d_in - len(x))
        h = [0.0] * U
        for t in range(T):
            xt = padded[t * d_in:(t + 1) * d_in]
            nxt = []
            for u in range(U):
                z = b[u]
                for j in range(d_in):
                    z += w[u * d_in + j] * xt[j]
                for v in range(U):
                    z += w[U * d_in + u * U + v] * h[v]
                nxt.append(max(z, 0.0))
            h = nxt
        return _fdense(h, w, U * d_in + U * U, b, U, 1, False)[0]
    if isinstance(arch, DecisionTree):
        return float(_tree_leaf(x, arch, w))
    raise UnsupportedArch(f"unknown architecture {arch!r}")


def reference_predict(x: Sequence[float], m: FloatModel) -> int:
    return 1 if reference_forward(x, m) > 0 else 0


# -- micro-step training ------------------------------------------------------

def _output_layer(x: Vector, model: QuantizedModel) -> Tuple[List[int], int, int]:
    """Penultimate activations, read-out weight offset and read-out bias index."""
    arch = model.arch
    if isinstance(arch, Linear):
        return list(x), 0, 0
    if isinstance(arch, Mlp):
        _, _, w_off, b_off = list(arch.layers())[-1]
        return _mlp_hidden(x, model), w_off, b_off
    if isinstance(arch, Cnn1d):
        return _cnn_features(x, model), arch.filters * arch.kernel, arch.filters
    if isinstance(arch, Rnn):
        off = arch.units * arch.step_width + arch.units * arch.units
        return _rnn_final_state(x, model), off, arch.units
    raise UnsupportedArch(f"micro-steps are not defined for {arch.label}")


def micro_train_step(model: QuantizedModel, sample: Tuple[Vector, int],
                     eta: Union[int, ScaledInt]) -> QuantizedModel:
    """Mistake-driven perceptron update of the read-out layer.

    A correctly classified sample returns ``model`` unchanged.
    """
    x, y = sample
    if y not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {y!r}")
    check_input(x, model.arch)
    eta_raw = eta.raw if isinstance(eta, ScaledInt) else int(eta)
    acts, w_off, b_idx = _output_layer(x, model)
    logit = model.biases[b_idx]
    for j, a in enumerate(acts):
        logit = mac(logit, model.weights[w_off + j], a, model.S)
    if classify(logit) == y:
        return model

    step = eta_raw * (2 * y - 1)
    weights = list(model.weights)
    biases = list(model.biases)
    for j, a in enumerate(acts):
        weights[w_off + j] = check_int128(
            weights[w_off + j] + idiv(check_int256(step * a), model.S)
        )
    biases[b_idx] = check_int128(biases[b_idx] + step)
    return model.with_params(weights, biases, version=model.version + 1)


# -- sign consistency ---------------------------------------------------------

@dataclass(frozen=True)
class SignConsistencyReport:
    gamma: float
    delta: float
    holds: bool


@dataclass
class _Bound:
    fixed_err: float   # |fixed / S - exact|
    float_err: float   # |float reference - exact|
    magnitude: float   # |exact| upper bound


def _gamma_n(n: int) -> float:
    nu = n * UNIT_ROUNDOFF
    return nu / (1.0 - nu)


def _affine(bias: float, terms: Sequence[Tuple[float, _Bound]], S: int) -> _Bound:
    """Propagate error bounds through ``bias + sum(w * a)`` (ReLU is 1-Lipschitz)."""
    inv_s = 1.0 / S
    e = inv_s + UNIT_ROUNDOFF * abs(bias)
    f = 0.0
    mag = abs(bias)
    mag_float = abs(bias)
    for w, a in terms:
        aw = abs(w)
        ew = inv_s + UNIT_ROUNDOFF * aw
        # quantized product error, plus one truncating idiv
        e += (aw + ew) * a.fixed_err + a.magnitude * ew + inv_s
        f += aw * a.float_err
        mag += aw * a.magnitude
        mag_float += aw * (a.magnitude + a.float_err)
    f += _gamma_n(len(terms) + 1) * mag_float
    return _Bound(e, f, mag)


def _logit_bound(m: FloatModel, S: int, input_mag: Sequence[float]) -> _Bound:
    arch = m.arch
    w, b = m.weights, m.biases
    inv_s = 1.0 / S
    xs = [_Bound(inv_s + UNIT_ROUNDOFF * a, 0.0, a) for a in input_mag]
    zero = _Bound(0.0, 0.0, 0.0)

    def dense(inp, w_off, b_off, n_out, relu):
        n_in = len(inp)
        return [
            _affine(b[b_off + i], [(w[w_off + i * n_in + j], inp[j]) for j in range(n_in)], S)
            for i in range(n_out)
        ]

    if isinstance(arch, Linear):
        return dense(xs, 0, 0, 1, False)[0]
    if isinstance(arch, Mlp):
        act = xs
        layers = list(arch.layers())
        for _, n_out, w_off, b_off in layers[:-1]:
            act = dense(act, w_off, b_off, n_out, True)
        _, _, w_off, b_off = layers[-1]
        return dense(act, w_off, b_off, 1, False)[0]
    if isinstance(arch, Cnn1d):
        F, K, o = arch.filters, arch.kernel, arch.positions
        acts = [
            _affine(b[f], [(w[f * K + k], xs[p + k]) for k in range(K)], S)
            for f in range(F) for p in range(o)
        ]
        return dense(acts, F * K, F, 1, False)[0]
    if isinstance(arch, Rnn):
        U, T, d_in = arch.units, arch.timesteps, arch.step_width
        padded = xs + [zero] * (T * d_in - len(xs))
        h = [zero] * U
        for t in range(T):
            xt = padded[t * d_in:(t + 1) * d_in]
            h = [
                _affine(
                    b[u],
                    [(w[u * d_in + j], xt[j]) for j in range(d_in)]
                    + [(w[U * d_in + u * U + v], h[v]) for v in range(U)],
                    S,
                )
                for u in range(U)
            ]
        return dense(h, U * d_in + U * U, U, 1, False)[0]
    raise UnsupportedArch(f"no error bound for {arch.label}")


def _tree_margin(x: Sequence[float], tree: DecisionTree, thresholds: Sequence[float]) -> float:
    margin = math.inf
    i = 0
    while not tree.nodes[i].is_leaf:
        node = tree.nodes[i]
        margin = min(margin, abs(x[node.feature] - thresholds[i]))
        i = node.left if x[node.feature] <= thresholds[i] else node.right
    return margin


def quantization_error_bound(model: FloatModel, scale: Scale,
                             validation: Sequence[Sequence[float]]) -> float:
    """Worst-case gap between the quantized logit (in real units) and the float logit.

    The bound is composed layer by layer using the largest absolute input
    seen per feature over ``validation``.
    """
    S = scale.value
    d = model.arch.d
    mags = [max(abs(float(x[j])) for x in validation) for j in range(d)]
    if isinstance(model.arch, DecisionTree):
        tmax = max((abs(t) for t in model.weights), default=0.0)
        return 2.0 / S + UNIT_ROUNDOFF * (max(mags) + tmax)
    bound = _logit_bound(model, S, mags)
    # slack for evaluating the bound itself in floating point
    return (bound.fixed_err + bound.float_err) * (1.0 + 1e-9)


def sign_consistency(model: FloatModel, scale: Scale,
                     validation: Sequence[Sequence[float]]) -> SignConsistencyReport:
    if not validation:
        raise EmptyValidationSet("sign consistency needs at least one validation input")
    for x in validation:
        check_input(x, model.arch)
    if isinstance(model.arch, DecisionTree):
        gamma = min(_tree_margin(x, model.arch, model.weights) for x in validation)
    else:
        gamma = min(abs(reference_forward(x, model)) for x in validation)
    delta = quantization_error_bound(model, scale, validation)
    return SignConsistencyReport(gamma=gamma, delta=delta, holds=gamma > delta)


def certified_scale(model: FloatModel, validation: Sequence[Sequence[float]]) -> Optional[Scale]:
    """Smallest scale from which every larger scale is certified by gamma > delta."""
    best = None
    for exp in range(MAX_EXPONENT, MIN_EXPONENT - 1, -1):
        if not sign_consistency(model, Scale(exp), validation).holds:
            break
        best = Scale(exp)
    return best


def label_mismatches(model: FloatModel, scale: Scale,
                     validation: Sequence[Sequence[float]]) -> int:
    q = quantize(model, scale)
    return sum(
        predict(quantize_input(x, scale), q) != reference_predict(x, model)
        for x in validation
    )


__all__ = [
    "SignConsistencyReport",
    "certified_scale",
    "classify",
    "dequantize",
    "forward",
    "forward_cnn1d",
    "forward_linear",
    "forward_mlp",
    "forward_rnn",
    "forward_tree",
    "label_mismatches",
    "micro_train_step",
    "predict",
    "quantization_error_bound",
    "quantize",
    "quantize_input",
    "reference_forward",
    "reference_predict",
    "sign_consistency",
]
