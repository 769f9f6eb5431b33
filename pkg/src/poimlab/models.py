"""Model architectures and parameter containers.

Parameters are kept flat, row-major per layer, in the order the on-chain
forward pass reads them.  Layouts per architecture:

``Linear(d)``
    weights ``theta[0:d]``; biases ``[b]``.
``Mlp(d, layer_sizes)``
    for each layer ``l`` with ``n_in -> n_out``: ``W_l[i * n_in + j]``,
    layers concatenated; biases concatenated per layer.
``Cnn1d(d, filters F, kernel K)``, ``o = d - K + 1``
    weights ``conv[f * K + k]`` (F*K) then read-out ``v[f * o + p]`` (F*o);
    biases ``conv_bias[f]`` (F) then ``b_out``.
``Rnn(d, units U, timesteps T)``, ``d_in = ceil(d / T)``
    weights ``Wxh[u * d_in + j]`` (U*d_in), ``Whh[u * U + v]`` (U*U),
    ``Wout[u]`` (U); biases ``b[u]`` (U) then ``b_out``.
``DecisionTree(d, nodes)``
    weights hold one threshold per node (leaves carry 0); no biases.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import ClassVar, Iterator, Sequence, Tuple, Union

from .errors import (
    DimensionMismatch,
    KernelTooLarge,
    MalformedModel,
    MalformedTree,
)
from .fixedpoint import Scale, check_int128

LEAF = -1


def _positive(name: str, value: int) -> None:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise MalformedModel(f"{name} must be a positive integer, got {value!r}")


@dataclass(frozen=True)
class Linear:
    """Logistic regression / linear SVM: one MAC per feature plus a bias."""

    d: int
    tag: ClassVar[int] = 1

    def __post_init__(self):
        _positive("d", self.d)

    @property
    def n_weights(self) -> int:
        return self.d

    @property
    def n_biases(self) -> int:
        return 1

    def dims(self) -> Tuple[int, ...]:
        return (self.d,)

    @property
    def label(self) -> str:
        return f"Linear(d={self.d})"


@dataclass(frozen=True)
class Mlp:
    d: int
    layer_sizes: Tuple[int, ...]
    tag: ClassVar[int] = 2

    def __post_init__(self):
        _positive("d", self.d)
        object.__setattr__(self, "layer_sizes", tuple(self.layer_sizes))
        if not self.layer_sizes:
            raise MalformedModel("layer_sizes must be nonempty")
        for n in self.layer_sizes:
            _positive("layer size", n)
        if self.layer_sizes[-1] != 1:
            raise MalformedModel("final layer size must be 1")

    def layers(self) -> Iterator[Tuple[int, int, int, int]]:
        """Yield ``(n_in, n_out, weight_offset, bias_offset)`` per layer."""
        n_in, w_off, b_off = self.d, 0, 0
        for n_out in self.layer_sizes:
            yield n_in, n_out, w_off, b_off
            w_off += n_in * n_out
            b_off += n_out
            n_in = n_out

    @property
    def n_weights(self) -> int:
        return sum(n_in * n_out for n_in, n_out, _, _ in self.layers())

    @property
    def n_biases(self) -> int:
        return sum(self.layer_sizes)

    def dims(self) -> Tuple[int, ...]:
        return (self.d, len(self.layer_sizes), *self.layer_sizes)

    @property
    def label(self) -> str:
        return f"MLP(d={self.d}, {'x'.join(map(str, self.layer_sizes))})"


@dataclass(frozen=True)
class Cnn1d:
    d: int
    filters: int
    kernel: int
    tag: ClassVar[int] = 3

    def __post_init__(self):
        _positive("d", self.d)
        _positive("filters", self.filters)
        _positive("kernel", self.kernel)
        if self.kernel > self.d:
            raise KernelTooLarge(f"kernel {self.kernel} exceeds input dimension {self.d}")

    @property
    def positions(self) -> int:
        return self.d - self.kernel + 1

    @property
    def n_weights(self) -> int:
        return self.filters * self.kernel + self.filters * self.positions

    @property
    def n_biases(self) -> int:
        return self.filters + 1

    def dims(self) -> Tuple[int, ...]:
        return (self.d, self.filters, self.kernel)

    @property
    def label(self) -> str:
        return f"CNN(F{self.filters}, K{self.kernel})"


@dataclass(frozen=True)
class Rnn:
    """Elman recurrence with ReLU; input split into T chunks of ceil(d/T), zero-padded."""

    d: int
    units: int
    timesteps: int
    tag: ClassVar[int] = 4

    def __post_init__(self):
        _positive("d", self.d)
        _positive("units", self.units)
        _positive("timesteps", self.timesteps)

    @property
    def step_width(self) -> int:
        return math.ceil(self.d / self.timesteps)

    @property
    def n_weights(self) -> int:
        u = self.units
        return u * self.step_width + u * u + u

    @property
    def n_biases(self) -> int:
        return self.units + 1

    def dims(self) -> Tuple[int, ...]:
        return (self.d, self.units, self.timesteps)

    @property
    def label(self) -> str:
        return f"RNN(U{self.units}, T{self.timesteps})"


@dataclass(frozen=True)
class TreeNode:
    """Internal node when ``feature >= 0``; leaf (emitting ``label``) otherwise."""

    feature: int = LEAF
    left: int = 0
    right: int = 0
    label: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.feature == LEAF


@dataclass(frozen=True)
class DecisionTree:
    d: int
    nodes: Tuple[TreeNode, ...]
    tag: ClassVar[int] = 5

    def __post_init__(self):
        _positive("d", self.d)
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if not self.nodes:
            raise MalformedTree("tree has no nodes")
        n = len(self.nodes)
        for i, node in enumerate(self.nodes):
            if node.is_leaf:
                if node.label not in (0, 1):
                    raise MalformedTree(f"leaf {i} label {node.label} not in {{0, 1}}")
                continue
            if not 0 <= node.feature < self.d:
                raise MalformedTree(f"node {i} tests feature {node.feature} outside [0, {self.d})")
            # children strictly after their parent keeps the tree acyclic
            for child in (node.left, node.right):
                if not i < child < n:
                    raise MalformedTree(f"node {i} has invalid child index {child}")

    @property
    def n_weights(self) -> int:
        return len(self.nodes)

    @property
    def n_biases(self) -> int:
        return 0

    def dims(self) -> Tuple[int, ...]:
        out = [self.d, len(self.nodes)]
        for node in self.nodes:
            out.extend((node.feature, node.left, node.right, node.label))
        return tuple(out)

    def depth(self) -> int:
        def walk(i: int) -> int:
            node = self.nodes[i]
            return 0 if node.is_leaf else 1 + max(walk(node.left), walk(node.right))

        return walk(0)

    @property
    def label(self) -> str:
        return f"DecisionTree(d={self.d}, nodes={len(self.nodes)})"


ModelArch = Union[Linear, Mlp, Cnn1d, Rnn, DecisionTree]
ARCH_BY_TAG = {cls.tag: cls for cls in (Linear, Mlp, Cnn1d, Rnn, DecisionTree)}


def arch_from_dims(tag: int, dims: Sequence[int]) -> ModelArch:
    """Rebuild an architecture from its tag and flat dimension list."""
    dims = list(dims)
    try:
        if tag == Linear.tag and len(dims) == 1:
            return Linear(dims[0])
        if tag == Mlp.tag and len(dims) >= 2 and len(dims) == 2 + dims[1]:
            return Mlp(dims[0], tuple(dims[2:]))
        if tag == Cnn1d.tag and len(dims) == 3:
            return Cnn1d(*dims)
        if tag == Rnn.tag and len(dims) == 3:
            return Rnn(*dims)
        if tag == DecisionTree.tag and len(dims) >= 2 and len(dims) == 2 + 4 * dims[1]:
            nodes = tuple(
                TreeNode(*dims[2 + 4 * i: 6 + 4 * i]) for i in range(dims[1])
            )
            return DecisionTree(dims[0], nodes)
    except TypeError as exc:
        raise MalformedModel(str(exc)) from exc
    raise MalformedModel(f"bad dimensions {dims} for architecture tag {tag}")


def arch_input_dim(arch: ModelArch) -> int:
    return arch.d


def _check_counts(arch: ModelArch, weights: Sequence, biases: Sequence) -> None:
    if len(weights) != arch.n_weights:
        raise MalformedModel(
            f"{arch.label} expects {arch.n_weights} weights, got {len(weights)}"
        )
    if len(biases) != arch.n_biases:
        raise MalformedModel(
            f"{arch.label} expects {arch.n_biases} biases, got {len(biases)}"
        )


@dataclass(frozen=True)
class QuantizedModel:
    arch: ModelArch
    weights: Tuple[int, ...]
    biases: Tuple[int, ...]
    scale: Scale
    version: int = 0

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(int(w) for w in self.weights))
        object.__setattr__(self, "biases", tuple(int(b) for b in self.biases))
        _check_counts(self.arch, self.weights, self.biases)
        for raw in self.weights + self.biases:
            check_int128(raw)
        if self.version < 0:
            raise MalformedModel("version must be non-negative")

    @property
    def S(self) -> int:
        return self.scale.value

    def params_equal(self, other: "QuantizedModel") -> bool:
        """Field-by-field equality of everything except the version."""
        return (
            self.arch == other.arch
            and self.weights == other.weights
            and self.biases == other.biases
            and self.scale == other.scale
        )

    def with_params(self, weights, biases, version=None) -> "QuantizedModel":
        return replace(
            self,
            weights=tuple(weights),
            biases=tuple(biases),
            version=self.version if version is None else version,
        )


@dataclass(frozen=True)
class FloatModel:
    arch: ModelArch
    weights: Tuple[float, ...]
    biases: Tuple[float, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "biases", tuple(float(b) for b in self.biases))
        _check_counts(self.arch, self.weights, self.biases)
        for v in self.weights + self.biases:
            if not math.isfinite(v):
                raise MalformedModel("float model parameters must be finite")


def check_input(x: Sequence, arch: ModelArch) -> None:
    if len(x) != arch.d:
        raise DimensionMismatch(f"{arch.label} expects {arch.d} inputs, got {len(x)}")


def zero_model(arch: ModelArch) -> FloatModel:
    return FloatModel(arch, (0.0,) * arch.n_weights, (0.0,) * arch.n_biases)
