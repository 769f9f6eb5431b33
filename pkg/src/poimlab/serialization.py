"""Canonical byte layout of a quantized model.

::

    "PIM1"                      4 octets
    version                     32 octets, big-endian unsigned
    arch tag                    1 octet
    arch dims                   32 octets each, big-endian two's complement
    scale exponent              1 octet
    weights, then biases        32 octets each, big-endian two's complement

The number of dims follows from the tag (and, for MLPs and trees, from the
second dim); weight and bias counts follow from the architecture.  There is
no padding and no trailing data.
"""
from __future__ import annotations

from typing import List, Tuple

from .errors import MalformedBytes, MalformedModel, ScaleError
from .fixedpoint import Scale
from .models import ARCH_BY_TAG, DecisionTree, Mlp, QuantizedModel, arch_from_dims

MAGIC = b"PIM1"
WORD = 32


def _word(value: int) -> bytes:
    return value.to_bytes(WORD, "big", signed=True)


def serialize(model: QuantizedModel) -> bytes:
    out = bytearray(MAGIC)
    out += model.version.to_bytes(WORD, "big", signed=False)
    out.append(model.arch.tag)
    for dim in model.arch.dims():
        out += _word(dim)
    out.append(model.scale.exponent)
    for raw in model.weights + model.biases:
        out += _word(raw)
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedBytes(f"truncated payload: need {n} octets at offset {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def word(self) -> int:
        return int.from_bytes(self.take(WORD), "big", signed=True)

    def words(self, n: int) -> List[int]:
        return [self.word() for _ in range(n)]


def _read_dims(r: _Reader, tag: int) -> List[int]:
    if tag == Mlp.tag:
        head = r.words(2)
        if not 1 <= head[1] <= 1024:
            raise MalformedBytes(f"implausible MLP layer count {head[1]}")
        return head + r.words(head[1])
    if tag == DecisionTree.tag:
        head = r.words(2)
        if not 1 <= head[1] <= 1 << 16:
            raise MalformedBytes(f"implausible tree node count {head[1]}")
        return head + r.words(4 * head[1])
    return r.words(1 if tag == 1 else 3)


def deserialize(data: bytes) -> QuantizedModel:
    r = _Reader(bytes(data))
    if r.take(4) != MAGIC:
        raise MalformedBytes("bad magic")
    version = int.from_bytes(r.take(WORD), "big", signed=False)
    tag = r.take(1)[0]
    if tag not in ARCH_BY_TAG:
        raise MalformedBytes(f"unknown architecture tag {tag}")
    dims = _read_dims(r, tag)
    try:
        arch = arch_from_dims(tag, dims)
        scale = Scale(r.take(1)[0])
    except (MalformedModel, ScaleError, ValueError) as exc:
        raise MalformedBytes(f"dimension mismatch: {exc}") from exc
    if arch.n_weights + arch.n_biases > (len(data) - r.pos) // WORD + 1:
        raise MalformedBytes("truncated payload: parameter section too short")
    weights = r.words(arch.n_weights)
    biases = r.words(arch.n_biases)
    if r.pos != len(data):
        raise MalformedBytes(f"{len(data) - r.pos} trailing octets")
    try:
        return QuantizedModel(arch, tuple(weights), tuple(biases), scale, version)
    except (MalformedModel, OverflowError) as exc:
        raise MalformedBytes(str(exc)) from exc


def layout_length(model: QuantizedModel) -> int:
    n_dims = len(model.arch.dims())
    return 4 + WORD + 1 + WORD * n_dims + 1 + WORD * (model.arch.n_weights + model.arch.n_biases)


def split_params(model: QuantizedModel) -> Tuple[Tuple[int, ...], Tuple[int, ...], Tuple[int, ...]]:
    """``(weights, biases, layer/structure dims)`` as the contracts expose them."""
    return model.weights, model.biases, model.arch.dims()
