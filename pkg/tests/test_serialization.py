import pytest
from hypothesis import given, strategies as st

from conftest import archs_for, random_quantized, small_tree
from oracles import keccak256_ref
from poimlab.errors import MalformedBytes
from poimlab.fixedpoint import INT128_BOUND, Scale
from poimlab.hashing import canonical_json, digest_hex, keccak256
from poimlab.inference import quantize
from poimlab.models import Cnn1d, Linear, Mlp, QuantizedModel, Rnn, zero_model
from poimlab.serialization import MAGIC, WORD, deserialize, layout_length, serialize

EMPTY = "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"
ABC = "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45"


def test_keccak_vectors():
    assert keccak256(b"").hex() == EMPTY
    assert keccak256(b"abc").hex() == ABC
    assert keccak256_ref(b"").hex() == EMPTY
    assert keccak256_ref(b"abc").hex() == ABC


def test_keccak_is_not_sha3():
    import hashlib
    assert keccak256(b"").hex() != hashlib.sha3_256(b"").hexdigest()


@given(st.binary(max_size=600))
def test_keccak_matches_reference_sponge(data):
    assert keccak256(data) == keccak256_ref(data)


def test_canonical_json_is_order_free():
    assert canonical_json({"b": 1, "a": [1, 2]}) == canonical_json({"a": [1, 2], "b": 1})
    assert digest_hex({"x": 1}).startswith("0x")


def test_zero_linear_layout():
    q = quantize(zero_model(Linear(1)), Scale(6))
    data = serialize(q)
    assert len(data) == 4 + 32 + 1 + 32 + 1 + 32 + 32
    assert data[:4] == MAGIC
    assert data[36] == 1                      # arch tag
    assert int.from_bytes(data[37:69], "big") == 1  # d
    assert data[69] == 6                      # scale exponent
    assert layout_length(q) == len(data)


def test_negative_weight_is_twos_complement():
    q = QuantizedModel(Linear(1), (-1,), (0,), Scale(1))
    data = serialize(q)
    assert data[70:70 + WORD] == b"\xff" * WORD


@pytest.mark.parametrize("seed", range(5))
def test_round_trip_every_arch(seed):
    import numpy as np
    rng = np.random.default_rng(seed)
    for arch in archs_for(3) + [Mlp(4, (3, 2, 1)), Cnn1d(5, 3, 3), Rnn(3, 8, 4)]:
        q = random_quantized(arch, rng, S=10 ** 12, spread=10 ** 18, version=seed * 7)
        data = serialize(q)
        back = deserialize(data)
        assert back == q
        assert serialize(back) == data


@given(st.lists(st.integers(-(INT128_BOUND - 1), INT128_BOUND - 1), min_size=4, max_size=4),
       st.integers(0, 2 ** 64), st.integers(1, 18))
def test_round_trip_extremes(params, version, e):
    q = QuantizedModel(Linear(3), params[:3], params[3:], Scale(e), version)
    assert deserialize(serialize(q)) == q


def test_tree_round_trip():
    q = QuantizedModel(small_tree(), (1, -2, 3, 0, 0), (), Scale(3))
    assert deserialize(serialize(q)) == q


def _good():
    return serialize(QuantizedModel(Cnn1d(3, 2, 2), tuple(range(8)), (1, 2, 3), Scale(4)))


def test_bad_magic():
    data = bytearray(_good())
    data[0] ^= 0xFF
    with pytest.raises(MalformedBytes):
        deserialize(bytes(data))


def test_truncated():
    data = _good()
    for cut in (0, 3, 10, 40, 70, len(data) - 1):
        with pytest.raises(MalformedBytes):
            deserialize(data[:cut])


def test_trailing_bytes():
    with pytest.raises(MalformedBytes):
        deserialize(_good() + b"\x00")


def test_unknown_tag():
    data = bytearray(_good())
    data[36] = 99
    with pytest.raises(MalformedBytes):
        deserialize(bytes(data))


def test_dim_mismatch():
    data = bytearray(_good())
    data[36 + 1 + 2 * WORD + WORD - 1] = 9   # kernel 9 > d 3
    with pytest.raises(MalformedBytes):
        deserialize(bytes(data))


def test_bad_scale_byte():
    data = bytearray(_good())
    data[36 + 1 + 3 * WORD] = 0
    with pytest.raises(MalformedBytes):
        deserialize(bytes(data))


def test_oversized_param_rejected():
    data = bytearray(serialize(QuantizedModel(Linear(1), (0,), (0,), Scale(1))))
    data[-WORD:] = (INT128_BOUND).to_bytes(WORD, "big", signed=True)
    with pytest.raises(MalformedBytes):
        deserialize(bytes(data))


def test_hash_determinism():
    q = quantize(zero_model(Mlp(3, (2, 1))), Scale(8))
    assert keccak256(serialize(q)) == keccak256(serialize(deserialize(serialize(q))))
