import json

import pytest
from hypothesis import given, strategies as st

from conftest import small_tree
from poimlab.errors import KernelTooLarge
from poimlab.fixedpoint import Scale
from poimlab.gascost import (
    BASE_TX_GAS,
    BLOCK_GAS_LIMIT,
    BUDGET,
    analytic_gas,
    gas_cnn,
    gas_for_model,
    gas_linear,
    gas_mlp,
    gas_rnn,
    gas_to_usd,
    gas_tree,
    report_for_arch,
)
from poimlab.inference import quantize
from poimlab.models import Cnn1d, Linear, Mlp, Rnn, zero_model


def test_unit_prices():
    assert BUDGET.g_mac == 124
    assert BUDGET.bias_init == 103
    assert BUDGET.G_R == 5


@pytest.mark.parametrize("d,gas", [(3, 475), (1, 227), (100, 12503)])
def test_gas_linear(d, gas):
    assert gas_linear(d) == gas


@pytest.mark.parametrize("d,K,F,gas", [(3, 2, 2, 1714), (3, 2, 4, 3428), (3, 3, 8, 4832)])
def test_gas_cnn_published_rows(d, K, F, gas):
    assert gas_cnn(d, K, F) == gas


@pytest.mark.parametrize("d,U,T,gas", [(3, 4, 2, 7064), (3, 8, 4, 40160), (3, 1, 1, 635)])
def test_gas_rnn(d, U, T, gas):
    assert gas_rnn(d, U, T) == gas


def test_gas_cnn_kernel_too_large():
    with pytest.raises(KernelTooLarge):
        gas_cnn(3, 4, 1)


@given(st.integers(1, 60), st.integers(1, 60), st.integers(1, 16))
def test_gas_cnn_formula_by_opcode_count(d, K, F):
    if K > d:
        return
    o = d - K + 1
    macs = F * o * K + F * o          # conv taps plus the output layer
    assert gas_cnn(d, K, F) == 124 * macs + 5 * F * o + 103 * F


@given(st.integers(1, 50), st.integers(1, 10), st.integers(1, 10))
def test_gas_rnn_formula_by_opcode_count(d, U, T):
    d_in = -(-d // T)
    per_unit_step = d_in + U + 1
    assert gas_rnn(d, U, T) == 124 * T * U * per_unit_step + 15 * T * U


def test_gas_mlp_composition():
    # 3 -> 4 -> 1: four linear units over 3 inputs, ReLU on 4, one unit over 4
    assert gas_mlp(3, (4, 1)) == 4 * gas_linear(3) + 5 * 4 + gas_linear(4)
    assert gas_mlp(3, (1,)) == gas_linear(3)


def test_gas_tree_depth():
    t = small_tree()
    assert gas_tree(t) == 2 * (100 + 3 + 3 + 8) + 100


def test_analytic_dispatch():
    assert analytic_gas(Linear(3)) == 475
    assert analytic_gas(Cnn1d(3, 2, 2)) == 1714
    assert analytic_gas(Rnn(3, 8, 4)) == 40160
    assert analytic_gas(Mlp(3, (4, 1))) == gas_mlp(3, (4, 1))


def test_report_linear():
    r = report_for_arch(Linear(3))
    assert (r.analytic_gas, r.total, r.within_block_limit) == (475, 21475, True)
    assert r.base_tx_gas == BASE_TX_GAS
    doc = json.loads(r.to_json())
    assert doc["total"] == 21475


def test_report_block_limit():
    r = report_for_arch(Linear(300_000))
    assert r.total > BLOCK_GAS_LIMIT
    assert not r.within_block_limit


def test_gas_for_model_uses_arch():
    q = quantize(zero_model(Cnn1d(3, 2, 2)), Scale(6), version=4)
    r = gas_for_model(q)
    assert r.analytic_gas == 1714
    assert r.model_id.endswith("@v4")


def test_gas_to_usd():
    assert gas_to_usd(0, 30, 3000) == 0
    assert gas_to_usd(10 ** 9, 1, 1) == pytest.approx(1.0)
    # 57603 gas at 20 gwei and $2500: 57603 * 20e-9 * 2500 = 2.88015
    assert gas_to_usd(57603, 20, 2500) == pytest.approx(2.88015, rel=1e-12)
    with pytest.raises(ValueError):
        gas_to_usd(-1, 1, 1)


def test_report_with_pricing():
    r = report_for_arch(Linear(3), gas_price_gwei=10, token_usd=2000)
    assert r.usd_cost == pytest.approx(21475 * 10e-9 * 2000)
