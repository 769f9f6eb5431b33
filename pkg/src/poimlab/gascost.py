"""Analytic gas model for on-chain inference.

Costs are counted per multiply-accumulate at the Berlin fee schedule with
warm storage reads.  Closed forms exist for the linear, CNN and RNN
classifiers; MLPs and trees are costed by composing the same unit prices.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

from .errors import KernelTooLarge, UnsupportedArch
from .models import Cnn1d, DecisionTree, Linear, Mlp, QuantizedModel, Rnn

BLOCK_GAS_LIMIT = 30_000_000
BASE_TX_GAS = 21_000


@dataclass(frozen=True)
class OpcodeBudget:
    G_S: int = 100   # SLOAD, warm
    G_C: int = 3     # CALLDATALOAD
    G_M: int = 5     # MUL
    G_D: int = 5     # DIV
    G_A: int = 3     # ADD
    G_L: int = 8     # loop / stack bookkeeping
    G_R: int = 5     # ReLU per activation

    @property
    def g_mac(self) -> int:
        return self.G_S + self.G_C + self.G_M + self.G_D + self.G_A + self.G_L

    @property
    def bias_init(self) -> int:
        return self.G_S + self.G_A


BUDGET = OpcodeBudget()
RNN_STEP_OVERHEAD = 15  # per unit per timestep, charged as a lump


def gas_linear(d: int) -> int:
    if d < 1:
        raise ValueError("d must be >= 1")
    return BUDGET.g_mac * d + BUDGET.bias_init


def gas_cnn(d: int, K: int, F: int) -> int:
    if K > d:
        raise KernelTooLarge(f"kernel {K} exceeds input dimension {d}")
    o = d - K + 1
    return BUDGET.g_mac * F * o * (K + 1) + BUDGET.G_R * F * o + BUDGET.bias_init * F


def gas_rnn(d: int, U: int, T: int) -> int:
    if T < 1:
        raise ValueError("T must be >= 1")
    d_in = math.ceil(d / T)
    return BUDGET.g_mac * T * U * (d_in + U + 1) + RNN_STEP_OVERHEAD * T * U


def gas_mlp(d: int, layer_sizes) -> int:
    """Each layer costs ``n_out`` linear units; hidden activations add ReLU."""
    total, n_in = 0, d
    sizes = list(layer_sizes)
    for i, n_out in enumerate(sizes):
        total += n_out * gas_linear(n_in)
        if i < len(sizes) - 1:
            total += BUDGET.G_R * n_out
        n_in = n_out
    return total


def gas_tree(tree: DecisionTree) -> int:
    # per level on the deepest path: threshold SLOAD, feature CALLDATALOAD,
    # one comparison and loop bookkeeping; then the leaf label SLOAD
    per_level = BUDGET.G_S + BUDGET.G_C + BUDGET.G_A + BUDGET.G_L
    return per_level * tree.depth() + BUDGET.G_S


def analytic_gas(arch) -> int:
    if isinstance(arch, Linear):
        return gas_linear(arch.d)
    if isinstance(arch, Cnn1d):
        return gas_cnn(arch.d, arch.kernel, arch.filters)
    if isinstance(arch, Rnn):
        return gas_rnn(arch.d, arch.units, arch.timesteps)
    if isinstance(arch, Mlp):
        return gas_mlp(arch.d, arch.layer_sizes)
    if isinstance(arch, DecisionTree):
        return gas_tree(arch)
    raise UnsupportedArch(f"no gas model for {arch!r}")


def gas_to_usd(gas: int, gas_price_gwei: float, token_usd: float) -> float:
    if gas < 0 or gas_price_gwei < 0 or token_usd < 0:
        raise ValueError("gas, gas price and token price must be non-negative")
    return gas * gas_price_gwei * 1e-9 * token_usd


@dataclass(frozen=True)
class GasReport:
    model_id: str
    analytic_gas: int
    base_tx_gas: int
    total: int
    within_block_limit: bool
    usd_cost: Optional[float] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def report_for_arch(arch, model_id: Optional[str] = None,
                    gas_price_gwei: Optional[float] = None,
                    token_usd: Optional[float] = None) -> GasReport:
    gas = analytic_gas(arch)
    total = gas + BASE_TX_GAS
    usd = None
    if gas_price_gwei is not None and token_usd is not None:
        usd = gas_to_usd(total, gas_price_gwei, token_usd)
    return GasReport(
        model_id=model_id or arch.label,
        analytic_gas=gas,
        base_tx_gas=BASE_TX_GAS,
        total=total,
        within_block_limit=total <= BLOCK_GAS_LIMIT,
        usd_cost=usd,
    )


def gas_for_model(model: QuantizedModel, model_id: Optional[str] = None, **pricing) -> GasReport:
    return report_for_arch(model.arch, model_id or f"{model.arch.label}@v{model.version}", **pricing)
