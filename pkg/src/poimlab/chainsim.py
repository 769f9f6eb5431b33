"""Deterministic two-ledger simulator.

Each ``submit`` mines exactly one block.  A transaction either applies in
full or leaves accounts and contract state untouched; failures are still
included in a block and leave a failure event behind, as a reverted EVM
transaction would.  Gas is the analytic cost of the operation plus the base
transaction charge.
"""
from __future__ import annotations

import copy
import json
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

from .bridge import Commitment, L1InferenceState, commit, transfer_and_verify
from .errors import (
    GasLimitExceeded,
    InsufficientBalance,
    NotAView,
    OutOfGas,
    SimError,
    UnknownOperation,
    UnknownSender,
)
from .gascost import BASE_TX_GAS, BLOCK_GAS_LIMIT, analytic_gas
from .hashing import canonical_json, keccak256
from .inference import forward, predict
from .models import DecisionTree, QuantizedModel
from .poim import (
    PoimState,
    Proposal,
    TestSetChange,
    deposit_governance_stake,
    evaluate,
    fund_vault,
    open_challenge,
    poison,
    propose_testset_change,
    propose_update,
    resolve_challenge,
    vote,
    withdraw_governance_stake,
)
from .serialization import serialize

BLOCK_TIME = 12
L2_CHAIN_ID = 10
L1_CHAIN_ID = 1


@dataclass
class Ledger:
    chain_id: int
    block_number: int = 0
    timestamp: int = 1_700_000_000
    accounts: Dict[str, int] = field(default_factory=dict)
    contracts: Dict[str, Any] = field(default_factory=dict)
    events: List[dict] = field(default_factory=list)
    gas_limit: int = BLOCK_GAS_LIMIT

    def _mine(self, seconds: int = BLOCK_TIME) -> None:
        self.block_number += 1
        self.timestamp += seconds

    def export_events(self) -> str:
        return "".join(json.dumps(e, sort_keys=True, default=str) + "\n" for e in self.events)


@dataclass(frozen=True)
class SimTx:
    sender: str
    op: str
    args: Dict[str, Any] = field(default_factory=dict)
    gas_limit: int = BLOCK_GAS_LIMIT


@dataclass(frozen=True)
class Receipt:
    status: str            # "success" | "failed"
    gas_used: int
    block_number: int
    result: Any = None
    error: Optional[str] = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "success"


@dataclass(frozen=True)
class ViewResult:
    result: Any
    gas_used: int = 0


class TransferRejected(SimError):
    """A model transfer did not match the latest commitment."""


# -- operation table ----------------------------------------------------------

@dataclass(frozen=True)
class Operation:
    handler: Callable[["Ledger", str, dict, int], Any]
    gas: Callable[["Ledger", dict], int]
    view: bool = False


def _poim(ledger: Ledger) -> PoimState:
    try:
        return ledger.contracts["poim"]
    except KeyError:
        raise UnknownOperation("no PoIm contract on this ledger") from None


def _inference_model(ledger: Ledger) -> QuantizedModel:
    if "l1" in ledger.contracts and ledger.contracts["l1"].model is not None:
        return ledger.contracts["l1"].model
    if "poim" in ledger.contracts:
        return ledger.contracts["poim"].model
    raise UnknownOperation("no model deployed on this ledger")


def _model_gas(ledger: Ledger, args: dict) -> int:
    return analytic_gas(_inference_model(ledger).arch)


def _eval_gas(ledger: Ledger, args: dict) -> int:
    state = _poim(ledger)
    return len(state.test_set.samples) * analytic_gas(state.model.arch)


def _flat(ledger: Ledger, args: dict) -> int:
    return 0


def _sample(args: dict):
    return tuple(int(v) for v in args["x"]), int(args["y"])


def _op_infer(ledger, sender, args, now):
    model = _inference_model(ledger)
    x = [int(v) for v in args["x"]]
    if isinstance(model.arch, DecisionTree):
        return {"label": predict(x, model)}
    logit = forward(x, model)
    return {"label": predict(x, model), "logit": logit}


def _op_evaluate(ledger, sender, args, now):
    state = _poim(ledger)
    return list(evaluate(state.model, state.test_set, state.params.metric_scale).as_tuple())


def _op_metrics(ledger, sender, args, now):
    return list(_poim(ledger).metrics.as_tuple())


def _op_balance(ledger, sender, args, now):
    return ledger.accounts.get(args.get("account", sender), 0)


def _op_transfer(ledger, sender, args, now):
    amount = int(args["amount"])
    if amount < 0 or ledger.accounts[sender] < amount:
        raise InsufficientBalance(f"{sender} cannot transfer {amount}")
    ledger.accounts[sender] -= amount
    ledger.accounts[args["to"]] = ledger.accounts.get(args["to"], 0) + amount


def _op_propose(ledger, sender, args, now):
    eta = args.get("eta")
    p = Proposal(sender, int(args["stake"]), _sample(args),
                 None if eta is None else int(eta), now)
    out = propose_update(_poim(ledger), p)
    return {"decision": out.decision.value, "reason": out.reason and out.reason.value,
            "reward": out.reward, "metrics": list(out.metrics_after.as_tuple()),
            "version": out.version}


def _op_fund(ledger, sender, args, now):
    fund_vault(_poim(ledger), sender, int(args["amount"]))


def _op_deposit(ledger, sender, args, now):
    deposit_governance_stake(_poim(ledger), sender, int(args["amount"]))


def _op_withdraw(ledger, sender, args, now):
    withdraw_governance_stake(_poim(ledger), sender, int(args["amount"]))


def _op_challenge(ledger, sender, args, now):
    ch = open_challenge(_poim(ledger), int(args["version"]), sender, int(args["stake"]), now)
    return {"challenge": ch.challenge_id, "deadline": ch.deadline}


def _op_testset(ledger, sender, args, now):
    sample = _sample(args) if "x" in args else None
    change = TestSetChange(args["kind"], args.get("index"), sample)
    ch = propose_testset_change(_poim(ledger), change, sender, int(args["stake"]), now)
    return {"challenge": ch.challenge_id, "deadline": ch.deadline}


def _op_vote(ledger, sender, args, now):
    vote(_poim(ledger), int(args["challenge"]), sender, int(args["weight"]), bool(args["choice"]), now)


def _op_resolve(ledger, sender, args, now):
    return {"outcome": resolve_challenge(_poim(ledger), int(args["challenge"]), now)}


def _op_commit_hash(ledger, sender, args, now):
    """L1 side of a commitment: the hash arrives as an argument."""
    c = Commitment(bytes.fromhex(args["hash"].removeprefix("0x")), ledger.block_number,
                   int(args["version"]))
    ledger.contracts["l1"].commitments.append(c)
    return {"hash": c.hex()}


def _op_transfer_model(ledger, sender, args, now):
    res = transfer_and_verify(ledger.contracts["l1"], bytes.fromhex(args["payload"]))
    if not res.accepted:
        raise TransferRejected(res.reason or "rejected")
    return {"status": res.status.value}


OPERATIONS: Dict[str, Operation] = {
    "infer": Operation(_op_infer, _model_gas, view=True),
    "evaluate": Operation(_op_evaluate, _eval_gas, view=True),
    "metrics": Operation(_op_metrics, _flat, view=True),
    "balance": Operation(_op_balance, _flat, view=True),
    "transfer": Operation(_op_transfer, _flat),
    "propose_update": Operation(_op_propose, _eval_gas),
    "fund_vault": Operation(_op_fund, _flat),
    "deposit_stake": Operation(_op_deposit, _flat),
    "withdraw_stake": Operation(_op_withdraw, _flat),
    "open_challenge": Operation(_op_challenge, _flat),
    "propose_testset_change": Operation(_op_testset, _flat),
    "vote": Operation(_op_vote, _flat),
    "resolve_challenge": Operation(_op_resolve, _eval_gas),
    "commit": Operation(_op_commit_hash, _flat),
    "transfer_model": Operation(_op_transfer_model, _flat),
}


# -- execution ----------------------------------------------------------------

def _lookup(op: str) -> Operation:
    try:
        return OPERATIONS[op]
    except KeyError:
        raise UnknownOperation(f"unknown operation {op!r}") from None


def submit(ledger: Ledger, tx: SimTx) -> Receipt:
    """Execute ``tx`` atomically in a fresh block."""
    if tx.sender not in ledger.accounts:
        raise UnknownSender(f"unknown sender {tx.sender!r}")
    if tx.gas_limit > ledger.gas_limit:
        raise GasLimitExceeded(f"declared gas {tx.gas_limit} exceeds block limit {ledger.gas_limit}")
    operation = _lookup(tx.op)
    ledger._mine()
    snapshot = copy.deepcopy((ledger.accounts, ledger.contracts))
    gas_used = 0
    try:
        gas_used = operation.gas(ledger, tx.args) + BASE_TX_GAS
        if gas_used > tx.gas_limit:
            raise OutOfGas(f"needs {gas_used} gas, limit {tx.gas_limit}")
        result = operation.handler(ledger, tx.sender, tx.args, ledger.timestamp)
    except (SimError, KeyError, ValueError, IndexError, TypeError) as exc:
        ledger.accounts, ledger.contracts = snapshot
        _relink(ledger)
        receipt = Receipt("failed", gas_used, ledger.block_number, None, type(exc).__name__, str(exc))
    else:
        receipt = Receipt("success", gas_used, ledger.block_number, result)
    ledger.events.append({
        "block": ledger.block_number,
        "timestamp": ledger.timestamp,
        "sender": tx.sender,
        "op": tx.op,
        "status": receipt.status,
        "gas_used": receipt.gas_used,
        "result": receipt.result,
        "error": receipt.error,
    })
    return receipt


def _relink(ledger: Ledger) -> None:
    # the PoIm contract keeps balances in the ledger's own account map
    if "poim" in ledger.contracts:
        ledger.contracts["poim"].balances = ledger.accounts


def call_view(ledger: Ledger, op: str, args: Optional[dict] = None, sender: str = "") -> ViewResult:
    """Run a read-only operation for free, without mining a block."""
    operation = _lookup(op)
    if not operation.view:
        raise NotAView(f"{op!r} mutates state")
    return ViewResult(operation.handler(ledger, sender, dict(args or {}), ledger.timestamp), 0)


def advance_time(ledger: Ledger, seconds: int) -> None:
    if seconds <= 0:
        raise ValueError("seconds must be positive")
    ledger._mine(seconds)


def _contract_view(obj) -> Any:
    if isinstance(obj, PoimState):
        view = obj.full_view()
        view.pop("balances")  # same map as the ledger accounts
        return view
    if isinstance(obj, L1InferenceState):
        return {
            "commitments": [[c.hex(), c.committed_at, c.version] for c in obj.commitments],
            "model": None if obj.model is None else serialize(obj.model).hex(),
            "installed_hash": None if obj.installed_hash is None else obj.installed_hash.hex(),
        }
    return repr(obj)


def state_hash(ledger: Ledger) -> str:
    """Hash of world state: accounts and contracts, not block header or events."""
    world = {
        "chain_id": ledger.chain_id,
        "accounts": dict(sorted(ledger.accounts.items())),
        "contracts": {k: _contract_view(v) for k, v in sorted(ledger.contracts.items())},
    }
    return "0x" + keccak256(canonical_json(world)).hex()


def deploy_poim(ledger: Ledger, state: PoimState) -> None:
    for account, balance in state.balances.items():
        ledger.accounts.setdefault(account, balance)
    ledger.contracts["poim"] = state
    _relink(ledger)


def deploy_l1(ledger: Ledger) -> L1InferenceState:
    ledger.contracts["l1"] = L1InferenceState()
    return ledger.contracts["l1"]


# -- two-chain simulation -----------------------------------------------------

class Simulation:
    """An L2 governance ledger and an L1 inference ledger driven together."""

    def __init__(self, poim_state: PoimState, operator: str = "operator"):
        self.operator = operator
        self.l2 = Ledger(L2_CHAIN_ID)
        self.l1 = Ledger(L1_CHAIN_ID)
        poim_state.balances.setdefault(operator, 0)
        deploy_poim(self.l2, poim_state)
        deploy_l1(self.l1)
        self.l1.accounts.setdefault(operator, 0)
        self.stream: List[tuple] = []   # samples available to scripted proposals
        self.dataset = None

    @property
    def poim(self) -> PoimState:
        return self.l2.contracts["poim"]

    @property
    def l1_state(self) -> L1InferenceState:
        return self.l1.contracts["l1"]

    def submit(self, sender: str, op: str, gas_limit: int = BLOCK_GAS_LIMIT, **args) -> Receipt:
        return submit(self.l2, SimTx(sender, op, args, gas_limit))

    def bridge(self) -> Receipt:
        """Commit the current L2 model on L1, then transfer its parameters."""
        payload = serialize(self.poim.model)
        c = commit(self.poim, L1InferenceState())  # hash computed as L2 would
        r = submit(self.l1, SimTx(self.operator, "commit", {"hash": c.hex(), "version": c.version}))
        if not r.ok:
            return r
        return submit(self.l1, SimTx(self.operator, "transfer_model", {"payload": payload.hex()}))

    def advance_time(self, seconds: int) -> None:
        advance_time(self.l2, seconds)
        advance_time(self.l1, seconds)

    def state_hash(self) -> str:
        joined = (state_hash(self.l2) + state_hash(self.l1)).encode()
        return "0x" + keccak256(joined).hex()

    def history(self) -> str:
        return self.poim.export_history()

    def events(self) -> str:
        return self.l2.export_events() + self.l1.export_events()

    def run(self, steps: Sequence[dict], rng=None) -> List[Receipt]:
        """Replay scripted steps; see :func:`expand_steps` for the step forms."""
        receipts = []
        for step in expand_steps(steps, self, rng):
            kind = step["op"]
            if kind == "advance_time":
                self.advance_time(int(step["seconds"]))
            elif kind == "bridge":
                receipts.append(self.bridge())
            else:
                receipts.append(self.submit(step.get("sender", self.operator), kind,
                                            int(step.get("gas_limit", BLOCK_GAS_LIMIT)),
                                            **step.get("args", {})))
        return receipts


def expand_steps(steps: Sequence[dict], sim: Simulation, rng) -> List[dict]:
    """Turn compact scenario steps into individual transactions.

    ``random_proposals`` (``count``, ``sender``, ``stake``, ``adversarial_fraction``)
    draws samples from ``sim.stream`` with ``rng`` and may poison them; a
    ``train_index`` argument on ``propose_update`` picks a stream sample.
    """
    out = []
    stream = sim.stream
    for step in steps:
        if step["op"] == "random_proposals":
            if not stream or rng is None:
                raise UnknownOperation("random proposals need a sample stream and a seed")
            noise = int(step.get("noise_std", 3.0) * sim.poim.model.S)
            for _ in range(int(step["count"])):
                sample = stream[int(rng.integers(len(stream)))]
                if rng.random() < float(step.get("adversarial_fraction", 0.0)):
                    sample = poison(sample, rng, noise)
                out.append({"op": "propose_update", "sender": step["sender"],
                            "args": {"x": list(sample[0]), "y": sample[1],
                                     "stake": int(step.get("stake", sim.poim.params.min_stake))}})
        elif step["op"] == "propose_update" and "train_index" in step.get("args", {}):
            args = dict(step["args"])
            x, y = stream[int(args.pop("train_index"))]
            args.update(x=list(x), y=y)
            out.append({**step, "args": args})
        else:
            out.append(step)
    return out


# -- throughput ---------------------------------------------------------------

REFERENCE_BATCH1_SECONDS = 0.0680  # externally reported figure, recorded only


@dataclass(frozen=True)
class ThroughputRow:
    batch: int
    total_seconds: float
    per_sample_seconds: float


def throughput_bench(model: QuantizedModel, batch_sizes: Sequence[int],
                     rng_seed: int = 0) -> List[ThroughputRow]:
    """Wall-clock timing of view-call inference; figures are report-only."""
    import numpy as np

    ledger = Ledger(L1_CHAIN_ID)
    deploy_l1(ledger).model = model
    rng = np.random.default_rng(rng_seed)
    rows = []
    for batch in batch_sizes:
        if batch < 1:
            raise ValueError("batch sizes must be positive")
        xs = rng.integers(-2 * model.S, 2 * model.S + 1, size=(batch, model.arch.d)).tolist()
        start = time.perf_counter()
        for x in xs:
            call_view(ledger, "infer", {"x": x})
        total = time.perf_counter() - start
        rows.append(ThroughputRow(batch, total, total / batch))
    return rows


def throughput_table(rows: Sequence[ThroughputRow]) -> str:
    lines = ["batch,total_seconds,per_sample_seconds"]
    lines += [f"{r.batch},{r.total_seconds:.6f},{r.per_sample_seconds:.6f}" for r in rows]
    return "\n".join(lines) + "\n"


__all__ = [
    "Ledger",
    "OPERATIONS",
    "Receipt",
    "SimTx",
    "Simulation",
    "ThroughputRow",
    "TransferRejected",
    "ViewResult",
    "advance_time",
    "call_view",
    "deploy_l1",
    "deploy_poim",
    "expand_steps",
    "state_hash",
    "submit",
    "throughput_bench",
    "throughput_table",
]
