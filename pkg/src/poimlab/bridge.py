"""L2 to L1 model transfer by hash commitment.

The governance chain (L2) commits ``keccak256(serialize(model))`` to the
inference chain (L1).  A later transfer of the parameters is installed on
L1 only if its hash matches the latest commitment.  The consistency checks
run here are real assertions, executed on every call.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from .errors import ConsistencyError, MalformedBytes, NoAcceptedModel, NoCommitment, NoModelInstalled
from .fixedpoint import Scale
from .hashing import keccak256
from .inference import dequantize, predict, quantize, quantize_input, reference_predict, sign_consistency
from .models import FloatModel, QuantizedModel
from .poim import PoimParams, PoimState, TestSet, evaluate, new_state
from .serialization import deserialize, serialize


@dataclass(frozen=True)
class Commitment:
    hash: bytes
    committed_at: int
    version: int

    def hex(self) -> str:
        return "0x" + self.hash.hex()


@dataclass
class L1InferenceState:
    commitments: List[Commitment] = field(default_factory=list)
    model: Optional[QuantizedModel] = None
    installed_hash: Optional[bytes] = None

    @property
    def latest(self) -> Optional[Commitment]:
        return self.commitments[-1] if self.commitments else None


class TransferStatus(str, enum.Enum):
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"


@dataclass(frozen=True)
class TransferResult:
    status: TransferStatus
    reason: Optional[str] = None

    @property
    def accepted(self) -> bool:
        return self.status is TransferStatus.ACCEPTED


def commit(l2_state: PoimState, l1_state: L1InferenceState, block_number: int = 0) -> Commitment:
    """Record the hash of the current L2 model on L1."""
    if l2_state is None or l2_state.model is None:
        raise NoAcceptedModel("no accepted model on L2 to commit")
    c = Commitment(keccak256(serialize(l2_state.model)), block_number, l2_state.model.version)
    l1_state.commitments.append(c)
    return c


def _assert_equal(label: str, got, want) -> None:
    if got != want:
        raise ConsistencyError(f"{label}: L1 holds {got!r}, source holds {want!r}")


def assert_params_consistent(installed: QuantizedModel, source: QuantizedModel) -> None:
    """Field-by-field comparison of installed parameters against the source."""
    _assert_equal("architecture", installed.arch, source.arch)
    _assert_equal("scale", installed.scale, source.scale)
    _assert_equal("version", installed.version, source.version)
    _assert_equal("weight count", len(installed.weights), len(source.weights))
    _assert_equal("bias count", len(installed.biases), len(source.biases))
    for i, (a, b) in enumerate(zip(installed.weights, source.weights)):
        _assert_equal(f"weight[{i}]", a, b)
    for i, (a, b) in enumerate(zip(installed.biases, source.biases)):
        _assert_equal(f"bias[{i}]", a, b)


def transfer_and_verify(l1_state: L1InferenceState, payload: bytes,
                        source: Optional[QuantizedModel] = None) -> TransferResult:
    """Install ``payload`` on L1 iff it hashes to the latest commitment.

    ``source`` is the L2 model the payload claims to carry; when given, the
    installed parameters are compared against it field by field.
    """
    latest = l1_state.latest
    if latest is None:
        raise NoCommitment("no commitment recorded on L1")
    payload = bytes(payload)
    if keccak256(payload) != latest.hash:
        return TransferResult(TransferStatus.REJECTED, "HashMismatch")
    try:
        model = deserialize(payload)
    except MalformedBytes as exc:  # only reachable if a malformed payload was committed
        return TransferResult(TransferStatus.REJECTED, f"MalformedBytes: {exc}")
    l1_state.model = model
    l1_state.installed_hash = latest.hash
    if source is not None:
        assert_params_consistent(l1_state.model, source)
    _assert_equal("re-serialized hash", keccak256(serialize(l1_state.model)), latest.hash)
    return TransferResult(TransferStatus.ACCEPTED)


def init_l2(model0: FloatModel, test_set: TestSet, scale: Scale,
            params: Optional[PoimParams] = None, **state_kwargs) -> PoimState:
    """Quantize, install and evaluate the initial model, then check the result."""
    params = params or PoimParams()
    q = quantize(model0, scale)
    state = new_state(q, test_set, params, **state_kwargs)
    assert_params_consistent(state.model, quantize(model0, scale))
    _assert_equal("initial metrics", state.metrics, evaluate(q, test_set, params.metric_scale))
    return state


class InferenceCheck(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    OUT_OF_GUARANTEE = "out-of-guarantee"


@dataclass(frozen=True)
class InferenceVerdict:
    status: InferenceCheck
    on_chain: int
    off_chain: int
    gamma: float
    delta: float


def verify_l1_inference(x: Sequence[float], l1_state: L1InferenceState) -> InferenceVerdict:
    """Compare the installed model's label with the float reference on ``x``.

    A disagreement counts as a failure only when the margin certificate
    covers ``x``; otherwise it is reported as outside the guarantee.
    """
    q = l1_state.model
    if q is None:
        raise NoModelInstalled("no model installed on L1")
    float_model = dequantize(q)
    y_off = int(reference_predict(x, float_model))
    y_on = predict(quantize_input(x, q.scale), q)
    report = sign_consistency(float_model, q.scale, [x])
    # the certificate speaks about quantize(float_model); it must reproduce q
    certified = report.holds and quantize(float_model, q.scale).params_equal(q)
    if y_on == y_off:
        status = InferenceCheck.PASS
    elif certified:
        status = InferenceCheck.FAIL
    else:
        status = InferenceCheck.OUT_OF_GUARANTEE
    return InferenceVerdict(status, y_on, y_off, report.gamma, report.delta)


def bridge_round(l2_state: PoimState, l1_state: L1InferenceState,
                 block_number: int = 0) -> TransferResult:
    """Commit the current L2 model and transfer it in one go."""
    commit(l2_state, l1_state, block_number)
    return transfer_and_verify(l1_state, serialize(l2_state.model), l2_state.model)


__all__ = [
    "Commitment",
    "InferenceCheck",
    "InferenceVerdict",
    "L1InferenceState",
    "TransferResult",
    "TransferStatus",
    "assert_params_consistent",
    "bridge_round",
    "commit",
    "init_l2",
    "transfer_and_verify",
    "verify_l1_inference",
]
