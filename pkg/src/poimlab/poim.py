"""Proof-of-Improvement: governed, stake-backed micro-step model updates.

A proposal carries one training sample.  The contract applies the
micro-step, re-evaluates on the canonical test set and installs the result
only if no metric drops and at least one rises.  Rejected proposals are
slashed into the vault; accepted ones get their stake back plus a bonus
paid from the vault.  Stake-weighted votes can roll back a recent update
or change the test set.

All mutating functions follow a single-writer discipline: callers apply
them one at a time in transaction order.
"""
from __future__ import annotations

import copy
import enum
import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .errors import (
    ChallengeClosed,
    ConsistencyError,
    DeadlineNotReached,
    DeadlinePassed,
    DoubleVote,
    DuplicateChallenge,
    EmptyTestSet,
    InsufficientBalance,
    InsufficientStake,
    InsufficientVotingPower,
    RollbackTooDeep,
    UnknownVersion,
    WindowExpired,
    WouldEmptyClass,
)
from .fixedpoint import idiv
from .hashing import canonical_json, digest_hex, keccak256
from .inference import micro_train_step, predict
from .models import QuantizedModel
from .serialization import serialize

METRIC_SCALE = 10_000
METRIC_KEYS = ("acc", "prec", "rec", "f1")
ONE_DAY = 86_400

Sample = Tuple[Tuple[int, ...], int]


@dataclass(frozen=True)
class Metrics:
    acc: int
    prec: int
    rec: int
    f1: int

    def as_tuple(self) -> Tuple[int, int, int, int]:
        return (self.acc, self.prec, self.rec, self.f1)

    def dominates(self, other: "Metrics") -> bool:
        """No component lower than ``other`` and at least one strictly higher."""
        pairs = list(zip(self.as_tuple(), other.as_tuple()))
        return all(a >= b for a, b in pairs) and any(a > b for a, b in pairs)


@dataclass
class TestSet:
    samples: List[Sample]
    revision: int = 0

    __test__ = False  # not a pytest class

    def __post_init__(self):
        self.samples = [(tuple(int(v) for v in x), int(y)) for x, y in self.samples]
        check_classes(self.samples)


def check_classes(samples: Sequence[Sample]) -> None:
    if not samples:
        raise EmptyTestSet("test set is empty")
    labels = {y for _, y in samples}
    if labels != {0, 1}:
        raise WouldEmptyClass("test set must hold at least one sample of each class")


def evaluate(model: QuantizedModel, D: Union[TestSet, Sequence[Sample]],
             metric_scale: int = METRIC_SCALE) -> Metrics:
    samples = D.samples if isinstance(D, TestSet) else D
    if not samples:
        raise EmptyTestSet("cannot evaluate on an empty test set")
    tp = fp = tn = fn = 0
    for x, y in samples:
        pred = predict(x, model)
        if pred == 1:
            if y == 1:
                tp += 1
            else:
                fp += 1
        elif y == 1:
            fn += 1
        else:
            tn += 1
    return metrics_from_counts(tp, fp, tn, fn, metric_scale)


def metrics_from_counts(tp: int, fp: int, tn: int, fn: int,
                        metric_scale: int = METRIC_SCALE) -> Metrics:
    n = tp + fp + tn + fn
    acc = idiv((tp + tn) * metric_scale, n)
    prec = idiv(tp * metric_scale, tp + fp) if tp + fp else 0
    rec = idiv(tp * metric_scale, tp + fn) if tp + fn else 0
    f1 = idiv(2 * prec * rec, prec + rec) if prec + rec else 0
    return Metrics(acc, prec, rec, f1)


# -- protocol parameters and records ----------------------------------------

@dataclass
class PoimParams:
    min_stake: int = 1
    alpha: Dict[str, int] = field(default_factory=lambda: {k: 1 for k in METRIC_KEYS})
    rho: int = 5
    challenge_window: int = ONE_DAY
    quorum: Fraction = Fraction(1, 2)
    eta: int = 0  # raw, at the model scale; 0 means "use S" (a unit step)
    prior_depth: int = 16
    metric_scale: int = METRIC_SCALE

    def __post_init__(self):
        if not isinstance(self.quorum, Fraction):
            self.quorum = Fraction(str(self.quorum))
        # unspecified coefficients default to 0
        self.alpha = {k: int(self.alpha.get(k, 0)) for k in METRIC_KEYS}
        if any(a < 0 for a in self.alpha.values()):
            raise ValueError("alpha coefficients must be non-negative")
        if self.min_stake < 1:
            raise ValueError("min_stake must be positive")
        if self.rho <= 0 or self.prior_depth < 1 or self.challenge_window <= 0:
            raise ValueError("rho, prior_depth and challenge_window must be positive")
        if not 0 <= self.quorum <= 1:
            raise ValueError("quorum must lie in [0, 1]")


@dataclass(frozen=True)
class Proposal:
    proposer: str
    stake: int
    sample: Sample
    eta: Optional[int] = None
    submitted_at: int = 0

    def digest(self) -> str:
        x, y = self.sample
        return digest_hex({
            "proposer": self.proposer,
            "stake": self.stake,
            "x": [str(v) for v in x],
            "y": y,
            "eta": None if self.eta is None else str(self.eta),
            "at": self.submitted_at,
        })


class Decision(str, enum.Enum):
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"


class RejectReason(str, enum.Enum):
    NOT_IMPROVED = "NotImproved"
    DEGRADED = "Degraded"
    IMBALANCE_BLOCKED = "ImbalanceBlocked"


@dataclass(frozen=True)
class Outcome:
    decision: Decision
    metrics_before: Metrics
    metrics_after: Metrics
    reward: int = 0
    reason: Optional[RejectReason] = None
    version: Optional[int] = None

    @property
    def accepted(self) -> bool:
        return self.decision is Decision.ACCEPTED


@dataclass
class ClassCounts:
    normal: int = 0
    attack: int = 0


@dataclass
class PriorModel:
    model: QuantizedModel
    metrics: Metrics
    test_revision: int
    replaced_by: int          # version whose acceptance pushed this entry


@dataclass
class AcceptedUpdate:
    version: int
    accepted_at: int
    proposer: str
    bonus: int
    label: int
    rolled_back: bool = False


@dataclass(frozen=True)
class TestSetChange:
    kind: str                  # "add" | "modify" | "remove"
    index: Optional[int] = None
    sample: Optional[Sample] = None

    __test__ = False

    def apply(self, samples: Sequence[Sample]) -> List[Sample]:
        out = list(samples)
        if self.kind == "add":
            out.append(_norm_sample(self.sample))
        elif self.kind == "modify":
            _check_index(self.index, out)
            out[self.index] = _norm_sample(self.sample)
        elif self.kind == "remove":
            _check_index(self.index, out)
            del out[self.index]
        else:
            raise ValueError(f"unknown test-set change {self.kind!r}")
        return out


def _norm_sample(sample: Optional[Sample]) -> Sample:
    if sample is None:
        raise ValueError("change needs a sample")
    x, y = sample
    if y not in (0, 1):
        raise ValueError("label must be 0 or 1")
    return tuple(int(v) for v in x), int(y)


def _check_index(index: Optional[int], samples: Sequence) -> None:
    if index is None or not 0 <= index < len(samples):
        raise IndexError(f"test-set index {index} out of range")


@dataclass
class Challenge:
    challenge_id: int
    kind: str                  # "rollback" | "testset"
    proposer: str
    stake: int
    opened_at: int
    deadline: int
    target_version: Optional[int] = None
    change: Optional[TestSetChange] = None
    votes: Dict[str, Tuple[int, bool]] = field(default_factory=dict)
    status: str = "open"       # open | executed | dismissed

    def tally(self) -> Tuple[int, int]:
        yes = sum(w for w, choice in self.votes.values() if choice)
        no = sum(w for w, choice in self.votes.values() if not choice)
        return yes, no


@dataclass
class PoimState:
    model: QuantizedModel
    metrics: Metrics
    test_set: TestSet
    params: PoimParams = field(default_factory=PoimParams)
    balances: Dict[str, int] = field(default_factory=dict)
    vault: int = 0
    gov_stakes: Dict[str, int] = field(default_factory=dict)
    class_counts: ClassCounts = field(default_factory=ClassCounts)
    history: List[dict] = field(default_factory=list)
    prior_models: List[PriorModel] = field(default_factory=list)
    accepted: Dict[int, AcceptedUpdate] = field(default_factory=dict)
    challenges: List[Challenge] = field(default_factory=list)
    # vault accounting
    funded: int = 0
    stakes_in: int = 0
    rewards_out: int = 0
    clawbacks: int = 0

    @property
    def eta(self) -> int:
        return self.params.eta or self.model.S

    @property
    def escrowed(self) -> int:
        """Stakes held by votes that have not resolved yet."""
        return sum(c.stake for c in self.challenges if c.status == "open")

    def vault_conserved(self) -> bool:
        """Stakes in (plus any seed funding) equal net payouts, open escrow and the vault."""
        return (self.stakes_in + self.funded
                == (self.rewards_out - self.clawbacks) + self.escrowed + self.vault)

    def core_view(self) -> dict:
        """Everything a rejected proposal must leave untouched."""
        return {
            "model": serialize(self.model).hex(),
            "metrics": self.metrics.as_tuple(),
            "test_set": [[list(map(str, x)), y] for x, y in self.test_set.samples],
            "test_revision": self.test_set.revision,
            "class_counts": [self.class_counts.normal, self.class_counts.attack],
            "prior_models": [
                [serialize(p.model).hex(), p.metrics.as_tuple(), p.test_revision, p.replaced_by]
                for p in self.prior_models
            ],
            "accepted": {str(v): asdict(a) for v, a in sorted(self.accepted.items())},
            "challenges": [_challenge_view(c) for c in self.challenges],
        }

    def core_digest(self) -> str:
        return "0x" + keccak256(canonical_json(self.core_view())).hex()

    def full_view(self) -> dict:
        view = self.core_view()
        view.update({
            "balances": dict(sorted(self.balances.items())),
            "vault": self.vault,
            "gov_stakes": dict(sorted(self.gov_stakes.items())),
            "history": self.history,
            "accounting": [self.funded, self.stakes_in, self.rewards_out, self.clawbacks],
        })
        return view

    def state_digest(self) -> str:
        return "0x" + keccak256(canonical_json(self.full_view())).hex()

    def export_history(self) -> str:
        return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in self.history)


def _challenge_view(c: Challenge) -> dict:
    return {
        "id": c.challenge_id,
        "kind": c.kind,
        "proposer": c.proposer,
        "stake": c.stake,
        "opened_at": c.opened_at,
        "deadline": c.deadline,
        "target_version": c.target_version,
        "change": None if c.change is None else [
            c.change.kind, c.change.index,
            None if c.change.sample is None else [list(map(str, c.change.sample[0])), c.change.sample[1]],
        ],
        "votes": {k: list(v) for k, v in sorted(c.votes.items())},
        "status": c.status,
    }


def new_state(model: QuantizedModel, test_set: TestSet, params: Optional[PoimParams] = None,
              balances: Optional[Dict[str, int]] = None, vault: int = 0,
              class_counts: Optional[ClassCounts] = None) -> PoimState:
    params = params or PoimParams()
    state = PoimState(
        model=model,
        metrics=evaluate(model, test_set, params.metric_scale),
        test_set=test_set,
        params=params,
        balances=dict(balances or {}),
        vault=vault,
        funded=vault,
        class_counts=class_counts or ClassCounts(),
    )
    return state


# -- token movements ----------------------------------------------------------

def _debit(state: PoimState, account: str, amount: int) -> None:
    if amount < 0:
        raise ValueError("amount must be non-negative")
    if state.balances.get(account, 0) < amount:
        raise InsufficientBalance(f"{account} holds {state.balances.get(account, 0)}, needs {amount}")
    state.balances[account] -= amount


def _credit(state: PoimState, account: str, amount: int) -> None:
    state.balances[account] = state.balances.get(account, 0) + amount


def _escrow(state: PoimState, account: str, stake: int) -> None:
    if stake < state.params.min_stake:
        raise InsufficientStake(f"stake {stake} below minimum {state.params.min_stake}")
    _debit(state, account, stake)
    state.stakes_in += stake


def _slash(state: PoimState, stake: int) -> None:
    state.vault += stake


def _refund(state: PoimState, account: str, stake: int) -> None:
    _credit(state, account, stake)
    state.rewards_out += stake


def fund_vault(state: PoimState, account: str, amount: int) -> None:
    _debit(state, account, amount)
    state.vault += amount
    state.funded += amount


def deposit_governance_stake(state: PoimState, account: str, amount: int) -> None:
    """Lock tokens as voting power."""
    if amount <= 0:
        raise ValueError("amount must be positive")
    _debit(state, account, amount)
    state.gov_stakes[account] = state.gov_stakes.get(account, 0) + amount


def withdraw_governance_stake(state: PoimState, account: str, amount: int) -> None:
    held = state.gov_stakes.get(account, 0)
    if not 0 < amount <= held:
        raise InsufficientVotingPower(f"{account} has {held} staked, cannot withdraw {amount}")
    if any(account in c.votes for c in state.challenges if c.status == "open"):
        raise InsufficientVotingPower("voting power is locked while a vote is open")
    state.gov_stakes[account] = held - amount
    _credit(state, account, amount)


# -- proposals ----------------------------------------------------------------

def reward(state: PoimState, s: int, M: Metrics, M_new: Metrics) -> int:
    """Pay ``s`` plus the metric-weighted bonus, the bonus capped by the vault."""
    gains = {k: getattr(M_new, k) - getattr(M, k) for k in METRIC_KEYS}
    bonus = sum(state.params.alpha[k] * gains[k] for k in METRIC_KEYS)
    bonus = max(0, min(bonus, state.vault))
    state.vault -= bonus
    return s + bonus


def _log(state: PoimState, record: dict) -> None:
    record["seq"] = len(state.history)
    state.history.append(record)


def propose_update(state: PoimState, p: Proposal) -> Outcome:
    x, y = p.sample
    M = state.metrics
    if p.stake < state.params.min_stake:
        raise InsufficientStake(f"stake {p.stake} below minimum {state.params.min_stake}")
    if state.balances.get(p.proposer, 0) < p.stake:
        raise InsufficientBalance(f"{p.proposer} cannot cover stake {p.stake}")
    record = {
        "kind": "proposal",
        "digest": p.digest(),
        "proposer": p.proposer,
        "stake": p.stake,
        "label": y,
        "at": p.submitted_at,
        "metrics_before": list(M.as_tuple()),
    }

    counts = state.class_counts
    if y == 0 and counts.normal >= state.params.rho * counts.attack:
        # flow control, not misbehaviour: nothing is escrowed
        record.update(decision=Decision.REJECTED.value, reason=RejectReason.IMBALANCE_BLOCKED.value,
                      metrics_after=list(M.as_tuple()), reward=0)
        _log(state, record)
        return Outcome(Decision.REJECTED, M, M, 0, RejectReason.IMBALANCE_BLOCKED)

    _escrow(state, p.proposer, p.stake)
    eta = state.eta if p.eta is None else p.eta
    candidate = micro_train_step(state.model, (x, y), eta)
    M_new = evaluate(candidate, state.test_set, state.params.metric_scale)

    if M_new.dominates(M):
        version = state.model.version + 1
        candidate = candidate.with_params(candidate.weights, candidate.biases, version=version)
        state.prior_models.append(PriorModel(state.model, M, state.test_set.revision, version))
        del state.prior_models[:-state.params.prior_depth]
        state.model = candidate
        state.metrics = M_new
        if y == 1:
            counts.attack += 1
        else:
            counts.normal += 1
        R = reward(state, p.stake, M, M_new)
        _credit(state, p.proposer, R)
        state.rewards_out += R
        state.accepted[version] = AcceptedUpdate(version, p.submitted_at, p.proposer, R - p.stake, y)
        record.update(decision=Decision.ACCEPTED.value, metrics_after=list(M_new.as_tuple()),
                      reward=R, version=version)
        _log(state, record)
        return Outcome(Decision.ACCEPTED, M, M_new, R, None, version)

    reason = (RejectReason.NOT_IMPROVED if all(a >= b for a, b in zip(M_new.as_tuple(), M.as_tuple()))
              else RejectReason.DEGRADED)
    _slash(state, p.stake)
    record.update(decision=Decision.REJECTED.value, reason=reason.value,
                  metrics_after=list(M_new.as_tuple()), reward=0)
    _log(state, record)
    return Outcome(Decision.REJECTED, M, M_new, 0, reason)


# -- governance: rollback challenges and test-set changes ---------------------

def _open(state: PoimState, kind: str, proposer: str, stake: int, now: int, **extra) -> Challenge:
    _escrow(state, proposer, stake)
    ch = Challenge(
        challenge_id=len(state.challenges),
        kind=kind,
        proposer=proposer,
        stake=stake,
        opened_at=now,
        deadline=now + state.params.challenge_window,
        **extra,
    )
    state.challenges.append(ch)
    _log(state, {"kind": f"{kind}_opened", "challenge": ch.challenge_id, "proposer": proposer,
                 "stake": stake, "at": now, "target_version": ch.target_version})
    return ch


def open_challenge(state: PoimState, version: int, challenger: str, stake: int, now: int) -> Challenge:
    update = state.accepted.get(version)
    if update is None or update.rolled_back:
        raise UnknownVersion(f"version {version} is not a live accepted update")
    if not update.accepted_at <= now <= update.accepted_at + state.params.challenge_window:
        raise WindowExpired(f"version {version} left its challenge window")
    for c in state.challenges:
        if c.kind == "rollback" and c.target_version == version and c.status != "dismissed":
            raise DuplicateChallenge(f"version {version} already has a challenge")
    return _open(state, "rollback", challenger, stake, now, target_version=version)


def propose_testset_change(state: PoimState, change: TestSetChange, proposer: str,
                           stake: int, now: int) -> Challenge:
    check_classes(change.apply(state.test_set.samples))
    return _open(state, "testset", proposer, stake, now, change=change)


def _get(state: PoimState, challenge: Union[Challenge, int]) -> Challenge:
    cid = challenge if isinstance(challenge, int) else challenge.challenge_id
    return state.challenges[cid]


def vote(state: PoimState, challenge: Union[Challenge, int], account: str,
         stake_weight: int, choice: bool, now: int) -> None:
    ch = _get(state, challenge)
    if ch.status != "open":
        raise ChallengeClosed(f"challenge {ch.challenge_id} is {ch.status}")
    if now >= ch.deadline:
        raise DeadlinePassed(f"voting on challenge {ch.challenge_id} closed at {ch.deadline}")
    if account in ch.votes:
        raise DoubleVote(f"{account} already voted on challenge {ch.challenge_id}")
    held = state.gov_stakes.get(account, 0)
    if not 0 < stake_weight <= held:
        raise InsufficientVotingPower(f"{account} has {held} voting power, used {stake_weight}")
    ch.votes[account] = (stake_weight, bool(choice))


def _passes(state: PoimState, ch: Challenge) -> bool:
    yes, no = ch.tally()
    total = sum(state.gov_stakes.values())
    return total > 0 and yes > no and yes >= state.params.quorum * total


def resolve_challenge(state: PoimState, challenge: Union[Challenge, int], now: int) -> str:
    """Close a vote at its deadline; returns ``"executed"`` or ``"dismissed"``."""
    ch = _get(state, challenge)
    if ch.status != "open":
        raise ChallengeClosed(f"challenge {ch.challenge_id} is {ch.status}")
    if now < ch.deadline:
        raise DeadlineNotReached(f"challenge {ch.challenge_id} resolves at {ch.deadline}")
    yes, no = ch.tally()
    record = {"kind": f"{ch.kind}_resolved", "challenge": ch.challenge_id, "at": now,
              "yes": yes, "no": no, "metrics_before": list(state.metrics.as_tuple())}

    executed = _passes(state, ch)
    if executed and ch.kind == "rollback":
        executed = _try_rollback(state, ch.target_version, record)
    elif executed and ch.kind == "testset":
        executed = _apply_testset_change(state, ch.change, record)

    if executed:
        ch.status = "executed"
        _refund(state, ch.proposer, ch.stake)
    else:
        ch.status = "dismissed"
        _slash(state, ch.stake)
    record.update(outcome=ch.status, metrics_after=list(state.metrics.as_tuple()),
                  version=state.model.version)
    _log(state, record)
    return ch.status


def _try_rollback(state: PoimState, target: int, record: dict) -> bool:
    stack = state.prior_models
    idx = next((i for i in range(len(stack) - 1, -1, -1) if stack[i].replaced_by == target), None)
    if idx is None or state.accepted[target].rolled_back:
        record["error"] = RollbackTooDeep.__name__
        return False
    entry = stack[idx]
    undone = [e.replaced_by for e in stack[idx:]]
    del stack[idx:]

    restored = entry.model.with_params(entry.model.weights, entry.model.biases,
                                       version=state.model.version + 1)
    metrics = evaluate(restored, state.test_set, state.params.metric_scale)
    if entry.test_revision == state.test_set.revision and metrics != entry.metrics:
        raise ConsistencyError("restored model does not reproduce its recorded metrics")
    state.model = restored
    state.metrics = metrics

    clawed = 0
    for v in undone:
        upd = state.accepted[v]
        upd.rolled_back = True
        if upd.label == 1:
            state.class_counts.attack -= 1
        else:
            state.class_counts.normal -= 1
        amount = min(upd.bonus, state.balances.get(upd.proposer, 0))
        if amount:
            state.balances[upd.proposer] -= amount
            state.vault += amount
            state.clawbacks += amount
            clawed += amount
    # challenges against updates that no longer exist are moot
    for c in state.challenges:
        if c.status == "open" and c.kind == "rollback" and c.target_version in undone \
                and c.target_version != target:
            c.status = "dismissed"
            _refund(state, c.proposer, c.stake)
    record.update(rolled_back=undone, clawed_back=clawed)
    return True


def _apply_testset_change(state: PoimState, change: TestSetChange, record: dict) -> bool:
    try:
        samples = change.apply(state.test_set.samples)
        check_classes(samples)
    except (WouldEmptyClass, EmptyTestSet, IndexError) as exc:
        record["error"] = type(exc).__name__
        return False
    state.test_set = TestSet(samples, state.test_set.revision + 1)
    state.metrics = evaluate(state.model, state.test_set, state.params.metric_scale)
    record["test_revision"] = state.test_set.revision
    return True


def snapshot(state: PoimState) -> PoimState:
    return copy.deepcopy(state)


# -- adversarial stress run ---------------------------------------------------

@dataclass(frozen=True)
class StressStep:
    step: int
    adversarial: bool
    decision: str
    metrics_poim: Metrics
    metrics_unfiltered: Metrics


@dataclass
class StressTrace:
    steps: List[StressStep]
    initial: Metrics
    poim_state: PoimState
    unfiltered: QuantizedModel

    @property
    def final_poim(self) -> Metrics:
        return self.steps[-1].metrics_poim if self.steps else self.initial

    @property
    def final_unfiltered(self) -> Metrics:
        return self.steps[-1].metrics_unfiltered if self.steps else self.initial

    def rows(self) -> List[dict]:
        return [
            {"step": s.step, "adversarial": s.adversarial, "decision": s.decision,
             **{f"poim_{k}": v for k, v in asdict(s.metrics_poim).items()},
             **{f"unfiltered_{k}": v for k, v in asdict(s.metrics_unfiltered).items()}}
            for s in self.steps
        ]


def bootstrap(model: QuantizedModel, seed_samples: Sequence[Sample], eta: int) -> QuantizedModel:
    """One perceptron pass over the seed samples; the result is version 0."""
    for sample in seed_samples:
        model = micro_train_step(model, sample, eta)
    return model.with_params(model.weights, model.biases, version=0)


def poison(sample: Sample, rng, noise_raw: int) -> Sample:
    """Label flip or Gaussian feature noise, chosen with equal odds."""
    x, y = sample
    if rng.random() < 0.5:
        return x, 1 - y
    noise = rng.standard_normal(len(x)) * noise_raw
    return tuple(int(v + int(round(n))) for v, n in zip(x, noise)), y


def stress_test(model: QuantizedModel, seed_samples: Sequence[Sample], stream: Sequence[Sample],
                test_set: TestSet, adversarial_fraction: float, rng_seed: int,
                n_proposals: int = 100, noise_std: float = 3.0,
                params: Optional[PoimParams] = None) -> StressTrace:
    """Run a PoIm-governed arm and an unfiltered arm over the same stream.

    Both start from ``model`` bootstrapped on ``seed_samples``.  Each step
    draws a sample from ``stream``; with probability ``adversarial_fraction``
    it is poisoned first.  The unfiltered arm applies every micro-step.
    """
    import numpy as np

    if not 0.0 <= adversarial_fraction <= 1.0:
        raise ValueError("adversarial_fraction must lie in [0, 1]")
    if not stream:
        raise ValueError("stream is empty")
    params = params or PoimParams()
    eta = params.eta or model.S
    rng = np.random.default_rng(rng_seed)
    base = bootstrap(model, seed_samples, eta)
    counts = ClassCounts(normal=sum(1 for _, y in seed_samples if y == 0),
                         attack=sum(1 for _, y in seed_samples if y == 1))
    proposer = "proposer"
    state = new_state(base, test_set, params,
                      balances={proposer: n_proposals * params.min_stake}, class_counts=counts)
    unfiltered = base
    noise_raw = int(noise_std * model.S)
    steps = []
    for t in range(n_proposals):
        sample = stream[int(rng.integers(len(stream)))]
        adversarial = bool(rng.random() < adversarial_fraction)
        if adversarial:
            sample = poison(sample, rng, noise_raw)
        out = propose_update(state, Proposal(proposer, params.min_stake, sample, eta, t))
        unfiltered = micro_train_step(unfiltered, sample, eta)
        steps.append(StressStep(
            step=t,
            adversarial=adversarial,
            decision=out.decision.value if out.reason is None else out.reason.value,
            metrics_poim=state.metrics,
            metrics_unfiltered=evaluate(unfiltered, test_set, params.metric_scale),
        ))
    return StressTrace(steps, evaluate(base, test_set, params.metric_scale), state, unfiltered)


def synthetic_stress_test(rng_seed: int, adversarial_fraction: float = 0.5, separation: float = 4.0,
                          n_seed: int = 50, n_proposals: int = 100, scale_exponent: int = 6,
                          params: Optional[PoimParams] = None) -> StressTrace:
    """Stress run on generated two-cluster data with a linear classifier.

    The seed set is balanced (half per class), drawn from the train split;
    the remaining train samples form the proposal stream and the test
    split is the canonical test set.
    """
    from .dataset import synthetic_pipeline
    from .fixedpoint import Scale
    from .inference import quantize
    from .models import Linear, zero_model

    scale = Scale(scale_exponent)
    ds = synthetic_pipeline(300, 300, separation, rng_seed, scale)
    normals = [s for s in ds.train if s[1] == 0]
    attacks = [s for s in ds.train if s[1] == 1]
    half = n_seed // 2
    seed = [s for pair in zip(normals[:half], attacks[:half]) for s in pair]
    stream = normals[half:] + attacks[half:]
    model = quantize(zero_model(Linear(len(ds.train[0][0]))), scale)
    return stress_test(model, seed, stream, TestSet(ds.test), adversarial_fraction,
                       rng_seed, n_proposals, params=params)
