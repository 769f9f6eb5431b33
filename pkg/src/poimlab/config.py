"""JSON run configuration and model description files."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from .errors import ConfigError, MalformedModel, MalformedTree, ScaleError
from .fixedpoint import Scale
from .models import Cnn1d, DecisionTree, FloatModel, Linear, Mlp, Rnn, TreeNode
from .poim import METRIC_KEYS, METRIC_SCALE, PoimParams

CONFIG_ENV = "POIMLAB_CONFIG"
OPERATOR = "operator"


# -- architectures and float models ------------------------------------------

def arch_from_dict(spec: Dict[str, Any]):
    kind = str(spec.get("type", "")).lower()
    try:
        if kind == "linear":
            return Linear(int(spec["d"]))
        if kind == "mlp":
            return Mlp(int(spec["d"]), tuple(int(n) for n in spec["layer_sizes"]))
        if kind == "cnn":
            return Cnn1d(int(spec["d"]), int(spec["filters"]), int(spec["kernel"]))
        if kind == "rnn":
            return Rnn(int(spec["d"]), int(spec["units"]), int(spec["timesteps"]))
        if kind == "tree":
            nodes = tuple(TreeNode(**{k: int(v) for k, v in n.items()}) for n in spec["nodes"])
            return DecisionTree(int(spec["d"]), nodes)
    except KeyError as exc:
        raise ConfigError(f"architecture {kind!r} is missing {exc.args[0]!r}") from None
    except (MalformedModel, MalformedTree, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown architecture type {spec.get('type')!r}")


def arch_to_dict(arch) -> Dict[str, Any]:
    if isinstance(arch, Linear):
        return {"type": "linear", "d": arch.d}
    if isinstance(arch, Mlp):
        return {"type": "mlp", "d": arch.d, "layer_sizes": list(arch.layer_sizes)}
    if isinstance(arch, Cnn1d):
        return {"type": "cnn", "d": arch.d, "filters": arch.filters, "kernel": arch.kernel}
    if isinstance(arch, Rnn):
        return {"type": "rnn", "d": arch.d, "units": arch.units, "timesteps": arch.timesteps}
    return {"type": "tree", "d": arch.d,
            "nodes": [{"feature": n.feature, "left": n.left, "right": n.right, "label": n.label}
                      for n in arch.nodes]}


def float_model_from_dict(doc: Dict[str, Any]) -> FloatModel:
    arch = arch_from_dict(doc.get("arch", {}))
    try:
        return FloatModel(arch, tuple(doc.get("weights", ())), tuple(doc.get("biases", ())))
    except (MalformedModel, TypeError, ValueError) as exc:
        raise ConfigError(f"bad model parameters: {exc}") from None


def float_model_to_dict(m: FloatModel) -> Dict[str, Any]:
    return {"arch": arch_to_dict(m.arch), "weights": list(m.weights), "biases": list(m.biases)}


def load_float_model(path: Union[str, Path]) -> FloatModel:
    return float_model_from_dict(_read_json(path))


def random_float_model(arch, rng_seed: int, spread: float = 1.0) -> FloatModel:
    rng = np.random.default_rng(rng_seed)
    w = rng.uniform(-spread, spread, arch.n_weights).tolist()
    b = rng.uniform(-spread, spread, arch.n_biases).tolist()
    return FloatModel(arch, w, b)


def parse_scale(text: str) -> Scale:
    """Read a power-of-ten scale written as ``1000000``, ``10^6`` or ``1e6``."""
    t = str(text).strip().lower()
    try:
        if "^" in t or "e" in t:
            base, exp = t.split("^") if "^" in t else t.split("e")
            if float(base) != (10.0 if "^" in t else 1.0):
                raise ScaleError(f"scale {text!r} is not a power of ten")
            return Scale(int(exp))
        return Scale.from_value(int(t))
    except ValueError as exc:
        if isinstance(exc, ScaleError):
            raise
        raise ScaleError(f"cannot read scale {text!r}") from None


# -- run configuration --------------------------------------------------------

_TOP_KEYS = {"seed", "scale_exponent", "metric_scale", "params", "data", "arch", "init",
             "accounts", "vault_funding", "bootstrap_samples"}
_PARAM_KEYS = {"min_stake", "alpha", "rho", "challenge_window", "quorum", "eta", "prior_depth"}


@dataclass
class RunConfig:
    seed: int = 0
    scale_exponent: int = 6
    metric_scale: int = METRIC_SCALE
    params: PoimParams = field(default_factory=PoimParams)
    data: Dict[str, Any] = field(default_factory=lambda: {
        "synthetic": {"n_normal": 200, "n_attack": 200, "separation": 4.0}, "test_fraction": 0.3})
    arch: Dict[str, Any] = field(default_factory=lambda: {"type": "linear"})
    init: str = "zero"
    accounts: Dict[str, int] = field(default_factory=lambda: {OPERATOR: 10_000})
    vault_funding: int = 0
    bootstrap_samples: int = 50

    @property
    def scale(self) -> Scale:
        return Scale(self.scale_exponent)

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "RunConfig":
        unknown = set(doc) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
        raw = dict(doc.get("params", {}))
        bad = set(raw) - _PARAM_KEYS
        if bad:
            raise ConfigError(f"unknown protocol parameter(s): {sorted(bad)}")
        alpha = raw.get("alpha", {k: 1 for k in METRIC_KEYS})
        if set(alpha) - set(METRIC_KEYS):
            raise ConfigError(f"alpha keys must be among {METRIC_KEYS}")
        try:
            scale = Scale(int(doc.get("scale_exponent", 6)))
            params = PoimParams(
                min_stake=int(raw.get("min_stake", 1)),
                alpha=alpha,
                rho=int(raw.get("rho", 5)),
                challenge_window=int(raw.get("challenge_window", 86_400)),
                quorum=Fraction(str(raw.get("quorum", "1/2"))),
                eta=int(round(float(raw.get("eta", 1.0)) * scale.value)),
                prior_depth=int(raw.get("prior_depth", 16)),
                metric_scale=int(doc.get("metric_scale", METRIC_SCALE)),
            )
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(str(exc)) from None
        cfg = cls(
            seed=int(doc.get("seed", 0)),
            scale_exponent=scale.exponent,
            metric_scale=params.metric_scale,
            params=params,
            init=str(doc.get("init", "zero")),
            vault_funding=int(doc.get("vault_funding", 0)),
            bootstrap_samples=int(doc.get("bootstrap_samples", 50)),
        )
        if "data" in doc:
            cfg.data = dict(doc["data"])
        if "arch" in doc:
            cfg.arch = dict(doc["arch"])
        if "accounts" in doc:
            cfg.accounts = {str(k): int(v) for k, v in doc["accounts"].items()}
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.init not in ("zero", "random"):
            raise ConfigError("init must be 'zero' or 'random'")
        if any(v < 0 for v in self.accounts.values()):
            raise ConfigError("account balances must be non-negative")
        if not 0 <= self.vault_funding <= self.accounts.get(OPERATOR, 0):
            raise ConfigError(f"vault_funding must be covered by the {OPERATOR!r} balance")
        if self.bootstrap_samples < 0:
            raise ConfigError("bootstrap_samples must be non-negative")
        if self.metric_scale < 1:
            raise ConfigError("metric_scale must be positive")
        if "synthetic" not in self.data and "path" not in self.data:
            raise ConfigError("data needs either 'synthetic' parameters or a 'path'")
        if not 0.0 < float(self.data.get("test_fraction", 0.3)) < 1.0:
            raise ConfigError("test_fraction must lie in (0, 1)")


def _read_json(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """Read a config file; without a path, fall back to ``$POIMLAB_CONFIG`` or defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return RunConfig()
    return RunConfig.from_dict(_read_json(path))
