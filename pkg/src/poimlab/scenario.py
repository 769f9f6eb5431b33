"""Build a simulation from a run config and replay scenario files.

A scenario is a JSON object::

    {"steps": [{"op": "propose_update", "sender": "alice",
                "args": {"train_index": 3, "stake": 5}},
               {"op": "advance_time", "seconds": 86400},
               {"op": "random_proposals", "sender": "alice", "count": 20,
                "adversarial_fraction": 0.5},
               {"op": "bridge"}],
     "stress": {"adversarial_fraction": 0.5, "n_proposals": 100}}

Both keys are optional.  ``stress`` runs the two-arm stress test on the
configured synthetic data in addition to the scripted steps.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from .bridge import init_l2
from .chainsim import Receipt, Simulation
from .config import OPERATOR, RunConfig, arch_from_dict, random_float_model
from .dataset import FEATURE_NAMES, ingest, standardize_encode, synthetic_pipeline, temporal_split
from .errors import ConfigError
from .models import zero_model
from .poim import (
    ClassCounts,
    StressTrace,
    TestSet,
    bootstrap,
    evaluate,
    fund_vault,
    synthetic_stress_test,
)


def load_dataset(cfg: RunConfig):
    frac = float(cfg.data.get("test_fraction", 0.3))
    if "path" in cfg.data:
        records = ingest(cfg.data["path"])
        return standardize_encode(temporal_split(records, frac), cfg.scale)
    syn = cfg.data["synthetic"]
    return synthetic_pipeline(int(syn.get("n_normal", 200)), int(syn.get("n_attack", 200)),
                              float(syn.get("separation", 4.0)), cfg.seed, cfg.scale, frac)


def build_simulation(cfg: RunConfig) -> Simulation:
    """Deploy the configured model on L2, bootstrapped on a balanced seed set."""
    ds = load_dataset(cfg)
    arch_spec = dict(cfg.arch)
    arch_spec.setdefault("d", len(FEATURE_NAMES))
    arch = arch_from_dict(arch_spec)
    if arch.d != len(FEATURE_NAMES):
        raise ConfigError(f"architecture input width {arch.d} must be {len(FEATURE_NAMES)}")
    float_model = zero_model(arch) if cfg.init == "zero" else random_float_model(arch, cfg.seed)

    normals = [s for s in ds.train if s[1] == 0]
    attacks = [s for s in ds.train if s[1] == 1]
    half = cfg.bootstrap_samples // 2
    seed = [s for pair in zip(normals[:half], attacks[:half]) for s in pair]
    stream = normals[half:] + attacks[half:]

    state = init_l2(float_model, TestSet(ds.test), cfg.scale, cfg.params,
                    balances=dict(cfg.accounts),
                    class_counts=ClassCounts(sum(1 for _, y in seed if y == 0),
                                             sum(1 for _, y in seed if y == 1)))
    if seed:
        state.model = bootstrap(state.model, seed, state.eta)
        state.metrics = evaluate(state.model, state.test_set, cfg.params.metric_scale)
    sim = Simulation(state, operator=OPERATOR)
    if cfg.vault_funding:
        fund_vault(sim.poim, OPERATOR, cfg.vault_funding)
    sim.stream = stream
    sim.dataset = ds
    return sim


@dataclass
class ScenarioResult:
    simulation: Simulation
    receipts: List[Receipt]
    state_hash: str
    stress: Optional[StressTrace] = None

    def summary(self) -> Dict[str, Any]:
        poim = self.simulation.poim
        out = {
            "state_hash": self.state_hash,
            "model_version": poim.model.version,
            "metrics": list(poim.metrics.as_tuple()),
            "vault": poim.vault,
            "vault_conserved": poim.vault_conserved(),
            "transactions": len(self.receipts),
            "failed": sum(not r.ok for r in self.receipts),
        }
        if self.stress is not None:
            out["stress_final_poim_f1"] = self.stress.final_poim.f1
            out["stress_final_unfiltered_f1"] = self.stress.final_unfiltered.f1
        return out


def load_scenario(path: Union[str, Path, None]) -> Dict[str, Any]:
    if path is None:
        return {}
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(doc, dict) or set(doc) - {"steps", "stress"}:
        raise ConfigError("scenario must be an object with optional 'steps' and 'stress'")
    return doc


def run_scenario(cfg: RunConfig, scenario: Dict[str, Any]) -> ScenarioResult:
    sim = build_simulation(cfg)
    rng = np.random.default_rng(cfg.seed)
    receipts = sim.run(scenario.get("steps", []), rng)
    stress = None
    if "stress" in scenario:
        s = dict(scenario["stress"])
        syn = cfg.data.get("synthetic", {})
        stress = synthetic_stress_test(
            rng_seed=int(s.get("seed", cfg.seed)),
            adversarial_fraction=float(s.get("adversarial_fraction", 0.5)),
            separation=float(s.get("separation", syn.get("separation", 4.0))),
            n_seed=int(s.get("n_seed", 50)),
            n_proposals=int(s.get("n_proposals", 100)),
            scale_exponent=cfg.scale_exponent,
            params=copy.deepcopy(cfg.params),
        )
    return ScenarioResult(sim, receipts, sim.state_hash(), stress)


__all__ = ["ScenarioResult", "build_simulation", "load_dataset", "load_scenario", "run_scenario"]
