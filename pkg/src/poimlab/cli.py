"""Command-line front end.

Every command exits 0 on success and non-zero on any error or rejection.
Output is JSON on stdout unless a file is requested.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .analysis import cluster_report, feature_matrix
from .bridge import Commitment, L1InferenceState, transfer_and_verify
from .chainsim import throughput_bench, throughput_table
from .config import CONFIG_ENV, arch_from_dict, arch_to_dict, load_config, load_float_model, parse_scale
from .dataset import ingest
from .errors import ConfigError, SimError
from .fixedpoint import from_fixed
from .gascost import gas_for_model, report_for_arch
from .hashing import keccak256
from .inference import forward, predict, quantize, quantize_input
from .models import DecisionTree
from .scenario import load_scenario, run_scenario
from .serialization import deserialize, serialize

EXIT_ERROR = 1
EXIT_REJECTED = 2


def _emit(payload) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True, default=str)
    sys.stdout.write("\n")


def _read_model(path: str):
    return deserialize(Path(path).read_bytes())


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot read vector {text!r}") from None


def cmd_quantize(args) -> int:
    model = load_float_model(args.model)
    q = quantize(model, parse_scale(args.scale), version=args.model_version)
    data = serialize(q)
    Path(args.output).write_bytes(data)
    _emit({"output": args.output, "bytes": len(data), "hash": "0x" + keccak256(data).hex()})
    return 0


def cmd_inspect(args) -> int:
    data = Path(args.model).read_bytes()
    q = deserialize(data)
    _emit({
        "arch": arch_to_dict(q.arch),
        "version": q.version,
        "scale_exponent": q.scale.exponent,
        "weights": list(q.weights),
        "biases": list(q.biases),
        "hash": "0x" + keccak256(data).hex(),
    })
    return 0


def cmd_infer(args) -> int:
    q = _read_model(args.model)
    if args.raw:
        x = [int(v) for v in args.x.split(",") if v.strip()]
    else:
        x = list(quantize_input(_floats(args.x), q.scale))
    out = {"x_raw": x, "label": predict(x, q)}
    if not isinstance(q.arch, DecisionTree):
        logit = forward(x, q)
        out.update(logit_raw=logit, logit=from_fixed(logit, q.scale))
    out["gas"] = json.loads(gas_for_model(q).to_json())
    _emit(out)
    return 0


def cmd_gascost(args) -> int:
    pricing = {"gas_price_gwei": args.gas_price_gwei, "token_usd": args.token_usd}
    if args.model:
        report = gas_for_model(_read_model(args.model), **pricing)
    else:
        spec = {"type": args.arch, "d": args.d, "filters": args.filters, "kernel": args.kernel,
                "units": args.units, "timesteps": args.timesteps}
        if args.layers:
            spec["layer_sizes"] = [int(n) for n in args.layers.split(",")]
        arch = arch_from_dict({k: v for k, v in spec.items() if v is not None})
        report = report_for_arch(arch, **pricing)
    _emit(json.loads(report.to_json()))
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    result = run_scenario(cfg, load_scenario(args.scenario))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "history.jsonl").write_text(result.simulation.history())
    (out / "events.jsonl").write_text(result.simulation.events())
    (out / "state_hash.txt").write_text(result.state_hash + "\n")
    if result.stress is not None:
        rows = result.stress.rows()
        with open(out / "trajectory.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["step"])
            writer.writeheader()
            writer.writerows(rows)
    summary = result.summary()
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _emit(summary)
    return 0


def cmd_bridge_verify(args) -> int:
    """Commit the L2 export's hash, then try to install the L1 import against it."""
    committed = Path(args.l2_export).read_bytes()
    source = deserialize(committed)
    l1 = L1InferenceState([Commitment(keccak256(committed), 0, source.version)])
    result = transfer_and_verify(l1, Path(args.l1_import).read_bytes(), source)
    _emit({"status": result.status.value, "reason": result.reason,
           "commitment": l1.latest.hex()})
    return 0 if result.accepted else EXIT_REJECTED


def cmd_cluster(args) -> int:
    X = feature_matrix(ingest(args.data))
    report = cluster_report(X, args.k, args.seed)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    report.to_csv(f"{prefix}_projection.csv")
    summary = report.summary()
    Path(f"{prefix}_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _emit(summary)
    return 0


def cmd_bench(args) -> int:
    rows = throughput_bench(_read_model(args.model), [int(b) for b in args.batches.split(",")], args.seed)
    sys.stdout.write(throughput_table(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="poimlab",
        description="Quantized on-chain inference, gas costing and governed model updates.",
        epilog=f"The config path may also be given through ${CONFIG_ENV}.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quantize", help="float model JSON -> serialized fixed-point model")
    q.add_argument("model", help="JSON file with arch, weights and biases")
    q.add_argument("--scale", required=True, help="power of ten: 1000000, 10^6 or 1e6")
    q.add_argument("--model-version", type=int, default=0)
    q.add_argument("-o", "--output", required=True)
    q.set_defaults(func=cmd_quantize)

    i = sub.add_parser("inspect", help="decode a serialized model to JSON")
    i.add_argument("model")
    i.set_defaults(func=cmd_inspect)

    f = sub.add_parser("infer", help="classify one input vector")
    f.add_argument("model")
    f.add_argument("x", help="comma-separated feature values")
    f.add_argument("--raw", action="store_true", help="values are already fixed-point raws")
    f.set_defaults(func=cmd_infer)

    g = sub.add_parser("gascost", help="analytic gas report")
    g.add_argument("--model", help="serialized model (overrides --arch)")
    g.add_argument("--arch", choices=["linear", "mlp", "cnn", "rnn"], default="linear")
    g.add_argument("--d", type=int, default=3)
    g.add_argument("--filters", type=int)
    g.add_argument("--kernel", type=int)
    g.add_argument("--units", type=int)
    g.add_argument("--timesteps", type=int)
    g.add_argument("--layers", help="MLP layer sizes, e.g. 4,1")
    g.add_argument("--gas-price-gwei", type=float)
    g.add_argument("--token-usd", type=float)
    g.set_defaults(func=cmd_gascost)

    s = sub.add_parser("simulate", help="replay a scenario on the two-ledger simulator")
    s.add_argument("--config", help=f"run config JSON (default: ${CONFIG_ENV} or built-in)")
    s.add_argument("--scenario", help="scenario JSON; omitted means no transactions")
    s.add_argument("--seed", type=int, help="override the config seed")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bridge-verify", help="check an L1 payload against an L2 commitment")
    b.add_argument("l2_export", help="serialized model committed on L2")
    b.add_argument("l1_import", help="payload delivered to L1")
    b.set_defaults(func=cmd_bridge_verify)

    c = sub.add_parser("cluster", help="PCA + k-means separability report")
    c.add_argument("data", help="transaction CSV")
    c.add_argument("--k", type=int, default=3)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True, help="output path prefix")
    c.set_defaults(func=cmd_cluster)

    t = sub.add_parser("bench", help="view-call inference throughput table")
    t.add_argument("model")
    t.add_argument("--batches", default="1,10,100")
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SimError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


__all__ = ["build_parser", "main"]


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
