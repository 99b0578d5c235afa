"""Command-line entry point.

Subcommands: ``generate`` (workload traces), ``estimate`` (one-step
comparison runs), ``train-attention`` (fit attention weights on a
trace), ``scale-sim`` (autoscaler stability experiment).

Exit codes: 0 success, 1 usage, 2 data/validation, 3 numeric failure.
Failures emit a machine-readable JSON object on stderr.  All outputs
are deterministic for a fixed config and are written atomically.
"""

import argparse
import json
import os
import sys

import jsonschema

from .attention import attn_init, attn_train, params_from_json, params_to_json
from .autoscaler import EstimatorConfig, SimProfile, run_stability_experiment
from .errors import DataError, KalmanLabError, NumericError
from .estimators import VALID_KINDS
from .evalkit import run_comparison
from .ioutil import atomic_write_text
from .workloads import (
    TRACE_KINDS,
    load_trace_csv,
    make_trace,
    trace_csv_text,
)


class UsageError(Exception):
    """Bad command line; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


_ESTIMATOR_PARAM_PROPS = {
    "name": {"type": "string"},
    "label": {"type": "string"},
    "q": {"type": "number", "exclusiveMinimum": 0},
    "r": {"type": "number", "exclusiveMinimum": 0},
    "embed_dim": {"type": "integer", "minimum": 1},
    "window": {"type": "integer", "minimum": 2},
    "pca_threshold": {"type": "number", "minimum": 0},
    "refit_every": {"type": "integer", "minimum": 1},
    "alpha": {"type": "number"},
    "beta": {"type": "number"},
    "kappa": {"type": "number"},
    "attn_hidden": {"type": "integer", "minimum": 1},
    "attn_window": {"type": "integer", "minimum": 2},
    "attn_params_path": {"type": "string"},
    "seed": {"type": "integer"},
}

_SIGNAL_PROPS = {
    "kind": {"type": "string"},
    "experiment": {"type": "string"},
    "length": {"type": "integer", "minimum": 1},
    "tau": {"type": "integer", "minimum": 1},
    "beta": {"type": "number"},
    "gamma": {"type": "number"},
    "n_exp": {"type": "number"},
    "dt": {"type": "number", "exclusiveMinimum": 0},
    "x0": {"type": "number"},
    "snr_db": {"type": "number"},
    "rate": {"type": "number", "exclusiveMinimum": 0},
    "duration": {"type": "number", "exclusiveMinimum": 0},
    "base_rate": {"type": "number", "minimum": 0},
    "diurnal_period": {"type": "number", "exclusiveMinimum": 0},
    "diurnal_amplitude": {"type": "number"},
    "burst_rate": {"type": "number", "minimum": 0},
    "burst_scale": {"type": "number"},
    "burst_decay": {"type": "number", "exclusiveMinimum": 0},
    "mean": {"type": "number"},
    "reversion": {"type": "number"},
    "target_walk_std": {"type": "number", "minimum": 0},
    "spike_prob": {"type": "number", "minimum": 0},
    "spike_scale": {"type": "number"},
    "noise_std": {"type": "number", "minimum": 0},
    "start": {"type": "number"},
    "floor": {"type": "number"},
    "decay_tau": {"type": "number", "exclusiveMinimum": 0},
    "level": {"type": "number"},
    "level0": {"type": "number"},
    "level1": {"type": "number"},
    "at": {"type": "integer", "minimum": 1},
    "path": {"type": "string"},
}

ESTIMATE_SCHEMA = {
    "type": "object",
    "properties": {
        "experiment": {"type": "string"},
        "signal": {
            "type": "object",
            "properties": _SIGNAL_PROPS,
            "required": ["kind"],
            "additionalProperties": False,
        },
        "estimators": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": _ESTIMATOR_PARAM_PROPS,
                "required": ["name"],
                "additionalProperties": False,
            },
        },
        "seed": {"type": "integer"},
        "burn_in": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
    },
    "required": ["signal", "estimators", "seed"],
    "additionalProperties": False,
}

SCALE_SCHEMA = {
    "type": "object",
    "properties": {
        "experiment": {"type": "string"},
        "workload": {
            "type": "object",
            "properties": _SIGNAL_PROPS,
            "required": ["kind"],
            "additionalProperties": False,
        },
        "estimators": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": _ESTIMATOR_PARAM_PROPS,
                "required": ["name"],
                "additionalProperties": False,
            },
        },
        "threshold_us": {"type": "number", "exclusiveMinimum": 0},
        "update_rate": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "scaling_duration_us": {"type": "number", "minimum": 0},
        "n_iter": {"type": "integer", "minimum": 2},
        "service_time_us": {"type": "number", "minimum": 0},
        "noise_std_us": {"type": "number", "minimum": 0},
        "outlier_prob": {"type": "number", "minimum": 0},
        "outlier_scale": {"type": "number", "minimum": 1},
        "seed": {"type": "integer"},
        "output_dir": {"type": "string"},
    },
    "required": ["workload", "estimators", "threshold_us", "seed"],
    "additionalProperties": False,
}


def _load_config(path, schema):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON in {path}: {exc}") from None
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "(root)"
        raise DataError(f"config {path}: {where}: {exc.message}") from None
    return doc


def _resolve_attention_params(spec):
    """Replace an attn_params_path entry with loaded AttentionParams."""
    spec = dict(spec)
    path = spec.pop("attn_params_path", None)
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                spec["attn_params"] = params_from_json(fh.read())
        except OSError as exc:
            raise DataError(f"cannot read attention params {path}: {exc}") from None
    return spec


def cmd_generate(args):
    params = {}
    for key in _SIGNAL_PROPS:
        if key in ("kind", "experiment"):
            continue
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    try:
        trace = make_trace(args.kind, params, seed=args.seed)
    except TypeError as exc:
        raise DataError(f"bad parameters for kind {args.kind!r}: {exc}") from None
    atomic_write_text(args.out, trace_csv_text(trace))
    return 0


def cmd_estimate(args):
    config = _load_config(args.config, ESTIMATE_SCHEMA)
    signal = dict(config["signal"])
    if "experiment" in config:
        signal["experiment"] = config["experiment"]
    estimators = [_resolve_attention_params(s) for s in config["estimators"]]
    outdir = args.out_dir or config.get("output_dir")
    report = run_comparison(
        signal,
        estimators,
        seed=config["seed"],
        outdir=outdir,
        burn_in=config.get("burn_in", 10),
    )
    sys.stdout.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_train_attention(args):
    trace = load_trace_csv(args.trace)
    params = attn_init(
        trace.dim, args.hidden, args.window, seed=args.seed
    )
    trained, losses = attn_train(
        params, trace.values, epochs=args.epochs, lr=args.lr
    )
    atomic_write_text(args.out, params_to_json(trained) + "\n")
    if args.loss_curve:
        lines = ["epoch,loss"]
        lines += [f"{i},{loss:.17g}" for i, loss in enumerate(losses)]
        atomic_write_text(args.loss_curve, "\n".join(lines) + "\n")
    sys.stdout.write(
        json.dumps(
            {
                "epochs": int(args.epochs),
                "first_loss": losses[0],
                "final_loss": losses[-1],
                "out": args.out,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    return 0


def cmd_scale_sim(args):
    config = _load_config(args.config, SCALE_SCHEMA)
    workload_spec = dict(config["workload"])
    kind = workload_spec.pop("kind")
    workload = make_trace(kind, workload_spec, seed=config["seed"])
    sim = SimProfile(
        service_time_us=config.get("service_time_us", 100.0),
        noise_std_us=config.get("noise_std_us", 0.0),
        outlier_prob=config.get("outlier_prob", 0.0),
        outlier_scale=config.get("outlier_scale", 6.0),
    )
    outdir = args.out_dir or config.get("output_dir")
    if outdir:
        os.makedirs(outdir, exist_ok=True)

    summary = {
        "experiment": config.get("experiment", "scale-sim"),
        "seed": config["seed"],
        "n_iter": config.get("n_iter", 10),
        "threshold_us": config["threshold_us"],
        "update_rate": config.get("update_rate", 0.25),
        "scaling_duration_us": config.get("scaling_duration_us", 40.0),
        "estimators": [],
    }
    for spec in config["estimators"]:
        spec = _resolve_attention_params(spec)
        name = spec.pop("name")
        label = spec.pop("label", name)
        cfg = EstimatorConfig(
            kind=name,
            threshold_us=config["threshold_us"],
            update_rate=config.get("update_rate", 0.25),
            scaling_duration_us=config.get("scaling_duration_us", 40.0),
            params=spec,
        )
        result = run_stability_experiment(
            workload, cfg, sim=sim,
            n_iter=config.get("n_iter", 10), seed=config["seed"],
        )
        summary["estimators"].append(
            {
                "kind": label,
                "sigma_us2": result.sigma_us2,
                "t_init_us": result.t_init_us,
                "t_init_requests": result.t_init_requests,
                "excluded_iterations": result.excluded,
            }
        )
        if outdir:
            lines = ["iteration,t_i_us,t_i_requests"]
            for it in range(result.n_iter):
                t_us = result.t_init_us[it]
                t_req = result.t_init_requests[it]
                if t_us is None:
                    lines.append(f"{it},no event,no event")
                else:
                    lines.append(f"{it},{t_us:.17g},{t_req}")
            atomic_write_text(
                os.path.join(outdir, f"scaling_{label}.csv"),
                "\n".join(lines) + "\n",
            )
    if outdir:
        atomic_write_text(
            os.path.join(outdir, "summary.json"),
            json.dumps(summary, indent=2, sort_keys=True) + "\n",
        )
    sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0


def build_parser():
    parser = _Parser(
        prog="kalmanlab",
        description="Kalman-filter estimators, workload generators, and "
        "an autoscaler stability simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser(
        "generate",
        help="emit a workload trace as CSV",
        description="Generate a trace. Parameters not used by the chosen "
        "kind are rejected.",
    )
    gen.add_argument("kind", choices=[k for k in TRACE_KINDS if k != "csv"])
    gen.add_argument("--out", required=True, help="output CSV path")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--length", type=int)
    gen.add_argument("--tau", type=int)
    gen.add_argument("--beta", type=float)
    gen.add_argument("--gamma", type=float)
    gen.add_argument("--n-exp", dest="n_exp", type=float)
    gen.add_argument("--dt", type=float)
    gen.add_argument("--x0", type=float)
    gen.add_argument("--snr-db", dest="snr_db", type=float)
    gen.add_argument("--rate", type=float)
    gen.add_argument("--duration", type=float)
    gen.add_argument("--base-rate", dest="base_rate", type=float)
    gen.add_argument("--diurnal-period", dest="diurnal_period", type=float)
    gen.add_argument("--diurnal-amplitude", dest="diurnal_amplitude", type=float)
    gen.add_argument("--burst-rate", dest="burst_rate", type=float)
    gen.add_argument("--burst-scale", dest="burst_scale", type=float)
    gen.add_argument("--burst-decay", dest="burst_decay", type=float)
    gen.add_argument("--mean", type=float)
    gen.add_argument("--reversion", type=float)
    gen.add_argument("--target-walk-std", dest="target_walk_std", type=float)
    gen.add_argument("--spike-prob", dest="spike_prob", type=float)
    gen.add_argument("--spike-scale", dest="spike_scale", type=float)
    gen.add_argument("--noise-std", dest="noise_std", type=float)
    gen.add_argument("--start", type=float)
    gen.add_argument("--floor", type=float)
    gen.add_argument("--decay-tau", dest="decay_tau", type=float)
    gen.add_argument("--level", type=float)
    gen.add_argument("--level0", type=float)
    gen.add_argument("--level1", type=float)
    gen.add_argument("--at", type=int)
    gen.set_defaults(func=cmd_generate)

    est = sub.add_parser(
        "estimate",
        help="run a one-step-ahead estimator comparison from a JSON config",
    )
    est.add_argument("--config", required=True, help="JSON config path")
    est.add_argument("--out-dir", dest="out_dir", help="override output_dir")
    est.set_defaults(func=cmd_estimate)

    train = sub.add_parser(
        "train-attention",
        help="train attention weights on a trace and save them as JSON",
    )
    train.add_argument("--trace", required=True, help="input trace CSV")
    train.add_argument("--out", required=True, help="output params JSON path")
    train.add_argument("--epochs", type=int, default=200)
    train.add_argument("--lr", type=float, default=1e-2)
    train.add_argument("--window", type=int, default=16)
    train.add_argument("--hidden", type=int, default=8)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--loss-curve", dest="loss_curve",
                       help="optional loss-curve CSV path")
    train.set_defaults(func=cmd_train_attention)

    sim = sub.add_parser(
        "scale-sim",
        help="run the autoscaler stability experiment from a JSON config",
    )
    sim.add_argument("--config", required=True, help="JSON config path")
    sim.add_argument("--out-dir", dest="out_dir", help="override output_dir")
    sim.set_defaults(func=cmd_scale_sim)
    return parser


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        return _fail(1, "UsageError", str(exc))
    except NumericError as exc:
        return _fail(3, "NumericError", str(exc))
    except KalmanLabError as exc:
        return _fail(2, type(exc).__name__, str(exc))
    except OSError as exc:
        return _fail(2, "OSError", str(exc))


if __name__ == "__main__":
    sys.exit(main())
