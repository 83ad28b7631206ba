"""Command-line front end: ``lamm run | sweep | compare``.

Exit codes: 0 success, 1 invalid configuration, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import replace

from lamm import BACKEND
from lamm.core import ConfigError, EnvironmentSpec
from lamm.harness import ExperimentConfig, benchmark_registry, run_experiment
from lamm.metrics import ConvergenceCriterion
from lamm.schemes import SchemeConfig

CONFIG_VERSION = 1
SUMMARY_SCHEMA = 1
TRACE_SCHEMA = 1
TRACE_COLUMNS = ("run_index", "step", "action", "response", "p_opt", "expected_reward")
SWEEP_PARAMS = ("a", "b", "lambda", "threshold")
DEFAULT_OUT = "results"

TOP_KEYS = {"version", "preset", "env", "scheme", "steps", "runs", "master_seed", "criterion",
            "record_stride", "stop_at_convergence", "out"}
ENV_KEYS = {"name", "rewards"}
SCHEME_KEYS = {"kind", "a", "b", "lambda", "model_grid", "gains", "init_pulls"}
CRITERION_KEYS = {"threshold", "target"}


class IOFailure(Exception):
    pass


def fmt(x) -> str:
    return format(float(x), ".17g")


# -- config documents -------------------------------------------------------

def config_to_dict(config: ExperimentConfig, preset: str | None = None, out: str | None = None) -> dict:
    s = config.scheme
    scheme = {"kind": s.kind}
    if s.kind in ("LRI", "LRP", "LREP"):
        scheme["a"] = s.a
    if s.kind in ("LRP", "LREP"):
        scheme["b"] = s.b
    if s.is_estimator:
        scheme["lambda"] = s.lam
        scheme["init_pulls"] = s.init_pulls
    if s.kind in ("MultiFixed", "MultiAdaptive"):
        scheme["model_grid"] = list(s.model_grid)
    if s.kind == "MultiAdaptive":
        scheme["gains"] = list(s.gains)
    doc = {
        "version": CONFIG_VERSION,
        "preset": preset,
        "env": {"name": config.env.name, "rewards": list(config.env.rewards)},
        "scheme": scheme,
        "steps": config.steps,
        "runs": config.runs,
        "master_seed": config.master_seed,
        "criterion": {"threshold": config.criterion.threshold, "target": config.criterion.target},
        "record_stride": config.record_stride,
        "stop_at_convergence": config.stop_at_convergence,
    }
    if out is not None:
        doc["out"] = out
    return doc


def _check_keys(section: dict, allowed: set, prefix: str):
    if not isinstance(section, dict):
        raise ConfigError(prefix.rstrip(".") or "config", "must be an object")
    for key in section:
        if key not in allowed:
            raise ConfigError(prefix + key, f"unknown key (allowed: {', '.join(sorted(allowed))})")


def _number(doc, key, prefix, integer=False):
    v = doc[key]
    ok = isinstance(v, int) if integer else isinstance(v, (int, float))
    if isinstance(v, bool) or not ok:
        raise ConfigError(prefix + key, f"must be {'an integer' if integer else 'a number'}, got {v!r}")
    return v


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def config_from_dict(doc: dict) -> tuple[ExperimentConfig, str | None]:
    """Validate a config document; returns the config and the preset it started from."""
    _check_keys(doc, TOP_KEYS, "")
    if doc.get("version") != CONFIG_VERSION:
        raise ConfigError("version", f"unsupported schema version {doc.get('version')!r} (supported: {CONFIG_VERSION})")
    preset = doc.get("preset")
    if preset is not None:
        registry = benchmark_registry()
        if preset not in registry:
            raise ConfigError("preset", f"unknown preset {preset!r}; valid presets: {', '.join(sorted(registry))}")
        base = config_to_dict(registry[preset], preset)
        if "scheme" in doc and doc["scheme"].get("kind", base["scheme"]["kind"]) != base["scheme"]["kind"]:
            base["scheme"] = {}
        doc = _merge(base, doc)
    for key in ("env", "scheme"):
        if key not in doc:
            raise ConfigError(key, "missing")

    env_doc = doc["env"]
    _check_keys(env_doc, ENV_KEYS, "env.")
    if "rewards" not in env_doc or not isinstance(env_doc["rewards"], list):
        raise ConfigError("env.rewards", "must be a list of reward probabilities")
    try:
        env = EnvironmentSpec(tuple(env_doc["rewards"]), name=str(env_doc.get("name", "")))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("env.rewards", "must be a list of numbers") from None

    sdoc = doc["scheme"]
    _check_keys(sdoc, SCHEME_KEYS, "scheme.")
    if "kind" not in sdoc:
        raise ConfigError("scheme.kind", "missing")
    kwargs = {"kind": sdoc["kind"]}
    for key, field_name in (("a", "a"), ("b", "b"), ("lambda", "lam")):
        if key in sdoc:
            kwargs[field_name] = _number(sdoc, key, "scheme.")
    if "init_pulls" in sdoc:
        kwargs["init_pulls"] = _number(sdoc, "init_pulls", "scheme.", integer=True)
    for key in ("model_grid", "gains"):
        if key in sdoc:
            if not isinstance(sdoc[key], list) or not all(
                    isinstance(x, (int, float)) and not isinstance(x, bool) for x in sdoc[key]):
                raise ConfigError("scheme." + key, "must be a list of numbers")
            kwargs[key] = tuple(sdoc[key])
    try:
        scheme = SchemeConfig(**kwargs)
    except ConfigError as exc:
        raise ConfigError("scheme." + exc.key, exc.message) from None

    cdoc = doc.get("criterion", {})
    _check_keys(cdoc, CRITERION_KEYS, "criterion.")
    ckw = {}
    if "threshold" in cdoc:
        ckw["threshold"] = _number(cdoc, "threshold", "criterion.")
    if "target" in cdoc:
        ckw["target"] = cdoc["target"]
    try:
        criterion = ConvergenceCriterion(**ckw)
    except ConfigError as exc:
        raise ConfigError("criterion." + exc.key.split(".")[-1], exc.message) from None

    kw = {}
    for key in ("steps", "runs", "master_seed", "record_stride"):
        if key in doc:
            kw[key] = _number(doc, key, "", integer=True)
    if "stop_at_convergence" in doc:
        if not isinstance(doc["stop_at_convergence"], bool):
            raise ConfigError("stop_at_convergence", "must be true or false")
        kw["stop_at_convergence"] = doc["stop_at_convergence"]
    return ExperimentConfig(env=env, scheme=scheme, criterion=criterion, **kw), preset


def load_config(path: str) -> tuple[ExperimentConfig, str | None, dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IOFailure(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"not valid JSON: {exc}") from None
    config, preset = config_from_dict(doc)
    return config, preset, doc


def apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.runs is not None:
        changes["runs"] = args.runs
    if args.steps is not None:
        changes["steps"] = args.steps
    if args.stride is not None:
        changes["record_stride"] = args.stride
    scheme_changes = {}
    for name in ("a", "b", "lam"):
        v = getattr(args, name, None)
        if v is not None:
            scheme_changes[name] = v
    if scheme_changes:
        try:
            changes["scheme"] = replace(config.scheme, **scheme_changes)
        except ConfigError as exc:
            raise ConfigError("scheme." + exc.key, exc.message) from None
    if getattr(args, "threshold", None) is not None:
        changes["criterion"] = replace(config.criterion, threshold=args.threshold)
    return replace(config, **changes) if changes else config


def with_parameter(config: ExperimentConfig, param: str, value: float) -> ExperimentConfig:
    if param == "threshold":
        return replace(config, criterion=replace(config.criterion, threshold=value))
    field_name = "lam" if param == "lambda" else param
    try:
        return replace(config, scheme=replace(config.scheme, **{field_name: value}))
    except ConfigError as exc:
        raise ConfigError("scheme." + exc.key, exc.message) from None


# -- output -----------------------------------------------------------------

def atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def traces_csv(traces, env: EnvironmentSpec) -> str:
    opt = env.opt_index
    d = env.d
    lines = [",".join(TRACE_COLUMNS)]
    for t in traces:
        m = t.p @ d
        k = t.run_index
        lines.extend(f"{k},{n},{i},{b},{fmt(po)},{fmt(mm)}"
                     for n, i, b, po, mm in zip(t.step.tolist(), t.action.tolist(), t.response.tolist(),
                                                t.p[:, opt].tolist(), m.tolist()))
    return "\n".join(lines) + "\n"


def summary_document(summary, config: ExperimentConfig, preset: str | None) -> dict:
    return {
        "schema_version": SUMMARY_SCHEMA,
        "trace_schema_version": TRACE_SCHEMA,
        "preset": preset,
        "scheme": config.scheme.kind,
        "environment": config.env.name,
        "summary": summary.to_dict(),
    }


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return fmt(v)
    return str(v)


def _csv(header, rows) -> str:
    out = [",".join(header)]
    out.extend(",".join(_csv_cell(v) for v in row) for row in rows)
    return "\n".join(out) + "\n"


def _show(v) -> str:
    if v is None:
        return "-"
    return f"{v:.4g}" if isinstance(v, float) else str(v)


# -- commands ---------------------------------------------------------------

def _resolve(args) -> tuple[ExperimentConfig, str | None]:
    """Effective config: file or preset, then command-line overrides. Also settles ``args.out``."""
    if args.config and args.preset:
        raise ConfigError("preset", "give either --config or --preset, not both")
    out = None
    if args.config:
        config, preset, doc = load_config(args.config)
        out = doc.get("out")
    elif args.preset:
        registry = benchmark_registry()
        if args.preset not in registry:
            raise ConfigError("preset", f"unknown preset {args.preset!r}; valid presets: {', '.join(sorted(registry))}")
        config, preset = registry[args.preset], args.preset
    else:
        raise ConfigError("config", "need --config or --preset")
    if args.out is None:
        if out is not None and not isinstance(out, str):
            raise ConfigError("out", "must be a path string")
        args.out = out or DEFAULT_OUT
    return apply_overrides(config, args), preset


def cmd_run(args) -> int:
    config, preset = _resolve(args)
    summary, traces = run_experiment(config, workers=args.workers)
    out = args.out
    atomic_write(os.path.join(out, "traces.csv"), traces_csv(traces, config.env))
    atomic_write(os.path.join(out, "summary.json"), dumps(summary_document(summary, config, preset)))
    atomic_write(os.path.join(out, "resolved_config.json"), dumps(config_to_dict(config, preset, out)))
    print(f"{preset or 'config'}: runs={summary.runs} median_step={_show(summary.median_step)} "
          f"converged={summary.converged_fraction:.3f} wrong={summary.wrong_action_fraction:.3f} "
          f"epsilon={summary.epsilon:.3g}")
    print(f"wrote {out}/traces.csv, summary.json, resolved_config.json "
          f"({summary.duration_seconds:.2f}s, backend={BACKEND})", file=sys.stderr)
    return 0


SWEEP_COLUMNS = ("parameter", "value", "median_step", "wrong_action_fraction", "converged_fraction",
                 "mean_final_expected_reward", "epsilon")


def cmd_sweep(args) -> int:
    if args.param not in SWEEP_PARAMS:
        raise ConfigError("param", f"must be one of {SWEEP_PARAMS}, got {args.param!r}")
    if not args.values:
        raise ConfigError("values", "need at least one value")
    config, preset = _resolve(args)
    rows = []
    for v in args.values:
        cfg = with_parameter(config, args.param, v)
        summary, _ = run_experiment(cfg, workers=args.workers, keep_traces=False)
        rows.append((args.param, float(v), summary.median_step, summary.wrong_action_fraction,
                     summary.converged_fraction, summary.mean_final_expected_reward, summary.epsilon))
        print(f"{args.param}={v}: median_step={_show(summary.median_step)} "
              f"wrong={summary.wrong_action_fraction:.4f} epsilon={summary.epsilon:.3g}")
    atomic_write(os.path.join(args.out, "sweep.csv"), _csv(SWEEP_COLUMNS, rows))
    atomic_write(os.path.join(args.out, "resolved_config.json"), dumps(config_to_dict(config, preset, args.out)))
    return 0


COMPARE_COLUMNS = ("rank", "preset", "scheme", "median_step", "p10_step", "p90_step",
                   "converged_fraction", "wrong_action_fraction", "epsilon")


def cmd_compare(args) -> int:
    if not args.presets:
        raise ConfigError("presets", "need at least one preset name")
    registry = benchmark_registry()
    unknown = [n for n in args.presets if n not in registry]
    if unknown:
        raise ConfigError("presets", f"unknown preset(s) {', '.join(unknown)}; valid presets: {', '.join(sorted(registry))}")
    results = []
    for name in args.presets:
        config = registry[name]
        changes = {}
        if args.seed is not None:
            changes["master_seed"] = args.seed
        if args.runs is not None:
            changes["runs"] = args.runs
        if args.steps is not None:
            changes["steps"] = args.steps
        config = replace(config, **changes)
        summary, _ = run_experiment(config, workers=args.workers, keep_traces=False)
        results.append((name, config, summary))
    order = sorted(range(len(results)),
                   key=lambda k: (results[k][2].median_step is None, results[k][2].median_step or 0.0))
    rows = []
    for rank, k in enumerate(order, 1):
        name, config, s = results[k]
        rows.append((rank, name, config.scheme.kind, s.median_step, s.p10_step, s.p90_step,
                     s.converged_fraction, s.wrong_action_fraction, s.epsilon))
    widths = [max(len(str(c)), *(len(_show(r[j])) for r in rows)) for j, c in enumerate(COMPARE_COLUMNS)]
    print("  ".join(c.ljust(w) for c, w in zip(COMPARE_COLUMNS, widths)))
    for r in rows:
        print("  ".join(_show(v).ljust(w) for v, w in zip(r, widths)))
    atomic_write(os.path.join(args.out, "compare.csv"), _csv(COMPARE_COLUMNS, rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lamm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, experiment=True):
        p.add_argument("--seed", type=int, help="master seed (64-bit unsigned)")
        p.add_argument("--runs", type=int, help="number of replications")
        p.add_argument("--steps", type=int, help="steps per run")
        p.add_argument("--workers", type=int, default=1, help="worker threads")
        p.add_argument("--out", default=None if experiment else DEFAULT_OUT,
                       help=f"output directory (default: config 'out' or {DEFAULT_OUT})")
        if experiment:
            p.add_argument("--config", help="JSON experiment config")
            p.add_argument("--preset", help="named benchmark preset")
            p.add_argument("--stride", type=int, help="trace recording interval")
            p.add_argument("--a", type=float, help="reward step size")
            p.add_argument("--b", type=float, help="penalty step size")
            p.add_argument("--lambda", dest="lam", type=float, help="pursuit step size")
            p.add_argument("--threshold", type=float, help="convergence threshold")

    p_run = sub.add_parser("run", help="run one experiment, write traces.csv and summary.json")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="rerun an experiment over values of one parameter")
    common(p_sweep)
    p_sweep.add_argument("--param", required=True, help=f"one of {', '.join(SWEEP_PARAMS)}")
    p_sweep.add_argument("--values", type=float, nargs="*", default=[], help="values to try")
    p_sweep.set_defaults(func=cmd_sweep)

    p_cmp = sub.add_parser("compare", help="rank presets by median convergence step")
    common(p_cmp, experiment=False)
    p_cmp.add_argument("presets", nargs="*", help="preset names")
    p_cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 1
    except IOFailure as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
