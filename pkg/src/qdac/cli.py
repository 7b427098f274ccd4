"""Command line front end: ``qdac gen-data | run | report-diff``.

Exit codes: 0 success, 1 regression beyond threshold, 2 usage error,
3 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, report
from .classical import DaClassifier, classical_predict, source_only_predict
from .data import DEFAULT_NOISE_STD, DEFAULT_SHIFT_SCALE, generate_synthetic_domains, read_csv, read_labels, write_csv, write_labels

log = logging.getLogger("qdac")

EXIT_OK, EXIT_REGRESSION, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3
PIPELINES = ("classical", "qblas", "vqdac", "all")


class UsageError(ValueError):
    pass


def _floats(text) -> tuple[float, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _optional_int(text):
    if text is None or str(text).lower() in ("", "none"):
        return None
    return int(text)


def _optional_float(text):
    if text is None or str(text).lower() in ("", "none"):
        return None
    return float(text)


def _optional_str(text):
    if text is None or str(text) == "":
        return None
    return str(text)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Every effective parameter of a ``run``; echoed verbatim into the report."""

    pipeline: str = "all"
    # dataset: explicit files, a directory written by gen-data, or the generator
    source: str | None = None
    target: str | None = None
    truth: str | None = None
    data_dir: str | None = None
    dim: int = 2
    n_source: int = 40
    n_target: int = 40
    gap: float = 4.0
    angle: float = float(np.pi / 6)
    scale: tuple[float, ...] = DEFAULT_SHIFT_SCALE
    noise_std: tuple[float, ...] = DEFAULT_NOISE_STD
    data_seed: int = 42
    # phase estimation
    clock_bits: int = 8
    evolution_time: float | None = None
    gamma: float | None = None
    postselect_tolerance: float = 1e-9
    cutoff: float = 1e-6
    # variational
    layers: int = 4
    method: str = "gradient_descent"
    learning_rate: float = 0.1
    max_iters: int = 2000
    restarts: int = 5
    convergence_tol: float = 1e-8
    vqdac_cutoff: float = 1e-3
    shared_solution: bool = False
    # readout
    readout: str = "hadamard"
    shots: int | None = None
    seed: int = 0
    output: str = "report.json"

    def validate(self) -> None:
        if self.pipeline not in PIPELINES:
            raise UsageError(f"pipeline must be one of {PIPELINES}")
        if self.readout not in ("hadamard", "two_swap"):
            raise UsageError("readout must be 'hadamard' or 'two_swap'")
        if self.method not in ("gradient_descent", "spsa"):
            raise UsageError("method must be 'gradient_descent' or 'spsa'")
        if (self.source is None) != (self.target is None):
            raise UsageError("--source and --target go together")
        if self.source is not None and self.data_dir is not None:
            raise UsageError("give either --source/--target or --data-dir, not both")
        for name in ("dim", "n_source", "n_target", "clock_bits", "layers", "max_iters", "restarts"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be >= 1")
        if self.dim < 2:
            raise UsageError("dim must be >= 2")
        if self.n_source < 2 or self.n_target < 2:
            raise UsageError("n_source and n_target must be >= 2")
        if self.shots is not None and self.shots < 1:
            raise UsageError("shots must be >= 1")
        if self.learning_rate <= 0:
            raise UsageError("learning_rate must be positive")

    def echo(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(self).items()}


_CONVERTERS = {
    "source": _optional_str,
    "target": _optional_str,
    "truth": _optional_str,
    "data_dir": _optional_str,
    "scale": _floats,
    "noise_std": _floats,
    "evolution_time": _optional_float,
    "gamma": _optional_float,
    "shots": _optional_int,
    "shared_solution": _bool,
}


def _convert(name: str, value):
    conv = _CONVERTERS.get(name)
    if conv is not None:
        return conv(value)
    default = next(f.default for f in fields(ExperimentConfig) if f.name == name)
    return type(default)(value)


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment, dashes in keys are allowed."""
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def build_config(file_values: dict, cli_values: dict) -> ExperimentConfig:
    """Defaults, overridden by the config file, overridden by explicit flags."""
    merged = {}
    for source in (file_values, cli_values):
        for key, value in source.items():
            if value is None:
                continue
            try:
                merged[key] = _convert(key, value)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"bad value for {key}: {exc}") from None
    cfg = ExperimentConfig(**merged)
    cfg.validate()
    return cfg


# --------------------------------------------------------------------------
# commands


def cmd_gen_data(args) -> int:
    if args.n_source < 2 or args.n_target < 2:
        raise UsageError("n_source and n_target must be >= 2")
    if args.dim < 2:
        raise UsageError("dim must be >= 2")
    source, target, truth = generate_synthetic_domains(
        args.dim,
        args.n_source,
        args.n_target,
        args.gap,
        args.angle,
        shift_scale=_floats(args.scale),
        seed=args.seed,
        noise_std=_floats(args.noise_std),
    )
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "source.csv", source)
        write_csv(out / "target.csv", target)
        write_labels(out / "target_truth.csv", truth)
    except OSError as exc:
        raise RuntimeError(f"cannot write to {out}: {exc}") from exc
    log.info("wrote %s/{source,target,target_truth}.csv", out)
    return EXIT_OK


def load_data(cfg: ExperimentConfig):
    if cfg.source is not None:
        source, target = read_csv(cfg.source, "source"), read_csv(cfg.target, "target")
        truth = read_labels(cfg.truth) if cfg.truth else None
        origin = {"source": cfg.source, "target": cfg.target}
    elif cfg.data_dir is not None:
        d = Path(cfg.data_dir)
        source, target = read_csv(d / "source.csv", "source"), read_csv(d / "target.csv", "target")
        truth_path = Path(cfg.truth) if cfg.truth else d / "target_truth.csv"
        truth = read_labels(truth_path) if truth_path.exists() else None
        origin = {"data_dir": cfg.data_dir}
    else:
        source, target, truth = generate_synthetic_domains(
            cfg.dim, cfg.n_source, cfg.n_target, cfg.gap, cfg.angle,
            shift_scale=cfg.scale, seed=cfg.data_seed, noise_std=cfg.noise_std,
        )
        origin = {"generated": True}
    if truth is not None and truth.size != target.n:
        raise ValueError(f"truth file has {truth.size} labels for {target.n} target samples")
    return source, target, truth, origin


def _accuracy(labels, truth):
    if truth is None:
        return None
    return float(np.mean(np.asarray(labels) == truth))


def run_experiment(cfg: ExperimentConfig, timestamp: str | None = None) -> dict:
    """Execute the configured pipelines and return the report dictionary."""
    from .qblas import PhaseConfig, qblas_classify
    from .variational import OptimizerConfig, vqdac_classify

    source, target, truth, origin = load_data(cfg)
    if source.dim != target.dim:
        raise ValueError(f"source has D={source.dim}, target has D={target.dim}")
    selected = ("classical", "qblas", "vqdac") if cfg.pipeline == "all" else (cfg.pipeline,)
    pipelines = {}

    clf = DaClassifier.fit(source, target, cutoff=cfg.cutoff)
    scores, labels = classical_predict(clf, target.features)
    if "classical" in selected:
        _, base = source_only_predict(clf, target.features)
        rows = [{"index": j, "oracle_score": float(scores[j]), "oracle_label": int(labels[j])} for j in range(target.n)]
        if truth is not None:
            for r in rows:
                r["truth_label"] = int(truth[r["index"]])
        pipelines["classical"] = {
            "per_sample": rows,
            "aggregates": {
                "accuracy": _accuracy(labels, truth),
                "source_only_accuracy": _accuracy(base, truth),
                "effective_rank_source": clf.whitener_source.effective_rank,
                "effective_rank_target": clf.whitener_target.effective_rank,
            },
        }
    if "qblas" in selected:
        log.info("running phase-estimation pipeline")
        phase = PhaseConfig(
            clock_bits=cfg.clock_bits,
            evolution_time=cfg.evolution_time,
            gamma=cfg.gamma,
            postselect_tolerance=cfg.postselect_tolerance,
            cutoff=cfg.cutoff,
        )
        qlabels, rep = qblas_classify(source, target, phase, readout=cfg.readout, shots=cfg.shots, seed=cfg.seed)
        rep.aggregates["accuracy"] = _accuracy(qlabels, truth)
        pipelines["qblas"] = rep.to_dict()
    if "vqdac" in selected:
        log.info("running variational pipeline")
        opt = OptimizerConfig(
            method=cfg.method,
            learning_rate=cfg.learning_rate,
            max_iters=cfg.max_iters,
            restarts=cfg.restarts,
            seed=cfg.seed,
            convergence_tol=cfg.convergence_tol,
        )
        vlabels, rep = vqdac_classify(
            source, target, layers=cfg.layers, opt=opt, readout=cfg.readout,
            shots=cfg.shots, cutoff=cfg.vqdac_cutoff, shared_solution=cfg.shared_solution,
        )
        rep.aggregates["accuracy"] = _accuracy(vlabels, truth)
        pipelines["vqdac"] = rep.to_dict()

    return {
        "schema": report.SCHEMA_VERSION,
        "provenance": {
            "config": cfg.echo(),
            "seed": cfg.seed,
            "version": __version__,
            "timestamp": timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds"),
        },
        "dataset": {"dim": source.dim, "n_source": source.n, "n_target": target.n, "origin": origin},
        "pipelines": pipelines,
    }


def cmd_run(args) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    cli_values = {k: v for k, v in vars(args).items() if k in {f.name for f in fields(ExperimentConfig)}}
    cfg = build_config(file_values, cli_values)
    rep = run_experiment(cfg)
    out = Path(cfg.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.dumps(rep), encoding="utf-8")
    for name, pipe in rep["pipelines"].items():
        agg = pipe["aggregates"]
        parts = [f"{k}={agg[k]:.4f}" for k in ("agreement_rate", "mean_fidelity", "accuracy", "source_only_accuracy") if isinstance(agg.get(k), float)]
        print(f"{name}\t" + "\t".join(parts))
        for flag in agg.get("flags", []):
            print(f"{name}\tflag={flag}")
    print(f"report\t{out}")
    return EXIT_OK


def cmd_report_diff(args) -> int:
    try:
        a = json.loads(Path(args.a).read_text(encoding="utf-8"))
        b = json.loads(Path(args.b).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise RuntimeError(f"cannot read report: {exc}") from exc
    for key, va, vb in report.diff_reports(a, b):
        delta = vb - va if isinstance(va, (int, float)) and isinstance(vb, (int, float)) else None
        print(f"{key}\t{va}\t{vb}\t{'' if delta is None else f'{delta:+.6g}'}")
    bad = report.agreement_regressions(a, b, args.threshold)
    for name in bad:
        print(f"regression\t{name}.agreement_rate dropped by more than {args.threshold}")
    return EXIT_REGRESSION if bad else EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    # every flag defaults to None so unset flags never shadow the config file
    add = p.add_argument
    add("--config", help="flat key=value file; flags given here take precedence")
    add("--pipeline", choices=PIPELINES)
    add("--source", help="source CSV")
    add("--target", help="target CSV")
    add("--truth", help="hidden target labels (index,label CSV)")
    add("--data-dir", dest="data_dir", help="directory written by gen-data")
    add("--dim", type=int)
    add("--n-source", dest="n_source", type=int)
    add("--n-target", dest="n_target", type=int)
    add("--gap", type=float)
    add("--angle", type=float, help="radians")
    add("--scale", help="comma-separated per-axis target scaling")
    add("--noise-std", dest="noise_std", help="comma-separated within-class std")
    add("--data-seed", dest="data_seed", type=int)
    add("--clock-bits", dest="clock_bits", type=int)
    add("--evolution-time", dest="evolution_time", type=float)
    add("--gamma", type=float)
    add("--postselect-tolerance", dest="postselect_tolerance", type=float)
    add("--cutoff", type=float)
    add("--layers", type=int)
    add("--method", choices=("gradient_descent", "spsa"))
    add("--learning-rate", dest="learning_rate", type=float)
    add("--max-iters", dest="max_iters", type=int)
    add("--restarts", type=int)
    add("--convergence-tol", dest="convergence_tol", type=float)
    add("--vqdac-cutoff", dest="vqdac_cutoff", type=float)
    add("--shared-solution", dest="shared_solution", action="store_const", const=True)
    add("--readout", choices=("hadamard", "two_swap"))
    add("--shots", type=int)
    add("--seed", type=int)
    add("--output", "-o")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdac", description="Quantum domain-adaptation classifiers on an exact simulator.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic source/target pair")
    g.add_argument("--dim", type=int, default=2)
    g.add_argument("--n-source", dest="n_source", type=int, default=40)
    g.add_argument("--n-target", dest="n_target", type=int, default=40)
    g.add_argument("--gap", type=float, default=4.0)
    g.add_argument("--angle", type=float, default=float(np.pi / 6), help="radians")
    g.add_argument("--scale", default=",".join(map(str, DEFAULT_SHIFT_SCALE)))
    g.add_argument("--noise-std", dest="noise_std", default=",".join(map(str, DEFAULT_NOISE_STD)))
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--out", default=".")
    g.set_defaults(func=cmd_gen_data)

    r = sub.add_parser("run", help="run one or all pipelines and write a JSON report")
    _add_run_flags(r)
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("report-diff", help="compare two reports")
    d.add_argument("a")
    d.add_argument("b")
    d.add_argument("--threshold", type=float, default=0.05, help="allowed agreement_rate drop")
    d.set_defaults(func=cmd_report_diff)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"qdac: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except report.SchemaMismatch as exc:
        print(f"qdac: schema mismatch: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"qdac: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
