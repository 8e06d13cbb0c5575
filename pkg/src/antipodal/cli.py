"""Command-line front end: ``antipodal oracle | sample | verify``.

Exit codes: 0 success (including inconclusive or exploratory verdicts),
2 invalid arguments, 3 resource limits, 4 sampler initialisation failure,
5 a hard-fail verdict.  ``ANTIPODAL_THREADS`` sets the default worker count.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .errors import DomainError, ResourceError, SamplerInitError
from .experiments import (
    CSV_COLUMNS,
    Verdict,
    clustering_trend,
    conjecture_probe,
    law_trend,
    lemma_ratio_trend,
    mgf_trend,
    zn_ratio_trend,
)
from .model import ModelParams, arc_half_widths, linear_statistic
from .quadrature import QuadratureSpec, Scaling, exact_I_converged
from .sampler import InitMode, SamplerConfig, run_chain, run_replicas
from .testfunc import parse_test_function

EXIT_OK, EXIT_USAGE, EXIT_RESOURCE, EXIT_INIT, EXIT_FAIL = 0, 2, 3, 4, 5

SAMPLE_COLUMNS = ("sample", "linear_mean", "cos_theta1", "arc_half_width", "log_weight")

SUITE_DEFAULTS = {
    "zn": {"beta": 2.0, "n_list": [2, 3, 4], "method": "quadrature", "samples": 100000,
           "seed": 0, "final_tolerance": None},
    "mgf": {"beta": 2.0, "g": "cos", "t": 1.0, "n_list": [64, 256], "replicas": 400,
            "sweeps_burn_in": 200, "sweeps_sample": 250, "thin": 1, "seed": 0, "tolerance": 0.05},
    "law": {"beta": 2.0, "g": "cos", "n_list": [64, 256], "replicas": 400,
            "sweeps_burn_in": 200, "seed": 0, "tolerance": 0.15},
    "clustering": {"beta": 2.0, "epsilon": 0.1, "n_list": [64, 128, 256], "replicas": 400,
                   "sweeps_burn_in": 200, "sweeps_sample": 10, "thin": 1, "seed": 0,
                   "threshold": 0.99},
    "lemma": {"a": 0.25, "b": -1.0 / 96.0, "c": 0.0, "epsilon": 0.1, "n_list": [50, 100, 200],
              "samples": 1000000, "seed": 0, "tolerance": 0.1},
    "conjecture": {"beta": 2.0, "g": "fourier:0,0.25", "t": 0.5, "n": 256, "replicas": 400,
                   "sweeps_burn_in": 200, "sweeps_sample": 250, "thin": 1, "seed": 0},
}


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    started: str
    finished: str = ""
    outputs: list[str] = field(default_factory=list)
    runtime_s: float = 0.0
    tool_version: str = __version__

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.config).encode()).hexdigest()

    def to_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "command": self.command,
            "config": self.config,
            "config_sha256": self.config_hash,
            "seed": self.seed,
            "started": self.started,
            "finished": self.finished,
            "runtime_s": self.runtime_s,
            "outputs": self.outputs,
        }


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_atomic(path: Path, text: str) -> None:
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if r.get(c) is None else _fmt(r[c]) for c in columns])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "value"):
        return v.value
    return v


def _finish(manifest: RunManifest, out_dir: Path, start: float) -> None:
    manifest.finished = _now()
    manifest.runtime_s = round(time.perf_counter() - start, 3)
    write_atomic(out_dir / "manifest.json", canonical_json(manifest.to_dict()))


# ---------------------------------------------------------------- oracle


def default_points(dims: int) -> int:
    """Largest even grid size with at most 2^24 nodes, capped at 1024."""
    if dims <= 0:
        return 8
    m = int((2**24) ** (1.0 / dims) + 1e-9)
    m -= m % 2
    return max(8, min(1024, m))


def cmd_oracle(args) -> int:
    g = parse_test_function(args.g)
    params = ModelParams(args.n, args.beta)
    rotation_free = args.t == 0 or g.is_constant
    reduce = args.reduce_rotation if args.reduce_rotation is not None else (rotation_free and args.n >= 2)
    dims = args.n - 1 if reduce else args.n
    m = args.points_per_dim or default_points(dims)
    res = exact_I_converged(params, g, args.t, Scaling(args.scaling), QuadratureSpec(m, reduce))
    out = res.to_dict()
    # the extrapolated value is the best estimate; the raw grid value stays in the record
    out["grid_log_value"] = res.log_value
    out["log_value"] = res.extrapolated_log_value
    out["inputs"] = {"n": args.n, "beta": args.beta, "t": args.t, "g": g.describe(), "scaling": args.scaling}
    text = canonical_json(out)
    if args.out:
        write_atomic(Path(args.out), text)
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- sample


def cmd_sample(args) -> int:
    start = time.perf_counter()
    g = parse_test_function(args.g)
    cfg = SamplerConfig(ModelParams(args.n, args.beta), sweeps_burn_in=args.burn_in,
                        sweeps_sample=args.sweeps, thin=args.thin, replicas=args.replicas,
                        init=InitMode(args.init), seed=args.seed, monitor=g)
    resolved = {"n": args.n, "beta": args.beta, "sweeps": args.sweeps, "burn_in": args.burn_in,
                "thin": args.thin, "replicas": args.replicas, "seed": args.seed, "init": args.init,
                "g": g.describe(), "step_scale": cfg.step_scale,
                "adapt_target_acceptance": cfg.adapt_target_acceptance}
    out_dir = Path(args.out_dir)
    manifest = RunManifest("sample", resolved, args.seed, _now())
    if args.initial:
        try:
            initial = [float(v) for v in args.initial.split(",")]
        except ValueError:
            raise UsageError("--initial expects comma-separated angles") from None
        resolved["initial"] = initial
        chains = [run_chain(cfg, r, initial) for r in range(cfg.replicas)]
    else:
        chains = run_replicas(cfg)
    diags = []
    for r, ch in enumerate(chains):
        s = ch.samples
        rows = [
            {"sample": i, "linear_mean": lm, "cos_theta1": c1, "arc_half_width": hw, "log_weight": lw}
            for i, (lm, c1, hw, lw) in enumerate(zip(
                (linear_statistic(s, g) / args.n).tolist(), np.cos(s[:, 0]).tolist(),
                arc_half_widths(s).tolist(), _kernels.log_weight_rows(s, args.beta).tolist()))
        ]
        name = f"replica_{r:04d}.csv"
        write_atomic(out_dir / name, _csv_text(SAMPLE_COLUMNS, rows))
        manifest.outputs.append(name)
        diags.append({"replica": r, **ch.diagnostics.to_dict()})
    rates = [d["acceptance_rate"] for d in diags]
    diag_doc = {"replicas": diags, "mean_acceptance_rate": float(np.mean(rates)),
                "total_effective_sample_size": float(sum(d["effective_sample_size"] for d in diags))}
    write_atomic(out_dir / "diagnostics.json", canonical_json(diag_doc))
    manifest.outputs.append("diagnostics.json")
    _finish(manifest, out_dir, start)
    print(f"wrote {len(chains)} replica files to {out_dir}; mean acceptance {diag_doc['mean_acceptance_rate']:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------- verify


def resolve_suite_config(suite: str, user: dict | None) -> dict:
    base = dict(SUITE_DEFAULTS[suite])
    user = user or {}
    unknown = set(user) - set(base)
    if unknown:
        raise UsageError(f"unknown keys for suite {suite!r}: {sorted(unknown)}")
    base.update(user)
    return base


def _sampler_template(cfg: dict, n: int) -> SamplerConfig:
    return SamplerConfig(ModelParams(n, cfg["beta"]), sweeps_burn_in=cfg["sweeps_burn_in"],
                         sweeps_sample=cfg.get("sweeps_sample", 1), thin=cfg.get("thin", 1),
                         replicas=cfg["replicas"], seed=cfg["seed"])


def run_suite(suite: str, cfg: dict):
    if suite == "zn":
        return zn_ratio_trend(cfg["beta"], cfg["n_list"], cfg["method"], samples=cfg["samples"],
                              seed=cfg["seed"], final_tolerance=cfg["final_tolerance"])
    if suite == "mgf":
        tmpl = _sampler_template(cfg, cfg["n_list"][0])
        return mgf_trend(cfg["beta"], parse_test_function(cfg["g"]), cfg["t"], cfg["n_list"], tmpl,
                         cfg["tolerance"])
    if suite == "law":
        tmpl = _sampler_template(cfg, cfg["n_list"][0])
        return law_trend(cfg["beta"], parse_test_function(cfg["g"]), cfg["n_list"], tmpl, cfg["tolerance"])
    if suite == "clustering":
        tmpl = _sampler_template(cfg, cfg["n_list"][0])
        return clustering_trend(cfg["beta"], cfg["epsilon"], cfg["n_list"], tmpl, cfg["threshold"])
    if suite == "lemma":
        return lemma_ratio_trend(cfg["a"], cfg["b"], cfg["c"], cfg["epsilon"], cfg["n_list"],
                                 cfg["samples"], cfg["seed"], cfg["tolerance"])
    if suite == "conjecture":
        tmpl = _sampler_template(cfg, cfg["n"])
        return conjecture_probe(tmpl.params, parse_test_function(cfg["g"]), cfg["t"], tmpl)
    raise UsageError(f"unknown suite {suite!r}")


def cmd_verify(args) -> int:
    start = time.perf_counter()
    user = None
    if args.config:
        try:
            user = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        if not isinstance(user, dict):
            raise UsageError("config must be a JSON object")
    cfg = resolve_suite_config(args.suite, user)
    out_dir = Path(args.out_dir)
    manifest = RunManifest(f"verify --suite {args.suite}", cfg, cfg.get("seed"), _now())
    report = run_suite(args.suite, cfg)
    json_name, csv_name = f"{args.suite}_report.json", f"{args.suite}.csv"
    write_atomic(out_dir / json_name, canonical_json(report.to_dict(include_runtime=False)))
    write_atomic(out_dir / csv_name, _csv_text(CSV_COLUMNS, report.csv_rows()))
    manifest.outputs += [json_name, csv_name]
    _finish(manifest, out_dir, start)
    print(f"suite {args.suite}: {report.verdict.value}")
    for row in report.csv_rows():
        print("  " + ", ".join(f"{c}={row[c]}" for c in CSV_COLUMNS))
    return EXIT_FAIL if report.verdict is Verdict.FAIL else EXIT_OK


# ---------------------------------------------------------------- entry point


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="antipodal", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    o = sub.add_parser("oracle", help="grid quadrature of the n-fold integral (small n)")
    o.add_argument("--n", type=_positive_int, required=True)
    o.add_argument("--beta", type=float, required=True)
    o.add_argument("--t", type=float, default=0.0)
    o.add_argument("--g", default="0", help="test function, e.g. cos, sin, c:1.5, fourier:a0,a1,b1, holder:q,amp")
    o.add_argument("--scaling", choices=[s.value for s in Scaling], default="n")
    o.add_argument("--points-per-dim", type=int, default=None)
    o.add_argument("--reduce-rotation", action=argparse.BooleanOptionalAction, default=None,
                   help="fix one angle (allowed only when the integrand is rotation invariant)")
    o.add_argument("--out", default=None)
    o.set_defaults(func=cmd_oracle)

    s = sub.add_parser("sample", help="run Metropolis replicas and write per-replica CSVs")
    s.add_argument("--n", type=_positive_int, required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--sweeps", type=_positive_int, default=1000)
    s.add_argument("--burn-in", type=_positive_int, default=200)
    s.add_argument("--replicas", type=_positive_int, default=1)
    s.add_argument("--thin", type=_positive_int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--init", choices=[m.value for m in InitMode], default="cluster")
    s.add_argument("--g", default="cos", help="test function for the linear_mean column")
    s.add_argument("--initial", default=None, help="comma-separated starting angles for every replica")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_sample)

    v = sub.add_parser("verify", help="run an experiment suite and write its report")
    v.add_argument("--suite", choices=sorted(SUITE_DEFAULTS), required=True)
    v.add_argument("--config", default=None, help="JSON object overriding suite defaults")
    v.add_argument("--out-dir", required=True)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except SamplerInitError as exc:
        print(f"sampler initialisation failed: {exc}", file=sys.stderr)
        return EXIT_INIT


if __name__ == "__main__":
    sys.exit(main())
