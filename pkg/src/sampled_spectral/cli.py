"""Experiment harness.

Subcommands::

    run        one run of one method: trace CSV + summary JSON
    compare    R seeded runs per method, mean costs normalized by N
    tau-sweep  trimmed-mean SP over a grid of growth factors
    curves     training error vs iterations / scalar products
    valstop    runs stopped by the validation-loss rule

Settings come from built-in defaults, then an optional INI file
(``--config``, section ``[experiment]``, keys spelled like the long flags
with dashes or underscores), then command-line flags.

Exit codes: 0 success, 1 usage or I/O error, 2 line-search failure at full sample.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataset as ds_mod
from . import diagnostics
from .linesearch import LineSearchParams
from .objective import LogisticObjective
from .sampling import SampleSchedule
from .solver import RECORD_FIELDS, GradNorm, Method, RunResult, Status, ValidationStall, run, run_full

log = logging.getLogger("sampled_spectral")

TRACE_SCHEMA = "# sampled-spectral trace v1"
COMPARE_SCHEMA = "# sampled-spectral compare v1"
SWEEP_SCHEMA = "# sampled-spectral tau-sweep v1"
CURVES_SCHEMA = "# sampled-spectral curves v1"
VALSTOP_SCHEMA = "# sampled-spectral valstop v1"

TRACE_COLUMNS = ["k", "N_k", "sigma", "alpha", "trials", "grad_norm_sampled", "f_sampled", "zeta", "sp", "fe", "ge1", "ge2"]
DIAGNOSTIC_COLUMNS = ["f_full", "grad_norm_full", "nu", "eta", "val_loss"]
COMPARE_COLUMNS = ["METHOD", "IT", "SP", "FE", "GE_1", "GE_2", "SP_std", "runs", "converged", "failed"]

DEFAULT_TAU_GRID = tuple(
    [round(1.1 + 0.1 * i, 10) for i in range(9)] + [round(2.0 + 0.25 * i, 10) for i in range(11)] + [5.0]
)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    dataset: str | None = None
    format: str = "synthetic"
    synthetic_n: int = 20
    synthetic_count: int = 2000
    noise: float = 0.1
    condition: float = 1.0
    data_seed: int = 0
    train_fraction: float = 0.95
    split_seed: int = 0
    lam: float | None = None
    methods: list[str] = field(default_factory=lambda: ["SG_N_1"])
    n0: int = 3
    tau: float = 1.1
    taus: tuple[float, ...] = DEFAULT_TAU_GRID
    eps: float = 1e-4
    p: float = 0.1
    max_iter: int = 10000
    c1: float = 1e-4
    c2: float = 0.9
    beta: float = 0.5
    jmax: int = 15
    sigma_min: float = 1e-8
    sigma_max: float = 1e8
    runs: int = 1
    trim: int = 0
    seed: int = 0
    out: str = "out"
    diagnostics: bool = False

    def validate(self):
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.trim < 0 or (self.trim and 2 * self.trim >= self.runs):
            raise ConfigError("need 2*trim < runs")
        if self.format not in ("libsvm", "csv", "synthetic"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.format != "synthetic" and not self.dataset:
            raise ConfigError("--dataset is required unless --format synthetic")
        for m in self.methods:
            try:
                Method(m)
            except ValueError:
                raise ConfigError(f"unknown method {m!r}") from None
        if not self.taus:
            raise ConfigError("empty tau grid")
        return self

    def line_search(self) -> LineSearchParams:
        return LineSearchParams(c1=self.c1, c2=self.c2, beta=self.beta, max_backtracks=self.jmax)


def run_seed(base_seed: int, i: int) -> int:
    """Per-repetition seed: ``base_seed`` XOR a splitmix64 hash of ``i``."""
    z = (i + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    z ^= z >> 31
    return (base_seed ^ z) & 0xFFFFFFFFFFFFFFFF


def build_objective(cfg: ExperimentConfig) -> LogisticObjective:
    if cfg.format == "synthetic":
        data = ds_mod.synthesize(cfg.synthetic_n, cfg.synthetic_count, cfg.data_seed, cfg.noise, cfg.condition)
    else:
        data = ds_mod.load(cfg.dataset, cfg.format)
    part = ds_mod.split(data, cfg.train_fraction, cfg.split_seed)
    return LogisticObjective.from_split(data, part, cfg.lam)


def _solve(cfg, objective, method, seed, stop=None, tau=None, diagnostics_on=None) -> RunResult:
    method = Method(method)
    stop = stop or GradNorm(cfg.eps)
    schedule = None if method is Method.SGFull else SampleSchedule(cfg.n0, tau or cfg.tau, objective.N)
    return run(
        method,
        objective,
        schedule,
        cfg.line_search(),
        stop,
        seed=None if method is Method.SGFull else seed,
        max_iter=cfg.max_iter,
        sigma_min=cfg.sigma_min,
        sigma_max=cfg.sigma_max,
        diagnostics=cfg.diagnostics if diagnostics_on is None else diagnostics_on,
    )


def _fmt(value) -> str:
    if isinstance(value, bool) or value is None:
        return "" if value is None else str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, schema: str, columns, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(schema + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_csv(path) -> list[dict]:
    with open(path) as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def _write_json(path: Path, payload):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def trace_rows(result: RunResult, with_diagnostics: bool):
    cols = TRACE_COLUMNS + (DIAGNOSTIC_COLUMNS if with_diagnostics else [])
    rows = []
    for rec in result.trace:
        d = rec.as_dict()
        d["grad_norm_sampled"] = d["grad_norm"]
        rows.append([d[c] for c in cols])
    return cols, rows


def summary(result: RunResult, objective) -> dict:
    last = result.trace[-1]
    return {
        "method": result.method.value,
        "seed": result.seed,
        "status": result.status.value,
        "iterations": result.iterations,
        "final_N_k": last.N_k,
        "N": objective.N,
        "final_grad_norm_sampled": last.grad_norm,
        "final_f_sampled": last.f_sampled,
        "counters": result.counters.snapshot(),
        "normalized": result.counters.normalized(),
    }


def cmd_run(cfg: ExperimentConfig) -> int:
    objective = build_objective(cfg)
    method = cfg.methods[0]
    result = _solve(cfg, objective, method, cfg.seed)
    out = Path(cfg.out)
    cols, rows = trace_rows(result, cfg.diagnostics)
    _write_csv(out / "trace.csv", TRACE_SCHEMA, cols, rows)
    payload = summary(result, objective)
    if cfg.diagnostics:
        payload["diagnostics"] = diagnostics.report(objective, cfg.line_search(), result.trace)
    _write_json(out / "summary.json", payload)
    log.info("%s: %s after %d iterations", method, result.status.value, result.iterations)
    return 2 if result.status is Status.LINE_SEARCH_FAILURE else 0


def _repeat(cfg, objective, method, stop=None, tau=None, runs=None, diagnostics_on=None):
    """Seeded repetitions; SGFull is deterministic so it runs once and is replicated."""
    runs = runs or cfg.runs
    method = Method(method)
    results, failed = [], []
    for i in range(1 if method is Method.SGFull else runs):
        seed = run_seed(cfg.seed, i)
        try:
            results.append(_solve(cfg, objective, method, seed, stop, tau, diagnostics_on))
        except Exception as exc:  # noqa: BLE001 - recorded, not fatal
            warnings.warn(f"{method.value} run {i} (seed {seed}) failed: {exc}")
            failed.append({"run": i, "seed": seed, "error": repr(exc)})
    if method is Method.SGFull and results:
        results = results * runs
    return results, failed


def aggregate(results, N) -> dict:
    if not results:
        return {c: math.nan for c in ("IT", "SP", "FE", "GE_1", "GE_2", "SP_std")}
    sp = np.array([r.counters.sp for r in results]) / N
    return {
        "IT": float(np.mean([r.iterations for r in results])),
        "SP": float(sp.mean()),
        "FE": float(np.mean([r.counters.fe for r in results]) / N),
        "GE_1": float(np.mean([r.counters.ge1 for r in results]) / N),
        "GE_2": float(np.mean([r.counters.ge2 for r in results]) / N),
        "SP_std": float(sp.std(ddof=1)) if sp.size > 1 else 0.0,
    }


def compare(cfg: ExperimentConfig, objective=None) -> list[dict]:
    objective = objective or build_objective(cfg)
    table = []
    for method in cfg.methods:
        results, failed = _repeat(cfg, objective, method)
        row = {"METHOD": method, **aggregate(results, objective.N)}
        row["runs"] = cfg.runs
        row["converged"] = sum(r.status is Status.CONVERGED for r in results)
        row["failed"] = len(failed)
        table.append(row)
    return table


def cmd_compare(cfg: ExperimentConfig) -> int:
    objective = build_objective(cfg)
    table = compare(cfg, objective)
    out = Path(cfg.out)
    _write_csv(out / "compare.csv", COMPARE_SCHEMA, COMPARE_COLUMNS, [[row[c] for c in COMPARE_COLUMNS] for row in table])
    _write_json(out / "compare.json", {"N": objective.N, "base_seed": cfg.seed, "rows": table})
    return 0


def trimmed_mean(values, trim: int) -> float:
    values = np.sort(np.asarray(values, dtype=float))
    if trim and 2 * trim >= values.size:
        raise ValueError("trimming removes every value")
    return float(values[trim : values.size - trim].mean())


def tau_sweep(cfg: ExperimentConfig, objective=None) -> list[dict]:
    objective = objective or build_objective(cfg)
    rows = []
    for method in cfg.methods:
        for tau in cfg.taus:
            results, _ = _repeat(cfg, objective, method, tau=tau)
            sp = [r.counters.sp / objective.N for r in results]
            rows.append(
                {
                    "method": method,
                    "tau": tau,
                    "trimmed_mean_SP": trimmed_mean(sp, cfg.trim),
                    "min_SP": min(sp),
                    "max_SP": max(sp),
                    "spread": max(sp) - min(sp),
                    "runs": len(sp),
                }
            )
    return rows


def cmd_tau_sweep(cfg: ExperimentConfig) -> int:
    rows = tau_sweep(cfg)
    cols = ["method", "tau", "trimmed_mean_SP", "min_SP", "max_SP", "spread", "runs"]
    _write_csv(Path(cfg.out) / "tau_sweep.csv", SWEEP_SCHEMA, cols, [[r[c] for c in cols] for r in rows])
    return 0


def reference_optimum(cfg: ExperimentConfig, objective) -> float:
    """``f*`` from the full-sample method driven to ``||grad f|| <= 1e-7``."""
    ref = run_full(objective, cfg.line_search(), GradNorm(1e-7), max_iter=max(cfg.max_iter, 100000))
    if ref.status is not Status.CONVERGED:
        raise RuntimeError(f"reference SGFull run ended with {ref.status.value}")
    return objective.value(ref.x)


def representative(results) -> int:
    """Index of the run with median final SP (lower median)."""
    order = sorted(range(len(results)), key=lambda i: (results[i].counters.sp, i))
    return order[(len(order) - 1) // 2]


def curves(cfg: ExperimentConfig, objective=None):
    objective = objective or build_objective(cfg)
    fstar = reference_optimum(cfg, objective)
    rows = []
    for method in cfg.methods:
        results, _ = _repeat(cfg, objective, method, runs=1 if method == "SGFull" else cfg.runs, diagnostics_on=True)
        rep = representative(results)
        for i, res in enumerate(results):
            spent = 0
            for rec in res.trace:
                # cost paid to reach x_k, so the curve starts at (0, f(x_0) - f*)
                rows.append(
                    {
                        "method": method,
                        "run": i,
                        "seed": res.seed,
                        "representative": i == rep,
                        "k": rec.k,
                        "N_k": rec.N_k,
                        "sp_over_N": spent / objective.N,
                        "train_error": rec.f_full - fstar,
                    }
                )
                spent = rec.sp
    return fstar, rows


CURVE_COLUMNS = ["method", "run", "seed", "representative", "k", "N_k", "sp_over_N", "train_error"]


def cmd_curves(cfg: ExperimentConfig) -> int:
    fstar, rows = curves(cfg)
    out = Path(cfg.out)
    _write_csv(out / "curves.csv", CURVES_SCHEMA, CURVE_COLUMNS, [[r[c] for c in CURVE_COLUMNS] for r in rows])
    _write_json(out / "curves.json", {"f_star": fstar, "representative": "median final SP"})
    return 0


def valstop(cfg: ExperimentConfig, objective=None):
    objective = objective or build_objective(cfg)
    methods = [m for m in cfg.methods if m != "SGFull"] + ["SGFull"]
    summaries, rows = [], []
    for method in methods:
        stop = GradNorm(1e-4) if method == "SGFull" else ValidationStall(cfg.p)
        results, _ = _repeat(cfg, objective, method, stop=stop, runs=1 if method == "SGFull" else cfg.runs, diagnostics_on=False)
        if method == "SGFull":
            # validation losses are not tracked under a gradient-norm stop
            results = [_with_validation(cfg, objective, stop)]
        rep = representative(results)
        for i, res in enumerate(results):
            spent = 0
            for rec in res.trace:
                rows.append([method, i, res.seed, int(i == rep), rec.k, rec.N_k, spent / objective.N, rec.val_loss])
                spent = rec.sp
        summaries.append(
            {
                "method": method,
                "stop": "GradNorm(1e-4)" if method == "SGFull" else f"ValidationStall(p={cfg.p})",
                "runs": len(results),
                "mean_iterations": float(np.mean([r.iterations for r in results])),
                "mean_terminal_N_k": float(np.mean([r.final_sample_size for r in results])),
                "mean_terminal_val_loss": float(np.mean([r.trace[-1].val_loss for r in results])),
                "statuses": sorted({r.status.value for r in results}),
            }
        )
    return summaries, rows


def _with_validation(cfg, objective, stop):
    from .solver import SpectralSolver

    solver = SpectralSolver(Method.SGFull, objective, None, cfg.line_search(), stop, None, max_iter=cfg.max_iter,
                            sigma_min=cfg.sigma_min, sigma_max=cfg.sigma_max)
    solver.track_validation = True
    return solver.run()


def cmd_valstop(cfg: ExperimentConfig) -> int:
    objective = build_objective(cfg)
    summaries, rows = valstop(cfg, objective)
    out = Path(cfg.out)
    cols = ["method", "run", "seed", "representative", "k", "N_k", "sp_over_N", "val_loss"]
    _write_csv(out / "valstop_curves.csv", VALSTOP_SCHEMA, cols, rows)
    _write_json(out / "valstop.json", {"N": objective.N, "p": cfg.p, "methods": summaries})
    return 0


COMMANDS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "tau-sweep": cmd_tau_sweep,
    "curves": cmd_curves,
    "valstop": cmd_valstop,
}

_DEFAULT_METHODS = {
    "run": ["SG_N_1"],
    "compare": [m.value for m in Method],
    "tau-sweep": ["SG_N_1", "SG_I_1", "SGFull"],
    "curves": ["SGFull", "SG_N_1", "SG_I_1"],
    "valstop": ["SG_N_1", "SG_I_1"],
}


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


_CONVERTERS = {
    "methods": _str_list,
    "method": _str_list,
    "taus": _float_list,
    "diagnostics": lambda v: str(v).strip().lower() in ("1", "true", "yes", "on"),
}


def _coerce(key: str, text: str):
    if key in _CONVERTERS:
        return _CONVERTERS[key](text)
    default = getattr(ExperimentConfig, key, None)
    if key == "lam":
        return None if text.strip().lower() in ("", "none") else float(text)
    if isinstance(default, bool):
        return _CONVERTERS["diagnostics"](text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def load_config_file(path) -> dict:
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    section = parser["experiment"] if parser.has_section("experiment") else parser[parser.default_section]
    known = set(ExperimentConfig.__dataclass_fields__) | {"method"}
    values = {}
    for raw_key, text in section.items():
        key = raw_key.replace("-", "_")
        if key not in known:
            raise ConfigError(f"unknown config key {raw_key!r}")
        values["methods" if key == "method" else key] = _coerce(key, text)
    return values


class _Parser(argparse.ArgumentParser):
    # exit status 2 is reserved for line-search failure
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sampled-spectral", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI file with an [experiment] section")
        p.add_argument("--dataset")
        p.add_argument("--format", choices=["libsvm", "csv", "synthetic"])
        p.add_argument("--synthetic-n", type=int)
        p.add_argument("--synthetic-count", type=int)
        p.add_argument("--noise", type=float)
        p.add_argument("--condition", type=float)
        p.add_argument("--data-seed", type=int)
        p.add_argument("--split-seed", type=int)
        p.add_argument("--train-fraction", type=float)
        p.add_argument("--lam", type=float)
        p.add_argument("--method", dest="methods", type=_str_list, help="comma-separated method names")
        p.add_argument("--n0", type=int)
        p.add_argument("--tau", type=float)
        p.add_argument("--taus", type=_float_list, help="comma-separated tau grid (tau-sweep)")
        p.add_argument("--eps", type=float)
        p.add_argument("--p", type=float)
        p.add_argument("--max-iter", type=int)
        p.add_argument("--c1", type=float)
        p.add_argument("--c2", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--jmax", type=int)
        p.add_argument("--sigma-min", type=float)
        p.add_argument("--sigma-max", type=float)
        p.add_argument("--runs", type=int)
        p.add_argument("--trim", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--diagnostics", action="store_true", default=None)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = {"methods": list(_DEFAULT_METHODS[args.command])}
    if args.command == "tau-sweep":
        values.update(runs=100, trim=20)
    if args.command == "compare":
        values.update(runs=100)
    if args.config:
        values.update(load_config_file(args.config))
    for key in ExperimentConfig.__dataclass_fields__:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if values.get("dataset") and "format" not in values:
        values["format"] = "csv" if str(values["dataset"]).lower().endswith(".csv") else "libsvm"
    return ExperimentConfig(**values).validate()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_from_args(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, ds_mod.DatasetError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
