"""Configuration parsing, multi-seed experiment orchestration, and
metrics persistence.

Config files are flat `key = value` text; `#` starts a comment. Missing
keys fall back to the theory defaults derived from (H, K, B); unknown
keys are errors. The environment variable CMDP_SEED_OFFSET (integer)
shifts every seed, for batch studies.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import oracle
from .core import CmdpInstance, validate_instance
from .environment import (BenchmarkParams, RngStream,
                          build_benchmark_instance, build_tiny_instance)
from .learner import (LearnerConfig, RunResult, run_pd_powers,
                      run_random_baseline)

CSV_COLUMNS = ("k", "v_est_r", "v_est_g", "v_true_r", "v_true_g", "dual_y",
               "regret", "violation", "checks_run", "checks_failed")
INT_COLUMNS = {"k", "checks_run", "checks_failed"}
ALGO_LEARNER = "pdpowers"
ALGO_BASELINE = "random"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    instance: str = "benchmark"
    K: int = 2000
    seeds: Tuple[int, ...] = (1, 2, 3, 4, 5)
    H: int = 10
    d: int = 5
    b: float = 6.0
    block_length: int = 10
    p0: float = 0.95
    slope: float = 0.01
    reward_scale: float = 0.4
    alpha: Optional[float] = None       # None = derive from (H, K, B)
    eta: Optional[float] = None
    theta_mix: Optional[float] = None
    lam: Optional[float] = None
    delta: float = 0.01
    B: Optional[float] = None
    dual: str = "regularized"
    gamma: float = 0.0
    diagnostics: bool = True
    workers: Optional[int] = None

    def validate(self) -> None:
        if self.instance not in ("benchmark", "tiny"):
            raise ConfigError(f"instance must be benchmark or tiny, got {self.instance}")
        if self.K < 1:
            raise ConfigError(f"K = {self.K} out of range (must be >= 1)")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if self.dual not in ("regularized", "clipped"):
            raise ConfigError(f"dual must be regularized or clipped, got {self.dual}")
        if self.dual == "clipped" and self.gamma <= 0:
            raise ConfigError("gamma must be positive for the clipped dual variant")
        for key in ("alpha", "eta", "theta_mix", "lam", "B"):
            v = getattr(self, key)
            if v is not None and v <= 0:
                raise ConfigError(f"{key} = {v} out of range (must be positive)")
        if not (0 < self.delta < 1):
            raise ConfigError(f"delta = {self.delta} out of range (0, 1)")
        if self.workers is not None and self.workers < 1:
            raise ConfigError(f"workers = {self.workers} out of range (must be >= 1)")
        if self.instance == "benchmark":
            try:
                self.benchmark_params().validate()
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc

    def benchmark_params(self) -> BenchmarkParams:
        return BenchmarkParams(horizon=self.H, dim=self.d, b=self.b,
                               block_length=self.block_length, p0=self.p0,
                               slope=self.slope, reward_scale=self.reward_scale)

    def build_instance(self) -> CmdpInstance:
        if self.instance == "tiny":
            return build_tiny_instance()
        return build_benchmark_instance(self.benchmark_params())

    def learner_config(self, inst: CmdpInstance) -> LearnerConfig:
        B = self.B if self.B is not None else inst.B
        overrides = {}
        for key in ("alpha", "eta", "theta_mix", "lam"):
            if getattr(self, key) is not None:
                overrides[key] = getattr(self, key)
        overrides["use_clipped_dual"] = self.dual == "clipped"
        overrides["gamma_for_clipped"] = self.gamma
        overrides["diagnostics"] = self.diagnostics
        return LearnerConfig.defaults(inst.horizon, self.K, B,
                                      delta=self.delta, **overrides)


_PARSERS = {
    "instance": str,
    "K": int,
    "H": int,
    "d": int,
    "b": float,
    "block_length": int,
    "p0": float,
    "slope": float,
    "reward_scale": float,
    "alpha": float,
    "eta": float,
    "theta_mix": float,
    "lambda": float,
    "delta": float,
    "B": float,
    "dual": str,
    "gamma": float,
    "workers": int,
}


def _parse_seeds(raw: str) -> Tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in raw.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"seeds must be comma-separated integers: {raw!r}") from exc


def _parse_bool(raw: str, key: str) -> bool:
    low = raw.strip().lower()
    if low in ("on", "true", "1", "yes"):
        return True
    if low in ("off", "false", "0", "no"):
        return False
    raise ConfigError(f"{key} must be on or off, got {raw!r}")


def load_config(path) -> RunConfig:
    """Parse a flat key = value config file into a validated RunConfig."""
    values = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key == "seeds":
            values["seeds"] = _parse_seeds(raw)
        elif key == "diagnostics":
            values["diagnostics"] = _parse_bool(raw, key)
        elif key in _PARSERS:
            attr = "lam" if key == "lambda" else key
            try:
                values[attr] = _PARSERS[key](raw)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: invalid value for {key}: "
                                  f"{raw!r}") from exc
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    cfg = RunConfig(**values)
    offset = int(os.environ.get("CMDP_SEED_OFFSET", "0"))
    if offset:
        cfg = replace(cfg, seeds=tuple(s + offset for s in cfg.seeds))
    cfg.validate()
    return cfg


@dataclass
class MetricsSeries:
    """Per-episode metrics of one run, one row per episode."""

    columns: Dict[str, np.ndarray]

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if set(self.columns) != set(CSV_COLUMNS) or len(lengths) != 1:
            raise ValueError("metrics series must carry exactly the CSV columns")

    @staticmethod
    def from_run(result: RunResult, regret: np.ndarray,
                 violation: np.ndarray) -> "MetricsSeries":
        K = len(result.v_est_r)
        return MetricsSeries({
            "k": np.arange(1, K + 1, dtype=float),
            "v_est_r": result.v_est_r,
            "v_est_g": result.v_est_g,
            "v_true_r": result.v_true_r,
            "v_true_g": result.v_true_g,
            "dual_y": result.dual_y,
            "regret": regret,
            "violation": violation,
            "checks_run": result.checks_run,
            "checks_failed": result.checks_failed,
        })

    def to_csv(self, path) -> None:
        write_csv(path, CSV_COLUMNS, [self.columns[c] for c in CSV_COLUMNS],
                  int_columns=INT_COLUMNS)

    @staticmethod
    def from_csv(path) -> "MetricsSeries":
        header, data = read_csv(path)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header in {path}")
        return MetricsSeries(dict(zip(header, data)))


def _fmt(value: float, as_int: bool) -> str:
    if as_int:
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path, columns, arrays, int_columns=frozenset()) -> None:
    """Fixed column order, 17 significant digits for lossless round-trip."""
    lines = [",".join(columns)]
    for row in zip(*arrays):
        lines.append(",".join(_fmt(v, c in int_columns)
                              for c, v in zip(columns, row)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path):
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"empty CSV {path}")
    header = lines[0].split(",")
    rows = [[float(tok) for tok in line.split(",")] for line in lines[1:]]
    data = [np.array(col) for col in zip(*rows)] if rows else \
        [np.empty(0) for _ in header]
    return header, data


@dataclass
class ExperimentSummary:
    gamma: float
    comparator_value_r: float
    comparator_value_g: float
    final_regret: Dict[str, float]
    final_violation: Dict[str, float]
    checks_run: int
    checks_failed: int
    out_dir: Path
    seeds: Tuple[int, ...]

    @property
    def ok(self) -> bool:
        return self.checks_failed == 0


def _aggregate(series_by_seed: List[MetricsSeries]):
    """Per-episode mean and 95% normal-approximation half-width."""
    out = {"k": series_by_seed[0].columns["k"]}
    n = len(series_by_seed)
    for name in ("regret", "violation"):
        stack = np.stack([s.columns[name] for s in series_by_seed])
        mean = stack.mean(axis=0)
        if n > 1:
            ci = 1.96 * stack.std(axis=0, ddof=1) / np.sqrt(n)
        else:
            ci = np.zeros_like(mean)
        out[f"{name}_mean"] = mean
        out[f"{name}_ci95"] = ci
    return out


AGG_COLUMNS = ("k", "regret_mean", "regret_ci95", "violation_mean",
               "violation_ci95")


def run_experiment(cfg: RunConfig, out_dir, workers: Optional[int] = None,
                   diagnostics: Optional[bool] = None) -> ExperimentSummary:
    """Run every seed for both algorithms, writing per-seed CSVs,
    aggregates, and a summary file into `out_dir`."""
    cfg.validate()
    if diagnostics is not None:
        cfg = replace(cfg, diagnostics=diagnostics)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    inst = cfg.build_instance()
    lcfg = cfg.learner_config(inst)
    r_bar = oracle.average_reward_table(inst, cfg.K)
    comp = oracle.constrained_comparator(inst, r_bar)
    comp_vals = oracle.comparator_episode_values(inst, comp, cfg.K)

    def one_seed(seed: int):
        stream = RngStream(seed)
        learner = run_pd_powers(inst, lcfg, stream)
        baseline = run_random_baseline(inst, cfg.K, stream)
        out = {}
        for algo, result in ((ALGO_LEARNER, learner), (ALGO_BASELINE, baseline)):
            regret, violation = oracle.metrics(
                result.v_true_r, result.v_true_g, comp_vals, inst.b)
            out[algo] = MetricsSeries.from_run(result, regret, violation)
        return out

    n_workers = workers if workers is not None else \
        (cfg.workers if cfg.workers is not None else len(cfg.seeds))
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        per_seed = list(pool.map(one_seed, cfg.seeds))

    final_regret, final_violation = {}, {}
    checks_run = checks_failed = 0
    for algo in (ALGO_LEARNER, ALGO_BASELINE):
        series = [result[algo] for result in per_seed]
        for seed, s in zip(cfg.seeds, series):
            s.to_csv(out_dir / f"run_{algo}_{seed}.csv")
        agg = _aggregate(series)
        write_csv(out_dir / f"aggregate_{algo}.csv", AGG_COLUMNS,
                  [agg[c] for c in AGG_COLUMNS], int_columns={"k"})
        final_regret[algo] = float(agg["regret_mean"][-1])
        final_violation[algo] = float(agg["violation_mean"][-1])
        checks_run += int(sum(s.columns["checks_run"][-1] for s in series))
        checks_failed += int(sum(s.columns["checks_failed"][-1] for s in series))

    summary = ExperimentSummary(
        gamma=comp.gamma, comparator_value_r=comp.value_r,
        comparator_value_g=comp.value_g, final_regret=final_regret,
        final_violation=final_violation, checks_run=checks_run,
        checks_failed=checks_failed, out_dir=out_dir, seeds=cfg.seeds,
    )
    _write_summary(out_dir / "summary.txt", cfg, summary)
    return summary


def _write_summary(path, cfg: RunConfig, s: ExperimentSummary) -> None:
    lines = [
        f"instance = {cfg.instance}",
        f"K = {cfg.K}",
        "seeds = " + ",".join(str(x) for x in s.seeds),
        f"slater_gamma = {s.gamma:.6f}",
        f"comparator_value_r = {s.comparator_value_r:.6f}",
        f"comparator_value_g = {s.comparator_value_g:.6f}",
    ]
    for algo in (ALGO_LEARNER, ALGO_BASELINE):
        lines.append(f"{algo} final_regret_mean = {s.final_regret[algo]:.6f}")
        lines.append(f"{algo} final_violation_mean = {s.final_violation[algo]:.6f}")
    lines.append(f"assertions checked = {s.checks_run}")
    lines.append(f"assertions failed = {s.checks_failed}")
    Path(path).write_text("\n".join(lines) + "\n")


def validate_config(cfg: RunConfig):
    """Instance plus config checks only; returns the validation report."""
    cfg.validate()
    inst = cfg.build_instance()
    cfg.learner_config(inst).validate()
    return validate_instance(inst)
