"""
Benchmark harness: success-rate sweeps, runtime scaling, 2-D patch recovery and
image recovery, with per-trial records and pandas summaries
"""

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, asdict, fields
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .config import (MAX_WORKERS, ORACLE_MAX_N, SUCCESS_THRESHOLD,
                     SolverConfig, load_json)
from .coupling import NeighborGraph, make_chain, make_lattice
from .errors import ConfigError, RecoveryError
from .fileio import read_pgm, write_json
from .linop import (SensingOperator, is_power_of_two, make_gaussian_dense,
                    make_hadamard_sensing)
from .oracle import ExactPatternCoupledSBL
from .rng import derive_seeds
from .signals import add_noise, gen_block_sparse, gen_patch_2d, load_patch, nmse, vectorize
from .solver import ConventionalSBL, PatternCoupledSBL

logger = logging.getLogger(__name__)

EXPERIMENT_KINDS = ("success-sweep", "runtime-sweep", "patch-2d", "image-recover")

ALGORITHMS = {
    "pcsbl-gamp": PatternCoupledSBL,
    "pcsbl-em": ExactPatternCoupledSBL,
    "sbl": ConventionalSBL,
}

RECORD_COLUMNS = ("grid_index", "trial", "seed", "algorithm", "n", "m", "m_over_n", "realized_m_over_n",
                  "nmse", "success", "wall_time", "iterations", "inner_iterations", "converged", "diagnostic")

SUMMARY_COLUMNS = ("algorithm", "n", "m_over_n", "success_rate", "mean_nmse", "median_nmse",
                   "mean_time_s", "median_time_s", "trials", "failures")


@dataclass
class ExperimentConfig:
    """One experiment; unused fields are ignored by the other kinds"""
    kind: str
    seed: int = 0
    trials: int = 1
    algorithms: List[str] = field(default_factory=lambda: ["pcsbl-gamp", "pcsbl-em", "sbl"])
    solvers: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    snr_db: Optional[float] = None
    # 1-D signals
    N: Optional[int] = None
    K: Optional[int] = None
    T: Optional[int] = None
    m_over_n: List[float] = field(default_factory=list)
    n_grid: List[int] = field(default_factory=list)
    runtime_ratio: float = 0.4
    # 2-D signals
    Q: Optional[int] = None
    L: Optional[int] = None
    M: Optional[int] = None
    shape: str = "letters"
    patch_path: Optional[str] = None
    image_path: Optional[str] = None
    max_workers: int = MAX_WORKERS
    output_dir: Optional[str] = None

    def validate(self) -> "ExperimentConfig":
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"kind must be one of {EXPERIMENT_KINDS}, got {self.kind!r}")
        if int(self.seed) < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if int(self.trials) < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if int(self.max_workers) < 1:
            raise ConfigError(f"max_workers must be >= 1, got {self.max_workers}")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown or not self.algorithms:
            raise ConfigError(f"algorithms must be a non-empty subset of {sorted(ALGORITHMS)}, got {self.algorithms}")
        for name, overrides in self.solvers.items():
            if name not in ALGORITHMS:
                raise ConfigError(f"solver overrides given for unknown algorithm {name!r}")
            SolverConfig.from_dict(overrides)
        if self.snr_db is not None and np.isnan(self.snr_db):
            raise ConfigError("snr_db must be a number or null for noiseless")

        if self.kind == "success-sweep":
            self._require("N", "K", "T")
            self._check_sparsity(self.N)
            self._check_grid()
        elif self.kind == "runtime-sweep":
            self._require("K", "T")
            grid = list(self.n_grid)
            if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
                raise ConfigError(f"n_grid must be non-empty and strictly increasing, got {grid}")
            if "pcsbl-em" in self.algorithms and grid[-1] > ORACLE_MAX_N:
                raise ConfigError(f"pcsbl-em is limited to n <= {ORACLE_MAX_N}, n_grid reaches {grid[-1]}")
            if not 0 < self.runtime_ratio <= 1:
                raise ConfigError(f"runtime_ratio must be in (0, 1], got {self.runtime_ratio}")
            self._check_sparsity(self.reference_n)
        elif self.kind == "patch-2d":
            self._require("Q", "L", "M")
            if self.Q < 4 or self.L < 4:
                raise ConfigError(f"patches need Q, L >= 4, got {self.Q}x{self.L}")
            if not 1 <= self.M <= self.Q * self.L:
                raise ConfigError(f"M must be in [1, {self.Q * self.L}], got {self.M}")
        else:
            self._require("image_path")
            self._check_grid()
        return self

    @property
    def reference_n(self) -> int:
        """N at which K and T are stated; runtime sweeps scale K with n"""
        return int(self.N) if self.N is not None else int(self.n_grid[0])

    def _require(self, *names: str):
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            raise ConfigError(f"{self.kind} experiments need {missing}")

    def _check_sparsity(self, n: int):
        if not 1 <= self.T <= self.K <= n:
            raise ConfigError(f"need 1 <= T <= K <= N, got N={n}, K={self.K}, T={self.T}")

    def _check_grid(self):
        grid = list(self.m_over_n)
        if not grid:
            raise ConfigError("m_over_n grid must not be empty")
        if any(not 0 < r <= 1 for r in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError(f"m_over_n must be strictly increasing in (0, 1], got {grid}")

    def solver_config(self, algorithm: str) -> SolverConfig:
        """Per-algorithm solver config; noiseless runs freeze γ and tighten GAMP unless told otherwise"""
        overrides = dict(self.solvers.get(algorithm, {}))
        if self.noiseless:
            return SolverConfig.noiseless(overrides)
        return SolverConfig.from_dict(overrides)

    def grid_ratio(self, grid_index: int) -> float:
        """Configured M/N of a grid point; the realized m/n differs by rounding"""
        if self.kind == "runtime-sweep":
            return float(self.runtime_ratio)
        if self.kind == "patch-2d":
            return int(self.M) / (int(self.Q) * int(self.L))
        return float(self.m_over_n[grid_index])

    @property
    def noiseless(self) -> bool:
        return self.snr_db is None or np.isposinf(self.snr_db)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("Experiment config must be a JSON object")
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"Unknown ExperimentConfig keys: {sorted(unknown)}")
        try:
            cfg = cls(**data)
        except TypeError as e:
            raise ConfigError(f"Invalid experiment config: {e}") from e
        return cfg.validate()

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        return cls.from_dict(load_json(path))


@dataclass
class TrialRecord:
    grid_index: int
    trial: int
    seed: int
    algorithm: str
    n: int
    m: int
    m_over_n: float
    realized_m_over_n: float
    nmse: float
    success: bool
    wall_time: float
    iterations: int
    inner_iterations: int = 0
    converged: bool = False
    diagnostic: str = ""


@dataclass
class Instance:
    """One measured signal shared by every algorithm of a trial"""
    x: np.ndarray
    y: np.ndarray
    op: SensingOperator
    graph: NeighborGraph
    seed: int


def run_algorithm(algorithm: str, cfg: ExperimentConfig, instance: Instance,
                  grid_index: int, trial: int) -> TrialRecord:
    """Solve one instance; solver failures become unsuccessful records"""
    op = instance.op
    base = dict(grid_index=grid_index, trial=trial, seed=instance.seed, algorithm=algorithm,
                n=op.n, m=op.m, m_over_n=cfg.grid_ratio(grid_index), realized_m_over_n=op.m / op.n)
    solver = ALGORITHMS[algorithm](cfg.solver_config(algorithm))
    start = time.perf_counter()
    try:
        report = solver.solve(op, instance.y, instance.graph)
    except RecoveryError as e:
        logger.error(f"{algorithm} failed on grid point {grid_index}, trial {trial}: {e}")
        return TrialRecord(**base, nmse=float("nan"), success=False,
                           wall_time=time.perf_counter() - start, iterations=0,
                           diagnostic=f"{type(e).__name__}: {e}")
    error = nmse(instance.x, report.x_hat)
    return TrialRecord(**base, nmse=error, success=error <= SUCCESS_THRESHOLD,
                       wall_time=report.wall_time, iterations=report.outer_iterations,
                       inner_iterations=report.inner_iterations_total, converged=report.converged)


def _run_trial(cfg: ExperimentConfig, build: Callable[[int, int], Instance],
               grid_index: int, trial: int) -> List[TrialRecord]:
    instance = build(grid_index, trial)
    return [run_algorithm(algorithm, cfg, instance, grid_index, trial) for algorithm in cfg.algorithms]


def _sort_key(record: TrialRecord) -> Tuple[int, int, int]:
    return record.grid_index, record.trial, list(ALGORITHMS).index(record.algorithm)


def run_trials(cfg: ExperimentConfig, build: Callable[[int, int], Instance],
               grid_size: int) -> List[TrialRecord]:
    """Fan trials out over a thread pool; records come back sorted by (grid point, trial, algorithm)"""
    jobs = [(g, t) for g in range(grid_size) for t in range(int(cfg.trials))]
    records = []

    logger.info(f"Running {len(jobs)} trials x {len(cfg.algorithms)} algorithms "
                f"({cfg.kind}) with {cfg.max_workers} workers")
    start_time = time.time()

    with ThreadPoolExecutor(max_workers=int(cfg.max_workers)) as executor:
        future_to_job = {executor.submit(_run_trial, cfg, build, g, t): (g, t) for g, t in jobs}

        for future in as_completed(future_to_job):
            g, t = future_to_job[future]
            try:
                records.extend(future.result())
            except Exception as e:
                logger.error(f"Error building trial {t} at grid point {g}: {str(e)}")
                records.extend(_failed_records(cfg, g, t, e))

    logger.info(f"Finished {len(jobs)} trials in {time.time() - start_time:.2f} seconds")
    return sorted(records, key=_sort_key)


def _failed_records(cfg: ExperimentConfig, g: int, t: int, error: Exception) -> List[TrialRecord]:
    return [TrialRecord(grid_index=g, trial=t, seed=-1, algorithm=a, n=0, m=0, m_over_n=cfg.grid_ratio(g),
                        realized_m_over_n=float("nan"), nmse=float("nan"), success=False,
                        wall_time=0.0, iterations=0,
                        diagnostic=f"{type(error).__name__}: {error}") for a in cfg.algorithms]


# ---- Experiments -------------------------------------------------------

def _measure(op: SensingOperator, x: np.ndarray, snr_db: Optional[float], seed: int) -> np.ndarray:
    y, _ = add_noise(op.apply(x), snr_db, seed)
    return y


def run_success_sweep(cfg: ExperimentConfig) -> List[TrialRecord]:
    """Success rate vs M/N for block-sparse 1-D signals under column-normalized Gaussian sensing"""
    N = int(cfg.N)
    graph = make_chain(N)

    def build(g: int, t: int) -> Instance:
        signal_seed, op_seed, noise_seed = derive_seeds(cfg.seed, g, t, count=3)
        m = max(1, int(round(cfg.m_over_n[g] * N)))
        op = make_gaussian_dense(m, N, op_seed)
        x = gen_block_sparse(N, int(cfg.K), int(cfg.T), signal_seed)
        return Instance(x=x, y=_measure(op, x, cfg.snr_db, noise_seed), op=op, graph=graph, seed=signal_seed)

    return run_trials(cfg, build, len(cfg.m_over_n))


def run_runtime_sweep(cfg: ExperimentConfig) -> List[TrialRecord]:
    """Wall time vs N at M = runtime_ratio·N; trials run one at a time and a warm-up solve is discarded"""
    if int(cfg.max_workers) > 1:
        logger.warning("Runtime sweeps ignore max_workers and run trials sequentially")

    def build(g: int, t: int) -> Instance:
        n = int(cfg.n_grid[g])
        k = max(int(cfg.T), int(round(cfg.K * n / cfg.reference_n)))
        signal_seed, op_seed, noise_seed = derive_seeds(cfg.seed, g, t, count=3)
        op = make_gaussian_dense(max(1, int(round(cfg.runtime_ratio * n))), n, op_seed)
        x = gen_block_sparse(n, k, int(cfg.T), signal_seed)
        return Instance(x=x, y=_measure(op, x, cfg.snr_db, noise_seed), op=op, graph=make_chain(n),
                        seed=signal_seed)

    warmup = build(0, int(cfg.trials))
    for algorithm in cfg.algorithms:
        run_algorithm(algorithm, cfg, warmup, 0, -1)
    logger.info("Warm-up solves done")

    records = []
    for g in range(len(cfg.n_grid)):
        for t in range(int(cfg.trials)):
            records.extend(_run_trial(cfg, build, g, t))
        logger.info(f"Runtime sweep: n={cfg.n_grid[g]} done")
    return sorted(records, key=_sort_key)


def run_patch_experiment(cfg: ExperimentConfig) -> List[TrialRecord]:
    """Letter-like Q×L patches from M Gaussian measurements on the 4-neighbor lattice"""
    Q, L, M = int(cfg.Q), int(cfg.L), int(cfg.M)
    graph = make_lattice(Q, L)
    fixed_patch = load_patch(cfg.patch_path, Q, L) if cfg.patch_path else None
    if fixed_patch is not None and not np.any(fixed_patch):
        raise ConfigError(f"{cfg.patch_path} has no foreground pixels")

    def build(g: int, t: int) -> Instance:
        signal_seed, op_seed, noise_seed = derive_seeds(cfg.seed, g, t, count=3)
        x = fixed_patch if fixed_patch is not None else gen_patch_2d(cfg.shape, Q, L, signal_seed)
        op = make_gaussian_dense(M, Q * L, op_seed)
        return Instance(x=x, y=_measure(op, x, cfg.snr_db, noise_seed), op=op, graph=graph, seed=signal_seed)

    return run_trials(cfg, build, 1)


def image_operator(m: int, n: int, seed: int) -> SensingOperator:
    """Subsampled Hadamard sensing when n is a power of two, Gaussian otherwise"""
    if is_power_of_two(n):
        return make_hadamard_sensing(m, n, seed)
    logger.warning(f"Image size {n} is not a power of two; using a Gaussian operator")
    return make_gaussian_dense(m, n, seed)


def run_image_experiment(cfg: ExperimentConfig) -> List[TrialRecord]:
    """NMSE vs M/N for a user-supplied sparse image"""
    image = read_pgm(cfg.image_path)
    Q, L = image.shape
    x = vectorize(image)
    if not np.any(x):
        raise ConfigError(f"{cfg.image_path} is all background")
    graph = make_lattice(Q, L)
    n = Q * L

    def build(g: int, t: int) -> Instance:
        op_seed, noise_seed = derive_seeds(cfg.seed, g, t, count=2)
        op = image_operator(max(1, int(round(cfg.m_over_n[g] * n))), n, op_seed)
        return Instance(x=x, y=_measure(op, x, cfg.snr_db, noise_seed), op=op, graph=graph, seed=op_seed)

    return run_trials(cfg, build, len(cfg.m_over_n))


EXPERIMENTS = {
    "success-sweep": run_success_sweep,
    "runtime-sweep": run_runtime_sweep,
    "patch-2d": run_patch_experiment,
    "image-recover": run_image_experiment,
}


def run_experiment(cfg: ExperimentConfig) -> List[TrialRecord]:
    return EXPERIMENTS[cfg.kind](cfg.validate())


# ---- Tables ------------------------------------------------------------

def records_to_frame(records: List[TrialRecord]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in records], columns=list(RECORD_COLUMNS))


def write_records(path: str, records: List[TrialRecord]):
    records_to_frame(records).to_csv(path, index=False, float_format="%.17g", na_rep="nan")


def read_records(path: str) -> List[TrialRecord]:
    nan = ["nan", "NaN"]
    frame = pd.read_csv(path, keep_default_na=False, float_precision="round_trip",
                        na_values={"nmse": nan, "m_over_n": nan, "realized_m_over_n": nan})
    frame["diagnostic"] = frame["diagnostic"].astype(str)
    return [TrialRecord(**{k: _native(v) for k, v in row.items()}) for row in frame.to_dict("records")]


def _native(value):
    return value.item() if isinstance(value, np.generic) else value


def summarize(records: List[TrialRecord]) -> pd.DataFrame:
    """Per (algorithm, n, M/N): success rate, NMSE and wall-time statistics"""
    frame = records_to_frame(records)
    frame = frame[frame["n"] > 0]
    if frame.empty:
        return pd.DataFrame(columns=list(SUMMARY_COLUMNS))
    frame = frame.assign(failed=frame["diagnostic"] != "")
    grouped = frame.groupby(["algorithm", "n", "m_over_n"], sort=False)
    summary = grouped.agg(success_rate=("success", "mean"), mean_nmse=("nmse", "mean"),
                          median_nmse=("nmse", "median"), mean_time_s=("wall_time", "mean"),
                          median_time_s=("wall_time", "median"), trials=("trial", "size"),
                          failures=("failed", "sum")).reset_index()
    order = {name: i for i, name in enumerate(ALGORITHMS)}
    summary = summary.sort_values(["algorithm", "n", "m_over_n"],
                                  key=lambda col: col.map(order) if col.name == "algorithm" else col)
    return summary[list(SUMMARY_COLUMNS)].reset_index(drop=True)


def paired_comparison(records: List[TrialRecord], first: str, second: str) -> Dict[str, Any]:
    """How often `first` reaches a lower NMSE than `second` on the same instance"""
    frame = records_to_frame(records)
    table = frame.pivot_table(index=["grid_index", "trial"], columns="algorithm", values="nmse")
    if first not in table or second not in table:
        raise ConfigError(f"paired comparison needs records for both {first} and {second}")
    pairs = table[[first, second]].dropna()
    if pairs.empty:
        return {"first": first, "second": second, "pairs": 0, "win_rate": float("nan"),
                "median_nmse_first": float("nan"), "median_nmse_second": float("nan")}
    return {
        "first": first,
        "second": second,
        "pairs": int(len(pairs)),
        "win_rate": float((pairs[first] < pairs[second]).mean()),
        "median_nmse_first": float(pairs[first].median()),
        "median_nmse_second": float(pairs[second].median()),
    }


def write_outputs(cfg: ExperimentConfig, records: List[TrialRecord], output_dir: str) -> Dict[str, str]:
    """records.csv, summary.csv and summary.json in output_dir"""
    os.makedirs(output_dir, exist_ok=True)
    paths = {name: os.path.join(output_dir, name) for name in ("records.csv", "summary.csv", "summary.json")}
    summary = summarize(records)
    write_records(paths["records.csv"], records)
    summary.to_csv(paths["summary.csv"], index=False, float_format="%.17g", na_rep="nan")

    comparisons = []
    if "pcsbl-gamp" in cfg.algorithms:
        for other in ("pcsbl-em", "sbl"):
            if other in cfg.algorithms:
                comparisons.append(paired_comparison(records, "pcsbl-gamp", other))
    write_json(paths["summary.json"], {
        "experiment": cfg.to_dict(),
        "summary": _json_safe(summary.to_dict("records")),
        "comparisons": _json_safe(comparisons),
        "failures": int(sum(1 for r in records if r.diagnostic)),
    })
    logger.info(f"Wrote {len(records)} records and {len(summary)} summary rows to {output_dir}")
    return paths


def _json_safe(rows: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """NaN and numpy scalars are not valid JSON; map them to null and plain numbers"""
    safe = []
    for row in rows:
        clean = {}
        for key, value in row.items():
            value = _native(value)
            if isinstance(value, float) and not np.isfinite(value):
                value = None
            clean[key] = value
        safe.append(clean)
    return safe
