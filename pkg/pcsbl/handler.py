import logging
import os
from dataclasses import replace
from typing import Optional, Tuple

import numpy as np

from .bench import ALGORITHMS, ExperimentConfig, run_experiment, write_outputs
from .config import TRACE_DIR, SolverConfig
from .coupling import make_chain, make_lattice
from .errors import ConfigError, DimensionError
from .fileio import read_json, read_signal, read_vector_csv, write_json, write_pgm, write_vector_csv
from .linop import operator_from_dict
from .signals import add_noise, unvectorize

logger = logging.getLogger(__name__)

BENCH_COMMANDS = {
    "bench-success": "success-sweep",
    "bench-runtime": "runtime-sweep",
    "bench-patch": "patch-2d",
    "bench-image": "image-recover",
}


def parse_shape(text: Optional[str]) -> Optional[Tuple[int, int]]:
    """'16x16' -> (16, 16)"""
    if not text:
        return None
    try:
        q, l = (int(part) for part in text.lower().split("x"))
    except ValueError as e:
        raise ConfigError(f"Shape must look like QxL, got {text!r}") from e
    if q < 1 or l < 1:
        raise ConfigError(f"Shape dims must be >= 1, got {text!r}")
    return q, l


def handle_sense(args) -> int:
    """Signal + operator descriptor (+ SNR) -> measurements and the operator JSON"""
    x = read_signal(args.signal)
    op = operator_from_dict(read_json(args.operator))
    if op.n != x.shape[0]:
        raise DimensionError(f"operator has n={op.n} but {args.signal} holds {x.shape[0]} values")
    logger.info(f"📥 Sensing {args.signal} with a {op.kind} operator ({op.m}x{op.n})")

    y, sigma2 = add_noise(op.apply(x), args.snr_db, args.seed)
    write_vector_csv(args.out_y, y)
    write_json(args.out_operator, op.describe())
    logger.info(f"📤 Wrote {op.m} measurements to {args.out_y} (noise variance {sigma2:.3e})")
    return 0


def _solver_config(args) -> SolverConfig:
    cfg = SolverConfig.load(args.solver) if args.solver else SolverConfig()
    trace_dir = args.trace_dir or TRACE_DIR
    if trace_dir:
        os.makedirs(trace_dir, exist_ok=True)
        if cfg.trace_path is None:
            cfg.trace_path = os.path.join(trace_dir, "outer_trace.csv")
        if cfg.inner.trace_path is None:
            cfg.inner = replace(cfg.inner, trace_path=os.path.join(trace_dir, "inner_trace.csv"))
    return cfg


def handle_recover(args) -> int:
    """Measurements + operator (+ solver config) -> x̂ and a RecoveryReport"""
    op = operator_from_dict(read_json(args.operator))
    y = read_vector_csv(args.y)
    if args.subtract:
        background = read_vector_csv(args.subtract)
        if background.shape != y.shape:
            raise DimensionError(f"{args.subtract} has {background.shape[0]} values, expected {y.shape[0]}")
        logger.info(f"Recovering the difference signal y - {args.subtract}")
        y = y - background

    shape = parse_shape(args.shape)
    if shape is not None:
        if shape[0] * shape[1] != op.n:
            raise DimensionError(f"shape {shape[0]}x{shape[1]} does not match operator n={op.n}")
        graph = make_lattice(*shape)
    else:
        graph = make_chain(op.n)

    solver = ALGORITHMS[args.algorithm](_solver_config(args))
    logger.info(f"📥 Recovering n={op.n} from {op.m} measurements with {args.algorithm}")
    report = solver.solve(op, y, graph)

    write_vector_csv(args.out_x, report.x_hat)
    if args.out_image:
        if shape is None:
            raise ConfigError("--out-image needs --shape QxL")
        image = unvectorize(report.x_hat, *shape)
        write_pgm(args.out_image, np.maximum(image, 0.0) if args.clip_negative else image)
    if args.report:
        write_json(args.report, report.to_dict(include_arrays=args.full_report))
    logger.info(f"📤 Wrote x_hat to {args.out_x} after {report.outer_iterations} outer iterations "
                f"(converged={report.converged})")
    return 0


def handle_bench(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    expected = BENCH_COMMANDS[args.command]
    if cfg.kind != expected:
        raise ConfigError(f"{args.command} needs an experiment of kind {expected!r}, got {cfg.kind!r}")
    if args.workers is not None:
        cfg.max_workers = args.workers
    output_dir = args.out_dir or cfg.output_dir or os.path.join("results", cfg.kind)

    records = run_experiment(cfg)
    paths = write_outputs(cfg, records, output_dir)
    logger.info(f"📤 {args.command} finished: {paths['summary.csv']}")
    return 0
