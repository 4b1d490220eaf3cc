import argparse
import json
import logging
import os
import sys

from dotenv import load_dotenv

load_dotenv()

# BLAS thread counts must be set before numpy is first imported
_threads = os.getenv("PCSBL_NUM_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

from pcsbl.bench import ALGORITHMS  # noqa: E402
from pcsbl.config import LOG_LEVEL  # noqa: E402
from pcsbl.errors import RecoveryError  # noqa: E402
from pcsbl.handler import BENCH_COMMANDS, handle_bench, handle_recover, handle_sense  # noqa: E402

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcsbl",
        description="Pattern-coupled sparse Bayesian learning with a GAMP E-step")
    parser.add_argument("--log-level", default=LOG_LEVEL, help="logging level (default from PCSBL_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    sense = sub.add_parser("sense", help="measure a signal with an operator descriptor")
    sense.add_argument("--signal", required=True, help="signal CSV (one value per line) or PGM image")
    sense.add_argument("--operator", required=True, help="operator descriptor JSON")
    sense.add_argument("--snr-db", type=float, default=None, help="target SNR in dB (omit for noiseless)")
    sense.add_argument("--seed", type=int, default=0, help="noise seed")
    sense.add_argument("--out-y", required=True, help="measurement CSV to write")
    sense.add_argument("--out-operator", required=True, help="operator JSON to write")
    sense.set_defaults(handler=handle_sense)

    recover = sub.add_parser("recover", help="recover a signal from measurements")
    recover.add_argument("--y", required=True, help="measurement CSV")
    recover.add_argument("--operator", required=True, help="operator descriptor JSON")
    recover.add_argument("--solver", default=None, help="solver config JSON")
    recover.add_argument("--algorithm", choices=sorted(ALGORITHMS), default="pcsbl-gamp")
    recover.add_argument("--shape", default=None, help="QxL for 2-D signals (lattice neighbors)")
    recover.add_argument("--subtract", default=None, help="background measurement CSV to subtract from y")
    recover.add_argument("--out-x", required=True, help="estimate CSV to write")
    recover.add_argument("--out-image", default=None, help="estimate PGM to write (needs --shape)")
    recover.add_argument("--clip-negative", action="store_true", help="clip negatives in the written image")
    recover.add_argument("--report", default=None, help="RecoveryReport JSON to write")
    recover.add_argument("--full-report", action="store_true", help="include x_hat, phi_hat and alpha in the report")
    recover.add_argument("--trace-dir", default=None, help="directory for inner/outer trace CSVs")
    recover.set_defaults(handler=handle_recover)

    for command, kind in BENCH_COMMANDS.items():
        bench = sub.add_parser(command, help=f"run a {kind} experiment")
        bench.add_argument("--config", required=True, help="experiment config JSON")
        bench.add_argument("--out-dir", default=None, help="directory for records/summary outputs")
        bench.add_argument("--workers", type=int, default=None, help="trial worker threads")
        bench.set_defaults(handler=handle_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    # Enable logging
    logging.basicConfig(
        format="%(asctime)s - %(levelname)s - %(name)s - %(message)s",
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
    )

    try:
        return args.handler(args)
    except Exception as e:
        if isinstance(e, (RecoveryError, OSError)):
            logger.error(f"{args.command} failed: {e}")
        else:
            logger.exception(f"{args.command} failed unexpectedly: {e}")
        payload = {"error": type(e).__name__, "message": str(e), "command": args.command}
        if getattr(e, "diagnostics", None):
            payload["diagnostics"] = e.diagnostics
        print(json.dumps(payload, default=str), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
