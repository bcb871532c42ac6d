"""Command line entry point: ``fleetlift solve|bench|verify``."""

import argparse
import csv
import io
import sys

from .errors import FleetLiftError
from .oracle import bench_counts
from .scenario import EXIT_ERROR, bundled_path, load_scenario, run
from .verify import SUITES, format_table, report_json, verify

CSV_HEADER = ("M", "n_states", "configurations", "ops_per_state_input", "overflow")
DEFAULT_GRID = [(M, n) for M in (1, 10, 100, 1000) for n in (10, 10 ** 3, 10 ** 5, 10 ** 7)]


def _parse_grid(text):
    """``"1:10,10:10"`` -> ``[(1, 10), (10, 10)]``; sizes accept ``1e7``."""
    grid = []
    for item in text.split(","):
        M, n = item.split(":")
        grid.append((int(float(M)), int(float(n))))
    return grid


def _digits(n):
    """Decimal text of an integer of any size."""
    limit = getattr(sys, "get_int_max_str_digits", lambda: 0)()
    if limit:
        sys.set_int_max_str_digits(0)
    try:
        return str(n)
    finally:
        if limit:
            sys.set_int_max_str_digits(limit)


def bench_csv(grid):
    """CSV text of ``bench_counts``; counts are exact, overflow is 0/1."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for M, n, count, ops, overflow in bench_counts(grid):
        w.writerow((M, n, _digits(count), ops, int(overflow)))
    return buf.getvalue()


def _resolve(path):
    """A scenario path, or the name of a bundled scenario."""
    try:
        open(path).close()
        return path
    except OSError:
        return str(bundled_path(path.removesuffix(".json")))


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="fleetlift", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("solve", help="solve a scenario file and print a JSON report")
    p.add_argument("file", help="scenario JSON, or the name of a bundled scenario")
    p.add_argument("--mode", choices=("multi", "two", "both"))
    p.add_argument("--rollout", choices=("feedback", "openloop", "none"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mem-cap", type=int, metavar="CELLS")
    p.add_argument("--timings", action="store_true", help="include wall-clock timings")
    p.add_argument("--out")

    p = sub.add_parser("bench", help="configuration counts as CSV")
    p.add_argument("--grid", type=_parse_grid, default=DEFAULT_GRID,
                   help="comma-separated M:n_states pairs, e.g. 1:10,10:10,1000:1e7")
    p.add_argument("--out")

    p = sub.add_parser("verify", help="run the self-check suites")
    p.add_argument("suite", nargs="?", default="all", choices=("all", *SUITES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the JSON report here")

    args = parser.parse_args(argv)
    if args.cmd == "solve":
        try:
            scenario = load_scenario(_resolve(args.file))
        except (FleetLiftError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
        report = run(scenario, args.mode, args.rollout, args.seed, args.mem_cap)
        _emit(report.to_json(timings=args.timings), args.out)
        if report.error:
            print(f"error: {report.error}", file=sys.stderr)
        return report.exit_code
    if args.cmd == "bench":
        _emit(bench_csv(args.grid), args.out)
        return 0
    report, ok = verify(args.suite, args.seed)
    print(format_table(report))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report_json(report))
    return 0 if ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
