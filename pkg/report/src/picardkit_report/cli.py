"""Command-line front ends for the figure builders.

Exit codes: 0 success, 2 for anything wrong with the inputs (unknown
schema, contract violations, unreadable files, bad flags).
"""
import argparse
import sys

from .figures import (
    FigureSpec,
    SchemaError,
    ValidationError,
    plot_convergence,
    plot_spectrum,
)

USAGE_ERRORS = (SchemaError, ValidationError, OSError)


def _run(draw, out_path):
    # each script draws its own figure kind, so a file of the other kind
    # fails schema validation instead of being silently re-routed
    try:
        fig = draw()
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    import matplotlib.pyplot as plt

    plt.close(fig)
    print(f"wrote {out_path}")
    return 0


def main_spectrum(argv=None):
    parser = argparse.ArgumentParser(
        prog="picardkit-plot-spectrum",
        description="Plot sorted preconditioned-spectrum CSVs, one curve "
                    "per approximation.")
    parser.add_argument("inputs", nargs="+", help="spectrum CSV files")
    parser.add_argument("--out", required=True,
                        help="output image; the extension picks the format, "
                             "vector (svg) by default")
    parser.add_argument("--linear-y", action="store_true",
                        help="linear instead of log eigenvalue axis")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(inputs=tuple(args.inputs), out_path=args.out,
                          log_y=not args.linear_y)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return _run(lambda: plot_spectrum(spec.inputs, spec.out_path,
                                      log_y=spec.log_y), spec.out_path)


def main_convergence(argv=None):
    parser = argparse.ArgumentParser(
        prog="picardkit-plot-convergence",
        description="Plot gradient-norm envelopes from a benchmark "
                    "aggregate CSV: median line, 10-90% band.")
    parser.add_argument("input", help="aggregate CSV file")
    parser.add_argument("--out", required=True,
                        help="output image; the extension picks the format, "
                             "vector (svg) by default")
    parser.add_argument("--axis", default="iterations",
                        choices=["iterations", "time"])
    parser.add_argument("--log-x", action="store_true")
    parser.add_argument("--linear-y", action="store_true",
                        help="linear instead of log gradient-norm axis")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(inputs=(args.input,), out_path=args.out,
                          axis=args.axis, log_x=args.log_x,
                          log_y=not args.linear_y)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return _run(lambda: plot_convergence(spec.inputs[0], spec.axis,
                                         spec.out_path, log_x=spec.log_x,
                                         log_y=spec.log_y), spec.out_path)
