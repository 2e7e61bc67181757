"""One rendering script per figure kind, all sharing the same flags:
``--in`` (repeatable CSV paths), ``--out`` (image file), plus styling
options.  Exit status is nonzero on missing columns or empty inputs,
with the offending column or file named on stderr."""

import argparse
import sys

from .figures import EmptyInput, FigureSpec, MissingColumn, render


def _run(kind, argv):
    parser = argparse.ArgumentParser(
        prog=f"kld-plot-{kind.lower()}",
        description=f"Render the {kind} figure from harness CSV output",
    )
    parser.add_argument(
        "--in",
        dest="inputs",
        action="append",
        required=True,
        metavar="CSV",
        help="input CSV (repeatable)",
    )
    parser.add_argument("--out", required=True, metavar="IMAGE", help="output image file")
    parser.add_argument("--title", default=None)
    parser.add_argument("--dpi", type=int, default=150)
    if kind == "convergence":
        parser.add_argument(
            "--log-x", action="store_true", help="log-scale the iteration axis"
        )
    args = parser.parse_args(argv)
    spec = FigureSpec(
        inputs=args.inputs,
        kind=kind,
        output=args.out,
        title=args.title,
        log_x=getattr(args, "log_x", False),
        dpi=args.dpi,
    )
    try:
        render(spec)
    except (MissingColumn, EmptyInput, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main_convergence(argv=None):
    return _run("convergence", argv)


def main_runtime(argv=None):
    return _run("runtime", argv)


def main_pareto(argv=None):
    return _run("pareto", argv)


def main_detection_snr(argv=None):
    return _run("detection-snr", argv)


def main_detection_t(argv=None):
    return _run("detection-T", argv)


if __name__ == "__main__":
    sys.exit(_run(sys.argv[1], sys.argv[2:]))
