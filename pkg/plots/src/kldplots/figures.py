"""Render publication-style figures from the experiment harness CSVs.

Inputs are consumed strictly through the documented CSV schemas; no
quantity is recomputed here.  Each figure kind reads the columns it
needs and fails loudly (naming the column) when one is missing.
"""

import csv
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

FIGURE_KINDS = ("convergence", "runtime", "pareto", "detection-snr", "detection-T")


class EmptyInput(ValueError):
    """A CSV held a header but no data rows; nothing to draw."""


class MissingColumn(KeyError):
    """A required CSV column is absent."""

    def __init__(self, column, path):
        super().__init__(column)
        self.column = column
        self.path = path

    def __str__(self):
        return f"missing column {self.column!r} in {self.path}"


@dataclass
class FigureSpec:
    """One figure request: input CSV path(s), kind, output image path."""

    inputs: list
    kind: str
    output: str
    title: str = None
    log_x: bool = False
    dpi: int = 150

    def __post_init__(self):
        if isinstance(self.inputs, str):
            self.inputs = [self.inputs]
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")


def read_rows(path, required):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in required:
            if column not in header:
                raise MissingColumn(column, path)
        rows = list(reader)
    if not rows:
        raise EmptyInput(f"no data rows in {path}")
    return rows


def _series_by(rows, key):
    order, groups = [], {}
    for row in rows:
        label = row[key]
        if label not in groups:
            groups[label] = []
            order.append(label)
        groups[label].append(row)
    return [(label, groups[label]) for label in order]


def _draw_convergence(spec, ax):
    for path in spec.inputs:
        rows = read_rows(path, ("algorithm", "iter", "objective"))
        for label, series in _series_by(rows, "algorithm"):
            ax.plot(
                [int(r["iter"]) for r in series],
                [float(r["objective"]) for r in series],
                label=label,
            )
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    if spec.log_x:
        ax.set_xscale("log")
    ax.legend()


def _draw_runtime(spec, fig):
    rows = []
    for path in spec.inputs:
        rows.extend(
            read_rows(
                path,
                ("algorithm", "n_tx", "snapshots", "median_iter_seconds", "total_seconds"),
            )
        )
    ax_iter, ax_total = fig.subplots(1, 2)
    for ax, column, title in (
        (ax_iter, "median_iter_seconds", "runtime per iteration"),
        (ax_total, "total_seconds", "total runtime"),
    ):
        series = _series_by(rows, "algorithm")
        width = 0.8 / len(series)
        sizes = sorted({(int(r["n_tx"]), int(r["snapshots"])) for r in rows})
        for k, (label, group) in enumerate(series):
            # Median over repetition rows at each size.
            heights = []
            for size in sizes:
                vals = [
                    float(r[column])
                    for r in group
                    if (int(r["n_tx"]), int(r["snapshots"])) == size
                ]
                vals.sort()
                heights.append(vals[len(vals) // 2] if vals else 0.0)
            positions = [i + k * width for i in range(len(sizes))]
            ax.bar(positions, heights, width=width, label=label)
        ax.set_xticks(
            [i + 0.4 - width / 2 for i in range(len(sizes))],
            [f"{nt}x{t}" for nt, t in sizes],
        )
        ax.set_yscale("log")
        ax.set_xlabel("n_tx x snapshots")
        ax.set_ylabel("seconds")
        ax.set_title(title)
    ax_iter.legend()


def _draw_pareto(spec, ax):
    rows = []
    for path in spec.inputs:
        rows.extend(read_rows(path, ("rho", "mi", "detection_probability")))
    ax.plot(
        [float(r["mi"]) for r in rows],
        [float(r["detection_probability"]) for r in rows],
        marker="o",
    )
    ax.set_yscale("log")
    ax.set_xlabel("mutual information (nats)")
    ax.set_ylabel("detection probability")


def _draw_detection(spec, ax, x_column, x_label):
    rows = []
    for path in spec.inputs:
        rows.extend(
            read_rows(path, ("design", x_column, "geometric_mean", "ci_low", "ci_high"))
        )
    for label, series in _series_by(rows, "design"):
        series = sorted(series, key=lambda r: float(r[x_column]))
        xs = [float(r[x_column]) for r in series]
        ax.plot(xs, [float(r["geometric_mean"]) for r in series], marker="o", label=label)
        ax.fill_between(
            xs,
            [float(r["ci_low"]) for r in series],
            [float(r["ci_high"]) for r in series],
            alpha=0.2,
        )
    ax.set_xlabel(x_label)
    ax.set_ylabel("geometric mean detection probability")
    ax.set_ylim(0.0, 1.05)
    ax.legend()


def render(spec):
    """Render one figure and write it to ``spec.output``.

    Returns the matplotlib figure (tests inspect axes); the output file
    is only written after the draw succeeds, so failures leave nothing
    behind.
    """
    fig = plt.figure(figsize=(7.0, 4.5) if spec.kind != "runtime" else (10.0, 4.5))
    try:
        if spec.kind == "convergence":
            _draw_convergence(spec, fig.subplots())
        elif spec.kind == "runtime":
            _draw_runtime(spec, fig)
        elif spec.kind == "pareto":
            _draw_pareto(spec, fig.subplots())
        elif spec.kind == "detection-snr":
            _draw_detection(spec, fig.subplots(), "snr_db", "SNR (dB)")
        elif spec.kind == "detection-T":
            _draw_detection(spec, fig.subplots(), "snapshots", "sequence length")
        if spec.title:
            fig.suptitle(spec.title)
        fig.tight_layout()
        fig.savefig(spec.output, dpi=spec.dpi)
    except Exception:
        plt.close(fig)
        raise
    return fig
