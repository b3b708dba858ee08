"""Plot output for CSV files: gnuplot script text always, PNG figures when matplotlib is installed."""

from __future__ import annotations

import csv
import os
from typing import Sequence

__all__ = ["gnuplot_script", "write_gnuplot", "plot_csv", "matplotlib_available"]


def _header(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return next(csv.reader(fh))


def gnuplot_script(csv_path: str, columns: Sequence[str] | None = None, logscale_y: bool = False) -> str:
    """Script text plotting the chosen columns of ``csv_path`` against its first column."""
    header = _header(csv_path)
    cols = [c for c in (columns or header[1:]) if c in header]
    name = os.path.basename(csv_path)
    png = os.path.splitext(name)[0] + ".png"
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set terminal pngcairo size 900,600",
        f"set output '{png}'",
        f"set xlabel '{header[0]}'",
    ]
    if logscale_y:
        lines.append("set logscale y")
    plots = [f"'{name}' using 1:{header.index(c) + 1} with lines title '{c}'" for c in cols]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def write_gnuplot(csv_path: str, columns: Sequence[str] | None = None, logscale_y: bool = False) -> str:
    out = os.path.splitext(csv_path)[0] + ".gp"
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(gnuplot_script(csv_path, columns, logscale_y))
    return out


def matplotlib_available() -> bool:
    try:
        import matplotlib  # noqa: F401
    except ImportError:
        return False
    return True


def plot_csv(csv_path: str, columns: Sequence[str] | None = None, logscale_y: bool = False) -> str:
    """Render columns of a CSV to a PNG next to it.  Needs the optional ``plot`` extra."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise RuntimeError("PNG output needs matplotlib; install the 'plot' extra") from exc
    import numpy as np

    header = _header(csv_path)
    data = np.genfromtxt(csv_path, delimiter=",", skip_header=1, ndmin=2)
    cols = [c for c in (columns or header[1:]) if c in header]
    fig, ax = plt.subplots(figsize=(8, 5))
    for c in cols:
        ax.plot(data[:, 0], data[:, header.index(c)], label=c)
    ax.set_xlabel(header[0])
    if logscale_y:
        ax.set_yscale("log")
    ax.legend()
    out = os.path.splitext(csv_path)[0] + ".png"
    fig.savefig(out, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return out
