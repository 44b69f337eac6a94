"""CSV, metadata sidecar and gnuplot script emission."""

import csv
import json
import os
import platform
from pathlib import Path

import numpy as np
import scipy

FLOAT_FORMAT = "{:.12g}"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FORMAT.format(float(v))
    return str(v)


class CsvWriter:
    """Header-first CSV file that flushes every row, so partial runs stay readable."""

    def __init__(self, path, header):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="", encoding="utf-8")
        self._csv = csv.writer(self._fh, lineterminator="\n")
        self._csv.writerow(header)
        self.n_cols = len(header)

    def write(self, row):
        if len(row) != self.n_cols:
            raise ValueError(f"{self.path.name}: row has {len(row)} fields, header has {self.n_cols}")
        self._csv.writerow([_fmt(v) for v in row])
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_csv(path, header, rows):
    with CsvWriter(path, header) as w:
        for row in rows:
            w.write(row)
    return Path(path)


def read_csv(path):
    """Header and rows of a CSV written by :func:`write_csv` (floats where possible)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[_parse(v) for v in row] for row in reader]
    return header, rows


def _parse(v):
    try:
        return float(v)
    except ValueError:
        return v


def versions():
    from . import __version__
    return {"dissipative_chaos": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def write_metadata(out_dir, config_text, seed, threads, extra=None):
    """Sidecar with the full config echo, seed, thread count and library versions."""
    meta = {"config": config_text, "seed": seed, "threads": threads, "versions": versions()}
    if extra:
        meta.update(extra)
    path = Path(out_dir) / "metadata.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_failed_marker(out_dir, message):
    path = Path(out_dir) / "FAILED"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(message.rstrip() + "\n", encoding="utf-8")
    return path


def gnuplot_lines(csv_name, x_col, y_cols, title, xlabel, ylabel, logx=False):
    """Gnuplot script drawing columns of a CSV as lines."""
    plots = ", \\\n     ".join(f"'{csv_name}' using {x_col}:{c} with lines title columnhead({c})"
                               for c in y_cols)
    return "\n".join([
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set logscale x" if logx else "",
        f"plot {plots}",
        "",
    ])


def gnuplot_heatmap(csv_name, z_col, title, xlabel="lambda_-", ylabel="lambda_+"):
    return "\n".join([
        "set datafile separator ','",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set view map",
        f"splot '{csv_name}' every ::1 using 1:2:{z_col} with points pointtype 5 palette notitle",
        "",
    ])


def gnuplot_scatter(csv_name, title):
    return "\n".join([
        "set datafile separator ','",
        f"set title '{title}'",
        "set xlabel 'Re'",
        "set ylabel 'Im'",
        f"plot '{csv_name}' every ::1 using 1:2 with dots notitle",
        "",
    ])


def write_plot_script(out_dir, name, text):
    path = Path(out_dir) / name
    path.write_text(text, encoding="utf-8")
    return path


def env_threads(var="DISSIPATIVE_CHAOS_THREADS"):
    value = os.environ.get(var)
    if value is None or value.strip() == "":
        return None
    n = int(value)
    if n < 1:
        raise ValueError(f"{var} must be a positive integer")
    return n
