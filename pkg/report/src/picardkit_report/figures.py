"""Figure builders over the solver CLI's spectrum and aggregate files.

This package is read-only over those files: it parses the documented CSV
formats, validates them, and draws. Every input is validated before any
figure is created, so a rejected input never leaves a partial image behind.
"""
import dataclasses
import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SPECTRUM_SCHEMAS = ("picardkit-spectrum-1",)
AGGREGATE_SCHEMAS = ("picardkit-aggregate-1",)
AGGREGATE_COLUMNS = "policy,mode,axis,x,p10,median,p90"
AXIS_MODES = ("iterations", "time")


class SchemaError(ValueError):
    """The file is not a format this package understands."""


class ValidationError(ValueError):
    """The file is a known format but its content violates the contract."""


@dataclasses.dataclass(frozen=True)
class FigureSpec:
    """What to draw: input files, axis mode, scales, and where to save.

    `axis` only matters for convergence figures; spectrum figures always
    put the eigenvalue index on x.
    """

    inputs: tuple
    out_path: str
    axis: str = "iterations"
    log_x: bool = False
    log_y: bool = True

    def __post_init__(self):
        if self.axis not in AXIS_MODES:
            raise ValidationError(
                f"axis must be one of {list(AXIS_MODES)}, got {self.axis!r}")
        if not self.inputs:
            raise ValidationError("at least one input file is required")


def _comment_header(first_line, path):
    if not first_line.startswith("#"):
        raise SchemaError(f"{path}: missing the '# {{...}}' header line")
    try:
        header = json.loads(first_line.lstrip("#").strip())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: unparseable header: {exc}") from None
    if not isinstance(header, dict):
        raise SchemaError(f"{path}: header is not a JSON object")
    return header


def _known_schema(header, known, path):
    schema = header.get("schema")
    if schema not in known:
        raise SchemaError(
            f"{path}: unknown schema {schema!r}, expected one of {list(known)}")


def read_spectrum(path):
    """Parse one spectrum CSV into (label, eigenvalues).

    Raises SchemaError for an unrecognized layout or schema version and
    ValidationError for an empty or non-ascending eigenvalue list.
    """
    with open(path) as f:
        lines = [ln for ln in f.read().splitlines() if ln.strip()]
    if not lines:
        raise ValidationError(f"{path}: empty file")
    header = _comment_header(lines[0], path)
    _known_schema(header, SPECTRUM_SCHEMAS, path)
    if len(lines) < 2 or lines[1] != "eigenvalue":
        raise SchemaError(f"{path}: missing the 'eigenvalue' column header")
    try:
        values = np.array([float(v) for v in lines[2:]])
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric eigenvalue: {exc}") from None
    if values.size == 0:
        raise ValidationError(f"{path}: no eigenvalues")
    if np.any(np.diff(values) < 0.0):
        raise ValidationError(f"{path}: eigenvalues are not ascending")
    label = header.get("approximation") or os.path.basename(path)
    return label, values


def read_aggregate(path):
    """Parse an aggregate CSV into (header, row list).

    Each row is a dict with policy/mode/axis strings and x/p10/median/p90
    floats. Raises SchemaError when the schema version or the column line
    is wrong, ValidationError when there are no data rows.
    """
    with open(path) as f:
        lines = [ln for ln in f.read().splitlines() if ln.strip()]
    if not lines:
        raise ValidationError(f"{path}: empty file")
    header = _comment_header(lines[0], path)
    _known_schema(header, AGGREGATE_SCHEMAS, path)
    if len(lines) < 2 or lines[1] != AGGREGATE_COLUMNS:
        raise SchemaError(
            f"{path}: expected columns '{AGGREGATE_COLUMNS}', got "
            f"'{lines[1] if len(lines) > 1 else ''}'")
    rows = []
    for ln in lines[2:]:
        parts = ln.split(",")
        if len(parts) != 7:
            raise ValidationError(f"{path}: row has {len(parts)} fields: {ln!r}")
        try:
            rows.append({
                "policy": parts[0], "mode": parts[1], "axis": parts[2],
                "x": float(parts[3]), "p10": float(parts[4]),
                "median": float(parts[5]), "p90": float(parts[6]),
            })
        except ValueError as exc:
            raise ValidationError(f"{path}: non-numeric field: {exc}") from None
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return header, rows


def _save(fig, out_path):
    ext = os.path.splitext(out_path)[1].lstrip(".").lower()
    fig.savefig(out_path, format=ext or "svg", bbox_inches="tight")


def plot_spectrum(spectrum_csvs, out_path, log_y=True):
    """Draw sorted preconditioned spectra, one curve per approximation.

    All inputs are validated before anything is drawn; a bad file raises
    and writes nothing. Returns the figure after saving it to out_path.
    """
    curves = [read_spectrum(p) for p in spectrum_csvs]
    fig, ax = plt.subplots(figsize=(4.4, 3.3))
    for label, values in curves:
        ax.plot(np.arange(1, values.size + 1), values, marker=".", label=label)
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel("eigenvalue index")
    ax.set_ylabel("eigenvalue")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save(fig, out_path)
    return fig


def plot_convergence(aggregate_csv, axis_mode, out_path,
                     log_x=False, log_y=True):
    """Draw gradient-norm envelopes: median line, 10-90 percentile band.

    axis_mode selects the iteration-indexed or the wall-time-indexed rows
    of the aggregate. Returns the figure after saving it to out_path.
    """
    if axis_mode not in AXIS_MODES:
        raise ValidationError(
            f"axis must be one of {list(AXIS_MODES)}, got {axis_mode!r}")
    _, rows = read_aggregate(aggregate_csv)
    axis_key = "iteration" if axis_mode == "iterations" else "time"
    rows = [r for r in rows if r["axis"] == axis_key]
    if not rows:
        raise ValidationError(
            f"{aggregate_csv}: no rows for axis {axis_mode!r}")

    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    labels = []
    for row in rows:
        key = (row["policy"], row["mode"])
        if key not in labels:
            labels.append(key)
    many_modes = len({m for _, m in labels}) > 1
    for policy, mode in labels:
        sel = sorted((r for r in rows
                      if r["policy"] == policy and r["mode"] == mode),
                     key=lambda r: r["x"])
        x = np.array([r["x"] for r in sel])
        ax.fill_between(x, [r["p10"] for r in sel], [r["p90"] for r in sel],
                        alpha=0.25)
        label = f"{policy} ({mode})" if many_modes else policy
        ax.plot(x, [r["median"] for r in sel], linewidth=2.0, label=label)
    if log_x:
        ax.set_xscale("log")
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel("iteration" if axis_mode == "iterations" else "seconds")
    ax.set_ylabel("gradient sup-norm")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save(fig, out_path)
    return fig


def render(spec):
    """Draw the figure a FigureSpec describes.

    Single-input specs naming an aggregate file draw convergence envelopes;
    specs whose inputs are all spectrum files draw spectra. The dispatch
    reads each file's schema header, so unknown inputs are rejected here.
    """
    kinds = []
    for path in spec.inputs:
        with open(path) as f:
            first = f.readline()
        header = _comment_header(first, path)
        schema = header.get("schema")
        if schema in SPECTRUM_SCHEMAS:
            kinds.append("spectrum")
        elif schema in AGGREGATE_SCHEMAS:
            kinds.append("aggregate")
        else:
            raise SchemaError(f"{path}: unknown schema {schema!r}")
    if all(k == "spectrum" for k in kinds):
        return plot_spectrum(spec.inputs, spec.out_path, log_y=spec.log_y)
    if kinds == ["aggregate"]:
        return plot_convergence(spec.inputs[0], spec.axis, spec.out_path,
                                log_x=spec.log_x, log_y=spec.log_y)
    raise ValidationError(
        "inputs must be either spectrum files or a single aggregate file")
