import json

import matplotlib.pyplot as plt
import numpy as np
import pytest

from picardkit_report import (
    FigureSpec,
    SchemaError,
    ValidationError,
    plot_convergence,
    plot_spectrum,
    read_spectrum,
    render,
)


def write_spectrum(path, values, schema="picardkit-spectrum-1",
                   label="simple", column="eigenvalue"):
    head = {"schema": schema, "approximation": label, "n": 4}
    body = "".join(f"{v}\n" for v in values)
    path.write_text(f"# {json.dumps(head)}\n{column}\n{body}")
    return path


AGG_COLUMNS = "policy,mode,axis,x,p10,median,p90"


def write_aggregate(path, rows, schema="picardkit-aggregate-1",
                    columns=AGG_COLUMNS):
    head = {"schema": schema, "command": ["picardkit"], "failed_runs": []}
    body = "".join(",".join(str(v) for v in r) + "\n" for r in rows)
    path.write_text(f"# {json.dumps(head)}\n{columns}\n{body}")
    return path


def envelope_rows(policy, axis, xs, lo, mid, hi, mode="unconstrained"):
    return [(policy, mode, axis, x, lo * 0.9**i, mid * 0.9**i, hi * 0.9**i)
            for i, x in enumerate(xs)]


@pytest.fixture(autouse=True)
def close_figures():
    yield
    plt.close("all")


# --------------------------------------------------------------------------
# spectrum figures

def test_plot_spectrum_two_curves(tmp_path):
    a = write_spectrum(tmp_path / "a.csv", [0.5, 1.0, 2.0], label="simple")
    b = write_spectrum(tmp_path / "b.csv", [0.9, 1.0, 1.1], label="picard")
    out = tmp_path / "fig.svg"
    fig = plot_spectrum([a, b], out)
    assert out.exists() and out.stat().st_size > 0
    ax = fig.axes[0]
    assert len(ax.lines) == 2
    assert [t.get_text() for t in ax.get_legend().get_texts()] == \
        ["simple", "picard"]
    assert ax.get_yscale() == "log"


def test_plot_spectrum_flat_unit_spectrum(tmp_path):
    # perfectly preconditioned operator: every eigenvalue is 1
    p = write_spectrum(tmp_path / "flat.csv", [1.0] * 6)
    fig = plot_spectrum([p], tmp_path / "f.svg")
    y = fig.axes[0].lines[0].get_ydata()
    assert np.array_equal(y, np.ones(6))
    assert (y.min(), y.max()) == (1.0, 1.0)


def test_plot_spectrum_rejects_descending_without_writing(tmp_path):
    p = write_spectrum(tmp_path / "bad.csv", [2.0, 1.0, 3.0])
    out = tmp_path / "fig.svg"
    with pytest.raises(ValidationError, match="ascending"):
        plot_spectrum([p], out)
    assert not out.exists()


def test_plot_spectrum_rejects_unknown_schema(tmp_path):
    p = write_spectrum(tmp_path / "v9.csv", [1.0, 2.0],
                       schema="picardkit-spectrum-9")
    with pytest.raises(SchemaError, match="picardkit-spectrum-9"):
        plot_spectrum([p], tmp_path / "fig.svg")


def test_plot_spectrum_rejects_empty_and_headerless(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ValidationError, match="empty"):
        plot_spectrum([empty], tmp_path / "fig.svg")

    novals = write_spectrum(tmp_path / "novals.csv", [])
    with pytest.raises(ValidationError, match="no eigenvalues"):
        plot_spectrum([novals], tmp_path / "fig.svg")

    badcol = write_spectrum(tmp_path / "badcol.csv", [1.0], column="lambda")
    with pytest.raises(SchemaError, match="eigenvalue"):
        plot_spectrum([badcol], tmp_path / "fig.svg")


def test_read_spectrum_label_falls_back_to_filename(tmp_path):
    p = tmp_path / "mylabel.csv"
    head = {"schema": "picardkit-spectrum-1"}
    p.write_text(f"# {json.dumps(head)}\neigenvalue\n1.0\n")
    label, values = read_spectrum(p)
    assert label == "mylabel.csv"
    assert values.tolist() == [1.0]


# --------------------------------------------------------------------------
# convergence figures

def test_plot_convergence_two_policies(tmp_path):
    rows = (envelope_rows("gradient", "iteration", range(5), 0.5, 1.0, 2.0)
            + envelope_rows("picard", "iteration", range(5), 0.1, 0.2, 0.4))
    p = write_aggregate(tmp_path / "agg.csv", rows)
    out = tmp_path / "fig.svg"
    fig = plot_convergence(p, "iterations", out)
    assert out.exists() and out.stat().st_size > 0
    ax = fig.axes[0]
    assert [t.get_text() for t in ax.get_legend().get_texts()] == \
        ["gradient", "picard"]
    assert len(ax.collections) == 2   # one shaded band per policy
    assert ax.get_yscale() == "log"
    assert ax.get_xlabel() == "iteration"


def test_plot_convergence_zero_width_band(tmp_path):
    # a single-run benchmark has p10 == median == p90
    rows = [("picard", "unconstrained", "iteration", i, v, v, v)
            for i, v in enumerate([1.0, 0.1, 0.01])]
    p = write_aggregate(tmp_path / "agg.csv", rows)
    fig = plot_convergence(p, "iterations", tmp_path / "f.svg")
    line = fig.axes[0].lines[0]
    assert np.array_equal(line.get_ydata(), [1.0, 0.1, 0.01])


def test_plot_convergence_axis_selection(tmp_path):
    rows = (envelope_rows("picard", "iteration", range(4), 0.5, 1.0, 2.0)
            + envelope_rows("picard", "time", [0.0, 0.25, 0.5], 0.5, 1.0, 2.0))
    p = write_aggregate(tmp_path / "agg.csv", rows)
    fig = plot_convergence(p, "time", tmp_path / "f.svg")
    ax = fig.axes[0]
    assert ax.get_xlabel() == "seconds"
    assert np.array_equal(ax.lines[0].get_xdata(), [0.0, 0.25, 0.5])


def test_plot_convergence_labels_modes_when_mixed(tmp_path):
    rows = (envelope_rows("picard", "iteration", range(3), 0.5, 1.0, 2.0)
            + envelope_rows("picard", "iteration", range(3), 0.5, 1.0, 2.0,
                            mode="constrained"))
    p = write_aggregate(tmp_path / "agg.csv", rows)
    fig = plot_convergence(p, "iterations", tmp_path / "f.svg")
    labels = [t.get_text() for t in fig.axes[0].get_legend().get_texts()]
    assert labels == ["picard (unconstrained)", "picard (constrained)"]


def test_plot_convergence_rejects_missing_columns(tmp_path):
    rows = envelope_rows("picard", "iteration", range(3), 0.5, 1.0, 2.0)
    p = write_aggregate(tmp_path / "agg.csv",
                        [r[:4] + r[5:] for r in rows],
                        columns="policy,mode,axis,x,median,p90")
    with pytest.raises(SchemaError, match="expected columns"):
        plot_convergence(p, "iterations", tmp_path / "f.svg")


def test_plot_convergence_rejects_unknown_schema(tmp_path):
    rows = envelope_rows("picard", "iteration", range(3), 0.5, 1.0, 2.0)
    p = write_aggregate(tmp_path / "agg.csv", rows, schema="not-a-schema")
    out = tmp_path / "f.svg"
    with pytest.raises(SchemaError, match="not-a-schema"):
        plot_convergence(p, "iterations", out)
    assert not out.exists()


def test_plot_convergence_rejects_missing_axis_rows(tmp_path):
    rows = envelope_rows("picard", "iteration", range(3), 0.5, 1.0, 2.0)
    p = write_aggregate(tmp_path / "agg.csv", rows)
    with pytest.raises(ValidationError, match="no rows for axis"):
        plot_convergence(p, "time", tmp_path / "f.svg")


def test_plot_convergence_rejects_bad_axis_mode(tmp_path):
    rows = envelope_rows("picard", "iteration", range(3), 0.5, 1.0, 2.0)
    p = write_aggregate(tmp_path / "agg.csv", rows)
    with pytest.raises(ValidationError, match="axis must be"):
        plot_convergence(p, "epochs", tmp_path / "f.svg")


# --------------------------------------------------------------------------
# FigureSpec and dispatch

def test_figure_spec_validation(tmp_path):
    with pytest.raises(ValidationError, match="axis"):
        FigureSpec(inputs=("a.csv",), out_path="f.svg", axis="epochs")
    with pytest.raises(ValidationError, match="input"):
        FigureSpec(inputs=(), out_path="f.svg")


def test_render_dispatches_by_schema(tmp_path):
    spec_csv = write_spectrum(tmp_path / "s.csv", [1.0, 2.0])
    agg_csv = write_aggregate(
        tmp_path / "a.csv",
        envelope_rows("picard", "iteration", range(3), 0.5, 1.0, 2.0))

    fig = render(FigureSpec(inputs=(spec_csv,), out_path=tmp_path / "s.svg"))
    assert fig.axes[0].get_xlabel() == "eigenvalue index"

    fig = render(FigureSpec(inputs=(agg_csv,), out_path=tmp_path / "a.svg"))
    assert fig.axes[0].get_xlabel() == "iteration"

    with pytest.raises(ValidationError, match="spectrum files or a single"):
        render(FigureSpec(inputs=(spec_csv, agg_csv),
                          out_path=tmp_path / "m.svg"))
