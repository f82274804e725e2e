import json

import matplotlib.pyplot as plt
import pytest

from picardkit_report.cli import main_convergence, main_spectrum


def write_spectrum(path, values):
    head = {"schema": "picardkit-spectrum-1", "approximation": "simple"}
    body = "".join(f"{v}\n" for v in values)
    path.write_text(f"# {json.dumps(head)}\neigenvalue\n{body}")
    return path


def write_aggregate(path):
    head = {"schema": "picardkit-aggregate-1", "failed_runs": []}
    rows = [("picard", "unconstrained", "iteration", i, 0.5 * 0.9**i,
             0.9**i, 2.0 * 0.9**i) for i in range(5)]
    body = "".join(",".join(str(v) for v in r) + "\n" for r in rows)
    path.write_text(f"# {json.dumps(head)}\n"
                    f"policy,mode,axis,x,p10,median,p90\n{body}")
    return path


@pytest.fixture(autouse=True)
def close_figures():
    yield
    plt.close("all")


def test_spectrum_command_writes_svg(tmp_path, capsys):
    p = write_spectrum(tmp_path / "s.csv", [0.5, 1.0, 2.0])
    out = tmp_path / "fig.svg"
    assert main_spectrum([str(p), "--out", str(out)]) == 0
    assert "wrote" in capsys.readouterr().out
    assert b"<svg" in out.read_bytes()[:400]


def test_convergence_command_writes_png(tmp_path):
    p = write_aggregate(tmp_path / "agg.csv")
    out = tmp_path / "fig.png"
    assert main_convergence([str(p), "--out", str(out)]) == 0
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_convergence_time_axis_flag(tmp_path):
    head = {"schema": "picardkit-aggregate-1"}
    rows = [("picard", "unconstrained", "time", 0.1 * i, 0.5, 1.0, 2.0)
            for i in range(4)]
    body = "".join(",".join(str(v) for v in r) + "\n" for r in rows)
    p = tmp_path / "agg.csv"
    p.write_text(f"# {json.dumps(head)}\n"
                 f"policy,mode,axis,x,p10,median,p90\n{body}")
    out = tmp_path / "fig.svg"
    assert main_convergence([str(p), "--axis", "time", "--out",
                             str(out)]) == 0
    assert out.exists()


def test_spectrum_command_rejects_bad_schema(tmp_path, capsys):
    p = tmp_path / "s.csv"
    p.write_text('# {"schema": "mystery-1"}\neigenvalue\n1.0\n')
    out = tmp_path / "fig.svg"
    assert main_spectrum([str(p), "--out", str(out)]) == 2
    assert "mystery-1" in capsys.readouterr().err
    assert not out.exists()


def test_spectrum_command_rejects_missing_file(tmp_path, capsys):
    out = tmp_path / "fig.svg"
    assert main_spectrum([str(tmp_path / "nope.csv"), "--out",
                          str(out)]) == 2
    assert capsys.readouterr().err
    assert not out.exists()


def test_convergence_command_rejects_descending_x_axis_choice(tmp_path):
    p = write_aggregate(tmp_path / "agg.csv")
    with pytest.raises(SystemExit) as exc:
        main_convergence([str(p), "--axis", "epochs", "--out",
                          str(tmp_path / "f.svg")])
    assert exc.value.code == 2


def test_convergence_command_rejects_spectrum_input(tmp_path, capsys):
    p = write_spectrum(tmp_path / "s.csv", [1.0, 2.0])
    out = tmp_path / "fig.svg"
    assert main_convergence([str(p), "--out", str(out)]) == 2
    assert not out.exists()
