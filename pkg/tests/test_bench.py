import csv
import re
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from cubicqn import SolverConfig, adaptive_inexact_crn
from cubicqn.bench import (
    CSV_COLUMNS,
    ConfigError,
    emit_plot_svg,
    emit_trace_csv,
    load_config,
    parse_config,
    read_trace_csv,
    run_experiment,
)
from cubicqn.bench.cli import main
from cubicqn.solvers import IterationRecord, SolverTrace
from conftest import fixture_problem, fixture_start

ROOT = Path(__file__).resolve().parent.parent
GOLDEN = Path(__file__).resolve().parent / "golden" / "cubic_lbfgs_fixture_30.csv"
SVG_NS = "{http://www.w3.org/2000/svg}"


def write(tmp_path, text, name="exp.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


QUAD_GD = """
out_dir = "out"
[problem]
source = "quadratic"
diag = [1.0, 2.0, 4.0]
b = [1.0, 1.0, 1.0]
[stop]
max_iters = 30
gtol = 1e-12
[[methods]]
name = "gd"
kind = "gd"
"""


def test_gd_on_quadratic_csv_decreasing(tmp_path):
    summary = run_experiment(load_config(write(tmp_path, QUAD_GD)))
    rows = read_trace_csv(tmp_path / "out" / "gd.csv")
    f = [r["f"] for r in rows]
    assert len(f) == 31 and all(b < a for a, b in zip(f, f[1:]))
    assert summary.ok and summary.fstar == min(f)
    assert (tmp_path / "out" / "gap_vs_iteration.svg").exists()


def test_empty_trace_csv_is_header_only(tmp_path):
    emit_trace_csv(SolverTrace("x", 2), tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_bytes() == (",".join(CSV_COLUMNS) + "\r\n").encode()


def test_record_round_trips(tmp_path):
    rec = IterationRecord(3, 0.1 + 0.2, 1e-300, 2.0**-30, 4, 1 / 3, 17, 250, 0)
    tr = SolverTrace("x", 2, [rec])
    emit_trace_csv(tr, tmp_path / "r.csv")
    (row,) = read_trace_csv(tmp_path / "r.csv")
    for c in CSV_COLUMNS:
        assert row[c] == getattr(rec, c)
    assert "0.30000000000000004" in (tmp_path / "r.csv").read_text()


def test_fixture_trace_matches_golden(tmp_path):
    _, tr = adaptive_inexact_crn(fixture_problem(), SolverConfig(max_iters=30, gtol=0.0), fixture_start())
    emit_trace_csv(tr, tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_bytes() == GOLDEN.read_bytes()


def _trace(fs):
    return SolverTrace("m", 1, [IterationRecord(i, f, 0.0, 0.0, 0, 0.0, i, 2 * i, 0) for i, f in enumerate(fs)])


def test_svg_single_trace_and_floor(tmp_path):
    emit_plot_svg({"only": _trace([1.0, 0.5, 0.0])}, "iteration", tmp_path / "p.svg", fstar=0.0)
    root = ET.parse(tmp_path / "p.svg").getroot()
    assert root.tag == SVG_NS + "svg" and root.get("version") == "1.1"
    assert (root.get("width"), root.get("height")) == ("800", "600")
    lines = root.findall(SVG_NS + "polyline")
    assert len(lines) == 1
    text = (tmp_path / "p.svg").read_text()
    # the zero gap is clamped to the 1e-16 floor, which becomes the bottom tick
    assert ">1e-16<" in text
    ys = [float(p.split(",")[1]) for p in lines[0].get("points").split()]
    assert ys[-1] == pytest.approx(600 - 60)


def test_svg_axes_and_escaping(tmp_path):
    traces = {"a<b": _trace([3.0, 2.0]), "c&d": _trace([5.0, 1.0, 0.5])}
    emit_plot_svg(traces, "hvp_equiv", tmp_path / "p.svg", fstar=0.25)
    root = ET.parse(tmp_path / "p.svg").getroot()
    titles = [t.text for t in root.iter(SVG_NS + "title")]
    assert titles == ["a<b", "c&d"]
    with pytest.raises(ValueError):
        emit_plot_svg(traces, "time", tmp_path / "q.svg", 0.0)


@pytest.mark.parametrize("snippet,message", [
    ("", "at least one"),
    ('[[methods]]\nname = "a"\nkind = "nope"\n', "kind"),
    ('[[methods]]\nname = "a b"\nkind = "gd"\n', "name"),
    ('[[methods]]\nname = "a"\nkind = "gd"\n[[methods]]\nname = "a"\nkind = "gd"\n', "unique"),
    ('[[methods]]\nname = "a"\nkind = "gd"\nhessian = "exact"\n', "unknown keys"),
    ('[[methods]]\nname = "a"\nkind = "cubic"\nhessian = "bogus"\n', "hessian"),
    ('[[methods]]\nname = "a"\nkind = "cubic"\nmemory = "ten"\n', "memory"),
    ('bogus = 1\n[[methods]]\nname = "a"\nkind = "gd"\n', "unknown keys"),
    ('[problem]\nsource = "libsvm"\npath = "missing.txt"\n[[methods]]\nname = "a"\nkind = "gd"\n', "not found"),
    ('[problem]\nflip = 0.9\n[[methods]]\nname = "a"\nkind = "gd"\n', "flip"),
    ('[start]\nkind = "random"\n[[methods]]\nname = "a"\nkind = "gd"\n', "start.kind"),
])
def test_config_errors(tmp_path, snippet, message):
    with pytest.raises(ConfigError, match=message):
        load_config(write(tmp_path, snippet))


def test_config_bad_toml_and_missing(tmp_path):
    with pytest.raises(ConfigError, match="invalid TOML"):
        load_config(write(tmp_path, "x = = 1"))
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "none.toml")


def test_invalid_solver_parameter_is_config_error(tmp_path):
    cfg = load_config(write(tmp_path, '[[methods]]\nname = "a"\nkind = "cubic"\nM = -1.0\n'))
    with pytest.raises(ConfigError, match="M must be positive"):
        run_experiment(cfg, write=False)


def test_libsvm_source(tmp_path):
    (tmp_path / "d.txt").write_text("+1 1:1 2:0.5\n-1 2:1\n+1 1:0.2 3:1\n-1 3:-1\n")
    cfg = load_config(write(tmp_path, '[problem]\nsource = "libsvm"\npath = "d.txt"\n'
                                      '[stop]\nmax_iters = 5\n[[methods]]\nname = "gd"\nkind = "gd"\n'))
    summary = run_experiment(cfg, write=False)
    assert summary.ok and summary["gd"].iterations == 5


def test_solver_error_does_not_abort_siblings(tmp_path):
    text = """
out_dir = "o"
[problem]
n = 60
d = 5
flip = 0.1
[start]
kind = "ones"
scale = 3.0
[stop]
max_iters = 20
[[methods]]
name = "broken"
kind = "cubic"
M = 1e-9
max_inner = 1
[[methods]]
name = "gd"
kind = "gd"
"""
    summary = run_experiment(load_config(write(tmp_path, text)))
    assert not summary["broken"].ok and summary["gd"].ok
    assert summary["gd"].iterations == 20
    assert (tmp_path / "o" / "broken.csv").exists()
    assert "broken" in summary.table()


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["check"]) == 0
    assert main(["run", str(tmp_path / "missing.toml")]) == 2
    assert main(["run"]) == 2
    cfg = write(tmp_path, QUAD_GD)
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "o2"), "--max-iters", "4"]) == 0
    rows = read_trace_csv(tmp_path / "o2" / "gd.csv")
    assert len(rows) == 5
    out = capsys.readouterr().out
    assert "gd.csv" in out and "gap_vs_hvp_equiv.svg" in out
    assert main(["compare", str(cfg)]) == 0
    assert re.search(r"^gd\s+gd\s+30", capsys.readouterr().out, re.M)
    bad = write(tmp_path, '[problem]\nn = 30\nd = 3\n[[methods]]\nname = "x"\nkind = "cubic"\nM = 1e-9\nmax_inner = 0\n'
                '[start]\nkind = "ones"\nscale = 3.0\n', "bad.toml")
    assert main(["run", str(bad)]) == 1


def test_fixture_config_runs(tmp_path):
    assert main(["run", str(ROOT / "configs" / "fixture.toml"), "--out-dir", str(tmp_path), "--max-iters", "5"]) == 0
    cfg = load_config(ROOT / "configs" / "fixture.toml")
    for m in cfg.methods:
        assert (tmp_path / f"{m.name}.csv").exists()
    for axis in ("iteration", "hvp_equiv"):
        root = ET.parse(tmp_path / f"gap_vs_{axis}.svg").getroot()
        assert len(root.findall(SVG_NS + "polyline")) == len(cfg.methods)
    with open(tmp_path / "summary.csv", newline="") as fh:
        assert len(list(csv.DictReader(fh))) == len(cfg.methods)
