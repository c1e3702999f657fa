import json
import math

import numpy as np
import pytest

from cmastab import __version__, cli, io
from cmastab.grid import Grid, PotentialField


def snapshot(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir()) if p.is_file()}


# --- io -------------------------------------------------------------------------------


def test_parse_config_text():
    text = """
    # comment line
    n = 3
    eps = 0.01   # trailing comment
    family = trig
    radii = [0.1, 0.2]
    check = true
    max-sweeps = 100
    """
    cfg = io.parse_config_text(text)
    assert cfg == {"n": 3, "eps": 0.01, "family": "trig", "radii": [0.1, 0.2], "check": True, "max_sweeps": 100}
    with pytest.raises(io.ConfigError):
        io.parse_config_text("just words")
    with pytest.raises(io.ConfigError):
        io.parse_config_text(" = 3")


def test_json_override():
    assert io.parse_json_override('{"k-max": 5}') == {"k_max": 5}
    with pytest.raises(io.ConfigError):
        io.parse_json_override("[1, 2]")
    with pytest.raises(io.ConfigError):
        io.parse_json_override("{bad")


def test_to_plain_non_finite():
    out = io.to_plain({"a": np.float64(np.inf), "b": [np.nan, -np.inf], "c": np.int64(3), "d": np.bool_(True)})
    assert out == {"a": "inf", "b": ["nan", "-inf"], "c": 3, "d": True}
    json.dumps(out, allow_nan=False)


def test_csv_roundtrip_exact(tmp_path):
    rows = [{"x": 0.1 + 0.2, "y": 1e-300, "k": 3, "ok": True}, {"x": math.pi, "y": -0.0, "k": 4, "ok": False}]
    io.write_csv(tmp_path / "t.csv", rows)
    back = io.read_csv(tmp_path / "t.csv")
    assert [float(r["x"]) for r in back] == [0.1 + 0.2, math.pi]
    assert float(back[0]["y"]) == 1e-300


def test_field_roundtrip(tmp_path):
    g = Grid(8)
    u = PotentialField(np.random.default_rng(0).normal(size=g.shape), g, "sup-normalized")
    data, side = io.write_field(tmp_path / "u", u, {"background": "flat"})
    assert data.stat().st_size == 8**4 * 8
    raw = np.frombuffer(data.read_bytes(), dtype="<f8")
    assert np.array_equal(raw, u.values.ravel())
    v, meta = io.read_field(tmp_path / "u")
    assert np.array_equal(v.values, u.values) and v.tag == "sup-normalized"
    assert meta["shape"] == [8, 8, 8, 8] and meta["background"] == "flat"
    assert meta["artifact_version"] == __version__


def test_output_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv(io.OUTPUT_ENV, str(tmp_path / "root"))
    assert io.output_dir(None, "solve") == tmp_path / "root" / "solve"
    assert io.output_dir(str(tmp_path / "x"), "solve") == tmp_path / "x"
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(io.ConfigError):
        io.output_dir(str(blocker / "sub"), "solve")


# --- cli ---------------------------------------------------------------------------------


def test_exponents_command(tmp_path, capsys):
    out = tmp_path / "exp"
    assert cli.run(["exponents", "--n", "2", "--eps", "0.1", "--output", str(out)]) == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["results"]["beta_limit"] == pytest.approx(2.4, abs=1e-12)
    assert s["artifact_version"] == __version__
    assert s["config"]["n"] == 2 and s["config"]["eps"] == 0.1 and s["config"]["command"] == "exponents"
    rows = io.read_csv(out / "beta_sequence.csv")
    assert len(rows) == 200 and set(rows[0]) == {"k", "beta", "delta", "alpha"}
    assert (out / "kappa.csv").exists()
    assert "2.4" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv",
    [
        ["exponents", "--n", "1"],
        ["exponents", "--eps", "-0.1"],
        ["sharpness", "--B", "1", "--D", "1.5"],
        ["solve", "--N", "7"],
        ["solve", "--background", "cosine", "--c", "2"],
        ["stability", "--theta-min", "0.01", "--theta-max", "0.1"],
        ["exponents", "--set-json", '{"bogus": 1}'],
        ["exponents", "--set-json", "{not json"],
        ["exponents", "--config", "/nonexistent/cfg.txt"],
        ["nosuchcommand"],
        ["exponents", "--unknown-flag"],
    ],
)
def test_validation_errors_exit_2(argv, tmp_path, capsys):
    assert cli.run(argv + ["--output", str(tmp_path / "o")] if argv[0] != "nosuchcommand" else argv) == 2
    # nothing was computed
    assert not (tmp_path / "o" / "summary.json").exists()


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 3\neps = 0.5\nk_max = 50\n")
    out = tmp_path / "o"
    assert cli.run(["exponents", "--config", str(cfg), "--eps", "0.25", "--set-json", '{"k_max": 60}',
                    "--output", str(out)]) == 0
    c = json.loads((out / "summary.json").read_text())["config"]
    assert (c["n"], c["eps"], c["k_max"]) == (3, 0.25, 60)


def test_nonconvergence_exit_3(tmp_path):
    out = tmp_path / "s"
    code = cli.run(["solve", "--N", "8", "--max-sweeps", "2", "--output", str(out)])
    assert code == 3
    s = json.loads((out / "summary.json").read_text())
    assert s["results"]["converged"] is False and s["results"]["sweeps"] == 2
    assert (out / "u.f64").exists()  # partial outputs kept


def test_stability_insufficient_records_exit_3(tmp_path):
    out = tmp_path / "st"
    assert cli.run(["stability", "--N", "8", "--max-sweeps", "2", "--output", str(out)]) == 3
    s = json.loads((out / "summary.json").read_text())
    assert "converged" in s["results"]["error"]


def test_solve_and_capacity_commands(tmp_path):
    out = tmp_path / "solve"
    assert cli.run(["solve", "--N", "8", "--background", "cosine", "--omega", "1.5", "--output", str(out)]) == 0
    u, meta = io.read_field(out / "u")
    assert u.values.max() == 0.0 and meta["background"] == "cosine-degenerate"
    out = tmp_path / "cap"
    assert cli.run(["capacity", "--N", "8", "--radii", "0,0.2,2", "--output", str(out)]) == 0
    rows = io.read_csv(out / "capacity.csv")
    caps = [float(r["capacity"]) for r in rows]
    assert caps[0] > 0 and caps == sorted(caps) and caps[-1] == pytest.approx(1.0, abs=1e-8)
    s = json.loads((out / "summary.json").read_text())
    assert "domination" in s["results"]


@pytest.mark.parametrize(
    "argv",
    [
        ["exponents", "--n", "3", "--eps", "0.01", "--chi", "2"],
        ["exponents", "--plot"],
        ["sharpness", "--count", "5"],
        ["stability", "--N", "8", "--family", "peak", "--seed", "3"],
        ["properties", "--N", "8", "--pairs", "2", "--mixed-samples", "1000"],
        ["egz", "--N", "8", "--seed", "1"],
    ],
)
def test_identical_config_gives_identical_bytes(argv, tmp_path):
    out = tmp_path / "run"
    assert cli.run(argv + ["--output", str(out)]) == 0
    first = snapshot(out)
    assert cli.run(argv + ["--output", str(out)]) == 0
    second = snapshot(out)
    assert first.keys() == second.keys() and "summary.json" in first
    assert first == second


def test_plot_flag_writes_png(tmp_path):
    out = tmp_path / "p"
    assert cli.run(["exponents", "--plot", "--output", str(out)]) == 0
    assert (out / "beta_sequence.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert json.loads((out / "summary.json").read_text())["config"]["plot"] is True
    out2 = tmp_path / "np"
    cli.run(["exponents", "--output", str(out2)])
    assert not list(out2.glob("*.png"))
