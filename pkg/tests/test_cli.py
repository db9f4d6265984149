import xml.etree.ElementTree as ET

import numpy as np
import pytest

from daecontract import cli, registry

SUBCOMMANDS = ["simulate", "certify", "certify-box", "measure", "gamma-bound", "observer", "list-examples"]


def run(argv, capsys):
    code = cli.run(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gamma_bound_prints_three(capsys):
    code, out, _ = run(["gamma-bound", "--alpha-bar", "2", "--lf", "1", "--lg", "0"], capsys)
    assert code == 0 and out == "3\n"


def test_certify_smex1(tmp_path, capsys):
    code, out, _ = run(["certify", "--example", "smex1", "--out", str(tmp_path)], capsys)
    assert code == 0
    mu = float(next(line for line in out.splitlines() if line.startswith("mu_max:")).split()[1])
    assert mu <= -0.5
    assert (tmp_path / "report.txt").read_text() == out
    assert (tmp_path / "mu.csv").read_text().startswith("trajectory_id,t,mu\n")


def test_certify_exam1_not_certified(tmp_path, capsys):
    code, out, _ = run(["certify", "--example", "exam1", "--gamma", "4", "--out", str(tmp_path)], capsys)
    assert code == 2
    assert "NotCertified" in out


def test_certify_gamma_auto(tmp_path, capsys):
    model = tmp_path / "m.dae"
    model.write_text("n=1 m=1\nf1 = -w1\ng1 = z1 - w1\n")
    code, out, _ = run(["certify", "--model", str(model), "--ic", "1:1", "--gamma", "auto", "--t-end", "1",
                        "--step", "0.01", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert "gamma: 1" in out and "gamma_ladder:" in out


def test_certify_box_smex2(tmp_path, capsys):
    code, out, _ = run(["certify-box", "--example", "smex2", "--out", str(tmp_path)], capsys)
    assert code == 0 and "coupling_norm_max" in out
    code, out, _ = run(["certify-box", "--example", "smex2", "--param", "k1=3", "--param", "k2=3",
                        "--grid", "21", "--out", str(tmp_path)], capsys)
    assert code == 2


def test_certify_box_explicit_box(tmp_path, capsys):
    code, out, _ = run(["certify-box", "--example", "smex2", "--box", "1,-1,-pi/2:pi/2,0.95:1.05", "--grid", "11",
                        "--beta-min", "1.1", "--out", str(tmp_path)], capsys)
    assert code == 0 and "grid_points: 121" in out


def test_simulate_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        code, _, _ = run(["simulate", "--example", "smex1", "--t-end", "0.5", "--out", str(d), "--plot"], capsys)
        assert code == 0
    for name in ("trajectory_0.csv", "trajectory_1.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ET.parse(a / "trajectory_0.svg")
    header = (a / "trajectory_0.csv").read_text().splitlines()[0]
    assert header == "t,w1,w2,z1"


def test_simulate_model_with_param_override(tmp_path, capsys):
    model = tmp_path / "decay.dae"
    model.write_text("n=1 m=1\nparam k = 1\nf1 = -k*w1\ng1 = z1 - 2*w1\n")
    code, _, _ = run(["simulate", "--model", str(model), "--param", "k=2", "--w0", "1", "--t-end", "1",
                      "--out", str(tmp_path)], capsys)
    assert code == 0
    data = np.loadtxt(tmp_path / "trajectory.csv", delimiter=",", skiprows=1)
    assert data[-1, 1] == pytest.approx(np.exp(-2.0), rel=1e-9)
    assert data[-1, 2] == pytest.approx(2 * np.exp(-2.0), rel=1e-9)


def test_measure(tmp_path, capsys):
    path = tmp_path / "m.csv"
    path.write_text("-2,1\n0,-3\n")
    code, out, _ = run(["measure", "--matrix", str(path), "--norm", "1"], capsys)
    assert code == 0 and float(out) == -2.0
    code, out, _ = run(["measure", "--matrix", str(path), "--norm", "inf"], capsys)
    assert float(out) == -1.0
    code, out, _ = run(["measure", "--matrix", str(path)], capsys)
    assert out.count("mu_") == 3


def test_observer_command(tmp_path, capsys):
    code, out, _ = run(["observer", "--t-end", "2", "--out", str(tmp_path), "--plot"], capsys)
    assert code == 0 and "fitted decay" in out
    assert (tmp_path / "error.csv").read_text().startswith("t,err_norm,e1,e2\n")
    assert (tmp_path / "plant.csv").exists() and (tmp_path / "observer.csv").exists()
    ET.parse(tmp_path / "error.svg")


def test_list_examples(capsys):
    code, out, _ = run(["list-examples"], capsys)
    assert code == 0
    for id in registry.EXAMPLE_IDS:
        assert id in out


@pytest.mark.parametrize("argv", [
    ["simulate"],  # no source
    ["simulate", "--example", "exam1", "--model", "x.dae"],
    ["simulate", "--model", "/nonexistent/file.dae", "--w0", "1"],
    ["simulate", "--example", "exam1", "--param", "a=1"],
    ["certify", "--example", "smex1", "--norm", "3"],
    ["gamma-bound", "--alpha-bar", "0", "--lf", "1", "--lg", "0"],
    ["bogus"],
])
def test_errors_exit_one(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 1
    assert err


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help_lists_flags(sub, capsys):
    parser = cli.build_parser()
    subparser = parser._subparsers._group_actions[0].choices[sub]
    code, out, _ = run([sub, "--help"], capsys)
    assert code == 0
    for action in subparser._actions:
        for flag in action.option_strings:
            assert flag in out
