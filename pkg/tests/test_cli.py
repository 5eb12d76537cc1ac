import subprocess
import sys

import pytest

from upwindsbp import cli
from upwindsbp.operators import DerivationFailedError


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# {{{ exit codes


def test_no_command_is_usage_error(capsys):
    assert run(capsys)[0] == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "upwindsbp", "derive-operator", "--order", "2",
                           "--nodes", "8"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("kind: periodic\norder: 2\nnodes: 8\n")


@pytest.mark.parametrize("argv", [
    ["convergence", "--splitting", "roe"],
    ["convergence", "--order"],
    ["convergence", "--mode", "hp"],
    ["simulate", "--case", "taylor_green"],
    ["spectrum", "--N", "1"],
    ["derive-operator", "--order", "9", "--nodes", "20"],
    ["derive-operator", "--nodes", "20"],
    ["verify-operators", "--table", "/nonexistent/table.txt"],
    ["bogus"],
])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert "usage error" in err


def test_verify_builtins(capsys):
    code, out, _ = run(capsys, "verify-operators")
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 17 and all(line.startswith("PASS ") for line in lines)


def test_verify_corrupted_table(capsys, tmp_path):
    good = tmp_path / "good.txt"
    assert run(capsys, "derive-operator", "--order", "1", "--nodes", "6", "-o", str(good))[0] == 0
    code, out, _ = run(capsys, "verify-operators", "--table", str(good))
    assert code == 0 and f"PASS {good}" in out
    bad = tmp_path / "bad.txt"
    bad.write_text(good.read_text().replace("0 1 6.0", "0 1 6.5", 1))
    code, out, _ = run(capsys, "verify-operators", "--table", str(bad))
    assert code == 1
    assert "sbp_residual" in out


def test_derivation_failure_exits_one(capsys, monkeypatch):
    def failing(order, n, xmin, xmax):
        raise DerivationFailedError(order, 0.5)

    monkeypatch.setattr(cli, "derive_periodic_upwind", failing)
    code, out, _ = run(capsys, "derive-operator", "--order", "3", "--nodes", "20")
    assert code == 1
    assert "5.000e-01" in out


# }}}


# {{{ spectrum


def _summary(out):
    return dict(line.split(",") for line in out.splitlines())


def test_spectrum_burgers(capsys, tmp_path):
    path = tmp_path / "sp.csv"
    code, out, _ = run(capsys, "spectrum", "--equation", "burgers", "--order", "2", "--K", "1",
                       "--N", "13", "-o", str(path))
    assert code == 0
    s = _summary(out)
    assert float(s["max_real_part"]) <= 1e-12 * float(s["scale"])
    lines = path.read_text().splitlines()
    assert lines[0] == "re,im" and len(lines) == 13 + 2
    assert lines[-1] == f"# max_real_part,{s['max_real_part']}"


def test_spectrum_advection(capsys):
    code, out, _ = run(capsys, "spectrum", "--equation", "advection", "--operator", "periodic",
                       "--order", "2", "--K", "1", "--N", "64")
    assert code == 0
    assert float(_summary(out)["max_real_part"]) <= 1e-10


def test_spectrum_over_cap(capsys):
    code, out, _ = run(capsys, "spectrum", "--equation", "advection", "--operator", "periodic",
                       "--order", "2", "--K", "1", "--N", "5000")
    assert code == 1
    assert "cap" in out


# }}}


# {{{ convergence and configuration


def test_convergence_csv_matches_stdout_and_is_reproducible(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["convergence", "--case", "advection", "--order", "2", "--K", "1", "2", "--N", "20"]
    code, out, _ = run(capsys, *argv, "-o", str(a))
    assert code == 0
    assert run(capsys, *argv, "-o", str(b), "--jobs", "1")[0] == 0
    assert a.read_bytes() == b.read_bytes()
    rows = a.read_text().splitlines()
    assert rows[0] == "case,splitting,order,K,N,dofs,l2_error,eoc"
    assert len(rows) == 3
    for row in rows[1:]:
        err = row.split(",")[6]
        assert err in out
    assert float(rows[1].split(",")[6]) == pytest.approx(0.346, rel=0.02)


def test_config_file_and_flag_precedence(capsys, tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# convergence defaults\ncase = advection\norders = 2\nK = 1, 2\nN = 20\n"
                    "t_end = 0.5\njobs = 1\n")
    out_a = tmp_path / "a.csv"
    assert run(capsys, "convergence", "--config", str(conf), "-o", str(out_a))[0] == 0
    rows = out_a.read_text().splitlines()[1:]
    assert [r.split(",")[3:5] for r in rows] == [["1", "20"], ["2", "20"]]
    out_b = tmp_path / "b.csv"
    assert run(capsys, "convergence", "--config", str(conf), "--N", "10", "-o", str(out_b))[0] == 0
    rows = out_b.read_text().splitlines()[1:]
    assert [r.split(",")[3:5] for r in rows] == [["1", "10"], ["2", "10"]]


@pytest.mark.parametrize("text", ["colour = red\n", "N = twenty\n", "mode = hp\n", "no equals sign\n"])
def test_bad_config(capsys, tmp_path, text):
    conf = tmp_path / "bad.conf"
    conf.write_text(text)
    assert run(capsys, "convergence", "--config", str(conf))[0] == 2


# }}}


# {{{ simulate


def test_simulate_khi_short(capsys, tmp_path):
    path = tmp_path / "khi.csv"
    code, out, _ = run(capsys, "simulate", "--case", "khi", "--order", "2", "--K", "1", "--N", "8",
                       "--t-end", "0.1", "-o", str(path), "--jobs", "1")
    assert code == 0
    text = path.read_text()
    assert text == out
    assert text.splitlines()[1] == "van_leer_haenel,2,1,8,0.1,false,,,"


def test_simulate_vortex_short(capsys, tmp_path):
    path = tmp_path / "vortex.csv"
    folder = tmp_path / "functionals"
    code, out, _ = run(capsys, "simulate", "--case", "vortex", "--operator", "periodic", "--K", "1",
                       "--N", "16", "--t-end", "0.3", "--log-every", "2", "-o", str(path),
                       "--functionals", str(folder))
    assert code == 0
    assert out.startswith("final_time,0.3,crashed,false\n")
    rows = path.read_text().splitlines()
    assert rows[0] == "t,value"
    times = [float(r.split(",")[0]) for r in rows[1:]]
    assert times == sorted(times) and len(set(times)) == len(times)
    assert (folder / "kinetic_energy.csv").read_text().startswith("t,value\n")
    assert (folder / "density_error.csv").read_text().splitlines()[1:] == rows[1:]


# }}}
