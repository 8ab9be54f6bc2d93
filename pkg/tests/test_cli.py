import csv
import io
import json
import math

import numpy as np
import pytest

from mazer.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, algebra_samples, main
from mazer.core import SystemConfig
from mazer.scattering import rabi_reference


def table(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def footer(text):
    return dict(l[2:].split("=", 1) for l in text.splitlines() if l.startswith("# "))


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestScatter:
    def test_header_and_blocking(self, capsys):
        code, out, _ = run(capsys, "scatter", "--delta", "5", "--L", "2", "--k-min", "0.1",
                           "--k-max", "2.2", "--k-steps", "12")
        assert code == EXIT_OK
        assert out.splitlines()[0] == "k,E,P_emission,R_a,T_a,R_b,T_b,b_open"
        rows = table(out)
        assert len(rows) == 12
        assert all(float(r["P_emission"]) == 0.0 for r in rows)
        assert all(r["b_open"] == "false" for r in rows)

    def test_hot_atoms(self, capsys):
        code, out, _ = run(capsys, "scatter", "--delta", "0", "--L", "200", "--k-min", "50",
                           "--k-max", "100", "--k-steps", "6")
        cfg = SystemConfig(L=200.0)
        for r in table(out):
            ref = rabi_reference(cfg, float(r["k"]))
            assert float(r["P_emission"]) == pytest.approx(ref, rel=0.01)

    def test_free_atom(self, capsys):
        _, out, _ = run(capsys, "scatter", "--g", "0", "--k-min", "0.5", "--k-max", "3")
        assert all(float(r["T_a"]) == pytest.approx(1.0, abs=1e-14) for r in table(out))

    def test_full_precision_and_determinism(self, capsys, monkeypatch):
        argv = ("scatter", "--delta", "-1", "--k-min", "0.3", "--k-max", "2", "--k-steps", "30")
        _, first, _ = run(capsys, *argv)
        monkeypatch.setenv("MAZER_THREADS", "3")
        _, second, _ = run(capsys, *argv)
        assert first == second
        rows = table(first)
        assert float(rows[7]["k"]) == np.linspace(0.3, 2.0, 30)[7]

    def test_json(self, capsys):
        _, out, _ = run(capsys, "scatter", "--k-min", "1", "--k-max", "2", "--k-steps", "3",
                        "--format", "json")
        rows = json.loads(out)["rows"]
        assert [r["k"] for r in rows] == [1.0, 1.5, 2.0]

    def test_staircase_file(self, capsys, tmp_path):
        f = tmp_path / "steps.txt"
        f.write_text("0.5 0.3\n1.0 1.0\n0.5 0.3\n")
        code, out, _ = run(capsys, "scatter", "--profile", str(f), "--k-min", "1", "--k-max", "2")
        assert code == EXIT_OK
        for r in table(out):
            total = sum(float(r[c]) for c in ("R_a", "T_a", "R_b", "T_b"))
            assert total == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("argv", [
        ("--k-min", "2", "--k-max", "1"),
        ("--k-min", "-1", "--k-max", "1"),
        ("--k-min", "1", "--k-max", "2", "--m", "0"),
        ("--k-min", "1", "--k-max", "2", "--profile", "no-such-file"),
        ("--k-min", "1", "--k-max", "2", "--bogus"),
        ("--k-min", "1"),
    ])
    def test_validation_errors_leave_no_file(self, capsys, tmp_path, argv):
        out = tmp_path / "out.csv"
        code, _, err = run(capsys, "scatter", *argv, "--out", str(out))
        assert code == EXIT_VALIDATION
        assert err
        assert not out.exists()
        assert list(tmp_path.iterdir()) == []

    def test_writes_file(self, capsys, tmp_path):
        out = tmp_path / "out.csv"
        assert run(capsys, "scatter", "--k-min", "1", "--k-max", "2", "--out", str(out))[0] == 0
        assert len(table(out.read_text())) == 50


class TestCrosscheck:
    def test_resonant_cell(self, capsys):
        code, out, _ = run(capsys, "crosscheck", "--sigma-z", "4", "--start-widths", "5",
                           "--points-per-wavelength", "16")
        assert code == EXIT_OK
        assert float(footer(out)["max_gap"]) < 1e-3

    def test_acceleration_cell(self, capsys):
        code, out, _ = run(capsys, "wavepacket", "--delta", "-5", "--sigma-z", "4",
                           "--start-widths", "5", "--points-per-wavelength", "16")
        row = table(out)[0]
        assert code == EXIT_OK
        assert float(row["mean_k_b_transmitted"]) == pytest.approx(math.sqrt(4 + 5), rel=0.01)
        assert float(row["emission_k_expected"]) == pytest.approx(3.0)

    def test_coarse_grid_names_cell(self, capsys):
        code, _, err = run(capsys, "crosscheck", "--delta", "0", "--k0", "1", "6",
                           "--sigma-z", "4", "--grid-points", "256")
        assert code == EXIT_NUMERICAL
        assert "under-resolved" in err and "k0=" in err

    def test_gap_above_tolerance_fails(self, capsys):
        code, out, err = run(capsys, "crosscheck", "--sigma-z", "4", "--start-widths", "5",
                             "--points-per-wavelength", "16", "--tol", "1e-7")
        assert code == EXIT_NUMERICAL
        assert "exceeds tol" in err and table(out)

    def test_bad_packet(self, capsys):
        code, _, err = run(capsys, "crosscheck", "--sigma-z", "0.1")
        assert code == EXIT_VALIDATION and "sigma" in err


class TestAdiabatic:
    def test_slope_and_persistent_gap(self, capsys):
        code, out, _ = run(capsys, "adiabatic", "--delta", "2", "--w-halvings", "3")
        rows = table(out)
        assert code == EXIT_OK and len(rows) == 4
        assert float(footer(out)["loglog_slope"]) == pytest.approx(-1.0, abs=0.05)
        assert min(float(r["gap"]) for r in rows) > 0.01

    def test_resonant_gap(self, capsys):
        _, out, _ = run(capsys, "adiabatic", "--delta", "0", "--w-halvings", "1")
        assert all(float(r["gap"]) < 1e-3 for r in table(out))
        assert "loglog_slope" not in footer(out)

    def test_published_sign_diagnostic(self, capsys):
        code, out, err = run(capsys, "adiabatic", "--delta", "0", "--w-halvings", "0",
                             "--variant", "as-published")
        assert code == EXIT_OK
        assert "reversed-velocity" in err
        assert "reversed_velocity" in footer(out)

    def test_rejects_bad_width(self, capsys):
        assert run(capsys, "adiabatic", "--w-start", "0")[0] == EXIT_VALIDATION

    def test_rejects_bad_variant(self, capsys):
        assert run(capsys, "adiabatic", "--variant", "fixed")[0] == EXIT_VALIDATION


class TestAlgebraCheck:
    def test_passes(self, capsys):
        code, out, _ = run(capsys, "algebra-check", "--samples", "40")
        rows = table(out)
        assert code == EXIT_OK
        assert {r["check"] for r in rows} >= {"sigma_dag_sigma", "a_dag_a", "coupling",
                                               "ground_decoupling"}
        assert all(r["pass"] == "true" for r in rows)

    def test_samples_cover_range(self):
        samples = algebra_samples(100)
        assert len(set(samples)) == 100
        assert {n for _, n in samples} == set(range(11))
        assert all(0 <= t <= math.pi / 2 for t, _ in samples)


def test_console_script_entry_point():
    from importlib.metadata import entry_points
    eps = {e.name: e.value for e in entry_points(group="console_scripts")}
    assert eps.get("mazer") == "mazer.cli:main"
