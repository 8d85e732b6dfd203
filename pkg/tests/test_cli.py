import csv
import json
import subprocess
import sys

import pytest

from symplectic_fluid.cli import EXIT_FAIL, EXIT_INPUT, EXIT_PASS, main
from symplectic_fluid.cli.archive import MANIFEST, payload_name, read_manifest
from symplectic_fluid.cli.main import parse_suites, parse_times, InputError
from symplectic_fluid.fluid import BUDGET_COLUMNS
from symplectic_fluid.hierarchy import HIERARCHY_COLUMNS


@pytest.fixture(scope="module")
def beltrami_archive(tmp_path_factory):
    out = tmp_path_factory.mktemp("beltrami")
    code = main(["catalog", "decaying-beltrami", "--A", "1", "--B", "1", "--C", "1", "--lambda", "1",
                 "--nu", "0.01", "--n", "16", "--out", str(out)])
    assert code == EXIT_PASS
    return out


@pytest.fixture(scope="module")
def shear_archive(tmp_path_factory):
    out = tmp_path_factory.mktemp("shear")
    code = main(["catalog", "shear-euler", "--profile", "sin(y)", "--phi", "sin(z)", "--n", "16", "--out", str(out)])
    assert code == EXIT_PASS
    return out


def load(path):
    return json.loads(path.read_text())


class TestArguments:
    def test_times(self):
        assert parse_times("0:1:5") == (0.0, 0.25, 0.5, 0.75, 1.0)
        assert parse_times("0.1,0.2") == (0.1, 0.2)
        with pytest.raises(InputError):
            parse_times("0:1")

    def test_suites(self):
        assert parse_suites("3,1,1") == (1, 3)
        for bad in ("7", "", "a"):
            with pytest.raises(InputError):
                parse_suites(bad)

    def test_help_and_unknown_flag(self, capsys):
        assert main(["--help"]) == EXIT_PASS
        assert main(["verify"]) == EXIT_INPUT
        assert main(["catalog", "decaying-beltrami", "--out", "x", "--bogus"]) == EXIT_INPUT

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "symplectic_fluid.cli.main", "--help"], capture_output=True, text=True)
        assert proc.returncode == 0
        for name in ("catalog", "simulate", "verify", "budget", "hierarchy"):
            assert name in proc.stdout


class TestCatalog:
    def test_beltrami_archive_has_five_slices(self, beltrami_archive):
        manifest = read_manifest(beltrami_archive)
        assert manifest["grid"]["n_time"] == 5
        assert manifest["nu"] == 0.01
        assert manifest["provenance"]["catalog"]["family"] == "decaying_beltrami"

    def test_shear_archive_is_inviscid_and_advected(self, shear_archive):
        manifest = read_manifest(shear_archive)
        assert manifest["nu"] == 0.0 and manifest["phi_advected"]

    def test_non_integer_eigenvalue(self, tmp_path, capsys):
        code = main(["catalog", "decaying-beltrami", "--lambda", "1.5", "--n", "8", "--out", str(tmp_path)])
        assert code == EXIT_INPUT
        assert "non-periodic eigenvalue" in capsys.readouterr().err

    def test_bad_profile_expression(self, tmp_path, capsys):
        code = main(["catalog", "shear-euler", "--profile", "sin(y", "--n", "8", "--out", str(tmp_path)])
        assert code == EXIT_INPUT
        assert "position 5" in capsys.readouterr().err


class TestVerify:
    def test_beltrami_structure_suites_pass(self, beltrami_archive, tmp_path):
        out = tmp_path / "report.json"
        assert main(["verify", str(beltrami_archive), "--suites", "1,2,3", "--out", str(out)]) == EXIT_PASS
        doc = load(out)
        assert doc["passed"] and doc["suites"] == [1, 2, 3]
        for report in doc["reports"]:
            for check in report["checks"]:
                assert {"name", "anchor", "residual_linf", "residual_l2", "tolerance", "masked_fraction", "verdict"} <= set(check)

    def test_shear_inviscid_suites_fail_only_on_the_literal_sign(self, shear_archive, tmp_path):
        out = tmp_path / "report.json"
        assert main(["verify", str(shear_archive), "--suites", "4,6", "--out", str(out)]) == EXIT_FAIL
        doc = load(out)
        failing = {(r["suite"], c["name"]) for r in doc["reports"] for c in r["checks"] if c["verdict"] != "pass"}
        assert failing == {("inviscid", "suspension_hamiltonian"), ("level_symmetry", "suspension_bracket_hamiltonian")}
        by_name = {(r["suite"], c["name"]): c for r in doc["reports"] for c in r["checks"]}
        assert by_name[("inviscid", "suspension_hamiltonian_minus_phi")]["verdict"] == "pass"
        assert by_name[("level_symmetry", "suspension_bracket_hamiltonian_negated")]["verdict"] == "pass"

    def test_inviscid_suites_refuse_viscous_scene(self, beltrami_archive, capsys):
        assert main(["verify", str(beltrami_archive), "--suites", "4"]) == EXIT_INPUT
        assert "inviscid" in capsys.readouterr().err

    def test_random_hierarchy_suite(self, beltrami_archive):
        assert main(["verify", str(beltrami_archive), "--suites", "5", "--seed", "3"]) == EXIT_PASS

    def test_corrupt_payload_is_an_input_error(self, shear_archive, tmp_path, capsys):
        import shutil

        broken = tmp_path / "broken"
        shutil.copytree(shear_archive, broken)
        path = broken / payload_name("velocity", 0, 0)
        raw = bytearray(path.read_bytes())
        raw[0] ^= 0xFF
        path.write_bytes(bytes(raw))
        assert main(["verify", str(broken)]) == EXIT_INPUT
        assert "checksum" in capsys.readouterr().err

    def test_viscosity_flag_must_agree(self, beltrami_archive):
        assert main(["verify", str(beltrami_archive), "--nu", "0.5"]) == EXIT_INPUT

    def test_reports_are_deterministic(self, beltrami_archive, tmp_path):
        texts = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            main(["verify", str(beltrami_archive), "--suites", "1,2", "--out", str(out)])
            doc = load(out)
            doc.pop("timestamp")
            texts.append(json.dumps(doc, sort_keys=True))
        assert texts[0] == texts[1]

    def test_tolerance_override_recorded(self, beltrami_archive, tmp_path):
        out = tmp_path / "r.json"
        assert main(["verify", str(beltrami_archive), "--suites", "1", "--tol", "1e-30", "--out", str(out)]) == EXIT_FAIL
        assert load(out)["tolerance_override"] == 1e-30


class TestBudget:
    def test_beltrami_budget_csv(self, beltrami_archive, tmp_path):
        csv_path, out = tmp_path / "budget.csv", tmp_path / "budget.json"
        assert main(["budget", str(beltrami_archive), "--csv", str(csv_path), "--out", str(out)]) == EXIT_PASS
        rows = list(csv.reader(csv_path.open()))
        assert tuple(rows[0]) == BUDGET_COLUMNS
        assert len(rows) == 6
        doc = load(out)
        checks = {c["name"]: c for c in doc["reports"][0]["checks"]}
        assert checks["decay_rate"]["detail"]["fitted"] == pytest.approx(-0.02, rel=1e-6)

    def test_inviscid_budget_conserves(self, shear_archive):
        assert main(["budget", str(shear_archive)]) == EXIT_PASS

    def test_too_few_slices(self, tmp_path, capsys):
        main(["catalog", "decaying-beltrami", "--n", "8", "--times", "0,0.1", "--out", str(tmp_path)])
        assert main(["budget", str(tmp_path)]) == EXIT_INPUT
        assert "3 time slices" in capsys.readouterr().err


class TestHierarchy:
    def test_time_hierarchy_on_shear(self, shear_archive, tmp_path):
        out, table = tmp_path / "h.json", tmp_path / "h.csv"
        main(["hierarchy", str(shear_archive), "--f", "t", "--k", "2", "--csv", str(table), "--out", str(out)])
        doc = load(out)
        hier = doc["reports"][0]
        assert hier["suite"] == "hierarchy" and hier["passed"]
        rows = list(csv.reader(table.open()))
        assert tuple(rows[0]) == HIERARCHY_COLUMNS and len(rows) == 4

    def test_phi_hierarchy_entry0_is_reversed_suspension(self, shear_archive, tmp_path):
        out = tmp_path / "h.json"
        main(["hierarchy", str(shear_archive), "--f", "phi", "--k", "1", "--out", str(out)])
        checks = {c["name"]: c for c in load(out)["reports"][0]["checks"]}
        entry0 = checks["entry0_is_suspension"]
        # X_phi solves i(X) Omega = -d phi, which is -(d/dt + v)
        assert entry0["residual_linf"] == pytest.approx(2.0, rel=1e-12)
        assert entry0["detail"]["residual_against_minus_suspension"] <= 1e-12

    def test_expression_function(self, beltrami_archive):
        assert main(["hierarchy", str(beltrami_archive), "--f", "sin(x + t) * cos(y)", "--k", "1"]) == EXIT_PASS

    def test_malformed_expression(self, beltrami_archive, capsys):
        assert main(["hierarchy", str(beltrami_archive), "--f", "sin(x +"]) == EXIT_INPUT
        assert "parse error" in capsys.readouterr().err

    def test_order_must_be_positive(self, beltrami_archive):
        assert main(["hierarchy", str(beltrami_archive), "--k", "0"]) == EXIT_INPUT


class TestSimulate:
    def test_default_scene_verifies(self, tmp_path):
        arch = tmp_path / "sim"
        assert main(["simulate", "--n", "16", "--out", str(arch)]) == EXIT_PASS
        assert (arch / MANIFEST).exists()
        assert read_manifest(arch)["provenance"]["kind"] == "solver"
        assert main(["verify", str(arch), "--suites", "1,2,3"]) == EXIT_PASS

    def test_config_file_and_overrides(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n_space": 8, "dt": 0.01, "t_end": 0.04, "nu": 0.05}))
        arch = tmp_path / "sim"
        assert main(["simulate", "--config", str(cfg), "--ic", "taylor_green", "--no-phi", "--out", str(arch)]) == EXIT_PASS
        manifest = read_manifest(arch)
        assert manifest["grid"]["n_space"] == 8 and not manifest["phi_advected"]

    def test_unreadable_config(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path / "o")]) == EXIT_INPUT

    def test_cfl_violation_is_input_error(self, tmp_path, capsys):
        code = main(["simulate", "--n", "16", "--dt", "0.5", "--t-end", "2", "--ic", "abc", "--out", str(tmp_path / "o")])
        assert code == EXIT_INPUT
        assert "CFL" in capsys.readouterr().err
