import json
import math
import re

import numpy as np
import pytest

from divalg.cli import TASK_NAMES, build_parser, main, preset_tasks
from divalg.linalg import conj_transpose, load_matrix
from divalg.verify import DEFAULT_ENGINE, REGISTRY


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def value_of(out: str) -> float:
    match = re.search(r"^value: (\S+)$", out, re.MULTILINE)
    assert match, out
    return float(match.group(1))


class TestFactorCommand:
    def test_pseudo_inverse_factor(self, capsys):
        code, out, _ = run_cli(
            capsys, "factor", "--kind", "mp-herm", "--beta", "1",
            "--m", "2", "--q", "1", "--lambda", "2",
        )
        assert code == 0
        assert value_of(out) == pytest.approx(0.0625, rel=1e-9)

    def test_exponent_offset(self, capsys):
        code, out, _ = run_cli(capsys, "factor", "--kind", "tau", "--beta", "2", "--q", "3")
        assert code == 0
        assert value_of(out) == pytest.approx(-3.0)

    def test_nonsingular_congruence_factor(self, capsys):
        code, out, _ = run_cli(
            capsys, "factor", "--kind", "congruence-ns", "--beta", "1",
            "--m", "2", "--det-b", "2",
        )
        assert code == 0
        assert value_of(out) == pytest.approx(8.0, rel=1e-9)

    def test_spectrum_list_parsing(self, capsys):
        code, out, _ = run_cli(
            capsys, "factor", "--kind", "sd", "--beta", "1",
            "--m", "2", "--q", "2", "--lambda", "2.0,1.0",
        )
        assert code == 0
        # -q ln2 + tau ln pi + 0 + ln(2-1) = -2 ln 2
        assert value_of(out) == pytest.approx(0.25, rel=1e-9)

    def test_unknown_kind_is_usage_error(self, capsys):
        code, _, err = run_cli(capsys, "factor", "--kind", "lu", "--beta", "1")
        assert code == 2
        assert "unknown factor kind" in err

    def test_missing_input_is_usage_error(self, capsys):
        code, _, err = run_cli(
            capsys, "factor", "--kind", "mp-herm", "--beta", "1", "--m", "2", "--q", "1",
        )
        assert code == 2


class TestGammaVolumeCommands:
    def test_gamma_sqrt_pi(self, capsys):
        code, out, _ = run_cli(capsys, "gamma", "--m", "1", "--beta", "1", "--a", "0.5")
        assert code == 0
        assert value_of(out) == pytest.approx(math.sqrt(math.pi), rel=1e-9)

    def test_gamma_domain_violation(self, capsys):
        code, _, err = run_cli(capsys, "gamma", "--m", "3", "--beta", "2", "--a", "1.0")
        assert code == 2

    def test_volume_sphere(self, capsys):
        code, out, _ = run_cli(capsys, "volume", "--m", "1", "--n", "3", "--beta", "1")
        assert code == 0
        assert value_of(out) == pytest.approx(4.0 * math.pi, rel=1e-9)

    def test_volume_domain_violation(self, capsys):
        code, _, err = run_cli(capsys, "volume", "--m", "3", "--n", "1", "--beta", "1")
        assert code == 2


class TestSampleCommand:
    def test_stiefel_sample_is_orthonormal(self, capsys, tmp_path):
        out_file = tmp_path / "h1.json"
        code, out, _ = run_cli(
            capsys, "sample", "stiefel", "--n", "4", "--q", "2", "--beta", "4",
            "--seed", "3", "--out", str(out_file),
        )
        assert code == 0
        h = load_matrix(out_file)
        assert h.kind.beta == 4 and h.rows == 4 and h.cols == 2
        gram = conj_transpose(h) @ h
        eye = np.zeros_like(gram.data)
        eye[range(2), range(2), 0] = 1.0
        assert np.abs(gram.data - eye).max() <= 1e-10

    def test_psd_sample_has_requested_rank(self, capsys, tmp_path):
        out_file = tmp_path / "s.json"
        code, _, _ = run_cli(
            capsys, "sample", "psd", "--m", "3", "--q", "2", "--beta", "2",
            "--seed", "1", "--out", str(out_file),
        )
        assert code == 0
        s = load_matrix(out_file)
        from divalg.linalg import numerical_rank

        assert numerical_rank(s) == 2
        assert np.abs(s.data - conj_transpose(s).data).max() <= 1e-12

    def test_rect_sample_shape(self, capsys, tmp_path):
        out_file = tmp_path / "x.json"
        code, _, _ = run_cli(
            capsys, "sample", "rect", "--n", "3", "--m", "2", "--q", "1",
            "--beta", "1", "--seed", "2", "--out", str(out_file),
        )
        assert code == 0
        x = load_matrix(out_file)
        assert (x.rows, x.cols) == (3, 2)

    def test_sample_determinism(self, capsys, tmp_path):
        files = []
        for name in ("a.json", "b.json"):
            out_file = tmp_path / name
            run_cli(
                capsys, "sample", "psd", "--m", "2", "--q", "1", "--beta", "1",
                "--seed", "9", "--out", str(out_file),
            )
            files.append(out_file.read_text())
        assert files[0] == files[1]

    def test_invalid_rank_is_usage_error(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys, "sample", "stiefel", "--n", "1", "--q", "2", "--beta", "1",
            "--out", str(tmp_path / "h.json"),
        )
        assert code == 2

    def test_octonion_sample_rejected(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys, "sample", "stiefel", "--n", "2", "--q", "1", "--beta", "8",
            "--out", str(tmp_path / "h.json"),
        )
        assert code == 2
        assert "conjectural" in err


class TestVerifyCommand:
    def test_chart_task_passes(self, capsys):
        code, out, _ = run_cli(
            capsys, "verify", "--task", "mp-herm", "--beta", "2", "--m", "3",
            "--q", "2", "--points", "20", "--seed", "7",
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["pass"] is True
        assert len(doc["records"]) == 20

    def test_equality_task_passes(self, capsys):
        code, out, _ = run_cli(
            capsys, "verify", "--task", "uhlig-svd", "--beta", "1", "--m", "2",
            "--n", "1", "--trials", "200000", "--seed", "1",
        )
        assert code == 0
        doc = json.loads(out)
        assert all(rec["z"] < 3.0 for rec in doc["records"])

    def test_failing_task_returns_one(self, capsys):
        # a coarse finite-difference step breaks the chart tolerance
        code, out, _ = run_cli(
            capsys, "verify", "--task", "mp-herm", "--beta", "1", "--m", "2",
            "--q", "1", "--points", "2", "--seed", "0", "--step", "0.3",
        )
        assert code == 1
        assert json.loads(out)["pass"] is False

    def test_octonion_task_is_usage_error(self, capsys):
        code, _, err = run_cli(
            capsys, "verify", "--task", "sd", "--beta", "8", "--m", "2", "--q", "1",
        )
        assert code == 2
        assert "octonion results conjectural" in err

    def test_unknown_task_is_usage_error(self, capsys):
        code, _, err = run_cli(capsys, "verify", "--task", "lu", "--beta", "1", "--m", "2")
        assert code == 2

    def test_inadmissible_engine_is_usage_error(self, capsys):
        code, _, err = run_cli(
            capsys, "verify", "--task", "sd", "--engine", "chart", "--beta", "1",
            "--m", "2", "--q", "1",
        )
        assert code == 2

    def test_inconclusive_returns_three(self, capsys):
        code, _, err = run_cli(
            capsys, "verify", "--task", "uhlig-svd", "--beta", "1", "--m", "3",
            "--n", "2", "--trials", "30000", "--seed", "1", "--gap", "0.99",
        )
        assert code == 3
        assert "inconclusive" in err

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "--task", "sd", "--beta", "1", "--m", "2", "--q", "1",
                  "--bogus", "1"])
        assert exc.value.code == 2

    def test_output_file_and_determinism(self, capsys, tmp_path):
        paths = [tmp_path / "a.json", tmp_path / "b.json"]
        for path in paths:
            code, _, _ = run_cli(
                capsys, "verify", "--task", "w", "--beta", "1", "--n", "2",
                "--m", "2", "--q", "1", "--trials", "20000", "--seed", "5",
                "--out", str(path),
            )
            assert code == 0
        texts = [re.sub(r'"runtime_ms": \d+', "", p.read_text()) for p in paths]
        assert texts[0] == texts[1]

    def test_csv_output(self, capsys):
        code, out, _ = run_cli(
            capsys, "verify", "--task", "congruence-ns", "--beta", "1", "--m", "2",
            "--points", "3", "--seed", "2", "--format", "csv",
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 4  # header + 3 records
        assert "analytic_log" in lines[0]

    def test_table_output_carries_disclaimer(self, capsys):
        code, out, _ = run_cli(
            capsys, "verify", "--task", "congruence-ns", "--beta", "1", "--m", "2",
            "--points", "2", "--seed", "2", "--format", "table",
        )
        assert code == 0
        assert "not stable" in out


class TestDemoCommand:
    def test_pinned_demo(self, capsys):
        code, out, _ = run_cli(capsys, "demo")
        assert code == 0
        doc = json.loads(out)
        (rec,) = doc["records"]
        assert rec["chart_det"] == pytest.approx(1.0, abs=1e-6)
        assert rec["uhlig_qr_factor"] == pytest.approx(1.0, abs=1e-6)
        assert rec["uhlig_svd_factor"] == pytest.approx(2.0, abs=1e-6)
        assert rec["expected_mismatch"] is True


class TestVerifyAll:
    def test_preset_grid_is_deterministic_and_admissible(self):
        tasks = preset_tasks("desk", 42)
        assert tasks == preset_tasks("desk", 42)
        assert len(tasks) > 50
        for task in tasks:
            assert task.engine in REGISTRY[task.theorem_id]
        names = {t.theorem_id for t in tasks}
        assert names == set(TASK_NAMES.values())

    def test_full_preset_scales_up(self):
        desk = preset_tasks("desk", 0)
        full = preset_tasks("full", 0)
        assert len(desk) == len(full)
        assert all(f.trials >= d.trials for d, f in zip(desk, full))

    def test_aggregation_and_exit_codes(self, capsys, monkeypatch, tmp_path):
        import divalg.cli as cli
        from divalg.verify import TaskSpec

        tiny = [
            TaskSpec(theorem_id="CONGRUENCE_NS", beta=1, m=2, points=2, seed=1),
            TaskSpec(theorem_id="MP_HERM", beta=1, m=2, q=1, points=2, seed=1),
        ]
        monkeypatch.setattr(cli, "preset_tasks", lambda preset, seed: tiny)
        out_file = tmp_path / "all.json"
        code, _, _ = run_cli(
            capsys, "verify-all", "--preset", "desk", "--seed", "1",
            "--out", str(out_file),
        )
        assert code == 0
        doc = json.loads(out_file.read_text())
        assert doc["pass"] is True
        assert doc["n_tasks"] == 2
        assert doc["n_failed"] == 0

    def test_inconclusive_aggregation(self, capsys, monkeypatch):
        import divalg.cli as cli
        from divalg.verify import TaskSpec

        tiny = [
            TaskSpec(theorem_id="UHLIG_SVD", beta=1, m=3, n=2, trials=30_000,
                     seed=1, gap=0.99),
        ]
        monkeypatch.setattr(cli, "preset_tasks", lambda preset, seed: tiny)
        code, out, _ = run_cli(capsys, "verify-all")
        assert code == 3
        doc = json.loads(out)
        assert doc["n_inconclusive"] == 1
        assert doc["pass"] is False

    def test_unknown_preset_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["verify-all", "--preset", "weekly"])
        assert exc.value.code == 2


class TestParser:
    def test_every_task_name_maps_to_default_engine(self):
        for cli_name, theorem in TASK_NAMES.items():
            assert theorem in DEFAULT_ENGINE

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args(["--version"])
        assert exc.value.code == 0
