"""
单元测试 - 命令行

测试各子命令的输出与退出码。
"""

import json

import pytest

from growthlift import ProblemSpec
from growthlift.cli import EXIT_ERROR, EXIT_MAX_ITER, EXIT_OK, main


def _write_json(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


@pytest.fixture
def sharp_problem(tmp_path):
    return _write_json(tmp_path / "sharp.json", {"kind": "sharp_norm", "n": 1})


@pytest.fixture
def quadratic_problem(tmp_path):
    return _write_json(tmp_path / "quadratic.json", {"kind": "quadratic_norm", "n": 1})


class TestSolve:
    """solve 子命令测试"""

    def test_prox(self, sharp_problem, tmp_path, capsys):
        out = tmp_path / "trace.csv"
        code = main([
            "solve", "--problem", sharp_problem, "--method", "prox", "--rho", "0.1",
            "--x0", "1", "--out", str(out),
        ])
        assert code == EXIT_OK
        stdout = capsys.readouterr().out
        assert "termination: eps_reached" in stdout
        assert "iterations: 10" in stdout
        assert "final_gap: 0.0" in stdout
        rows = out.read_text(encoding="utf-8").splitlines()
        assert rows[0] == "k,step_kind,value,gap,dist,stepsize,model_gap"
        assert len(rows) == 12

    def test_spec_round_trip(self, tmp_path):
        """测试规范格式的问题规格经 --spec-out 写出后逐字节不变"""
        canonical = ProblemSpec(
            kind="holder_norm", n=2, params={"alpha": 2.0, "p": 1.5}, seed=3
        ).to_json()
        source = tmp_path / "holder.json"
        source.write_bytes(canonical.encode("utf-8"))
        echoed = tmp_path / "echo.json"
        code = main([
            "solve", "--problem", str(source), "--method", "polyak",
            "--out", str(tmp_path / "trace.csv"), "--spec-out", str(echoed),
        ])
        assert code in (EXIT_OK, EXIT_MAX_ITER)
        assert echoed.read_bytes() == source.read_bytes()

    def test_spec_out_records_env_seed(self, tmp_path, monkeypatch):
        """测试未给出 seed 时写出的规格包含 GROWTHLIFT_SEED"""
        monkeypatch.setenv("GROWTHLIFT_SEED", "5")
        source = _write_json(tmp_path / "affine.json", {"kind": "max_affine", "n": 2})
        echoed = tmp_path / "echo.json"
        main([
            "lift-check", "--problem", source, "--method", "polyak",
            "--eps", "1e-3", "--p", "1", "--spec-out", str(echoed),
        ])
        spec = ProblemSpec.from_json(echoed.read_text(encoding="utf-8"))
        assert spec.seed == 5
        assert spec.to_json() == echoed.read_text(encoding="utf-8")

    def test_max_iter_exit_code(self, quadratic_problem, tmp_path):
        """测试达到迭代上限时退出码为 2"""
        code = main([
            "solve", "--problem", quadratic_problem, "--method", "polyak",
            "--max-iter", "3", "--x0", "1", "--out", str(tmp_path / "trace.csv"),
        ])
        assert code == EXIT_MAX_ITER

    def test_missing_rho(self, sharp_problem, tmp_path, capsys):
        """测试 prox 缺少 --rho 时退出码为 1"""
        code = main([
            "solve", "--problem", sharp_problem, "--method", "prox",
            "--out", str(tmp_path / "trace.csv"),
        ])
        assert code == EXIT_ERROR
        assert "rho" in capsys.readouterr().err

    def test_bundle_method_name(self, sharp_problem, tmp_path, capsys):
        code = main([
            "solve", "--problem", sharp_problem, "--method", "bundle-mc", "--rho", "1",
            "--x0", "1", "--out", str(tmp_path / "trace.csv"),
        ])
        assert code == EXIT_OK
        assert "iterations: 1" in capsys.readouterr().out

    def test_unknown_method(self, sharp_problem, tmp_path):
        """测试参数错误以退出码 1 退出"""
        with pytest.raises(SystemExit) as excinfo:
            main([
                "solve", "--problem", sharp_problem, "--method", "newton",
                "--out", str(tmp_path / "trace.csv"),
            ])
        assert excinfo.value.code == EXIT_ERROR

    def test_missing_problem_file(self, tmp_path):
        code = main([
            "solve", "--problem", str(tmp_path / "missing.json"), "--method", "polyak",
            "--out", str(tmp_path / "trace.csv"),
        ])
        assert code == EXIT_ERROR

    def test_invalid_seed_env(self, sharp_problem, tmp_path, monkeypatch):
        monkeypatch.setenv("GROWTHLIFT_SEED", "abc")
        code = main([
            "solve", "--problem", sharp_problem, "--method", "polyak",
            "--out", str(tmp_path / "trace.csv"),
        ])
        assert code == EXIT_ERROR

    def test_timestamp_prefix(self, sharp_problem, tmp_path, capsys):
        main([
            "--timestamp", "solve", "--problem", sharp_problem, "--method", "polyak",
            "--out", str(tmp_path / "trace.csv"),
        ])
        assert capsys.readouterr().out.startswith("# ")


class TestBounds:
    """bounds 子命令测试"""

    def test_named_bound(self, tmp_path, capsys):
        params = _write_json(tmp_path / "params.json", {"gap0": 1.0, "rho": 0.1, "alpha": 1.0})
        code = main(["bounds", "--name", "k_prox_sharp", "--params", params])
        assert code == EXIT_OK
        assert capsys.readouterr().out.strip() == "k_prox_sharp: 20.0"

    def test_lift_general(self, tmp_path, capsys):
        params = _write_json(
            tmp_path / "params.json", {"gap0": 1.0, "rho": 0.1, "epsilon": 0.1, "D": 1.0}
        )
        code = main(["bounds", "--name", "k_prox_sharp", "--params", params, "--lift", "general:1"])
        assert code == EXIT_OK
        name, value = capsys.readouterr().out.strip().split(": ")
        assert name == "lift_general(k_prox_sharp, p=1)"
        assert float(value) == pytest.approx(2000.0)

    def test_lift_higher(self, tmp_path, capsys):
        params = _write_json(
            tmp_path / "params.json", {"gap0": 1.0, "rho": 1.0, "alpha": 1.0, "epsilon": 0.01}
        )
        code = main(["bounds", "--name", "k_prox_sharp", "--params", params, "--lift", "higher:1,2"])
        assert code == EXIT_OK
        value = float(capsys.readouterr().out.strip().split(": ")[1])
        assert value == pytest.approx(200.0)

    def test_bad_lift(self, tmp_path):
        params = _write_json(tmp_path / "params.json", {"gap0": 1.0})
        code = main(["bounds", "--name", "k_prox_sharp", "--params", params, "--lift", "sideways"])
        assert code == EXIT_ERROR

    def test_list(self, capsys):
        assert main(["bounds", "--list"]) == EXIT_OK
        assert "k_subgrad_sharp" in capsys.readouterr().out.split()

    def test_missing_name(self):
        assert main(["bounds"]) == EXIT_ERROR


class TestLiftCheck:
    """lift-check 子命令测试"""

    def test_general(self, quadratic_problem, capsys):
        code = main([
            "lift-check", "--problem", quadratic_problem, "--method", "polyak",
            "--x0", "1", "--eps", "1e-3", "--p", "1",
        ])
        assert code == EXIT_OK
        assert capsys.readouterr().out.splitlines()[0] == "PASS"

    def test_higher(self, quadratic_problem, capsys):
        code = main([
            "lift-check", "--problem", quadratic_problem, "--method", "polyak",
            "--x0", "1", "--eps", "1e-3", "--p", "1", "--q", "2",
        ])
        assert code == EXIT_OK
        assert "case split verified" in capsys.readouterr().out

    def test_q_mismatch(self, quadratic_problem):
        """测试 q 与增长证书不一致"""
        code = main([
            "lift-check", "--problem", quadratic_problem, "--method", "polyak",
            "--eps", "1e-3", "--p", "1", "--q", "3",
        ])
        assert code == EXIT_ERROR

    def test_p_not_below_q(self, quadratic_problem):
        code = main([
            "lift-check", "--problem", quadratic_problem, "--method", "polyak",
            "--eps", "1e-3", "--p", "2", "--q", "2",
        ])
        assert code == EXIT_ERROR


class TestBench:
    """bench 子命令测试"""

    def test_report_file(self, tmp_path, capsys):
        spec = _write_json(tmp_path / "spec.json", {
            "problem": {"kind": "sharp_norm", "n": 1},
            "solver": "prox",
            "config": {"rho": 0.1},
            "x0": [1.0],
        })
        report = tmp_path / "report.json"
        code = main(["bench", "--spec", spec, "--report", str(report), "--out", str(tmp_path / "t.csv")])
        assert code == EXIT_OK
        data = json.loads(report.read_text(encoding="utf-8"))
        assert all(item["passed"] for item in data)
        assert "checks: 4/4 passed" in capsys.readouterr().out

    def test_stdout_report(self, tmp_path, capsys):
        spec = _write_json(tmp_path / "spec.json", {
            "problem": {"kind": "quadratic_norm", "n": 1},
            "solver": "polyak",
            "x0": [1.0],
            "checks": ["distance"],
        })
        assert main(["bench", "--spec", spec]) == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert data[0]["name"] == "distance"


class TestValidate:
    """validate 子命令测试"""

    def test_single_criterion(self, capsys):
        code = main(["validate", "--only", "1", "--only", "7"])
        assert code == EXIT_OK
        summary = json.loads(capsys.readouterr().out)
        assert summary["passed"] is True
        assert [c["id"] for c in summary["criteria"]] == ["1", "7"]

    def test_unknown_criterion(self):
        assert main(["validate", "--only", "99"]) == EXIT_ERROR
