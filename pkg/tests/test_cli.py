import json

import pytest

from conftest import synthetic_dataset
from dpdg.cli import EXIT_DEGENERATE, EXIT_INVALID, EXIT_NONEXIST, EXIT_OK, main


@pytest.fixture
def data(tmp_path):
    return synthetic_dataset(tmp_path, n=40, seed=1)


def fit_args(data, *extra):
    return ["fit", "--graph", data["graph"], "--attrs", data["attrs"], "--schema", data["schema"], *extra]


class TestRelease:
    def test_json_and_determinism(self, data, tmp_path):
        outs = []
        for k in range(2):
            out = tmp_path / f"r{k}.json"
            assert main(["release", "--graph", data["graph"], "--epsilon", "2", "--seed", "4", "--out", str(out)]) == EXIT_OK
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
        doc = json.loads(outs[0])
        assert {"epsilon", "d_tilde", "b_tilde", "seed"} <= set(doc)
        assert doc["epsilon"] == 2.0 and len(doc["d_tilde"]) == 40

    def test_logs_privacy_accounting(self, data, caplog):
        caplog.set_level("INFO")
        main(["release", "--graph", data["graph"], "--epsilon", "2", "--seed", "0", "--out", "/dev/null"])
        assert "alpha_n=0.367879" in caplog.text and "kappa_n=2" in caplog.text

    @pytest.mark.parametrize("eps", ["0", "-1", "abc"])
    def test_bad_epsilon(self, data, eps):
        assert main(["release", "--graph", data["graph"], "--epsilon", eps, "--seed", "0"]) == EXIT_INVALID


class TestFit:
    def test_fit_shape(self, data, tmp_path):
        out = tmp_path / "fit.json"
        assert main(fit_args(data, "--epsilon", "2", "--seed", "3", "--out", str(out))) == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc["exists"] is True
        assert [c["name"] for c in doc["covariates"]] == ["group", "age"]
        node = doc["nodes"][0]
        assert set(node) == {"id", "d_tilde", "alpha", "se_alpha", "b_tilde", "beta", "se_beta"}
        assert doc["nodes"][-1]["beta"] == 0.0 and doc["nodes"][-1]["se_beta"] is None
        assert doc["privacy"]["s_n_sq"] == pytest.approx((2 * doc["n"] - 1) * 1.8413, rel=1e-3)

    def test_no_noise_byte_identical(self, data, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(fit_args(data, "--no-noise", "--out", str(a))) == EXIT_OK
        assert main(fit_args(data, "--no-noise", "--out", str(b))) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_reuses_release(self, data, tmp_path):
        rel = tmp_path / "rel.json"
        main(["release", "--graph", data["graph"], "--epsilon", "2", "--seed", "3", "--out", str(rel)])
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(fit_args(data, "--noisy", str(rel), "--keep-isolates", "--out", str(a)))
        main(fit_args(data, "--epsilon", "2", "--seed", "3", "--keep-isolates", "--out", str(b)))
        da, db = json.loads(a.read_text()), json.loads(b.read_text())
        assert da["covariates"] == db["covariates"]

    def test_nonexistence_exit_code(self, data, tmp_path):
        out = tmp_path / "f.json"
        code = main(fit_args(data, "--epsilon", "0.05", "--seed", "0", "--out", str(out)))
        assert code == EXIT_NONEXIST
        doc = json.loads(out.read_text())
        assert doc["exists"] is False and "d_tilde" in doc

    def test_degenerate_exit_code(self, tmp_path):
        data = synthetic_dataset(tmp_path, n=30, seed=2, constant_attribute=True)
        assert main(fit_args(data, "--no-noise", "--out", str(tmp_path / "f.json"))) == EXIT_DEGENERATE

    def test_missing_file(self, data, tmp_path):
        assert main(["fit", "--graph", str(tmp_path / "nope.csv"), "--attrs", data["attrs"], "--schema", data["schema"]]) == EXIT_INVALID

    def test_parse_error(self, data, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("src,dst\n1\n")
        assert main(["fit", "--graph", str(bad), "--attrs", data["attrs"], "--schema", data["schema"]]) == EXIT_INVALID

    def test_usage_error(self):
        assert main(["fit"]) == EXIT_INVALID
        assert main(["frobnicate"]) == EXIT_INVALID


class TestSimulateReport:
    def test_simulate_and_report(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n": 30, "L": "zero", "epsilon": "two", "reps": 4, "seed": 1}))
        outs = []
        for k in range(2):
            out = tmp_path / f"sim{k}"
            assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert outs[0] == outs[1]
        assert "coverage.csv" in outs[0]
        capsys.readouterr()
        assert main(["report", "--in", str(tmp_path / "sim0")]) == EXIT_OK
        text = capsys.readouterr().out
        assert "coverage_pct" in text and "gamma_bc" in text

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n": 30, "L": "huge"}))
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_INVALID
