import json
import subprocess
import sys

import pytest

from fbmvol.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestCli:
    def test_simulate_estimate(self, tmp_path, capsys):
        f = tmp_path / "p.csv"
        code, out, _ = run(capsys, "simulate", "--h", "0.6", "--vol", "const:0.63",
                           "--n", "500", "--seed", "4", "--out", str(f))
        assert code == 0 and f.read_text().startswith("t,S\n")
        code, out, _ = run(capsys, "estimate", "--input", str(f), "--h", "0.6")
        rep = json.loads(out)
        print(rep)
        assert code == 0 and rep["ci_low"] < rep["sigma2_hat"] < rep["ci_high"]

    def test_simulate_deterministic(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for f in (a, b):
            run(capsys, "simulate", "--h", "0.7", "--vol", "pow:0.4,0.3", "--n", "100",
                "--seed", "1", "--out", str(f))
        assert a.read_bytes() == b.read_bytes()

    def test_theta(self, capsys):
        code, out, _ = run(capsys, "theta", "--vol", "pow:0.4,0.3", "--h", "0.55",
                           "--n", "1000", "--summary")
        d = json.loads(out)
        assert code == 0 and d["theta_total"] == pytest.approx(0.09962605, rel=5e-4)

    def test_price(self, capsys):
        code, out, _ = run(capsys, "price", "--s", "100", "--k", "100", "--r", "0.05",
                           "--sigma", "0.2", "--h", "0.5", "--bigt", "1")
        assert code == 0 and json.loads(out)["price"] == pytest.approx(10.450583572185565)
        code, out, _ = run(capsys, "price", "--s", "100", "--k", "100", "--rtilde", "0.05",
                           "--vol", "pow:0.4,0.3", "--h", "0.6", "--bigt", "1")
        assert code == 0 and json.loads(out)["rate_integral"] == 0.05

    def test_reproduce_with_config_override(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("n = 100\nr = 20\nseed = 3\n")
        out = tmp_path / "t.csv"
        code, _, _ = run(capsys, "reproduce", "--table", "1", "--config", str(cfg),
                         "--seed", "4", "--out", str(out))
        rows = out.read_text().splitlines()
        assert code == 0 and rows[1].split(",")[3:5] == ["100", "20"]
        assert rows[1].endswith(",4")

    def test_ks(self, capsys):
        code, out, _ = run(capsys, "ks", "--h", "0.55", "--sigma2", "0.4", "--n", "100",
                           "--r", "200", "--seed", "2")
        d = json.loads(out)
        assert code == 0 and 0 <= d["cells"][0]["ks_p"] <= 1

    @pytest.mark.parametrize("argv", [
        ["ks", "--h", "0.55", "--sigma2", "0.4", "--r", "10"],
        ["simulate", "--h", "1.5", "--vol", "const:1", "--out", "x.csv"],
        ["theta", "--vol", "pow:0.4,0.3", "--h", "0.5"],
        ["estimate", "--input", "/nonexistent.csv", "--h", "0.6"],
        ["price", "--s", "100", "--k", "100", "--sigma", "0.2", "--h", "0.6", "--t", "2",
         "--bigt", "1"],
    ])
    def test_config_errors_exit_2(self, capsys, argv):
        code, _, err = run(capsys, *argv)
        print(err)
        assert code == 2 and "error" in err

    def test_bad_vol_spec_exit_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["theta", "--vol", "wiggle:1", "--h", "0.6"])
        assert exc.value.code == 2

    def test_numerical_failure_exit_3(self, tmp_path, capsys, monkeypatch):
        from fbmvol import market
        from fbmvol.errors import FactorizationError

        def boom(*a, **k):
            raise FactorizationError(pivot=7, size=10, module="market_model")

        monkeypatch.setattr(market, "cholesky_lower", boom)
        market._tv_model.cache_clear()
        code, _, err = run(capsys, "simulate", "--h", "0.6", "--vol", "pow:0.3,0.2",
                           "--n", "10", "--out", str(tmp_path / "x.csv"))
        market._tv_model.cache_clear()
        print(err)
        assert code == 3 and "market_model" in err and "order 7" in err

    def test_module_entry_point(self):
        r = subprocess.run([sys.executable, "-m", "fbmvol", "--help"], capture_output=True,
                           text=True)
        assert r.returncode == 0 and "pow:SIGMA,ALPHA" in r.stdout
