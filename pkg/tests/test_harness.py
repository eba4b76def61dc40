import json
import math

import numpy as np
import pytest

from fbmvol.errors import ConfigError
from fbmvol.harness import (
    BOUNDARY_FLAG,
    CSV_HEADER,
    ExperimentConfig,
    build_id,
    ks_statistic,
    load_config_file,
    run_clt_diagnostic,
    run_table,
    table_config,
    theta_trend,
)
from fbmvol.volatility import PowerLaw, PowerSum


class TestKs:
    def test_matches_scipy(self):
        from scipy.stats import kstest

        x = np.random.default_rng(1).standard_normal(500)
        d, p = ks_statistic(x)
        ref = kstest(x, "norm", method="asymp")
        print(f"D={d:.6f} p={p:.4f} (scipy {ref.statistic:.6f}, {ref.pvalue:.4f})")
        assert d == pytest.approx(ref.statistic, rel=1e-12)
        assert p == pytest.approx(ref.pvalue, rel=1e-6)

    def test_constant_samples(self):
        assert ks_statistic(np.full(100, 0.3))[1] < 1e-10

    @pytest.mark.parametrize("bad", [[], [0.1] * 7, [0.0] * 9 + [np.nan]])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            ks_statistic(bad)

    def test_self_calibration(self):
        rng = np.random.default_rng(2024)
        ps = [ks_statistic(rng.standard_normal(10_000))[1] for _ in range(100)]
        frac = np.mean(np.array(ps) > 0.01)
        print(f"fraction of p > 0.01: {frac:.2f}")
        assert frac >= 0.98

    def test_false_rejection_rate(self):
        # 1000 meta-trials: rejections at 1% are Binomial(1000, 0.01), 99.9% band [1, 22]
        rng = np.random.default_rng(77)
        p = np.array([ks_statistic(rng.standard_normal(2000))[1] for _ in range(1000)])
        rejections = int(np.sum(p < 0.01))
        print(f"rejections {rejections}/1000, median p {np.median(p):.3f}")
        assert 1 <= rejections <= 22
        assert 0.4 < np.median(p) < 0.6


class TestConfig:
    @pytest.mark.parametrize("field,value", [
        ("kind", "table9"), ("n", 1), ("replications", 0), ("hurst_list", [1.0]),
        ("format", "xml"), ("seed", -1), ("workers", 0), ("sigma2_list", [-1.0]),
    ])
    def test_validation_names_field(self, field, value):
        kw = {"kind": "custom", "sigma2_list": [0.4], field: value}
        with pytest.raises(ConfigError) as exc:
            ExperimentConfig(**kw).validate()
        assert exc.value.field == field

    def test_table_defaults(self):
        assert table_config(2).sigma2_list == [1.6]
        assert table_config("table4").vols[1] == PowerLaw(6.4, 0.3)
        with pytest.raises(ConfigError):
            table_config(6)

    def test_config_file(self, tmp_path):
        f = tmp_path / "exp.cfg"
        f.write_text("# experiment\nkind = custom\nhurst = 0.55, 0.65\nsigma2 = 0.4\n"
                     "vol = pow:0.4,0.3; powsum:0.4,0.8,2\nr = 50\nseed = 9\n")
        d = load_config_file(f)
        cfg = ExperimentConfig(**d).validate()
        print(cfg)
        assert cfg.hurst_list == [0.55, 0.65] and cfg.replications == 50
        assert len(cfg.vols) == 2 and cfg.seed == 9

    def test_config_file_errors(self, tmp_path):
        f = tmp_path / "bad.cfg"
        f.write_text("colour = blue\n")
        with pytest.raises(ConfigError):
            load_config_file(f)
        f.write_text("n 100\n")
        with pytest.raises(ConfigError):
            load_config_file(f)
        f.write_text("n = many\n")
        with pytest.raises(ConfigError):
            load_config_file(f)


class TestRunTable:
    def small(self, **kw):
        base = dict(kind="table1", sigma2_list=[0.4], n=200, replications=300, seed=5)
        return ExperimentConfig(**(base | kw))

    def test_mse_identity(self):
        rep = run_table(self.small())
        for c in rep.cells:
            gap = abs(c.mse - (c.var + (c.mean - c.target) ** 2))
            print(f"H={c.hurst}: mean {c.mean:.5f} var {c.var:.3e} mse {c.mse:.3e} gap {gap:.1e}")
            assert gap <= 1e-12

    def test_csv_schema(self):
        text = run_table(self.small()).to_csv()
        lines = text.splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert len(lines) == 4
        row = lines[1].split(",")
        assert row[0] == "table1" and row[1] == "0.55" and row[-1] == "5"

    def test_deterministic_and_worker_independent(self):
        a = run_table(self.small(replications=600)).to_json()
        b = run_table(self.small(replications=600, workers=3)).to_json()
        assert a == b
        assert run_table(self.small()).to_csv() == run_table(self.small()).to_csv()

    def test_seed_changes_result(self):
        assert run_table(self.small()).to_csv() != run_table(self.small(seed=6)).to_csv()

    def test_theta_tables_ignore_seed(self):
        a = run_table(table_config(4, n=100, seed=1, replications=3)).to_csv()
        b = run_table(table_config(4, n=100, seed=2, replications=999)).to_csv()
        assert a == b

    def test_json_metadata_and_flags(self):
        doc = json.loads(run_table(self.small()).to_json())
        md = doc["metadata"]
        assert md["seed"] == 5 and md["n"] == 200 and md["replications"] == 300
        assert md["build"] == build_id()
        flags = {c["H"]: c["flags"] for c in doc["cells"]}
        assert flags[0.74] == [BOUNDARY_FLAG] and flags[0.55] == []

    def test_custom_time_varying(self):
        cfg = ExperimentConfig(kind="custom", vols=[PowerLaw(0.4, 0.3)], hurst_list=[0.6],
                               n=100, replications=400, seed=3)
        c = run_table(cfg).cells[0]
        se = math.sqrt(c.var / c.r)
        print(f"mean {c.mean:.5f} target {c.target:.5f} se {se:.5f}")
        assert abs(c.mean - c.target) < 0.002 + 4 * se
        assert c.extra["theta"] < c.target


class TestClt:
    def test_refuses_few_replications(self):
        cfg = ExperimentConfig(sigma2_list=[0.4], hurst_list=[0.55], replications=99)
        with pytest.raises(ConfigError) as exc:
            run_clt_diagnostic(cfg)
        assert "replications" in str(exc.value)

    def test_brownian_sanity(self):
        cfg = ExperimentConfig(sigma2_list=[0.4], hurst_list=[0.5], n=1000, replications=5000)
        c = run_clt_diagnostic(cfg).cells[0]
        print(f"H=0.5: D={c.ks_stat:.4f} p={c.ks_p:.3f}")
        assert c.ks_p > 0.01

    def test_boundary_flag(self):
        cfg = ExperimentConfig(sigma2_list=[6.4], hurst_list=[0.74], n=200, replications=100)
        assert BOUNDARY_FLAG in run_clt_diagnostic(cfg).cells[0].flags

    def test_skips_outside_scope(self):
        cfg = ExperimentConfig(sigma2_list=[0.4], hurst_list=[0.6, 0.8], n=100,
                               replications=200)
        rep = run_clt_diagnostic(cfg)
        ok, skipped = rep.cells
        assert 0 <= ok.ks_p <= 1
        assert "skipped" in skipped.flags and math.isnan(skipped.ks_stat)


class TestTrend:
    @pytest.mark.parametrize("vol", [PowerLaw(0.4, 0.3), PowerSum(0.4, 0.8, 2.0)])
    def test_reports_all_sizes(self, vol):
        rows = theta_trend(vol, 0.65)
        for r in rows:
            print(f"{vol.label()} N={r['n']}: tilde_theta {r['tilde_theta']:.9f} "
                  f"theta {r['theta']:.9f} int sigma^2 {r['integrated_variance']:.9f}")
        assert [r["n"] for r in rows] == [250, 500, 1000, 2000, 4000]
        assert all(r["gap"] == r["tilde_theta"] - r["theta"] for r in rows)
