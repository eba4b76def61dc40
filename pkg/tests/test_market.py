import numpy as np
import pytest

from fbmvol.calculus import theta_report
from fbmvol.errors import ConfigError
from fbmvol.fgn import UniformGrid, sample_fgn
from fbmvol.market import (
    eta_covariance,
    read_price_csv,
    sample_eta,
    sample_eta_batch,
    simulate_const,
    simulate_const_log_increments,
    simulate_tv,
    tv_exponent_increments,
)
from fbmvol.volatility import PowerLaw, PowerSum


class TestConstantVolatility:
    def test_path_decomposition(self):
        g = UniformGrid(500)
        p = simulate_const(100.0, 0.4, 0.65, g, seed=3, mu=0.05)
        t = g.times()
        assert p.prices[0] == 100.0
        assert np.array_equal(p.log_prices, np.log(100.0) + p.exponent + p.gaussian)
        assert np.allclose(p.exponent, 0.05 * t - 0.08 * t**1.3, rtol=0, atol=1e-15)
        # Gaussian part is sigma * B^H from the same stream
        dB = sample_fgn(g, 0.65, 3).values
        assert np.allclose(p.implied_increments(), 0.4 * dB, rtol=0, atol=1e-15)

    def test_round_trip_bit_exact(self):
        p = simulate_const(1.0, 2.0, 0.7, UniformGrid(1000), seed=8)
        eta = p.implied_increments()
        rebuilt = np.concatenate([[0.0], np.cumsum(eta)])
        assert np.array_equal(rebuilt, p.gaussian)

    def test_batch_matches_single(self):
        g = UniformGrid(200)
        x = simulate_const_log_increments(0.5, 0.6, g, 4, [2], mu=0.1)
        p = simulate_const(1.0, 0.5, 0.6, g, seed=4, mu=0.1, index=2)
        assert np.allclose(x[0], np.diff(p.log()), rtol=0, atol=1e-13)

    def test_martingale_property(self):
        # E[S_T] = S_0 e^{mu T}
        g = UniformGrid(8)
        x = simulate_const_log_increments(0.8, 0.7, g, 1, range(40000), mu=0.03)
        ST = np.exp(x.sum(axis=1))
        se = ST.std() / np.sqrt(ST.size)
        print(f"mean S_T {ST.mean():.4f} +/- {se:.4f}, expected {np.exp(0.03):.4f}")
        assert abs(ST.mean() - np.exp(0.03)) < 4 * se

    @pytest.mark.parametrize("bad", [{"s0": 0.0}, {"sigma": -1.0}])
    def test_validation(self, bad):
        kw = {"s0": 1.0, "sigma": 0.4} | bad
        with pytest.raises(ValueError):
            simulate_const(kw["s0"], kw["sigma"], 0.6, UniformGrid(4), 1)


class TestTimeVarying:
    def test_eta_covariance_is_cell_gram(self):
        vol = PowerLaw(0.4, 0.3)
        g = UniformGrid(20)
        X = sample_eta_batch(vol, 0.65, g, 5, range(40000))
        emp = np.cov(X, rowvar=False, bias=True)
        C = eta_covariance(vol, 20, 0.65)
        err = np.max(np.abs(emp - C)) / C.max()
        print(f"max rel eta-cov error {err:.3f}")
        assert err < 0.05

    def test_exponent_is_half_theta(self):
        vol = PowerSum(0.4, 0.8, 2.0)
        g = UniformGrid(100)
        p = simulate_tv(1.0, vol, 0.6, g, seed=2)
        theta_end = theta_report(vol, 100, 0.6).theta_total
        assert p.exponent[-1] == pytest.approx(-0.5 * theta_end, rel=1e-12)
        assert np.allclose(np.diff(p.exponent), tv_exponent_increments(vol, 0.6, g), atol=1e-16)
        assert np.array_equal(p.log_prices, p.exponent + p.gaussian)

    def test_single_and_batch_eta(self):
        vol = PowerLaw(0.4, 0.3)
        g = UniformGrid(50)
        one = sample_eta(vol, 0.6, g, 7, index=3)
        many = sample_eta_batch(vol, 0.6, g, 7, [3])
        assert np.allclose(one.values, many[0], rtol=0, atol=1e-14)

    def test_requires_long_memory(self):
        with pytest.raises(ValueError):
            simulate_tv(1.0, PowerLaw(0.4, 0.3), 0.4, UniformGrid(10), 1)


class TestCsv:
    def test_write_read(self, tmp_path):
        p = simulate_const(50.0, 0.3, 0.6, UniformGrid(100), seed=1)
        f = tmp_path / "p.csv"
        p.to_csv(f)
        q = read_price_csv(f)
        assert f.read_text().startswith("t,S\n")
        assert np.array_equal(q.times, p.times) and np.array_equal(q.prices, p.prices)

    def test_bad_files(self, tmp_path):
        f = tmp_path / "bad.csv"
        f.write_text("t,S\n0,1\n")
        with pytest.raises(ConfigError):
            read_price_csv(f)
        f.write_text("t,S\n0,1\n0.5,-1\n")
        with pytest.raises(ConfigError):
            read_price_csv(f)
