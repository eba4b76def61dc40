"""fGn/fBm engine: covariances, samplers, seeding and the exact round trip."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbmvol.errors import FactorizationError, RegimeError
from fbmvol.fgn import (
    EIGENVALUE_FLOOR,
    HurstParameter,
    UniformGrid,
    canonical_increments,
    cholesky_lower,
    circulant_eigenvalues,
    cumulate,
    fbm_covariance,
    fgn_autocovariance,
    fgn_covariance_matrix,
    increment_autocorrelation,
    make_rng,
    sample_fgn,
    sample_fgn_batch,
)

hursts = st.floats(min_value=0.02, max_value=0.98)


class TestHurstParameter:
    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5, float("nan")])
    def test_rejects_outside_open_interval(self, bad):
        with pytest.raises(RegimeError):
            HurstParameter(bad)

    def test_regime_guards(self):
        assert HurstParameter(0.74).require_clt() == 0.74
        with pytest.raises(RegimeError):
            HurstParameter(0.75).require_clt()
        with pytest.raises(RegimeError):
            HurstParameter(0.5).require_long_memory()
        assert HurstParameter(0.6).value == 0.6


class TestCovariance:
    def test_fbm_covariance_diagonal(self):
        assert fbm_covariance(0.3, 0.3, 0.7) == pytest.approx(0.3**1.4)

    @pytest.mark.parametrize("H", [0.1, 0.5, 0.55, 0.74, 0.9])
    def test_autocovariance_matches_three_point_formula(self, H):
        # the large-lag series must agree with the naive form where the latter is accurate
        k = np.arange(0, 60)
        naive = 0.5 * ((k + 1.0) ** (2 * H) + np.abs(k - 1.0) ** (2 * H) - 2.0 * k ** (2.0 * H))
        got = fgn_autocovariance(k, H)
        print(f"H={H}: max abs diff {np.max(np.abs(got - naive)):.2e}")
        assert np.allclose(got, naive, rtol=1e-10, atol=1e-13)

    def test_brownian_increments_uncorrelated(self):
        r = fgn_autocovariance(np.arange(1, 10**5, 997), 0.5)
        assert np.all(r == 0.0)

    def test_large_lag_asymptotic(self):
        H, k = 0.7, 1.0e6
        lead = H * (2 * H - 1) * k ** (2 * H - 2)
        assert fgn_autocovariance([k], H)[0] == pytest.approx(lead, rel=1e-6)

    def test_increment_scaling(self):
        assert increment_autocorrelation(0, 0.6, 0.01) == pytest.approx(0.01**1.2)
        with pytest.raises(ValueError):
            increment_autocorrelation(-1, 0.6)

    @settings(max_examples=25, deadline=None)
    @given(H=hursts, n=st.integers(2, 64))
    def test_covariance_matrix_psd(self, H, n):
        lam = np.linalg.eigvalsh(fgn_covariance_matrix(n, H, 1.0 / n))
        assert lam.min() > -1e-12 * lam.max()

    @pytest.mark.parametrize("H", [0.05, 0.3, 0.5, 0.7, 0.95])
    def test_circulant_embedding_nonnegative(self, H):
        lam = circulant_eigenvalues(1000, H)
        print(f"H={H}: min eigenvalue {lam.min():.3e}")
        assert lam.min() >= -EIGENVALUE_FLOOR * lam.max()

    def test_factorization_error_names_pivot(self):
        bad = np.array([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(FactorizationError) as exc:
            cholesky_lower(bad)
        assert exc.value.pivot == 2
        assert "fgn_engine" in str(exc.value)


class TestSamplers:
    def test_same_seed_same_draw(self):
        g = UniformGrid(256)
        a = sample_fgn(g, 0.7, 11, index=3).values
        b = sample_fgn(g, 0.7, 11, index=3).values
        c = sample_fgn(g, 0.7, 11, index=4).values
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_streams_are_distinct_per_key(self):
        x = make_rng(5, 0, 1).standard_normal(3)
        y = make_rng(5, 0, 2).standard_normal(3)
        assert not np.array_equal(x, y)

    @pytest.mark.parametrize("method", ["cholesky", "circulant"])
    @pytest.mark.parametrize("H", [0.3, 0.7])
    def test_empirical_covariance(self, method, H):
        g = UniformGrid(16)
        X = sample_fgn_batch(g, H, 2024, range(20000), method=method)
        emp = np.cov(X, rowvar=False, bias=True)
        true = fgn_covariance_matrix(16, H, g.step)
        err = np.max(np.abs(emp - true)) / true[0, 0]
        print(f"{method} H={H}: max rel cov error {err:.3f}")
        assert err < 0.05

    def test_batch_rows_match_single_draws(self):
        g = UniformGrid(128)
        X = sample_fgn_batch(g, 0.6, 9, [0, 5])
        one = sample_fgn(g, 0.6, 9, index=5).values
        assert np.allclose(X[1], one, rtol=0, atol=1e-14)

    def test_terminal_variance(self):
        g = UniformGrid(64, horizon=2.0)
        B = sample_fgn_batch(g, 0.8, 1, range(20000)).sum(axis=1)
        print(f"Var(B_T)={B.var():.4f} expected {2.0**1.6:.4f}")
        assert B.var() == pytest.approx(2.0**1.6, rel=0.05)

    def test_circulant_metadata(self):
        out = sample_fgn(UniformGrid(64), 0.6, 1, method="circulant")
        assert out.metadata["method"] == "circulant"
        assert out.metadata["fallback"] is False

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            sample_fgn(UniformGrid(8), 0.6, 1, method="hosking")


class TestRoundTrip:
    @pytest.mark.parametrize("method", ["cholesky", "circulant"])
    def test_cumulate_then_diff_is_exact(self, method):
        inc = sample_fgn(UniformGrid(1000), 0.65, 77, method=method)
        path = cumulate(inc)
        assert path.values[0] == 0.0
        assert np.array_equal(path.increments(), inc.values)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=200))
    def test_canonical_increments_fixed_point(self, xs):
        x = canonical_increments(np.array(xs))
        path = np.concatenate([[0.0], np.cumsum(x)])
        assert np.array_equal(np.diff(path), x)
        assert np.allclose(x, xs, rtol=0, atol=1e-9 * (1 + np.abs(np.cumsum(xs)).max()))
