"""ADF/KPSS against statsmodels and their size/power calibration."""
import warnings

import numpy as np
import pytest

from biphoton_rng.errors import DataError, NumericError
from biphoton_rng.stationarity import adf_test, default_kpss_bandwidth, kpss_test

statsmodels = pytest.importorskip("statsmodels")
from statsmodels.tsa.stattools import adfuller as sm_adfuller  # noqa: E402
from statsmodels.tsa.stattools import kpss as sm_kpss  # noqa: E402

warnings.filterwarnings("ignore", module="statsmodels")


@pytest.fixture(scope="module")
def noise():
    return np.random.default_rng(41).normal(0.0, 1.0, 2000)


@pytest.fixture(scope="module")
def walk():
    return np.cumsum(np.random.default_rng(42).normal(0.0, 1.0, 2000))


class TestAdfVsStatsmodels:
    def test_statistic_matches_exactly(self, noise, walk):
        for series in (noise, walk):
            mine = adf_test(series)
            theirs = sm_adfuller(series, regression="c", autolag="AIC")
            assert mine.statistic == pytest.approx(theirs[0], abs=1e-8)
            assert mine.lag_or_bandwidth == theirs[2]

    def test_trend_variant_matches(self, noise):
        mine = adf_test(noise + 0.01 * np.arange(noise.size), trend=True)
        theirs = sm_adfuller(noise + 0.01 * np.arange(noise.size),
                             regression="ct", autolag="AIC")
        assert mine.statistic == pytest.approx(theirs[0], abs=1e-8)

    def test_critical_values_match(self, noise):
        mine = adf_test(noise)
        theirs = sm_adfuller(noise, regression="c", autolag="AIC")[4]
        assert mine.critical_values[1.0] == pytest.approx(theirs["1%"], abs=1e-3)
        assert mine.critical_values[5.0] == pytest.approx(theirs["5%"], abs=1e-3)
        assert mine.critical_values[10.0] == pytest.approx(theirs["10%"], abs=1e-3)

    def test_indicators(self, noise, walk):
        assert adf_test(noise).indicator == 1   # unit root rejected
        assert adf_test(walk).indicator == 0    # cannot be discarded

    def test_constant_series_numeric_error(self):
        with pytest.raises((NumericError, DataError)):
            adf_test(np.full(500, 2.0))

    def test_affine_invariance(self, noise):
        a = adf_test(noise)
        b = adf_test(5.0 * noise + 77.0)
        assert a.statistic == pytest.approx(b.statistic, abs=1e-8)
        assert a.indicator == b.indicator


class TestKpssVsStatsmodels:
    def test_statistic_matches_exactly(self, noise, walk):
        for series in (noise, walk):
            for trend in (False, True):
                bw = default_kpss_bandwidth(series.size)
                mine = kpss_test(series, trend=trend)
                theirs = sm_kpss(series, regression="ct" if trend else "c", nlags=bw)[0]
                assert mine.lag_or_bandwidth == bw
                assert mine.statistic == pytest.approx(theirs, abs=1e-10)

    def test_critical_values_table(self, noise):
        out = kpss_test(noise)
        assert out.critical_values[5.0] == 0.463
        out = kpss_test(noise, trend=True)
        assert out.critical_values[5.0] == 0.146

    def test_indicators(self, noise, walk):
        assert kpss_test(noise).indicator == 0
        assert kpss_test(walk).indicator == 1

    def test_level_test_flags_trend(self):
        rng = np.random.default_rng(44)
        y = 0.001 * np.arange(10**4) + rng.normal(0, 1, 10**4)
        assert kpss_test(y).indicator == 1
        assert kpss_test(y, trend=True).indicator == 0

    def test_affine_invariance(self, noise):
        a = kpss_test(noise)
        b = kpss_test(-2.5 * noise + 3.0)
        assert a.statistic == pytest.approx(b.statistic, abs=1e-10)

    def test_constant_series_numeric_error(self):
        with pytest.raises((NumericError, DataError)):
            kpss_test(np.full(500, 1.0))


class TestCalibrationQuick:
    """40-seed smoke calibration; the acceptance suite runs the full 100."""

    def test_sizes_and_powers(self):
        adf_noise = kpss_noise_ok = adf_walk0 = kpss_walk1 = 0
        n_seeds = 40
        for seed in range(n_seeds):
            rng = np.random.default_rng(1000 + seed)
            noise = rng.normal(0, 1, 1500)
            walk = np.cumsum(rng.normal(0, 1, 1500))
            adf_noise += adf_test(noise).indicator
            kpss_noise_ok += 1 - kpss_test(noise).indicator
            adf_walk0 += 1 - adf_test(walk).indicator
            kpss_walk1 += kpss_test(walk).indicator
        assert adf_noise >= int(0.92 * n_seeds)
        assert kpss_noise_ok >= int(0.88 * n_seeds)
        assert adf_walk0 >= int(0.92 * n_seeds)
        assert kpss_walk1 >= int(0.92 * n_seeds)

    def test_short_series_rejected(self):
        with pytest.raises(DataError):
            adf_test(np.arange(20, dtype=float))
        with pytest.raises(DataError):
            kpss_test(np.arange(20, dtype=float))
