"""Simulator rate calibration, determinism and shape properties."""
import math

import numpy as np
import pytest

from biphoton_rng.errors import ConfigError
from biphoton_rng.gof import exponential_gof, uniform_gof
from biphoton_rng.quantum import StateModel, correlation
from biphoton_rng.series import build_deltat, build_dt
from biphoton_rng.simulator import SimConfig, pulse_train, run_seed, simulate_run
from biphoton_rng.timetag import assign_pulses, find_coincidences, run_statistics, write_stream

SHORT = SimConfig(duration_s=5.0, seed=202)


def coincidences_of(stream):
    coinc = find_coincidences(stream)
    return assign_pulses(coinc, stream.trigger_times, stream.meta.period_ps)


class TestPulseTrain:
    def test_pulse_count(self):
        cfg = SimConfig(duration_s=1.0, seed=0)
        assert pulse_train(cfg).size == 50_000

    def test_zero_jitter_exact_lattice(self):
        cfg = SimConfig(duration_s=0.1, jitter_sigma_ns=0.0, seed=0)
        train = pulse_train(cfg)
        assert np.array_equal(train, np.arange(train.size) * cfg.period_ps)

    def test_jitter_standard_deviation(self):
        cfg = SimConfig(duration_s=1.0, jitter_sigma_ns=1.0, seed=1)
        train = pulse_train(cfg)
        resid = train - np.arange(train.size) * cfg.period_ps
        assert 900 <= resid.std() <= 1100  # ps

    def test_invalid_config(self):
        with pytest.raises(ConfigError):
            SimConfig(pulse_width_ns=30_000)
        with pytest.raises(ConfigError):
            SimConfig(pair_efficiency=0.7)


class TestSimulateRun:
    def test_byte_identical_determinism(self):
        a = simulate_run(SHORT, StateModel(1, 1), 0.0, 22.5)
        b = simulate_run(SHORT, StateModel(1, 1), 0.0, 22.5)
        assert write_stream(a, "binary") == write_stream(b, "binary")
        c = simulate_run(SHORT, StateModel(1, 1), 0.0, 22.5, seed=999)
        assert write_stream(c, "binary") != write_stream(a, "binary")

    def test_singles_rate_matches_config(self):
        stream = simulate_run(SHORT, StateModel(1, 1), 0.0, 22.5)
        stats = run_statistics(stream, coincidences_of(stream))
        expect = SHORT.mean_detected_photons_per_pulse * SHORT.n_pulses
        sigma = math.sqrt(expect)
        assert abs(stats.singles_a - expect) < 4 * sigma
        assert abs(stats.singles_b - expect) < 4 * sigma

    def test_coincidence_rate_tracks_correlation(self):
        # coincidences/singles = pair_efficiency * (1 + E) / 2, here with E = 1
        stream = simulate_run(SHORT, StateModel(1, 1), 0.0, 0.0)
        stats = run_statistics(stream, coincidences_of(stream))
        ratio = stats.n_coincidences / (stats.singles_a + stats.singles_b)
        # detector jitter loses the pairs separated by more than the window
        window_keep = math.erf(3.0 / (math.sqrt(2) * math.sqrt(2)))
        expect = SHORT.pair_efficiency * (1 + 1.0) / 2 * window_keep
        assert ratio == pytest.approx(expect, rel=0.05)

    def test_setting_dependence_three_sigma(self):
        state = StateModel(1, 1)
        for b_deg in (22.5, 67.5):
            stream = simulate_run(SHORT, state, 0.0, b_deg, seed=run_seed(5, int(b_deg)))
            n_coinc = len(coincidences_of(stream))
            e = correlation(state, 0.0, b_deg)
            mu = SHORT.n_pulses * SHORT.mean_pairs_per_pulse
            p = 0.25 * (1 + e) * SHORT.detector_efficiency ** 2
            expect = mu * p
            assert abs(n_coinc - expect) < 3 * math.sqrt(expect) + 0.04 * expect

    def test_accidentals_add_singles(self):
        cfg = SimConfig(duration_s=2.0, accidental_rate=0.02, seed=9)
        base = SimConfig(duration_s=2.0, seed=9)
        with_acc = run_statistics(simulate_run(cfg, StateModel(1, 1), 0, 0),
                                  coincidences_of(simulate_run(cfg, StateModel(1, 1), 0, 0)))
        without = run_statistics(simulate_run(base, StateModel(1, 1), 0, 0),
                                 coincidences_of(simulate_run(base, StateModel(1, 1), 0, 0)))
        assert with_acc.singles_a > without.singles_a


class TestCampaignLevel:
    def test_trigger_spacing_within_jitter(self):
        stream = simulate_run(SHORT, StateModel(1, 1), 0.0, 45.0)
        spacing = np.diff(stream.trigger_times)
        bound = 6 * SHORT.jitter_sigma_ns * 1000 + 1
        assert np.all(np.abs(spacing - SHORT.period_ps) <= bound)

    def test_full_simulation_chsh_tracks_model(self):
        from biphoton_rng.quantum import SettingsSet, chsh_from_counts, chsh_from_model
        from biphoton_rng.simulator import campaign_runs, run_seed

        state = StateModel(0.9, 0.97)
        config = SimConfig(duration_s=10.0, seed=404)
        counts = {}
        for spec in campaign_runs(SettingsSet()):
            stream = simulate_run(config, state, spec["a_deg"], spec["b_deg"],
                                  seed=run_seed(config.seed, spec["run_index"]))
            counts[(spec["x"], spec["y"], spec["rot_a"], spec["rot_b"])] = \
                len(coincidences_of(stream))
        s_meas, s_err = chsh_from_counts(counts)
        assert abs(s_meas - chsh_from_model(state)) < 0.05

    def test_stroboscope_flat_coincidences_and_efficiency(self):
        from biphoton_rng.timetag import stroboscope

        config = SimConfig(duration_s=20.0, seed=606)
        runs = []
        for i, b_deg in enumerate((0.0, 45.0, 90.0, 135.0)):
            stream = simulate_run(config, StateModel(1, 1), 0.0, b_deg, seed=600 + i)
            runs.append((stream, coincidences_of(stream)))
        period, width = config.period_ps, config.width_ps
        hist = stroboscope(period, 20_000, "coincidences", coincidences=runs[1][1])
        inside = hist.values[: width // 20_000]
        outside = hist.values[width // 20_000 + 1:]
        # flat over the pulse within Poisson scatter, empty outside
        expected = inside.mean()
        chi2 = float((((inside - expected) ** 2) / expected).sum())
        from scipy.special import gammaincc
        assert gammaincc((inside.size - 1) / 2.0, chi2 / 2.0) > 0.001
        assert outside.sum() <= 0.005 * hist.total
        eff = stroboscope(period, 50_000, "efficiency", runs=runs)
        eff_inside = eff.values[: width // 50_000]
        assert np.nanstd(eff_inside) / np.nanmean(eff_inside) < 0.2
        assert np.nanmean(eff_inside) == pytest.approx(
            config.detector_efficiency / 2, rel=0.15)

    def test_stroboscope_s_parameter_tracks_model(self):
        from biphoton_rng.quantum import SettingsSet, chsh_from_model
        from biphoton_rng.simulator import campaign_runs, run_seed
        from biphoton_rng.timetag import stroboscope

        state = StateModel(1.0, 1.0)
        config = SimConfig(duration_s=8.0, seed=707)
        chsh_runs = {}
        for spec in campaign_runs(SettingsSet()):
            stream = simulate_run(config, state, spec["a_deg"], spec["b_deg"],
                                  seed=run_seed(config.seed, spec["run_index"]))
            key = (spec["x"], spec["y"], spec["rot_a"], spec["rot_b"])
            chsh_runs[key] = coincidences_of(stream)
        hist = stroboscope(config.period_ps, 100_000, "s_parameter", chsh_runs=chsh_runs)
        inside = hist.values[: config.width_ps // 100_000]
        assert np.nanmean(inside) == pytest.approx(chsh_from_model(state), abs=0.15)


class TestShapes:
    def test_dt_exponential_and_deltat_uniform(self):
        stream = simulate_run(SimConfig(duration_s=20.0, seed=7), StateModel(1, 1), 0.0, 45.0)
        coinc = coincidences_of(stream)
        dt = build_dt(coinc)
        res = exponential_gof(dt.values, stream.meta.period_ps)
        assert res.p_value > 0.01
        deltat = build_deltat(coinc)
        res = uniform_gof(deltat.values, 0.0, stream.meta.width_ps)
        assert res.p_value > 0.01

    def test_offsets_mostly_inside_pulse(self):
        stream = simulate_run(SimConfig(duration_s=10.0, seed=3), StateModel(1, 1), 0.0, 45.0)
        coinc = coincidences_of(stream)
        outside = np.count_nonzero(coinc.offset > stream.meta.width_ps)
        # only jitter wrap-around may leave the pulse window (about 6e-4)
        assert outside / len(coinc) < 3e-3

    def test_offsets_positive_and_below_period(self):
        stream = simulate_run(SHORT, StateModel(1, 1), 0.0, 45.0)
        coinc = coincidences_of(stream)
        assert coinc.offset.min() >= 0
        # trigger-to-trigger spacing fluctuates by the pump jitter, so the
        # wrap-around offsets may exceed the nominal period by that bound
        jitter_bound = 6 * SHORT.jitter_sigma_ns * 1000
        assert coinc.offset.max() < stream.meta.period_ps + jitter_bound

    def test_dt_mean_matches_rate(self):
        # mean inter-coincidence time ~ period / (coincidences per pulse)
        stream = simulate_run(SimConfig(duration_s=10.0, seed=5), StateModel(1, 1), 0.0, 45.0)
        coinc = coincidences_of(stream)
        dt = build_dt(coinc).values
        stats = run_statistics(stream, coinc)
        mu = stats.n_coincidences / stats.n_pulses
        expected = stream.meta.period_ps / mu
        assert abs(dt.mean() - expected) < 3 * dt.std() / math.sqrt(dt.size) + 0.01 * expected

    def test_zero_jitter_offsets_inside_pulse(self):
        cfg = SimConfig(duration_s=5.0, jitter_sigma_ns=0.0, seed=8)
        stream = simulate_run(cfg, StateModel(1, 1), 0.0, 45.0)
        coinc = coincidences_of(stream)
        # without jitter nothing leaves the pulse window (accidental rate 0)
        assert coinc.offset.max() < cfg.width_ps
