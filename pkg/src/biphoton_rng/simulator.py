"""Seedable generation of physics-faithful time-tag streams.

Rate calibration (documented here because two knobs interact):

* ``pair_efficiency`` is the setting-averaged run efficiency
  2 n_coinc / (singles_A + singles_B). A pair is counted as a coincidence
  when both photons pass their polarizer (joint probability 1/4 (1 + ij E),
  averaging to 1/4 over the sixteen canonical rotation runs) and both
  detectors fire, so the average efficiency equals eta_d / 2 and the
  per-detector efficiency is solved as eta_d = 2 * pair_efficiency.
* ``mean_detected_photons_per_pulse`` is the expected detected singles per
  station per pulse, singles/station/pulse = mu_pairs * (1/2) * eta_d
  (the 1/2 is the polarizer marginal), so mu_pairs =
  2 * mean_detected_photons_per_pulse / eta_d.

With the defaults (0.08, 0.25): eta_d = 0.5, mu_pairs = 0.32, giving about
1.2e6 singles per station and about 3e5 coincidences in a 300 s run at
50 kHz for an uncorrelated setting.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .quantum import StateModel, correlation
from .timetag import RunMeta, TimeTagStream

_CODE_A, _CODE_B, _CODE_T = 0, 1, 2


@dataclass(frozen=True)
class SimConfig:
    """Run profile; defaults reproduce the reference 300 s, 50 kHz campaign."""

    pulse_period_ns: float = 20_000.0
    pulse_width_ns: float = 500.0
    duration_s: float = 300.0
    mean_detected_photons_per_pulse: float = 0.08
    pair_efficiency: float = 0.25
    jitter_sigma_ns: float = 1.0
    accidental_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (self.pulse_period_ns > self.pulse_width_ns > 0):
            raise ConfigError("need pulse_period > pulse_width > 0")
        if self.duration_s <= 0:
            raise ConfigError("duration must be positive")
        if not (0.0 <= self.pair_efficiency <= 0.5):
            raise ConfigError(
                "pair_efficiency must lie in [0, 0.5] (detector efficiency is "
                "2 * pair_efficiency and cannot exceed 1)")
        if self.mean_detected_photons_per_pulse < 0 or self.accidental_rate < 0:
            raise ConfigError("rates must be non-negative")
        if self.jitter_sigma_ns < 0:
            raise ConfigError("jitter sigma must be non-negative")

    @property
    def period_ps(self) -> int:
        return int(round(self.pulse_period_ns * 1000))

    @property
    def width_ps(self) -> int:
        return int(round(self.pulse_width_ns * 1000))

    @property
    def n_pulses(self) -> int:
        return int(self.duration_s * 1e12 // self.period_ps)

    @property
    def detector_efficiency(self) -> float:
        return 2.0 * self.pair_efficiency

    @property
    def mean_pairs_per_pulse(self) -> float:
        eta = self.detector_efficiency
        if eta == 0:
            return 0.0
        return 2.0 * self.mean_detected_photons_per_pulse / eta

    def meta(self, a_deg: float, b_deg: float, seed: int | None = None) -> RunMeta:
        return RunMeta(
            angles_deg=(a_deg, b_deg),
            period_ns=self.pulse_period_ns,
            width_ns=self.pulse_width_ns,
            duration_s=self.duration_s,
            seed=self.seed if seed is None else seed,
        )


def pulse_train(config: SimConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Trigger timestamps (ps): k * period plus Gaussian jitter clipped at 3 sigma."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n = config.n_pulses
    lattice = np.arange(n, dtype=np.int64) * config.period_ps
    if config.jitter_sigma_ns > 0:
        sigma_ps = config.jitter_sigma_ns * 1000.0
        jitter = rng.normal(0.0, sigma_ps, n)
        np.clip(jitter, -3.0 * sigma_ps, 3.0 * sigma_ps, out=jitter)
        lattice = lattice + np.rint(jitter).astype(np.int64)
    np.maximum(lattice, 0, out=lattice)
    return lattice


def simulate_run(config: SimConfig, state: StateModel, a_deg: float, b_deg: float,
                 seed: int | None = None) -> TimeTagStream:
    """One time-tagged run at polarizer angles (a, b).

    Per pulse the pair count is Poisson; each pair is born uniformly inside
    the (jittered) pulse window; joint polarizer outcomes follow
    P(i, j | a, b) = 1/4 (1 + i j E(a, b)); a photon is recorded iff its
    outcome is "+" and its detector fires; detection adds Gaussian jitter.
    Identical (config, state, a, b, seed) gives a byte-identical stream.
    """
    run_seed = config.seed if seed is None else seed
    rng = np.random.default_rng(run_seed)

    triggers = pulse_train(config, rng)
    n_pulses = triggers.size
    sigma_ps = config.jitter_sigma_ns * 1000.0
    eta = config.detector_efficiency

    pairs_per_pulse = rng.poisson(config.mean_pairs_per_pulse, n_pulses)
    m = int(pairs_per_pulse.sum())
    pulse_of_pair = np.repeat(np.arange(n_pulses, dtype=np.int64), pairs_per_pulse)
    birth = triggers[pulse_of_pair] + rng.integers(0, config.width_ps, m, dtype=np.int64)

    e_ab = correlation(state, a_deg, b_deg)
    p_pp = 0.25 * (1.0 + e_ab)
    p_pm = 0.25 * (1.0 - e_ab)
    p_mp = 0.25 * (1.0 - e_ab)
    cdf = np.cumsum([p_pp, p_pm, p_mp])
    cell = np.searchsorted(cdf, rng.random(m), side="right")
    plus_a = cell <= 1          # cells 0 (++) and 1 (+-)
    plus_b = (cell == 0) | (cell == 2)

    det_a = plus_a & (rng.random(m) < eta)
    det_b = plus_b & (rng.random(m) < eta)

    def detection_times(mask: np.ndarray) -> np.ndarray:
        t = birth[mask]
        if sigma_ps > 0 and t.size:
            t = t + np.rint(rng.normal(0.0, sigma_ps, t.size)).astype(np.int64)
            np.maximum(t, 0, out=t)
        return t

    times_a = detection_times(det_a)
    times_b = detection_times(det_b)

    if config.accidental_rate > 0:
        acc = []
        for _ in ("A", "B"):
            counts = rng.poisson(config.accidental_rate, n_pulses)
            k = int(counts.sum())
            pulses = np.repeat(np.arange(n_pulses, dtype=np.int64), counts)
            acc.append(triggers[pulses] + rng.integers(0, config.width_ps, k, dtype=np.int64))
        times_a = np.concatenate([times_a, acc[0]])
        times_b = np.concatenate([times_b, acc[1]])

    times = np.concatenate([times_a, times_b, triggers])
    codes = np.concatenate([
        np.full(times_a.size, _CODE_A, dtype=np.uint8),
        np.full(times_b.size, _CODE_B, dtype=np.uint8),
        np.full(triggers.size, _CODE_T, dtype=np.uint8),
    ])
    order = np.lexsort((codes, times))
    return TimeTagStream(codes[order], times[order], config.meta(a_deg, b_deg, run_seed))


# ---------------------------------------------------------------------------
# campaign layout: the sixteen-run set of one settings family


def rotation_runs(settings_pair: tuple[float, float]) -> list[tuple[float, float, int, int]]:
    """The four rotation runs (a, b, rot_a, rot_b) measuring one correlation."""
    a, b = settings_pair
    return [(a + 90.0 * ra, b + 90.0 * rb, ra, rb) for ra in (0, 1) for rb in (0, 1)]


def campaign_runs(settings) -> list[dict]:
    """All sixteen runs of a CHSH campaign, with stable derived seeds.

    Returns dicts with keys x, y, rot_a, rot_b, a_deg, b_deg, run_index.
    """
    runs = []
    idx = 0
    for x, aa in enumerate((settings.a, settings.a_prime)):
        for y, bb in enumerate((settings.b, settings.b_prime)):
            for a_deg, b_deg, ra, rb in rotation_runs((aa, bb)):
                runs.append({
                    "x": x, "y": y, "rot_a": ra, "rot_b": rb,
                    "a_deg": a_deg % 180.0, "b_deg": b_deg % 180.0,
                    "run_index": idx,
                })
                idx += 1
    return runs


def run_seed(base_seed: int, run_index: int) -> int:
    """Stable per-run seed derived from the campaign seed."""
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(run_index,))
    return int(ss.generate_state(1, np.uint64)[0])


def simulate_campaign(config: SimConfig, state: StateModel, settings) -> list[tuple[dict, TimeTagStream]]:
    """Simulate the full sixteen-run set; independent seeds per run."""
    out = []
    for spec in campaign_runs(settings):
        stream = simulate_run(config, state, spec["a_deg"], spec["b_deg"],
                              seed=run_seed(config.seed, spec["run_index"]))
        out.append((spec, stream))
    return out


def simulate_pair_counts(state: StateModel, settings, n_pairs: int,
                         seed: int = 0) -> dict[tuple[int, int, int, int], int]:
    """Coincidence counts of the sixteen runs at the pair level.

    Each run draws ``n_pairs`` pairs and counts those whose joint outcome is
    (+, +) at its (possibly rotated) angles; detector efficiency scales all
    sixteen counts equally and is irrelevant to the correlation estimators,
    so it is left out. Feed the result to quantum.chsh_from_counts.
    """
    rng = np.random.default_rng(seed)
    counts = {}
    for spec in campaign_runs(settings):
        p = 0.25 * (1.0 + correlation(state, spec["a_deg"], spec["b_deg"]))
        counts[(spec["x"], spec["y"], spec["rot_a"], spec["rot_b"])] = \
            int(rng.binomial(n_pairs, p))
    return counts
