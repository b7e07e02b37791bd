"""Two-parameter mixed biphoton model and CHSH estimators.

The state family is rho = v * rho_deph(c) + (1 - v) * I/4, where rho_deph(c)
is the phi+ Bell state dephased so its corner coherences shrink to c/2.
c models distinguishability (walk-off compensation quality), v a white-noise
admixture (accidental coincidences). Closed forms used throughout:

    E(a, b)     = v (cos 2a cos 2b + c sin 2a sin 2b)
    S           = |E(a,b) - E(a,b') + E(a',b) + E(a',b')|
    concurrence = 2 max(0, v c / 2 - (1 - v) / 4)
    purity      = (1 + v^2 + 2 v^2 c^2) / 4

Angles are degrees externally, radians internally.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

TSIRELSON = 2.0 * math.sqrt(2.0)


@dataclass(frozen=True)
class StateModel:
    """Mixed biphoton state with coherence ``c`` and visibility ``v``."""

    c: float = 1.0
    v: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.c <= 1.0 and 0.0 <= self.v <= 1.0):
            raise ConfigError(f"need 0 <= c, v <= 1, got c={self.c}, v={self.v}")

    def density_matrix(self) -> np.ndarray:
        """4x4 density operator in the {HH, HV, VH, VV} basis."""
        rho_deph = np.zeros((4, 4))
        rho_deph[0, 0] = rho_deph[3, 3] = 0.5
        rho_deph[0, 3] = rho_deph[3, 0] = self.c / 2.0
        return self.v * rho_deph + (1.0 - self.v) * np.eye(4) / 4.0


@dataclass(frozen=True)
class SettingsSet:
    """CHSH analyzer angles in degrees (taken modulo 180)."""

    a: float = 0.0
    a_prime: float = 45.0
    b: float = 22.5
    b_prime: float = 67.5

    def __post_init__(self):
        for name in ("a", "a_prime", "b", "b_prime"):
            object.__setattr__(self, name, float(getattr(self, name)) % 180.0)

    @classmethod
    def from_theta(cls, theta_deg: float) -> "SettingsSet":
        """The paper-literal layout {a=0, a'=2 theta, b=0, b'=3 theta}."""
        return cls(0.0, 2.0 * theta_deg, 0.0, 3.0 * theta_deg)


DEFAULT_SETTINGS = SettingsSet()


def correlation(state: StateModel, a_deg: float, b_deg: float) -> float:
    """E(a, b) for polarizers at a and b degrees."""
    a = math.radians(a_deg)
    b = math.radians(b_deg)
    return state.v * (math.cos(2 * a) * math.cos(2 * b)
                      + state.c * math.sin(2 * a) * math.sin(2 * b))


def chsh_from_model(state: StateModel, settings: SettingsSet = DEFAULT_SETTINGS) -> float:
    return abs(correlation(state, settings.a, settings.b)
               - correlation(state, settings.a, settings.b_prime)
               + correlation(state, settings.a_prime, settings.b)
               + correlation(state, settings.a_prime, settings.b_prime))


def concurrence(state: StateModel) -> float:
    return 2.0 * max(0.0, state.v * state.c / 2.0 - (1.0 - state.v) / 4.0)


def purity(state: StateModel) -> float:
    return (1.0 + state.v ** 2 + 2.0 * (state.v * state.c) ** 2) / 4.0


# ---------------------------------------------------------------------------
# estimation from counts


def correlation_from_counts(n_pp: int, n_pm: int, n_mp: int, n_mm: int) -> float:
    """Standard coincidence estimator E = (pp - pm - mp + mm) / total.

    With one detector per station the four counts come from four runs with
    settings {a, a+90} x {b, b+90}.
    """
    for n in (n_pp, n_pm, n_mp, n_mm):
        if n < 0:
            raise DataError("counts must be non-negative")
    total = n_pp + n_pm + n_mp + n_mm
    if total == 0:
        raise DataError("insufficient data: zero total counts")
    return (n_pp - n_pm - n_mp + n_mm) / total


def chsh_from_counts(counts: dict[tuple[int, int, int, int], int],
                     settings: SettingsSet = DEFAULT_SETTINGS) -> tuple[float, float]:
    """CHSH S and its standard error from sixteen run counts.

    ``counts`` maps (x, y, rot_a, rot_b) to a coincidence count, where x/y in
    {0,1} select a/a' and b/b' of ``settings`` and rot flags mark runs taken
    with that polarizer rotated by 90 degrees. Errors by binomial propagation:
    var E = (1 - E^2) / total per correlation, added in quadrature.
    """
    missing = [k for x in (0, 1) for y in (0, 1) for ra in (0, 1) for rb in (0, 1)
               if (k := (x, y, ra, rb)) not in counts]
    if missing:
        raise DataError(f"missing counts for settings {missing}")
    s = 0.0
    var = 0.0
    for x in (0, 1):
        for y in (0, 1):
            pp = counts[(x, y, 0, 0)]
            pm = counts[(x, y, 0, 1)]
            mp = counts[(x, y, 1, 0)]
            mm = counts[(x, y, 1, 1)]
            e = correlation_from_counts(pp, pm, mp, mm)
            total = pp + pm + mp + mm
            var += (1.0 - e * e) / total
            sign = -1.0 if (x, y) == (0, 1) else 1.0
            s += sign * e
    return abs(s), math.sqrt(var)


# ---------------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class CalibrationResult:
    state: StateModel
    targets: dict[str, float]
    achieved: dict[str, float]
    relative_residuals: dict[str, float]

    @property
    def max_relative_residual(self) -> float:
        return max(abs(r) for r in self.relative_residuals.values())


def _metrics_grid(c: np.ndarray, v: np.ndarray, settings: SettingsSet):
    a, ap, b, bp = (math.radians(x) for x in
                    (settings.a, settings.a_prime, settings.b, settings.b_prime))

    def corr(aa, bb):
        return v * (math.cos(2 * aa) * math.cos(2 * bb)
                    + c * math.sin(2 * aa) * math.sin(2 * bb))

    s = np.abs(corr(a, b) - corr(a, bp) + corr(ap, b) + corr(ap, bp))
    conc = 2.0 * np.maximum(0.0, v * c / 2.0 - (1.0 - v) / 4.0)
    pur = (1.0 + v ** 2 + 2.0 * (v * c) ** 2) / 4.0
    return s, conc, pur


def calibrate(target_s: float, target_c: float, target_p: float,
              settings: SettingsSet = DEFAULT_SETTINGS,
              grid_step: float = 1e-3) -> CalibrationResult:
    """Least-squares fit of (c, v) to a target (S, C, P) triple.

    Grid scan at ``grid_step`` resolution over the [0,1]^2 box, then a local
    refinement pass at 1/100 of the step. The family is overdetermined by
    three targets, so residuals need not vanish; the result reports the
    achieved triple and per-target relative residuals.
    """
    if not (0.0 < target_s <= TSIRELSON + 1e-9):
        raise ConfigError(f"target S must lie in (0, 2*sqrt(2)], got {target_s}")
    if not (0.0 <= target_c <= 1.0):
        raise ConfigError(f"target C must lie in [0, 1], got {target_c}")
    if not (0.25 <= target_p <= 1.0):
        raise ConfigError(f"target P must lie in [0.25, 1], got {target_p}")

    targets = {"S": target_s, "C": target_c, "P": target_p}

    def objective(c, v):
        s, conc, pur = _metrics_grid(c, v, settings)
        obj = ((s - target_s) / target_s) ** 2
        obj += ((conc - target_c) / target_c) ** 2 if target_c else (conc) ** 2
        obj += ((pur - target_p) / target_p) ** 2
        return obj

    axis = np.arange(0.0, 1.0 + grid_step / 2, grid_step)
    cc, vv = np.meshgrid(axis, axis, indexing="ij")
    best = np.unravel_index(np.argmin(objective(cc, vv)), cc.shape)
    c0, v0 = float(cc[best]), float(vv[best])

    fine = grid_step / 100.0
    span = np.arange(-grid_step, grid_step + fine / 2, fine)
    cf = np.clip(c0 + span, 0.0, 1.0)
    vf = np.clip(v0 + span, 0.0, 1.0)
    cc, vv = np.meshgrid(cf, vf, indexing="ij")
    best = np.unravel_index(np.argmin(objective(cc, vv)), cc.shape)
    state = StateModel(float(cc[best]), float(vv[best]))

    achieved = {
        "S": chsh_from_model(state, settings),
        "C": concurrence(state),
        "P": purity(state),
    }
    residuals = {k: (achieved[k] - targets[k]) / targets[k] if targets[k] else achieved[k]
                 for k in targets}
    return CalibrationResult(state, targets, achieved, residuals)
