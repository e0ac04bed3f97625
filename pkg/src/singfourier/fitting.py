"""Decay-rate fits for Cesaro and return-probability curves.

Three models are considered: a pure power law P ~ C t^alpha (fitted in
log-log space), the critical form P ~ (a + b log t)/t (fitted as a straight
line in t P against log t), and saturation at a constant.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .exceptions import FitError

REGIMES = ("power", "log_over_t", "saturated", "indeterminate")
MIN_POINTS = 8
DEFAULT_T_MIN = 10.0
LOG_R2_THRESHOLD = 0.99
ADMISSIBLE_R2 = 0.95
DELTA_R2 = 0.01
SATURATION_SPREAD = 0.01


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    intercept: float
    r_squared: float
    window: tuple
    regime: str
    ci_half_width: float = float("nan")
    n_points: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = [float(w) for w in self.window]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d) -> "DecayFit":
        return cls(float(d["exponent"]), float(d["intercept"]), float(d["r_squared"]),
                   tuple(d["window"]), d["regime"], float(d.get("ci_half_width", "nan")),
                   int(d.get("n_points", 0)))


def _samples(curve):
    """(t, values, trusted-limit) from a curve object or a (t, values) pair."""
    if isinstance(curve, tuple):
        t, v = curve
        return np.asarray(t, dtype=float), np.asarray(v, dtype=float), np.inf
    t = np.asarray(curve.t_grid, dtype=float)
    v = np.asarray(curve.values, dtype=float)
    trusted = getattr(curve, "trusted", None)
    limit = t[trusted].max() if trusted is not None and trusted.any() else np.inf
    if trusted is not None and not trusted.any():
        limit = 0.0
    return t, v, limit


def _select(curve, window, enforce_trust=True):
    t, v, limit = _samples(curve)
    if window is None:
        lo, hi = DEFAULT_T_MIN, (min(t.max(), limit) if enforce_trust else t.max())
    else:
        lo, hi = float(window[0]), float(window[1])
        if enforce_trust and hi > limit * (1 + 1e-12):
            raise FitError(f"window end {hi:.6g} lies beyond the trusted range ({limit:.6g})")
    mask = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    t, v = t[mask], v[mask]
    if len(t) < MIN_POINTS:
        raise FitError(f"need at least {MIN_POINTS} points in the window, got {len(t)}")
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise FitError("values in the window must be finite and positive")
    return t, v, (float(t[0]), float(t[-1]))


def _line_fit(x, y):
    res = stats.linregress(x, y)
    pred = res.intercept + res.slope * x
    return res.slope, res.intercept, _r_squared(y, pred), res.stderr


def _r_squared(y, pred) -> float:
    ss_tot = float(((y - y.mean()) ** 2).sum())
    ss_res = float(((y - pred) ** 2).sum())
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return max(0.0, 1.0 - ss_res / ss_tot)


def _half_width(stderr, n) -> float:
    return float(stats.t.ppf(0.975, n - 2) * stderr)


def fit_power_law(curve, window=None) -> DecayFit:
    """Least-squares line through (log t, log P); the slope is the exponent.

    ``window`` defaults to t >= 10 up to the end of the curve's trusted
    range.  The reported half-width is the 95% confidence band of the slope.
    """
    t, v, win = _select(curve, window)
    slope, icpt, r2, se = _line_fit(np.log(t), np.log(v))
    regime = "power" if r2 >= ADMISSIBLE_R2 else "indeterminate"
    return DecayFit(float(slope), float(icpt), r2, win, regime, _half_width(se, len(t)), len(t))


def _log_fit(t, v, win) -> DecayFit:
    slope, icpt, r2, se = _line_fit(np.log(t), t * v)
    regime = "log_over_t" if (r2 > LOG_R2_THRESHOLD and slope > 0) else "indeterminate"
    return DecayFit(float(slope), float(icpt), r2, win, regime, _half_width(se, len(t)), len(t))


def detect_log_over_t(curve, window=None) -> DecayFit:
    """Fit t P(t) = a + b log t; ``exponent`` holds b and ``intercept`` a.

    The regime is ``log_over_t`` when r^2 > 0.99 and b > 0, otherwise
    ``indeterminate``.
    """
    t, v, win = _select(curve, window)
    return _log_fit(t, v, win)


def is_saturated(t, v) -> bool:
    """Relative spread of P below 1% over the last half-decade of t."""
    tail = t >= t[-1] / np.sqrt(10.0)
    if tail.sum() < 2:
        return False
    vt = v[tail]
    return bool((vt.max() - vt.min()) / vt.mean() < SATURATION_SPREAD)


def classify_regime(curve, window=None) -> DecayFit:
    """Pick the decay model that describes the curve best.

    Saturation is tested first.  Otherwise the power and log models are
    compared on the compensated scale t P(t), where they differ most: the
    log model wins only if it passes :func:`detect_log_over_t` and its r^2
    there beats the power model's by at least 0.01.  A model is admissible
    only with r^2 >= 0.95 on its own fitting scale; with neither admissible
    the result is ``indeterminate``.

    Unlike the fitters this looks at the whole window, including times past
    the trusted range, since recognising saturation is part of its job.
    """
    t, v, win = _select(curve, window, enforce_trust=False)
    if np.log10(t[-1] / t[0]) < 2.0 - 1e-9:
        raise FitError("classification needs at least two decades of t")
    power = fit_power_law((t, v), win)
    if is_saturated(t, v):
        level = float(v[t >= t[-1] / np.sqrt(10.0)].mean())
        return DecayFit(0.0, level, power.r_squared, win, "saturated",
                        power.ci_half_width, len(t))
    log = _log_fit(t, v, win)
    y = t * v
    power_on_y = _r_squared(y, t * np.exp(power.intercept) * t ** power.exponent)
    if log.regime == "log_over_t" and log.r_squared >= power_on_y + DELTA_R2:
        return log
    if power.r_squared >= ADMISSIBLE_R2:
        return power
    if log.r_squared >= ADMISSIBLE_R2 and log.exponent > 0:
        return log
    return DecayFit(power.exponent, power.intercept, power.r_squared, win, "indeterminate",
                    power.ci_half_width, len(t))
