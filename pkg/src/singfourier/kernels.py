"""Power-law singular kernels K_{beta,f} and the measures K_{beta,f} g dx.

K_{beta,f}(x) = int_0^1 y^(-beta) f(x - y) dy is the convolution of the
truncated power y^(-beta) on (0, 1] with a nonnegative density f.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import betainc

from ._quadrature import integrate, segment_integrals
from .exceptions import FitError

CRITICAL_TOL = 1e-12


@dataclass(frozen=True)
class PowerLawExponent:
    beta: float

    def __post_init__(self):
        b = float(self.beta)
        if not (0.0 <= b < 1.0):
            raise ValueError(f"beta must lie in [0, 1), got {self.beta!r}")
        object.__setattr__(self, "beta", b)

    def __float__(self):
        return self.beta

    @property
    def regime(self) -> str:
        if abs(self.beta - 0.5) <= CRITICAL_TOL:
            return "critical"
        return "sub-critical" if self.beta < 0.5 else "super-critical"


def as_beta(beta) -> float:
    """Validated float value of a PowerLawExponent or plain number."""
    if isinstance(beta, PowerLawExponent):
        return beta.beta
    return PowerLawExponent(beta).beta


DENSITY_KINDS = ("indicator_unit", "power_law_delta", "tabulated")


@dataclass(frozen=True, eq=False)
class DensityFunction:
    """Nonnegative integrable density f.

    Build with :meth:`indicator_unit`, :meth:`power_law_delta` or
    :meth:`tabulated`; ``scale`` multiplies the whole function.
    Tabulated densities interpolate linearly and vanish off their grid.
    """

    kind: str
    delta: float | None = None
    grid: np.ndarray | None = field(default=None, repr=False)
    values: np.ndarray | None = field(default=None, repr=False)
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in DENSITY_KINDS:
            raise ValueError(f"unknown density kind {self.kind!r}")
        if not (np.isfinite(self.scale) and self.scale >= 0):
            raise ValueError("scale must be finite and nonnegative")
        if self.kind == "power_law_delta":
            if self.delta is None or not (0.0 < self.delta < 1.0):
                raise ValueError("power_law_delta needs delta in (0, 1)")
        if self.kind == "tabulated":
            grid = np.asarray(self.grid, dtype=float)
            values = np.asarray(self.values, dtype=float)
            if grid.ndim != 1 or len(grid) < 2 or grid.shape != values.shape:
                raise ValueError("tabulated density needs matching 1-D grid and values")
            if np.any(np.diff(grid) <= 0):
                raise ValueError("tabulated grid must be strictly increasing")
            if not np.all(np.isfinite(values)) or np.any(values < 0):
                raise ValueError("tabulated values must be finite and nonnegative")
            object.__setattr__(self, "grid", grid)
            object.__setattr__(self, "values", values)
        # computed eagerly so instances stay read-only after construction
        _ = self.l1_norm

    @classmethod
    def indicator_unit(cls, scale=1.0):
        return cls("indicator_unit", scale=scale)

    @classmethod
    def power_law_delta(cls, delta, scale=1.0):
        return cls("power_law_delta", delta=float(delta), scale=scale)

    @classmethod
    def tabulated(cls, grid, values, scale=1.0):
        return cls("tabulated", grid=grid, values=values, scale=scale)

    def scaled(self, c):
        return DensityFunction(self.kind, self.delta, self.grid, self.values, self.scale * c)

    @cached_property
    def l1_norm(self) -> float:
        if self.kind == "indicator_unit":
            base = 1.0
        elif self.kind == "power_law_delta":
            base = 1.0 / self.delta
        else:
            base = float(np.trapezoid(self.values, self.grid))
        return self.scale * base

    @property
    def support(self) -> tuple[float, float]:
        if self.kind == "tabulated":
            return float(self.grid[0]), float(self.grid[-1])
        return 0.0, 1.0

    @property
    def breakpoints(self) -> np.ndarray:
        if self.kind == "tabulated":
            return self.grid.copy()
        return np.array([0.0, 1.0])

    @property
    def singular_exponent(self) -> float:
        """Exponent a of the x^(-a) blow-up at the left support end."""
        return 1.0 - self.delta if self.kind == "power_law_delta" else 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "indicator_unit":
            out = ((x > 0) & (x <= 1)).astype(float)
        elif self.kind == "power_law_delta":
            out = np.zeros_like(x)
            m = (x > 0) & (x <= 1)
            out[m] = x[m] ** (self.delta - 1.0)
        else:
            out = np.interp(x, self.grid, self.values, left=0.0, right=0.0)
            out = np.where((x < self.grid[0]) | (x > self.grid[-1]), 0.0, out)
        return self.scale * out

    def to_dict(self) -> dict:
        params = {"scale": self.scale}
        if self.kind == "power_law_delta":
            params["delta"] = self.delta
        elif self.kind == "tabulated":
            params["grid"] = self.grid.tolist()
            params["values"] = self.values.tolist()
        return {"kind": self.kind, "params": params}

    @classmethod
    def from_dict(cls, d) -> "DensityFunction":
        p = dict(d.get("params", {}))
        kind = d["kind"]
        scale = p.get("scale", 1.0)
        if kind == "indicator_unit":
            return cls.indicator_unit(scale)
        if kind == "power_law_delta":
            return cls.power_law_delta(p["delta"], scale)
        if kind == "tabulated":
            return cls.tabulated(p["grid"], p["values"], scale)
        raise ValueError(f"unknown density kind {kind!r}")


WEIGHT_KINDS = ("constant_one", "spectral_density", "tabulated")
SUP_GRID_POINTS = 10_000


@dataclass(frozen=True, eq=False)
class BoundedWeight:
    """Bounded nonnegative weight g.

    ``spectral_density`` wraps the density of states of a lattice operator
    (``operator`` must be a :class:`~singfourier.lattice.LatticeOperator`).
    """

    kind: str
    grid: np.ndarray | None = field(default=None, repr=False)
    values: np.ndarray | None = field(default=None, repr=False)
    operator: object = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if not (np.isfinite(self.scale) and self.scale >= 0):
            raise ValueError("scale must be finite and nonnegative")
        if self.kind == "tabulated":
            grid = np.asarray(self.grid, dtype=float)
            values = np.asarray(self.values, dtype=float)
            if grid.ndim != 1 or len(grid) < 2 or grid.shape != values.shape:
                raise ValueError("tabulated weight needs matching 1-D grid and values")
            if np.any(np.diff(grid) <= 0):
                raise ValueError("tabulated grid must be strictly increasing")
            if not np.all(np.isfinite(values)) or np.any(values < 0):
                raise ValueError("tabulated values must be finite and nonnegative")
            object.__setattr__(self, "grid", grid)
            object.__setattr__(self, "values", values)
        if self.kind == "spectral_density" and self.operator is None:
            raise ValueError("spectral_density weight needs an operator")
        _ = self.sup_norm

    @classmethod
    def constant_one(cls, scale=1.0):
        return cls("constant_one", scale=scale)

    @classmethod
    def tabulated(cls, grid, values, scale=1.0):
        return cls("tabulated", grid=grid, values=values, scale=scale)

    @classmethod
    def spectral_density(cls, operator, scale=1.0):
        return cls("spectral_density", operator=operator, scale=scale)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant_one":
            out = np.ones_like(x)
        elif self.kind == "tabulated":
            out = np.interp(x, self.grid, self.values, left=0.0, right=0.0)
        else:
            from .lattice import spectral_density_values
            out = spectral_density_values(self.operator, x)
        return self.scale * out

    def sup_over(self, a, b) -> float:
        """Max of g on a 10^4-point grid over [a, b], plus tabulated nodes there."""
        xs = np.linspace(a, b, SUP_GRID_POINTS)
        if self.kind == "tabulated":
            inside = self.grid[(self.grid >= a) & (self.grid <= b)]
            xs = np.concatenate([xs, inside])
        return float(np.max(self(xs)))

    @cached_property
    def sup_norm(self) -> float:
        """Sup of g over [0, 1], checked on a 10^4-point grid."""
        return self.sup_over(0.0, 1.0)

    @property
    def breakpoints(self) -> np.ndarray:
        if self.kind == "tabulated":
            return self.grid.copy()
        if self.kind == "spectral_density":
            return np.array([-2.0, 2.0])
        return np.array([])

    def to_dict(self) -> dict:
        params = {"scale": self.scale}
        if self.kind == "tabulated":
            params["grid"] = self.grid.tolist()
            params["values"] = self.values.tolist()
        elif self.kind == "spectral_density":
            params.update(self.operator.to_dict())
        return {"kind": self.kind, "params": params}

    @classmethod
    def from_dict(cls, d) -> "BoundedWeight":
        p = dict(d.get("params", {}))
        kind = d["kind"]
        scale = p.get("scale", 1.0)
        if kind == "constant_one":
            return cls.constant_one(scale)
        if kind == "tabulated":
            return cls.tabulated(p["grid"], p["values"], scale)
        if kind == "spectral_density":
            from .lattice import LatticeOperator
            return cls.spectral_density(LatticeOperator.from_dict(p), scale)
        raise ValueError(f"unknown weight kind {kind!r}")


def kernel_eval(beta, f: DensityFunction, x):
    """K_{beta,f}(x) for scalar or array x, in closed form for every kind."""
    b = as_beta(beta)
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("kernel_eval needs finite x")
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if f.kind == "indicator_unit":
        out = _kernel_indicator(b, x)
    elif f.kind == "power_law_delta":
        out = _kernel_power(b, f.delta, x)
    else:
        # f >= 0 here, so negative values are pure roundoff
        out = np.maximum(_kernel_tabulated(b, f.grid, f.values, x), 0.0)
    out = f.scale * out
    return float(out[0]) if scalar else out


def _kernel_indicator(b, x):
    out = np.zeros_like(x)
    m = (x > 0) & (x < 2)
    hi = np.minimum(1.0, x[m])
    lo = np.maximum(0.0, x[m] - 1.0)
    out[m] = (hi ** (1 - b) - lo ** (1 - b)) / (1 - b)
    return out


def _kernel_power(b, d, x):
    # y = x s turns the integral into an incomplete beta function
    out = np.zeros_like(x)
    bb = beta_fn(1 - b, d)
    inner = (x > 0) & (x <= 1)
    out[inner] = bb * x[inner] ** (d - b)
    outer = (x > 1) & (x < 2)
    xo = x[outer]
    out[outer] = bb * xo ** (d - b) * (betainc(1 - b, d, 1 / xo) - betainc(1 - b, d, (xo - 1) / xo))
    return np.maximum(out, 0.0)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)
NARROW_CELL = 1e-3


def _kernel_tabulated(b, grid, values, x, chunk=2048):
    # On each cell, u = x - z runs over [lo, hi] and f is linear in u with
    # endpoint values f(x - lo), f(x - hi). Writing f through those bounded
    # values (instead of intercept + slope * x) keeps steep cells accurate.
    z0, z1 = grid[:-1], grid[1:]
    v0, v1 = values[:-1], values[1:]
    width = z1 - z0

    def f_at(z):
        theta = np.clip((z - z0) / width, 0.0, 1.0)
        return v0 + theta * (v1 - v0)

    out = np.empty_like(x)
    for s in range(0, len(x), chunk):
        xc = x[s:s + chunk, None]
        lo = np.clip(xc - z1, 0.0, 1.0)
        hi = np.clip(xc - z0, 0.0, 1.0)
        h = hi - lo
        live = h > 0
        f_lo, f_hi = f_at(xc - lo), f_at(xc - hi)
        # closed-form moments m0 = int u^-b, m1 = int u^-b (u - lo)
        m0 = (hi ** (1 - b) - lo ** (1 - b)) / (1 - b)
        m1 = (hi ** (2 - b) - lo ** (2 - b)) / (2 - b) - lo * m0
        hs = np.where(live, h, 1.0)
        wide = f_lo * (m0 - m1 / hs) + f_hi * m1 / hs
        # narrow cells away from u = 0: the weight is smooth, Gauss-Legendre is exact enough
        mid, half = 0.5 * (hi + lo), 0.5 * h
        narrow = np.zeros_like(mid)
        for node, wt in zip(_GL_NODES, _GL_WEIGHTS):
            u = mid + half * node
            frac = 0.5 * (1 + node)
            narrow += wt * np.where(live, u, 1.0) ** -b * (f_lo + frac * (f_hi - f_lo))
        narrow *= half
        use_narrow = live & (lo > 0) & (h < NARROW_CELL * hi)
        val = np.where(use_narrow, narrow, np.where(live, wide, 0.0))
        out[s:s + chunk] = val.sum(axis=1)
    return out


@dataclass(frozen=True, eq=False)
class SingularMeasure:
    """The measure K_{beta,f}(x) g(x) dx."""

    beta: PowerLawExponent
    f: DensityFunction
    g: BoundedWeight = field(default_factory=BoundedWeight.constant_one)

    def __post_init__(self):
        if not isinstance(self.beta, PowerLawExponent):
            object.__setattr__(self, "beta", PowerLawExponent(self.beta))

    @property
    def support(self) -> tuple[float, float]:
        lo, hi = self.f.support
        return lo, hi + 1.0

    @property
    def breakpoints(self) -> np.ndarray:
        fb = self.f.breakpoints
        pts = np.concatenate([fb, fb + 1.0, self.g.breakpoints])
        a, b = self.support
        return np.unique(pts[(pts >= a) & (pts <= b)])

    @property
    def singular(self) -> dict:
        """Breakpoints where the density blows up, with the blow-up exponent."""
        a = self.beta.beta - (1.0 - self.f.singular_exponent)
        if self.f.kind == "power_law_delta" and a > 0:
            return {0.0: a}
        return {}

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return kernel_eval(self.beta, self.f, x) * self.g(x)

    @property
    def young_bound(self) -> float:
        a, b = self.support
        return self.f.l1_norm * self.g.sup_over(a, b) / (1.0 - self.beta.beta)

    def to_dict(self) -> dict:
        return {"beta": self.beta.beta, "f": self.f.to_dict(), "g": self.g.to_dict(),
                "support": list(self.support)}

    @classmethod
    def from_dict(cls, d) -> "SingularMeasure":
        g = BoundedWeight.from_dict(d["g"]) if "g" in d else BoundedWeight.constant_one()
        return cls(PowerLawExponent(d["beta"]), DensityFunction.from_dict(d["f"]), g)


def _integrate_density(mu: SingularMeasure, a, b, rtol=None):
    return integrate(mu.density, a, b, breakpoints=mu.breakpoints,
                     singular=mu.singular, rtol=rtol, atol=1e-300)


def measure_mass(mu: SingularMeasure, rtol=1e-8) -> float:
    """Total mass int K g dx, by graded quadrature over the support."""
    a, b = mu.support
    value, _ = _integrate_density(mu, a, b, rtol=rtol)
    return value


def ball_mass(mu: SingularMeasure, x: float, eps: float) -> float:
    """mu((x - eps, x + eps)) for 0 < eps < 1."""
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    if not np.isfinite(x):
        raise ValueError("x must be finite")
    a, b = mu.support
    lo, hi = max(x - eps, a), min(x + eps, b)
    if hi <= lo:
        return 0.0
    value, _ = _integrate_density(mu, lo, hi, rtol=1e-7)
    return value


def cumulative_mass(mu: SingularMeasure, points) -> np.ndarray:
    """mu((-inf, p]) at each of the given points (any order)."""
    points = np.asarray(points, dtype=float)
    a, b = mu.support
    clipped = np.clip(points, a, b)
    order = np.unique(np.concatenate([[a], clipped]))
    vals, _ = segment_integrals(mu.density, order, breakpoints=mu.breakpoints,
                                singular=mu.singular)
    cdf = np.concatenate([[0.0], np.cumsum(vals)])
    return cdf[np.searchsorted(order, clipped)]


def estimate_holder_exponent(mu: SingularMeasure, eps_grid=None, x_grid=None) -> float:
    """Slope of log max_x mu(B(x, eps)) against log eps.

    An empirical estimate of the best uniform Holder exponent; the max runs
    over ``x_grid`` only, so it is an estimator rather than a certificate.
    Defaults: 10 scales from 5e-3 to 0.4 and 2001 centres over the support.
    """
    if eps_grid is None:
        eps_grid = np.geomspace(5e-3, 0.4, 10)
    eps_grid = np.asarray(eps_grid, dtype=float)
    if len(eps_grid) < 8:
        raise ValueError("need at least 8 scales")
    if np.any((eps_grid <= 0) | (eps_grid >= 1)):
        raise ValueError("scales must lie in (0, 1)")
    if x_grid is None:
        a, b = mu.support
        x_grid = np.linspace(a, b, 2001)
    x_grid = np.asarray(x_grid, dtype=float)

    left = x_grid[None, :] - eps_grid[:, None]
    right = x_grid[None, :] + eps_grid[:, None]
    cdf = cumulative_mass(mu, np.concatenate([left.ravel(), right.ravel()]))
    masses = (cdf[left.size:] - cdf[:left.size]).reshape(left.shape)
    peak = masses.max(axis=1)
    usable = np.isfinite(peak) & (peak > 0)
    if usable.sum() < 3:
        raise FitError("fewer than 3 usable scales for the Holder fit")
    slope, _ = np.polyfit(np.log(eps_grid[usable]), np.log(peak[usable]), 1)
    return float(slope)
