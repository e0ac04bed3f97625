"""Right-hand sides of the decay bounds and numerical checks of the identities
behind them.

Every inequality evaluator returns a :class:`BoundReport`; every equality
check returns an :class:`IdentityCheck` holding the two independently
computed sides.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad

from ._quadrature import composite_rule, gauss_legendre
from .kernels import (DensityFunction, SingularMeasure, _kernel_tabulated, as_beta,
                      estimate_holder_exponent, kernel_eval)
from .oscillatory import (CesaroCurve, cesaro_average, compute_m_beta, kernel_fourier,
                          measure_fourier)
from .special import gamma, incomplete_gamma_zero

BOUND_NAMES = ("strichartz_i", "sharp_i", "sharp_ii_exact", "sharp_ii_log", "naive_chain",
               "maintheorem_i", "maintheorem_ii", "maintheorem_iii",
               "smoothing_chain", "complex_case2")

E2PI = float(np.exp(2.0 * np.pi))
STRICHARTZ_REFERENCE_CONSTANT = 10.0


@dataclass
class BoundReport:
    """One evaluated inequality lhs <= rhs at time t."""

    t: float
    lhs: float
    rhs: float
    bound_name: str
    beta: float | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.bound_name not in BOUND_NAMES:
            raise ValueError(f"unknown bound name {self.bound_name!r}")

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def tolerance(self) -> float:
        return 1e-6 * abs(self.rhs)

    @property
    def holds(self) -> bool:
        return self.slack >= -self.tolerance

    def to_dict(self) -> dict:
        d = {"bound_name": self.bound_name, "beta": self.beta, "t": self.t,
             "lhs": self.lhs, "rhs": self.rhs, "slack": self.slack}
        d.update(self.details)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class IdentityCheck(NamedTuple):
    lhs: float
    rhs: float

    @property
    def relative_gap(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs), 1e-300)
        return abs(self.lhs - self.rhs) / scale if scale > 1e-300 else 0.0


def strichartz_rhs(alpha, c_mu, norm_sq, t):
    """c_mu * norm_sq * t^(-alpha)."""
    if not (0.0 <= alpha <= 1.0):
        raise ValueError("alpha must lie in [0, 1]")
    if not (t > 0):
        raise ValueError("t must be positive")
    return c_mu * norm_sq * t ** (-alpha)


def case1_constant(beta):
    """Constant C with A(t) <= C ||f||_1^2 ||g||_inf^2 t^{-2(1-beta)}, f, g >= 0."""
    b = as_beta(beta)
    if b <= 0.5:
        raise ValueError("the power-law constant needs beta > 1/2")
    m = compute_m_beta(b).m_beta
    return float(gamma(b - 0.5) * E2PI * m * np.sqrt(np.pi) / (2.0 ** (2 * b - 1) * np.pi ** b))


def case2_constant(beta):
    """The complex-data constant, 2^16 times :func:`case1_constant`."""
    return 2.0 ** 16 * case1_constant(beta)


def sharp_bound_rhs(beta, f_l1, g_sup, t):
    """Sharp decay bound for beta >= 1/2.

    beta > 1/2:  2^18 e^{2pi} M_beta Gamma(beta - 1/2) f^2 g^2 t^{-2(1-beta)}
    beta = 1/2:  e^{2pi} f^2 g^2 (1/t + M_{1/2} Gamma(0, 4 pi^2/t^2)/t)
    """
    b = as_beta(beta)
    if b < 0.5:
        raise ValueError("beta < 1/2 decays like 1/t; use strichartz_rhs with alpha = 1")
    if not (t > 0):
        raise ValueError("t must be positive")
    norms = f_l1 ** 2 * g_sup ** 2
    if abs(b - 0.5) <= 1e-12:
        m = compute_m_beta(0.5).m_beta
        return float(E2PI * norms * (1.0 / t + m * incomplete_gamma_zero(4 * np.pi ** 2 / t ** 2) / t))
    m = compute_m_beta(b).m_beta
    return float(2.0 ** 18 * E2PI * m * gamma(b - 0.5) * norms * t ** (-2 * (1 - b)))


def sharp_bound_log_form(f_l1, g_sup, t):
    """Large-t form of the critical bound: e^{2pi} f^2 g^2 (1 + 3 M_{1/2} log t)/t."""
    m = compute_m_beta(0.5).m_beta
    return float(E2PI * f_l1 ** 2 * g_sup ** 2 * (1.0 + 3.0 * m * np.log(t)) / t)


def gaussian_tail_sum(n_max=40):
    """sum_{n=0}^{n_max} e^{-n^2/4}; the omitted tail is below 1e-170."""
    n = np.arange(n_max + 1, dtype=float)
    return float(np.exp(-n * n / 4.0).sum())


def naive_gaussian_bound(beta, f_l1, g_sup, t):
    """Bound obtained from a uniform-in-x ball estimate; decays only like t^{-(1-beta)}."""
    b = as_beta(beta)
    if not (t > 0):
        raise ValueError("t must be positive")
    return float(gaussian_tail_sum() * E2PI * g_sup ** 2 * f_l1 ** 2
                 / (np.sqrt(np.pi) * (1.0 - b)) * t ** (-(1.0 - b)))


def gaussian_moment_identity(beta, t) -> IdentityCheck:
    """int_R e^{-pi xi^2/t^2} |xi|^{-2(1-beta)} d xi two ways.

    The numeric side substitutes u = xi^{1-a}, a = 2(1 - beta), which turns
    the integrand into a smooth bounded function, and integrates with
    QUADPACK.  The closed side is pi^{1/2-beta} Gamma(beta - 1/2) t^{2 beta - 1}.
    """
    b = as_beta(beta)
    if b <= 0.5:
        raise ValueError("the integral diverges for beta <= 1/2")
    if not (t > 0):
        raise ValueError("t must be positive")
    a = 2.0 * (1.0 - b)
    p = 2.0 / (1.0 - a)
    # integrand exp(-pi u^p / t^2) drops from 1 to 0 around u0
    u0 = (t * t / np.pi) ** (1.0 / p)
    fn = lambda u: np.exp(-np.pi * u ** p / (t * t))
    pieces = [(0.0, u0), (u0, 2 * u0), (2 * u0, np.inf)]
    total = sum(quad(fn, lo, hi, epsabs=0.0, epsrel=1e-13, limit=400)[0] for lo, hi in pieces)
    numeric = 2.0 * total / (1.0 - a)
    closed = np.pi ** (0.5 - b) * float(gamma(b - 0.5)) * t ** (2 * b - 1)
    return IdentityCheck(float(numeric), float(closed))


def plancherel_identity_check(beta, f: DensityFunction, t) -> IdentityCheck:
    """Gaussian-smoothed energy of K_{beta,f} in space and in frequency.

    lhs = double integral of e^{-pi t^2 (x-y)^2} K(x) K(y), by a tensor
    graded rule.  rhs = (1/t) int e^{-pi xi^2/t^2} |K^(xi)|^2 d xi, using the
    closed-form transform and cut where the Gaussian drops below e^{-36 pi}.
    """
    b = as_beta(beta)
    if not (t > 0):
        raise ValueError("t must be positive")
    if f.l1_norm == 0:
        return IdentityCheck(0.0, 0.0)
    mu = SingularMeasure(b, f)
    a, c = mu.support
    x, w = composite_rule(a, c, mu.breakpoints, mu.singular, min(0.05, 0.2 / t))
    kw = kernel_eval(b, f, x) * w
    lhs = 0.0
    for k in range(0, len(x), 1024):
        d = x[k:k + 1024, None] - x[None, :]
        lhs += float(kw[k:k + 1024] @ np.exp(-np.pi * t * t * d * d) @ kw)

    cut = 6.0 * t
    width = min(0.25, 0.5 / (c - a))
    edges = np.append(np.arange(0.0, cut, width), cut)
    u, wu = gauss_legendre(20)
    xi = (edges[:-1, None] + np.diff(edges)[:, None] * u).ravel()
    wx = (np.diff(edges)[:, None] * wu).ravel()
    spec = np.abs(kernel_fourier(b, f, xi)) ** 2
    rhs = 2.0 / t * float((np.exp(-np.pi * xi ** 2 / t ** 2) * spec * wx).sum())
    return IdentityCheck(lhs, rhs)


def smoothed_energy(mu: SingularMeasure, t) -> float:
    """(e^{2pi}/t) int_R |mu^(s)|^2 e^{-(2 pi s)^2/t^2} ds.

    Equals e^{2pi} sqrt(pi)/(2 pi) times the double integral of
    K g K g e^{-t^2 (x-y)^2/4}; evaluated on the frequency side.
    """
    a, c = mu.support
    cut = 6.0 * t / (2.0 * np.pi)
    width = min(1.0, 2.0 / (c - a))
    edges = np.append(np.arange(0.0, cut, width), cut)
    u, wu = gauss_legendre(20)
    s = (edges[:-1, None] + np.diff(edges)[:, None] * u).ravel()
    ws = (np.diff(edges)[:, None] * wu).ravel()
    spec = np.abs(measure_fourier(mu, s)) ** 2
    return 2.0 * E2PI / t * float((spec * np.exp(-(2 * np.pi * s / t) ** 2) * ws).sum())


def smoothing_majorization_check(mu: SingularMeasure, t) -> BoundReport:
    """Cesaro average against the Gaussian-smoothed energy that dominates it.

    ``details`` also carries the sharp right-hand side (beta >= 1/2) and
    whether the smoothed energy stays below it, completing the chain.
    """
    if not (t > 0):
        raise ValueError("t must be positive")
    b = mu.beta.beta
    lhs = cesaro_average(mu, t)
    mid = smoothed_energy(mu, t)
    details = {}
    a, c = mu.support
    g_sup = mu.g.sup_over(a, c)
    if b > 0.5 + 1e-12:
        sharp = case1_constant(b) * mu.f.l1_norm ** 2 * g_sup ** 2 * t ** (-2 * (1 - b))
    elif abs(b - 0.5) <= 1e-12:
        sharp = sharp_bound_rhs(0.5, mu.f.l1_norm, g_sup, t)
    else:
        sharp = None
    if sharp is not None:
        details = {"sharp_rhs": sharp, "middle_below_sharp": bool(mid <= sharp * (1 + 1e-6))}
    return BoundReport(float(t), lhs, mid, "smoothing_chain", b, details)


@dataclass
class InverseCheck:
    alpha_fit: float
    holder: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.holder >= self.threshold


def strichartz_inverse_check(curve: CesaroCurve, mu: SingularMeasure, window=None,
                             fit=None) -> InverseCheck:
    """Holder exponent of mu against half the fitted Cesaro decay rate.

    A decay A(t) ~ t^{-alpha} forces mu to be uniformly alpha/2-Holder, so the
    empirical Holder exponent must be at least alpha/2 - 0.05.
    """
    from .fitting import fit_power_law
    if fit is None:
        fit = fit_power_law(curve, window)
    alpha = max(-fit.exponent, 0.0)
    holder = estimate_holder_exponent(mu)
    return InverseCheck(alpha, holder, alpha / 2.0 - 0.05)


class ComplexTabulated:
    """Complex piecewise-linear function on a grid, zero outside it."""

    def __init__(self, grid, values):
        self.grid = np.asarray(grid, dtype=float)
        self.values = np.asarray(values, dtype=complex)
        if self.grid.ndim != 1 or len(self.grid) < 2 or self.grid.shape != self.values.shape:
            raise ValueError("grid and values must be matching 1-D arrays")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        re = np.interp(x, self.grid, self.values.real, left=0.0, right=0.0)
        im = np.interp(x, self.grid, self.values.imag, left=0.0, right=0.0)
        return re + 1j * im

    @property
    def l1_norm(self) -> float:
        u, w = gauss_legendre(20)
        h = np.diff(self.grid)
        x = self.grid[:-1, None] + h[:, None] * u
        return float((np.abs(self(x)) * w * h[:, None]).sum())

    @property
    def sup_norm(self) -> float:
        # |linear complex| is convex on each cell, so the max sits on a node
        return float(np.abs(self.values).max())

    def signed_parts(self):
        """(Re+, Re-, Im+, Im-) as nonnegative piecewise-linear tabulations.

        Zero crossings are inserted into the grid so each part stays exactly
        piecewise linear.
        """
        g = self.grid
        extra = []
        for comp in (self.values.real, self.values.imag):
            s = comp[:-1] * comp[1:] < 0
            frac = comp[:-1][s] / (comp[:-1][s] - comp[1:][s])
            extra.append(g[:-1][s] + frac * np.diff(g)[s])
        fine = np.union1d(g, np.concatenate(extra))
        vals = self(fine)
        re, im = vals.real, vals.imag
        return fine, (np.maximum(re, 0), np.maximum(-re, 0), np.maximum(im, 0), np.maximum(-im, 0))


def splitting_residual(f: ComplexTabulated, g: ComplexTabulated, beta, x) -> float:
    """Max |K_{beta,f} g - sum of the 16 sign-split products| over ``x``."""
    b = as_beta(beta)
    x = np.asarray(x, dtype=float)
    direct = (_kernel_tabulated(b, f.grid, f.values.real, x)
              + 1j * _kernel_tabulated(b, f.grid, f.values.imag, x)) * g(x)
    fgrid, fparts = f.signed_parts()
    ggrid, gparts = g.signed_parts()
    ks = [kernel_eval(b, DensityFunction.tabulated(fgrid, p), x) for p in fparts]
    gs = [np.interp(x, ggrid, p, left=0.0, right=0.0) for p in gparts]
    sign = (1, -1, 1j, -1j)
    total = np.zeros(x.shape, dtype=complex)
    for i in range(4):
        for j in range(4):
            total += sign[i] * sign[j] * ks[i] * gs[j]
    return float(np.max(np.abs(total - direct)))


def complex_splitting_check(f: ComplexTabulated, g: ComplexTabulated, beta, t) -> BoundReport:
    """Cesaro average of K_{beta,f} g dx for complex data against the complex-case bound.

    Requires ||f||_1 <= 1 and ||g||_inf <= 1.  ``details`` records the
    real-data constant and the residual of the 16-term sign splitting.
    """
    b = as_beta(beta)
    if b <= 0.5:
        raise ValueError("the complex-case bound needs beta > 1/2")
    if f.l1_norm > 1 + 1e-12 or g.sup_norm > 1 + 1e-12:
        raise ValueError("need ||f||_1 <= 1 and ||g||_inf <= 1")
    if not (t > 0):
        raise ValueError("t must be positive")
    lo, hi = f.grid[0], f.grid[-1] + 1.0
    bps = np.unique(np.concatenate([f.grid, f.grid + 1.0, g.grid]))
    x, w = composite_rule(lo, hi, bps, None, min(0.05, 0.25 / max(t, 1.0)))
    dens = (_kernel_tabulated(b, f.grid, f.values.real, x)
            + 1j * _kernel_tabulated(b, f.grid, f.values.imag, x)) * g(x)
    wd = w * dens

    width = min(1.0, 2.0 / (hi - lo))
    edges = np.append(np.arange(0.0, t, width), t)
    u, wu = gauss_legendre(16)
    s = (edges[:-1, None] + np.diff(edges)[:, None] * u).ravel()
    ws = (np.diff(edges)[:, None] * wu).ravel()
    total = 0.0
    for k in range(0, len(s), 512):
        ft = np.exp(-2j * np.pi * s[k:k + 512, None] * x) @ wd
        total += float((np.abs(ft) ** 2 * ws[k:k + 512]).sum())
    lhs = total / t
    norms = f.l1_norm ** 2 * g.sup_norm ** 2
    rhs = case2_constant(b) * norms * t ** (-2 * (1 - b))
    details = {"case1_rhs": case1_constant(b) * norms * t ** (-2 * (1 - b)),
               "splitting_residual": splitting_residual(f, g, b, x[::7])}
    return BoundReport(float(t), lhs, rhs, "complex_case2", b, details)


def sharp_report(mu: SingularMeasure, t, name=None) -> BoundReport:
    """Cesaro average at t against the sharp bound for the measure's regime."""
    b = mu.beta.beta
    a, c = mu.support
    g_sup = mu.g.sup_over(a, c)
    lhs = cesaro_average(mu, t)
    if abs(b - 0.5) <= 1e-12:
        if name == "sharp_ii_log":
            rhs = sharp_bound_log_form(mu.f.l1_norm, g_sup, t)
        else:
            name, rhs = "sharp_ii_exact", sharp_bound_rhs(0.5, mu.f.l1_norm, g_sup, t)
    elif b > 0.5:
        name, rhs = "sharp_i", sharp_bound_rhs(b, mu.f.l1_norm, g_sup, t)
    else:
        # Young: ||K g||_2^2 <= ||f||_1^2 ||g||_inf^2 / (1 - 2 beta)
        name = "strichartz_i"
        rhs = strichartz_rhs(1.0, STRICHARTZ_REFERENCE_CONSTANT,
                             mu.f.l1_norm ** 2 * g_sup ** 2 / (1 - 2 * b), t)
    return BoundReport(float(t), lhs, rhs, name, b)


def naive_report(mu: SingularMeasure, t) -> BoundReport:
    b = mu.beta.beta
    a, c = mu.support
    lhs = cesaro_average(mu, t)
    rhs = naive_gaussian_bound(b, mu.f.l1_norm, mu.g.sup_over(a, c), t)
    return BoundReport(float(t), lhs, rhs, "naive_chain", b)
