"""Singular initial states sqrt(K_{beta,f})(H) delta_1 and their time-averaged
return probabilities.

In the eigenbasis of the truncated operator the state has weights
p_k = |<phi_k, psi>|^2, and the averaged return probability is the pair sum

    P(t) = sum_{j,k} p_j p_k sin((E_j - E_k) t) / ((E_j - E_k) t),

which is exact for the truncated dynamics and needs no time quadrature.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._quadrature import segment_integrals
from .bounds import BoundReport, E2PI
from .kernels import DensityFunction, SingularMeasure, as_beta, kernel_eval
from .lattice import (LatticeOperator, SpectralDecomposition, density_bounds_check,
                      eigendecompose)
from .oscillatory import CONVENTIONS, compute_m_beta
from .special import gamma, incomplete_gamma_zero

PAIR_SUM_CAP = 8000
MIN_FREE_L = 64
COMPRESSION_THRESHOLD = 1e-14
SERIES_CUTOFF = 1e-6


@dataclass(frozen=True, eq=False)
class SingularState:
    """Weights p_k of the state over the eigenbasis of a truncated operator.

    ``sampling`` is ``"cell"`` when K was averaged over each eigenvalue's
    cell (midpoints between neighbours) and ``"point"`` when K was sampled at
    the eigenvalue itself.
    """

    base: SpectralDecomposition
    beta: float
    f: DensityFunction
    probabilities: np.ndarray = field(repr=False)
    sampling: str = "cell"

    @property
    def coeffs(self) -> np.ndarray:
        """Amplitudes a_k = sqrt(K) <phi_k, delta_1> up to the eigenvector sign."""
        return np.sqrt(self.probabilities)

    @property
    def norm_sq(self) -> float:
        return float(self.probabilities.sum())

    @property
    def energies(self) -> np.ndarray:
        return self.base.energies


def cell_average_kernel(beta, f: DensityFunction, edges) -> np.ndarray:
    """Mean of K_{beta,f} over each interval between consecutive ``edges``."""
    mu = SingularMeasure(beta, f)
    edges = np.asarray(edges, dtype=float)
    vals, _ = segment_integrals(lambda x: kernel_eval(beta, f, x), edges,
                                breakpoints=mu.breakpoints, singular=mu.singular)
    return vals / np.diff(edges)


def build_singular_state(op_or_decomp, beta, f: DensityFunction,
                         sampling="cell") -> SingularState:
    """Weights p_k = w_k K_k of sqrt(K_{beta,f})(H) delta_1.

    With ``sampling="cell"`` K_k is the average of K over the eigenvalue's
    cell, so sum_k p_k reproduces int K d mu_{delta_1} even where K is
    singular; ``"point"`` uses K(E_k) directly.
    """
    b = as_beta(beta)
    if isinstance(op_or_decomp, SpectralDecomposition):
        decomp = op_or_decomp
    else:
        decomp = eigendecompose(op_or_decomp)
    if sampling == "cell":
        K = cell_average_kernel(b, f, decomp.cell_edges())
    elif sampling == "point":
        K = kernel_eval(b, f, decomp.energies)
    else:
        raise ValueError(f"unknown sampling {sampling!r}")
    return SingularState(decomp, b, f, decomp.weights * K, sampling)


def heisenberg_time(energies, probabilities, trim=0.01) -> float:
    """Reciprocal of the smallest level gap inside the central part of the state.

    Levels carrying the outer ``trim`` fraction of weight on either side are
    ignored, since gaps there barely affect the dynamics of the bulk.
    """
    E = np.asarray(energies, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    keep = p > 0
    E, p = E[keep], p[keep]
    if len(E) < 2:
        return np.inf
    order = np.argsort(E)
    E, p = E[order], p[order]
    c = np.cumsum(p) / p.sum()
    central = (c >= trim) & (c <= 1.0 - trim)
    pair = central[:-1] & central[1:]
    gaps = np.diff(E)[pair]
    if len(gaps) == 0:
        gaps = np.diff(E)
    return float(1.0 / gaps.min())


def _compress(E, p):
    if len(E) <= PAIR_SUM_CAP:
        return E, p, 0.0
    keep = p >= COMPRESSION_THRESHOLD * p.max()
    return E[keep], p[keep], float(p[~keep].sum())


def _pair_sum_at(E, p, tt, block):
    partial = []
    for s in range(0, len(E), block):
        x = (E[s:s + block, None] - E[None, :]) * tt
        small = np.abs(x) < SERIES_CUTOFF
        xs = np.where(small, 1.0, x)
        kern = np.where(small, 1.0 - x * x / 6.0, np.sin(xs) / xs)
        partial.append(p[s:s + block] @ kern @ p)
    return float(np.sum(partial))


def pair_sum(energies, probabilities, t, block=1024, workers=1):
    """sum_{j,k} p_j p_k sin(d t)/(d t), d = E_j - E_k, for each t.

    Rows are processed in fixed blocks and summed in a fixed order, and
    separate times run independently on ``workers`` threads, so the values
    do not depend on the thread count.
    """
    E = np.asarray(energies, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if workers > 1 and len(t_arr) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = np.array(list(pool.map(lambda tt: _pair_sum_at(E, p, tt, block), t_arr)))
    else:
        out = np.array([_pair_sum_at(E, p, tt, block) for tt in t_arr])
    return out if np.ndim(t) else float(out[0])


def averaged_return_probability(state: SingularState, t, convention="angular", workers=1):
    """(1/t) int_0^t |<psi, e^{-isH} psi>|^2 ds by the closed-form pair sum.

    In the ``fourier_2pi`` convention the propagator is e^{-2 pi i s H}.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise ValueError("t must be positive")
    scale = 2.0 * np.pi if convention == "fourier_2pi" else 1.0
    E, p, _ = _compress(state.energies, state.probabilities)
    return pair_sum(E, p, t_arr * scale, workers=workers)


@dataclass(frozen=True, eq=False)
class ReturnCurve:
    t_grid: np.ndarray
    values: np.ndarray
    convention: str
    truncation: int
    heisenberg_time: float
    dropped_mass: float = 0.0

    @property
    def trusted(self) -> np.ndarray:
        """Times below both a quarter of the Heisenberg time and the ballistic
        return time of the box."""
        limit = trusted_limit(self.heisenberg_time, self.truncation)
        if self.convention == "fourier_2pi":
            # heisenberg_time is already in 2 pi units; the ballistic cap is not
            limit = min(self.heisenberg_time / 4.0,
                        ballistic_return_time(self.truncation) / (4.0 * np.pi))
        return self.t_grid <= limit

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "P", "convention", "L", "heisenberg_time"])
        for t, v in zip(self.t_grid, self.values):
            w.writerow([f"{t:.17g}", f"{v:.17g}", self.convention, self.truncation,
                        f"{self.heisenberg_time:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ReturnCurve":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty curve")
        return cls(np.array([float(r["t"]) for r in rows]),
                   np.array([float(r["P"]) for r in rows]),
                   rows[0]["convention"], int(rows[0]["L"]),
                   float(rows[0]["heisenberg_time"]))


def ballistic_return_time(distance: int) -> float:
    """Time for a wavefront moving at the maximal group velocity 2 to reach a
    boundary ``distance`` sites away and come back."""
    return float(distance)


def trusted_limit(heisenberg: float, distance: int) -> float:
    """Largest time at which the truncated dynamics still tracks the infinite one."""
    return min(heisenberg / 4.0, ballistic_return_time(distance) / 2.0)


def return_curve(state: SingularState, t_grid, convention="angular", workers=1) -> ReturnCurve:
    t_grid = np.asarray(t_grid, dtype=float)
    E, p, dropped = _compress(state.energies, state.probabilities)
    H = heisenberg_time(E, p)
    if convention == "fourier_2pi":
        H = H / (2.0 * np.pi)
    vals = averaged_return_probability(state, t_grid, convention, workers)
    return ReturnCurve(t_grid, np.atleast_1d(vals), convention, state.base.truncation, H, dropped)


def trusted_window(state: SingularState, t_min=10.0, per_decade=16, convention="angular"):
    """Geometric grid from ``t_min`` up to the trusted limit."""
    from .oscillatory import geometric_grid
    limit = trusted_limit(heisenberg_time(state.energies, state.probabilities),
                          state.base.truncation)
    if convention == "fourier_2pi":
        limit = limit / (2.0 * np.pi)
    return geometric_grid(t_min, limit, per_decade)


MAINTHEOREM_NAMES = {"sub-critical": "maintheorem_i", "critical": "maintheorem_iii",
                     "super-critical": "maintheorem_ii"}


def maintheorem_rhs(beta, f_l1, c2, t):
    """Right-hand side of the return-probability bound in the angular convention.

    beta < 1/2:  20 pi ||f||^2 c2^2 / ((1 - 2 beta) t)
    beta > 1/2:  Gamma(beta - 1/2) 2^18 e^{2pi} M_beta ||f||^2 c2^2 (2 pi)^{2(1-beta)} t^{-2(1-beta)}
    beta = 1/2:  4 pi^2 e^{2pi} ||f||^2 c2^2 (1/t + M_{1/2} Gamma(0, 16 pi^4/t^2)/t)

    Returns ``(bound_name, rhs)``.
    """
    b = as_beta(beta)
    norms = f_l1 ** 2 * c2 ** 2
    if abs(b - 0.5) <= 1e-12:
        m = compute_m_beta(0.5).m_beta
        rhs = 4 * np.pi ** 2 * E2PI * norms * (
            1.0 / t + m * incomplete_gamma_zero(16 * np.pi ** 4 / t ** 2) / t)
        return "maintheorem_iii", float(rhs)
    if b < 0.5:
        return "maintheorem_i", float(20 * np.pi * norms / ((1 - 2 * b) * t))
    m = compute_m_beta(b).m_beta
    rhs = (gamma(b - 0.5) * 2.0 ** 18 * E2PI * m * norms
           / (2 * np.pi) ** (2 * (b - 1)) * t ** (-2 * (1 - b)))
    return "maintheorem_ii", float(rhs)


def maintheorem_bound_check(state: SingularState, op: LatticeOperator, t,
                            bound_name=None, c2=None) -> BoundReport:
    """Averaged return probability at t against the bound for the state's regime.

    ``c2`` is the sup of the delta_1 density on [0, 1]; by default it comes
    from :func:`density_bounds_check` on a 1001-point grid.  Asking for a
    ``bound_name`` that does not match the regime of beta raises ValueError,
    as does a time beyond the trusted window.
    """
    if c2 is None:
        c2 = density_bounds_check(op, np.linspace(0.0, 1.0, 1001)).c2
    name, rhs = maintheorem_rhs(state.beta, state.f.l1_norm, c2, t)
    if bound_name is not None and bound_name != name:
        raise ValueError(f"beta={state.beta} calls for {name}, not {bound_name}")
    limit = trusted_limit(heisenberg_time(state.energies, state.probabilities),
                          state.base.truncation)
    if t > limit:
        raise ValueError(f"t={t} lies beyond the trusted window (limit {limit:.4g})")
    lhs = float(averaged_return_probability(state, t))
    return BoundReport(float(t), lhs, rhs, name, state.beta, {"c2": c2})


@dataclass(frozen=True, eq=False)
class FreeLaplacianCurves:
    """Return curves of the free Laplacian.

    ``whole_line`` follows delta_0 on the symmetric box [-L, L];
    ``half_line`` follows delta_1 on the half-line truncation of size L.
    """

    t_grid: np.ndarray
    whole_line: np.ndarray
    half_line: np.ndarray
    whole_line_heisenberg: float
    half_line_heisenberg: float
    L: int

    @property
    def scaled_whole_line(self) -> np.ndarray:
        """t P(t), which grows linearly in log t for the whole line."""
        return self.t_grid * self.whole_line

    @property
    def trusted(self) -> np.ndarray:
        return self.t_grid <= trusted_limit(self.whole_line_heisenberg, self.L + 1)


def whole_line_spectrum(L: int):
    """Eigenvalues carrying weight for delta_0 on [-L, L] and their weights.

    Eigenvectors sin(k pi (n + L + 1)/(2L + 2)) vanish at the centre for
    even k, so only odd k contribute, each with weight 1/(L + 1).
    """
    k = np.arange(1, 2 * L + 2, 2)
    E = -2.0 * np.cos(k * np.pi / (2 * L + 2))
    return E, np.full(len(k), 1.0 / (L + 1))


def free_laplacian_log_check(L: int, t_grid=None) -> FreeLaplacianCurves:
    """Whole-line and half-line free return curves at truncation L.

    With no ``t_grid`` the whole-line trusted window from 10^2 is used
    (16 points per decade).  The box edge sits L + 1 sites from the centre, so
    the window also stops at half the ballistic return time.
    """
    from .oscillatory import geometric_grid
    if L < MIN_FREE_L:
        raise ValueError(f"L must be at least {MIN_FREE_L}")
    Ew, pw = whole_line_spectrum(L)
    Hw = heisenberg_time(Ew, pw)
    k = np.arange(1, L + 1)
    Eh = -2.0 * np.cos(k * np.pi / (L + 1))
    ph = 2.0 / (L + 1) * np.sin(k * np.pi / (L + 1)) ** 2
    Hh = heisenberg_time(Eh, ph)
    if t_grid is None:
        limit = trusted_limit(Hw, L + 1)
        if limit <= 1e2:
            raise ValueError("truncation too small for a window starting at t = 100")
        t_grid = geometric_grid(1e2, limit)
    t_grid = np.asarray(t_grid, dtype=float)
    return FreeLaplacianCurves(t_grid, pair_sum(Ew, pw, t_grid), pair_sum(Eh, ph, t_grid),
                               Hw, Hh, int(L))
