"""Half-line discrete Schrodinger operators H = -Laplacian + V with Dirichlet
boundary and a potential supported on the first N sites.

Sign convention: (H u)(n) = -u(n+1) - u(n-1) + v_n u(n), so the eigenvalue
equation gives u(n+1) = (v_n - E) u(n) - u(n-1) and the one-step transfer
matrix is [[v_n - E, -1], [1, 0]].
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

from ._quadrature import segment_integrals
from .exceptions import BoundViolation

MIN_TRUNCATION = 64
DEFAULT_TRUNCATION = 4000
MAX_TRUNCATION = 20000
RESOLVENT_FACTOR = 5.0 + np.sqrt(24.0)


@dataclass(frozen=True, eq=False)
class LatticeOperator:
    potential: tuple = ()
    truncation: int = DEFAULT_TRUNCATION

    def __post_init__(self):
        v = tuple(float(x) for x in self.potential)
        if not all(np.isfinite(v)):
            raise ValueError("potential values must be finite")
        object.__setattr__(self, "potential", v)
        L = int(self.truncation)
        if L < max(len(v) + 2, MIN_TRUNCATION):
            raise ValueError(f"truncation must be at least max(N + 2, {MIN_TRUNCATION})")
        object.__setattr__(self, "truncation", L)

    @property
    def rank(self) -> int:
        return len(self.potential)

    def site_potential(self, k):
        """v_k for site k >= 1 (zero beyond the rank)."""
        k = np.asarray(k)
        v = np.array((0.0,) + self.potential)
        return np.where((k >= 1) & (k <= self.rank), v[np.clip(k, 0, self.rank)], 0.0)

    def diagonal(self) -> np.ndarray:
        d = np.zeros(self.truncation)
        d[:self.rank] = self.potential
        return d

    def matrix(self) -> np.ndarray:
        """Dense truncated matrix (for small truncations and tests)."""
        L = self.truncation
        return np.diag(self.diagonal()) - np.eye(L, k=1) - np.eye(L, k=-1)

    def to_dict(self) -> dict:
        return {"rank": self.rank, "potential": list(self.potential),
                "truncation": self.truncation}

    @classmethod
    def from_dict(cls, d) -> "LatticeOperator":
        pot = d.get("potential", [])
        if "rank" in d and int(d["rank"]) != len(pot):
            raise ValueError("rank does not match the potential length")
        return cls(tuple(pot), int(d.get("truncation", DEFAULT_TRUNCATION)))


@dataclass(frozen=True)
class TransferMatrix:
    """T(E, n, m): maps (u(m+1), u(m)) to (u(n+1), u(n))."""

    entries: np.ndarray
    energy: float
    site_range: tuple

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.entries))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.entries, 2))


def one_step(op: LatticeOperator, E, k) -> np.ndarray:
    return np.array([[op.site_potential(k) - E, -1.0], [1.0, 0.0]], dtype=float)


def transfer_matrix(op: LatticeOperator, E: float, n: int, m: int) -> TransferMatrix:
    """Ordered product of one-step matrices at sites n, n-1, ..., m+1."""
    if not (n > m >= 0):
        raise ValueError("need n > m >= 0")
    T = np.eye(2)
    for k in range(m + 1, n + 1):
        T = one_step(op, E, k) @ T
    return TransferMatrix(T, float(E), (int(n), int(m)))


def _batched_products(op, E, n_max):
    """Norms ||T(E, n, 0)|| for n = 0..n_max, vectorized over E."""
    E = np.asarray(E, dtype=float)
    T = np.broadcast_to(np.eye(2), E.shape + (2, 2)).copy()
    norms = np.empty((n_max + 1,) + E.shape)
    norms[0] = 1.0
    for k in range(1, n_max + 1):
        a = op.site_potential(k) - E
        new = np.empty_like(T)
        new[..., 0, :] = a[..., None] * T[..., 0, :] - T[..., 1, :]
        new[..., 1, :] = T[..., 0, :]
        T = new
        norms[k] = np.linalg.svd(T, compute_uv=False)[..., 0]
    return norms


def transfer_norm_bound(op: LatticeOperator, E_grid, extra_sites=200):
    """(F_N, C_N) over an energy grid in [0, 1].

    F_N = max ||T(E, N, 0)||; C_N = max over n in [N, N + extra_sites] of
    ||T(E, n, 0)||^2.  Beyond site N every step is the same elliptic matrix,
    so powers stay bounded and the finite range captures the maximum up to
    the quasi-periodic recurrence.
    """
    E_grid = np.asarray(E_grid, dtype=float)
    if np.any((E_grid < 0) | (E_grid > 1)):
        raise ValueError("energy grid must lie in [0, 1]")
    N = op.rank
    norms = _batched_products(op, E_grid, N + extra_sites)
    F = float(norms[N].max())
    C = float((norms[N:] ** 2).max())
    return F, C


def _green_first_site(op: LatticeOperator, E):
    # free tail: g^2 + E g + 1 = 0 with Im g > 0 on (-2, 2)
    g = (-E + 1j * np.sqrt(4.0 - E * E)) / 2.0
    for v in reversed(op.potential):
        g = 1.0 / (v - E - g)
    return g


def spectral_density_values(op: LatticeOperator, E):
    """Density of the delta_1 spectral measure; zero outside (-2, 2).

    Point masses of bound states outside the band are not part of the
    density and are ignored here.
    """
    E = np.asarray(E, dtype=float)
    out = np.zeros(E.shape)
    inside = np.abs(E) < 2.0
    out[inside] = np.imag(_green_first_site(op, E[inside])) / np.pi
    return np.maximum(out, 0.0)


def spectral_density(op: LatticeOperator, E):
    """(1/pi) Im G_11(E + i0) for E in (-2, 2), by backward recursion.

    Raises ValueError for |E| >= 2.
    """
    E_arr = np.asarray(E, dtype=float)
    if np.any(np.abs(E_arr) >= 2.0) or not np.all(np.isfinite(E_arr)):
        raise ValueError("energy must lie in the open band (-2, 2)")
    out = spectral_density_values(op, E_arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DensityBounds:
    c1: float
    c2: float
    F_N: float
    C_N: float

    @property
    def witness(self) -> float:
        """Upper bound (C_N/pi)(5 + sqrt 24) on the density over [0, 1]."""
        return self.C_N / np.pi * RESOLVENT_FACTOR

    @property
    def holds(self) -> bool:
        return 0.0 < self.c1 <= self.c2 < np.inf and self.c2 <= self.witness


def density_bounds_check(op: LatticeOperator, E_grid) -> DensityBounds:
    """Min and max of the density over an energy grid in [0, 1] (>= 10^3 points).

    Raises :class:`BoundViolation` if the density vanishes anywhere on the
    grid or exceeds the transfer-matrix witness bound.
    """
    E_grid = np.asarray(E_grid, dtype=float)
    if len(E_grid) < 1000:
        raise ValueError("need at least 10^3 grid points")
    if np.any((E_grid < 0) | (E_grid > 1)):
        raise ValueError("energy grid must lie in [0, 1]")
    rho = spectral_density(op, E_grid)
    F, C = transfer_norm_bound(op, E_grid)
    out = DensityBounds(float(rho.min()), float(rho.max()), F, C)
    if out.c1 <= 0:
        raise BoundViolation("density vanishes on the grid", out)
    if out.c2 > out.witness:
        raise BoundViolation("density exceeds the transfer-matrix bound", out)
    return out


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues of the truncated operator and delta_1 weights |phi_k(1)|^2."""

    energies: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    truncation: int = 0

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def cell_edges(self) -> np.ndarray:
        """Edges of the cells around each eigenvalue (midpoints between neighbours)."""
        E = self.energies
        mids = 0.5 * (E[1:] + E[:-1])
        first = E[0] - (mids[0] - E[0])
        last = E[-1] + (E[-1] - mids[-1])
        return np.concatenate([[first], mids, [last]])

    def min_gap(self) -> float:
        return float(np.diff(self.energies).min())


def _first_components(d, e, E):
    """Squared first components of the eigenvectors for eigenvalues E.

    Two steps of shifted inverse iteration per eigenvalue, each a banded
    O(L) solve.  The start vector is a fixed quasi-random sequence so it is
    never orthogonal to a lattice eigenvector.
    """
    L = len(d)
    n = np.arange(1, L + 1)
    start = 1.0 + np.sqrt(2.0) * np.modf(n * 0.6180339887498949)[0]
    ab = np.zeros((3, L))
    ab[0, 1:] = e
    ab[2, :-1] = e
    w = np.empty(len(E))
    for k, lam in enumerate(E):
        shift = lam + 1e-13 * max(1.0, abs(lam))
        ab[1] = d - shift
        x = start
        for _ in range(2):
            x = solve_banded((1, 1), ab, x, overwrite_b=False, check_finite=False)
            x = x / np.linalg.norm(x)
        w[k] = x[0] ** 2
    return w


def eigendecompose(op: LatticeOperator) -> SpectralDecomposition:
    """Eigenvalues of the truncated matrix and squared first eigenvector components.

    Up to L = 4000 the full tridiagonal eigensolver is used; above that only
    eigenvalues are computed and the first components come from banded
    inverse iteration, keeping memory linear in L.
    """
    L = op.truncation
    if L > MAX_TRUNCATION:
        raise ValueError(f"truncation above {MAX_TRUNCATION} is not supported")
    d = op.diagonal()
    e = -np.ones(L - 1)
    if L <= 4000:
        E, V = eigh_tridiagonal(d, e)
        w = V[0] ** 2
    else:
        E = eigh_tridiagonal(d, e, eigvals_only=True)
        w = _first_components(d, e, E)
    total = w.sum()
    if abs(total - 1.0) > 1e-10:
        raise ArithmeticError(f"eigenvector weights sum to {total!r}")
    return SpectralDecomposition(E, w, L)


def binned_weights(decomp: SpectralDecomposition, edges) -> np.ndarray:
    """Weight falling in each energy bin, with each eigenvalue's weight spread
    uniformly over its cell so bin counts do not jump with level positions."""
    edges = np.asarray(edges, dtype=float)
    cells = decomp.cell_edges()
    lo, hi = cells[:-1], cells[1:]
    dens = decomp.weights / (hi - lo)
    out = np.empty(len(edges) - 1)
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        overlap = np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)
        out[i] = float((dens * overlap).sum())
    return out


def density_bin_integrals(op: LatticeOperator, edges) -> np.ndarray:
    """Integral of the spectral density over each bin."""
    edges = np.asarray(edges, dtype=float)
    vals, _ = segment_integrals(lambda x: spectral_density_values(op, x), edges,
                                breakpoints=[-2.0, 2.0])
    return vals


def free_weights_exact(L: int):
    """Eigenvalues and delta_1 weights of the free truncation, in closed form."""
    k = np.arange(1, L + 1)
    th = k * np.pi / (L + 1)
    E = -2.0 * np.cos(th)
    w = 2.0 / (L + 1) * np.sin(th) ** 2
    return E, w
