import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from singfourier.lattice import (LatticeOperator, binned_weights, density_bin_integrals,
                                 density_bounds_check, eigendecompose, free_weights_exact,
                                 one_step, spectral_density, transfer_matrix, transfer_norm_bound)


def schur_density(v, E):
    """(1/pi) Im G_11 from the finite block with the free tail folded in as a self-energy."""
    z = complex(E)
    tail = (-z + 1j * math.sqrt(4 - E * E)) / 2
    n = len(v)
    if n == 0:
        return tail.imag / math.pi
    A = np.diag(np.asarray(v, dtype=complex)) - np.eye(n, k=1) - np.eye(n, k=-1) - z * np.eye(n)
    A[-1, -1] -= tail
    return np.linalg.inv(A)[0, 0].imag / math.pi


class TestOperator:
    def test_matrix_structure(self):
        op = LatticeOperator((1.0, -0.5, 0.3), 70)
        H = op.matrix()
        assert np.array_equal(H, H.T)
        assert np.all(np.diag(H, 1) == -1) and np.all(np.triu(H, 2) == 0)
        assert list(np.diag(H)[:4]) == [1.0, -0.5, 0.3, 0.0]

    @pytest.mark.parametrize("pot,L", [((), 63), ((1.0,) * 70, 71), ((float("nan"),), 100)])
    def test_rejects(self, pot, L):
        with pytest.raises(ValueError):
            LatticeOperator(pot, L)

    def test_dict_round_trip(self):
        op = LatticeOperator((0.5, 2.0), 128)
        back = LatticeOperator.from_dict(op.to_dict())
        assert back.potential == op.potential and back.truncation == 128
        with pytest.raises(ValueError):
            LatticeOperator.from_dict({"rank": 3, "potential": [1.0]})


class TestTransfer:
    def test_free_step_at_zero_is_rotation(self):
        op = LatticeOperator((1.0,), 64)
        np.testing.assert_array_equal(transfer_matrix(op, 0.0, 3, 2).entries, [[0, -1], [1, 0]])

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-2, 2), st.integers(0, 30), st.integers(1, 30))
    def test_unit_determinant(self, E, m, steps):
        op = LatticeOperator((1.0, -0.5, 0.3), 64)
        assert transfer_matrix(op, E, m + steps, m).determinant == pytest.approx(1.0, abs=1e-10)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(2.0, 4.0), st.integers(1, 30))
    def test_unit_determinant_off_band(self, E, steps):
        # products grow exponentially off the band; det roundoff scales with ||T||^2
        T = transfer_matrix(LatticeOperator((1.0, -0.5, 0.3), 64), E, steps, 0)
        assert abs(T.determinant - 1.0) <= 1e-10 + 1e-14 * T.norm ** 2

    def test_propagates_solutions(self, rng):
        op = LatticeOperator((1.0, -0.5, 0.3), 64)
        for _ in range(50):
            E, th = rng.uniform(-2, 2), rng.uniform(0, 2 * np.pi)
            m = int(rng.integers(0, 6))
            n = m + int(rng.integers(1, 12))
            u = {m: math.sin(th), m + 1: math.cos(th)}
            for k in range(m + 1, n + 1):
                # -u(k+1) - u(k-1) + v_k u(k) = E u(k)
                u[k + 1] = (op.site_potential(k) - E) * u[k] - u[k - 1]
            got = transfer_matrix(op, E, n, m).entries @ [u[m + 1], u[m]]
            np.testing.assert_allclose(got, [u[n + 1], u[n]], atol=1e-12)

    @pytest.mark.parametrize("n,m", [(2, 2), (1, 3), (3, -1)])
    def test_rejects_bad_range(self, n, m):
        with pytest.raises(ValueError):
            transfer_matrix(LatticeOperator((), 64), 0.0, n, m)

    def test_free_norms_against_matrix_powers(self):
        grid = np.linspace(0, 1, 101)
        _, C = transfer_norm_bound(LatticeOperator((), 64), grid)
        direct = max(np.linalg.norm(np.linalg.matrix_power(np.array([[-E, -1.0], [1.0, 0.0]]), n), 2) ** 2
                     for E in grid for n in range(201))
        assert C == pytest.approx(direct, rel=1e-12)
        assert math.isfinite(C)

    def test_free_rotation_norms(self):
        F, C = transfer_norm_bound(LatticeOperator((), 64), [0.0])
        assert F == 1.0 and C == pytest.approx(1.0, abs=1e-12)

    def test_single_site_against_svd(self):
        grid = np.linspace(0, 1, 501)
        F, _ = transfer_norm_bound(LatticeOperator((1.0,), 64), grid)
        direct = max(np.linalg.svd(np.array([[E - 1, -1.0], [1.0, 0.0]]), compute_uv=False)[0]
                     for E in grid)
        assert F == pytest.approx(direct, rel=1e-13)
        # the sign convention of the one-step matrix does not change norms
        assert np.linalg.norm(one_step(LatticeOperator((1.0,), 64), 0.3, 1), 2) == \
            pytest.approx(np.linalg.norm(np.array([[0.3 - 1, -1.0], [1.0, 0.0]]), 2))

    def test_rejects_energies_outside_unit_interval(self):
        with pytest.raises(ValueError):
            transfer_norm_bound(LatticeOperator((), 64), [1.5])


class TestDensity:
    def test_free_values(self):
        op = LatticeOperator((), 64)
        assert spectral_density(op, 0.0) == pytest.approx(1 / math.pi, abs=1e-12)
        assert spectral_density(op, 1.0) == pytest.approx(math.sqrt(3) / (2 * math.pi), abs=1e-12)
        E = np.linspace(-1.999, 1.999, 301)
        np.testing.assert_allclose(spectral_density(op, E), np.sqrt(4 - E * E) / (2 * np.pi), atol=1e-14)

    def test_square_root_edges(self):
        op = LatticeOperator((), 64)
        eps = np.array([1e-4, 1e-6, 1e-8])
        ratio = spectral_density(op, 2 - eps) / np.sqrt(eps)
        np.testing.assert_allclose(ratio, 1 / math.pi, rtol=1e-3)

    @pytest.mark.parametrize("E", [2.0, -2.0, 2.5, float("nan")])
    def test_rejects_outside_band(self, E):
        with pytest.raises(ValueError):
            spectral_density(LatticeOperator((), 64), E)

    @pytest.mark.parametrize("v", [(), (1.0, -0.5, 0.3), (2.0, 0.0, -2.0, 1.5, 0.7)])
    def test_against_schur_complement(self, v, rng):
        op = LatticeOperator(v, 64)
        for E in rng.uniform(-1.99, 1.99, 50):
            assert spectral_density(op, E) == pytest.approx(schur_density(v, E), abs=1e-12)

    @pytest.mark.parametrize("v", [(), (1.0, -0.5, 0.3), (3.0,)])
    def test_total_mass_with_bound_states(self, v):
        op = LatticeOperator(v, 400)
        ac = integrate.quad(lambda E: spectral_density(op, E), -2, 2, limit=200, epsabs=1e-10)[0]
        # bound states sit outside the band at a finite distance; their weights converge fast in L
        dec = eigendecompose(op)
        outside = dec.weights[np.abs(dec.energies) > 2 + 1e-3].sum()
        assert ac + outside == pytest.approx(1.0, abs=1e-6)
        if not v:
            assert ac == pytest.approx(1.0, abs=1e-6)


class TestDensityBounds:
    def test_free_extremes(self):
        res = density_bounds_check(LatticeOperator((), 64), np.linspace(0, 1, 1001))
        assert res.c1 == pytest.approx(math.sqrt(3) / (2 * math.pi), abs=1e-12)
        assert res.c2 == pytest.approx(1 / math.pi, abs=1e-12)
        assert res.holds

    def test_rank_three(self):
        grid = np.linspace(0, 1, 1001)
        res = density_bounds_check(LatticeOperator((1.0, -0.5, 0.3), 64), grid)
        oracle = [schur_density((1.0, -0.5, 0.3), E) for E in grid]
        assert res.c1 == pytest.approx(min(oracle), abs=1e-12)
        assert res.c2 == pytest.approx(max(oracle), abs=1e-12)
        assert 0 < res.c1 <= res.c2 <= res.witness

    def test_needs_dense_grid(self):
        with pytest.raises(ValueError):
            density_bounds_check(LatticeOperator((), 64), np.linspace(0, 1, 999))

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(-2, 2), min_size=1, max_size=5))
    def test_bounded_away_from_zero_and_infinity(self, v):
        res = density_bounds_check(LatticeOperator(tuple(v), 64), np.linspace(0, 1, 1000))
        assert res.holds


class TestEigendecompose:
    def test_matches_dense_solver(self):
        op = LatticeOperator((1.0, -0.5, 0.3), 100)
        dec = eigendecompose(op)
        E, V = np.linalg.eigh(op.matrix())
        np.testing.assert_allclose(dec.energies, E, atol=1e-12)
        np.testing.assert_allclose(dec.weights, V[0] ** 2, atol=1e-12)

    def test_free_closed_form(self, free_decomposition):
        E, w = free_weights_exact(4000)
        np.testing.assert_allclose(free_decomposition.energies, E, atol=1e-12)
        np.testing.assert_allclose(free_decomposition.weights, w, atol=1e-12)

    def test_inverse_iteration_branch(self):
        E, w = free_weights_exact(5000)
        dec = eigendecompose(LatticeOperator((), 5000))
        np.testing.assert_allclose(dec.energies, E, atol=1e-12)
        np.testing.assert_allclose(dec.weights, w, atol=1e-12)

    @pytest.mark.parametrize("v", [(), (1.0, -0.5, 0.3), (3.0, -2.5)])
    def test_completeness_moments_and_range(self, v):
        dec = eigendecompose(LatticeOperator(v, 300))
        assert dec.total_weight == pytest.approx(1.0, abs=1e-10)
        v1 = v[0] if v else 0.0
        assert float(dec.weights @ dec.energies) == pytest.approx(v1, abs=1e-12)
        assert float(dec.weights @ dec.energies ** 2) == pytest.approx(v1 ** 2 + 1, abs=1e-12)
        vmax = max((abs(x) for x in v), default=0.0)
        assert np.all(np.abs(dec.energies) <= 2 + vmax)

    def test_rejects_huge_truncation(self):
        with pytest.raises(ValueError):
            eigendecompose(LatticeOperator((), 20001))

    @pytest.mark.parametrize("v", [(), (1.0, -0.5, 0.3)])
    def test_histogram_matches_density(self, v, free_decomposition):
        op = LatticeOperator(v, 4000)
        dec = free_decomposition if not v else eigendecompose(op)
        edges = np.arange(-1.9, 1.9 + 1e-9, 0.05)
        got = binned_weights(dec, edges)
        expect = density_bin_integrals(op, edges)
        np.testing.assert_allclose(got, expect, rtol=0.02)
