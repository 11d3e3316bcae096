import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reciprocal_rbm.boson import (GibbsConfig, constraint_minimum, divergent_modes, excitation, landscape_trace,
                                  mode_frequencies, oscillator_spectrum)
from reciprocal_rbm.errors import DimensionMismatch, IndexOutOfRange
from reciprocal_rbm.rbm import RbmParams
from reciprocal_rbm.spectral import ReciprocalFrame, decompose, project_hidden, project_visible, to_uw
from reciprocal_rbm.symmetry import reciprocal_moments

from helpers import random_params


class TestFrequencies:
    def test_unit_singular_value(self):
        s = oscillator_spectrum([1.0], 3, 1, beta=1, k_diag=4)
        np.testing.assert_allclose(s.omegas, [1.5, 2.5, 2.0, 2.0])

    def test_degenerate_mode(self):
        np.testing.assert_allclose(oscillator_spectrum([0.0], 1, 1).omegas, [2.0, 2.0])

    def test_divergent(self):
        s = oscillator_spectrum([5.0], 2, 1)
        assert s.omegas[0] < 0 and s.divergent == (0,)

    def test_layout_when_hidden_larger(self):
        s = oscillator_spectrum([2.0, 1.0], 2, 5, beta=0.5, k_diag=3)
        assert s.omegas.size == 7
        np.testing.assert_allclose(s.omegas, [1.0, 1.25, 2.0, 1.75, 1.5, 1.5, 1.5])

    def test_validation(self):
        with pytest.raises(DimensionMismatch):
            oscillator_spectrum([1.0, 2.0], 3, 1)
        with pytest.raises(ValueError):
            oscillator_spectrum([1.0], 1, 1, beta=0)

    def test_from_frame(self):
        f = decompose(random_params(6, 4, 0))
        s = mode_frequencies(f)
        assert s.omegas.size == 10
        np.testing.assert_allclose(s.omegas[:4] + s.omegas[4:8], 4.0)


class TestDivergent:
    def test_threshold(self):
        assert divergent_modes(oscillator_spectrum([5.0, 3.0], 2, 2))["modes"] == [0]

    def test_strict(self):
        assert divergent_modes(oscillator_spectrum([4.0, 3.9], 2, 2))["modes"] == []

    def test_none_below(self):
        rep = divergent_modes(oscillator_spectrum([3.0, 1.0], 3, 2))
        assert rep["modes"] == [] and rep["lambda_c"] == 4.0

    @given(st.lists(st.floats(0, 20), min_size=1, max_size=8), st.floats(0.1, 5))
    def test_doubling_beta_grows_set(self, lam, beta):
        lam = sorted(lam, reverse=True)
        n = len(lam)
        a = set(oscillator_spectrum(lam, n, n, beta).divergent)
        b = set(oscillator_spectrum(lam, n, n, 2 * beta).divergent)
        assert a <= b
        assert a == {i for i, x in enumerate(lam) if x > 4 / beta}


class TestExcitation:
    def test_ground_state(self):
        s = oscillator_spectrum([1.0, 7.0][::-1], 3, 2)
        assert excitation(s, np.zeros(5, dtype=int)) == (0.0, 0.0)

    def test_one_hot_and_rate(self):
        s = oscillator_spectrum([1.0], 2, 1, beta=2.0)
        E, G = excitation(s, [1, 0, 0])
        assert E == s.omegas[0] and G == pytest.approx(2.0 * E / 2)

    @given(st.lists(st.integers(0, 5), min_size=4, max_size=4), st.lists(st.integers(0, 5), min_size=4, max_size=4))
    def test_additive(self, n1, n2):
        s = oscillator_spectrum([0.7, 0.2], 2, 2)
        e = lambda n: excitation(s, n)[0]
        assert e(np.add(n1, n2)) == pytest.approx(e(n1) + e(n2))
        assert e(n1) >= 0

    def test_validation(self):
        s = oscillator_spectrum([1.0], 1, 1)
        with pytest.raises(DimensionMismatch):
            excitation(s, [1])
        with pytest.raises(ValueError):
            excitation(s, [-1, 0])


class TestConstraintMinimum:
    def test_zero_biases_identity_frame(self):
        f = ReciprocalFrame(np.eye(2), np.eye(2), np.array([2.0, 1.0]), np.zeros(2), np.zeros(2), 0.0)
        mu = constraint_minimum(f)
        np.testing.assert_allclose(mu.x, 0.5)
        np.testing.assert_allclose(mu.u, 0.5 * np.sqrt(2))
        np.testing.assert_allclose(mu.w, 0.0)

    def test_agrees_with_moments(self):
        f = decompose(random_params(7, 4, 1))
        mu = constraint_minimum(f)
        mom = reciprocal_moments(f)
        for i in range(4):
            u, w = to_uw(f, i, mom.mu_x[i], mom.mu_y[i])
            assert abs(u - mu.u[i]) <= 1e-10 and abs(w - mu.w[i]) <= 1e-10
        np.testing.assert_allclose(mu.x, mom.mu_x, atol=1e-10)

    def test_monte_carlo(self):
        f = decompose(random_params(12, 8, 2))
        mu = constraint_minimum(f)
        rng = np.random.default_rng(0)
        x = project_visible(f, (rng.random((100_000, 12)) < 0.5).astype(float))
        y = project_hidden(f, (rng.random((100_000, 8)) < 0.5).astype(float))
        for i in range(8):
            u, w = to_uw(f, i, x[:, i], y[:, i])
            for z, target in ((u, mu.u[i]), (w, mu.w[i])):
                assert abs(z.mean() - target) < 4 * z.std() / np.sqrt(z.size)

    def test_sign_flip(self):
        f = decompose(random_params(5, 3, 0))
        U = f.U.copy()
        U[:, 4] *= -1
        g = ReciprocalFrame(U, f.V, f.lambdas, f.a0, f.b0, f.tol)
        assert constraint_minimum(g).x[4] == pytest.approx(-constraint_minimum(f).x[4])


class TestLandscape:
    def _data(self, n, seed=0):
        return (np.random.default_rng(seed).random((400, n)) < 0.5).astype(float)

    def test_single_checkpoint(self):
        p = random_params(6, 3, 0, scale=0.1)
        tr = landscape_trace([(0, p)], self._data(6), GibbsConfig(50, 5), [0, 4])
        assert tr.epochs == [0] and len(tr.records) == 2
        assert tr.records[0].coordinate == "u" and tr.records[0].saddle == 0.0
        assert tr.records[1].coordinate == "x" and math.isnan(tr.records[1].saddle)

    def test_untrained_data_sits_at_saddle_region(self):
        p = RbmParams.gaussian_init(30, 10, 0.01, np.random.default_rng(0))
        tr = landscape_trace([(0, p)], self._data(30), GibbsConfig(200, 10), range(3))
        for r in tr.records:
            assert r.distance <= 4 * r.test_sd
            assert abs(r.test_mean - r.mu) <= 4 * r.test_se

    def test_hidden_larger_uses_y_tail(self):
        p = random_params(3, 5, 0, scale=0.1)
        tr = landscape_trace([(0, p)], self._data(3), GibbsConfig(20, 2), [4])
        assert tr.records[0].coordinate == "y"

    def test_csv_layout(self):
        p = random_params(4, 2, 0)
        tr = landscape_trace([(0, p), (3, p)], self._data(4), GibbsConfig(20, 2), [0, 3])
        rows = list(csv.reader(io.StringIO(tr.to_csv())))
        assert rows[0] == ["epoch", "mode", "mu", "saddle", "test_mean", "test_sd", "gibbs_mean", "gibbs_sd"]
        assert [r[:2] for r in rows[1:]] == [["0", "1"], ["0", "4"], ["3", "1"], ["3", "4"]]

    def test_validation(self):
        p = random_params(4, 2, 0)
        with pytest.raises(ValueError):
            landscape_trace([], self._data(4), GibbsConfig(), [0])
        with pytest.raises(ValueError):
            landscape_trace([(2, p), (1, p)], self._data(4), GibbsConfig(), [0])
        with pytest.raises(IndexOutOfRange):
            landscape_trace([(0, p)], self._data(4), GibbsConfig(20, 2), [4])
        with pytest.raises(DimensionMismatch):
            landscape_trace([(0, p)], self._data(5), GibbsConfig(20, 2), [0])
