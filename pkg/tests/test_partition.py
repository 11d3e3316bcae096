import numpy as np
import pytest

from reciprocal_rbm import partition
from reciprocal_rbm.errors import DegenerateWeights, TooLarge
from reciprocal_rbm.partition import (AisConfig, _log_mean_exp, ais_log_z, base_log_z, exact_log_z,
                                      log_likelihood, rais_log_z)
from reciprocal_rbm.rbm import RbmParams

from helpers import brute_log_z, random_params


class TestExact:
    @pytest.mark.parametrize("shape", [(4, 3), (3, 5), (1, 1), (6, 6)])
    def test_matches_brute_force(self, shape):
        p = random_params(*shape, seed=sum(shape))
        assert exact_log_z(p).log_z == pytest.approx(brute_log_z(p), abs=1e-10)

    def test_zero_model(self):
        assert exact_log_z(RbmParams.zeros(5, 3)).log_z == pytest.approx(8 * np.log(2))

    def test_chunked_enumeration_independent_model(self):
        rng = np.random.default_rng(0)
        p = RbmParams(rng.normal(size=17), rng.normal(size=19), np.zeros((17, 19)))
        assert exact_log_z(p).log_z == pytest.approx(base_log_z(p), abs=1e-9)

    def test_chunking_does_not_change_the_sum(self, monkeypatch):
        p = random_params(7, 9, 2)
        whole = exact_log_z(p).log_z
        monkeypatch.setattr(partition, "_CHUNK_BITS", 3)
        assert exact_log_z(p).log_z == pytest.approx(whole, abs=1e-10)

    def test_too_large(self):
        with pytest.raises(TooLarge):
            exact_log_z(RbmParams.zeros(26, 26))

    def test_independent_model_closed_form(self):
        p = RbmParams([0.3, -1.0], [2.0], np.zeros((2, 1)))
        assert exact_log_z(p).log_z == pytest.approx(base_log_z(p))


class TestAnnealing:
    def test_w_zero_is_exact(self):
        p = RbmParams(np.array([0.5, -0.2, 1.0]), np.array([0.1, 0.3]), np.zeros((3, 2)))
        cfg = AisConfig(n_temps=10, n_chains=20, rais_burn_in=5)
        for est in (ais_log_z(p, cfg), rais_log_z(p, cfg)):
            assert est.log_z == pytest.approx(base_log_z(p), abs=1e-12)
            assert est.std_err == pytest.approx(0.0, abs=1e-12)

    def test_close_to_exact(self):
        p = random_params(8, 6, 3, scale=0.5)
        exact = exact_log_z(p).log_z
        cfg = AisConfig(n_temps=300, n_chains=100, seed=1, rais_burn_in=200)
        assert abs(ais_log_z(p, cfg).log_z - exact) < 0.1
        assert abs(rais_log_z(p, cfg).log_z - exact) < 0.1

    def test_seeded(self):
        p = random_params(5, 4, 0)
        cfg = AisConfig(n_temps=20, n_chains=10, seed=7)
        assert ais_log_z(p, cfg) == ais_log_z(p, cfg)

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            AisConfig(schedule=[0.0, 0.5, 0.4, 1.0])
        with pytest.raises(ValueError):
            AisConfig(n_chains=1)
        assert AisConfig(n_temps=4).schedule.tolist() == [0, 0.25, 0.5, 0.75, 1]

    def test_degenerate_weights(self):
        with pytest.raises(DegenerateWeights):
            _log_mean_exp(np.array([np.nan, np.inf]))

    def test_as_dict(self):
        assert exact_log_z(RbmParams.zeros(1, 1)).as_dict() == {"log_z": 2 * np.log(2), "std_err": 0.0,
                                                                 "mode": "exact"}


class TestLikelihood:
    def test_uniform_model(self):
        p = RbmParams.zeros(4, 2)
        data = np.eye(4)
        assert log_likelihood(p, data, exact_log_z(p)) == pytest.approx(-4 * np.log(2))
