import numpy as np
import pytest

from omlat import ConfigurationError, Path
from omlat.utils import format_float, worker_count


class TestPath:
    def test_basic_properties(self):
        p = Path(times=0.25 * np.arange(5), states=np.zeros((5, 3)), dt=0.25)
        assert p.steps == 4
        assert p.d == 3
        assert p.T == 1.0

    def test_nonuniform_grid_rejected(self):
        times = np.array([0.0, 0.25, 0.6, 0.75, 1.0])
        with pytest.raises(ConfigurationError):
            Path(times=times, states=np.zeros((5, 1)), dt=0.25)

    def test_non_finite_rejected(self):
        states = np.zeros((3, 2))
        states[1, 0] = np.nan
        with pytest.raises(ConfigurationError):
            Path(times=np.array([0.0, 0.5, 1.0]), states=states, dt=0.5)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ConfigurationError):
            Path(times=np.array([0.0, 0.5]), states=np.zeros((3, 1)), dt=0.5)

    def test_same_grid(self):
        a = Path(times=0.5 * np.arange(3), states=np.zeros((3, 2)), dt=0.5)
        b = Path(times=0.5 * np.arange(3), states=np.ones((3, 2)), dt=0.5)
        c = Path(times=0.25 * np.arange(3), states=np.zeros((3, 2)), dt=0.25)
        assert a.same_grid(b)
        assert not a.same_grid(c)


class TestUtils:
    def test_float_format_round_trips(self):
        for x in (1.0 / 3.0, 1e-300, 123456.789, -0.1):
            assert float(format_float(x)) == x

    def test_worker_count_env(self, monkeypatch):
        monkeypatch.setenv("OMLAT_THREADS", "3")
        assert worker_count() == 3
        monkeypatch.setenv("OMLAT_THREADS", "0")
        assert worker_count() == 1
        monkeypatch.setenv("OMLAT_THREADS", "not-a-number")
        assert worker_count() >= 1
        monkeypatch.delenv("OMLAT_THREADS")
        assert worker_count() >= 1

    def test_thread_count_does_not_change_results(self, monkeypatch):
        import numpy as np

        from omlat import LatticeConfig, NoiseCoefficient, PolynomialNonlinearity
        from omlat.paths import Path as P
        from omlat.tube import TubeExperiment, tube_ratio

        cfg = LatticeConfig(
            n=0, nu=0.1, lam=0.4,
            f=PolynomialNonlinearity(coeffs=(), p=1, growth_constant=1.0),
            q=NoiseCoefficient.constant(1.0), T=1.0,
        )
        phi = P(times=np.arange(65) / 64.0, states=np.zeros((65, 1)), dt=1.0 / 64)
        exp = TubeExperiment(cfg=cfg, phi=phi, eps=(0.5,), samples=40_000, seed=4)
        monkeypatch.setenv("OMLAT_THREADS", "1")
        one = tube_ratio(exp)
        monkeypatch.setenv("OMLAT_THREADS", "4")
        four = tube_ratio(exp)
        np.testing.assert_array_equal(one.num_hits, four.num_hits)
        np.testing.assert_array_equal(one.den_hits, four.den_hits)
