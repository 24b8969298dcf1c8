import numpy as np
import pytest

from unitgp.benchmarks import (
    BENCHMARKS,
    DatasetError,
    apply_noise,
    generate,
    get_benchmark,
    load_csv,
    save_csv,
)
from unitgp.dim_analysis import analyze
from unitgp.expr import parse
from unitgp.fitting import fit_constants
from unitgp.units import DIMENSIONLESS, JOKER, UnitVector, parse_unit

PARSEC_M = 3.0856775814913673e16


class TestClosures:
    def test_hubble(self):
        h0 = 70e3 / (1e6 * PARSEC_M)
        v = BENCHMARKS["hubble"].closure(np.array([[1e24]]))[0]
        assert v == pytest.approx(h0 * 1e24, rel=1e-12)
        assert v == pytest.approx(2.2685e6, rel=1e-4)

    def test_rydberg(self):
        lam = BENCHMARKS["rydberg"].closure(np.array([[1.0, 2.0]]))[0]
        assert lam == pytest.approx(1 / (1.0974e7 * (1 - 1 / 4)), rel=1e-12)
        assert lam == pytest.approx(1.21499e-7, rel=1e-5)

    def test_ideal_gas(self):
        p = BENCHMARKS["idealgas"].closure(np.array([[1.0, 273.15, 0.0224]]))[0]
        assert p == pytest.approx(1.0137e5, rel=1e-3)

    def test_newton(self):
        f = BENCHMARKS["newton"].closure(np.array([[1.0, 1.0, 1.0]]))[0]
        assert f == pytest.approx(6.674e-11, rel=1e-12)

    def test_kepler_earth_year(self):
        t = BENCHMARKS["kepler"].closure(np.array([[1.496e11]]))[0]
        assert t == pytest.approx(365.25, rel=0.01)


class TestGeneration:
    @pytest.mark.parametrize("name", sorted(BENCHMARKS))
    def test_deterministic(self, name):
        a, b = generate(get_benchmark(name), 30, seed=4), generate(get_benchmark(name), 30, seed=4)
        assert np.array_equal(a.rows, b.rows) and np.array_equal(a.targets, b.targets)

    @pytest.mark.parametrize("name", sorted(BENCHMARKS))
    def test_ground_truth_fits(self, name):
        spec = get_benchmark(name)
        d = generate(spec, 100, seed=0)
        r = fit_constants(parse(spec.shape), d, np.random.default_rng(0))
        assert r.mse < 1e-18 * np.var(d.targets)

    @pytest.mark.parametrize("name", sorted(BENCHMARKS))
    def test_ground_truth_unit_clean(self, name):
        spec = get_benchmark(name)
        assert analyze(parse(spec.shape), spec.units, spec.target_unit_vector).violations == 0

    def test_ranges(self):
        d = generate(get_benchmark("idealgas"), 500, seed=1)
        n, T, V = d.rows.T
        assert 0.1 <= n.min() and n.max() <= 10 and 100 <= T.min() and T.max() <= 1000
        assert 1e-3 <= V.min() and V.max() <= 1
        r = generate(get_benchmark("rydberg"), 500, seed=1).rows
        assert np.all(r[:, 0] < r[:, 1]) and r[:, 0].max() <= 5 and r[:, 1].max() <= 10

    def test_noise_levels_restricted(self):
        with pytest.raises(ValueError):
            get_benchmark("rydberg", 0.05)
        with pytest.raises(ValueError):
            get_benchmark("hubble", 0.03)
        assert get_benchmark("rydberg", 0.03).noise_level == 0.03

    def test_unknown(self):
        with pytest.raises(KeyError):
            get_benchmark("coulomb")


class TestNoise:
    def test_zero_is_identity(self):
        y = np.arange(5.0)
        assert np.array_equal(apply_noise(y, 0.0, 1), y)

    def test_scale(self):
        y = np.random.default_rng(0).lognormal(size=1000)
        resid = apply_noise(y, 0.05, 3) - y
        assert abs(resid.std(ddof=1) / (0.05 * y.std(ddof=1)) - 1) < 0.2

    def test_reproducible(self):
        y = np.arange(10.0)
        assert np.array_equal(apply_noise(y, 0.1, 7), apply_noise(y, 0.1, 7))

    def test_negative_level(self):
        with pytest.raises(ValueError):
            apply_noise([1.0, 2.0], -0.1, 0)


class TestCsv:
    def write(self, tmp_path, text):
        p = tmp_path / "d.csv"
        p.write_text(text)
        return p

    def test_units(self, tmp_path):
        d = load_csv(self.write(tmp_path, "a,b,y\nm,,m s^-1\n1,2,3\n4,5,6\n"))
        assert d.feature_units == (UnitVector.known(1), DIMENSIONLESS)
        assert d.target_unit == parse_unit("m s^-1")
        assert d.rows.shape == (2, 2) and list(d.targets) == [3.0, 6.0]

    def test_joker_column(self, tmp_path):
        d = load_csv(self.write(tmp_path, "a,y\n*,m\n1,2\n"))
        assert d.feature_units == (JOKER,)

    def test_all_dimensionless(self, tmp_path):
        d = load_csv(self.write(tmp_path, "a,y\n,\n1,2\n"))
        assert d.feature_units == (DIMENSIONLESS,) and d.target_unit == DIMENSIONLESS

    @pytest.mark.parametrize("text,needle", [
        ("a,y\nm,m\n1,2\n3\n", "row 4"),
        ("a,y\nm,m\n1,abc\n", "row 3, column 2"),
        ("a,y\nfoo,m\n1,2\n", "row 2, column 1"),
        ("a,y\nm,m\n", "data row"),
        ("a,y\nm\n1,2\n", "units row"),
    ])
    def test_errors(self, tmp_path, text, needle):
        with pytest.raises(DatasetError, match=needle):
            load_csv(self.write(tmp_path, text))

    def test_round_trip(self, tmp_path):
        d = generate(get_benchmark("newton"), 20, seed=2)
        save_csv(d, tmp_path / "n.csv")
        back = load_csv(tmp_path / "n.csv")
        assert back.feature_units == d.feature_units and back.target_unit == d.target_unit
        assert np.array_equal(back.rows, d.rows) and np.array_equal(back.targets, d.targets)
