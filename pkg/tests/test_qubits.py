import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relbc.qubits import (
    ALL_STATES,
    Basis,
    BB84State,
    DoubleMeasurement,
    QubitRecord,
    QubitRegister,
    apply_noise,
    measure_angles,
    measure_projective,
    random_bases_bits,
    random_bb84,
    sample_detection,
)


def rng(seed=0):
    return np.random.default_rng(seed)


def test_basis_conjugates():
    assert Basis.Z.conjugate is Basis.X
    assert Basis.X.conjugate is Basis.Z


@pytest.mark.parametrize("basis, bit, angle", [(Basis.Z, 0, 0), (Basis.X, 0, 90), (Basis.Z, 1, 180), (Basis.X, 1, 270)])
def test_bloch_table(basis, bit, angle):
    s = BB84State(basis, bit)
    assert s.bloch_angle == angle
    assert BB84State.from_angle(angle) == s


def test_record_invariant():
    with pytest.raises(ValueError):
        QubitRecord(0, ALL_STATES[0], detected=False, honest_outcome=1)


class TestRandomBB84:
    def test_uniform_frequencies(self):
        n = 400_000
        bases, bits = random_bases_bits(n, rng(11))
        codes = 2 * bits + bases
        freq = np.bincount(codes, minlength=4) / n
        assert np.all(np.abs(freq - 0.25) <= 0.005)
        # chi-square with 3 dof, 0.999 quantile 16.27
        counts = freq * n
        assert ((counts - n / 4) ** 2 / (n / 4)).sum() < 16.27

    def test_single(self):
        (s,) = random_bb84(1, rng())
        assert s in ALL_STATES

    def test_deterministic(self):
        assert random_bb84(50, rng(3)) == random_bb84(50, rng(3))

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            random_bb84(0, rng())


class TestMeasurement:
    def test_eigenstate(self):
        r = rng(1)
        zero = BB84State(Basis.Z, 0)
        assert all(measure_projective(zero, 0.0, r) == 0 for _ in range(1000))

    def test_conjugate_coin(self):
        out = measure_angles(np.full(10_000, 90.0), 0.0, rng(2))
        assert abs(out.mean() - 0.5) <= 0.01

    def test_45_degrees(self):
        out = measure_angles(np.zeros(10_000), 45.0, rng(3))
        assert abs((out == 0).mean() - math.cos(math.pi / 8) ** 2) <= 0.01

    def test_born_grid(self):
        r = rng(4)
        trials = 100_000
        for state in ALL_STATES:
            for phi in range(0, 360, 15):
                p0 = (1 + math.cos(math.radians(state.bloch_angle - phi))) / 2
                freq = (measure_angles(np.full(trials, state.bloch_angle), float(phi), r) == 0).mean()
                sigma = math.sqrt(p0 * (1 - p0) / trials)
                assert abs(freq - p0) <= 3 * sigma + 1e-12, (state, phi)

    @given(st.sampled_from(ALL_STATES), st.integers(0, 2**32 - 1))
    def test_own_basis_returns_bit(self, state, seed):
        assert measure_projective(state, state.basis.angle, rng(seed)) == state.bit

    def test_conjugate_uncorrelated(self):
        r = rng(5)
        n = 100_000
        bases, bits = random_bases_bits(n, r)
        angles = 90.0 * bases + 180.0 * bits
        meas = 90.0 * (1 - bases)  # always the other basis
        out = measure_angles(angles, meas, r)
        corr = np.corrcoef(out.astype(float), bits.astype(float))[0, 1]
        assert abs(corr) < 0.02


class TestNoise:
    def test_zero_is_identity(self):
        x = rng(0).integers(0, 2, 1000).astype(np.uint8)
        assert np.array_equal(apply_noise(x, 0.0, rng(1)), x)
        assert apply_noise(1, 0.0, rng(1)) == 1

    def test_flip_rate(self):
        x = np.zeros(100_000, dtype=np.uint8)
        assert abs(apply_noise(x, 0.05, rng(6)).mean() - 0.05) <= 0.005

    def test_bounds(self):
        apply_noise(0, 0.49, rng())
        for bad in (0.5, -0.01, 0.7):
            with pytest.raises(ValueError):
                apply_noise(0, bad, rng())


class TestDetection:
    def test_perfect(self):
        assert sample_detection(100, 1.0, rng()).all()

    def test_rate(self):
        assert abs(sample_detection(100_000, 0.3, rng(7)).mean() - 0.3) <= 0.01

    def test_reproducible(self):
        assert np.array_equal(sample_detection(10, 0.3, rng(8)), sample_detection(10, 0.3, rng(8)))

    @pytest.mark.parametrize("eta", [0.0, -0.1, 1.01])
    def test_bad_eta(self, eta):
        with pytest.raises(ValueError):
            sample_detection(10, eta, rng())


class TestRegister:
    def test_single_measurement(self):
        reg = QubitRegister([0, 1], [0, 0])
        mask = np.array([True, False])
        reg.measure(0.0, rng(), which=mask)
        reg.measure(90.0, rng(), which=~mask)
        with pytest.raises(DoubleMeasurement):
            reg.measure(45.0, rng(), which=mask)

    def test_outcomes_follow_angles(self):
        reg = QubitRegister([0, 0, 1, 1], [0, 1, 0, 1])
        out = reg.measure(np.array([0.0, 0.0, 90.0, 90.0]), rng())
        assert out.tolist() == [0, 1, 0, 1]
