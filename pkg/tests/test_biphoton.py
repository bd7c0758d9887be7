import numpy as np
import pytest
from scipy.stats import unitary_group

from qfpdft.biphoton import (BiphotonState, CountsTable, JointDistribution,
                             joint_distribution, maximally_entangled,
                             prepare_phi_state, sample_counts)
from qfpdft.exceptions import DegenerateInputError, ValidationError
from qfpdft.qfp import dft_matrix


def brute_force(psi, w_i, w_s):
    d = psi.shape[0]
    p = np.zeros((d, d))
    for m in range(d):
        for n in range(d):
            amp = 0j
            for k in range(d):
                for l in range(d):
                    amp += w_i[m, k] * w_s[n, l] * psi[k, l]
            p[m, n] = abs(amp) ** 2
    return p


def test_phi_state_amplitudes():
    s = prepare_phi_state(0.0)
    expected = np.zeros((3, 3))
    expected[[0, 1, 2], [2, 1, 0]] = 1 / np.sqrt(3)
    np.testing.assert_allclose(s.amplitudes, expected, atol=1e-15)
    s = prepare_phi_state(2 * np.pi / 3)
    w = np.exp(2j * np.pi / 3)
    np.testing.assert_allclose([s.amplitudes[0, 2], s.amplitudes[1, 1], s.amplitudes[2, 0]],
                               np.array([1, w, w ** 2]) / np.sqrt(3), atol=1e-15)


@pytest.mark.parametrize("phi", [0.0, 0.4, np.pi, -2.0, 17.0])
def test_phi_state_normalized(phi):
    s = prepare_phi_state(phi)
    assert np.sum(np.abs(s.amplitudes) ** 2) == pytest.approx(1.0, abs=1e-12)
    assert np.count_nonzero(s.amplitudes) == 3


@pytest.mark.parametrize("d", range(1, 11))
def test_maximally_entangled(d):
    s = maximally_entangled(d)
    assert np.sum(np.abs(s.amplitudes) ** 2) == pytest.approx(1.0, abs=1e-12)
    for k in range(d):
        assert s.amplitudes[k, d - 1 - k] == pytest.approx(d ** -0.5)
    with pytest.raises(ValidationError):
        maximally_entangled(0)


def test_state_validation():
    with pytest.raises(ValidationError):
        BiphotonState(np.ones((2, 2)))
    with pytest.raises(ValidationError):
        BiphotonState(np.ones((2, 3)) / np.sqrt(6))
    with pytest.raises(DegenerateInputError):
        BiphotonState.from_unnormalized(np.zeros((2, 2)))
    s = BiphotonState.from_unnormalized(np.ones((2, 2)))
    np.testing.assert_allclose(s.amplitudes, 0.5)
    with pytest.raises(ValueError):
        s.amplitudes[0, 0] = 1


def test_ket_is_idler_major():
    amps = np.zeros((2, 2))
    amps[0, 1] = 1.0
    ket = BiphotonState(amps).ket()
    np.testing.assert_array_equal(ket, [0, 1, 0, 0])


@pytest.mark.parametrize("d", range(1, 11))
def test_identity_gates_give_anti_diagonal(d):
    dist = joint_distribution(maximally_entangled(d), np.eye(d), np.eye(d))
    expected = np.zeros((d, d))
    expected[np.arange(d), d - 1 - np.arange(d)] = 1 / d
    np.testing.assert_allclose(dist.probs, expected, atol=1e-15)
    assert dist.escape_mass == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("d", range(1, 11))
def test_dft_gates_correlate_matched_bins(d):
    f = dft_matrix(d)
    dist = joint_distribution(maximally_entangled(d), f, f)
    np.testing.assert_allclose(dist.probs, np.eye(d) / d, atol=1e-10)


@pytest.mark.parametrize("d", range(1, 7))
def test_against_brute_force_double_sum(d):
    rng = np.random.default_rng(d)
    psi = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    state = BiphotonState.from_unnormalized(psi)
    for w_i, w_s in [(dft_matrix(d), dft_matrix(d)), (np.eye(d), dft_matrix(d)),
                     (unitary_group.rvs(d, random_state=rng) if d > 1 else np.eye(1),
                      0.8 * dft_matrix(d))]:
        dist = joint_distribution(state, w_i, w_s)
        np.testing.assert_allclose(dist.probs, brute_force(state.amplitudes, w_i, w_s),
                                   atol=1e-12)
        assert dist.probs.sum() + dist.escape_mass == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("d", range(2, 7))
def test_identity_dft_is_uniform(d):
    dist = joint_distribution(maximally_entangled(d), np.eye(d), dft_matrix(d))
    np.testing.assert_allclose(dist.probs, 1 / d ** 2, atol=1e-12)


def test_lossy_gates_escape_mass():
    f = dft_matrix(3)
    dist = joint_distribution(prepare_phi_state(0.0), np.sqrt(0.9) * f, np.sqrt(0.95) * f)
    assert dist.escape_mass == pytest.approx(1 - 0.9 * 0.95, abs=1e-12)


def test_dimension_mismatch():
    with pytest.raises(ValidationError):
        joint_distribution(maximally_entangled(3), np.eye(2), np.eye(3))


def test_multinomial_counts():
    dist = joint_distribution(prepare_phi_state(0.0), 0.9 * dft_matrix(3), dft_matrix(3))
    table = sample_counts(dist, n=1000, seed=4)
    assert table.total == 1000
    assert table.counts.dtype == np.int64
    again = sample_counts(dist, n=1000, seed=4)
    np.testing.assert_array_equal(table.counts, again.counts)
    # off-diagonal cells have zero probability
    assert np.all(table.counts[~np.eye(3, dtype=bool)] == 0)


def test_poisson_counts_mean():
    dist = JointDistribution.from_probs(np.full((2, 2), 0.2))
    draws = np.array([sample_counts(dist, "poisson", rate=500.0, dwell=2.0, seed=s).counts
                      for s in range(200)])
    # mean 200 per cell, standard error of the mean 1
    np.testing.assert_allclose(draws.mean(axis=0), 200.0, atol=5.0)


def test_sampling_errors():
    zero = JointDistribution(np.zeros((2, 2)), 1.0)
    with pytest.raises(DegenerateInputError):
        sample_counts(zero, n=10, seed=0)
    dist = JointDistribution.from_probs(np.full((2, 2), 0.25))
    with pytest.raises(ValidationError):
        sample_counts(dist, seed=0)
    with pytest.raises(ValidationError):
        sample_counts(dist, "poisson", seed=0)
    with pytest.raises(ValidationError):
        sample_counts(dist, "binomial", n=1, seed=0)


def test_counts_table_validation():
    with pytest.raises(ValidationError):
        CountsTable(np.array([[1, -1], [0, 0]]))
    with pytest.raises(ValidationError):
        CountsTable(np.array([[1.5, 0], [0, 0]]))
    with pytest.raises(ValidationError):
        CountsTable(np.zeros((2, 3)))
    assert CountsTable(np.array([[1.0, 2.0], [3.0, 4.0]])).total == 10
