import math

import numpy as np
import pytest
from scipy import stats

from matbc.channel import (IID, CorrelationSpec, corr_matrix, corr_sqrt,
                           draw_frame, draw_frames, master_rng, stream_rng)


def test_corr_matrix_zero_is_identity():
    assert np.array_equal(corr_matrix(CorrelationSpec(0.0, 1.3)), np.eye(2))


def test_corr_matrix_entries_and_eigs():
    spec = CorrelationSpec(0.5, math.pi / 3)
    r = corr_matrix(spec)
    assert r[0, 0] == 1.0 and r[1, 1] == 1.0
    assert r[1, 0] == pytest.approx(0.5 * np.exp(1j * math.pi / 3))
    assert r[0, 1] == pytest.approx(np.conj(r[1, 0]))
    w = np.linalg.eigvalsh(r)
    assert w[1] == pytest.approx(1.5) and w[0] == pytest.approx(0.5)


def test_orthogonal_pair_sums_to_scaled_identity_exactly():
    # holds exactly (not just to rounding) for every base phase
    for psi in np.linspace(0.0, 2 * math.pi, 17):
        s1 = CorrelationSpec(0.99, psi)
        s2 = s1.orthogonal_partner()
        total = corr_matrix(s1) + corr_matrix(s2)
        assert np.array_equal(total, 2.0 * np.eye(2))


def test_magnitude_one_rejected():
    with pytest.raises(ValueError):
        CorrelationSpec(1.0, 0.0)


def test_corr_sqrt_reconstructs():
    for spec in (CorrelationSpec(0.0), CorrelationSpec(0.5, 1.0), CorrelationSpec(0.99, 4.0)):
        r = corr_matrix(spec)
        s = corr_sqrt(spec)
        assert np.max(np.abs(s @ s.conj().T - r)) <= 1e-12


def test_sample_covariance_iid():
    rng = stream_rng(100, 0)
    d = draw_frames(IID, IID, rng, 200_000)
    h = d["h1"]
    cov = h.conj().T @ h / len(h)
    assert np.max(np.abs(cov - np.eye(2))) < 5e-3


def test_sample_covariance_correlated():
    spec = CorrelationSpec(0.9, 0.0)
    rng = stream_rng(101, 0)
    d = draw_frames(spec, IID, rng, 400_000)
    h = d["h1"]
    cov = h.conj().T @ h / len(h)
    assert cov[1, 0].real == pytest.approx(0.9, abs=5e-3)
    assert abs(cov[1, 0].imag) < 5e-3
    assert cov[0, 0].real == pytest.approx(1.0, abs=5e-3)


def test_users_independent():
    rng = stream_rng(102, 0)
    d = draw_frames(CorrelationSpec(0.7, 0.2), CorrelationSpec(0.7, 1.2), rng, 300_000)
    cross = d["h1"].conj().T @ d["g1"] / len(d["h1"])
    assert np.max(np.abs(cross)) < 5e-3
    # and across coherence times
    cross_t = d["h1"].conj().T @ d["h2"] / len(d["h1"])
    assert np.max(np.abs(cross_t)) < 5e-3


def test_envelope_square_exponential_ks():
    rng = stream_rng(103, 0)
    d = draw_frames(IID, IID, rng, 100_000)
    power = np.abs(d["h1"][:, 0]) ** 2
    res = stats.kstest(power, "expon")
    assert res.pvalue > 0.01


def test_fixed_seed_replays_identically():
    f1 = draw_frame(CorrelationSpec(0.5, 0.3), IID, stream_rng(7, 1))
    f2 = draw_frame(CorrelationSpec(0.5, 0.3), IID, stream_rng(7, 1))
    for name in ("h1", "h2", "h3", "g1", "g2", "g3"):
        assert np.array_equal(getattr(f1, name), getattr(f2, name))


def test_stream_independence_of_master():
    # distinct keys give distinct streams; same key same stream
    a = stream_rng(5, 0, 1).standard_normal(4)
    b = stream_rng(5, 0, 2).standard_normal(4)
    c = stream_rng(5, 0, 1).standard_normal(4)
    assert not np.allclose(a, b)
    assert np.array_equal(a, c)


def test_joint_phase_mode_preserves_orthogonality_statistics():
    s1 = CorrelationSpec(0.99, 0.0)
    s2 = s1.orthogonal_partner()
    rng = stream_rng(104, 0)
    d = draw_frames(s1, s2, rng, 400_000, phase_mode="joint")
    # each user's covariance is averaged over the random common phase:
    # off-diagonals cancel, diagonal stays 1
    for key in ("h1", "g1"):
        cov = d[key].conj().T @ d[key] / len(d[key])
        assert cov[0, 0].real == pytest.approx(1.0, abs=5e-3)
        assert abs(cov[1, 0]) < 5e-3


def test_phase_mode_validation():
    with pytest.raises(ValueError):
        draw_frames(IID, IID, master_rng(0), 4, phase_mode="bogus")
