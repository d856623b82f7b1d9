import math

import numpy as np
import pytest

from matbc.codes import (alamouti_codebook, codebook_for, dayal_codebook,
                         design_metric_mat, dump_codebook_csv, error_spectrum,
                         ldc_orthonormality, make_constellation, min_trace,
                         sm_codebook, ErrorSpectrum)


def test_dmin_psk_qam():
    assert make_constellation("psk", 4).d_min_sq() == pytest.approx(2.0, rel=1e-12)
    assert make_constellation("psk", 8).d_min_sq() == pytest.approx(2.0 - math.sqrt(2.0), rel=1e-12)
    assert make_constellation("qam", 16).d_min_sq() == pytest.approx(0.4, rel=1e-12)


def test_constellation_unit_energy_and_distinct():
    for kind, m in (("psk", 2), ("psk", 4), ("psk", 8), ("qam", 4), ("qam", 16), ("qam", 64)):
        c = make_constellation(kind, m)
        assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0, abs=1e-12)
        assert len(np.unique(np.round(c.points, 9))) == m
        assert sorted(c.labels) == list(range(m))


def test_constellation_validation():
    with pytest.raises(ValueError):
        make_constellation("psk", 5)
    with pytest.raises(ValueError):
        make_constellation("qam", 8)
    with pytest.raises(ValueError):
        make_constellation("apsk", 4)


def test_gray_adjacent_psk_labels_differ_one_bit():
    c = make_constellation("psk", 8)
    for k in range(8):
        diff = c.labels[k] ^ c.labels[(k + 1) % 8]
        assert bin(diff).count("1") == 1


def test_sm_codebook_shape_energy_rank1():
    c = make_constellation("psk", 4)
    book = sm_codebook(c)
    assert book.size == 16 and book.T == 1 and book.Q == 2
    energies = np.sum(np.abs(book.codewords) ** 2, axis=(1, 2))
    assert np.allclose(energies, 1.0)  # (|c0|^2 + |c1|^2)/2 = 1 for PSK
    assert book.mean_energy() == pytest.approx(1.0, abs=1e-9)
    spec = error_spectrum(book)
    assert all(l2 == 0.0 for _, l2, _ in spec)
    assert sorted({l1 for l1, _, _ in spec}) == [1.0, 2.0, 3.0, 4.0]
    assert min(l1 for l1, _, _ in spec) == pytest.approx(c.d_min_sq() / 2)


def test_alamouti_codebook_scaled_identity_errors():
    c = make_constellation("psk", 4)
    book = alamouti_codebook(c)
    assert book.T == 2 and book.Q == 2
    assert book.mean_energy() == pytest.approx(2.0, abs=1e-9)
    d = book.codewords[:, None] - book.codewords[None, :]
    d = d[~np.eye(book.size, dtype=bool)]
    for delta in d[:64]:
        e = delta @ delta.conj().T
        alpha = e[0, 0].real
        assert np.max(np.abs(e - alpha * np.eye(2))) <= 1e-12
    spec = error_spectrum(book)
    assert all(l1 == pytest.approx(l2) for l1, l2, _ in spec)
    assert min(l1 for l1, _, _ in spec) == pytest.approx(1.0)  # d_min^2 / 2


def test_alamouti_basis_orthogonality():
    book = alamouti_codebook(make_constellation("psk", 4))
    for q in range(4):
        for p in range(4):
            if q == p:
                continue
            phi_q, phi_p = book.basis[q], book.basis[p]
            val = np.trace(phi_q @ phi_p.conj().T + phi_p @ phi_q.conj().T)
            assert abs(val) <= 1e-12
    assert ldc_orthonormality(book)


def test_dayal_codebook_full_rank():
    c = make_constellation("qam", 4)
    book = dayal_codebook(c)
    assert book.size == 256 and book.T == 2 and book.Q == 4
    assert book.mean_energy() == pytest.approx(2.0, abs=1e-9)
    assert book.full_rank
    spec = error_spectrum(book)
    assert min(l2 for _, l2, _ in spec) > 1e-9
    dets = [l1 * l2 for l1, l2, _ in spec]
    assert min(dets) > 0
    assert ldc_orthonormality(book)


def test_dayal_requires_qam():
    with pytest.raises(ValueError):
        dayal_codebook(make_constellation("psk", 4))


def test_spectrum_requires_two_codewords():
    book = sm_codebook(make_constellation("psk", 4))
    single = type(book)(kind="sm", constellation=book.constellation,
                        codewords=book.codewords[:1], T=1, Q=2,
                        symbol_index=book.symbol_index[:1],
                        labels=book.labels[:1], basis=book.basis)
    with pytest.raises(ValueError):
        error_spectrum(single)


def test_spectrum_multiplicities_cover_all_pairs():
    book = sm_codebook(make_constellation("psk", 4))
    spec = error_spectrum(book)
    assert sum(n for _, _, n in spec) == book.size * (book.size - 1)


def test_design_metric_values():
    assert design_metric_mat(ErrorSpectrum(rays=((2.0, 2.0, 1),))) == pytest.approx(0.125)
    got = design_metric_mat(ErrorSpectrum(rays=((4.0, 1.0, 1),)))
    assert got == pytest.approx(0.25 * math.log(4.0) / 3.0, rel=1e-12)


def test_design_metric_rejects_rank_deficient():
    spec = error_spectrum(sm_codebook(make_constellation("psk", 4)))
    with pytest.raises(ValueError):
        design_metric_mat(spec)


def test_log_ratio_lower_bound_ldc():
    # max over pairs of the log-ratio factor >= 2Q/(T d_min^2)
    from matbc.codes import log_ratio
    for builder, const in ((alamouti_codebook, make_constellation("psk", 4)),
                           (dayal_codebook, make_constellation("qam", 4))):
        book = builder(const)
        spec = error_spectrum(book)
        worst = max(log_ratio(l1, l2) for l1, l2, _ in spec if l2 > 1e-9)
        bound = 2.0 * book.Q / (book.T * const.d_min_sq())
        assert worst >= bound - 1e-9


def test_min_trace_bound_with_equality_for_orthonormal_basis():
    for code, const in (("sm", make_constellation("psk", 4)),
                        ("ostbc", make_constellation("psk", 4)),
                        ("dayal", make_constellation("qam", 4))):
        book = codebook_for(code, const)
        bound = book.T / book.Q * const.d_min_sq()
        mt = min_trace(book)
        assert mt <= bound + 1e-9
        assert ldc_orthonormality(book)
        assert mt == pytest.approx(bound, rel=1e-9)


def test_ldc_orthonormality_detects_perturbation():
    book = alamouti_codebook(make_constellation("psk", 4))
    basis = book.basis.copy()
    basis[0, 0, 0] += 0.1
    perturbed = type(book)(kind=book.kind, constellation=book.constellation,
                           codewords=book.codewords, T=book.T, Q=book.Q,
                           symbol_index=book.symbol_index, labels=book.labels,
                           basis=basis)
    assert not ldc_orthonormality(perturbed)


def test_ldc_orthonormality_requires_basis():
    book = alamouti_codebook(make_constellation("psk", 4))
    stripped = type(book)(kind=book.kind, constellation=book.constellation,
                          codewords=book.codewords, T=book.T, Q=book.Q,
                          symbol_index=book.symbol_index, labels=book.labels,
                          basis=None)
    with pytest.raises(ValueError):
        ldc_orthonormality(stripped)


def test_energy_normalization_survives_all_builders():
    for code, const in (("sm", make_constellation("psk", 8)),
                        ("ostbc", make_constellation("qam", 16)),
                        ("dayal", make_constellation("qam", 16))):
        book = codebook_for(code, const)
        assert book.mean_energy() == pytest.approx(book.T, abs=1e-9)


def test_codebook_csv_roundtrip(tmp_path):
    book = sm_codebook(make_constellation("psk", 4))
    path = tmp_path / "book.csv"
    dump_codebook_csv(book, path)
    lines = path.read_text().strip().split("\n")
    assert len(lines) == book.size + 1
    row = lines[1].split(",")
    assert int(row[0]) == 0
    vals = np.array([float(v) for v in row[1:]])
    cw = book.codewords[0]
    flat = []
    for i in range(2):
        for t in range(book.T):
            flat.extend([cw[i, t].real, cw[i, t].imag])
    assert np.allclose(vals, flat)
