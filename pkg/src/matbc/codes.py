"""Constellations and 2xT space-time codebooks.

Three codebooks are provided:

- spatial multiplexing (SM): independent symbols per antenna, T = 1, Q = 2,
  codewords (1/sqrt 2) [c0; c1], every error matrix rank one;
- Alamouti O-STBC: T = 2, Q = 2, every error matrix a scaled identity;
- "Dayal": full-rate full-diversity tilted-QAM, T = 2, Q = 4, two QAM pairs
  rotated by 1/2*atan(2) and 1/2*atan(1/2) on the diagonal/anti-diagonal.
  Full diversity is certified by exhaustive enumeration of symbol-difference
  tuples at construction time rather than trusted from the angles.

All codebooks are normalized so the mean codeword energy E{Tr CC^H} equals T
and are immutable after construction.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import eig_herm2

_DAYAL_THETA_1 = 0.5 * math.atan(2.0)
_DAYAL_THETA_2 = 0.5 * math.atan(0.5)


def _gray(k):
    return k ^ (k >> 1)


@dataclass(frozen=True, eq=False)
class Constellation:
    """Unit-average-energy signal set with Gray bit labels."""

    kind: str
    points: np.ndarray
    bits_per_symbol: int
    labels: np.ndarray

    @property
    def size(self):
        return len(self.points)

    def d_min_sq(self):
        """Squared minimum distance between distinct points."""
        d = self.points[:, None] - self.points[None, :]
        d2 = np.abs(d) ** 2
        return float(np.min(d2[d2 > 1e-12]))


def make_constellation(kind, m):
    """Build a PSK or square-QAM constellation of size m.

    Average energy is normalized to one and labels are Gray coded (per axis
    for QAM) so adjacent points differ in a single bit.
    """
    kind = kind.lower()
    if m < 2 or (m & (m - 1)) != 0:
        raise ValueError(f"constellation size must be a power of two, got {m}")
    bits = m.bit_length() - 1
    if kind == "psk":
        k = np.arange(m)
        points = np.exp(2j * math.pi * k / m)
        labels = np.array([_gray(int(i)) for i in k])
    elif kind == "qam":
        side = math.isqrt(m)
        if side * side != m:
            raise ValueError(f"QAM requires a square size, got {m}")
        scale = math.sqrt(3.0 / (2.0 * (m - 1)))
        half_bits = side.bit_length() - 1
        points = []
        labels = []
        for ix in range(side):
            for iy in range(side):
                re = (2 * ix + 1 - side) * scale
                im = (2 * iy + 1 - side) * scale
                points.append(re + 1j * im)
                labels.append((_gray(ix) << half_bits) | _gray(iy))
        points = np.array(points)
        labels = np.array(labels)
    else:
        raise ValueError(f"unknown constellation kind {kind!r}")
    return Constellation(kind=kind, points=points, bits_per_symbol=bits, labels=labels)


@dataclass(frozen=True, eq=False)
class CodeBook:
    """Enumerable set of normalized 2xT space-time codewords.

    codewords has shape (K, 2, T); symbol_index (K, Q) maps each codeword to
    its constellation symbol indices (used for symbol-error counting);
    labels (K,) are the concatenated Gray bit labels; basis, when present,
    holds the 2Q real-dispersion matrices Phi_q of shape (2Q, 2, T).
    """

    kind: str
    constellation: Constellation
    codewords: np.ndarray
    T: int
    Q: int
    symbol_index: np.ndarray
    labels: np.ndarray
    basis: np.ndarray = None
    full_rank: bool = field(default=False, compare=False)

    @property
    def size(self):
        return len(self.codewords)

    @property
    def bits_per_codeword(self):
        return self.Q * self.constellation.bits_per_symbol

    def mean_energy(self):
        return float(np.mean(np.sum(np.abs(self.codewords) ** 2, axis=(1, 2))))


def _symbol_tuples(m, q):
    grids = np.meshgrid(*([np.arange(m)] * q), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _labels_for(c, sym_idx):
    bps = c.bits_per_symbol
    lab = np.zeros(len(sym_idx), dtype=np.int64)
    for q in range(sym_idx.shape[1]):
        lab = (lab << bps) | c.labels[sym_idx[:, q]]
    return lab


def sm_codebook(c):
    """Spatial multiplexing codebook: (1/sqrt 2) [c0; c1], T = 1, Q = 2."""
    idx = _symbol_tuples(c.size, 2)
    s = c.points[idx]  # (K, 2)
    cws = (s / math.sqrt(2.0)).reshape(-1, 2, 1)
    r = 1.0 / math.sqrt(2.0)
    basis = np.array([
        [[r], [0.0]],
        [[0.0], [r]],
        [[1j * r], [0.0]],
        [[0.0], [1j * r]],
    ])
    return CodeBook(kind="sm", constellation=c, codewords=cws, T=1, Q=2,
                    symbol_index=idx, labels=_labels_for(c, idx), basis=basis)


def alamouti_codebook(c):
    """Alamouti O-STBC codebook: (1/sqrt 2) [[s1, -s2*], [s2, s1*]]."""
    idx = _symbol_tuples(c.size, 2)
    s1 = c.points[idx[:, 0]]
    s2 = c.points[idx[:, 1]]
    r = 1.0 / math.sqrt(2.0)
    cws = np.empty((len(idx), 2, 2), dtype=complex)
    cws[:, 0, 0] = s1
    cws[:, 0, 1] = -np.conj(s2)
    cws[:, 1, 0] = s2
    cws[:, 1, 1] = np.conj(s1)
    cws *= r
    basis = np.array([
        [[r, 0.0], [0.0, r]],          # Re s1
        [[0.0, -r], [r, 0.0]],         # Re s2
        [[1j * r, 0.0], [0.0, -1j * r]],  # Im s1
        [[0.0, 1j * r], [1j * r, 0.0]],   # Im s2
    ])
    return CodeBook(kind="ostbc", constellation=c, codewords=cws, T=2, Q=2,
                    symbol_index=idx, labels=_labels_for(c, idx), basis=basis)


def dayal_codebook(c):
    """Full-rate full-diversity tilted-QAM codebook, T = 2, Q = 4.

    Raises if the constellation is not QAM or if the exhaustive
    difference-tuple enumeration finds a rank-deficient error matrix.
    """
    if c.kind != "qam":
        raise ValueError("the Dayal construction requires a QAM constellation")
    c1, s1 = math.cos(_DAYAL_THETA_1), math.sin(_DAYAL_THETA_1)
    c2, s2 = math.cos(_DAYAL_THETA_2), math.sin(_DAYAL_THETA_2)
    idx = _symbol_tuples(c.size, 4)
    sa, sb, sc, sd = (c.points[idx[:, q]] for q in range(4))
    x1 = c1 * sa - s1 * sb
    x2 = s1 * sa + c1 * sb
    y1 = c2 * sc - s2 * sd
    y2 = s2 * sc + c2 * sd
    r = 1.0 / math.sqrt(2.0)
    cws = np.empty((len(idx), 2, 2), dtype=complex)
    cws[:, 0, 0] = x1
    cws[:, 0, 1] = y1
    cws[:, 1, 0] = y2
    cws[:, 1, 1] = x2
    cws *= r
    basis = r * np.array([
        [[c1, 0.0], [0.0, s1]],        # Re s_a
        [[-s1, 0.0], [0.0, c1]],       # Re s_b
        [[0.0, c2], [s2, 0.0]],        # Re s_c
        [[0.0, -s2], [c2, 0.0]],       # Re s_d
        [[1j * c1, 0.0], [0.0, 1j * s1]],
        [[-1j * s1, 0.0], [0.0, 1j * c1]],
        [[0.0, 1j * c2], [1j * s2, 0.0]],
        [[0.0, -1j * s2], [1j * c2, 0.0]],
    ])
    min_lam2 = _dayal_min_lambda2(c)
    if min_lam2 < 1e-9:
        raise ValueError("tilted-QAM construction is not full diversity for "
                         f"this constellation (min lambda2 = {min_lam2:.3e})")
    return CodeBook(kind="dayal", constellation=c, codewords=cws, T=2, Q=4,
                    symbol_index=idx, labels=_labels_for(c, idx), basis=basis,
                    full_rank=True)


def _dayal_min_lambda2(c):
    """Smallest lambda2 over all nonzero symbol-difference tuples."""
    diffs = np.unique(np.round((c.points[:, None] - c.points[None, :]).ravel(), 12))
    c1, s1 = math.cos(_DAYAL_THETA_1), math.sin(_DAYAL_THETA_1)
    c2, s2 = math.cos(_DAYAL_THETA_2), math.sin(_DAYAL_THETA_2)
    da, db = np.meshgrid(diffs, diffs, indexing="ij")
    x1 = (c1 * da - s1 * db).ravel()
    x2 = (s1 * da + c1 * db).ravel()
    y1 = (c2 * da - s2 * db).ravel()
    y2 = (s2 * da + c2 * db).ravel()
    xprod = x1 * x2
    yprod = y1 * y2
    xpow = np.abs(x1) ** 2 + np.abs(x2) ** 2
    ypow = np.abs(y1) ** 2 + np.abs(y2) ** 2
    det2 = 0.25 * np.abs(xprod[:, None] - yprod[None, :]) ** 2
    tr = 0.5 * (xpow[:, None] + ypow[None, :])
    lam2 = tr / 2.0 - np.sqrt(np.maximum(tr * tr / 4.0 - det2, 0.0))
    nz = tr > 1e-12
    return float(lam2[nz].min())


@dataclass(frozen=True)
class ErrorSpectrum:
    """Distinct error-matrix eigenvalue pairs with pair multiplicities."""

    rays: tuple  # of (lam1, lam2, multiplicity)

    def __iter__(self):
        return iter(self.rays)

    def __len__(self):
        return len(self.rays)


def error_matrices(book):
    """Ordered-pair difference matrices as a (P, 2, T) array, P = K(K-1)."""
    cws = book.codewords
    k = len(cws)
    if k < 2:
        raise ValueError("error spectrum needs at least two codewords")
    if k * k > 3e8:
        raise ValueError(f"codebook too large to enumerate pairs ({k}^2)")
    d = cws[:, None, :, :] - cws[None, :, :, :]
    mask = ~np.eye(k, dtype=bool)
    return d[mask]


def error_spectrum(book):
    """Eigenvalue spectrum of (C-E)(C-E)^H over all ordered pairs C != E."""
    d = error_matrices(book)
    tr = np.sum(np.abs(d) ** 2, axis=(1, 2))
    if book.T == 1:
        det = np.zeros_like(tr)
    else:
        det = np.abs(d[:, 0, 0] * d[:, 1, 1] - d[:, 0, 1] * d[:, 1, 0]) ** 2
    rad = np.sqrt(np.maximum(tr * tr / 4.0 - det, 0.0))
    lam1 = tr / 2.0 + rad
    lam2 = np.maximum(tr / 2.0 - rad, 0.0)
    key = np.round(np.stack([lam1, lam2], axis=1), 9)
    uniq, counts = np.unique(key, axis=0, return_counts=True)
    rays = tuple((float(l1), float(l2), int(n)) for (l1, l2), n in zip(uniq, counts))
    return ErrorSpectrum(rays=rays)


def design_metric_mat(spectrum):
    """Worst-case coding-gain metric max (lam1 lam2)^-1 (log lam1 - log lam2)/(lam1 - lam2).

    Defined for full-rank spectra only; the ratio takes its limit 1/lam at
    equal eigenvalues.  Smaller is better.
    """
    worst = 0.0
    for lam1, lam2, _ in spectrum:
        if lam2 <= 1e-12:
            raise ValueError("design metric undefined for rank-deficient error matrices")
        worst = max(worst, log_ratio(lam1, lam2) / (lam1 * lam2))
    return worst


def log_ratio(lam1, lam2):
    """(log lam1 - log lam2)/(lam1 - lam2), with the equal-argument limit 1/lam."""
    if abs(lam1 - lam2) <= 1e-9 * max(lam1, lam2):
        return 2.0 / (lam1 + lam2)
    return (math.log(lam1) - math.log(lam2)) / (lam1 - lam2)


def ldc_orthonormality(book, tol=1e-9):
    """True iff the stacked real/imag basis satisfies X^T X = (T/Q) I_2Q."""
    if book.basis is None:
        raise ValueError("codebook carries no dispersion basis")
    cols = []
    for phi in book.basis:
        cols.append(np.concatenate([phi.real, phi.imag], axis=0).ravel(order="F"))
    x = np.stack(cols, axis=1)
    gram = x.T @ x
    target = (book.T / book.Q) * np.eye(2 * book.Q)
    return bool(np.max(np.abs(gram - target)) <= tol)


def min_trace(book):
    """min over pairs of ||C - E||_F^2."""
    d = error_matrices(book)
    tr = np.sum(np.abs(d) ** 2, axis=(1, 2))
    return float(tr.min())


def dump_codebook_csv(book, path):
    """Write the codebook as CSV: index then re/im of the 2T entries."""
    with open(path, "w") as f:
        cols = ",".join(f"re{i}{t},im{i}{t}" for i in range(2) for t in range(book.T))
        f.write(f"index,{cols}\n")
        for k, cw in enumerate(book.codewords):
            vals = []
            for i in range(2):
                for t in range(book.T):
                    vals.append(f"{cw[i, t].real:.12e}")
                    vals.append(f"{cw[i, t].imag:.12e}")
            f.write(f"{k}," + ",".join(vals) + "\n")


def codebook_for(code, constellation):
    """Dispatch helper: code in {'sm', 'ostbc', 'dayal'}."""
    code = code.lower()
    if code == "sm":
        return sm_codebook(constellation)
    if code in ("ostbc", "alamouti"):
        return alamouti_codebook(constellation)
    if code == "dayal":
        return dayal_codebook(constellation)
    raise ValueError(f"unknown code {code!r}")
