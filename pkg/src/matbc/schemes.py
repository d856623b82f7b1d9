"""MAT, Alternative MAT and TDMA transmit/receive chains.

Each frame spans three coherence times of T slots (one coherence time for
TDMA).  The receive side is implemented literally: the full per-slot scalars
are synthesized for every coherence time, the overheard-interference
elimination is formed explicitly, and the resulting two-branch observation
is ML-decoded with the diagonal noise whitening diag(1, s).

Only user 1's errors are counted; both users' codewords are drawn uniformly
and independently every frame.  TDMA serves one user per coherence time with
the Alamouti code and is allocated power (4/3) rho so the long-term average
transmit power matches MAT.
"""

import math
from dataclasses import dataclass

import numpy as np

from .channel import draw_frames

MAT = "MAT"
ALTMAT = "ALTMAT"
TDMA = "TDMA"
SCHEMES = (MAT, ALTMAT, TDMA)


@dataclass(frozen=True)
class EquivalentChannel:
    """2x2 equivalent channel with noise covariance diag(1, s)."""

    H: np.ndarray
    s: float


@dataclass(frozen=True)
class FrameResult:
    decoded_index: int
    bit_errors: int
    symbol_errors: int


def mat_equivalent(frame):
    """H = [h_1 ; h_{3,1} g_1], s = 1 + |h_{3,1}|^2."""
    h31 = frame.h3[0]
    h = np.stack([frame.h1, h31 * frame.g1])
    return EquivalentChannel(H=h, s=1.0 + abs(h31) ** 2)


def altmat_equivalent(frame):
    """H = [h_{3,1} g_1 ; h_{2,1} h_1], s = 1 + |h_{2,1}|^2."""
    h31 = frame.h3[0]
    h21 = frame.h2[0]
    h = np.stack([h31 * frame.g1, h21 * frame.h1])
    return EquivalentChannel(H=h, s=1.0 + abs(h21) ** 2)


def ml_decode(received, eq, book, rho):
    """Exhaustive ML decoding of one frame.

    received: sequence of T two-component observations (the whitened metric
    sum_t ||Sigma^{-1/2}(y_t - sqrt(rho) H c_t)||^2 is minimized; ties break
    to the lowest codeword index).
    """
    y = np.asarray(received, dtype=complex).reshape(-1, 2).T  # (2, T)
    if y.shape[1] != book.T:
        raise ValueError(f"received length {y.shape[1]} != codeword length {book.T}")
    hc = math.sqrt(rho) * np.einsum("ij,kjt->kit", eq.H, book.codewords)
    diff = y[None, :, :] - hc
    w = np.array([1.0, 1.0 / eq.s])
    metrics = np.sum((np.abs(diff) ** 2) * w[None, :, None], axis=(1, 2))
    return int(np.argmin(metrics))


def _draw_noise(rng, shape, scale):
    n = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return (scale * math.sqrt(0.5)) * n


def _mat_receive(cw1, cw2, h1, h2, h3, g1, rho, noise):
    """Per-slot reception of one MAT frame batch and interference elimination.

    cw1/cw2: (n, 2, T); channel rows: (n, 2); noise: (n, 3, T).
    Returns ytilde (n, 2, T), H (n, 2, 2), s (n,).
    """
    sq = math.sqrt(rho)
    h31 = h3[:, 0]
    y1 = sq * np.einsum("ni,nit->nt", h1, cw1) + noise[:, 0]
    y2 = sq * np.einsum("ni,nit->nt", h2, cw2) + noise[:, 1]
    y3 = (sq * h31[:, None]
          * (np.einsum("ni,nit->nt", g1, cw1) + np.einsum("ni,nit->nt", h2, cw2))
          + noise[:, 2])
    yt = np.stack([y1, y3 - h31[:, None] * y2], axis=1)
    h = np.stack([h1, h31[:, None] * g1], axis=1)
    s = 1.0 + np.abs(h31) ** 2
    return yt, h, s


def _altmat_receive(cw1, cw2, h1, h2, h3, g1, rho, noise):
    """Alternative MAT: superposition first, then each user's interference."""
    sq = math.sqrt(rho)
    h21 = h2[:, 0]
    h31 = h3[:, 0]
    y1 = sq * np.einsum("ni,nit->nt", h1, cw1 + cw2) + noise[:, 0]
    y2 = sq * h21[:, None] * np.einsum("ni,nit->nt", h1, cw2) + noise[:, 1]
    y3 = sq * h31[:, None] * np.einsum("ni,nit->nt", g1, cw1) + noise[:, 2]
    yt = np.stack([y3, h21[:, None] * y1 - y2], axis=1)
    h = np.stack([h31[:, None] * g1, h21[:, None] * h1], axis=1)
    s = 1.0 + np.abs(h21) ** 2
    return yt, h, s


def _codebook_gram(book):
    """Per-codeword Gram tensors for the expanded ML metric.

    G0[k, j, j'] = sum_t c_{k,j,t} conj(c_{k,j',t}) flattened to (K, 4) and
    the (K, 2T) flattened codewords; cached on the codebook object.
    """
    cached = getattr(book, "_gram_cache", None)
    if cached is not None:
        return cached
    cws = book.codewords
    g0 = np.einsum("kjt,kmt->kjm", cws, cws.conj()).reshape(len(cws), 4)
    flat = cws.reshape(len(cws), 2 * book.T)
    cached = (g0, flat)
    object.__setattr__(book, "_gram_cache", cached)
    return cached


def _batch_decode(yt, h, s, book, rho, chunk=None):
    """Vectorized exhaustive ML over a batch: yt (n,2,T), h (n,2,2), s (n,).

    Uses the expansion ||y - sqrt(rho) H c||_W^2 = const - 2 sqrt(rho)
    Re<y, H c>_W + rho <H c, H c>_W so only two (n x 4 x K) products are
    formed instead of the full (n, K, 2, T) difference tensor.  Identical
    argmin as the literal metric (up to exact ties, broken low-index both
    ways).
    """
    n = len(yt)
    sq = math.sqrt(rho)
    g0, flat = _codebook_gram(book)
    w = np.stack([np.ones_like(s), 1.0 / s], axis=1)  # (n, 2)
    hw = np.sqrt(w)[:, :, None] * h
    b = np.einsum("nij,nim->njm", hw, hw.conj()).reshape(n, 4)
    z = w[:, :, None] * yt.conj()
    u = np.einsum("nit,nij->njt", z, h).reshape(n, 2 * book.T)

    out = np.empty(n, dtype=np.int64)
    best = np.full(n, np.inf)
    kchunk = book.size if chunk is None else max(1, chunk)
    for k0 in range(0, book.size, kchunk):
        quad = (b @ g0[k0:k0 + kchunk].T).real
        cross = (u @ flat[k0:k0 + kchunk].T).real
        m = rho * quad - 2.0 * sq * cross
        idx = np.argmin(m, axis=1)
        vals = m[np.arange(n), idx]
        take = vals < best
        out[take] = idx[take] + k0
        best[take] = vals[take]
    return out


_METRIC_CHUNK_BUDGET = 4 << 20  # real entries in one (n, k-chunk) metric block


def _codeword_chunk(n, book):
    return max(1, _METRIC_CHUNK_BUDGET // max(n, 1))


def run_frames(scheme, book, rho, spec1, spec2, rng, n,
               noise_scale=1.0, phase_mode="fixed"):
    """Simulate n independent frames; returns decoded vs transmitted indices.

    Returns a dict with tx (n,), rx (n,), bit_errors (n,), symbol_errors (n,).
    """
    scheme = scheme.upper()
    ch = draw_frames(spec1, spec2, rng, n, phase_mode=phase_mode)
    tx1 = rng.integers(0, book.size, size=n)
    tx2 = rng.integers(0, book.size, size=n)
    cw1 = book.codewords[tx1]
    cw2 = book.codewords[tx2]

    if scheme == TDMA:
        rho_t = 4.0 / 3.0 * rho
        noise = _draw_noise(rng, (n, book.T), noise_scale)
        y = math.sqrt(rho_t) * np.einsum("ni,nit->nt", ch["h1"], cw1) + noise
        rx = _tdma_decode(y, ch["h1"], book, rho_t, n)
    else:
        noise = _draw_noise(rng, (n, 3, book.T), noise_scale)
        if scheme == MAT:
            yt, h, s = _mat_receive(cw1, cw2, ch["h1"], ch["h2"], ch["h3"],
                                    ch["g1"], rho, noise)
        elif scheme == ALTMAT:
            yt, h, s = _altmat_receive(cw1, cw2, ch["h1"], ch["h2"], ch["h3"],
                                       ch["g1"], rho, noise)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        rx = _batch_decode(yt, h, s, book, rho, chunk=_codeword_chunk(n, book))

    bit_errors = _popcount64(book.labels[tx1] ^ book.labels[rx])
    symbol_errors = np.sum(book.symbol_index[tx1] != book.symbol_index[rx], axis=1)
    return {"tx": tx1, "rx": rx, "bit_errors": bit_errors,
            "symbol_errors": symbol_errors}


def _tdma_decode(y, h, book, rho_t, n):
    # 1x2 MISO ML == the 2x2 path with a zero second row and unit whitening
    yt = np.stack([y, np.zeros_like(y)], axis=1)
    h2 = np.stack([h, np.zeros_like(h)], axis=1)
    s = np.ones(n)
    return _batch_decode(yt, h2, s, book, rho_t, chunk=_codeword_chunk(n, book))


def _popcount64(arr):
    arr = arr.astype(np.uint64)
    cnt = np.zeros(arr.shape, dtype=np.int64)
    while np.any(arr):
        cnt += (arr & 1).astype(np.int64)
        arr >>= 1
    return cnt


def simulate_frame(scheme, book, rho, frame, rng, noise_scale=1.0):
    """Simulate a single frame on a pre-drawn channel realization.

    Draws both users' codewords and the noise from rng, synthesizes the full
    reception, eliminates interference and ML-decodes.  Returns FrameResult
    for user 1.
    """
    scheme = scheme.upper()
    tx1 = int(rng.integers(0, book.size))
    tx2 = int(rng.integers(0, book.size))
    cw1 = book.codewords[tx1][None]
    cw2 = book.codewords[tx2][None]
    rows = {k: getattr(frame, k)[None] for k in ("h1", "h2", "h3", "g1")}

    if scheme == TDMA:
        rho_t = 4.0 / 3.0 * rho
        noise = _draw_noise(rng, (1, book.T), noise_scale)
        y = math.sqrt(rho_t) * np.einsum("ni,nit->nt", rows["h1"], cw1) + noise
        rx = int(_tdma_decode(y, rows["h1"], book, rho_t, 1)[0])
    elif scheme in (MAT, ALTMAT):
        noise = _draw_noise(rng, (1, 3, book.T), noise_scale)
        recv = _mat_receive if scheme == MAT else _altmat_receive
        yt, h, s = recv(cw1, cw2, rows["h1"], rows["h2"], rows["h3"],
                        rows["g1"], rho, noise)
        eq = EquivalentChannel(H=h[0], s=float(s[0]))
        rx = ml_decode(yt[0].T, eq, book, rho)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")

    bits = int(_popcount64(np.array([book.labels[tx1] ^ book.labels[rx]]))[0])
    syms = int(np.sum(book.symbol_index[tx1] != book.symbol_index[rx]))
    return FrameResult(decoded_index=rx, bit_errors=bits, symbol_errors=syms)


def transmit_power_by_slot(scheme, book, rho, spec1, spec2, rng, n):
    """Monte Carlo mean ||x||^2 per coherence time (power bookkeeping check)."""
    scheme = scheme.upper()
    ch = draw_frames(spec1, spec2, rng, n)
    cw1 = book.codewords[rng.integers(0, book.size, size=n)]
    cw2 = book.codewords[rng.integers(0, book.size, size=n)]
    if scheme == MAT:
        p1 = rho * np.abs(cw1) ** 2
        p2 = rho * np.abs(cw2) ** 2
        x3 = np.einsum("ni,nit->nt", ch["g1"], cw1) + np.einsum("ni,nit->nt", ch["h2"], cw2)
        p3 = rho * np.abs(x3) ** 2
        return (float(np.mean(p1.sum(axis=1))), float(np.mean(p2.sum(axis=1))),
                float(np.mean(p3)))
    if scheme == ALTMAT:
        p1 = rho * np.abs(cw1 + cw2) ** 2
        x2 = np.einsum("ni,nit->nt", ch["h1"], cw2)
        x3 = np.einsum("ni,nit->nt", ch["g1"], cw1)
        return (float(np.mean(p1.sum(axis=1))), float(rho * np.mean(np.abs(x2) ** 2)),
                float(rho * np.mean(np.abs(x3) ** 2)))
    raise ValueError("power bookkeeping applies to MAT and ALTMAT")
