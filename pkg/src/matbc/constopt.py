"""Nonlinear constellation optimization for transmit-correlated channels.

The first codeword entry is drawn from a set S of M0 points and the second
from a set Q_m of M1 points that depends on the first symbol.  The design
objective is the weighted sum over all ordered codeword pairs of

    s(.) * prod_i (1 + (rho/4) Tr{R_{t,i} Etilde})^{-1},

with Tr{R_{t,i} Etilde} = |dS|^2 + |dQ|^2 + 2 Re{t_i dS dQ*} and the weight
s counting the number of differing codeword positions (0, 1 or 2).  The
optimizer is plain gradient descent on the stacked complex point vector with
a global renormalization to unit joint average power after every step, run
from multiple starts (the scaled QPSK product plus seeded random clouds)
and over a few fixed step sizes; the best objective value wins.
"""

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import CorrelationSpec, stream_rng

_NONZERO_TOL = 1e-12


@dataclass
class NonlinearConstellation:
    """Joint signal sets: S of shape (M0,), Q of shape (M0, M1).

    Normalized so the mean codeword energy E{|S_m|^2 + |Q_mn|^2} over a
    uniform (m, n) equals one.
    """

    S: np.ndarray
    Q: np.ndarray

    @property
    def m0(self):
        return len(self.S)

    @property
    def m1(self):
        return self.Q.shape[1]

    def power(self):
        return float((np.mean(np.abs(self.S) ** 2) + np.mean(np.abs(self.Q) ** 2)))

    def normalized(self):
        scale = 1.0 / math.sqrt(self.power())
        return NonlinearConstellation(S=self.S * scale, Q=self.Q * scale)

    def stacked(self):
        return np.concatenate([self.S, self.Q.ravel()])

    @classmethod
    def from_stacked(cls, vec, m0, m1):
        return cls(S=vec[:m0].copy(), Q=vec[m0:].reshape(m0, m1).copy())


@dataclass(frozen=True)
class OptimizerConfig:
    spec1: CorrelationSpec
    spec2: CorrelationSpec
    rho_over_4_db: float = 20.0
    step: float = 0.0  # 0 = try the preset sweep
    max_iters: int = 1000
    restarts: int = 32
    seed: int = 0
    m0: int = 4
    m1: int = 4

    def rho_over_4(self):
        return 10.0 ** (self.rho_over_4_db / 10.0)


_STEP_PRESETS = (3.0, 1.0, 0.3)


def weight_s(d0, d1):
    """Number of differing codeword positions: 2, 1 or 0."""
    return int(abs(d0) > _NONZERO_TOL) + int(abs(d1) > _NONZERO_TOL)


def qpsk_product(m0=4, m1=4):
    """Scaled QPSK x QPSK start: both entries from QPSK/sqrt(2)."""
    if m0 != 4 or m1 != 4:
        raise ValueError("the QPSK product start needs M0 = M1 = 4")
    pts = np.exp(1j * (math.pi / 4.0 + math.pi / 2.0 * np.arange(4))) / math.sqrt(2.0)
    return NonlinearConstellation(S=pts.copy(), Q=np.tile(pts, (4, 1)).copy())


def _pair_terms(f, cfg):
    """Weights and trace factors over all ordered (m, n) x (u, v) pairs."""
    c = cfg.rho_over_4()
    ds = f.S[:, None] - f.S[None, :]                      # (M0, M0)
    dq = f.Q[:, :, None, None] - f.Q[None, None, :, :]    # (M0, M1, M0, M1)
    dsb = ds[:, None, :, None]                            # broadcast (M0,1,M0,1)
    w = (np.abs(dsb) > _NONZERO_TOL).astype(float) + (np.abs(dq) > _NONZERO_TOL)
    base = np.abs(dsb) ** 2 + np.abs(dq) ** 2
    cross = dsb * np.conj(dq)
    d1 = 1.0 + c * (base + 2.0 * np.real(cfg.spec1.t * cross))
    d2 = 1.0 + c * (base + 2.0 * np.real(cfg.spec2.t * cross))
    return w, d1, d2, dsb, dq, c


def objective_pbar(f, cfg):
    """Average pair-error objective of a normalized constellation."""
    w, d1, d2, _, _, _ = _pair_terms(f, cfg)
    return float(np.sum(w / (d1 * d2)) / (f.m0 * f.m1))


def gradients(f, cfg):
    """Stacked complex gradient [g_S; g_Q.ravel()] of the objective.

    Follows the analytical expressions: for S_k the sum runs over u != k and
    all (n, v); for Q_xk over all (u, v).  Real and imaginary parts equal
    the partial derivatives with respect to the point coordinates.
    """
    w, d1, d2, dsb, dq, c = _pair_terms(f, cfg)
    m0, m1 = f.m0, f.m1
    inv1 = 1.0 / d1
    inv2 = 1.0 / d2

    t1c = np.conj(cfg.spec1.t)
    t2c = np.conj(cfg.spec2.t)
    num1 = 2.0 * dsb + 2.0 * t1c * dq
    num2 = 2.0 * dsb + 2.0 * t2c * dq
    terms = c * w * (num1 * inv1 ** 2 * inv2 + num2 * inv1 * inv2 ** 2)
    # mask u = k (no S_k dependence there)
    mask = 1.0 - np.eye(m0)[:, None, :, None]
    g_s = -2.0 / (m0 * m1) * np.sum(terms * mask, axis=(1, 2, 3))

    numq1 = 2.0 * dq + 2.0 * cfg.spec1.t * dsb
    numq2 = 2.0 * dq + 2.0 * cfg.spec2.t * dsb
    termsq = c * w * (numq1 * inv1 ** 2 * inv2 + numq2 * inv1 * inv2 ** 2)
    g_q = -2.0 / (m0 * m1) * np.sum(termsq, axis=(2, 3))
    return np.concatenate([g_s, g_q.ravel()])


@dataclass
class OptimizeResult:
    constellation: NonlinearConstellation
    pbar: float
    trace: list = field(default_factory=list)
    restart: int = -1
    step: float = 0.0


def _descend(start, cfg, step):
    """One gradient-descent run; renormalizes to unit power every iteration.

    Aborts when the objective grows for 50 consecutive iterations.  Returns
    (best constellation seen, best objective, per-iteration trace).
    """
    f = start.normalized()
    best_f, best_p = f, objective_pbar(f, cfg)
    trace = [best_p]
    growth = 0
    prev = best_p
    for _ in range(cfg.max_iters):
        g = gradients(f, cfg)
        vec = f.stacked() - step * g
        f = NonlinearConstellation.from_stacked(vec, cfg.m0, cfg.m1).normalized()
        p = objective_pbar(f, cfg)
        trace.append(p)
        if p < best_p:
            best_f, best_p = f, p
        growth = growth + 1 if p > prev else 0
        prev = p
        if growth >= 50:
            break
    return best_f, best_p, trace


def _random_start(rng, m0, m1):
    s = rng.standard_normal(m0) + 1j * rng.standard_normal(m0)
    q = rng.standard_normal((m0, m1)) + 1j * rng.standard_normal((m0, m1))
    return NonlinearConstellation(S=s, Q=q).normalized()


def optimize(cfg, init="qpsk-product"):
    """Best-of-restarts constrained gradient search.

    init selects the deterministic start included among the restarts:
    "qpsk-product" (default) seeds restart 0 with the scaled QPSK product;
    "random" uses seeded random clouds only.  Each restart tries the preset
    step sizes (or cfg.step when nonzero) and keeps its best objective.
    """
    if init not in ("qpsk-product", "random"):
        raise ValueError(f"unknown init {init!r}")
    steps = (cfg.step,) if cfg.step > 0 else _STEP_PRESETS
    best = None
    for restart in range(cfg.restarts):
        if restart == 0 and init == "qpsk-product":
            start = qpsk_product(cfg.m0, cfg.m1)
        else:
            start = _random_start(stream_rng(cfg.seed, restart), cfg.m0, cfg.m1)
        for step in steps:
            f, p, trace = _descend(start, cfg, step)
            if best is None or p < best.pbar:
                best = OptimizeResult(constellation=f, pbar=p, trace=trace,
                                      restart=restart, step=step)
    return best


def save_constellation(f, path):
    """Plain-text format: one line per point, 'set index re im'."""
    with open(path, "w") as fh:
        for i, p in enumerate(f.S):
            fh.write(f"S {i} {p.real:.15e} {p.imag:.15e}\n")
        for m in range(f.m0):
            for n, p in enumerate(f.Q[m]):
                fh.write(f"Q{m} {n} {p.real:.15e} {p.imag:.15e}\n")


def load_constellation(path):
    s_pts = {}
    q_pts = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            setid, idx, re, im = line.split()
            val = complex(float(re), float(im))
            if setid == "S":
                s_pts[int(idx)] = val
            elif setid.startswith("Q"):
                q_pts[(int(setid[1:]), int(idx))] = val
            else:
                raise ValueError(f"bad set id {setid!r}")
    m0 = len(s_pts)
    m1 = max(n for _, n in q_pts) + 1
    s = np.array([s_pts[i] for i in range(m0)])
    q = np.array([[q_pts[(m, n)] for n in range(m1)] for m in range(m0)])
    return NonlinearConstellation(S=s, Q=q)


def as_codebook(f):
    """SM-style codebook of the M0*M1 codewords [S_m; Q_mn] (T = 1).

    Symbol labels are positional (Gray labels are not defined for optimized
    sets); bit counting uses index bits of each position.
    """
    from .codes import CodeBook, Constellation

    m0, m1 = f.m0, f.m1
    cws = np.empty((m0 * m1, 2, 1), dtype=complex)
    idx = np.empty((m0 * m1, 2), dtype=np.int64)
    for m in range(m0):
        for n in range(m1):
            k = m * m1 + n
            cws[k, 0, 0] = f.S[m]
            cws[k, 1, 0] = f.Q[m, n]
            idx[k] = (m, n)
    bits0 = (m0 - 1).bit_length()
    bits1 = (m1 - 1).bit_length()
    labels = (idx[:, 0] << bits1) | idx[:, 1]
    const = Constellation(kind="joint", points=f.S.copy(),
                          bits_per_symbol=max(bits0, bits1),
                          labels=np.arange(m0))
    return CodeBook(kind="nonlinear", constellation=const, codewords=cws,
                    T=1, Q=2, symbol_index=idx, labels=labels, basis=None)


def displacement_from_qpsk_product(f):
    """Max distance of any point to the nearest scaled-QPSK point, after
    optimal global phase alignment (the objective is invariant under a
    common rotation of all points)."""
    ref = qpsk_product().stacked()
    pts = f.stacked()

    def max_disp(theta):
        rot = pts * cmath.exp(1j * theta)
        d = np.abs(rot[:, None] - ref[None, :])
        return float(d.min(axis=1).max())

    # QPSK has pi/2 symmetry; a coarse-to-fine scan over [0, pi/2) suffices.
    grid = np.linspace(0.0, math.pi / 2.0, 181)
    best = min(grid, key=max_disp)
    fine = np.linspace(best - 0.02, best + 0.02, 81)
    return min(max_disp(t) for t in fine)
