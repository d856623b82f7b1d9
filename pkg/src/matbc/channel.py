"""Block-fading Rayleigh channel generation for the three-coherence-time frame.

Channels are 1x2 rows (two transmit antennas, one receive antenna per user),
i.i.d. circularly symmetric complex Gaussian with unit per-entry energy,
independent across coherence times and across users.  Transmit correlation
is imposed per user through the Hermitian square root of the 2x2 covariance
matrix with unit diagonal and off-diagonal coefficient t = |t| e^{j phi}.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import sqrtm_herm2


@dataclass(frozen=True)
class CorrelationSpec:
    """Transmit correlation coefficient of one user.

    magnitude must be < 1 (the correlated bounds need full-rank covariance);
    phase is wrapped to [0, 2pi).  The complex coefficient is cached at
    construction so that algebraically exact relations between specs (e.g.
    an orthogonal pair with t2 = -t1) survive in floating point.
    """

    magnitude: float
    phase: float = 0.0
    t: complex = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.magnitude < 1.0:
            raise ValueError("correlation magnitude must lie in [0, 1)")
        object.__setattr__(self, "phase", self.phase % (2.0 * math.pi))
        if self.t is None:
            t = self.magnitude * complex(math.cos(self.phase), math.sin(self.phase))
            object.__setattr__(self, "t", t)

    @classmethod
    def from_complex(cls, t):
        t = complex(t)
        spec = cls(abs(t), math.atan2(t.imag, t.real))
        object.__setattr__(spec, "t", t)
        return spec

    def orthogonal_partner(self):
        """Spec of a statistically orthogonal user: same |t|, phase + pi.

        Built by exact negation of the complex coefficient, so that
        corr_matrix(self) + corr_matrix(partner) == 2*I holds exactly.
        """
        return CorrelationSpec.from_complex(-self.t)


IID = CorrelationSpec(0.0, 0.0)


@dataclass
class BlockFadingFrame:
    """All channel rows one MAT / Alternative MAT / TDMA frame needs."""

    h1: np.ndarray
    h2: np.ndarray
    h3: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    g3: np.ndarray


def corr_matrix(spec):
    """2x2 transmit covariance [[1, t*], [t, 1]] for one user."""
    t = spec.t
    return np.array([[1.0 + 0.0j, np.conj(t)], [t, 1.0 + 0.0j]])


def corr_sqrt(spec):
    """Hermitian square root of corr_matrix(spec)."""
    return sqrtm_herm2(corr_matrix(spec))


def master_rng(seed):
    return np.random.default_rng(np.random.SeedSequence(seed))


def stream_rng(seed, *key):
    """Independent stream derived from (seed, key...).

    Streams with distinct keys are statistically independent and do not
    depend on how work is divided between workers, which is what makes
    results reproducible under any thread count.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


def _white_rows(rng, n):
    """n i.i.d. CN(0, I2) rows, shape (n, 2)."""
    z = rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2))
    return z * math.sqrt(0.5)


def draw_frames(spec1, spec2, rng, n, phase_mode="fixed"):
    """Draw n independent block-fading frames (vectorized).

    phase_mode controls the per-frame randomization of the correlation
    phases used in the user-pairing study:

    - "fixed":       phases are exactly those of the specs;
    - "joint":       a common uniform phase psi is added to both users'
                     coefficients each frame (preserves the phase offset);
    - "independent": each user gets its own uniform random phase each frame.

    Returns a dict of arrays h1, h2, h3, g1, g2, g3, each of shape (n, 2).
    """
    if phase_mode not in ("fixed", "joint", "independent"):
        raise ValueError(f"unknown phase_mode {phase_mode!r}")

    if phase_mode == "fixed":
        sq1 = corr_sqrt(spec1)
        sq2 = corr_sqrt(spec2)
        out = {}
        for name, sq in (("h1", sq1), ("h2", sq1), ("h3", sq1),
                         ("g1", sq2), ("g2", sq2), ("g3", sq2)):
            out[name] = _white_rows(rng, n) @ sq
        return out

    psi1 = rng.uniform(0.0, 2.0 * math.pi, size=n)
    if phase_mode == "joint":
        psi2 = psi1
    else:
        psi2 = rng.uniform(0.0, 2.0 * math.pi, size=n)

    out = {}
    for name, spec, psi in (("h1", spec1, psi1), ("h2", spec1, psi1), ("h3", spec1, psi1),
                            ("g1", spec2, psi2), ("g2", spec2, psi2), ("g3", spec2, psi2)):
        t = spec.t * np.exp(1j * psi)
        out[name] = _apply_corr_rows(_white_rows(rng, n), spec.magnitude, t)
    return out


def _apply_corr_rows(w, mag, t):
    """Rows w (n,2) times R^{1/2} with per-row coefficient t (|t| = mag)."""
    sp = math.sqrt(1.0 + mag)
    sm = math.sqrt(1.0 - mag)
    cp = 0.5 * (sp + sm)
    cm = 0.5 * (sp - sm)
    if mag == 0.0:
        return w
    phase = t / mag
    a = w[:, 0]
    b = w[:, 1]
    out = np.empty_like(w)
    # R^{1/2} = [[cp, cm*conj(phase)], [cm*phase, cp]] (Hermitian)
    out[:, 0] = a * cp + b * cm * phase
    out[:, 1] = a * cm * np.conj(phase) + b * cp
    return out


def draw_frame(spec1, spec2, rng):
    """Draw a single BlockFadingFrame (row layout as in draw_frames)."""
    d = draw_frames(spec1, spec2, rng, 1)
    return BlockFadingFrame(**{k: v[0] for k, v in d.items()})
