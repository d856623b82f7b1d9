"""Asymptotic diversity-multiplexing tradeoff curves.

Breakpoints are exact rationals: the optimal MAT tradeoff joins (0,3),
(1/3,1), (2/3,0); SM achieves 2-3r on [0,2/3] for both schemes; O-STBC
achieves 3(1-3r) under MAT and 2(1-3r) under Alternative MAT on [0,1/3];
TDMA achieves 2(1-2r) on [0,1/2] regardless of O-STBC/optimal coding.
"""

from dataclasses import dataclass
from fractions import Fraction

F = Fraction

OPTIMAL = "OPTIMAL"
SM = "SM"
OSTBC = "OSTBC"


@dataclass(frozen=True)
class DmtCurve:
    """Piecewise-linear diversity-multiplexing curve with rational breakpoints."""

    label: str
    breakpoints: tuple  # of (Fraction r, Fraction d)

    def max_r(self):
        return self.breakpoints[-1][0]


_CURVES = {
    ("MAT", OPTIMAL): ((F(0), F(3)), (F(1, 3), F(1)), (F(2, 3), F(0))),
    ("MAT", SM): ((F(0), F(2)), (F(2, 3), F(0))),
    ("MAT", OSTBC): ((F(0), F(3)), (F(1, 3), F(0))),
    ("ALTMAT", OPTIMAL): ((F(0), F(2)), (F(1, 3), F(1)), (F(2, 3), F(0))),
    ("ALTMAT", SM): ((F(0), F(2)), (F(2, 3), F(0))),
    ("ALTMAT", OSTBC): ((F(0), F(2)), (F(1, 3), F(0))),
    ("TDMA", OPTIMAL): ((F(0), F(2)), (F(1, 2), F(0))),
    ("TDMA", OSTBC): ((F(0), F(2)), (F(1, 2), F(0))),
}


def dmt_curve(scheme, code=OPTIMAL):
    """Theoretical DMT for a scheme/code combination (exact breakpoints)."""
    key = (scheme.upper(), code.upper())
    if key not in _CURVES:
        raise ValueError(f"no DMT curve for {key[0]}/{key[1]}")
    return DmtCurve(label=f"{key[0]}-{key[1]}", breakpoints=_CURVES[key])


def dmt_eval(curve, r):
    """Linear interpolation of the curve at multiplexing gain r."""
    r = Fraction(r).limit_denominator(10 ** 12) if not isinstance(r, Fraction) else r
    bps = curve.breakpoints
    if r < 0 or r > bps[-1][0]:
        raise ValueError(f"multiplexing gain {r} outside [0, {bps[-1][0]}]")
    for (r0, d0), (r1, d1) in zip(bps, bps[1:]):
        if r0 <= r <= r1:
            if r1 == r0:
                return float(d1)
            frac = (r - r0) / (r1 - r0)
            return float(d0 + (d1 - d0) * frac)
    return float(bps[-1][1])


def _eval_extended(curve, r):
    """Evaluation extended by zero beyond the curve's last breakpoint."""
    if r > curve.max_r():
        return 0.0
    return dmt_eval(curve, r)


def dominance(curve_a, curve_b):
    """Compare two DMT curves on the union of their breakpoints.

    Returns "A>=B", "B>=A", "equal", or "crossing at r*" with the first
    abscissa where the sign of (A - B) flips.  Beyond its maximal
    multiplexing gain a curve is extended by zero.
    """
    rs = sorted({r for r, _ in curve_a.breakpoints} | {r for r, _ in curve_b.breakpoints})
    diffs = [(r, _eval_extended(curve_a, r) - _eval_extended(curve_b, r)) for r in rs]
    has_pos = any(d > 1e-12 for _, d in diffs)
    has_neg = any(d < -1e-12 for _, d in diffs)
    if has_pos and has_neg:
        prev = diffs[0]
        for r, d in diffs[1:]:
            if d * prev[1] < 0:
                # linear interpolation of the crossing between breakpoints
                r0, d0 = prev
                rstar = float(r0) + (float(r) - float(r0)) * d0 / (d0 - d)
                return f"crossing at {rstar:.6f}"
            if d != 0:
                prev = (r, d)
        return "crossing"
    if has_pos:
        return "A>=B"
    if has_neg:
        return "B>=A"
    return "equal"


def all_curves():
    """Every distinct scheme/code curve, for the tradeoff figure."""
    seen = []
    for (scheme, code) in _CURVES:
        if scheme == "TDMA" and code == OSTBC:
            continue  # identical to TDMA-OPTIMAL
        seen.append(dmt_curve(scheme, code))
    return seen


def write_dmt_csv(curves, path):
    """Breakpoint CSV with exact rational coordinates."""
    with open(path, "w") as f:
        f.write("curve,r,d\n")
        for c in curves:
            for r, d in c.breakpoints:
                f.write(f"{c.label},{r},{d}\n")
