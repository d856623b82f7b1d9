"""Monte Carlo error-rate and outage estimation.

Trials are partitioned into fixed-size batches; batch b of SNR point p draws
its randomness from the stream derived from (seed, p, b) and nothing else.
Workers may execute batches in any order, but the counters are always folded
in batch order and the stopping rule is applied to that ordered prefix, so
estimates are bit-identical for any thread count.  Scenario comparisons
reuse the same streams (common random numbers), which turns orderings into
paired tests.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from .channel import IID, stream_rng
from .schemes import run_frames

DEFAULT_BATCH = 4096


@dataclass(frozen=True)
class CurvePoint:
    """One estimate on an SNR grid; stderr = sqrt(p(1-p)/trials)."""

    rho_db: float
    estimate: float
    trials: int
    stderr: float


@dataclass(frozen=True)
class ErrorRatePoint:
    """Bit- and symbol-error rates at one SNR point."""

    rho_db: float
    ber: float
    ser: float
    bit_errors: int
    symbol_errors: int
    frames: int
    bits: int
    symbols: int

    @property
    def ber_stderr(self):
        return _bernoulli_stderr(self.ber, self.bits)

    @property
    def ser_stderr(self):
        return _bernoulli_stderr(self.ser, self.symbols)

    def as_curve_point(self, metric="ber"):
        if metric == "ber":
            return CurvePoint(self.rho_db, self.ber, self.bits, self.ber_stderr)
        if metric == "ser":
            return CurvePoint(self.rho_db, self.ser, self.symbols, self.ser_stderr)
        raise ValueError(f"unknown metric {metric!r}")


def _bernoulli_stderr(p, n):
    if n <= 0:
        return float("inf")
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


@dataclass(frozen=True)
class Scenario:
    """Correlation configuration of one simulation run."""

    spec1: "CorrelationSpec" = IID
    spec2: "CorrelationSpec" = IID
    phase_mode: str = "fixed"
    label: str = "iid"


IID_SCENARIO = Scenario()

# PairingScenario is the same record; the pairing study just uses the
# phase-randomization modes.
PairingScenario = Scenario


def _map_batches(fn, n_batches_hint, stop_check, threads):
    """Run fn(b) for b = 0, 1, ... in waves, folding results in batch order.

    stop_check(ordered_results) -> int | None returns the number of batches
    to keep once the stopping condition is met within the ordered prefix.
    """
    results = []
    b = 0
    wave = max(1, threads)
    with ThreadPoolExecutor(max_workers=wave) as pool:
        while True:
            batch_ids = list(range(b, b + wave))
            for r in pool.map(fn, batch_ids):
                results.append(r)
            b += wave
            keep = stop_check(results)
            if keep is not None:
                return results[:keep]
            if b >= n_batches_hint:
                return results[:n_batches_hint]


def error_curve(scheme, book, scenario, rho_db_grid, target_errors=400,
                max_trials=1_000_000, seed=0, threads=1, batch_size=DEFAULT_BATCH,
                noise_scale=1.0):
    """Estimate BER/SER over an SNR grid by batched Monte Carlo.

    Each point runs until `target_errors` symbol errors have accumulated
    (bit errors always dominate the symbol count, so both counters have at
    least that many events) or `max_trials` frames, whichever is first.
    Deterministic given (seed, batch_size); independent of `threads`.
    """
    points = []
    for p_idx, rho_db in enumerate(rho_db_grid):
        rho = 10.0 ** (rho_db / 10.0)
        n_batches = max(1, math.ceil(max_trials / batch_size))

        def one_batch(b, _rho=rho, _p=p_idx):
            rng = stream_rng(seed, _p, b)
            res = run_frames(scheme, book, _rho, scenario.spec1, scenario.spec2,
                             rng, batch_size, noise_scale=noise_scale,
                             phase_mode=scenario.phase_mode)
            return (int(res["bit_errors"].sum()), int(res["symbol_errors"].sum()))

        def stop_check(ordered, _n=n_batches):
            syms = 0
            for i, (_, s) in enumerate(ordered):
                syms += s
                if syms >= target_errors:
                    return i + 1
                if i + 1 >= _n:
                    return _n
            return None

        kept = _map_batches(one_batch, n_batches, stop_check, threads)
        bit_errors = sum(r[0] for r in kept)
        symbol_errors = sum(r[1] for r in kept)
        frames = len(kept) * batch_size
        bits = frames * book.bits_per_codeword
        symbols = frames * book.Q
        points.append(ErrorRatePoint(
            rho_db=float(rho_db), ber=bit_errors / bits, ser=symbol_errors / symbols,
            bit_errors=bit_errors, symbol_errors=symbol_errors,
            frames=frames, bits=bits, symbols=symbols))
    return points


def pairwise_error_mc(scheme, book, idx_c, idx_e, rho, trials, seed,
                      scenario=IID_SCENARIO, batch_size=DEFAULT_BATCH):
    """Monte Carlo pairwise error probability P(C -> E) for two codewords.

    Transmits codeword idx_c every frame and counts how often the whitened
    ML metric of idx_e beats it.  Returns a CurvePoint (rho in dB).
    """
    from .schemes import MAT, ALTMAT, _mat_receive, _altmat_receive
    from .channel import draw_frames

    scheme = scheme.upper()
    if scheme not in (MAT, ALTMAT):
        raise ValueError("pairwise MC is defined for MAT and ALTMAT")
    cw_c = book.codewords[idx_c]
    cw_e = book.codewords[idx_e]
    errors = 0
    done = 0
    b = 0
    while done < trials:
        n = min(batch_size, trials - done)
        rng = stream_rng(seed, b)
        ch = draw_frames(scenario.spec1, scenario.spec2, rng, n,
                         phase_mode=scenario.phase_mode)
        tx2 = rng.integers(0, book.size, size=n)
        cw1 = np.broadcast_to(cw_c, (n,) + cw_c.shape)
        cw2 = book.codewords[tx2]
        noise = rng.standard_normal((n, 3, book.T)) + 1j * rng.standard_normal((n, 3, book.T))
        noise *= math.sqrt(0.5)
        recv = _mat_receive if scheme == MAT else _altmat_receive
        yt, h, s = recv(cw1, cw2, ch["h1"], ch["h2"], ch["h3"], ch["g1"], rho, noise)
        sq = math.sqrt(rho)
        w2 = 1.0 / s
        mc = _pair_metric(yt, h, cw_c, sq, w2)
        me = _pair_metric(yt, h, cw_e, sq, w2)
        errors += int(np.sum(me < mc))
        done += n
        b += 1
    p = errors / trials
    return CurvePoint(rho_db=10.0 * math.log10(rho), estimate=p, trials=trials,
                      stderr=_bernoulli_stderr(p, trials))


def _pair_metric(yt, h, cw, sq, w2):
    hc = sq * np.einsum("nij,jt->nit", h, cw)
    d = yt - hc
    return (np.abs(d[:, 0, :]) ** 2 + np.abs(d[:, 1, :]) ** 2 * w2[:, None]).sum(axis=1)


def outage_curve(scheme, r, rho_db_grid, trials, seed, rate_bits=None,
                 threads=1, batch_size=1 << 18):
    """Outage probability P(log2 det(I + (rho/2) H H^H) < 3R).

    R = r*log2(rho) per grid point, or the fixed `rate_bits` when given.
    The equivalent channel H is drawn i.i.d. per the scheme (MAT or ALTMAT).
    """
    scheme = scheme.upper()
    if scheme not in ("MAT", "ALTMAT"):
        raise ValueError("outage is defined for MAT and ALTMAT")
    if rate_bits is None and not 0.0 <= r <= 2.0 / 3.0:
        raise ValueError("multiplexing gain must lie in [0, 2/3]")
    points = []
    for p_idx, rho_db in enumerate(rho_db_grid):
        rho = 10.0 ** (rho_db / 10.0)
        rate = rate_bits if rate_bits is not None else r * math.log2(rho)
        thresh = 3.0 * rate
        n_batches = max(1, math.ceil(trials / batch_size))

        def one_batch(b, _rho=rho, _p=p_idx, _n=n_batches):
            rng = stream_rng(seed, _p, b)
            n = batch_size
            z = rng.standard_normal((n, 5)) + 1j * rng.standard_normal((n, 5))
            z *= math.sqrt(0.5)
            h11, h12, x31, g11, g12 = (z[:, i] for i in range(5))
            # MAT: H = [h1; h31 g1]; ALTMAT: H = [h31 g1; h21 h1].  Both have
            # ||H||^2 = |a|^2(|u|^2) + |b|^2... identical in distribution up to
            # the extra scalar on the first row for ALTMAT.
            if scheme == "MAT":
                fro = (np.abs(h11) ** 2 + np.abs(h12) ** 2
                       + np.abs(x31) ** 2 * (np.abs(g11) ** 2 + np.abs(g12) ** 2))
                det2 = np.abs(x31) ** 2 * np.abs(h11 * g12 - h12 * g11) ** 2
            else:
                x21 = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * math.sqrt(0.5)
                fro = (np.abs(x21) ** 2 * (np.abs(h11) ** 2 + np.abs(h12) ** 2)
                       + np.abs(x31) ** 2 * (np.abs(g11) ** 2 + np.abs(g12) ** 2))
                det2 = (np.abs(x31) ** 2 * np.abs(x21) ** 2
                        * np.abs(g11 * h12 - g12 * h11) ** 2)
            cap = np.log2(1.0 + (_rho / 2.0) * fro + (_rho / 2.0) ** 2 * det2)
            return int(np.sum(cap < thresh))

        def stop_check(ordered, _n=n_batches):
            return _n if len(ordered) >= _n else None

        kept = _map_batches(one_batch, n_batches, stop_check, threads)
        n_done = len(kept) * batch_size
        count = sum(kept)
        p = count / n_done
        points.append(CurvePoint(rho_db=float(rho_db), estimate=p, trials=n_done,
                                 stderr=_bernoulli_stderr(p, n_done)))
    return points


def product_exponential_cdf(eps):
    """P[XY <= eps] = 1 - 2 sqrt(eps) K1(2 sqrt(eps)) for X, Y ~ Exp(1)."""
    x = 2.0 * math.sqrt(eps)
    return 1.0 - x * special.k1(x)


def diversity_slope(curve, window):
    """Least-squares diversity slope -dlog P/dlog rho over a dB window.

    Needs at least three points inside the window with relative standard
    error below 10%.
    """
    lo, hi = window
    pts = [p for p in curve
           if lo <= p.rho_db <= hi and p.estimate > 0.0
           and p.stderr / p.estimate < 0.1]
    if len(pts) < 3:
        raise ValueError("under-resolved curve: need >= 3 well-estimated points in window")
    x = np.array([math.log(10.0 ** (p.rho_db / 10.0)) for p in pts])
    y = np.array([math.log(p.estimate) for p in pts])
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


def pairing_study(scenarios, scheme, book, rho_db_grid, seed, target_errors=400,
                  max_trials=1_000_000, threads=1, batch_size=DEFAULT_BATCH):
    """Error curves for several correlation scenarios plus the i.i.d. reference.

    All scenarios replay identical random streams (same seed, same batch
    keys), so per-point comparisons are paired.
    Returns {label: [ErrorRatePoint, ...]}.
    """
    table = {}
    all_scen = list(scenarios)
    if not any(s.label == "iid" for s in all_scen):
        all_scen.append(IID_SCENARIO)
    for sc in all_scen:
        table[sc.label] = error_curve(scheme, book, sc, rho_db_grid,
                                      target_errors=target_errors,
                                      max_trials=max_trials, seed=seed,
                                      threads=threads, batch_size=batch_size)
    return table


def write_error_csv(rows, path):
    """CSV: scheme, code, scenario, rho_db, ber, ser, trials, stderr."""
    with open(path, "w") as f:
        f.write("scheme,code,scenario,rho_db,ber,ser,trials,stderr\n")
        for scheme, code, scenario, pt in rows:
            f.write(f"{scheme},{code},{scenario},{pt.rho_db:.6f},"
                    f"{pt.ber:.12e},{pt.ser:.12e},{pt.frames},{pt.ber_stderr:.12e}\n")


def write_outage_csv(points, path):
    with open(path, "w") as f:
        f.write("rho_db,outage,trials,stderr\n")
        for pt in points:
            f.write(f"{pt.rho_db:.6f},{pt.estimate:.12e},{pt.trials},{pt.stderr:.12e}\n")


def write_gnuplot_script(csv_path, out_path, title, ylabel, columns, logy=True):
    """Minimal gnuplot companion for an emitted CSV."""
    lines = [
        "set datafile separator ','",
        f"set title '{title}'",
        "set xlabel 'rho [dB]'",
        f"set ylabel '{ylabel}'",
        "set grid",
    ]
    if logy:
        lines.append("set logscale y")
    plots = ", ".join(
        f"'{csv_path}' using {xcol}:{ycol} with linespoints title '{label}'"
        for label, xcol, ycol in columns)
    lines.append("plot " + plots)
    with open(out_path, "w") as f:
        f.write("\n".join(lines) + "\n")
