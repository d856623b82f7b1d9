"""Experiment driver.

Subcommands: pep, simulate, outage, dmt, pairing, optimize-constellation,
validate, run.  `run` executes a plain-text config file (key = value lines)
or a named preset; flags override file values.  Every experiment writes its
artifacts atomically (temp file + rename, nothing partial on failure) plus a
manifest with the fully resolved configuration, the seed and a content hash,
which together reproduce the CSV byte for byte.
"""

import argparse
import fractions
import hashlib
import json
import math
import os
import sys
import tempfile

from . import codes, constopt, dmt, montecarlo, pep
from .channel import CorrelationSpec
from .montecarlo import Scenario

_CONSTELLATIONS = {
    "bpsk": ("psk", 2),
    "qpsk": ("psk", 4),
    "4qam": ("qam", 4),
    "8psk": ("psk", 8),
    "16qam": ("qam", 16),
    "64qam": ("qam", 64),
    "256qam": ("qam", 256),
}

DEFAULTS = {
    "experiment": "simulate",
    "scheme": "MAT",
    "code": "sm",
    "constellation": "qpsk",
    "rate": "",
    "rho_db": "0:5:30",
    "t1": "0@0",
    "t2": "0@0",
    "phase_mode": "fixed",
    "phi_list": "0,1.5707963267948966,3.141592653589793",
    "seed": "0",
    "threads": "1",
    "target_errors": "400",
    "max_trials": "1000000",
    "trials": "1000000",
    "r": "0",
    "rate_bits": "",
    "rho_over_4_db": "20",
    "restarts": "32",
    "max_iters": "1000",
    "step": "0",
    "lam1": "1",
    "lam2": "1",
    "out": "out",
}


def parse_config_file(path):
    """Plain-text key = value lines; '#' starts a comment."""
    cfg = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, val = line.split("=", 1)
            cfg[key.strip()] = val.strip()
    return cfg


def parse_corr(text):
    """'mag@phase' (phase in radians) -> CorrelationSpec."""
    if "@" in text:
        mag, phase = text.split("@", 1)
    else:
        mag, phase = text, "0"
    return CorrelationSpec(float(mag), float(phase))


def parse_grid(text):
    """'start:step:stop' (inclusive) or comma-separated dB values."""
    if ":" in text:
        a, s, b = (float(x) for x in text.split(":"))
        n = int(round((b - a) / s)) + 1
        return [a + i * s for i in range(n)]
    return [float(x) for x in text.split(",")]


def parse_rate(text):
    if not text:
        return None
    return float(fractions.Fraction(text))


def _required_points(scheme, code, rate):
    """Constellation size required by the per-user rate under a scheme/code."""
    if scheme == "TDMA":
        return 2.0 ** (2.0 * rate)
    if code in ("sm", "dayal"):
        return 2.0 ** (1.5 * rate)
    if code in ("ostbc", "alamouti"):
        return 2.0 ** (3.0 * rate)
    raise ValueError(f"unknown code {code!r}")


def resolve(cfg):
    """Fill defaults and parse a raw string config into typed values."""
    merged = dict(DEFAULTS)
    merged.update(cfg)
    out = dict(merged)
    out["scheme"] = merged["scheme"].upper()
    out["code"] = merged["code"].lower()
    out["constellation"] = merged["constellation"].lower()
    out["rho_grid"] = parse_grid(merged["rho_db"])
    out["config_errors"] = []
    for slot, key in (("spec1", "t1"), ("spec2", "t2")):
        try:
            out[slot] = parse_corr(merged[key])
        except ValueError as exc:
            out[slot] = None
            out["config_errors"].append(f"{key}: {exc}")
    out["rate_val"] = parse_rate(merged["rate"])
    out["rate_bits_val"] = parse_rate(merged["rate_bits"])
    for key in ("seed", "threads", "target_errors", "max_trials", "trials",
                "restarts", "max_iters"):
        out[key] = int(merged[key])
    for key in ("r", "rho_over_4_db", "step", "lam1", "lam2"):
        out[key] = float(merged[key])
    return out


def build_codebook(cfg):
    name = cfg["constellation"]
    if name not in _CONSTELLATIONS:
        raise ValueError(f"unknown constellation {name!r}")
    kind, m = _CONSTELLATIONS[name]
    if cfg["code"] == "dayal" and kind != "qam":
        if m == 4:
            kind = "qam"  # QPSK and 4-QAM are the same set up to rotation
        else:
            raise ValueError("the Dayal code requires a QAM constellation")
    const = codes.make_constellation(kind, m)
    return codes.codebook_for(cfg["code"], const)


def validate_config(cfg):
    """Dry-run checks; returns a report (list of strings), raises nothing."""
    report = []
    name = cfg["constellation"]
    try:
        kind, m = _CONSTELLATIONS[name]
    except KeyError:
        report.append(f"ERROR unknown constellation {name!r}")
        return report
    if cfg["code"] == "dayal" and kind != "qam" and m != 4:
        report.append("ERROR the Dayal code requires a QAM constellation")
    rate = cfg["rate_val"]
    if rate is not None:
        need = _required_points(cfg["scheme"], cfg["code"], rate)
        if abs(need - m) > 1e-9:
            report.append(
                f"ERROR rate {rate:g} under {cfg['scheme']}/{cfg['code']} needs a "
                f"{need:g}-point constellation, got {m}")
    q = {"sm": 2, "dayal": 4, "ostbc": 2, "alamouti": 2}.get(cfg["code"])
    if q is not None:
        k = m ** q
        report.append(f"INFO ML codebook size {k} "
                      f"({k * (2 if cfg['code'] != 'sm' else 1) * 2 * 16} bytes/frame metric row)")
        if k > 4096:
            report.append(f"WARN exhaustive ML over {k} codewords is expensive")
    for err in cfg["config_errors"]:
        report.append(f"ERROR {err}")
    if not cfg["rho_grid"]:
        report.append("ERROR empty SNR grid")
    elif any(b <= a for a, b in zip(cfg["rho_grid"], cfg["rho_grid"][1:])):
        report.append("ERROR SNR grid must be strictly ascending")
    if not report or all(r.startswith(("INFO", "WARN")) for r in report):
        report.append("OK configuration is consistent")
    return report


class _Artifacts:
    """Write-all-or-nothing artifact collector."""

    def __init__(self, outdir):
        self.outdir = outdir
        self.pending = []  # (tmp, final)
        os.makedirs(outdir, exist_ok=True)

    def path(self, name):
        fd, tmp = tempfile.mkstemp(dir=self.outdir, prefix=".tmp_" + name)
        os.close(fd)
        self.pending.append((tmp, os.path.join(self.outdir, name)))
        return tmp

    def commit(self):
        for tmp, final in self.pending:
            os.replace(tmp, final)
        done = [final for _, final in self.pending]
        self.pending = []
        return done

    def abort(self):
        for tmp, _ in self.pending:
            if os.path.exists(tmp):
                os.unlink(tmp)
        self.pending = []


def _content_hash(text):
    blob = f"blob {len(text)}\0{text}".encode()
    return hashlib.sha1(blob).hexdigest()


def write_manifest(art, cfg, raw_cfg, command):
    resolved = {k: v for k, v in sorted(cfg.items())
                if isinstance(v, (str, int, float, list))}
    body = json.dumps(resolved, sort_keys=True)
    manifest = {
        "command": command,
        "config": resolved,
        "raw_config": dict(sorted(raw_cfg.items())),
        "seed": cfg["seed"],
        "content_hash": _content_hash(body),
    }
    with open(art.path("manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def run_dmt(cfg, art):
    dmt.write_dmt_csv(dmt.all_curves(), art.path("dmt_breakpoints.csv"))


def run_pep(cfg, art):
    scheme = cfg["scheme"]
    lam1, lam2 = cfg["lam1"], cfg["lam2"]
    fn = pep.pep_mat_iid if scheme == "MAT" else pep.pep_altmat_iid
    rows = pep.bound_curve(lambda rho: fn(lam1, lam2, rho), cfg["rho_grid"])
    pep.write_bound_csv(rows, art.path("pep_bound.csv"))


def _scenario(cfg, label=None):
    lab = label or ("iid" if cfg["spec1"].magnitude == cfg["spec2"].magnitude == 0.0
                    else f"t1={cfg['t1']},t2={cfg['t2']}")
    return Scenario(spec1=cfg["spec1"], spec2=cfg["spec2"],
                    phase_mode=cfg["phase_mode"], label=lab)


def run_simulate(cfg, art):
    book = build_codebook(cfg)
    scen = _scenario(cfg)
    pts = montecarlo.error_curve(
        cfg["scheme"], book, scen, cfg["rho_grid"],
        target_errors=cfg["target_errors"], max_trials=cfg["max_trials"],
        seed=cfg["seed"], threads=cfg["threads"])
    rows = [(cfg["scheme"], cfg["code"], scen.label, p) for p in pts]
    csv = art.path("error_rate.csv")
    montecarlo.write_error_csv(rows, csv)
    montecarlo.write_gnuplot_script(
        "error_rate.csv", art.path("error_rate.gp"),
        f"{cfg['scheme']}-{cfg['code']} {cfg['constellation']}", "BER",
        [(f"{cfg['scheme']}-{cfg['code']}", 4, 5)])


def run_outage(cfg, art):
    pts = montecarlo.outage_curve(
        cfg["scheme"], cfg["r"], cfg["rho_grid"], cfg["trials"], cfg["seed"],
        rate_bits=cfg["rate_bits_val"], threads=cfg["threads"])
    montecarlo.write_outage_csv(pts, art.path("outage.csv"))


def run_pairing(cfg, art):
    book = build_codebook(cfg)
    mag = cfg["spec1"].magnitude or 0.99
    scenarios = []
    for phi in (float(x) for x in cfg["phi_list"].split(",")):
        s1 = CorrelationSpec(mag, 0.0)
        s2 = s1.orthogonal_partner() if abs(phi - math.pi) < 1e-12 else CorrelationSpec(mag, phi)
        scenarios.append(Scenario(spec1=s1, spec2=s2, phase_mode="joint",
                                  label=f"phi={phi:.4f}"))
    scenarios.append(Scenario(spec1=CorrelationSpec(0.0), spec2=CorrelationSpec(mag, 0.0),
                              phase_mode="joint", label="asym-t1=0"))
    scenarios.append(Scenario(spec1=CorrelationSpec(mag, 0.0), spec2=CorrelationSpec(0.0),
                              phase_mode="joint", label="asym-t2=0"))
    table = montecarlo.pairing_study(
        scenarios, cfg["scheme"], book, cfg["rho_grid"], cfg["seed"],
        target_errors=cfg["target_errors"], max_trials=cfg["max_trials"],
        threads=cfg["threads"])
    rows = []
    for label in sorted(table):
        rows.extend((cfg["scheme"], cfg["code"], label, p) for p in table[label])
    montecarlo.write_error_csv(rows, art.path("pairing.csv"))


def run_optimize(cfg, art):
    ocfg = constopt.OptimizerConfig(
        spec1=cfg["spec1"], spec2=cfg["spec2"],
        rho_over_4_db=cfg["rho_over_4_db"], step=cfg["step"],
        max_iters=cfg["max_iters"], restarts=cfg["restarts"], seed=cfg["seed"])
    res = constopt.optimize(ocfg)
    constopt.save_constellation(res.constellation, art.path("constellation.txt"))
    with open(art.path("optimize_trace.csv"), "w") as f:
        f.write("iteration,pbar\n")
        for i, v in enumerate(res.trace):
            f.write(f"{i},{v:.12e}\n")
    baseline = constopt.objective_pbar(constopt.qpsk_product(), ocfg)
    with open(art.path("optimize_summary.txt"), "w") as f:
        f.write(f"pbar {res.pbar:.12e}\n")
        f.write(f"qpsk_product_pbar {baseline:.12e}\n")
        f.write(f"restart {res.restart}\n")
        f.write(f"step {res.step:.6g}\n")


PRESETS = {
    "fig1": {"experiment": "dmt"},
    "fig2": {"experiment": "fig2", "rho_db": "0:5:30",
             "target_errors": "400", "max_trials": "2000000"},
    "fig3": {"experiment": "fig3", "rho_db": "0:5:30",
             "target_errors": "400", "max_trials": "2000000"},
    "fig4": {"experiment": "pairing", "scheme": "MAT", "code": "sm",
             "constellation": "qpsk", "rho_db": "0:5:25", "t1": "0.99@0",
             "phase_mode": "joint", "target_errors": "400",
             "max_trials": "2000000"},
    "fig5": {"experiment": "fig5", "rho_db": "0:5:25", "rho_over_4_db": "20",
             "target_errors": "400", "max_trials": "2000000"},
}


def run_fig2(cfg, art):
    rows = []
    for scheme, code, constellation in (
            ("MAT", "sm", "qpsk"), ("ALTMAT", "sm", "qpsk"),
            ("MAT", "dayal", "qpsk"), ("ALTMAT", "dayal", "qpsk"),
            ("TDMA", "ostbc", "8psk")):
        sub = dict(cfg)
        sub.update(scheme=scheme, code=code, constellation=constellation)
        book = build_codebook(sub)
        pts = montecarlo.error_curve(
            scheme, book, montecarlo.IID_SCENARIO, cfg["rho_grid"],
            target_errors=cfg["target_errors"], max_trials=cfg["max_trials"],
            seed=cfg["seed"], threads=cfg["threads"])
        rows.extend((scheme, code, "iid", p) for p in pts)
    montecarlo.write_error_csv(rows, art.path("fig2_ber.csv"))
    montecarlo.write_gnuplot_script("fig2_ber.csv", art.path("fig2.gp"),
                                    "BER, R=4/3 (MAT/ALTMAT) vs TDMA R=3/2",
                                    "BER", [("curves", 4, 5)])


def run_fig3(cfg, art):
    rows = []
    for scheme, code, constellation in (
            ("MAT", "sm", "8psk"), ("ALTMAT", "sm", "8psk"),
            ("MAT", "sm", "16qam"), ("ALTMAT", "sm", "16qam"),
            ("TDMA", "ostbc", "16qam"), ("TDMA", "ostbc", "64qam")):
        sub = dict(cfg)
        sub.update(scheme=scheme, code=code, constellation=constellation)
        book = build_codebook(sub)
        pts = montecarlo.error_curve(
            scheme, book, montecarlo.IID_SCENARIO, cfg["rho_grid"],
            target_errors=cfg["target_errors"], max_trials=cfg["max_trials"],
            seed=cfg["seed"], threads=cfg["threads"])
        rows.extend((scheme, f"{code}-{constellation}", "iid", p) for p in pts)
    montecarlo.write_error_csv(rows, art.path("fig3_ser.csv"))


def run_fig5(cfg, art):
    rows = []
    for label, spec1, spec2 in (
            ("aligned", CorrelationSpec(0.95, 0.0), CorrelationSpec(0.95, 0.0)),
            ("orthogonal", CorrelationSpec(0.95, 0.0),
             CorrelationSpec(0.95, 0.0).orthogonal_partner())):
        ocfg = constopt.OptimizerConfig(
            spec1=spec1, spec2=spec2, rho_over_4_db=cfg["rho_over_4_db"],
            max_iters=cfg["max_iters"], restarts=cfg["restarts"], seed=cfg["seed"])
        res = constopt.optimize(ocfg)
        constopt.save_constellation(res.constellation,
                                    art.path(f"fig5_constellation_{label}.txt"))
        book_opt = constopt.as_codebook(res.constellation)
        book_qpsk = constopt.as_codebook(constopt.qpsk_product())
        scen = Scenario(spec1=spec1, spec2=spec2, phase_mode="fixed", label=label)
        for name, book in (("optimized", book_opt), ("qpsk", book_qpsk)):
            pts = montecarlo.error_curve(
                "MAT", book, scen, cfg["rho_grid"],
                target_errors=cfg["target_errors"], max_trials=cfg["max_trials"],
                seed=cfg["seed"], threads=cfg["threads"])
            rows.extend(("MAT", name, label, p) for p in pts)
    montecarlo.write_error_csv(rows, art.path("fig5_ser.csv"))


_EXPERIMENTS = {
    "dmt": run_dmt,
    "pep": run_pep,
    "simulate": run_simulate,
    "outage": run_outage,
    "pairing": run_pairing,
    "optimize": run_optimize,
    "fig2": run_fig2,
    "fig3": run_fig3,
    "fig5": run_fig5,
}


def execute(cfg, raw_cfg, command):
    report = validate_config(cfg)
    errors = [r for r in report if r.startswith("ERROR")]
    if errors:
        raise SystemExit("invalid configuration:\n" + "\n".join(errors))
    art = _Artifacts(cfg["out"])
    try:
        _EXPERIMENTS[cfg["experiment"]](cfg, art)
        write_manifest(art, cfg, raw_cfg, command)
    except BaseException:
        art.abort()
        raise
    return art.commit()


def _add_common(p):
    p.add_argument("--config", help="plain-text key = value config file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named figure preset")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--threads", type=int)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key")


def _gather(args, experiment=None):
    raw = {}
    if args.preset:
        raw.update(PRESETS[args.preset])
    if args.config:
        raw.update(parse_config_file(args.config))
    for item in args.set:
        if "=" not in item:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
    if experiment is not None:
        raw["experiment"] = experiment
    if args.seed is not None:
        raw["seed"] = str(args.seed)
    if args.out is not None:
        raw["out"] = args.out
    if args.threads is not None:
        raw["threads"] = str(args.threads)
    return raw


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="matbc",
        description="Two-user MISO broadcast channel with delayed CSIT: "
                    "simulation and analysis experiments")
    subs = parser.add_subparsers(dest="cmd", required=True)
    for name, experiment in (
            ("run", None), ("pep", "pep"), ("simulate", "simulate"),
            ("outage", "outage"), ("dmt", "dmt"), ("pairing", "pairing"),
            ("optimize-constellation", "optimize")):
        p = subs.add_parser(name)
        _add_common(p)
        p.set_defaults(experiment=experiment)
    pv = subs.add_parser("validate")
    _add_common(pv)
    args = parser.parse_args(argv)

    if args.cmd == "validate":
        raw = _gather(args)
        cfg = resolve(raw)
        for line in validate_config(cfg):
            print(line)
        return 0

    raw = _gather(args, experiment=args.experiment)
    cfg = resolve(raw)
    written = execute(cfg, raw, command=" ".join(argv or sys.argv[1:]))
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
