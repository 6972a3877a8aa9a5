"""Command-line front end: ``nsni <subcommand> [options]``.

Every subcommand reads one config (``--preset`` or ``--config``), applies
the flag overrides, writes its tables to ``--out`` and a JSON manifest
recording the resolved config, its hash, seeds and package versions.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .coefficients import estimate_all
from .config import ConfigError, load_preset, parse_config
from .link import ConstellationSpec
from .mi import mutual_information
from .ssfm import matched_link, run_experiment
from .units import db2lin
from .variance import snr_curves

logger = logging.getLogger("nsni")


def _powers(text):
    try:
        a, b, s = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected start:stop:step in dBm") from None
    return [a, b, s]


def _onoff(text):
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _common(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=("config1", "config2"))
    src.add_argument("--config", type=Path, metavar="PATH")
    p.add_argument("--out", type=Path, metavar="DIR")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--powers", type=_powers, metavar="START:STOP:STEP",
                   help="dBm grid; write --powers=-4:6:1 when START is negative")
    p.add_argument("--channels", type=int)
    p.add_argument("--mode", choices=("gain", "power"))
    p.add_argument("--dbp", type=_onoff, metavar="on|off")
    p.add_argument("--ndfwm", type=_onoff, metavar="on|off")
    p.add_argument("--spans", type=int, help="override the number of spans")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    ap = argparse.ArgumentParser(prog="nsni", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"nsni {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name, text in (("coeffs", "estimate and cache the coefficient set"),
                       ("snr", "analytic SNR versus launch power"),
                       ("ssfm", "split-step simulation SNR versus launch power"),
                       ("compare", "analytic versus simulated SNR with dB deltas"),
                       ("mi", "mutual information at one SNR or along the analytic curve"),
                       ("validate", "run a self-check suite")):
        p = sub.add_parser(name, help=text)
        _common(p)
        if name == "mi":
            p.add_argument("--format", dest="fmt")
            p.add_argument("--snr-db", type=float)
        if name == "validate":
            p.add_argument("--suite", choices=("closed-forms", "oracle", "limits"),
                           default="closed-forms")
        if name == "compare":
            p.add_argument("--tolerance", type=float, help="max |delta| in dB")
    return ap


def resolve_config(args):
    if args.config is not None:
        cfg = parse_config(args.config)
    else:
        cfg = load_preset(args.preset or "config2")
    env_seed = os.environ.get("NSNI_SEED")
    env_workers = os.environ.get("NSNI_WORKERS")
    ov = {}
    seed = args.seed if args.seed is not None else (int(env_seed) if env_seed else None)
    if seed is not None:
        ov["mc__seed"] = seed
        ov["ssfm__seed"] = seed
    if env_workers:
        ov["ssfm__workers"] = int(env_workers)
    if args.samples is not None:
        ov["mc__samples"] = args.samples
    if args.powers is not None:
        ov["plan__powers_dbm"] = args.powers
    if args.channels is not None:
        ov["plan__channels"] = args.channels
    if args.mode is not None:
        ov["link__mode"] = args.mode
    if args.dbp is not None:
        ov["ssfm__dbp"] = args.dbp
    if args.ndfwm is not None:
        ov["mc__ndfwm"] = args.ndfwm
    if args.spans is not None:
        ov["link__n_spans"] = args.spans
    return cfg.override(**ov) if ov else cfg


def _manifest(cfg, cmd, outputs, extra=None):
    return {"command": cmd, "config": cfg.to_dict(), "config_hash": cfg.digest(),
            "seeds": {"mc": cfg["mc"]["seed"], "ssfm": cfg["ssfm"]["seed"]},
            "versions": {"nsni": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                         "python": platform.python_version()},
            "outputs": sorted(str(o) for o in outputs), **(extra or {})}


def _write_manifest(out, cfg, cmd, outputs, extra=None):
    path = out / f"{cmd}_manifest.json"
    path.write_text(json.dumps(_manifest(cfg, cmd, outputs, extra), indent=2, sort_keys=True) + "\n")
    return path


def _curve(cfg):
    mc = cfg["mc"]
    return snr_curves(cfg.powers_dbm, cfg.link(), cfg.plan(), cfg.constellation(),
                      samples=mc["samples"], seed=mc["seed"], convention=mc["convention"],
                      ndfwm=mc["ndfwm"], x4=mc["x4"])


def _simulate(cfg):
    sim = cfg.sim()
    plan = cfg.plan()
    link = matched_link(cfg.link(), plan, sim)
    return run_experiment(link, plan, cfg.constellation(), sim, cfg.powers_dbm)


def cmd_coeffs(cfg, out):
    mc = cfg["mc"]
    plan = cfg.plan(float(cfg.powers_dbm[0]))
    cs = estimate_all(cfg.link(), plan, samples=mc["samples"], seed=mc["seed"], x4=mc["x4"])
    path = out / "coeffs.json"
    cs.save(path)
    for key, est in sorted(cs.estimates.items()):
        print(f"{key:22s} {est.value: .6e}  stderr {est.stderr:.2e}")
    return [path], {}


def cmd_snr(cfg, out):
    curve = _curve(cfg)
    csv_path, js = out / "snr.csv", out / "snr.json"
    curve.to_csv(csv_path)
    curve.to_json(js)
    print(f"SNR_U optimum {curve.opt_u[1]:.2f} dB at {curve.opt_u[0]:.2f} dBm")
    for f in curve.flags:
        print(f"note: {f}")
    return [csv_path, js], {"flags": curve.flags}


def cmd_ssfm(cfg, out):
    m = _simulate(cfg)
    runs = out / "ssfm_runs.csv"
    m.to_csv(runs)
    agg = out / "ssfm.csv"
    with open(agg, "w") as fh:
        fh.write("P_dBm,snr_u_db,snr_c_db,stderr_u_db,stderr_c_db\n")
        for row in zip(m.powers_dbm, m.snr_u_db, m.snr_c_db, m.stderr_u_db, m.stderr_c_db):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return [runs, agg], {"ssfm_meta": m.meta}


def cmd_compare(cfg, out, tolerance=None):
    tol = cfg["ssfm"]["tolerance_db"] if tolerance is None else tolerance
    curve = _curve(cfg)
    m = _simulate(cfg)
    path = out / "compare.csv"
    worst = 0.0
    with open(path, "w") as fh:
        fh.write("P_dBm,snr_u_analytic,snr_u_ssfm,delta_u_db,snr_c_analytic,snr_c_ssfm,delta_c_db\n")
        for i, p in enumerate(curve.powers_dbm):
            du = curve.snr_u_db[i] - m.snr_u_db[i]
            dc = curve.snr_c_db[i] - m.snr_c_db[i]
            worst = max(worst, abs(du), abs(dc) if np.isfinite(dc) else 0.0)
            fh.write(",".join(repr(float(v)) for v in (p, curve.snr_u_db[i], m.snr_u_db[i], du,
                                                       curve.snr_c_db[i], m.snr_c_db[i], dc)) + "\n")
    print(f"max |delta| = {worst:.3f} dB (tolerance {tol} dB)")
    return [path], {"max_delta_db": worst, "tolerance_db": tol, "passed": worst <= tol}


def cmd_mi(cfg, out, fmt=None, snr_db=None):
    con = ConstellationSpec.by_name(fmt) if fmt else cfg.constellation()
    if snr_db is not None:
        v = float(mutual_information(con, db2lin(snr_db)))
        print(f"{v:.3f}")
        return [], {"mi_bits": v}
    curve = _curve(cfg)
    path = out / "mi.csv"
    with open(path, "w") as fh:
        fh.write("P_dBm,mi_u_bits,mi_c_bits\n")
        for p, u, c in zip(curve.powers_dbm, curve.snr_u_db, curve.snr_c_db):
            mu = float(mutual_information(con, db2lin(u)))
            mc = float(mutual_information(con, db2lin(c))) if np.isfinite(c) else 2 * np.log2(con.size)
            fh.write(f"{p!r},{mu!r},{mc!r}\n")
    return [path], {}


def cmd_validate(cfg, out, suite):
    from . import validate
    if suite == "closed-forms":
        res = validate.check_closed_forms(cfg.link(), cfg.plan())
        ok = res["r"] < 1e-9 and res["I"] < 1e-8 and res["half"] < 1e-12
    elif suite == "oracle":
        res = validate.check_oracle_toy(samples=cfg["mc"]["samples"], seed=cfg["mc"]["seed"])
        ok = res["passed"]
    else:
        res = validate.check_limits(cfg.link(), cfg.plan(), cfg.constellation(),
                                    samples=cfg["mc"]["samples"], seed=cfg["mc"]["seed"])
        ok = res["passed"]
    print(json.dumps(res, indent=2, sort_keys=True, default=float))
    print("PASS" if ok else "FAIL")
    return [], {"suite": suite, "result": res, "passed": bool(ok)}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return 2
    out = args.out or Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.cmd == "coeffs":
            outputs, extra = cmd_coeffs(cfg, out)
        elif args.cmd == "snr":
            outputs, extra = cmd_snr(cfg, out)
        elif args.cmd == "ssfm":
            outputs, extra = cmd_ssfm(cfg, out)
        elif args.cmd == "compare":
            outputs, extra = cmd_compare(cfg, out, args.tolerance)
        elif args.cmd == "mi":
            outputs, extra = cmd_mi(cfg, out, args.fmt, args.snr_db)
        else:
            outputs, extra = cmd_validate(cfg, out, args.suite)
    except (ValueError, KeyError, FloatingPointError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    _write_manifest(out, cfg, args.cmd, outputs, extra)
    return 0 if extra.get("passed", True) else 1


if __name__ == "__main__":
    sys.exit(main())
