"""Command-line front end.

Exit codes: 0 on success, 1 when a verification fails, 2 on usage or
configuration errors.
"""

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from .calibration import (
    ONE_SIDED_INSIDE,
    ONE_SIDED_OUTSIDE,
    TWO_SIDED,
    Calibration,
    calibration_pairform,
    certify,
    check_uniqueness_hypotheses,
    ordered_identity,
)
from .errors import BudgetExceededError, ConfigError, NlcalibError, PreconditionError
from .functionals import (
    curvature_csv,
    nmc_level_many,
    nmc_principal_value,
    nmc_set_many,
    perimeter,
    perimeter_pairform,
)
from .kernels import kernel_from_dict
from .lattice import IndicatorField
from .oracle import enumerate_minimizers, single_flip_stationarity, verify_certificate_against_oracle
from .scenarios import build_scenario, echo, load_config, refinement_study

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
REL_TOL = 1e-12


def _residual(name, a, b, tol=REL_TOL, scale=0.0):
    # scale: magnitude of the summed terms, for quantities that can cancel to zero
    scale = max(abs(a), abs(b), scale)
    err = abs(a - b) / scale if scale > 0 else 0.0
    return {"name": name, "lhs": a, "rhs": b, "relative_residual": err, "tolerance": tol, "passed": bool(err <= tol)}


def _brute_perimeter(E, W):
    lat = W.lattice
    cells = lat.all_cells
    if cells.shape[0] > 4000:
        return None
    f = E.values[cells[:, 0], cells[:, 1]].astype(float)
    win = lat.window[cells[:, 0], cells[:, 1]]
    wm = W.pair_matrix(cells)
    live = win[:, None] | win[None, :]
    return float(0.5 * np.sum(np.abs(f[:, None] - f[None, :]) * wm * live))


def cmd_perimeter(cfg, args):
    b = build_scenario(cfg)
    p1 = perimeter(b.E, b.W)
    p2 = perimeter_pairform(b.E, b.W)
    res = [_residual("perimeter vs pair form", p1, p2)]
    brute = _brute_perimeter(b.E, b.W)
    if brute is not None:
        res.append(_residual("perimeter vs direct pair loop", p1, brute, 1e-10))
    out = {"perimeter": p1, "perimeter_pairform": p2, "residuals": res}
    touch = b.info.get("viscosity")
    if touch is not None:
        out["viscosity"] = touch.to_dict()
        res.append({"name": "raised-graph sign scan", "value": touch.lastclaim_violations, "passed":
                    touch.lastclaim_violations == 0 and touch.domination_gap >= 0})
        res.append(_residual("ordered identity of the raised graph", *touch.identity,
                             scale=p1 + perimeter(touch.F, b.W)))
    return out


def cmd_curvature(cfg, args):
    b = build_scenario(cfg)
    lat = b.lattice
    cells = lat.window_cells
    opts = cfg.get("curvature", {})
    schedule = opts.get("schedule")
    out = {"cells": [], "residuals": []}
    pv = {}
    set_curv = nmc_set_many(b.E, b.W)
    lev_curv = nmc_level_many(b.phi, b.W) if b.phi is not None and np.all(np.isfinite(b.phi.values[lat.window])) else None
    for k, c in enumerate(cells):
        g = lat.global_index(c)
        row = {"cell": g if lat.dimension == 1 else list(g), "nmc_set": float(set_curv[k])}
        if lev_curv is not None:
            row["nmc_level"] = float(lev_curv[k])
        out["cells"].append(row)
        if opts.get("principal_value", True):
            target = b.phi if (lev_curv is not None and opts.get("target", "level") == "level") else b.E
            pv[g] = nmc_principal_value(target, g, b.W, schedule=schedule,
                                        pv_tolerance=float(opts.get("pv_tolerance", 1e-6)))
            row["principal_value"] = pv[g].to_dict()
    out["_csv"] = curvature_csv(lat, pv) if pv else ""
    return out


def cmd_calibrate(cfg, args):
    b = build_scenario(cfg)
    if b.phi is None:
        raise ConfigError("calibrate needs a foliation")
    rng = np.random.default_rng(cfg["seed"])
    n = int(cfg.get("calibrate", {}).get("competitors", 16))
    cal = Calibration(b.phi, b.W)
    comps = [b.E] + [b.E.with_window(rng.random(b.lattice.n_window) < 0.5) for _ in range(n)]
    rows, res = [], []
    for k, F in enumerate(comps):
        pf = calibration_pairform(F, b.phi, b.W)
        cf = cal(F)
        per = perimeter(F, b.W)
        rows.append({"competitor": k, "window_pattern": F.window_pattern(), "perimeter": per,
                     "calibration_pairform": pf, "calibration_curvform": cf})
        res.append(_residual(f"pair vs curvature form, competitor {k}", pf, cf, scale=per))
        res.append({"name": f"perimeter >= calibration, competitor {k}", "lhs": per, "rhs": pf,
                    "tolerance": 1e-12 * max(1.0, abs(per)), "passed": bool(per >= pf - 1e-12 * max(1.0, abs(per)))})
    interior = b.phi.values.copy()
    F = b.E.with_window(b.E.window_bits() & (rng.random(b.lattice.n_window) < 0.5))
    lhs, rhs = ordered_identity(b.E, F, np.where(np.isfinite(interior), interior, 0.0), b.W)
    res.append(_residual("ordered identity", lhs, rhs, scale=perimeter(b.E, b.W) + perimeter(F, b.W)))
    return {"competitors": rows, "residuals": res}


def _required_status(cfg):
    req = cfg.get("certify", {}).get("require", [TWO_SIDED])
    return [req] if isinstance(req, str) else list(req)


def cmd_certify(cfg, args):
    b = build_scenario(cfg)
    if b.phi is None:
        raise ConfigError("certify needs a foliation (missing foliation grid or file)")
    tol = float(cfg.get("certify", {}).get("sign_tolerance", 0.0))
    try:
        cert = certify(b.E, b.phi, b.W, sign_tolerance=tol)
    except PreconditionError as exc:
        return {"error": str(exc), "passed": False}
    unique, _ = check_uniqueness_hypotheses(b.E, b.phi, b.W, cert) if cert.status == TWO_SIDED else (False, {})
    out = {"certificate": cert.to_dict(), "unique": unique}
    required = _required_status(cfg)
    ok = cert.status in required
    out["residuals"] = [{"name": "certificate status", "value": cert.status, "required": required, "passed": ok}]
    if cfg.get("certify", {}).get("oracle", False):
        rep = verify_certificate_against_oracle(b.E, b.phi, b.W, workers=args.workers, scenario=echo(cfg),
                                                dump_path=cfg.get("certify", {}).get("dump_path"))
        out["oracle_check"] = rep
        out["residuals"].append({"name": "oracle cross-check", "passed": rep["passed"]})
    return out


def cmd_oracle(cfg, args):
    b = build_scenario(cfg)
    oc = cfg.get("oracle", {})
    free = b.E.window_bits() if oc.get("restrict") == "subsets" else None
    res = enumerate_minimizers(b.E, b.W, budget=oc.get("budget"), workers=args.workers, free=free)
    audits, res_rows = [], []
    for p in res.minimizers[:64]:
        rep = single_flip_stationarity(b.E.with_window(p), b.W)
        audits.append({"window_pattern": p, "violations": rep["violations"]})
        res_rows.append({"name": f"single-flip stationarity of minimizer {p}", "passed": rep["stationary"]})
    return {"oracle": res.to_dict(timings=False), "e_pattern": b.E.window_pattern(),
            "e_perimeter": perimeter(b.E, b.W), "stationarity": audits, "residuals": res_rows,
            "_timings": {"enumeration_s": res.wall_time, "backend": res.backend, "workers": res.workers}}


def cmd_study(cfg, args):
    st = cfg.get("study")
    if not st:
        raise ConfigError("study config needs a 'study' section")
    hl = st.get("h_list")
    if not isinstance(hl, list) or not hl or not all(isinstance(h, (int, float)) and not isinstance(h, bool) and h > 0 for h in hl):
        raise ConfigError("study.h_list must be a nonempty list of positive numbers")
    kernel = kernel_from_dict(cfg["kernel"]) if "kernel" in cfg else None
    params = {k: v for k, v in st.items() if k not in ("kind", "h_list")}
    try:
        table = refinement_study(st.get("kind", "disk"), hl, kernel=kernel, **params)
    except PreconditionError as exc:
        raise ConfigError(str(exc)) from exc
    out = {"study": table.to_dict(), "_csv": table.to_csv()}
    tol = st.get("tolerance")
    if tol is not None:
        last = table.rows[-1]
        col = "max_abs_curvature" if table.kind == "halfspace" else "rel_error"
        out["residuals"] = [{"name": f"finest {col}", "value": last[col], "tolerance": tol,
                             "passed": bool(abs(last[col]) <= tol)}]
    return out


COMMANDS = {
    "perimeter": cmd_perimeter,
    "curvature": cmd_curvature,
    "calibrate": cmd_calibrate,
    "certify": cmd_certify,
    "oracle": cmd_oracle,
    "study": cmd_study,
}


def build_parser():
    p = argparse.ArgumentParser(prog="nlcalib", description="Nonlocal perimeter and calibration lattice engine")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="scenario JSON file")
        s.add_argument("--workers", type=int, default=1, help="oracle worker threads")
        s.add_argument("--out", help="write the report here instead of stdout")
        s.add_argument("--format", choices=("json", "csv"), default="json")
        s.add_argument("--no-timings", action="store_true", help="omit timing fields from the report")
    return p


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config)
        body = COMMANDS[args.command](cfg, args)
    except (ConfigError, BudgetExceededError) as exc:
        sys.stderr.write(f"nlcalib: {exc}\n")
        return EXIT_CONFIG
    except NlcalibError as exc:
        sys.stderr.write(f"nlcalib: {exc}\n")
        return EXIT_FAIL
    checks = body.get("residuals", [])
    passed = body.get("passed", True) and all(r["passed"] for r in checks)
    csv_text = body.pop("_csv", None)
    timings = body.pop("_timings", {})
    report = {"command": args.command, "scenario": echo(cfg), "passed": passed, **body}
    if not args.no_timings:
        report["timings"] = {"total_s": time.perf_counter() - t0, **timings}
    if args.format == "csv":
        if csv_text is None:
            sys.stderr.write(f"nlcalib: {args.command} has no CSV output\n")
            return EXIT_CONFIG
        _emit(csv_text, args.out)
    else:
        _emit(json.dumps(report, sort_keys=True, indent=2, default=_json_default) + "\n", args.out)
    return EXIT_OK if passed else EXIT_FAIL


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
