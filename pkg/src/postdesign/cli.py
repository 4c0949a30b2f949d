"""Command line entry point.

    postdesign optimize CONFIG [--seed S] [--m M] [--out DIR] ...
    postdesign bootstrap CONFIG [--big-m M] [--m-star M] ...
    postdesign contour CONFIG ...
    postdesign simulate CONFIG --n-b N ...
    postdesign proxy-check [--out DIR]

Every run writes ``report.json`` (plus CSV/JSON artifacts) into ``--out`` and
prints the report to standard output.  Progress goes to standard error.
Exit codes: 0 success, 1 usage or configuration error, 2 infeasible design,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import DesignConfig, config_hash, config_to_dict, parse_config
from .contour import POWER, TYPE1, build_grid, crossing_point, levels
from .core import CapabilityError, ConfigurationError, InfeasibleError, NumericalError
from .design import PHASE_DIRECT, bootstrap_cis, optimize
from .proxy import proxy_check
from .sampdist import estimate, oc_estimate, thresholds

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("postdesign")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="postdesign", description="Sample size and critical value for Bayesian designs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_config=True):
        if needs_config:
            sp.add_argument("config", help="TOML design configuration")
        sp.add_argument("--out", default="postdesign-out", help="output directory (default: %(default)s)")
        sp.add_argument("--seed", type=int, help="override design.seed")
        sp.add_argument("--m", type=int, help="override design.m")
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads")
        sp.add_argument("--fractional-n", action="store_true", help="search n to the nearest hundredth")
        sp.add_argument("--fixed-gamma", type=float, help="comparison mode: hold the critical value fixed")
        sp.add_argument("--resimulate", action="store_true", help="re-simulate at n2 when far from n1")
        sp.add_argument("--quiet", action="store_true", help="no progress on stderr")

    common(sub.add_parser("optimize", help="recommend (n_B, gamma)"))
    b = sub.add_parser("bootstrap", help="optimize, then percentile bootstrap CIs")
    common(b)
    b.add_argument("--big-m", type=int, help="number of bootstrap resamples")
    b.add_argument("--m-star", type=int, help="resample size per distribution")
    b.add_argument("--level", type=float, help="confidence level")
    c = sub.add_parser("contour", help="optimize, then power/type I surfaces and contours")
    common(c)
    s = sub.add_parser("simulate", help="sampling distributions at one sample size")
    common(s)
    s.add_argument("--n-b", type=int, required=True, help="sample size (group B)")
    s.add_argument("--gamma", type=float, help="critical value for the reported OCs")
    pc = sub.add_parser("proxy-check", help="numeric versus limiting logit slopes")
    common(pc, needs_config=False)
    return p


def effective_config(args) -> DesignConfig:
    cfg = parse_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.m is not None:
        changes["m"] = args.m
    if args.fractional_n:
        changes["optimizer__fractional_n"] = True
    if args.resimulate:
        changes["optimizer__resimulate"] = True
    if args.fixed_gamma is not None:
        changes["optimizer__fixed_gamma"] = args.fixed_gamma
    for flag, key in (("big_m", "bootstrap__big_m"), ("m_star", "bootstrap__m_star"), ("level", "bootstrap__level")):
        val = getattr(args, flag, None)
        if val is not None:
            changes[key] = val
    return cfg.replace(**changes) if changes else cfg


def _config_block(cfg: DesignConfig) -> dict:
    echo = config_to_dict(cfg)
    return {"hash": config_hash(echo), "echo": echo}


def _run_optimize(cfg, args, out, report, say):
    rec = optimize(cfg, threads=args.threads, progress=say)
    report["recommendation"] = rec.to_dict()
    report["trace"] = rec.trace.summary()
    return rec


def _cmd_optimize(cfg, args, out, report, say):
    _run_optimize(cfg, args, out, report, say)


def _cmd_bootstrap(cfg, args, out, report, say):
    rec = _run_optimize(cfg, args, out, report, say)
    bs = cfg.bootstrap
    say(f"bootstrap: {bs.big_m} resamples")
    res = bootstrap_cis(rec.trace, bs.big_m, bs.m_star, bs.level, threads=args.threads)
    _write_csv(out / "bootstrap.csv", ["b", "n", "gamma"], res.rows())
    report["bootstrap"] = {
        "M": res.M,
        "m_star": res.m_star,
        "level": res.level,
        "n_ci": list(res.n_ci),
        "gamma_ci": list(res.gamma_ci),
        "infeasible": res.infeasible,
        "flagged": res.flagged,
    }
    report["artifacts"].append("bootstrap.csv")


def _cmd_contour(cfg, args, out, report, say):
    rec = _run_optimize(cfg, args, out, report, say)
    ct = cfg.contour
    grid = build_grid(rec, ct.n_range, ct.gamma_range, ct.gamma_steps)
    _write_csv(out / "grid.csv", ["n", "gamma", "power", "type1"], grid.rows())
    polys = levels(grid, POWER, 1 - cfg.beta) + levels(grid, TYPE1, cfg.alpha)
    _write_json(out / "polylines.json", [p.to_dict() for p in polys])
    cross = crossing_point(grid)
    report["contour"] = {
        "n_range": [grid.n[0], grid.n[-1]],
        "gamma_range": [grid.gamma[0], grid.gamma[-1]],
        "shape": list(grid.power.shape),
        "crossing": None if cross is None else {"n": cross.n, "gamma": cross.gamma, "intersection": cross.intersection},
    }
    report["artifacts"] += ["grid.csv", "polylines.json"]


def _cmd_simulate(cfg, args, out, report, say):
    n = args.n_b
    sds = []
    for psi in (cfg.psi1, cfg.psi0):
        say(f"simulating hypothesis {psi.j} at n_B={n}")
        sds.append(estimate(cfg.model, cfg.hypothesis, psi, n, cfg.q, cfg.m, cfg.seed, PHASE_DIRECT, threads=args.threads, eps=cfg.optimizer.eps))
    rows = ((sd.j, r, t, p, l) for sd in sds for r, t, p, l in sd.rows())
    _write_csv(out / "sampdist.csv", ["hypothesis", "r", "theta", "prob", "logit"], rows)
    gamma = args.gamma if args.gamma is not None else cfg.optimizer.fixed_gamma
    if gamma is None:
        gamma = thresholds(sds[1].probs, 0, cfg.alpha, cfg.beta)
    oc = oc_estimate(sds[0], sds[1], min(gamma, 1.0), cfg.alpha, cfg.beta)
    report["simulation"] = {
        "n_B": n,
        "m": cfg.m,
        "gamma": oc.gamma,
        "power": oc.power,
        "type1": oc.type1,
        "xi1": oc.xi1,
        "xi0": oc.xi0,
        "criteria_met": oc.criteria_met,
    }
    report["artifacts"].append("sampdist.csv")


def _cmd_proxy(args, out, report):
    rows = proxy_check()
    _write_csv(out / "proxy_check.csv", ["case", "n", "numeric", "analytic", "error"], ([r["case"], r["n"], r["numeric"], r["analytic"], r["error"]] for r in rows))
    worst = max(r["error"] for r in rows if r["n"] == max(x["n"] for x in rows))
    report["proxy_check"] = {"cases": len({r["case"] for r in rows}), "max_error_at_largest_n": worst}
    report["artifacts"].append("proxy_check.csv")


COMMANDS = {
    "optimize": _cmd_optimize,
    "bootstrap": _cmd_bootstrap,
    "contour": _cmd_contour,
    "simulate": _cmd_simulate,
}


def _error(kind: str, exc: Exception) -> dict:
    return {"type": kind, "message": str(exc)}


def run(argv=None) -> int:
    t0 = time.perf_counter()
    report: dict = {"tool": "postdesign", "version": __version__, "artifacts": ["report.json"]}
    out = None
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        say = (lambda msg: None) if args.quiet else (lambda msg: print(f"[postdesign] {msg}", file=sys.stderr, flush=True))
        report["command"] = args.command
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "proxy-check":
            _cmd_proxy(args, out, report)
        else:
            cfg = effective_config(args)
            report["config"] = _config_block(cfg)
            COMMANDS[args.command](cfg, args, out, report, say)
        code = EXIT_OK
    except (UsageError, ConfigurationError, CapabilityError, FileNotFoundError) as exc:
        report["error"] = _error("usage" if isinstance(exc, UsageError) else "configuration", exc)
        code = EXIT_USAGE
    except InfeasibleError as exc:
        report["error"] = _error("infeasible", exc)
        report["error"]["largest_probe"] = exc.largest_probe
        if isinstance(exc.trace, dict):
            report["trace"] = {k: v for k, v in exc.trace.items() if k != "config"}
        code = EXIT_INFEASIBLE
    except NumericalError as exc:
        report["error"] = _error("numerical", exc)
        report["error"]["lanes"] = [list(l) if isinstance(l, tuple) else l for l in exc.lanes]
        code = EXIT_NUMERICAL
    report["timing"] = {"seconds": time.perf_counter() - t0}
    report["exit_code"] = code
    if out is not None:
        _write_json(out / "report.json", report)
    print(json.dumps(_jsonable(report), indent=2, allow_nan=False))
    return code


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
