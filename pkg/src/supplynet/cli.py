"""Command-line interface.

Every command prints a deterministic JSON document (or CSV for sweeps) that
embeds the resolved configuration and a git-style content hash of it. Flags
override values read from ``--config``.

Exit codes: 0 on success, 1 on invalid input, 2 when a size limit is hit.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

from . import tolerance as tol
from .equilibrium import (
    characterized_network,
    greedy_equilibrium,
    selection_filter,
    verify_retailer_nash,
)
from .errors import (
    BoundaryOptimum,
    InfeasibleMoments,
    InsufficientRetailers,
    InsufficientSuppliers,
    ShapeMismatch,
    SizeLimit,
)
from .model import GameParams, Network, PriceVector, validate_params
from .montecarlo import FAMILIES, Instance, validate_many
from .payoff import expected_welfare
from .planner import (
    planner_enumerate,
    planner_optimum,
    planner_welfare_closed,
    planner_y,
    pos_closed,
)
from .pricing import (
    equilibrium_z,
    hetero_mean_prices,
    hetero_variance_prices,
    homogeneous_price_equilibrium,
    supplier_price_deviation_check,
    zero_price_welfare,
)

DEFAULTS = {"n": 1000, "m": 20, "mu": 2.0, "sigma2": 1.0, "c": 0.5, "delta": 18.0, "s_max": 4.0, "w": 0.0}
PARAM_KEYS = ("n", "m", "mu", "sigma2", "c", "delta", "s_max", "w")
SWEEP_METRICS = ("K_star", "K_opt", "d", "welfare_eq", "welfare_opt", "pos")


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int):
        super().__init__(message)
        self.kind = kind
        self.code = code


# ---------------------------------------------------------------- config


def _numbers(text):
    if isinstance(text, (int, float, list)):
        return text
    vals = [float(x) for x in str(text).split(",") if x.strip()]
    return vals[0] if len(vals) == 1 else vals


def resolve_config(args) -> dict:
    cfg: dict = {}
    if args.config:
        with open(args.config) as fh:
            cfg.update(json.load(fh))
    for key in PARAM_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    network = None
    if getattr(args, "network", None):
        with open(args.network) as fh:
            network = json.load(fh)
        cfg["network"] = network
        cfg.setdefault("n", network["n"])
        cfg.setdefault("m", network["m"])
    w = _numbers(cfg.get("w", DEFAULTS["w"]))
    if "m" not in cfg and isinstance(w, list):
        cfg["m"] = len(w)
    for key, val in DEFAULTS.items():
        cfg.setdefault(key, val)
    cfg["n"] = int(cfg["n"])
    cfg["m"] = int(cfg["m"])
    for key in ("mu", "sigma2", "w"):
        cfg[key] = _numbers(cfg[key])
    for key in ("c", "s_max"):
        cfg[key] = float(cfg[key])
    cfg["delta"] = "auto" if cfg["delta"] == "auto" else float(cfg["delta"])
    return cfg


def params_from(cfg: dict) -> tuple[GameParams, PriceVector]:
    try:
        p = GameParams.create(
            n=cfg["n"], m=cfg["m"], mu=cfg["mu"], sigma2=cfg["sigma2"], c=cfg["c"],
            delta=None if cfg["delta"] == "auto" else cfg["delta"], s_max=cfg["s_max"],
        )
        w = PriceVector.of(cfg["w"], p.m)
    except ShapeMismatch as e:
        raise CliError("ShapeMismatch", str(e), 1)
    if len(w) != p.m:
        raise CliError("ShapeMismatch", f"{len(w)} prices for m={p.m} suppliers", 1)
    return p, w


def content_hash(cfg: dict) -> str:
    """Git blob hash of the canonical JSON encoding of ``cfg``."""
    body = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


def _require_valid(p: GameParams, w: Optional[PriceVector] = None, sampling: bool = False):
    rep = validate_params(p, w, sampling)
    if not rep.passed:
        raise CliError("ValidationFailed", "; ".join(rep.violations), 1)


# ---------------------------------------------------------------- commands


def cmd_equilibrium(cfg: dict, args) -> dict:
    p, w = params_from(cfg)
    _require_valid(p, w)
    eq = greedy_equilibrium(p, w, packing=args.packing)
    out = eq.to_dict()
    wb = expected_welfare(eq.network, p, w)
    out["welfare"] = wb.total
    out["welfare_breakdown"] = wb.to_dict()
    if args.verify:
        out["verification"] = verify_retailer_nash(eq.network, p, w, args.oracle).to_dict()
    return out


def cmd_planner(cfg: dict, args) -> dict:
    p, _ = params_from(cfg)
    _require_valid(p)
    sol = planner_optimum(p)
    out = sol.to_dict()
    k_enum, w_enum = planner_enumerate(p)
    out["K_enum"] = k_enum
    out["welfare_enum"] = w_enum
    return out


def cmd_prices(cfg: dict, args) -> dict:
    p, _ = params_from(cfg)
    _require_valid(p)
    fn = {
        "homogeneous": homogeneous_price_equilibrium,
        "hetero_variance": hetero_variance_prices,
        "hetero_mean": hetero_mean_prices,
    }[p.case]
    pe = fn(p)
    out = pe.to_dict()
    if args.check_deviations:
        out["deviation_check"] = supplier_price_deviation_check(p, pe.w_star, args.resolution).to_dict()
    return out


def cmd_verify(cfg: dict, args) -> dict:
    p, w = params_from(cfg)
    _require_valid(p, w)
    if "network" in cfg:
        g = Network.from_dict(cfg["network"])
    else:
        g = greedy_equilibrium(p, w).network
    if g.n != p.n or g.m != p.m:
        raise CliError("ShapeMismatch", f"network is {g.n}x{g.m}, game is {p.n}x{p.m}", 1)
    out = verify_retailer_nash(g, p, w, args.oracle).to_dict()
    out["selected"] = selection_filter(p, g, w)
    out["K"] = g.K
    out["links"] = g.size
    return out


def cmd_montecarlo(cfg: dict, args) -> dict:
    p, w = params_from(cfg)
    _require_valid(p, w, sampling=True)
    eq = greedy_equilibrium(p, w)
    inst = Instance(p, eq.network, w)
    targets = ["welfare.retailer", "welfare.supplier", "welfare.consumer", "welfare.total"]
    if eq.network.size:
        targets += ["retailer_payoff[0]"]
    families = FAMILIES if args.family == "all" else (args.family,)
    reports = []
    for fam in families:
        try:
            reports += validate_many(targets, inst, args.draws, args.seed, fam)
        except InfeasibleMoments as e:
            raise CliError("InfeasibleMoments", str(e), 1)
    return {
        "K": eq.K,
        "links": eq.links,
        "reports": [r.to_dict() for r in reports],
        "passed": all(r.passed for r in reports),
    }


def sweep_point(cfg: dict) -> dict:
    """Closed-form metrics for one homogeneous parameter point.

    Metrics are reported even when the population is too small for the
    equilibrium to exist; ``note`` names the shortfall and ``verified`` is
    left empty in that case.
    """
    try:
        p, _ = params_from(cfg)
        _require_valid(p)
        if not p.homogeneous:
            raise CliError("ShapeMismatch", "sweeps need identical suppliers", 1)
    except CliError as e:
        return {"status": "skip", "reason": e.kind}
    mu, s2 = p.mu[0], p.sigma2[0]
    z = equilibrium_z(mu, s2, p.delta, p.c)
    y = planner_y(mu, s2, p.delta, p.c)
    K = tol.floor(z)
    d = tol.floor(1 + mu**2 * tol.frac(z) / p.c)
    K_opt = max(tol.floor(y), 0)
    w_eq = zero_price_welfare(mu, s2, p.delta, p.c)
    w_opt = planner_welfare_closed(mu, s2, p.delta, p.c)
    notes = []
    if p.m <= K:
        notes.append("insufficient_suppliers")
    if p.n < K * d:
        notes.append("insufficient_retailers")
    if K_opt > min(p.n, p.m):
        notes.append("boundary_optimum")
    verified = ""
    if not notes:
        w0 = PriceVector.zeros(p.m)
        g = characterized_network(p, w0, K)
        verified = verify_retailer_nash(g, p, w0, "characterized").certified
    return {
        "status": "ok",
        "reason": "",
        "note": ";".join(notes),
        "delta": p.delta,
        "z": z,
        "y": y,
        "K_star": K,
        "K_opt": K_opt,
        "d": d,
        "welfare_eq": w_eq,
        "welfare_opt": w_opt,
        "pos": pos_closed(mu, s2, p.delta, p.c) if w_opt > 0 else "",
        "verified": verified,
    }


def _grid(args) -> list:
    count = int(tol.snap((args.stop - args.start) / args.step)) + 1
    vals = [round(args.start + k * args.step, 12) for k in range(count)]
    if args.vary in ("m", "n"):
        vals = [int(round(v)) for v in vals]
    return vals


def cmd_sweep(cfg: dict, args) -> list:
    metrics = args.metrics.split(",") if args.metrics else list(SWEEP_METRICS)
    unknown = set(metrics) - set(SWEEP_METRICS)
    if unknown:
        raise CliError("BadMetric", f"unknown metrics {sorted(unknown)}", 1)
    cfg["sweep"] = {"vary": args.vary, "start": args.start, "stop": args.stop,
                    "step": args.step, "metrics": metrics}
    base = dict(cfg)
    base.pop("sweep")
    cfg.pop(args.vary, None)
    points = []
    for v in _grid(args):
        pc = dict(base)
        pc[args.vary] = v
        points.append(pc)
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            results = list(ex.map(sweep_point, points))
    else:
        results = [sweep_point(pc) for pc in points]
    cols = ["index", args.vary, "delta", "z", "y", *metrics, "verified", "status", "reason", "note"]
    rows = []
    for k, (pc, res) in enumerate(zip(points, results)):
        row = {c: res.get(c, "") for c in cols}
        row["index"] = k
        row[args.vary] = pc[args.vary]
        rows.append(row)
    return [cols, rows]


# ---------------------------------------------------------------- plumbing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with parameter values")
    common.add_argument("--n", type=int, help="number of retailers")
    common.add_argument("--m", type=int, help="number of suppliers")
    common.add_argument("--mu", help="mean supply (scalar or comma list)")
    common.add_argument("--sigma2", help="supply variance (scalar or comma list)")
    common.add_argument("--c", type=float, help="link cost")
    common.add_argument("--delta", help="demand intercept, or 'auto' for m * s_max")
    common.add_argument("--s-max", dest="s_max", type=float, help="supplier capacity")
    common.add_argument("--w", help="prices (scalar or comma list)")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--oracle", choices=("exhaustive", "characterized"), default="exhaustive")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--draws", type=int, default=100_000)

    parser = argparse.ArgumentParser(prog="supplynet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("equilibrium", parents=[common], help="greedy network equilibrium")
    p.add_argument("--packing", action="store_true", help="reuse retailers across suppliers")
    p.add_argument("--verify", action="store_true", help="also run the retailer verifier")
    sub.add_parser("planner", parents=[common], help="central planner optimum")
    p = sub.add_parser("prices", parents=[common], help="strategic price equilibrium")
    p.add_argument("--check-deviations", action="store_true")
    p.add_argument("--resolution", type=float, default=1e-3)
    p = sub.add_parser("verify", parents=[common], help="check a network for profitable deviations")
    p.add_argument("--network", help="network JSON file (n, m, links)")
    p = sub.add_parser("montecarlo", parents=[common], help="validate closed forms by simulation")
    p.add_argument("--family", choices=(*FAMILIES, "all"), default="all")
    p = sub.add_parser("sweep", parents=[common], help="closed-form metrics over a parameter grid")
    p.add_argument("--vary", choices=("mu", "sigma2", "m", "c", "delta"), required=True)
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--metrics", help=f"comma list from {','.join(SWEEP_METRICS)}")
    p.add_argument("--jobs", type=int, default=1)
    return parser


COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "planner": cmd_planner,
    "prices": cmd_prices,
    "verify": cmd_verify,
    "montecarlo": cmd_montecarlo,
    "sweep": cmd_sweep,
}


def _csv_text(cols, rows, header_lines) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    wr = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    wr.writeheader()
    for r in rows:
        wr.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


def run(argv=None) -> tuple[int, str]:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command in ("montecarlo",):
            cfg["seed"] = args.seed
            cfg["draws"] = args.draws
        result = COMMANDS[args.command](cfg, args)
    except CliError as e:
        return e.code, _error(e.kind, str(e), e.code)
    except (InsufficientRetailers, InsufficientSuppliers, SizeLimit, BoundaryOptimum) as e:
        return 2, _error(type(e).__name__, str(e), 2)
    except (ShapeMismatch, InfeasibleMoments, ValueError) as e:
        return 1, _error(type(e).__name__, str(e), 1)

    digest = content_hash(cfg)
    fmt = args.format or ("csv" if args.command == "sweep" else "json")
    if args.command == "sweep":
        cols, rows = result
        if fmt == "csv":
            cfg_line = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
            return 0, _csv_text(cols, rows, [f"config: {cfg_line}", f"input_hash: {digest}"])
        result = {"columns": cols, "rows": rows}
    if fmt == "csv":
        flat = _flatten(result)
        return 0, _csv_text(list(flat), [flat], [f"input_hash: {digest}"])
    doc = {"command": args.command, "config": cfg, "input_hash": digest, "result": result}
    return 0, json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _error(kind: str, message: str, code: int) -> str:
    return json.dumps({"error": kind, "message": message, "exit_code": code}, sort_keys=True) + "\n"


def main(argv=None) -> int:
    code, text = run(argv)
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
