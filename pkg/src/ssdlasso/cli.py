"""Command-line interface: eval, sym, construct, hils, simulate.

Every run writes its result files plus a ``*.manifest.json`` recording the
fully resolved configuration, seed, tool version, input digests, and wall
time. Result files contain no timestamps, so re-running an identical
invocation reproduces them byte for byte.

Exit codes: 0 success, 2 malformed input, 3 infeasible request, 4 internal
error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .design import Design, load_design_csv, save_design_csv, standardize
from .errors import (
    ColumnBudget,
    DegenerateK,
    DegenerateSupport,
    EmptyPool,
    EmptySupportSet,
    InfeasibleConstraints,
    InputError,
    InvalidC,
    OddN,
    SingularCA,
    SsdLassoError,
    TooManyBlocks,
    TooManySigns,
)
from .construct import (
    ExchangeConfig,
    HilsConfig,
    block_construction,
    exchange_ue2,
    exchange_vars_plus,
    hils,
    nbibd_supports,
)
from .lasso import SimConfig, simulate_sign_recovery
from .mvn import QmcConfig
from .recovery import (
    Phi_lambda,
    SignVectorSet,
    SupportSet,
    criterion_curve,
    phi_Lambda,
    phi_lambda,
    phi_max,
    Scenario,
)
from .symmetric import SymScenario, contour_grid, optimize_c, theorem3_regions

_INFEASIBLE = (
    ColumnBudget,
    DegenerateK,
    DegenerateSupport,
    EmptyPool,
    EmptySupportSet,
    InfeasibleConstraints,
    InvalidC,
    OddN,
    SingularCA,
    TooManyBlocks,
    TooManySigns,
)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _manifest(out_dir: Path, command: str, config: dict, inputs: list[str], t0: float) -> None:
    payload = {
        "command": command,
        "config": config,
        "tool_version": __version__,
        "input_digests": {p: _sha256(Path(p)) for p in inputs},
        "duration_seconds": round(time.time() - t0, 3),
    }
    _write_json(out_dir / f"{command}.manifest.json", payload)


def _qmc_config(args) -> QmcConfig:
    return QmcConfig(
        sample_budget=args.budget,
        randomizations=args.randomizations,
        seed=args.seed,
    )


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--budget", type=int, default=4096, help="QMC points per randomization")
    sp.add_argument("--randomizations", type=int, default=8)
    sp.add_argument("--threads", type=int, default=None, help="worker cap (default: cores)")
    sp.add_argument("--out-dir", type=Path, default=Path("."))


def _parse_supports(args, p: int, k: int) -> SupportSet:
    if args.supports == "exhaustive":
        return SupportSet.exhaustive(p, k)
    if args.supports == "nbibd":
        return nbibd_supports(p, k, args.nbibd_blocks, args.seed)
    sups = json.loads(Path(args.supports).read_text())
    return SupportSet.explicit(sups)


def _parse_signset(args, k: int) -> SignVectorSet | None:
    if args.sign_mode == "known":
        return None
    if args.sign_mode == "all":
        return SignVectorSet.all_half(k)
    if not args.signs:
        raise InputError("sign_mode 'custom' needs --signs")
    vectors = [
        tuple(int(t) for t in v.split(",")) for v in args.signs.split(";")
    ]
    return SignVectorSet.custom(vectors)


_EVAL_REQUEST_KEYS = {
    "design_path": "design",
    "lambda": "lam",
    "k": "k",
    "beta": "beta",
    "sign_mode": "sign_mode",
    "signs": "signs",
    "supports": "supports",
    "nbibd_blocks": "nbibd_blocks",
    "lambda_range": "lambda_range",
    "summary": "summary",
    "seed": "seed",
    "budget": "budget",
    "step": "step",
    "epsilon": "epsilon",
    "zstar": "zstar",
    "curve_out": "curve_out",
}


def _cmd_eval(args) -> int:
    t0 = time.time()
    if args.config:
        req = json.loads(Path(args.config).read_text())
        for key, val in req.items():
            if key not in _EVAL_REQUEST_KEYS:
                raise InputError(f"unknown request field {key!r}")
            if val is not None:
                setattr(args, _EVAL_REQUEST_KEYS[key], val)
    if args.design is None:
        raise InputError("--design (or a config with design_path) is required")
    design = load_design_csv(args.design)
    std = standardize(design)
    k = args.k
    config = _qmc_config(args)
    if args.zstar:
        zstar = np.array([int(t) for t in args.zstar.split(",")], dtype=int)
        design = design.flip_columns(zstar)
        std = standardize(design)
    signset = _parse_signset(args, k)
    supports = _parse_supports(args, design.p, k)
    out_dir = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    ev = criterion_curve(std, k, args.beta, supports, signset, config, args.threads)
    diag = {"singular_supports": ev.singular_supports}
    lambdas = _lambda_grid(args)
    result: dict = {"design": str(args.design), "k": k, "beta": args.beta}
    if args.summary == "fixed":
        if len(lambdas) == 1:
            cv = Phi_lambda(std, k, args.beta, float(lambdas[0]), supports, signset, config, args.threads)
            result.update(
                value=cv.value, p_s=cv.p_s, p_i=cv.p_i, std_error=cv.std_error,
                lambda_at=float(lambdas[0]),
            )
            diag = cv.diagnostics
        else:
            c = ev.curve(lambdas)
            best = int(np.argmax(c["value"]))
            result.update(
                value=float(c["value"][best]),
                p_s=float(c["p_s"][best]),
                p_i=float(c["p_i"][best]),
                std_error=float(c["std_error"][best]),
                lambda_at=float(lambdas[best]),
            )
    elif args.summary == "max":
        cv = phi_max(ev, (np.log(lambdas[0]), np.log(lambdas[-1])), max(8, args.grid_points))
        result.update(
            value=cv.value, p_s=cv.p_s, p_i=cv.p_i,
            std_error=cv.std_error, lambda_at=cv.lambda_at,
        )
    else:
        cv = phi_Lambda(ev, float(np.log(lambdas[0])), args.step, args.epsilon,
                        float(np.log(lambdas[-1])))
        result.update(value=cv.value, std_error=cv.std_error)
    result["diagnostics"] = diag
    if args.curve_out:
        c = ev.curve(lambdas)
        lines = ["log_lambda,value,p_s,p_i"]
        for lam, v, ps, pi in zip(lambdas, c["value"], c["p_s"], c["p_i"]):
            lines.append(f"{np.log(lam):.10g},{v:.10g},{ps:.10g},{pi:.10g}")
        (out_dir / args.curve_out).write_text("\n".join(lines) + "\n")
    _write_json(out_dir / "eval.json", result)
    _manifest(out_dir, "eval", _jsonable(vars(args)), [str(args.design)], t0)
    return 0


def _lambda_grid(args) -> np.ndarray:
    if args.lam is not None:
        return np.asarray([args.lam], dtype=float)
    lo, hi, m = args.lambda_range
    return np.exp(np.linspace(np.log(lo), np.log(hi), int(m)))


def _jsonable(d: dict) -> dict:
    out = {}
    for key, val in d.items():
        if callable(val):
            continue
        if isinstance(val, Path):
            out[key] = str(val)
        elif isinstance(val, (list, tuple)):
            out[key] = [str(x) if isinstance(x, Path) else x for x in val]
        else:
            out[key] = val
    return out


def _cmd_sym(args) -> int:
    t0 = time.time()
    out_dir = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    config = _qmc_config(args)
    q = args.q if args.q is not None else args.p - args.k
    rows = contour_grid(
        args.n, args.k, q, args.beta, args.sign_mode,
        tuple(args.c_range), tuple(args.loglambda_range), args.resolution, config,
    )
    lines = ["c,log_lambda,value"] + [f"{c:.10g},{w:.10g},{v:.10g}" for c, w, v in rows]
    (out_dir / "sym_contour.csv").write_text("\n".join(lines) + "\n")
    opt = optimize_c(
        args.n, args.k, q, args.beta, args.sign_mode, args.summary,
        config=config, log_lambda_range=tuple(args.loglambda_range),
    )
    try:
        regions = theorem3_regions(args.n, args.k, q, args.beta, tuple(args.loglambda_range))
    except DegenerateK:
        regions = []
    _write_json(
        out_dir / "sym_summary.json",
        {
            "c_star": opt.c_star,
            "value": opt.value,
            "condition_regions": [[a, b] for a, b in regions],
            "starts": [list(s) for s in opt.starts],
        },
    )
    _manifest(out_dir, "sym", _jsonable(vars(args)), [], t0)
    return 0


def _cmd_construct(args) -> int:
    t0 = time.time()
    out_dir = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.objective == "block":
        if args.k is None or args.k1 is None:
            raise InputError("block construction needs --k and --k1")
        design = block_construction(args.n, args.k, args.k1)
    else:
        cfg = ExchangeConfig(
            starts=args.starts,
            seed=args.seed,
            ue2_efficiency_floor=args.eff_floor,
            ue_s_floor=args.ues_floor,
            ue2_reference=args.ue2_reference,
        )
        if args.p is None:
            raise InputError("exchange construction needs --p")
        if args.objective == "ue2":
            design = exchange_ue2(args.n, args.p, cfg)
        else:
            design = exchange_vars_plus(args.n, args.p, cfg)
    save_design_csv(design, out_dir / args.out)
    _manifest(out_dir, "construct", _jsonable(vars(args)), [], t0)
    return 0


def _cmd_hils(args) -> int:
    t0 = time.time()
    out_dir = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    raw = json.loads(Path(args.config).read_text())
    raw.setdefault("seed", args.seed)
    if "extra_design_paths" in raw:
        raw["extra_design_paths"] = tuple(raw["extra_design_paths"])
    for tup_key in ("eff_floors", "ues_floors", "log_lambda_range"):
        if tup_key in raw:
            raw[tup_key] = tuple(raw[tup_key])
    cfg = HilsConfig(workers=args.threads, **raw)
    report = hils(cfg)
    save_design_csv(report.winner, out_dir / "winner.csv")
    _write_json(
        out_dir / "hils_report.json",
        {
            "winner_value": report.winner_value.value,
            "winner_std_error": report.winner_value.std_error,
            "winner_lambda_at": report.winner_value.lambda_at,
            "ue2_reference": report.ue2_reference,
            "candidates": list(report.candidate_table),
        },
    )
    _manifest(out_dir, "hils", _jsonable(vars(args)), [str(args.config)], t0)
    return 0


def _cmd_simulate(args) -> int:
    t0 = time.time()
    out_dir = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    design = load_design_csv(args.design)
    support = tuple(int(t) for t in args.support.split(","))
    signs = (
        np.array([int(t) for t in args.signs.split(",")], dtype=int)
        if args.signs
        else np.ones(len(support), dtype=int)
    )
    sim = SimConfig(replications=args.reps, seed=args.seed, lam=args.lam)
    res = simulate_sign_recovery(design, support, signs, args.beta, sim)
    std = standardize(design)
    sc = Scenario(support, args.beta, signs, args.lam)
    analytic = phi_lambda(std, sc, _qmc_config(args))
    width = res.ci_high - res.ci_low
    agree = abs(res.value - analytic.value) <= 3.0 * (width / 2 + 3 * analytic.std_error)
    _write_json(
        out_dir / "simulate.json",
        {
            "empirical": res.value,
            "ci_low": res.ci_low,
            "ci_high": res.ci_high,
            "analytic": analytic.value,
            "analytic_std_error": analytic.std_error,
            "agree": bool(agree),
        },
    )
    _manifest(out_dir, "simulate", _jsonable(vars(args)), [str(args.design)], t0)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ssdlasso", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("eval", help="evaluate a sign-recovery criterion for a design")
    ev.add_argument("--design", type=Path)
    ev.add_argument("--config", type=Path, help="JSON request; flags override")
    ev.add_argument("--k", type=int, default=2)
    ev.add_argument("--beta", type=float, default=1.0)
    ev.add_argument("--sign-mode", choices=["known", "all", "custom"], default="known")
    ev.add_argument("--signs", help="custom sign vectors 'z1,z2;z1,z2;...'")
    ev.add_argument("--zstar", help="prior sign vector applied by flipping design columns")
    ev.add_argument("--supports", default="exhaustive", help="exhaustive | nbibd | JSON path")
    ev.add_argument("--nbibd-blocks", type=int, default=96)
    ev.add_argument("--lam", type=float, help="single lambda (summary 'fixed')")
    ev.add_argument("--lambda-range", type=float, nargs=3, metavar=("LO", "HI", "POINTS"),
                    default=(np.exp(-5.0), np.exp(2.0), 101))
    ev.add_argument("--summary", choices=["fixed", "max", "integral"], default="fixed")
    ev.add_argument("--grid-points", type=int, default=65)
    ev.add_argument("--step", type=float, default=0.02)
    ev.add_argument("--epsilon", type=float, default=1e-6)
    ev.add_argument("--curve-out", help="also write the per-lambda curve CSV")
    _add_common(ev)
    ev.set_defaults(func=_cmd_eval)

    sy = sub.add_parser("sym", help="completely symmetric criterion: contours and optimal c")
    sy.add_argument("--n", type=int, required=True)
    sy.add_argument("--k", type=int, required=True)
    sy.add_argument("--p", type=int)
    sy.add_argument("--q", type=int)
    sy.add_argument("--beta", type=float, required=True)
    sy.add_argument("--sign-mode", choices=["known", "all"], default="known")
    sy.add_argument("--summary", choices=["max", "integral"], default="integral")
    sy.add_argument("--c-range", type=float, nargs=2, default=(-0.1, 0.6))
    sy.add_argument("--loglambda-range", type=float, nargs=2, default=(-5.0, 5.0))
    sy.add_argument("--resolution", type=int, default=41)
    _add_common(sy)
    sy.set_defaults(func=_cmd_sym)

    co = sub.add_parser("construct", help="build a design")
    co.add_argument("--objective", choices=["ue2", "varsplus", "block"], required=True)
    co.add_argument("--n", type=int, required=True)
    co.add_argument("--p", type=int)
    co.add_argument("--k", type=int, help="active columns (block)")
    co.add_argument("--k1", type=int, help="columns from the first block column")
    co.add_argument("--starts", type=int, default=50)
    co.add_argument("--eff-floor", type=float)
    co.add_argument("--ues-floor", type=float)
    co.add_argument("--ue2-reference", type=float)
    co.add_argument("--out", default="design.csv")
    _add_common(co)
    co.set_defaults(func=_cmd_construct)

    hi = sub.add_parser("hils", help="run the heuristic-initiated lasso sieve")
    hi.add_argument("--config", type=Path, required=True, help="HilsConfig JSON")
    _add_common(hi)
    hi.set_defaults(func=_cmd_hils)

    si = sub.add_parser("simulate", help="empirical sign-recovery probability")
    si.add_argument("--design", type=Path, required=True)
    si.add_argument("--support", required=True, help="comma-separated 0-based indices")
    si.add_argument("--signs", help="comma-separated +-1, defaults to all +1")
    si.add_argument("--beta", type=float, default=1.0)
    si.add_argument("--lam", type=float, required=True)
    si.add_argument("--reps", type=int, default=10000)
    _add_common(si)
    si.set_defaults(func=_cmd_simulate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except _INFEASIBLE as exc:
        print(f"infeasible request: {exc}", file=sys.stderr)
        return 3
    except (InputError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except SsdLassoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
