"""Command-line front end: every subcommand writes ``<out>/<name>.csv`` and ``<out>/<name>.json``.

Exit codes: 0 success, 1 a verify criterion failed, 2 configuration error,
3 numerical failure (details in the JSON summary and on stderr).
"""

from __future__ import annotations

import argparse
import itertools
import sys
import time
from pathlib import Path

import numpy as np

from . import branches as br
from . import ids
from .config import ConfigError, RunConfig, load_config
from .errors import DegmagError
from .io import write_csv, write_summary
from .operators import ConstantPotential, ModelParams
from .parallel import default_workers

SUBCOMMANDS = ("branch", "fit-kappa", "fit-decay", "zeros", "perturb", "ids", "weyl", "corr", "sweep",
               "oracle2d", "verify")

BRANCH_COLUMNS = ["eta", "n", "lambda", "err"]
ZERO_COLUMNS = ["eta", "n", "lambda", "err", "order", "slope", "alpha_local", "flagged"]
PERTURB_COLUMNS = ["nu", "l", "omega2", "kappa", "kappa1", "kappa2", "kappa3", "kappa4"]
RECORD_COLUMNS = ["nu", "l", "mu", "h", "W", "tau", "coupling", "regime", "fiber_ids", "weyl", "correction",
                  "remainder_RI", "normalized_remainder", "quadrature_error", "oracle", "discretization_error",
                  "skipped"]
VERIFY_COLUMNS = ["criterion", "tag", "name", "passed", "metric", "value"]


# ------------------------------------------------------------------ helpers


def _workers(cfg: RunConfig) -> int:
    w = cfg.get("run", "workers", 0)
    return default_workers() if w == 0 else int(w)


def _params(cfg: RunConfig, **kw) -> ModelParams:
    p = dict(cfg.section("params"))
    p.update(kw)
    try:
        return ModelParams(int(p["nu"]), int(p["ell"]), float(p["mu"]), float(p["h"]),
                           ConstantPotential(float(p["W"])))
    except (DegmagError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid [params]: {exc}") from exc


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def param_grid(cfg: RunConfig) -> list:
    """ModelParams over ``[grid]``: every (W, coupling, h), with mu = coupling h^-nu."""
    g = cfg.section("grid")
    out = []
    try:
        nu, ell = int(g["nu"]), int(g["ell"])
        for W, c, h in itertools.product(_as_list(g["W"]), _as_list(g["coupling"]), _as_list(g["h"])):
            out.append(ModelParams(nu, ell, float(c) / float(h) ** nu, float(h), ConstantPotential(float(W))))
    except (DegmagError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid [grid]: {exc}") from exc
    if not out:
        raise ConfigError("[grid] is empty")
    return out


def _cutoff(knots, name: str):
    if not knots:
        return None
    if len(knots) != 4:
        raise ConfigError(f"ids.{name} needs 4 knots (lo, plateau_lo, plateau_hi, hi) or []")
    try:
        return ids.Bump(*map(float, knots))
    except (DegmagError, ValueError) as exc:
        raise ConfigError(f"ids.{name}: {exc}") from exc


def _psi(cfg: RunConfig) -> ids.CutoffSpec:
    s = cfg.section("ids")
    psi2 = _cutoff(s["psi2"], "psi2")
    if psi2 is None:
        raise ConfigError("ids.psi2 must be a bounded cutoff")
    return ids.CutoffSpec(_cutoff(s["psi1"], "psi1"), psi2)


def _W(p: ModelParams) -> float:
    return float(p.W(np.array([0.0]))[0])


def _record_row(p: ModelParams, tau: float, **vals) -> list:
    nan = float("nan")
    row = {"nu": p.nu, "l": p.ell, "mu": p.mu, "h": p.h, "W": _W(p), "tau": tau, "coupling": p.coupling,
           "regime": p.regime(), "skipped": ""}
    row.update(vals)
    return [row.get(c, nan) for c in RECORD_COLUMNS]


def _eta(section: dict, geometric: bool = False) -> np.ndarray:
    f = br.eta_grid_geometric if geometric else br.eta_grid_uniform
    return f(float(section["eta_lo"]), float(section["eta_hi"]), int(section["eta_n"]))


def _branch_rows(b: br.EigenBranch) -> list:
    return [[float(e), n, float(b.values[n, j]), float(b.error_estimates[n, j])]
            for j, e in enumerate(b.eta_grid) for n in range(b.n_branches)]


# -------------------------------------------------------------- subcommands


def cmd_branch(cfg):
    s = cfg.section("branch")
    b = br.trace_branches(_params(cfg), _eta(s), int(s["n_branches"]), float(s["rtol"]), _workers(cfg),
                          ppl=float(s["ppl"]), pad=float(s["pad"]))
    return BRANCH_COLUMNS, _branch_rows(b), {"flags": {k: v for k, v in b.flags.items() if k != "noise_floor"}}


def cmd_fit_kappa(cfg):
    s = cfg.section("fit_kappa")
    p = _params(cfg)
    eta = _eta(s, geometric=True)
    b = br.trace_branches(p, eta, p.ell + 1, workers=_workers(cfg), ppl=float(s["ppl"]))
    f = br.fit_power_law(b, p.ell, (eta[0], eta[-1]))
    target = br.kappa_target(p.nu, p.ell)
    fit = {"coefficient": f.coefficient, "exponent": f.exponent, "target_coefficient": target,
           "target_exponent": -2.0 / p.nu, "max_relative_residual": f.max_relative_residual}
    return BRANCH_COLUMNS, _branch_rows(b), {"fit": fit}


def cmd_fit_decay(cfg):
    s = cfg.section("fit_decay")
    p = _params(cfg)
    b = br.trace_branches(p, _eta(s), 1, workers=_workers(cfg), pad=float(s["pad"]))
    f = br.fit_exponential_decay(b, tuple(s["window"]) if s.get("window") else None)
    fit = {"exponent": f.exponent, "coefficient": f.coefficient, "offset": f.offset, "eps": f.eps_lower,
           "C": f.C_upper, "monotone": f.monotone, "stencil_spread": f.stencil_spread, "points": f.n_points}
    return BRANCH_COLUMNS, _branch_rows(b), {"fit": fit}


def cmd_zeros(cfg):
    s = cfg.section("zeros")
    b = br.trace_branches(_params(cfg), _eta(s), int(s["n_branches"]), workers=_workers(cfg))
    rows = []
    for z in br.detect_zeros(b):
        res, _ = br.solve_point(b.params, z.eta_bar, z.branch + 1, b.settings)
        rows.append([z.eta_bar, z.branch, float(res.values[z.branch]), float(res.error_estimates[z.branch]),
                     z.order_r, z.slope, z.alpha_local, z.flagged])
    extra = {"crossings": len(rows), "continuity_violations": len(br.continuity_violations(b))}
    return ZERO_COLUMNS, rows, extra


def cmd_perturb(cfg):
    from .perturbation import derivative_coeffs, perturbation_result

    s = cfg.section("perturb")
    rows = []
    for nu in _as_list(s["nu"]):
        for ell in _as_list(s["ell"]):
            r = perturbation_result(int(nu), int(ell))
            d = derivative_coeffs(int(nu), int(ell))
            rows.append([nu, ell, str(r.omega2), r.kappa, str(d.kappa1), str(d.kappa2), str(d.kappa3), d.kappa4])
    return PERTURB_COLUMNS, rows, {}


def _ids_task(args):
    kind, p, psi, s = args
    tau = float(s["tau"])
    if kind == "ids":
        f = ids.fiber_ids(p, psi, tau)
        return _record_row(p, tau, fiber_ids=f.value, quadrature_error=f.error), {}
    if kind == "weyl":
        w = ids.weyl_ids(p, psi, tau, float(s["cut_constant"]))
        return _record_row(p, tau, weyl=w.value), {"lpm_form": w.lpm_value, "cut_radius": w.cut_radius}
    c = ids.correction_term(p, psi.psi2, float(s["x1_extent"]), tau, float(s["cut_constant"]))
    return (_record_row(p, tau, fiber_ids=c.fiber, weyl=c.weyl, correction=c.value, quadrature_error=c.error),
            {"cut_radius": c.cut_radius})


def _ids_like(kind):
    def cmd(cfg):
        from .parallel import parallel_map

        s, psi = cfg.section("ids"), _psi(cfg)
        out = parallel_map(_ids_task, [(kind, p, psi, s) for p in param_grid(cfg)], _workers(cfg))
        return RECORD_COLUMNS, [o[0] for o in out], {"points": [o[1] for o in out]}

    return cmd


def cmd_sweep(cfg):
    s = cfg.section("sweep")
    L2 = float(s["x2_length"])
    spec = ids.OracleSpec(float(s["y1_half"]), float(s["y2_half"]), int(s["n1"]), int(s["n2"]),
                          L2 if L2 > 0 else None, s["scheme"], s["mode"])
    tau = float(s["tau"])
    recs = ids.remainder_sweep(param_grid(cfg), spec, tau, _workers(cfg))
    rows = [_record_row(r.params, tau, fiber_ids=r.fiber_ids, remainder_RI=r.remainder_RI,
                        normalized_remainder=r.normalized_remainder, quadrature_error=r.quadrature_error,
                        oracle=r.oracle, discretization_error=r.discretization_error, skipped=r.skipped)
            for r in recs]
    return RECORD_COLUMNS, rows, {"boxes": [list(r.box) for r in recs]}


def cmd_oracle2d(cfg):
    from .oracle2d import Box2D, build_2d, count_below_2d_interval

    s = cfg.section("oracle2d")
    p = _params(cfg)
    tau = float(s["tau"])
    try:
        box = Box2D(*map(float, s["x1"]), *map(float, s["x2"]), int(s["n1"]), int(s["n2"]))
    except (DegmagError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid [oracle2d] box: {exc}") from exc
    ci = count_below_2d_interval(build_2d(p, box, s["scheme"]), tau)
    psi = ids.CutoffSpec(None, ids.Indicator(box.x2_min, box.x2_max))
    f = ids.fiber_ids(p, psi, tau, ids.FiberSetup(x1_grid=box.grid1, x2_spacing=box.grid2.spacing,
                                                   x2_scheme=s["scheme"]))
    row = _record_row(p, tau, fiber_ids=f.value, quadrature_error=f.error, oracle=float(ci.value),
                      remainder_RI=abs(ci.value - f.value))
    return RECORD_COLUMNS, [row], {"count_interval": [ci.lo, ci.hi], "dim": box.dim}


def cmd_verify(cfg, quick=False):
    from . import verify

    only = _as_list(cfg.get("verify", "only", []))
    results = verify.run_suite(quick, only, _workers(cfg), report=lambda r: print(verify.format_line(r),
                                                                                 flush=True))
    rows = []
    for r in results:
        items = list(r.metrics.items()) or [("", "")]
        for k, v in items:
            rows.append([r.id, r.tag, r.name, r.passed, k, v])
    extra = {"criteria": {r.id: {"passed": r.passed, "detail": r.detail, "runtime_s": r.runtime}
                          for r in results},
             "passed": all(r.passed for r in results)}
    return VERIFY_COLUMNS, rows, extra


COMMANDS = {"branch": cmd_branch, "fit-kappa": cmd_fit_kappa, "fit-decay": cmd_fit_decay, "zeros": cmd_zeros,
            "perturb": cmd_perturb, "ids": _ids_like("ids"), "weyl": _ids_like("weyl"),
            "corr": _ids_like("corr"), "sweep": cmd_sweep, "oracle2d": cmd_oracle2d, "verify": cmd_verify}


# --------------------------------------------------------------------- run


def run(subcommand: str, cfg: RunConfig, quick: bool = False) -> int:
    if subcommand not in COMMANDS:
        print(f"unknown subcommand {subcommand!r}", file=sys.stderr)
        return 2
    out = Path(cfg.get("run", "out", "out"))
    name = subcommand.replace("-", "_")
    t = time.perf_counter()
    try:
        if subcommand == "verify":
            columns, rows, extra = cmd_verify(cfg, quick)
        else:
            columns, rows, extra = COMMANDS[subcommand](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        write_summary(out / f"{name}.json", subcommand, cfg.to_json(), "config_error",
                      {"hash": cfg.hash, "detail": str(exc), "timings": {"total_s": time.perf_counter() - t}})
        return 2
    except (DegmagError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure in {subcommand}: {type(exc).__name__}: {exc}", file=sys.stderr)
        write_summary(out / f"{name}.json", subcommand, cfg.to_json(), "numerical_failure",
                      {"hash": cfg.hash, "detail": f"{type(exc).__name__}: {exc}",
                       "timings": {"total_s": time.perf_counter() - t}})
        return 3
    write_csv(out / f"{name}.csv", columns, rows, cfg.hash, subcommand)
    failed = subcommand == "verify" and not extra.get("passed", True)
    status = "failed" if failed else "ok"
    write_summary(out / f"{name}.json", subcommand, cfg.to_json(), status,
                  {"hash": cfg.hash, "rows": len(rows), "timings": {"total_s": time.perf_counter() - t}, **extra})
    return 1 if failed else 0


def _set_override(text: str) -> dict:
    from .config import _parse_literal

    key, sep, value = text.partition("=")
    parts = key.split(".")
    if not sep or len(parts) != 2 or not all(parts):
        raise ConfigError(f"--set expects section.key=value, got {text!r}")
    return {parts[0]: {parts[1]: _parse_literal(value)}}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="degmag", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="TOML config file")
    ap.add_argument("--out", help="output directory (overrides run.out)")
    ap.add_argument("--workers", type=int, help="worker processes, 0 = all cores (overrides run.workers)")
    ap.add_argument("--quick", action="store_true", help="verify: run only the quick subset")
    ap.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                    help="override one config key; repeatable")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        over: dict = {}
        for s in args.set:
            for sec, kv in _set_override(s).items():
                over.setdefault(sec, {}).update(kv)
        run_over = {}
        if args.out is not None:
            run_over["out"] = args.out
        if args.workers is not None:
            run_over["workers"] = args.workers
        if run_over:
            over.setdefault("run", {}).update(run_over)
        cfg = load_config(args.config, over)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run(args.subcommand, cfg, args.quick)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
