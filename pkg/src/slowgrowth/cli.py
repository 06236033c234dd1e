"""Command-line front end: ``slowgrowth <command> [options]``.

Exit status 0 means every asserted check passed, 2 that a mathematical
check failed (the report carries the witness), 1 a usage or runtime error.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import io
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .approximation import (build_fk, energy_convergence_check, ftilde_upper_bound_check, k_sweep,
                            perturbation_h, sample_ball)
from .apriori import (g1g2_integral_check, growth_callables, interpolation_refinement, lemmapaolo_check,
                      saddle, scaling_study, spike)
from .ellipticity import ExponentSet, analyze, iteration_schedule, sample_growth_bounds, sobolev_exponent
from .grid import GridFunction, write_grid
from .integrands import catalog_entries, parse_integrand
from .reports import csv_table, write_report
from .solver import ConvergenceError, discretize, minimize

EXIT_OK, EXIT_ERROR, EXIT_CHECK = 0, 1, 2
COMMANDS = ("catalog", "analyze", "approx", "solve", "scale", "lemmas")
OUT_ENV = "SLOWGROWTH_OUT"
SECTION = "slowgrowth"


@dataclass
class RunConfig:
    command: str = "catalog"
    integrand: str = "power_regularized(p=1.5)"
    n: int | None = None
    grid_n: int = 64
    tol: float = 1e-8
    mu: float | None = None
    beta: float | None = None
    alpha: float | None = None
    rho: float = 0.15
    outer_r: float = 0.35
    scale: float = 1.0
    scales: str = "4,5.6568542494923806,8,11.313708498984761,16,22.627416997969522,32,45.254833995939045,64"
    ks: str = "2,4,8,16,32"
    eps: str = "0.2,0.1,0.05,0.025"
    t_max: float = 1e4
    n_dirs: int = 256
    seed: int = 0
    workers: int = 1
    out: str = ""

    def float_list(self, name: str):
        return [float(v) for v in getattr(self, name).split(",") if v.strip()]

    def resolved_out(self) -> str:
        return self.out or os.environ.get(OUT_ENV, "") or "slowgrowth_out"

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp[SECTION] = {k: "" if v is None else str(v) for k, v in dataclasses.asdict(self).items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def report_config(self) -> dict:
        # the output directory is left out so reports do not depend on where they are written
        d = dataclasses.asdict(self)
        d.pop("out")
        return d


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw):
    if raw is None:
        return None
    kind = _FIELDS[name].type
    if raw == "":
        return None if "None" in kind else ("" if kind == "str" else None)
    if "int" in kind and "float" not in kind:
        return int(raw)
    if "float" in kind:
        return float(raw)
    return str(raw)


def load_config(path: str | None, overrides: dict) -> RunConfig:
    cfg = RunConfig()
    if path:
        cp = configparser.ConfigParser()
        if not cp.read(path):
            raise FileNotFoundError(f"config file {path!r} not found")
        if SECTION not in cp:
            raise ValueError(f"config file {path!r} has no [{SECTION}] section")
        for key, raw in cp[SECTION].items():
            if key not in _FIELDS:
                raise ValueError(f"unknown config key {key!r}")
            val = _coerce(key, raw)
            if val is not None or "None" in _FIELDS[key].type:
                setattr(cfg, key, val)
    for key, val in overrides.items():
        if val is not None:
            setattr(cfg, key, val)
    if cfg.command not in COMMANDS:
        raise ValueError(f"unknown command {cfg.command!r}")
    if cfg.grid_n < 8:
        raise ValueError("grid_n must be >= 8")
    if not 0 < cfg.rho < cfg.outer_r < 0.5:
        raise ValueError("need 0 < rho < outer_r < 1/2")
    return cfg


def _file_sets_command(path: str | None) -> bool:
    if not path:
        return False
    cp = configparser.ConfigParser()
    cp.read(path)
    return bool(cp.get(SECTION, "command", fallback=""))


def _check(name: str, passed: bool, **info) -> dict:
    return {"name": name, "passed": bool(passed), **info}


# ---------------------------------------------------------------------------
# Commands


def cmd_catalog(cfg: RunConfig):
    rows = [{"name": name, "parameters": list(keys), "description": desc} for name, keys, desc in catalog_entries()]
    for r in rows:
        print(f"{r['name']:<22} {','.join(r['parameters']):<12} {r['description']}")
    return {"entries": rows}, [], {}


def _theta_for(f, cfg, n):
    if f.exponents is not None and f.exponents[0] > 1:
        p, q = f.exponents
        return ExponentSet(n, p, q).theta_pq
    return analyze(f, n=n, mu=cfg.mu, beta=cfg.beta, alpha=cfg.alpha, t_max=cfg.t_max,
                   n_dirs=cfg.n_dirs, seed=cfg.seed).theta


def cmd_analyze(cfg: RunConfig):
    f = parse_integrand(cfg.integrand)
    rep = analyze(f, n=cfg.n, mu=cfg.mu, beta=cfg.beta, alpha=cfg.alpha, t_max=cfg.t_max,
                  n_dirs=cfg.n_dirs, seed=cfg.seed)
    doc = rep.to_dict()
    checks = [_check(k, v.passed, condition=v.condition) for k, v in sorted(rep.verdicts.items())]
    app = f.corollary
    if app and app in rep.corollary:
        v = rep.corollary[app]
        checks.append(_check(f"corollary_{app}", v.passed, condition=v.condition, detail=v.detail))
    print(f"{rep.spec}: theta={rep.theta:.6g} " + " ".join(f"{c['name']}={'ok' if c['passed'] else 'FAIL'}" for c in checks))
    return doc, checks, {}


def cmd_approx(cfg: RunConfig):
    f = parse_integrand(cfg.integrand)
    n = f.dim(cfg.n if cfg.n is not None else (None if f.n is not None else 2))
    ks = [int(k) for k in cfg.float_list("ks")]
    sweep = k_sweep(f, ks, n=n, seed=cfg.seed)
    # bit-exact agreement outside B_(t0+2)
    far = sample_ball(n, 200, f.t0 + 5, cfg.seed + 1)
    far = far[np.linalg.norm(far, axis=1) >= f.t0 + 2]
    fk = build_fk(f, ks[-1], n=n)
    exact = bool(np.array_equal(fk.eval(far), f.eval(far)))
    h, dh, d2h = perturbation_h(1.0)
    junction = max(abs(float(h) - 1), abs(float(dh) - 1), abs(float(d2h)))
    ft = ftilde_upper_bound_check(f, ks[-1], n=n, n_dirs=min(cfg.n_dirs, 128), seed=cfg.seed)
    checks = [
        _check("fk_exact_outside", exact, points=int(far.shape[0])),
        _check("fk_gap_threshold", sweep.k_star_gap is not None, k_star_gap=sweep.k_star_gap),
        _check("h_junction", junction <= 1e-12, error=junction),
        _check("ftilde_upper_bound", ft["passed"], **{k: v for k, v in ft.items() if k != "passed"}),
    ]
    doc = {"integrand": f.spec_string, "n": n, "ks": ks, "sup_diff": list(sweep.sup_diff),
           "min_eig": list(sweep.min_eig), "k_star_gap": sweep.k_star_gap,
           "k_star_convex": sweep.k_star_convex, "quad_nodes": list(sweep.quad_nodes)}
    tables = {"ksweep": csv_table(["k", "sup_diff", "min_eig"], zip(ks, sweep.sup_diff, sweep.min_eig))}
    if n == 2:
        u = GridFunction.from_function(lambda x, y: cfg.scale * saddle(x, y) + np.abs(x - 0.5), cfg.grid_n)
        eps = cfg.float_list("eps")
        tab = energy_convergence_check(f, u, cfg.rho, eps)
        gaps = [r[3] for r in tab.rows]
        checks.append(_check("jensen_dominance", tab.dominance_ok, worst_excess=tab.worst_excess))
        checks.append(_check("gap_decreasing", all(b < a for a, b in zip(gaps, gaps[1:])), gaps=gaps))
        doc["energy_table"] = [list(r) for r in tab.rows]
        tables["energy"] = tab.csv()
    print(f"{f.spec_string}: k*_gap={sweep.k_star_gap} k*_convex={sweep.k_star_convex}")
    return doc, checks, tables


def cmd_solve(cfg: RunConfig):
    f = parse_integrand(cfg.integrand)
    prob = discretize(f, lambda x, y: cfg.scale * saddle(x, y), cfg.grid_n)
    res = minimize(prob, tol=cfg.tol, radii=(cfg.rho, cfg.outer_r))
    out = cfg.resolved_out()
    os.makedirs(out, exist_ok=True)
    write_grid(os.path.join(out, "solve.grid.txt"), res.u,
               {"N": cfg.grid_n, "domain": "[0,1]^2", "integrand": f.spec_string, "tol": cfg.tol, "scale": cfg.scale})
    sup = res.sup_grad[cfg.rho]
    mean = res.local_mean[(cfg.rho, cfg.outer_r)]
    doc = {"integrand": f.spec_string, "N": cfg.grid_n, "energy": res.energy, "iterations": res.iterations,
           "residual": res.residual, "sup_grad": sup, "local_mean": mean, "grid_file": "solve.grid.txt"}
    descent = all(b <= a for a, b in zip(res.energy_history, res.energy_history[1:]))
    checks = [_check("converged", res.converged, residual=res.residual),
              _check("energy_descent", descent)]
    print(f"{f.spec_string}: energy={res.energy:.12g} sup_grad={sup:.6g} iterations={res.iterations}")
    return doc, checks, {}


def cmd_scale(cfg: RunConfig):
    f = parse_integrand(cfg.integrand)
    theta = _theta_for(f, cfg, 2)
    st = scaling_study(f, theta, scales=cfg.float_list("scales"), rho=cfg.rho, R=cfg.outer_r, N=cfg.grid_n, tol=cfg.tol,
                       workers=cfg.workers)
    doc = {"integrand": f.spec_string, "theta": theta, "fitted_slope": st.fitted_slope, "fitted_C": st.fitted_C,
           "scales": list(st.scales), "sup_grads": list(st.sup_grads), "means": list(st.means),
           "slope_tol": st.slope_tol}
    checks = [_check("bound_at_every_scale", st.bound_holds),
              _check("slope_below_theta", st.slope_ok, slope=st.fitted_slope, theta=theta),
              _check("fitted_C_finite", math.isfinite(st.fitted_C))]
    print(f"{f.spec_string}: slope={st.fitted_slope:.4f} theta={theta:.4f} C={st.fitted_C:.4g}")
    return doc, checks, {"scaling": st.csv()}


SCHEDULE_CASES = ((3, 0.4), (3, 0.5), (4, 0.3))
SPIKE_GAMMAS = (1.0, 2.0, 4.0, 8.0)
INTERP_THETA = 2.0
INTERP_LAMBDAS = (0.95, 0.9, 0.8, 0.7, 0.6, 0.55)


def cmd_lemmas(cfg: RunConfig):
    checks, doc, tables = [], {}, {}
    sched = []
    for n, beta in SCHEDULE_CASES:
        s = iteration_schedule(n, beta)
        agree = float(np.max(np.abs(s.recursion - s.closed_form) / np.abs(s.closed_form)))
        lim_err = abs(s.normalized[-1] - (2 - n * beta))
        sched.append({"n": n, "beta": beta, "two_star": s.two_star, "limit": s.limit,
                      "normalized_last": float(s.normalized[-1]), "agreement": agree, "admissible": s.admissible})
        checks.append(_check(f"schedule_n{n}_b{beta}", agree <= 1e-9 and lim_err <= 1e-6,
                             agreement=agree, limit_error=lim_err))
    doc["schedules"] = sched

    fam = [spike(g) for g in SPIKE_GAMMAS]
    runs, drift = interpolation_refinement(fam, INTERP_THETA, INTERP_LAMBDAS)
    fine = runs[-1]
    doc["interpolation"] = {"theta_cap": INTERP_THETA, "lambdas": list(INTERP_LAMBDAS), "gammas": list(SPIKE_GAMMAS),
                            "premise_c": fine.premise_c, "c_lambda": list(fine.conclusion_c), "drift": drift,
                            "monotone_growth": fine.monotone_growth, "N": [r.N for r in runs]}
    checks.append(_check("interpolation_uniform_c", fine.finite and drift < 0.05, drift=drift))

    lp = lemmapaolo_check()
    checks.append(_check("lemmapaolo_bounded", lp.passed, sup_c=lp.extra["sup_c"], oracle_error=lp.oracle_error))
    doc["lemmapaolo"] = {"alphas": list(lp.parameters), "c": list(lp.constants), "oracle_error": lp.oracle_error}
    tables["lemmapaolo"] = lp.csv()

    n = 2
    beta = 0.5
    ts = sobolev_exponent(n, beta)
    one = lambda t: 1.0  # noqa: E731
    gg = g1g2_integral_check(one, one, beta, ts, oracle=True)
    checks.append(_check("g1g2_oracle", gg.passed, inf_C3=gg.extra["inf_C3"], oracle_error=gg.oracle_error))
    doc["g1g2_oracle"] = {"gammas": list(gg.parameters), "C3": list(gg.constants), "oracle_error": gg.oracle_error}
    tables["g1g2"] = gg.csv()
    if cfg.integrand:
        f = parse_integrand(cfg.integrand)
        fn = f.dim(cfg.n if cfg.n is not None else (None if f.n is not None else 2))
        rep = analyze(f, n=fn, mu=cfg.mu, beta=cfg.beta, alpha=cfg.alpha, t_max=cfg.t_max,
                      n_dirs=cfg.n_dirs, seed=cfg.seed)
        samples = sample_growth_bounds(f, np.geomspace(f.t0 + 1.0, max(cfg.t_max, 100 * (f.t0 + 1.0)), 120),
                                       cfg.n_dirs, cfg.seed, fn)
        g1, g2 = growth_callables(samples)
        gi = g1g2_integral_check(g1, g2, rep.params["beta"], rep.params["two_star"])
        checks.append(_check("g1g2_integrand", gi.passed, inf_C3=gi.extra["inf_C3"]))
        doc["g1g2_integrand"] = {"integrand": f.spec_string, "gammas": list(gi.parameters), "C3": list(gi.constants)}
    print(" ".join(f"{c['name']}={'ok' if c['passed'] else 'FAIL'}" for c in checks))
    return doc, checks, tables


HANDLERS = {"catalog": cmd_catalog, "analyze": cmd_analyze, "approx": cmd_approx, "solve": cmd_solve,
            "scale": cmd_scale, "lemmas": cmd_lemmas}


def run(cfg: RunConfig) -> int:
    try:
        doc, checks, tables = HANDLERS[cfg.command](cfg)
    except ConvergenceError as exc:
        doc, checks, tables = {"error": str(exc)}, [_check("solver_converged", False, detail=str(exc))], {}
    passed = all(c["passed"] for c in checks)
    report = {"version": __version__, "command": cfg.command, "config": cfg.report_config(),
              "result": doc, "checks": checks, "passed": passed}
    path = write_report(cfg.resolved_out(), cfg.command, report, tables)
    print(f"report: {path}")
    return EXIT_OK if passed else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slowgrowth", description=__doc__.splitlines()[0])
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--config", help="INI file with a [slowgrowth] section")
    p.add_argument("--print-config", action="store_true", help="print the resolved configuration and exit")
    p.add_argument("--version", action="version", version=__version__)
    for name, fld in _FIELDS.items():
        if name == "command":
            continue
        flag = "--" + name.replace("_", "-")
        p.add_argument(flag, dest=name, default=None, help=f"(default: {fld.default})")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        overrides = {k: _coerce(k, getattr(args, k)) for k in _FIELDS if k != "command"}
        overrides["command"] = args.command
        cfg = load_config(args.config, overrides)
        if args.print_config:
            sys.stdout.write(cfg.to_ini())
            return EXIT_OK
        if args.command is None and not _file_sets_command(args.config):
            parser.print_usage(sys.stderr)
            print("slowgrowth: error: a command is required", file=sys.stderr)
            return EXIT_ERROR
        return run(cfg)
    except (ValueError, FileNotFoundError, OSError) as exc:
        print(f"slowgrowth: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
