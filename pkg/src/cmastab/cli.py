"""Command-line front end.

    cmastab exponents --n 2 --eps 0.1
    cmastab sharpness --alpha 0.1 --B 3.6 --D 3.5
    cmastab solve --N 16 --background cosine --density trig
    cmastab stability --family trig --N 16
    cmastab properties --N 16 --pairs 10
    cmastab capacity --N 16
    cmastab egz --s 2 --p 2

Outputs (CSV, JSON summary, optional PNG) go to --output, or to
$CMASTAB_OUTPUT_ROOT/<command>, or ./cmastab_output/<command>.
Exit codes: 0 success, 2 invalid input, 3 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import io
from .exponents import ExponentError

log = logging.getLogger("cmastab")

EXIT_OK, EXIT_INVALID, EXIT_NONCONV = 0, 2, 3

COMMON = {"seed": 0, "plot": False, "output": None}

DEFAULTS = {
    "exponents": {"n": 2, "eps": 0.1, "k_max": 200, "delta0": None, "chi": None, "m": 2.0, "p": 2.0, "s": 2.0},
    "sharpness": {"n": 2, "alpha": 0.1, "B": 3.6, "D": 3.5, "count": 5, "h_start": -3.0, "check": False},
    "solve": {
        "N": 16, "background": "flat", "c": 1.0, "density": "trig", "amplitude": 0.5, "gamma": 1.0,
        "tol": 1e-8, "max_sweeps": 50_000, "omega": 1.0,
    },
    "stability": {
        "N": 16, "background": "flat", "c": 1.0, "family": "trig", "eps": 0.1, "theta_min": 1e-3,
        "theta_max": 1e-1, "count": 6, "s": 2.0, "tol": 1e-8, "max_sweeps": 50_000, "omega": 1.5,
    },
    "properties": {
        "N": 16, "background": "flat", "c": 1.0, "pairs": 10, "mixed_samples": 100_000,
        "tol": 1e-8, "max_sweeps": 50_000, "omega": 1.5,
    },
    "capacity": {"N": 16, "background": "flat", "c": 1.0, "radii": None, "min_decades": 1.0, "tol": 1e-10},
    "egz": {
        "N": 16, "background": "flat", "c": 1.0, "family": "trig", "eps": 0.1, "theta_min": 1e-3,
        "theta_max": 1e-1, "count": 6, "s": 2.0, "p": 2.0, "tol": 1e-8, "max_sweeps": 50_000, "omega": 1.5,
    },
}


class NonConvergence(RuntimeError):
    pass


# --- config resolution ----------------------------------------------------------


def resolve_config(args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags < --set-json."""
    cmd = args.command
    cfg = dict(COMMON)
    cfg.update(DEFAULTS[cmd])
    if args.config:
        cfg.update(io.load_config(args.config))
    for key in list(cfg):
        val = getattr(args, key, None)
        if val is not None and not (key == "plot" and val is False):
            cfg[key] = val
    if args.set_json:
        cfg.update(io.parse_json_override(args.set_json))
    unknown = set(cfg) - set(COMMON) - set(DEFAULTS[cmd])
    if unknown:
        raise io.ConfigError(f"unknown keys for {cmd}: {sorted(unknown)}")
    cfg["command"] = cmd
    validate(cfg)
    return cfg


def _need(cond, msg):
    if not cond:
        raise io.ConfigError(msg)


def validate(cfg: dict) -> None:
    """Module preconditions, checked before any computation."""
    cmd = cfg["command"]
    if "n" in cfg:
        _need(isinstance(cfg["n"], int) and cfg["n"] >= 2,
              f"n >= 2 integer required (n = 1 is the Laplacian case), got {cfg['n']}")
    if "eps" in cfg:
        _need(cfg["eps"] >= 0 if cmd == "exponents" else cfg["eps"] > 0, f"eps out of range: {cfg['eps']}")
    if "N" in cfg:
        _need(isinstance(cfg["N"], int) and cfg["N"] >= 8 and cfg["N"] % 2 == 0, f"N must be even and >= 8, got {cfg['N']}")
    if "background" in cfg:
        _need(cfg["background"] in ("flat", "cosine"), f"unknown background {cfg['background']!r}")
        _need(0 <= cfg["c"] <= 1, f"cosine parameter c must lie in [0, 1], got {cfg['c']}")
    for key in ("tol",):
        if key in cfg:
            _need(cfg[key] > 0, f"{key} must be positive")
    if "max_sweeps" in cfg:
        _need(int(cfg["max_sweeps"]) >= 1, "max_sweeps must be >= 1")
    if "omega" in cfg:
        _need(0 < cfg["omega"] < 2, f"relaxation factor must lie in (0, 2), got {cfg['omega']}")
    if cmd == "exponents":
        _need(cfg["k_max"] >= 1, "k_max must be >= 1")
        _need(cfg["delta0"] is None or cfg["delta0"] >= 0, "delta0 must be >= 0")
        _need(cfg["chi"] is None or cfg["chi"] > 0, "chi must be positive")
        _need(cfg["m"] > 0, "m must be positive")
        _need(cfg["p"] > 1 and cfg["s"] > 0, "need p > 1 and s > 0")
    if cmd == "sharpness":
        from .radial import RadialProfile, validate_profile

        chk = validate_profile(RadialProfile(cfg["B"], cfg["D"], cfg["alpha"], cfg["n"]))
        _need(chk.ok, "invalid profile: " + "; ".join(chk.violations))
        _need(cfg["count"] >= 5, "sharpness needs at least 5 translations (one decade)")
    if cmd in ("stability", "egz"):
        _need(cfg["family"] in ("trig", "peak", "indicator"), f"unknown family {cfg['family']!r}")
        _need(0 < cfg["theta_min"] < cfg["theta_max"], "need 0 < theta_min < theta_max")
        _need(np.log10(cfg["theta_max"] / cfg["theta_min"]) >= 1.5, "theta schedule must span >= 1.5 decades")
        _need(cfg["count"] >= 5, "need at least 5 theta values")
        _need(cfg["s"] > 0, "s must be positive")
    if cmd == "egz":
        _need(cfg["p"] > 1, "p must exceed 1")
    if cmd == "properties":
        _need(cfg["pairs"] >= 1 and cfg["mixed_samples"] >= 1, "pairs and mixed_samples must be >= 1")
    if cmd == "solve":
        _need(cfg["density"] in ("uniform", "trig", "peak"), f"unknown density {cfg['density']!r}")
        _need(0 <= cfg["amplitude"] < 1, "trig amplitude must lie in [0, 1)")


# --- commands ---------------------------------------------------------------------


def _grid_setup(cfg):
    from .grid import Grid, background, uniform_measure

    grid = Grid(cfg["N"])
    G = background(grid, cfg["background"], cfg["c"])
    return grid, G, uniform_measure(grid)


def _solve_kw(cfg):
    return {"tol": cfg["tol"], "max_sweeps": int(cfg["max_sweeps"]), "omega": cfg["omega"]}


def cmd_exponents(cfg, out):
    from . import exponents as ex

    n, eps, k_max = cfg["n"], cfg["eps"], int(cfg["k_max"])
    if cfg["delta0"] is None:
        deltas = ex.default_deltas(n, eps, k_max)
    else:
        deltas = cfg["delta0"] * 2.0 ** -np.arange(k_max + 1, dtype=float)
    state = ex.RecurrenceState(n, eps, deltas)
    run = ex.beta_sequence(state, k_max)
    alphas = state.alphas()
    rows = [
        {"k": k + 1, "beta": b, "delta": run.deltas[k + 1], "alpha": a}
        for k, (b, a) in enumerate(zip(run.betas, alphas))
    ]
    io.write_csv(out / "beta_sequence.csv", rows)
    kp = ex.KappaParams(n, 1.0, 1.0, ex.GrowthFunction(cfg["m"]))
    krows = []
    for r in np.logspace(-8, 0, 9):
        k = ex.kappa(r, kp)
        krows.append({"r": r, "kappa": k, "kappa_quad": ex.kappa(r, kp, "quad"),
                      "gamma_C1": ex.gamma(k, 1.0, kp)})
    io.write_csv(out / "kappa.csv", krows)
    res = {
        "beta_limit": run.limit,
        "beta_limit_n2_formula": ex.beta_limit_n2_formula(n, eps),
        "final_beta": float(run.betas[-1]),
        "gap": run.gap,
        "iterations": run.iterations,
        "delta0": float(run.deltas[0]),
        "reference_exponents": ex.reference_exponents(n, eps),
        "egz_exponent": ex.egz_exponent(n, cfg["s"], cfg["p"], eps),
        "kappa_power": kp.power,
    }
    if cfg["chi"] is not None:
        cp = ex.ChiParams(n, cfg["chi"])
        cr = ex.chi_beta_sequence(cp, None, k_max)
        res["chi_variant"] = {
            "fixed_point": cr.fixed_point,
            "observed_limit": cr.observed_limit,
            "claimed_denominator": cr.claimed_denominator,
            "exponent": ex.chi_exponent(n, cfg["chi"], eps),
        }
    print(f"n={n} eps={eps}: beta limit A = {run.limit:.12g} (gap {run.gap:.3g} after {run.iterations} steps)")
    for r in rows[:5]:
        print(f"  k={r['k']:3d}  beta={r['beta']:.12f}  delta={r['delta']:.3g}")
    if cfg["plot"]:
        from . import plotting

        plotting.sequence(out / "beta_sequence.png", [r["k"] for r in rows], run.betas, run.limit, "beta_k")
    return res, True


def cmd_sharpness(cfg, out):
    from .radial import RadialProfile, h_schedule, sharpness_report

    p = RadialProfile(cfg["B"], cfg["D"], cfg["alpha"], cfg["n"])
    hs = h_schedule(p.n, cfg["count"], start=cfg["h_start"])
    rep = sharpness_report(p, hs)
    if cfg["check"]:
        from .radial import l1_ma_distance

        for row, h in zip(rep.rows, hs):
            d = l1_ma_distance(p, h, check=True)
            row["middle_check"] = d.middle_check
    io.write_csv(out / "sharpness.csv", rep.rows)
    res = rep.summary()
    res["collar"] = list(p.collar)
    res["density_constant"] = p.density_constant
    print(f"sup slope {rep.fit_sup.slope:.4f} (2 alpha = {2 * p.alpha:.4f}), "
          f"L1 slope {rep.fit_l1.slope:.4f} (2 n alpha = {2 * p.n * p.alpha:.4f}), ratio {rep.ratio:.4f}")
    if cfg["plot"]:
        from . import plotting

        plotting.loglog(
            out / "sharpness.png",
            [("sup", rep.norms, rep.sup, (rep.fit_sup.slope, rep.fit_sup.intercept)),
             ("L1 of MA", rep.norms, rep.l1, (rep.fit_l1.slope, rep.fit_l1.intercept))],
            "|h|", "distance",
        )
    return res, True


def _density(cfg, grid, G, Om):
    from . import checks, solver
    from .grid import random_trig_field

    if cfg["density"] == "uniform":
        f = np.ones(grid.shape)
    elif cfg["density"] == "trig":
        v = random_trig_field(np.random.default_rng(cfg["seed"]), 1.0).values(grid)
        f = 1.0 + cfg["amplitude"] * v / np.abs(v).max()
    else:
        f = checks.peaked_density(grid, cfg["gamma"])
    if cfg["background"] == "cosine":
        f = f * G.det()
    return solver.normalize_density(f, Om, G, grid)


def cmd_solve(cfg, out):
    from . import solver

    grid, G, Om = _grid_setup(cfg)
    f = _density(cfg, grid, G, Om)
    res = solver.solve(f, G, Om, grid, **_solve_kw(cfg))
    io.write_field(out / "u", res.u, {"background": G.family, "background_params": G.params})
    io.write_csv(out / "history.csv", [{"sweep": s, "residual": r} for s, r in res.history])
    d = res.diagnostics()
    d["mass_f"] = grid.integrate(f * Om.weights)
    print(f"sweeps {res.sweeps}, residual {res.residual:.3g}, c {res.solvability:.8f}, "
          f"sup norm {res.sup_norm:.6g}, converged {res.converged}")
    if cfg["plot"]:
        from . import plotting

        plotting.slice_image(out / "u_slice.png", res.u.values[:, :, 0, 0], "u(x1, y1, 0, 0)")
    return d, res.converged


def _family(cfg):
    from .experiments import PerturbationFamily

    th = np.logspace(np.log10(cfg["theta_min"]), np.log10(cfg["theta_max"]), int(cfg["count"]))
    return PerturbationFamily(cfg["family"], tuple(th), seed=cfg["seed"])


def _sweep_outputs(cfg, out, sweep, name, xkey, xlabel):
    io.write_csv(out / f"{name}.csv", [r.as_row() for r in sweep.records])
    res = sweep.summary()
    if sweep.diagnostics:
        io.write_csv(out / f"{name}_proof_sets.csv", sweep.diagnostics)
    if cfg["plot"] and sweep.fit is not None:
        from . import plotting

        ok = [r for r in sweep.records if r.converged]
        plotting.loglog(
            out / f"{name}.png",
            [("d_sup", [getattr(r, xkey) for r in ok], [r.d_sup for r in ok],
              (sweep.fit.slope, sweep.fit.intercept))],
            xlabel, "||phi - psi||_inf",
        )
    converged = all(r.converged for r in sweep.records)
    return res, converged


def cmd_stability(cfg, out):
    from .experiments import run_stability_sweep

    grid, G, Om = _grid_setup(cfg)
    sweep = run_stability_sweep(_family(cfg), G, Om, grid, cfg["eps"], s=cfg["s"], **_solve_kw(cfg))
    res, ok = _sweep_outputs(cfg, out, sweep, "stability", "theta", "||f - g||_1")
    e = sweep.exponent
    print(f"fitted exponent {e if e is None else round(e, 4)}; references "
          + ", ".join(f"{k}={v:.4f}" for k, v in sweep.reference.items()))
    return res, ok


def cmd_egz(cfg, out):
    from .experiments import run_egz_sweep

    grid, G, Om = _grid_setup(cfg)
    sweep = run_egz_sweep(_family(cfg), G, Om, grid, cfg["s"], cfg["p"], cfg["eps"], **_solve_kw(cfg))
    res, ok = _sweep_outputs(cfg, out, sweep, "egz", "d_s", "||phi - psi||_s")
    print(f"fitted exponent {sweep.exponent}; reference s/(nq+s+eps) = {sweep.reference['egz']:.4f}")
    return res, ok


def cmd_properties(cfg, out):
    from . import checks
    from .experiments import property_checks

    grid, G, Om = _grid_setup(cfg)
    recs = property_checks(grid, G, Om, int(cfg["pairs"]), cfg["seed"], **_solve_kw(cfg))
    io.write_csv(out / "properties.csv", [r.as_row() for r in recs])
    A, B = checks.random_psd_pairs(np.random.default_rng(cfg["seed"]), int(cfg["mixed_samples"]))
    D = checks.mixed_determinant(A, B)
    dA = np.linalg.det(A).real
    dB = np.linalg.det(B).real
    slack = D - np.sqrt(np.maximum(dA, 0) * np.maximum(dB, 0))
    res = {
        "pairs": len(recs),
        "comparison_violation_max": max(r.comparison_violation for r in recs),
        "sublevel_violation_max": max(r.sublevel_violation for r in recs),
        "sublevel_ratio_max": max(r.sublevel_lhs / r.sublevel_rhs for r in recs),
        "mixed_violation_max": max(r.mixed_violation for r in recs),
        "matrix_pairs": int(cfg["mixed_samples"]),
        "matrix_min_slack": float(slack.min()),
        "matrix_inequality_holds": bool(slack.min() >= -1e-12),
    }
    print(", ".join(f"{k}={v}" for k, v in res.items()))
    return res, all(r.converged for r in recs)


def cmd_capacity(cfg, out):
    from .capacity import ball, capacity
    from .checks import domination_check
    from .fitting import FitError

    grid, G, Om = _grid_setup(cfg)
    radii = cfg["radii"]
    if radii is None:
        radii = (grid.h * np.array([0.0, 1.0, 1.5, 2.0, 2.5, 3.0])).tolist()
    rows, sets = [], []
    for r in radii:
        K = ball(grid, r)
        sets.append(K)
        rows.append({
            "radius": r,
            "nodes": int(K.sum()),
            "volume": grid.integrate(K.astype(float)),
            "capacity": capacity(K, G, grid, cfg["tol"]),
            "capacity_direct": capacity(K, G, grid, cfg["tol"], method="direct"),
        })
    io.write_csv(out / "capacity.csv", rows)
    res = {"total_mass": grid.integrate(G.det()), "balls": len(rows)}
    try:
        fit = domination_check(Om, G, grid, sets, min_decades=cfg["min_decades"])
        res["domination"] = {"alpha_hat": fit.alpha, "chi_hat": fit.chi, "fit": fit.fit_omega.as_dict()}
    except FitError as exc:
        res["domination"] = {"error": str(exc)}
    for r in rows:
        print(f"  r={r['radius']:.4f}  nodes={r['nodes']:6d}  cap={r['capacity']:.6f}")
    print(f"domination: {res['domination']}")
    if cfg["plot"]:
        from . import plotting

        pos = [r for r in rows if r["capacity"] > 0]
        plotting.loglog(out / "capacity.png", [("Omega(K)", [r["capacity"] for r in pos],
                                                [r["volume"] for r in pos], None)], "cap(K)", "Omega(K)")
    return res, True


COMMANDS = {
    "exponents": cmd_exponents,
    "sharpness": cmd_sharpness,
    "solve": cmd_solve,
    "stability": cmd_stability,
    "properties": cmd_properties,
    "capacity": cmd_capacity,
    "egz": cmd_egz,
}


# --- parser ---------------------------------------------------------------------------


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cmastab", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--set-json", help="JSON object overriding config entries")
        p.add_argument("--output", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--plot", action="store_true", default=None, help="also render PNG figures")
        return p

    def grid_args(p):
        p.add_argument("--N", type=int, help="nodes per real axis")
        p.add_argument("--background", choices=["flat", "cosine"])
        p.add_argument("--c", type=float, help="cosine-degenerate parameter")
        p.add_argument("--tol", type=float)
        p.add_argument("--max-sweeps", dest="max_sweeps", type=int)
        p.add_argument("--omega", type=float, help="relaxation factor (1 = Gauss-Seidel)")

    p = add("exponents", "beta recurrence, its limit, kappa and reference exponents")
    p.add_argument("--n", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--k-max", dest="k_max", type=int)
    p.add_argument("--delta0", type=float, help="delta_k = delta0 2^-k (0 gives delta = 0)")
    p.add_argument("--chi", type=float)
    p.add_argument("--m", type=float, help="growth exponent of Q(y) = y^m")
    p.add_argument("--p", type=float)
    p.add_argument("--s", type=float)

    p = add("sharpness", "radial example: sup and L1 Monge-Ampere distances")
    p.add_argument("--n", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--B", type=float)
    p.add_argument("--D", type=float)
    p.add_argument("--count", type=int)
    p.add_argument("--h-start", dest="h_start", type=float, help="log10 of the smallest |h|")
    p.add_argument("--check", action="store_true", default=None, help="cross-check the collar quadrature")

    p = add("solve", "solve det(G + H u) = c f on the periodic grid")
    grid_args(p)
    p.add_argument("--density", choices=["uniform", "trig", "peak"])
    p.add_argument("--amplitude", type=float)
    p.add_argument("--gamma", type=float)

    for name, help_ in (("stability", "sup distance against ||f - g||_1"),
                        ("egz", "sup distance against the L^s distance")):
        p = add(name, help_)
        grid_args(p)
        p.add_argument("--family", choices=["trig", "peak", "indicator"])
        p.add_argument("--eps", type=float)
        p.add_argument("--theta-min", dest="theta_min", type=float)
        p.add_argument("--theta-max", dest="theta_max", type=float)
        p.add_argument("--count", type=int)
        p.add_argument("--s", type=float)
        if name == "egz":
            p.add_argument("--p", type=float)

    p = add("properties", "comparison, sublevel-capacity and mixed checks on solved pairs")
    grid_args(p)
    p.add_argument("--pairs", type=int)
    p.add_argument("--mixed-samples", dest="mixed_samples", type=int)

    p = add("capacity", "capacities of metric balls and the domination fit")
    p.add_argument("--N", type=int)
    p.add_argument("--background", choices=["flat", "cosine"])
    p.add_argument("--c", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--radii", type=_floats, help="comma-separated radii")
    p.add_argument("--min-decades", dest="min_decades", type=float)
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help, 2 for bad usage
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        out = io.output_dir(cfg["output"], cfg["command"])
    except (io.ConfigError, ExponentError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    from .experiments import InsufficientRecords

    try:
        payload, ok = COMMANDS[cfg["command"]](cfg, out)
    except ExponentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InsufficientRecords as exc:
        # too few converged solves to fit: a non-convergence outcome
        print(f"error: {exc}", file=sys.stderr)
        payload, ok = {"error": str(exc)}, False
    io.write_json(out / "summary.json", io.summary(cfg, payload | {"converged": ok}))
    return EXIT_OK if ok else EXIT_NONCONV


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
