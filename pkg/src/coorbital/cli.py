"""Command-line surface: every computation emits plot-ready CSV or JSON with
the run configuration embedded, cached by a hash of (config, schema)."""

import argparse
import hashlib
import io
import json
import math
import os
import subprocess
import sys
import tempfile

import numpy as np

from . import __version__, pendulum
from ._engine import engine_name
from .charts import MassParam
from .equilibria import locate_L3, find_critical_points
from .flow import FlowConfig, DEFAULT_FLOW
from .manifolds1d import (SECTIONS, fit_theta_A, splitting_distance,
                          law_distance, SplittingSample)
from .charts import ChartState

SCHEMA_VERSION = 1


def _config_hash(cfg: dict) -> str:
    blob = json.dumps({"schema": SCHEMA_VERSION, **cfg}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _cache_dir(args):
    if getattr(args, "cache_dir", None):
        return args.cache_dir
    return os.environ.get("COORBITAL_CACHE_DIR")


def cache_lookup(args, cfg, suffix):
    """Path of the cached artifact for this config, or None on a miss."""
    cdir = _cache_dir(args)
    if cdir is None or getattr(args, "no_cache", False):
        return None, None
    os.makedirs(cdir, exist_ok=True)
    key = _config_hash(cfg)
    path = os.path.join(cdir, f"{key}{suffix}")
    if os.path.exists(path):
        try:
            with open(path, "rb") as f:
                return path, f.read()
        except OSError:
            try:
                os.remove(path)     # corrupted entry: evict
            except OSError:
                pass
    return path, None


def cache_store(path, data: bytes):
    if path is None:
        return
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path))
    with os.fdopen(fd, "wb") as f:
        f.write(data)
    os.replace(tmp, path)           # atomic publish


def _emit(args, cfg, suffix, render):
    """Cache-aware emission: render() -> bytes on a miss."""
    path, hit = cache_lookup(args, cfg, suffix)
    data = hit if hit is not None else render()
    if hit is None:
        cache_store(path, data)
    out = getattr(args, "csv", None) or getattr(args, "json", None)
    if out:
        with open(out, "wb") as f:
            f.write(data)
    else:
        sys.stdout.write(data.decode())
    return 0


def _csv_header(cfg, columns):
    buf = io.StringIO()
    buf.write("# config_hash=%s schema=%d config=%s\n"
              % (_config_hash(cfg), SCHEMA_VERSION, json.dumps(cfg, sort_keys=True)))
    buf.write(",".join(columns) + "\n")
    return buf


def _parse_mu_args(args):
    if getattr(args, "mu_list", None):
        return [float(x) for x in args.mu_list.split(",")]
    if getattr(args, "mu_range", None):
        parts = args.mu_range.split(":")
        lo, hi = float(parts[0]), float(parts[1])
        n = int(parts[2]) if len(parts) > 2 else 12
        return list(np.geomspace(lo, hi, n))
    raise SystemExit("give --mu-list or --mu-range lo:hi[:n]")


def _flow_config(args):
    kw = {}
    if getattr(args, "rtol", None):
        kw["rtol"] = args.rtol
        kw["atol"] = args.rtol
    return FlowConfig(**kw) if kw else DEFAULT_FLOW


# ----------------------------------------------------------------------

def cmd_equilibria(args):
    cfg = {"cmd": "equilibria", "mu": args.mu}
    rec = locate_L3(MassParam(args.mu))
    mu = args.mu
    payload = {
        "config": cfg,
        "schema": SCHEMA_VERSION,
        "cartesian": list(rec.cartesian.vec),
        "polar": list(rec.polar.vec),
        "poincare": list(rec.poincare.vec),
        "scaled": list(rec.scaled.vec),
        "eigenvalues": [[v.real, v.imag] for v in rec.eigvals],
        "nu_hyp": rec.nu_hyp,
        "nu_ell": rec.nu_ell,
        "d_mu": rec.d_mu,
        "expansion_residuals": {
            "d_mu_minus_series": rec.d_mu - 1.0 - (5.0 / 12.0) * mu,
            "nu_hyp_over_sqrt_mu_minus_series":
                rec.nu_hyp / math.sqrt(mu) - math.sqrt(21.0 / 8.0),
            "nu_ell_minus_series": rec.nu_ell - 1.0 - (7.0 / 8.0) * mu,
        },
    }
    return _emit(args, cfg, ".json",
                 lambda: (json.dumps(payload, indent=1) + "\n").encode())


def cmd_separatrix(args):
    cfg = {"cmd": "separatrix", "u_max": args.u_max, "n": args.n}

    def render():
        A1 = pendulum.constant_A()
        A2 = pendulum.constant_A_tanh_sinh()
        buf = _csv_header(cfg, ["u_scaled_time", "lambda_p_rad", "Lambda_p"])
        for u in np.linspace(-args.u_max, args.u_max, args.n):
            p = pendulum.separatrix(u)
            buf.write("%.17g,%.17g,%.17g\n" % (u, p.lambda_p, p.Lambda_p))
        sys.stderr.write("A = %.12f (substitution), %.12f (tanh-sinh)\n"
                         % (A1, A2))
        return buf.getvalue().encode()

    return _emit(args, cfg, ".csv", render)


def cmd_splitting(args):
    mus = _parse_mu_args(args)
    cfg = {"cmd": "splitting", "mus": mus, "section": args.section,
           "lambda_star": args.lambda_star, "rtol": args.rtol}
    fcfg = _flow_config(args)

    def render():
        from dataclasses import replace
        cols = ["mu", "distance", "x_diff_re", "x_diff_im", "lambda_diff",
                "Lambda_diff", "energy_mismatch"]
        buf = _csv_header(cfg, cols)
        for mu in mus:
            s = splitting_distance(MassParam(mu), args.section,
                                   args.lambda_star,
                                   config=replace(fcfg, energy_drift_bound=None))
            xr = s.x_diff.real if s.x_diff is not None else math.nan
            xi = s.x_diff.imag if s.x_diff is not None else math.nan
            buf.write("%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n" % (
                mu, s.distance, xr, xi,
                s.lambda_diff if s.lambda_diff is not None else math.nan,
                s.Lambda_diff if s.Lambda_diff is not None else math.nan,
                s.energy_mismatch))
        return buf.getvalue().encode()

    return _emit(args, cfg, ".csv", render)


def cmd_fit(args):
    rows = []
    section = None
    with open(args.csv_in) as f:
        for line in f:
            if line.startswith("#"):
                meta = json.loads(line.split("config=", 1)[1])
                section = meta.get("section")
                continue
            if line.startswith("mu,"):
                continue
            vals = [float(x) for x in line.split(",")]
            rows.append(vals)
    if section is None:
        section = args.section
    samples = []
    dummy_mp = None
    for vals in rows:
        mu, dist, xr, xi = vals[0], vals[1], vals[2], vals[3]
        mp = MassParam(mu)
        dummy = ChartState("scaled", np.zeros(4), mp)
        xd = None if math.isnan(xr) else complex(xr, xi)
        samples.append(SplittingSample(mu, section, None, dummy, dummy,
                                       dist, xd, None, None, 0.0))
    fit = fit_theta_A(samples)
    cfg = {"cmd": "fit", "section": section, "n": len(samples)}
    payload = {"config": cfg, "schema": SCHEMA_VERSION,
               "A_fit": fit.A_fit, "absTheta_fit": fit.absTheta_fit,
               "residuals": list(fit.residuals), "mus": list(fit.mus)}
    data = (json.dumps(payload, indent=1) + "\n").encode()
    out = getattr(args, "json", None)
    if out:
        with open(out, "wb") as f:
            f.write(data)
    else:
        sys.stdout.write(data.decode())
    return 0


def cmd_lyapunov(args):
    from .lyapunov import solve_orbit_fourier, solve_orbit_shooting, floquet
    mp = MassParam(args.mu)
    cfg = {"cmd": "lyapunov", "mu": args.mu, "rho": args.rho,
           "energy": args.energy, "method": args.method}

    def render():
        payload = {"config": cfg, "schema": SCHEMA_VERSION}
        rho = args.rho
        orb = None
        if args.method in ("fourier", "both"):
            orb = solve_orbit_fourier(rho, mp) if rho else None
            if orb is None:
                raise SystemExit("fourier method needs --rho")
            fl = floquet(orb)
            payload["fourier"] = {
                "omega": orb.omega, "energy": orb.energy,
                "period_scaled": orb.period_scaled,
                "n_grid": orb.n_grid,
                "multipliers": [[v.real, v.imag] for v in fl.multipliers],
                "lambda_hyp": fl.lam_h,
                "monodromy_det_error": fl.det_error,
            }
        if args.method in ("shooting", "both"):
            sh = solve_orbit_shooting(mp, energy=args.energy, rho=rho)
            payload["shooting"] = {
                "rho": sh.rho, "energy": sh.energy,
                "period_scaled": sh.period_scaled,
                "closure_error": sh.closure_error,
                "state0_scaled": list(sh.state0),
            }
        if args.samples_csv and orb is not None:
            buf = _csv_header(cfg, ["tau_rad", "lambda_rad", "Lambda_",
                                    "x_re", "x_im"])
            taus, states = orb.sample(args.n_samples)
            for t, y in zip(taus, states):
                buf.write("%.17g,%.17g,%.17g,%.17g,%.17g\n"
                          % (t, y[0], y[1], y[2], y[3]))
            with open(args.samples_csv, "w") as f:
                f.write(buf.getvalue())
        return (json.dumps(payload, indent=1) + "\n").encode()

    return _emit(args, cfg, ".json", render)


def cmd_curves(args):
    from .lyapunov import solve_orbit_fourier
    from .manifolds2d import section_curve
    mp = MassParam(args.mu)
    cfg = {"cmd": "curves", "mu": args.mu, "rho": args.rho,
           "n_tau": args.n_tau}

    def render():
        orbit = solve_orbit_fourier(args.rho, mp)
        cols = ["branch", "tau_rad", "valid", "hit_time_scaled",
                "lambda_rad", "Lambda_", "x_re", "x_im"]
        buf = _csv_header(cfg, cols)
        for br in ("u", "s"):
            c = section_curve(orbit, br, n_tau=args.n_tau)
            for i in range(c.taus.size):
                buf.write("%s,%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n" % (
                    br, c.taus[i], int(c.valid[i]), c.hit_times[i],
                    c.hits[i, 0], c.hits[i, 1], c.hits[i, 2], c.hits[i, 3]))
        return buf.getvalue().encode()

    return _emit(args, cfg, ".csv", render)


def cmd_tangency(args):
    from .manifolds2d import find_tangency
    mp = MassParam(args.mu)
    cfg = {"cmd": "tangency", "mu": args.mu, "n_tau": args.n_tau}

    def render():
        rep = find_tangency(mp, n_tau=args.n_tau)
        payload = {
            "config": cfg, "schema": SCHEMA_VERSION,
            "rho_min": rep.rho_min,
            "tangency_point": [rep.point.real, rep.point.imag],
            "tau_u_star": rep.tau_u_star,
            "quadratic_coefficient": rep.quad_coeff,
            "quadratic_fit_residual": rep.quad_residual,
            "unfolding_speed": rep.unfolding_speed,
            "absTheta_from_rho_min": rep.absTheta_from_rho_min,
            "theta_fit": rep.theta_fit,
        }
        return (json.dumps(payload, indent=1) + "\n").encode()

    return _emit(args, cfg, ".json", render)


def cmd_reconnect(args):
    from .reconnect import find_mu_sequence, asymptotic_check, verify_two_round
    parts = args.mu_range.split(":")
    lo, hi = float(parts[0]), float(parts[1])
    cfg = {"cmd": "reconnect", "lo": lo, "hi": hi, "scan": args.scan,
           "verify": bool(args.verify)}

    def render():
        roots = find_mu_sequence(lo, hi, args.scan)
        try:
            table = asymptotic_check(roots)
        except ValueError:
            table = [{"n": -1, "mu": r.mu, "product": math.nan,
                      "passage_time": r.passage_time} for r in roots]
        cols = ["n", "mu", "normalized_product", "passage_time_scaled",
                "spacing_ratio", "gap_slope", "reentry", "junction",
                "n_components"]
        buf = _csv_header(cfg, cols)
        for root, row in zip(roots, table):
            re_entry = junction = math.nan
            ncomp = -1
            if args.verify:
                rep = verify_two_round(MassParam(root.mu), root)
                re_entry, junction, ncomp = rep.re_entry, rep.junction, \
                    rep.n_components
            buf.write("%d,%.12g,%.8g,%.8g,%.8g,%.6g,%.3g,%.3g,%d\n" % (
                row["n"], row["mu"], row.get("product", math.nan),
                row["passage_time"], row.get("spacing_ratio", math.nan),
                root.gap_slope, re_entry, junction, ncomp))
        if args.trajectories:
            os.makedirs(args.trajectories, exist_ok=True)
            from .flow import integrate
            from dataclasses import replace as _rep
            from .manifolds1d import seed_manifold, BranchId
            for root, row in zip(roots, table):
                mp = MassParam(root.mu)
                seed = seed_manifold(mp, BranchId("u", "+"), 1e-8)
                traj = integrate(seed, (0.0, root.t_symmetry),
                                 _rep(DEFAULT_FLOW, energy_drift_bound=None),
                                 via_cartesian=True, allow_partial=True)
                traj.to_csv(os.path.join(
                    args.trajectories, f"homoclinic_n{row['n']}.csv"),
                    header_extra=f"mu={root.mu:.12g}")
        return buf.getvalue().encode()

    return _emit(args, cfg, ".csv", render)


_BENCH_SNIPPET = r"""
import sys, time
sys.path.insert(0, {src!r})
import numpy as np
from coorbital import _kernels as K, _rk as R
from coorbital._engine import engine_name
mu = 0.01; delta = mu ** 0.25
y0 = np.array([-0.97, 0.3, -0.3, -0.95])
R.dop853_integrate(K.FID_CART, mu, delta, 0.0, y0, 1.0,
                   1e-12, 1e-12, np.inf, 0.0, 200000, 1e-8, 0.05, 8.0, 1)
t0 = time.perf_counter()
for _ in range({repeat}):
    R.dop853_integrate(K.FID_CART, mu, delta, 0.0, y0, {span},
                       1e-12, 1e-12, np.inf, 0.0, 200000, 1e-8, 0.05, 8.0, 1)
dt = (time.perf_counter() - t0) / {repeat}
print("%s %.6f" % (engine_name(), dt))
"""


def cmd_benchmark(args):
    """Time the excursion-scale integration workload on both engines."""
    src = os.path.join(os.path.dirname(os.path.dirname(
        os.path.abspath(__file__))))
    results = {}
    for jit in ("1", "0"):
        env = dict(os.environ, COORBITAL_JIT=jit)
        code = _BENCH_SNIPPET.format(src=src, repeat=args.repeat,
                                     span=args.span)
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True)
        name, dt = out.stdout.split()
        results[name] = float(dt)
    print("engine      seconds/run   (cartesian excursion, t=%g, "
          "rtol=1e-12)" % args.span)
    for name, dt in results.items():
        print(f"{name:10s}  {dt:12.6f}")
    if "numba" in results and "numpy" in results:
        print(f"speedup     {results['numpy'] / results['numba']:10.1f}x")
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="coorbital",
        description="Coorbital dynamics laboratory for the planar restricted "
                    "three-body problem")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)

    q = sub.add_parser("equilibria", help="L3 record in all charts")
    q.add_argument("--mu", type=float, required=True)
    q.add_argument("--json", help="output path (default stdout)")
    q.set_defaults(func=cmd_equilibria)

    q = sub.add_parser("separatrix", help="separatrix samples and A")
    q.add_argument("--u-max", type=float, default=8.0)
    q.add_argument("--n", type=int, default=401)
    q.add_argument("--csv", help="output path (default stdout)")
    q.set_defaults(func=cmd_separatrix)

    q = sub.add_parser("splitting", help="manifold splitting sweep")
    q.add_argument("--mu-list")
    q.add_argument("--mu-range", help="lo:hi[:n] log-spaced")
    q.add_argument("--section", choices=SECTIONS, default="sigma0")
    q.add_argument("--lambda-star", type=float, default=1.5)
    q.add_argument("--rtol", type=float)
    q.add_argument("--csv")
    q.set_defaults(func=cmd_splitting)

    q = sub.add_parser("fit", help="fit (A, |Theta|) from a splitting CSV")
    q.add_argument("--csv", dest="csv_in", required=True)
    q.add_argument("--section", choices=SECTIONS, default="sigma0")
    q.add_argument("--json")
    q.set_defaults(func=cmd_fit)

    q = sub.add_parser("lyapunov", help="Lyapunov periodic orbit")
    q.add_argument("--mu", type=float, required=True)
    q.add_argument("--rho", type=float)
    q.add_argument("--energy", type=float)
    q.add_argument("--method", choices=("fourier", "shooting", "both"),
                   default="both")
    q.add_argument("--json")
    q.add_argument("--samples-csv", help="also emit sampled orbit states")
    q.add_argument("--n-samples", type=int, default=256)
    q.set_defaults(func=cmd_lyapunov)

    q = sub.add_parser("curves", help="manifold section curves of an orbit")
    q.add_argument("--mu", type=float, required=True)
    q.add_argument("--rho", type=float, required=True)
    q.add_argument("--n-tau", type=int, default=256)
    q.add_argument("--csv")
    q.set_defaults(func=cmd_curves)

    q = sub.add_parser("tangency", help="quadratic tangency amplitude")
    q.add_argument("--mu", type=float, required=True)
    q.add_argument("--n-tau", type=int, default=96)
    q.add_argument("--json")
    q.set_defaults(func=cmd_tangency)

    q = sub.add_parser("reconnect", help="2-round homoclinic mass ratios")
    q.add_argument("--mu-range", required=True, help="lo:hi")
    q.add_argument("--scan", type=int, default=400)
    q.add_argument("--verify", action="store_true",
                   help="verify the 2-round property at each root")
    q.add_argument("--trajectories", help="directory for per-root CSVs")
    q.add_argument("--csv")
    q.set_defaults(func=cmd_reconnect)

    q = sub.add_parser("benchmark", help="compare the numba and numpy engines")
    q.add_argument("--repeat", type=int, default=5)
    q.add_argument("--span", type=float, default=50.0)
    q.set_defaults(func=cmd_benchmark)

    for q in sub.choices.values():
        q.add_argument("--cache-dir")
        q.add_argument("--no-cache", action="store_true")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError) as e:
        sys.stderr.write(f"error: {e}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
