"""Command-line entry point.

Subcommands: ``simulate`` (sample trajectories), ``mpp`` (most-probable
path between fixed endpoints), ``om`` (action of a stored path CSV), and
``verify <experiment>`` for the desk-scale checks (kl, cocycle,
truncation, bound, smallball, tube).  One config file defines the
problem; experiment options are flags.  Every run writes manifest.json
into the output directory before any data file; reruns with identical
inputs produce byte-identical CSVs.

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(blow-up or non-convergence), 4 insufficient statistical power.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path as FsPath

import numpy as np

from . import __version__
from .action import om_action
from .config import config_hash, load_config
from .errors import (
    ConfigurationError,
    ConvergenceError,
    IntegrationError,
    OmlatError,
    StatisticalPowerError,
)
from .io import read_path_csv, write_csv, write_manifest, write_om_json, write_path_csv
from .kl import kl_spectrum, smallball_bounds, smallball_mc
from .lattice import weighted_norm
from .mpp import BVPSpec, solve_mpp
from .noise import sample_noise, wq_path
from .paths import Path
from .sde import apriori_bound_check, cocycle_check, integrate, truncation_tail
from .tube import TubeExperiment, tube_ratio
from .utils import format_float as _f

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_POWER = 4


def _floats(raw: str, what: str) -> list:
    try:
        return [float(tok) for tok in raw.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ConfigurationError(f"{what}: cannot parse {raw!r}") from exc


def parse_state_spec(raw: str, n: int) -> np.ndarray:
    """Boundary/initial state grammar: ``zero`` | ``gauss:<amp>,<sigma>``
    | ``csv:<path>`` (single-row CSV of 2n+1 values)."""
    d = 2 * n + 1
    kind, _, rest = raw.strip().partition(":")
    if kind == "zero":
        return np.zeros(d)
    if kind == "gauss":
        parts = _floats(rest, "gauss state spec")
        if len(parts) != 2:
            raise ConfigurationError("gauss state spec needs <amp>,<sigma>")
        amp, sigma = parts
        i = np.arange(-n, n + 1)
        return amp * np.exp(-(i**2) / (2.0 * sigma**2))
    if kind == "csv":
        try:
            data = np.loadtxt(rest, delimiter=",", ndmin=1)
        except OSError as exc:
            raise ConfigurationError(f"state file {rest}: {exc}") from exc
        except ValueError as exc:
            raise ConfigurationError(f"state file {rest}: not a CSV of numbers") from exc
        if data.size != d:
            raise ConfigurationError(f"state file {rest}: expected {d} values, got {data.size}")
        return data.astype(float)
    raise ConfigurationError(f"unknown state spec {raw!r}")


def _steps_from_dt(T: float, dt: float | None, default_steps: int) -> int:
    if dt is None:
        return default_steps
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * max(1.0, T):
        raise ConfigurationError(f"dt={dt} does not divide the horizon T={T}")
    return steps


def _prepare_out(args, subcommand: str, extra: dict) -> FsPath:
    out = FsPath(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "subcommand": subcommand,
        "config": getattr(args, "config", None),
        "config_hash": config_hash(args.config) if getattr(args, "config", None) else None,
        "seed": getattr(args, "seed", None),
        "out": str(out),
        "version": __version__,
        "wall_clock_s": None,
        "args": extra,
    }
    write_manifest(out, payload)
    return out


def _finish_manifest(out: FsPath, started: float) -> None:
    payload = json.loads((out / "manifest.json").read_text())
    payload["wall_clock_s"] = time.perf_counter() - started
    write_manifest(out, payload)


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config)
    steps = _steps_from_dt(cfg.T, args.dt, 1024)
    out = _prepare_out(args, "simulate", {"dt": cfg.T / steps, "steps": steps, "ensemble": args.ensemble, "u0": args.u0})
    u0 = parse_state_spec(args.u0, cfg.n)
    summary = {"trajectories": [], "steps": steps, "dt": cfg.T / steps}
    for j in range(args.ensemble):
        noise = sample_noise(args.seed, steps, cfg.d, cfg.T / steps, trajectory=j)
        path = integrate(u0, noise, cfg)
        name = f"path_{j:03d}.csv"
        write_path_csv(path, out / name)
        norms = [weighted_norm(s, cfg.rho) for s in path.states]
        summary["trajectories"].append(
            {"index": j, "file": name, "sup_norm": max(norms), "final_norm": norms[-1]}
        )
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    _finish_manifest(out, started)
    print(f"simulate: wrote {args.ensemble} trajectories to {out}")
    return EXIT_OK


def cmd_mpp(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config)
    steps = _steps_from_dt(cfg.T, args.dt, 600)
    out = _prepare_out(
        args, "mpp",
        {"dt": cfg.T / steps, "steps": steps, "phi0": args.phi0, "phiT": args.phiT,
         "tol": args.tol, "max_iter": args.max_iter, "newton": args.newton, "slice": args.slice},
    )
    spec = BVPSpec(
        cfg=cfg,
        phi0=parse_state_spec(args.phi0, cfg.n),
        phiT=parse_state_spec(args.phiT, cfg.n),
        steps=steps,
        max_iterations=args.max_iter,
        gradient_tol=args.tol,
        newton=args.newton,
    )
    result = solve_mpp(spec)
    write_path_csv(result.path, out / "mpp_path.csv")
    write_om_json(result.action, out / "om_report.json")
    write_csv(
        out / "convergence.csv",
        "iteration,action,gradient_norm",
        [
            (k, a, g)
            for k, (a, g) in enumerate(zip(result.action_history, result.gradient_history))
        ],
    )
    if args.slice:
        sites = _parse_slice(args.slice)
        for i in sites:
            if abs(i) > cfg.n:
                raise ConfigurationError(f"slice site {i} outside -{cfg.n}..{cfg.n}")
            col = i + cfg.n
            write_csv(
                out / f"slice_i{i}.csv",
                f"t,u_{i}",
                zip(result.path.times, result.path.states[:, col]),
            )
    _finish_manifest(out, started)
    status = "converged" if result.converged else "NOT converged"
    print(
        f"mpp: {status} after {result.iterations} iterations, "
        f"action={_f(result.action.total)}, grad={result.gradient_norm:.3e}"
    )
    return EXIT_OK if result.converged else EXIT_NUMERICAL


def _parse_slice(raw: str):
    body = raw.strip()
    if body.startswith("i="):
        body = body[2:]
    try:
        return [int(tok) for tok in body.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ConfigurationError(f"bad slice spec {raw!r}; expected i=0,10") from exc


def cmd_om(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config)
    out = _prepare_out(args, "om", {"path": args.path})
    path = read_path_csv(args.path)
    report = om_action(path, cfg)
    write_om_json(report, out / "om_report.json")
    _finish_manifest(out, started)
    print(
        f"om: drift={_f(report.drift_term)} trace={_f(report.trace_term)} "
        f"total={_f(report.total)}"
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    handlers = {
        "kl": _verify_kl,
        "cocycle": _verify_cocycle,
        "truncation": _verify_truncation,
        "bound": _verify_bound,
        "smallball": _verify_smallball,
        "tube": _verify_tube,
    }
    return handlers[args.experiment](args)


def _verify_kl(args) -> int:
    started = time.perf_counter()
    out = _prepare_out(args, "verify-kl", {"lambda": args.lam, "m": args.m})
    spec = kl_spectrum(args.lam, args.m)
    res = spec.residuals()
    write_csv(
        out / "kl_spectrum.csv",
        "i,gamma,mu,A,residual",
        [(i + 1, spec.gamma[i], spec.mu[i], spec.A[i], res[i]) for i in range(args.m)],
    )
    _finish_manifest(out, started)
    print(f"verify kl: m={args.m} max residual {res.max():.3e}")
    return EXIT_OK


def _verify_cocycle(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config)
    steps = _steps_from_dt(cfg.T, args.dt, 512)
    out = _prepare_out(args, "verify-cocycle", {"dt": cfg.T / steps, "steps": steps})
    u0 = parse_state_spec(args.u0, cfg.n)
    noise = sample_noise(args.seed, steps, cfg.d, cfg.T / steps)
    rows = []
    worst = 0.0
    for frac in (0.25, 0.5):
        s = frac * cfg.T
        dev = cocycle_check(u0, noise, s, cfg)
        rows.append((s, dev))
        worst = max(worst, dev)
        print(f"verify cocycle: s={s:g} deviation={dev:.3e}")
    write_csv(out / "cocycle.csv", "s,deviation", rows)
    _finish_manifest(out, started)
    return EXIT_OK if worst <= 1e-12 else EXIT_NUMERICAL


def _verify_truncation(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config)
    steps = _steps_from_dt(cfg.T, args.dt, 256)
    out = _prepare_out(
        args, "verify-truncation", {"dt": cfg.T / steps, "steps": steps, "ensemble": args.ensemble}
    )

    def run(n):
        sub = cfg if n == cfg.n else _with_n(cfg, n)
        u0 = np.zeros(sub.d)
        for i in range(-2, 3):
            u0[i + n] = 1.0 / (1.0 + i * i)
        paths = [
            integrate(u0, sample_noise(args.seed, steps, sub.d, sub.T / steps, trajectory=j), sub)
            for j in range(args.ensemble)
        ]
        return sub, paths

    base, paths = run(cfg.n)
    wide, paths_wide = run(2 * cfg.n)
    cutoffs = list(range(1, cfg.n + 1))
    rows = []
    for K in cutoffs:
        rows.append(
            (
                K,
                truncation_tail(paths, K, base.rho),
                truncation_tail(paths_wide, K, wide.rho),
            )
        )
    write_csv(out / "truncation.csv", "K,tail,tail_wide", rows)
    msd = 0.0
    off = wide.n - base.n
    for a, b in zip(paths, paths_wide):
        msd += np.max(np.sum((a.states - b.states[:, off : off + a.d]) ** 2, axis=1))
    msd /= len(paths)
    _finish_manifest(out, started)
    tails = [r[1] for r in rows]
    monotone = all(x >= y for x, y in zip(tails, tails[1:]))
    print(f"verify truncation: tails monotone={monotone}, mean-square diff to 2n: {msd:.3e}")
    return EXIT_OK if monotone else EXIT_NUMERICAL


def _with_n(cfg, n):
    """Same problem on a wider truncation: forcing is zero-padded and
    weights are one-padded outside the original sites."""
    from .lattice import LatticeConfig

    off = n - cfg.n
    g = np.zeros(2 * n + 1)
    g[off : off + cfg.d] = cfg.g
    rho = np.ones(2 * n + 1)
    rho[off : off + cfg.d] = cfg.rho
    return LatticeConfig(n=n, nu=cfg.nu, lam=cfg.lam, f=cfg.f, q=cfg.q, T=cfg.T, g=g, rho=rho)


def _verify_bound(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config)
    steps = _steps_from_dt(cfg.T, args.dt, 256)
    out = _prepare_out(
        args, "verify-bound", {"dt": cfg.T / steps, "steps": steps, "ensemble": args.ensemble}
    )
    u0 = parse_state_spec(args.u0, cfg.n)
    paths, wqs = [], []
    for j in range(args.ensemble):
        noise = sample_noise(args.seed, steps, cfg.d, cfg.T / steps, trajectory=j)
        paths.append(integrate(u0, noise, cfg))
        wqs.append(wq_path(noise, cfg.q))
    report = apriori_bound_check(paths, wqs, cfg)
    write_csv(
        out / "bound.csv",
        "trajectory,sup_norm_sq,bound_functional,ratio",
        [(j, report.lhs[j], report.rhs[j], report.ratios[j]) for j in range(args.ensemble)],
    )
    _finish_manifest(out, started)
    print(f"verify bound: max empirical ratio {report.max_ratio:.4g} over {args.ensemble} paths")
    return EXIT_OK


def _verify_smallball(args) -> int:
    started = time.perf_counter()
    eps = _floats(args.eps, "--eps")
    out = _prepare_out(
        args, "verify-smallball",
        {"alpha": args.alpha, "imax": args.imax, "eps": eps, "samples": args.samples},
    )
    res = smallball_mc(args.alpha, args.imax, eps, args.samples, seed=args.seed)
    rows = []
    for j, e in enumerate(eps):
        b = smallball_bounds(args.alpha, e)
        rows.append((e, res.estimates[j], res.ci_lo[j], res.ci_hi[j], b.rate_up, b.rate_low))
    write_csv(out / "smallball.csv", "eps,estimate,ci_lo,ci_hi,rate_up,rate_low", rows)
    _finish_manifest(out, started)
    print(
        "verify smallball: "
        + " ".join(f"P({e:g})={res.estimates[j]:.3e}" for j, e in enumerate(eps))
    )
    return EXIT_OK


def _verify_tube(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config)
    if cfg.n > 1:
        raise ConfigurationError(
            f"tube experiments are desk scale: need n <= 1, config has n={cfg.n}"
        )
    steps = _steps_from_dt(cfg.T, args.dt, 256)
    eps = tuple(_floats(args.eps, "--eps"))
    out = _prepare_out(
        args, "verify-tube",
        {"dt": cfg.T / steps, "steps": steps, "eps": list(eps), "samples": args.samples,
         "reference": args.reference, "denominator": args.denominator},
    )
    ts = np.linspace(0.0, cfg.T, steps + 1)
    kind, _, rest = args.reference.partition(":")
    if kind == "zero":
        states = np.zeros((steps + 1, cfg.d))
    elif kind == "sine":
        amp = _floats(rest, "--reference sine")[0] if rest else 0.5
        states = amp * np.sin(np.pi * ts / (2.0 * cfg.T))[:, None] * np.ones(cfg.d)[None, :]
    else:
        raise ConfigurationError(f"unknown tube reference {args.reference!r}")
    phi = Path(times=ts, states=states, dt=cfg.T / steps)
    exp = TubeExperiment(
        cfg=cfg, phi=phi, eps=eps, samples=args.samples, seed=args.seed,
        denominator=args.denominator,
    )
    table = tube_ratio(exp)
    write_csv(
        out / "tube.csv",
        "eps,num_hits,den_hits,ratio,ci_lo,ci_hi,predicted",
        [
            (table.eps[j], int(table.num_hits[j]), int(table.den_hits[j]),
             table.ratio[j], table.ci_lo[j], table.ci_hi[j], table.predicted)
            for j in range(len(eps))
        ],
    )
    _finish_manifest(out, started)
    print(
        f"verify tube: predicted={table.predicted:.4f} "
        + " ".join(f"ratio({e:g})={table.ratio[j]:.4f}" for j, e in enumerate(table.eps))
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="omlat", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"omlat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="problem config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--dt", type=float, default=None, help="time step (must divide T)")

    p = sub.add_parser("simulate", help="integrate trajectories of the lattice system")
    common(p)
    p.add_argument("--ensemble", type=int, default=1, help="number of trajectories")
    p.add_argument("--u0", default="gauss:0.6,8", help="initial state: zero|gauss:<amp>,<sigma>|csv:<path>")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("mpp", help="most-probable path between fixed endpoints")
    common(p)
    p.add_argument("--phi0", default="gauss:0.6,8", help="state at t=0")
    p.add_argument("--phiT", default="zero", help="state at t=T")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=None, help="gradient tolerance (default 1e-8 d N)")
    p.add_argument("--newton", action="store_true", help="full Newton steps")
    p.add_argument("--slice", default=None, help="site slices to export, e.g. i=0,10")
    p.set_defaults(func=cmd_mpp)

    p = sub.add_parser("om", help="action of a stored path CSV")
    common(p)
    p.add_argument("--path", required=True, help="path CSV (as written by simulate/mpp)")
    p.set_defaults(func=cmd_om)

    p = sub.add_parser("verify", help="desk-scale verification experiments")
    vsub = p.add_subparsers(dest="experiment", required=True)

    v = vsub.add_parser("kl", help="covariance eigenpairs and root residuals")
    v.add_argument("--lambda", dest="lam", type=float, default=0.4)
    v.add_argument("--m", type=int, default=50)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", default="out")
    v.set_defaults(func=cmd_verify)

    v = vsub.add_parser("cocycle", help="flow consistency under the noise shift")
    common(v)
    v.add_argument("--u0", default="gauss:0.6,8")
    v.set_defaults(func=cmd_verify)

    v = vsub.add_parser("truncation", help="tail statistics and widening comparison")
    common(v)
    v.add_argument("--ensemble", type=int, default=200)
    v.set_defaults(func=cmd_verify)

    v = vsub.add_parser("bound", help="a priori sup-norm bound over an ensemble")
    common(v)
    v.add_argument("--ensemble", type=int, default=100)
    v.add_argument("--u0", default="gauss:0.6,8")
    v.set_defaults(func=cmd_verify)

    v = vsub.add_parser("smallball", help="weighted chi-square small-ball probabilities")
    v.add_argument("--alpha", type=float, default=1.0)
    v.add_argument("--imax", type=int, default=12000)
    v.add_argument("--eps", default="0.5,0.4,0.3")
    v.add_argument("--samples", type=int, default=1_000_000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", default="out")
    v.set_defaults(func=cmd_verify)

    v = vsub.add_parser("tube", help="tube-probability ratio against the action prediction")
    common(v)
    v.add_argument("--eps", default="0.3,0.2")
    v.add_argument("--samples", type=int, default=100_000)
    v.add_argument("--reference", default="zero", help="zero|sine:<amp>")
    v.add_argument("--denominator", default="convolution", choices=["convolution", "plain"])
    v.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, ConvergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except StatisticalPowerError as exc:
        print(f"statistical power: {exc}", file=sys.stderr)
        return EXIT_POWER
    except OmlatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
