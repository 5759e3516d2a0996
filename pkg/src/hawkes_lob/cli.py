"""Command-line front end.

    hawkes-lob <subcommand> [--config PATH] [--out DIR] [--seed U64] [--threads N]
                            [--horizon F] [--replicates N] [--n LIST] [--dt F]

Configs are JSON objects holding the model keys of the subcommand plus an
optional ``"run"`` block (horizon, replicates, n, dt, seed, tolerance, ...).
Command-line flags override the ``run`` block, which overrides the built-in
defaults. Every run writes ``summary.json`` next to its CSV/JSON outputs.

Exit status: 0 ok, 1 invalid input, 2 numerical failure, 3 a ``verify-*``
check did not pass.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._rng import DEFAULT_SEED, default_threads, parallel_map
from .coefficients import EffectiveCoefficients, PiecewiseLinear
from .covariance import EventTaxonomy, covariance_bundle, empirical_fclt, lob_event_spec
from .errors import HawkesLOBError, NumericalError, ValidationError
from .hawkes import HawkesSpec, branching_matrix, simulate_counts, simulate_hawkes, spectral_radius, stationary_intensity
from .meso import MesoConfig, simulate_meso
from .micro import MicroConfig, simulate_micro, terminal_book
from .scaling import (
    TestFunction,
    default_probes,
    generator_convergence_report,
    generator_jump,
    generator_micro,
    micro_meso_moment_comparison,
    snap_to_lattice,
)

log = logging.getLogger("hawkes_lob")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_FAILED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


# config plumbing ----------------------------------------------------------


def _read_config(path) -> dict:
    if path is None:
        return {}
    try:
        d = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ValidationError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise ValidationError("config must be a JSON object")
    return d


def _check_keys(d: dict, allowed, where: str) -> None:
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ValidationError(f"unknown {where} key(s): {unknown}")


def _seed(text) -> int:
    try:
        v = int(str(text), 0)
    except ValueError as exc:
        raise ValidationError(f"seed must be an integer, got {text!r}") from exc
    if not 0 <= v < 2**64:
        raise ValidationError("seed must fit in an unsigned 64-bit integer")
    return v


def _n_list(text) -> list:
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            v = float(part)
        except ValueError as exc:
            raise ValidationError(f"--n expects comma-separated numbers, got {part!r}") from exc
        out.append(int(v) if v.is_integer() else v)
    if not out:
        raise ValidationError("--n is empty")
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


class _Run:
    """Resolved run parameters: defaults < config ``run`` block < flags."""

    def __init__(self, args, cfg: dict, defaults: dict, allowed: set):
        run = cfg.pop("run", {})
        if not isinstance(run, dict):
            raise ValidationError("'run' must be a JSON object")
        _check_keys(run, allowed | {"seed"}, "run")
        self.values = dict(defaults)
        self.values.update(run)
        for flag in ("horizon", "replicates", "n", "dt"):
            v = getattr(args, flag)
            if v is not None:
                if flag not in allowed:
                    raise ValidationError(f"--{flag} is not used by {args.command}")
                self.values[flag] = v
        seed = args.seed if args.seed is not None else run.get("seed", DEFAULT_SEED)
        self.seed = _seed(seed)
        self.threads = args.threads if args.threads is not None else default_threads()
        if self.threads < 1:
            raise ValidationError("--threads must be >= 1")

    def get(self, key, cast=float):
        if self.values.get(key) is None:
            raise ValidationError(f"missing run parameter {key!r} (flag --{key} or config run.{key})")
        try:
            return cast(self.values[key])
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"run parameter {key!r} has bad value {self.values[key]!r}") from exc

    def n_values(self) -> list:
        n = self.values.get("n")
        if n is None:
            raise ValidationError("missing run parameter 'n'")
        return list(n) if isinstance(n, (list, tuple)) else [n]

    def echo(self) -> dict:
        return dict(self.values, seed=self.seed, threads=self.threads)


def _single_n(run: _Run) -> float:
    ns = run.n_values()
    if len(ns) != 1:
        raise ValidationError(f"{len(ns)} values given for n; this subcommand takes one")
    return float(ns[0])


def _positive_int(run: _Run, key: str) -> int:
    v = run.get(key, int)
    if v < 1:
        raise ValidationError(f"{key} must be >= 1")
    return v


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


# subcommands ----------------------------------------------------------------
# Each returns (resolved config echo, metrics, passed, output file names).


def _cmd_simulate_hawkes(args, cfg, out):
    run = _Run(args, cfg, {"replicates": 1}, {"horizon", "replicates"})
    spec = HawkesSpec.from_dict(cfg)
    horizon, reps = run.get("horizon"), _positive_int(run, "replicates")
    ev = simulate_hawkes(spec, horizon, run.seed, 0)
    ev.to_csv(out / "events.csv")
    files = ["events.csv"]
    counts = np.array([ev.counts()])
    if reps > 1:
        counts = np.stack(parallel_map(lambda r: simulate_counts(spec, horizon, run.seed, r), range(reps), run.threads))
        _write_rows(out / "counts.csv", ["replicate"] + [f"type_{j + 1}" for j in range(spec.M)],
                    ([r] + [int(c) for c in row] for r, row in enumerate(counts)))
        files.append("counts.csv")
    metrics = {
        "events_replicate_0": len(ev),
        "spectral_radius": spectral_radius(branching_matrix(spec)),
        "stationary_intensity": stationary_intensity(spec),
        "empirical_rate": counts.mean(axis=0) / horizon,
    }
    return {"model": spec.to_dict(), "run": run.echo()}, metrics, True, files


def _cmd_simulate_micro(args, cfg, out):
    run = _Run(args, cfg, {"replicates": 1, "output_step": None}, {"horizon", "replicates", "output_step"})
    config = MicroConfig.from_dict(cfg)
    horizon, reps = run.get("horizon"), _positive_int(run, "replicates")
    path = simulate_micro(config, horizon, run.seed, 0)
    step = run.values.get("output_step") or path.horizon / 100 or 1.0
    path.events_csv(out / "events.csv")
    path.snapshots_csv(out / "snapshots_bid.csv", float(step), "bid")
    path.snapshots_csv(out / "snapshots_ask.csv", float(step), "ask")
    files = ["events.csv", "snapshots_bid.csv", "snapshots_ask.csv"]
    books = [np.stack(path.terminal)]
    if reps > 1:
        books = parallel_map(lambda r: terminal_book(config, horizon, run.seed, r), range(reps), run.threads)
        L = config.N - 1
        rows = []
        for r, b in enumerate(books):
            for s, side in enumerate(("bid", "ask")):
                rows.append([r, side] + [int(v) for v in b[s]])
        _write_rows(out / "terminal.csv", ["replicate", "side"] + [f"level_{i + 1}" for i in range(L)], rows)
        files.append("terminal.csv")
    books = np.stack(books)
    metrics = {
        "events_replicate_0": path.diagnostics["events"],
        "diagnostics": path.diagnostics,
        "terminal_mean_bid": books[:, 0].mean(axis=0),
        "terminal_mean_ask": books[:, 1].mean(axis=0),
        "negative_volumes": int(np.sum(path.bid < 0) + np.sum(path.ask < 0) + np.sum(books < 0)),
    }
    return {"model": config.to_dict(), "run": run.echo()}, metrics, metrics["negative_volumes"] == 0, files


def _cmd_simulate_meso(args, cfg, out):
    run = _Run(args, cfg, {"replicates": 100, "dt": None, "output_step": None},
               {"horizon", "replicates", "dt", "output_step"})
    config = MesoConfig.from_dict(cfg)
    if run.values.get("dt") is not None:
        config = dataclasses.replace(config, dt=run.get("dt"))
    run.values["dt"] = config.dt
    horizon, paths = run.get("horizon"), _positive_int(run, "replicates")
    step = run.values.get("output_step")
    ens = simulate_meso(config, horizon, paths, run.seed, output_step=None if step is None else float(step),
                        threads=run.threads)
    ens.moments_csv(out / "moments.csv")
    L = config.coeffs.levels
    _write_rows(out / "terminal.csv", ["path", "level", "x", "eta"],
                ([p, k + 1, float(ens.terminal_x[p, k]), float(ens.terminal_eta[p, k])]
                 for p in range(paths) for k in range(L)))
    metrics = {
        "violations": ens.violations,
        "terminal_mean": ens.mean[-1],
        "terminal_var": ens.var[-1],
    }
    passed = not any(ens.violations.values())
    return {"model": config.to_dict(), "run": run.echo()}, metrics, passed, ["moments.csv", "terminal.csv"]


def _cmd_covariance(args, cfg, out):
    run = _Run(args, cfg, {}, set())
    if "micro" in cfg:
        _check_keys(cfg, {"micro", "reference_level"}, "covariance config")
        micro = MicroConfig.from_dict(cfg["micro"])
        if "reference_level" not in cfg:
            raise ValidationError("covariance config with 'micro' needs 'reference_level'")
        spec, tax, notes = lob_event_spec(micro, cfg["reference_level"])
        echo = {"micro": micro.to_dict(), "reference_level": float(cfg["reference_level"])}
    elif "hawkes" in cfg:
        _check_keys(cfg, {"hawkes", "taxonomy"}, "covariance config")
        spec = HawkesSpec.from_dict(cfg["hawkes"])
        t = cfg.get("taxonomy")
        if not isinstance(t, dict):
            raise ValidationError("covariance config with 'hawkes' needs a 'taxonomy' object")
        _check_keys(t, {"depth", "types"}, "taxonomy")
        if "depth" not in t or "types" not in t:
            raise ValidationError("taxonomy needs keys 'depth' and 'types'")
        tax, notes = EventTaxonomy(int(t["depth"]), tuple(tuple(x) for x in t["types"])), ()
        echo = {"hawkes": spec.to_dict(), "taxonomy": {"depth": tax.N, "types": [list(x) for x in tax.types]}}
    else:
        raise ValidationError("covariance config needs either 'micro' or 'hawkes'")
    bundle = covariance_bundle(spec, tax, notes)
    bundle.to_json(out / "covariance.json")
    metrics = {
        "types": spec.M,
        "spectral_radius": spectral_radius(bundle.K),
        "cholesky_shift": bundle.shift,
        "factor_roundtrip_frobenius": float(np.linalg.norm(bundle.Gamma @ bundle.Gamma.T - bundle.Sigma_X)),
    }
    return dict(echo, run=run.echo()), metrics, True, ["covariance.json"]


def _cmd_verify_fclt(args, cfg, out):
    run = _Run(args, cfg, {"n": 1e4, "horizon": 1.0, "replicates": 2000, "tolerance": 0.10},
               {"n", "horizon", "replicates", "tolerance"})
    spec = HawkesSpec.from_dict(cfg)
    rep = empirical_fclt(spec, _single_n(run), run.get("horizon"), _positive_int(run, "replicates"), run.seed,
                         threads=run.threads)
    M = spec.M
    _write_rows(out / "covariance.csv", ["i", "j", "empirical", "theoretical"],
                ([i + 1, j + 1, float(rep.empirical[i, j]), float(rep.theoretical[i, j])]
                 for i in range(M) for j in range(M)))
    tol = run.get("tolerance")
    metrics = dict(rep.to_dict(), tolerance=tol)
    return {"model": spec.to_dict(), "run": run.echo()}, metrics, rep.rel_frobenius_error <= tol, ["covariance.csv"]


def default_generator_coefficients() -> EffectiveCoefficients:
    """Three levels with distinct affine sigma^2, f and g."""
    A = PiecewiseLinear.affine
    return EffectiveCoefficients(
        4,
        [A(1.0, 0.3), A(0.8, 0.2), A(1.2, 0.1)],
        [A(0.5, -0.2), A(0.3, 0.1), A(-0.2, 0.4)],
        [A(0.4, 0.3), A(0.6, -0.1), A(0.2, 0.2)],
        0.7,
    )


def _cmd_verify_generator(args, cfg, out):
    run = _Run(args, cfg, {"n": [256, 1024, 4096], "band": [1.6, 2.5]}, {"n", "band"})
    _check_keys(cfg, {"coefficients", "test_function", "probes"}, "verify-generator config")
    coeffs = (EffectiveCoefficients.from_dict(cfg["coefficients"]) if "coefficients" in cfg
              else default_generator_coefficients())
    L = coeffs.levels
    tf_cfg = cfg.get("test_function", {"kind": "neumann_cosine", "amplitudes": [1.0, 0.7, 1.3][:L] if L <= 3 else 1.0,
                                       "periods": [4.0, 3.0, 5.0][:L] if L <= 3 else 4.0})
    if not isinstance(tf_cfg, dict):
        raise ValidationError("'test_function' must be a JSON object")
    _check_keys(tf_cfg, {"kind", "value", "weights", "amplitudes", "periods"}, "test_function")
    F = TestFunction.from_dict(tf_cfg, L)
    probes = np.asarray(cfg["probes"], dtype=float) if "probes" in cfg else default_probes(L)
    if probes.ndim != 2 or probes.shape[1] != L or np.any(probes < 0):
        raise ValidationError(f"probes must be a list of non-negative {L}-vectors")
    band = tuple(float(b) for b in run.values["band"])
    n_list = [int(n) for n in run.n_values()]
    if len(n_list) < 2 or any(n < 1 for n in n_list):
        raise ValidationError("verify-generator needs at least two n values >= 1")
    rep = generator_convergence_report(F, coeffs, n_list, probes, band)
    rep.to_csv(out / "decay.csv")
    # the compact formula against a direct sum over the chain's jumps, at the largest n
    n_max = n_list[-1]
    cross = max(abs(generator_micro(F, y, n_max, coeffs) - generator_jump(F, y, n_max, coeffs))
                for y in (snap_to_lattice(p, n_max) for p in probes))
    metrics = dict(rep.summary(), formula_vs_jump_sum=float(cross))
    echo = {"coefficients": coeffs.to_dict(), "test_function": tf_cfg, "probes": probes, "run": run.echo()}
    return echo, metrics, rep.passed, ["decay.csv"]


def default_converge_coefficients() -> EffectiveCoefficients:
    return EffectiveCoefficients.uniform(4, 1.0, 0.0, 0.0, 0.5)


def _cmd_verify_converge(args, cfg, out):
    run = _Run(args, cfg, {"n": [400, 1600, 6400], "replicates": 500, "horizon": 0.5, "dt": 1e-3, "tolerance": 0.10},
               {"n", "replicates", "horizon", "dt", "tolerance"})
    _check_keys(cfg, {"coefficients", "x0", "block_boundary_migration"}, "verify-converge config")
    coeffs = (EffectiveCoefficients.from_dict(cfg["coefficients"]) if "coefficients" in cfg
              else default_converge_coefficients())
    x0 = np.broadcast_to(np.asarray(cfg.get("x0", 1.0), dtype=float), (coeffs.levels,)).copy()
    block = bool(cfg.get("block_boundary_migration", False))
    n_list = [int(n) for n in run.n_values()]
    rep = micro_meso_moment_comparison(coeffs, x0, n_list, run.get("horizon"), _positive_int(run, "replicates"),
                                       run.seed, dt=run.get("dt"), block_boundary_migration=block,
                                       tolerance=run.get("tolerance"), threads=run.threads)
    rep.to_csv(out / "moments.csv")
    echo = {"coefficients": coeffs.to_dict(), "x0": x0, "block_boundary_migration": block, "run": run.echo()}
    return echo, rep.summary(), rep.passed, ["moments.csv"]


REFLECTION_DEFAULTS = {
    "deterministic": {"x0": 1.0, "h": -1.0, "horizon": 2.0, "tolerance": 2e-3},
    "brownian": {"x0": 0.0, "sigma_sq": 1.0, "horizon": 1.0, "paths": 10_000, "se_multiple": 3.0},
}


def reflected_bm_mean(x0: float, sigma: float, t: float) -> float:
    """``E|x0 + sigma W_t|``, the mean of Brownian motion reflected at 0."""
    if t == 0 or sigma == 0:
        return float(x0)
    s = sigma * math.sqrt(t)
    a = x0 / s
    return s * math.sqrt(2 / math.pi) * math.exp(-0.5 * a * a) + x0 * math.erf(a / math.sqrt(2))


def projected_walk_mean(sigma: float, dt: float, steps: int) -> float:
    """Mean of the projected Gaussian walk from 0 after ``steps`` steps.

    ``E[M_k] = sum_{j<=k} E[S_j^+] / j`` for the running maximum of a
    symmetric walk, which has the law of the projected walk from 0.
    """
    j = np.arange(1, steps + 1, dtype=float)
    return float(sigma * math.sqrt(dt / (2 * math.pi)) * np.sum(j ** -0.5))


def _cmd_verify_reflection(args, cfg, out):
    run = _Run(args, cfg, {"dt": 1e-3, "horizon": None, "replicates": None}, {"dt", "horizon", "replicates"})
    _check_keys(cfg, set(REFLECTION_DEFAULTS), "verify-reflection config")
    det = dict(REFLECTION_DEFAULTS["deterministic"])
    bm = dict(REFLECTION_DEFAULTS["brownian"])
    for name, block in (("deterministic", det), ("brownian", bm)):
        given = cfg.get(name, {})
        if not isinstance(given, dict):
            raise ValidationError(f"{name!r} must be a JSON object")
        _check_keys(given, block, name)
        block.update(given)
    if run.values.get("horizon") is not None:
        bm["horizon"] = float(run.values["horizon"])
    if run.values.get("replicates") is not None:
        bm["paths"] = int(run.values["replicates"])
    dt = run.get("dt")
    if float(det["h"]) > 0:
        raise ValidationError("deterministic case needs h <= 0")

    # deterministic drift into the wall: X_t = max(x0 + h t, 0), eta_t = max(-h t - x0, 0)
    h = float(det["h"])
    c_det = EffectiveCoefficients(2, 0.0, 0.0, PiecewiseLinear.constant(-h), 0.0)
    ens = simulate_meso(MesoConfig(c_det, [float(det["x0"])], dt), float(det["horizon"]), 1, run.seed,
                        output_step=dt, keep_paths=True)
    t = ens.times
    x, eta = ens.paths_x[0, :, 0], ens.paths_eta[0, :, 0]
    x_ex = np.maximum(float(det["x0"]) + h * t, 0.0)
    eta_ex = np.maximum(-h * t - float(det["x0"]), 0.0)
    _write_rows(out / "reflection_path.csv", ["t", "x", "eta", "x_exact", "eta_exact"],
                ([float(a), float(b), float(c), float(d), float(e)] for a, b, c, d, e in zip(t, x, eta, x_ex, eta_ex)))
    err_x, err_eta = float(np.max(np.abs(x - x_ex))), float(np.max(np.abs(eta - eta_ex)))
    det_ok = err_x <= det["tolerance"] and err_eta <= det["tolerance"] and not any(ens.violations.values())

    # reflected Brownian motion
    sig2 = float(bm["sigma_sq"])
    c_bm = EffectiveCoefficients(2, sig2, 0.0, 0.0, 0.0)
    paths = int(bm["paths"])
    if paths < 2:
        raise ValidationError("brownian case needs at least two paths")
    eb = simulate_meso(MesoConfig(c_bm, [float(bm["x0"])], dt), float(bm["horizon"]), paths, run.seed,
                       threads=run.threads)
    sigma = math.sqrt(sig2)
    exact = np.array([reflected_bm_mean(float(bm["x0"]), sigma, float(s)) for s in eb.times])
    se = np.sqrt(eb.var[:, 0] / paths)
    _write_rows(out / "brownian_moments.csv", ["t", "mean", "var", "exact_mean", "standard_error"],
                ([float(a), float(b), float(c), float(d), float(e)]
                 for a, b, c, d, e in zip(eb.times, eb.mean[:, 0], eb.var[:, 0], exact, se)))
    term = eb.terminal_x[:, 0]
    m, s_err = float(term.mean()), float(term.std(ddof=1) / math.sqrt(paths))
    z = (m - exact[-1]) / s_err if s_err > 0 else (0.0 if m == exact[-1] else math.inf)
    bm_ok = abs(z) <= float(bm["se_multiple"]) and not any(eb.violations.values())
    metrics = {
        "deterministic": {"max_abs_error_x": err_x, "max_abs_error_eta": err_eta, "violations": ens.violations,
                          "passed": det_ok},
        "brownian": {"terminal_mean": m, "standard_error": s_err, "exact_mean": float(exact[-1]), "z_score": z,
                     "violations": eb.violations, "passed": bm_ok},
    }
    if float(bm["x0"]) == 0.0:
        steps = int(round(float(bm["horizon"]) / dt))
        pm = projected_walk_mean(sigma, dt, steps)
        metrics["brownian"]["projected_scheme_mean"] = pm
        metrics["brownian"]["scheme_bias_in_se"] = (pm - float(exact[-1])) / s_err if s_err > 0 else 0.0
    echo = {"deterministic": det, "brownian": bm, "run": run.echo()}
    return echo, metrics, det_ok and bm_ok, ["reflection_path.csv", "brownian_moments.csv"]


COMMANDS = {
    "simulate-hawkes": (_cmd_simulate_hawkes, True, "simulate a multivariate Hawkes process"),
    "simulate-micro": (_cmd_simulate_micro, True, "simulate the event-level order book"),
    "simulate-meso": (_cmd_simulate_meso, True, "simulate the reflected queue SDE"),
    "covariance": (_cmd_covariance, True, "diffusion covariance and its factor"),
    "verify-fclt": (_cmd_verify_fclt, True, "empirical count covariance against the CLT limit"),
    "verify-generator": (_cmd_verify_generator, False, "generator discrepancy decay in n"),
    "verify-converge": (_cmd_verify_converge, False, "micro terminal moments against the SDE"),
    "verify-reflection": (_cmd_verify_reflection, False, "reflection at zero: deterministic and Brownian"),
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hawkes-lob", description="Hawkes order-book simulation and scaling-limit checks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="SUBCOMMAND")
    for name, (_, _, helptext) in COMMANDS.items():
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", metavar="PATH")
        s.add_argument("--out", metavar="DIR", help="output directory (default: out/<subcommand>)")
        s.add_argument("--seed", metavar="U64", help=f"default {DEFAULT_SEED:#x}")
        s.add_argument("--threads", type=int, metavar="N", help="default: $HAWKES_LOB_THREADS or 1")
        s.add_argument("--horizon", type=float, metavar="F")
        s.add_argument("--replicates", type=int, metavar="N")
        s.add_argument("--n", type=_n_list, metavar="LIST", help="comma-separated scale parameters")
        s.add_argument("--dt", type=float, metavar="F")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def run(argv=None) -> int:
    started = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise ValidationError("no subcommand given; choose one of " + ", ".join(COMMANDS))
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        fn, needs_config, _ = COMMANDS[args.command]
        if needs_config and args.config is None:
            raise ValidationError(f"{args.command} needs --config")
        cfg = _read_config(args.config)
        out = Path(args.out) if args.out else Path("out") / args.command
        out.mkdir(parents=True, exist_ok=True)
        echo, metrics, passed, files = fn(args, cfg, out)
    except NumericalError as exc:
        print(f"hawkes-lob: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, TypeError, HawkesLOBError) as exc:
        print(f"hawkes-lob: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    summary = {
        "subcommand": args.command,
        "version": __version__,
        "config": echo,
        "metrics": metrics,
        "passed": bool(passed),
        "outputs": files,
        "elapsed_seconds": time.perf_counter() - started,
    }
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2) + "\n")
    status = "PASS" if passed else "FAIL"
    print(f"{args.command}: {status} -> {out}")
    if not passed and args.command.startswith("verify-"):
        return EXIT_FAILED
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))
