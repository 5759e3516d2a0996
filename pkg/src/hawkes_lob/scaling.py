"""Diffusive rescaling and the micro-to-meso convergence checks.

Time is sped up by ``n`` and volumes shrink by ``sqrt(n)``. The discrete
generator ``A_n`` of the rescaled expansion-mode chain is compared with the
reflected-diffusion generator ``A`` on smooth test functions with zero normal
derivative at the boundary, and terminal moments of rescaled micro paths are
compared with a Monte Carlo ensemble of the reflected SDE.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from ._rng import parallel_map
from .coefficients import EffectiveCoefficients
from .errors import ValidationError
from .meso import MesoConfig, laplacian, simulate_meso
from .micro import BookState, MicroConfig, QueuePath, micro_rates, terminal_book

NEUMANN_TOL = 1e-12
RATIO_BAND = (1.6, 2.5)


class TestFunction:
    """Scalar ``F`` on the orthant with gradient and diagonal Hessian."""

    __test__ = False  # not a pytest class

    def __init__(self, value: Callable, grad: Callable, hess_diag: Callable, name: str = "custom"):
        self.value = value
        self.grad = grad
        self.hess_diag = hess_diag
        self.name = name

    def __call__(self, x) -> float:
        return float(self.value(np.asarray(x, dtype=float)))

    def __repr__(self):
        return f"TestFunction({self.name})"

    # built-ins -----------------------------------------------------------

    @classmethod
    def constant(cls, c: float = 1.0) -> "TestFunction":
        return cls(lambda x: c, lambda x: np.zeros_like(x), lambda x: np.zeros_like(x), f"constant({c})")

    @classmethod
    def linear(cls, weights) -> "TestFunction":
        """``sum_k w_k x_k``; not Neumann, useful for exactness checks."""
        w = np.asarray(weights, dtype=float)
        return cls(lambda x: float(w @ x), lambda x: w.copy(), lambda x: np.zeros_like(x), "linear")

    @classmethod
    def quadratic(cls, weights) -> "TestFunction":
        """Per-level bump ``sum_k w_k x_k^2`` (zero slope at ``x_k = 0``)."""
        w = np.asarray(weights, dtype=float)
        return cls(lambda x: float(w @ (x * x)), lambda x: 2.0 * w * x, lambda x: 2.0 * w + 0.0 * x, "quadratic")

    @classmethod
    def neumann_cosine(cls, amplitudes, periods) -> "TestFunction":
        """``sum_k a_k cos(pi x_k / p_k)``: smooth, bounded, zero slope at 0."""
        a = np.asarray(amplitudes, dtype=float)
        w = np.pi / np.asarray(periods, dtype=float)
        return cls(
            lambda x: float(np.sum(a * np.cos(w * x))),
            lambda x: -a * w * np.sin(w * x),
            lambda x: -a * w * w * np.cos(w * x),
            "neumann_cosine",
        )

    @classmethod
    def from_callable(cls, f: Callable, step: float = 1e-5, name: str = "callable") -> "TestFunction":
        """Wrap a plain function; derivatives by central differences."""

        def value(x):
            return float(f(x))

        def grad(x):
            g = np.empty_like(x)
            for k in range(x.size):
                e = np.zeros_like(x)
                e[k] = step
                g[k] = (f(x + e) - f(x - e)) / (2 * step)
            return g

        def hess_diag(x):
            h = np.empty_like(x)
            fx = f(x)
            for k in range(x.size):
                e = np.zeros_like(x)
                e[k] = step
                h[k] = (f(x + e) + f(x - e) - 2 * fx) / step**2
            return h

        return cls(value, grad, hess_diag, name)

    @classmethod
    def from_dict(cls, d: dict, levels: int) -> "TestFunction":
        kind = d.get("kind")
        if kind == "constant":
            return cls.constant(float(d.get("value", 1.0)))
        if kind == "quadratic":
            return cls.quadratic(np.broadcast_to(np.asarray(d.get("weights", 1.0), dtype=float), (levels,)))
        if kind == "neumann_cosine":
            a = np.broadcast_to(np.asarray(d.get("amplitudes", 1.0), dtype=float), (levels,))
            p = np.broadcast_to(np.asarray(d.get("periods", 4.0), dtype=float), (levels,))
            return cls.neumann_cosine(a, p)
        raise ValidationError(f"unknown test function kind {kind!r} (constant, quadratic, neumann_cosine)")


def check_neumann(F: TestFunction, points, tol: float = NEUMANN_TOL) -> bool:
    """``dF/dx_k = 0`` on ``{x_k = 0}`` at each sampled point, for every ``k``."""
    for x in np.atleast_2d(np.asarray(points, dtype=float)):
        for k in range(x.size):
            y = x.copy()
            y[k] = 0.0
            if abs(F.grad(y)[k]) > tol:
                return False
    return True


def rescale_path(path: QueuePath, n: int) -> QueuePath:
    """``t -> Z(n t) / sqrt(n)`` as a piecewise-constant path."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    rn = np.sqrt(n)
    return QueuePath(path.times / n, path.bid / rn, path.ask / rn, path.horizon / n)


def snap_to_lattice(x, n: int) -> np.ndarray:
    rn = np.sqrt(n)
    return np.maximum(np.rint(np.asarray(x, dtype=float) * rn), 0.0) / rn


class FiniteDiffs(NamedTuple):
    right: float
    left: float
    second: float
    clamped: bool


def _shift(y, k, h):
    z = np.array(y, dtype=float)
    z[k] += h
    return z


def finite_diffs(F: Callable, y, n: int, k: int) -> FiniteDiffs:
    """Right, left and second differences of ``F`` at ``y`` along level ``k`` (1-based).

    A left step out of the orthant is clamped to ``y_k = 0`` and flagged.
    """
    y = np.asarray(y, dtype=float)
    rn = np.sqrt(n)
    i = k - 1
    h = 1.0 / rn
    fy = F(y)
    fr = F(_shift(y, i, h))
    down = _shift(y, i, -h)
    clamped = bool(down[i] < 0)
    if clamped:
        down[i] = 0.0
    fl = F(down)
    return FiniteDiffs(rn * (fr - fy), rn * (fy - fl), n * (fr + fl - 2 * fy), clamped)


def _right_diff(F, y, n, k, L):
    """Right difference along 1-based ``k``; ghost levels contribute zero."""
    if k < 1 or k > L:
        return 0.0
    return finite_diffs(F, y, n, k).right


def generator_micro(F: Callable, y, n: int, coeffs: EffectiveCoefficients) -> float:
    """Rescaled discrete generator written with finite differences and gates."""
    y = np.asarray(y, dtype=float)
    L = coeffs.levels
    rn = np.sqrt(n)
    s2, f, g = coeffs.sigma_sq_at(y), coeffs.f_at(y), coeffs.g_at(y)
    total = 0.0
    for k in range(1, L + 1):
        i = k - 1
        yk = y[i]
        d = finite_diffs(F, y, n, k)
        occupied = yk * rn >= 1.0 - 1e-9
        empty = abs(yk) * rn < 1e-9
        if occupied:
            total += 0.5 * d.second * s2[i]
            total -= d.left * g[i]
        if empty:
            total += d.right * s2[i] / rn
        total += d.right * f[i]
        if coeffs.alpha_b and yk > 0:
            ym = _shift(y, i, -1.0 / rn)
            mig = _right_diff(F, ym, n, k - 1, L) + _right_diff(F, ym, n, k + 1, L) - 2.0 * d.left
            total += coeffs.alpha_b * yk * mig
    return float(total)


def generator_jump(F: Callable, y, n: int, coeffs: EffectiveCoefficients, block_boundary_migration: bool = False) -> float:
    """Rescaled generator as ``sum rate * (F(y + jump) - F(y))`` over bid-side jumps.

    Rates come straight from the expansion-mode micro model (per unit of
    rescaled time), so this is an independent evaluation path for
    :func:`generator_micro`.
    """
    y = np.asarray(y, dtype=float)
    L = coeffs.levels
    rn = np.sqrt(n)
    Z = np.rint(y * rn)
    cfg = MicroConfig.expansion(coeffs, n, bid0=Z, block_boundary_migration=block_boundary_migration)
    rates = micro_rates(BookState(coeffs.N, Z, Z), None, cfg)[0]
    fy = F(y)
    total = 0.0
    for i in range(L):
        moves = {
            0: [(i, 1)],
            1: [(i, -1)],
            2: [(i, -1)] + ([(i - 1, 1)] if i >= 1 else []),
            3: [(i, -1)] + ([(i + 1, 1)] if i + 1 < L else []),
        }
        for kind, delta in moves.items():
            r = rates[kind, i]
            if r == 0.0:
                continue
            z = y.copy()
            for j, dz in delta:
                z[j] += dz / rn
            total += r * (F(z) - fy)
    return float(total)


def generator_limit(F: TestFunction, x, coeffs: EffectiveCoefficients) -> float:
    x = np.asarray(x, dtype=float)
    s2 = coeffs.sigma_sq_at(x)
    b = coeffs.h_at(x) + coeffs.alpha_b * laplacian(x)
    return float(np.sum(0.5 * s2 * F.hess_diag(x) + b * F.grad(x)))


def default_probes(levels: int, lo: float = 0.25, hi: float = 4.0, per_axis: int = 7, seed: int = 0) -> np.ndarray:
    """Probe points in ``[lo, hi]^levels``: full grid for up to 3 levels, else 400 random points."""
    if levels <= 3:
        axis = np.linspace(lo, hi, per_axis)
        return np.array(list(itertools.product(axis, repeat=levels)))
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, size=(400, levels))


@dataclass(frozen=True)
class GeneratorReport:
    n_list: tuple
    sup_errors: np.ndarray
    ratios: np.ndarray
    band: tuple = RATIO_BAND

    @property
    def passed(self) -> bool:
        if np.max(self.sup_errors) <= 1e-12:
            return True
        return bool(np.all((self.ratios >= self.band[0]) & (self.ratios <= self.band[1])))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "probe_sup_error"])
            for n, e in zip(self.n_list, self.sup_errors.tolist()):
                w.writerow([n, repr(e)])

    def summary(self) -> dict:
        return {
            "n": list(self.n_list),
            "sup_errors": self.sup_errors.tolist(),
            "ratios_per_factor_4": self.ratios.tolist(),
            "band": list(self.band),
            "passed": self.passed,
        }


def generator_convergence_report(F: TestFunction, coeffs: EffectiveCoefficients, n_list, probes=None,
                                 band=RATIO_BAND) -> GeneratorReport:
    """Sup over probes of ``|A_n F - A F|`` for each ``n``.

    Probes are snapped to each ``1/sqrt(n)`` lattice. Ratios between
    successive errors are normalised to a factor-4 step in ``n`` so that
    ``n^{-1/2}`` decay gives exactly 2.
    """
    n_list = tuple(int(n) for n in n_list)
    if probes is None:
        probes = default_probes(coeffs.levels)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    errs = []
    for n in n_list:
        worst = 0.0
        for p in probes:
            y = snap_to_lattice(p, n)
            worst = max(worst, abs(generator_micro(F, y, n, coeffs) - generator_limit(F, y, coeffs)))
        errs.append(worst)
    errs = np.array(errs)
    ratios = []
    for (n0, e0), (n1, e1) in zip(zip(n_list, errs), zip(n_list[1:], errs[1:])):
        if e1 == 0:
            ratios.append(np.inf if e0 > 0 else np.nan)
        else:
            ratios.append((e0 / e1) ** (np.log(4.0) / np.log(n1 / n0)))
    return GeneratorReport(n_list, errs, np.array(ratios), tuple(band))


@dataclass(frozen=True)
class MomentReport:
    """Terminal per-level moments of rescaled micro paths against the reflected SDE."""

    n_list: tuple
    micro_mean: np.ndarray  # (len(n_list), L)
    micro_var: np.ndarray
    meso_mean: np.ndarray  # (L,)
    meso_var: np.ndarray
    mean_err: np.ndarray  # relative, (len(n_list), L)
    var_err: np.ndarray
    replicates: int
    tolerance: float = 0.10
    violations: dict = field(default_factory=dict)

    @property
    def decreasing(self) -> np.ndarray:
        """Per (statistic, level): errors strictly decrease along ``n_list``."""
        out = []
        for e in (self.mean_err, self.var_err):
            out.append(np.all(np.diff(e, axis=0) < 0, axis=0))
        return np.array(out)

    @property
    def final_within_tolerance(self) -> bool:
        return bool(np.all(self.mean_err[-1] <= self.tolerance) and np.all(self.var_err[-1] <= self.tolerance))

    @property
    def passed(self) -> bool:
        if any(self.violations.values()):
            return False
        if np.max(self.mean_err) == 0 and np.max(self.var_err) == 0:
            return True
        return bool(self.final_within_tolerance and np.all(self.decreasing))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "level", "mean_err", "var_err"])
            for a, n in enumerate(self.n_list):
                for k in range(self.meso_mean.size):
                    w.writerow([n, k + 1, repr(float(self.mean_err[a, k])), repr(float(self.var_err[a, k]))])

    def summary(self) -> dict:
        return {
            "n": list(self.n_list),
            "replicates": self.replicates,
            "micro_mean": self.micro_mean.tolist(),
            "micro_var": self.micro_var.tolist(),
            "meso_mean": self.meso_mean.tolist(),
            "meso_var": self.meso_var.tolist(),
            "mean_err": self.mean_err.tolist(),
            "var_err": self.var_err.tolist(),
            "decreasing": self.decreasing.tolist(),
            "tolerance": self.tolerance,
            "final_within_tolerance": self.final_within_tolerance,
            "violations": dict(self.violations),
            "passed": self.passed,
        }


def _rel(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    diff = np.abs(a - b)
    return np.where(b != 0, diff / np.where(b != 0, np.abs(b), 1.0), diff)


def micro_meso_moment_comparison(
    coeffs: EffectiveCoefficients,
    x0,
    n_list,
    horizon: float,
    replicates: int,
    seed: int,
    *,
    dt: float = 1e-3,
    block_boundary_migration: bool = False,
    tolerance: float = 0.10,
    threads: int | None = 1,
) -> MomentReport:
    """Bid-side terminal mean/variance at ``horizon`` for each ``n`` vs one SDE ensemble.

    The SDE ensemble has the same size as each micro ensemble and is shared
    across ``n``. Micro streams are salted by ``n``, the SDE stream by 0.
    """
    n_list = tuple(int(n) for n in n_list)
    meso = simulate_meso(MesoConfig(coeffs, x0, dt), horizon, replicates, seed, threads=threads, salt=0)
    m_mean = meso.terminal_x.mean(axis=0)
    m_var = meso.terminal_x.var(axis=0, ddof=1)
    means, vars_ = [], []
    negative_micro = 0
    for n in n_list:
        cfg = MicroConfig.expansion(coeffs, n, x0, block_boundary_migration=block_boundary_migration)
        term = parallel_map(lambda r: terminal_book(cfg, horizon, seed, r, salt=n)[0], range(replicates), threads)
        z = np.stack(term) / np.sqrt(n)
        negative_micro += int(np.sum(z < 0))
        means.append(z.mean(axis=0))
        vars_.append(z.var(axis=0, ddof=1))
    means, vars_ = np.array(means), np.array(vars_)
    violations = dict(meso.violations, negative_micro=negative_micro)
    return MomentReport(n_list, means, vars_, m_mean, m_var, _rel(means, m_mean), _rel(vars_, m_var),
                        int(replicates), float(tolerance), violations)
