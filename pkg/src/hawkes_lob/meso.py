"""Reflected mesoscopic SDE for rescaled queue volumes.

    dX_i = [h_i(X_i) + alpha_b (X_{i+1} + X_{i-1} - 2 X_i)] dt + noise_i + d eta_i

with pinned ghost levels ``X_0 = X_N = 0`` and normal reflection at zero.
The scheme is explicit Euler-Maruyama followed by componentwise projection
onto the orthant; the projected amount is the increment of ``eta``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numba
import numpy as np

from ._rng import parallel_map, stream
from .coefficients import EffectiveCoefficients, _pl_eval
from .errors import NumericalError, ValidationError

GAMMA_TOL = 1e-10


@dataclass(frozen=True)
class MesoState:
    X: np.ndarray
    eta: np.ndarray
    t: float = 0.0

    @classmethod
    def start(cls, x0) -> "MesoState":
        x0 = np.asarray(x0, dtype=float)
        return cls(x0.copy(), np.zeros_like(x0), 0.0)


@dataclass(frozen=True)
class MesoConfig:
    """Coefficients, noise model, step size and start profile.

    ``noise_mode='diagonal'`` uses ``sigma_i(X_i) dW_i`` with
    ``sigma_i = sqrt(sigma_sq_i)``; ``'correlated'`` uses the constant factor
    ``gamma`` (``gamma @ gamma.T = sigma_x``). If only ``sigma_x`` is given the
    factor is computed from it.
    """

    coeffs: EffectiveCoefficients
    x0: np.ndarray
    dt: float = 1e-3
    noise_mode: str = "diagonal"
    gamma: np.ndarray | None = None
    sigma_x: np.ndarray | None = None

    def __post_init__(self):
        L = self.coeffs.levels
        x0 = np.asarray(self.x0, dtype=float)
        if x0.ndim == 0:
            x0 = np.full(L, float(x0))
        if x0.shape != (L,) or np.any(x0 < 0) or not np.all(np.isfinite(x0)):
            raise ValidationError(f"x0 must be {L} finite non-negative values")
        object.__setattr__(self, "x0", x0)
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValidationError("dt must be positive")
        if self.noise_mode not in ("diagonal", "correlated"):
            raise ValidationError(f"noise_mode must be 'diagonal' or 'correlated', got {self.noise_mode!r}")
        if self.noise_mode == "correlated":
            from .covariance import factor_psd

            sigma_x = None if self.sigma_x is None else np.asarray(self.sigma_x, dtype=float)
            gamma = self.gamma
            if gamma is None:
                if sigma_x is None:
                    raise ValidationError("correlated noise needs gamma or sigma_x")
                gamma = factor_psd(sigma_x)
            gamma = np.asarray(gamma, dtype=float)
            if gamma.shape != (L, L):
                raise ValidationError(f"gamma must have shape ({L}, {L})")
            if sigma_x is not None:
                err = np.linalg.norm(gamma @ gamma.T - sigma_x)
                if err > GAMMA_TOL * max(1.0, np.linalg.norm(sigma_x)):
                    raise ValidationError(f"gamma @ gamma.T misses sigma_x by {err:.3g} (Frobenius)")
            object.__setattr__(self, "gamma", gamma)
            object.__setattr__(self, "sigma_x", sigma_x)

    def to_dict(self) -> dict:
        d = {
            "coefficients": self.coeffs.to_dict(),
            "x0": self.x0.tolist(),
            "dt": self.dt,
            "noise_mode": self.noise_mode,
        }
        if self.gamma is not None:
            d["gamma"] = self.gamma.tolist()
        if self.sigma_x is not None:
            d["sigma_x"] = self.sigma_x.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MesoConfig":
        unknown = set(d) - {"coefficients", "x0", "dt", "noise_mode", "gamma", "sigma_x"}
        if unknown:
            raise ValidationError(f"unknown meso config key(s): {sorted(unknown)}")
        if "coefficients" not in d or "x0" not in d:
            raise ValidationError("meso config needs keys 'coefficients' and 'x0'")
        return cls(
            EffectiveCoefficients.from_dict(d["coefficients"]),
            d["x0"],
            float(d.get("dt", 1e-3)),
            d.get("noise_mode", "diagonal"),
            None if d.get("gamma") is None else np.asarray(d["gamma"], dtype=float),
            None if d.get("sigma_x") is None else np.asarray(d["sigma_x"], dtype=float),
        )


def laplacian(x) -> np.ndarray:
    """``x_{i+1} + x_{i-1} - 2 x_i`` with zero ghosts at both ends."""
    x = np.asarray(x, dtype=float)
    padded = np.concatenate([[0.0], x, [0.0]])
    return padded[2:] + padded[:-2] - 2.0 * x


def drift(x, coeffs: EffectiveCoefficients) -> np.ndarray:
    return coeffs.h_at(x) + coeffs.alpha_b * laplacian(x)


def _noise(state: MesoState, dW, config: MesoConfig) -> np.ndarray:
    if config.noise_mode == "correlated":
        return config.gamma @ dW
    sig = np.sqrt(np.maximum(config.coeffs.sigma_sq_at(state.X), 0.0))
    return sig * dW


def step_reflected_euler(state: MesoState, dt: float, dW, config: MesoConfig) -> MesoState:
    """One projected Euler step; ``dW`` ~ N(0, dt I)."""
    if not dt > 0:
        raise ValidationError("dt must be positive")
    dW = np.asarray(dW, dtype=float)
    if dW.shape != state.X.shape:
        raise ValidationError("increment length does not match the number of levels")
    with np.errstate(over="ignore", invalid="ignore"):  # reported below as NumericalError
        proposal = state.X + drift(state.X, config.coeffs) * dt + _noise(state, dW, config)
    bad = ~np.isfinite(proposal)
    if np.any(bad):
        level = int(np.argmax(bad)) + 1
        step = int(round(state.t / dt))
        raise NumericalError(f"non-finite value at level {level} in step {step}")
    X = np.maximum(proposal, 0.0)
    d_eta = np.maximum(-proposal, 0.0)
    return MesoState(X, state.eta + d_eta, state.t + dt)


@numba.njit(cache=True, nogil=True)
def _meso_path(x0, n_steps, dt, knots, values, counts, alpha_b, correlated, gamma, rng, every, out_x, out_eta):
    L = x0.shape[0]
    x = x0.copy()
    eta = np.zeros(L)
    prop = np.empty(L)
    xi = np.empty(L)
    sq = np.sqrt(dt)
    # violations: negative X, decreasing eta, complementarity
    viol = np.zeros(3, dtype=np.int64)
    out_x[0] = x
    out_eta[0] = eta
    g = 1
    for step in range(n_steps):
        for i in range(L):
            xi[i] = rng.standard_normal() * sq
        for i in range(L):
            left = x[i - 1] if i > 0 else 0.0
            right = x[i + 1] if i < L - 1 else 0.0
            f = _pl_eval(knots[1, i], values[1, i], counts[1, i], x[i])
            gg = _pl_eval(knots[2, i], values[2, i], counts[2, i], x[i])
            mu = f - gg + alpha_b * (left + right - 2.0 * x[i])
            if correlated:
                noise = 0.0
                for j in range(L):
                    noise += gamma[i, j] * xi[j]
            else:
                s2 = _pl_eval(knots[0, i], values[0, i], counts[0, i], x[i])
                noise = np.sqrt(s2 if s2 > 0.0 else 0.0) * xi[i]
            prop[i] = x[i] + mu * dt + noise
        for i in range(L):
            p = prop[i]
            if not np.isfinite(p):
                return viol, step, i
            xn = p if p > 0.0 else 0.0
            de = -p if p < 0.0 else 0.0
            if xn < 0.0:
                viol[0] += 1
            if de < 0.0:
                viol[1] += 1
            if de > 0.0 and xn != 0.0:
                viol[2] += 1
            x[i] = xn
            eta[i] += de
        if (step + 1) % every == 0:
            out_x[g] = x
            out_eta[g] = eta
            g += 1
    return viol, -1, -1


@dataclass(frozen=True)
class MesoEnsemble:
    """Independent reflected paths sampled on a common output grid."""

    times: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    terminal_x: np.ndarray
    terminal_eta: np.ndarray
    violations: dict
    paths_x: np.ndarray | None = None
    paths_eta: np.ndarray | None = None
    config: MesoConfig | None = field(default=None, repr=False)

    def moments_csv(self, path) -> None:
        L = self.mean.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "level", "mean", "var"])
            for g, t in enumerate(self.times.tolist()):
                for k in range(L):
                    w.writerow([repr(t), k + 1, repr(float(self.mean[g, k])), repr(float(self.var[g, k]))])

    def paths_csv(self, path) -> None:
        if self.paths_x is None:
            raise ValidationError("ensemble was simulated without keep_paths=True")
        L = self.mean.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["path", "t"] + [f"x_{k + 1}" for k in range(L)] + [f"eta_{k + 1}" for k in range(L)])
            for p in range(self.paths_x.shape[0]):
                for g, t in enumerate(self.times.tolist()):
                    w.writerow([p, repr(t)] + [repr(v) for v in self.paths_x[p, g].tolist()]
                               + [repr(v) for v in self.paths_eta[p, g].tolist()])


def simulate_meso(
    config: MesoConfig,
    horizon: float,
    paths: int,
    seed: int,
    *,
    output_step: float | None = None,
    keep_paths: bool = False,
    threads: int | None = 1,
    salt: int = 0,
) -> MesoEnsemble:
    """Monte Carlo ensemble of reflected Euler paths.

    The horizon is truncated to the nearest multiple of ``dt``. The output
    grid uses ``output_step`` rounded to a whole number of steps (default:
    about 100 grid intervals). Moments use ``ddof=1``.
    """
    if paths < 1:
        raise ValidationError("need at least one path")
    dt = config.dt
    n_steps = int(round(horizon / dt))
    if n_steps < 1:
        raise ValidationError("horizon shorter than one step")
    if output_step is None:
        every = max(1, n_steps // 100)
    else:
        every = max(1, int(round(output_step / dt)))
    while n_steps % every:
        every -= 1
    G = n_steps // every + 1
    L = config.coeffs.levels
    knots, values, counts = config.coeffs.packed()
    correlated = config.noise_mode == "correlated"
    gamma = config.gamma if correlated else np.zeros((L, L))

    def one(p):
        out_x = np.empty((G, L))
        out_eta = np.empty((G, L))
        viol, bad_step, bad_level = _meso_path(config.x0, n_steps, dt, knots, values, counts, config.coeffs.alpha_b,
                                               correlated, gamma, stream(seed, p, salt), every, out_x, out_eta)
        if bad_step >= 0:
            raise NumericalError(f"non-finite value at level {bad_level + 1} in step {bad_step} (path {p})")
        return out_x, out_eta, viol

    results = parallel_map(one, range(paths), threads)
    xs = np.stack([r[0] for r in results])
    etas = np.stack([r[1] for r in results])
    viol = np.sum([r[2] for r in results], axis=0)
    times = np.arange(G) * every * dt
    var = xs.var(axis=0, ddof=1) if paths > 1 else np.zeros((G, L))
    return MesoEnsemble(
        times=times,
        mean=xs.mean(axis=0),
        var=var,
        terminal_x=xs[:, -1, :].copy(),
        terminal_eta=etas[:, -1, :].copy(),
        violations={"negative_x": int(viol[0]), "eta_decrease": int(viol[1]), "complementarity": int(viol[2])},
        paths_x=xs if keep_paths else None,
        paths_eta=etas if keep_paths else None,
        config=config,
    )


def dirichlet_modes(L: int):
    """Eigenpairs of ``-laplacian`` on ``L`` levels with zero ghosts.

    Returns ``(lam, V)`` with ``lam[m-1] = 2 (1 - cos(m pi / (L+1)))`` and
    orthonormal columns ``V[:, m-1] ∝ sin(m pi i / (L+1))``.
    """
    N = L + 1
    m = np.arange(1, L + 1)
    i = np.arange(1, L + 1)
    V = np.sin(np.outer(i, m) * np.pi / N) * np.sqrt(2.0 / N)
    lam = 2.0 * (1.0 - np.cos(m * np.pi / N))
    return lam, V


@dataclass(frozen=True)
class HeatRelaxation:
    times: np.ndarray
    numeric: np.ndarray
    exact: np.ndarray

    @property
    def max_relative_error(self) -> float:
        scale = np.maximum(np.linalg.norm(self.exact, axis=1), np.finfo(float).tiny)
        return float(np.max(np.linalg.norm(self.numeric - self.exact, axis=1) / scale))

    @property
    def terminal_relative_error(self) -> float:
        return float(np.linalg.norm(self.numeric[-1] - self.exact[-1]) / np.linalg.norm(self.exact[-1]))


def heat_relaxation(alpha_b: float, x0, horizon: float, dt: float = 1e-4, output_every: int | None = None) -> HeatRelaxation:
    """Noise-free, drift-free relaxation ``dx/dt = alpha_b * laplacian(x)``.

    Integrated with classical RK4 at step ``dt`` and compared with the
    closed-form sine-mode expansion.
    """
    if alpha_b <= 0:
        raise ValidationError("heat relaxation needs alpha_b > 0")
    x = np.asarray(x0, dtype=float).copy()
    L = x.size
    n_steps = int(round(horizon / dt))
    if output_every is None:
        output_every = max(1, n_steps // 1000)
    rhs = lambda y: alpha_b * laplacian(y)  # noqa: E731
    out = [x.copy()]
    ts = [0.0]
    for k in range(1, n_steps + 1):
        k1 = rhs(x)
        k2 = rhs(x + 0.5 * dt * k1)
        k3 = rhs(x + 0.5 * dt * k2)
        k4 = rhs(x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if k % output_every == 0 or k == n_steps:
            out.append(x.copy())
            ts.append(k * dt)
    times = np.array(ts)
    lam, V = dirichlet_modes(L)
    coef = V.T @ np.asarray(x0, dtype=float)
    exact = (np.exp(-alpha_b * np.outer(times, lam)) * coef) @ V.T
    return HeatRelaxation(times, np.array(out), exact)
