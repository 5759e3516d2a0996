"""Effective per-level coefficients of the diffusive limit.

Each level ``k`` carries a variance function ``sigma_sq[k]``, an up-drift
``f[k]`` and a down-drift ``g[k]``; levels are coupled by the migration
coefficient ``alpha_b``. Functions are piecewise linear in the rescaled queue
size with linear extrapolation beyond the outer knots, so affine maps are the
two-knot special case.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import ValidationError


class PiecewiseLinear:
    """Continuous piecewise-linear map, linearly extrapolated at both ends."""

    def __init__(self, knots, values):
        knots = np.asarray(knots, dtype=float).reshape(-1)
        values = np.asarray(values, dtype=float).reshape(-1)
        if knots.size < 2 or knots.size != values.size:
            raise ValidationError("piecewise-linear map needs >= 2 knots and one value per knot")
        if np.any(np.diff(knots) <= 0):
            raise ValidationError("knots must be strictly increasing")
        if not (np.all(np.isfinite(knots)) and np.all(np.isfinite(values))):
            raise ValidationError("knots and values must be finite")
        self.knots = knots
        self.values = values

    @classmethod
    def affine(cls, intercept: float, slope: float = 0.0) -> "PiecewiseLinear":
        return cls([0.0, 1.0], [intercept, intercept + slope])

    @classmethod
    def constant(cls, c: float) -> "PiecewiseLinear":
        return cls.affine(c, 0.0)

    def __call__(self, x):
        return _pl_eval_vec(self.knots, self.values, self.knots.size, np.asarray(x, dtype=float))

    def min_on_halfline(self) -> float:
        """Infimum over ``x >= 0`` (``-inf`` if it decreases without bound)."""
        k, v = self.knots, self.values
        right_slope = (v[-1] - v[-2]) / (k[-1] - k[-2])
        if right_slope < 0:
            return -np.inf
        pts = np.concatenate([[0.0], k[k > 0]])
        return float(np.min(self(pts)))

    def to_json(self):
        k, v = self.knots, self.values
        if k.size == 2 and k[0] == 0.0 and k[1] == 1.0:
            if v[0] == v[1]:
                return float(v[0])
            return {"affine": [float(v[0]), float(v[1] - v[0])]}
        return {"knots": k.tolist(), "values": v.tolist()}

    @classmethod
    def from_json(cls, obj) -> "PiecewiseLinear":
        if isinstance(obj, (int, float)):
            return cls.constant(float(obj))
        if isinstance(obj, PiecewiseLinear):
            return obj
        if isinstance(obj, dict):
            if set(obj) == {"affine"}:
                c0, c1 = obj["affine"]
                return cls.affine(c0, c1)
            if set(obj) == {"knots", "values"}:
                return cls(obj["knots"], obj["values"])
        raise ValidationError(f"cannot read coefficient function from {obj!r}")

    def __repr__(self):
        return f"PiecewiseLinear(knots={self.knots.tolist()}, values={self.values.tolist()})"


@numba.njit(cache=True, nogil=True)
def _pl_eval(xk, yk, m, x):
    if x <= xk[0]:
        i = 0
    elif x >= xk[m - 1]:
        i = m - 2
    else:
        i = 0
        while xk[i + 1] < x:
            i += 1
    return yk[i] + (yk[i + 1] - yk[i]) * (x - xk[i]) / (xk[i + 1] - xk[i])


@numba.njit(cache=True)
def _pl_eval_vec(xk, yk, m, x):
    out = np.empty(x.shape)
    flat_x = x.reshape(-1)
    flat = out.reshape(-1)
    for i in range(flat_x.size):
        flat[i] = _pl_eval(xk, yk, m, flat_x[i])
    return out


def _as_levels(obj, L: int, name: str) -> tuple[PiecewiseLinear, ...]:
    if isinstance(obj, (list, tuple)):
        if len(obj) != L:
            raise ValidationError(f"'{name}' must give one function per level ({L}), got {len(obj)}")
        return tuple(PiecewiseLinear.from_json(o) for o in obj)
    fn = PiecewiseLinear.from_json(obj)
    return (fn,) * L


@dataclass(frozen=True)
class EffectiveCoefficients:
    """Per-level ``sigma_sq``, ``f``, ``g`` and the migration coefficient ``alpha_b``.

    ``N`` is the book depth; there are ``N - 1`` tracked levels.
    """

    N: int
    sigma_sq: tuple
    f: tuple
    g: tuple
    alpha_b: float = 0.0

    def __post_init__(self):
        if int(self.N) < 2:
            raise ValidationError("depth N must be >= 2 (at least one tracked level)")
        L = int(self.N) - 1
        object.__setattr__(self, "N", int(self.N))
        for name in ("sigma_sq", "f", "g"):
            object.__setattr__(self, name, _as_levels(getattr(self, name), L, name))
        if not (np.isfinite(self.alpha_b) and self.alpha_b >= 0):
            raise ValidationError("alpha_b must be a non-negative real")
        object.__setattr__(self, "alpha_b", float(self.alpha_b))
        for k, fn in enumerate(self.sigma_sq):
            if fn.min_on_halfline() < 0:
                raise ValidationError(f"sigma_sq at level {k + 1} is negative somewhere on x >= 0")

    @property
    def levels(self) -> int:
        return self.N - 1

    @classmethod
    def uniform(cls, N: int, sigma_sq=0.0, f=0.0, g=0.0, alpha_b: float = 0.0) -> "EffectiveCoefficients":
        """Same functions at every level (scalars mean constants)."""
        return cls(N, sigma_sq, f, g, alpha_b)

    def sigma_sq_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([self.sigma_sq[k](x[k]) for k in range(self.levels)], dtype=float)

    def f_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([self.f[k](x[k]) for k in range(self.levels)], dtype=float)

    def g_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([self.g[k](x[k]) for k in range(self.levels)], dtype=float)

    def h_at(self, x) -> np.ndarray:
        """Net drift ``h_k = f_k - g_k`` evaluated level-wise."""
        return self.f_at(x) - self.g_at(x)

    def packed(self):
        """Rectangular arrays for the compiled kernels.

        Returns ``(knots, values, counts)`` each with a leading axis of
        size 3 (sigma_sq, f, g) then one row per level.
        """
        fns = (self.sigma_sq, self.f, self.g)
        width = max(fn.knots.size for group in fns for fn in group)
        L = self.levels
        knots = np.zeros((3, L, width))
        values = np.zeros((3, L, width))
        counts = np.zeros((3, L), dtype=np.int64)
        for a, group in enumerate(fns):
            for k, fn in enumerate(group):
                m = fn.knots.size
                knots[a, k, :m] = fn.knots
                values[a, k, :m] = fn.values
                counts[a, k] = m
        return knots, values, counts

    def to_dict(self) -> dict:
        def enc(group):
            first = group[0].to_json()
            if all(fn.to_json() == first for fn in group):
                return first
            return [fn.to_json() for fn in group]

        return {
            "depth": self.N,
            "sigma_sq": enc(self.sigma_sq),
            "f": enc(self.f),
            "g": enc(self.g),
            "alpha_b": self.alpha_b,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EffectiveCoefficients":
        unknown = set(d) - {"depth", "sigma_sq", "f", "g", "alpha_b"}
        if unknown:
            raise ValidationError(f"unknown coefficient key(s): {sorted(unknown)}")
        if "depth" not in d:
            raise ValidationError("coefficients are missing key 'depth'")
        return cls(d["depth"], d.get("sigma_sq", 0.0), d.get("f", 0.0), d.get("g", 0.0),
                   d.get("alpha_b", 0.0))
