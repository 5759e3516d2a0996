"""Microscopic integer queue dynamics on both sides of a two-tick-spread book.

Levels are 1-based in the public API (``1 .. N-1``); ghost levels ``0`` and
``N`` always read as zero. Two modes share the event machinery:

``hawkes``
    Arrival, removal and migration intensities are self-exciting, with
    state-dependent affine baselines and a removal gate on empty queues.
``expansion``
    Rates are the diffusive expansions built from
    :class:`~hawkes_lob.coefficients.EffectiveCoefficients` at scale ``n``,
    with the lower-order remainders set to zero.

The ask side is an independent mirror of the bid side.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numba
import numpy as np

from ._rng import stream
from .coefficients import EffectiveCoefficients, _pl_eval
from .errors import NumericalError, PreconditionError, StabilityError, ValidationError
from .hawkes import spectral_radius

SIDES = ("bid", "ask")
KINDS = ("arrival", "removal", "migrate_in", "migrate_out")
ARRIVAL, REMOVAL, MIGRATE_IN, MIGRATE_OUT = range(4)

# excitation channels per (side, level):
# 0 arr<-arr, 1 arr<-rem, 2 arr<-mig, 3 rem<-arr, 4 rem<-rem,
# 5 mig<-arr, 6 mig<-rem, 7 mig<-mig
N_CHANNELS = 8
_EXCITATION_NAMES = ("11", "12", "14", "21", "22")


def _side_index(side) -> int:
    if isinstance(side, str):
        try:
            return SIDES.index(side)
        except ValueError:
            raise ValidationError(f"unknown side {side!r}") from None
    return int(side)


def _kind_index(kind) -> int:
    if isinstance(kind, str):
        try:
            return KINDS.index(kind)
        except ValueError:
            raise ValidationError(f"unknown event kind {kind!r}") from None
    return int(kind)


@dataclass(frozen=True)
class BookState:
    N: int
    bid: np.ndarray
    ask: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        L = int(self.N) - 1
        if L < 1:
            raise ValidationError("depth N must be >= 2")
        for name in ("bid", "ask"):
            v = np.asarray(getattr(self, name))
            if v.shape != (L,):
                raise ValidationError(f"{name} must have length N-1 = {L}")
            if not np.all(v == np.round(v)) or np.any(v < 0):
                raise ValidationError(f"{name} volumes must be non-negative integers")
            v = v.astype(np.int64)
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        object.__setattr__(self, "N", int(self.N))

    def side(self, side) -> np.ndarray:
        return self.ask if _side_index(side) else self.bid

    def volume(self, side, level: int) -> int:
        """Queue size at ``level``; ghost levels ``0`` and ``N`` read as zero."""
        if level <= 0 or level >= self.N:
            return 0
        return int(self.side(side)[level - 1])

    def as_array(self) -> np.ndarray:
        return np.stack([self.bid, self.ask])


class MicroEvent(NamedTuple):
    time: float
    side: str
    kind: str
    level: int


def apply_event(state: BookState, event: MicroEvent) -> BookState:
    """Book after one unit event.

    Migration into a ghost level removes the unit from the tracked book.
    """
    s, k, i = _side_index(event.side), _kind_index(event.kind), int(event.level)
    L = state.N - 1
    if not 1 <= i <= L:
        raise PreconditionError(f"level {i} outside 1..{L}")
    z = state.as_array().copy()
    if k == ARRIVAL:
        z[s, i - 1] += 1
    else:
        if z[s, i - 1] < 1:
            raise PreconditionError(f"{KINDS[k]} from empty {SIDES[s]} level {i}")
        z[s, i - 1] -= 1
        if k == MIGRATE_IN and i - 1 >= 1:
            z[s, i - 2] += 1
        elif k == MIGRATE_OUT and i + 1 <= L:
            z[s, i] += 1
    return BookState(state.N, z[0], z[1], float(event.time))


def _levels(x, L: int, name: str, dtype=float) -> np.ndarray:
    a = np.asarray(x, dtype=dtype)
    if a.ndim == 0:
        a = np.full(L, a, dtype=dtype)
    if a.shape != (L,):
        raise ValidationError(f"'{name}' must be a scalar or have one entry per level ({L})")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"'{name}' must be finite")
    return a


@dataclass(frozen=True)
class AffineBaseline:
    """Per-level baseline ``z -> max(0, c0 + c1 * z)``."""

    c0: np.ndarray
    c1: np.ndarray

    def __call__(self, z) -> np.ndarray:
        return np.maximum(0.0, self.c0 + self.c1 * np.asarray(z, dtype=float))


@dataclass(frozen=True)
class MigrationSpec:
    """Per-unit migration rate ``a(t) = eta + sum_l kappa_l * decayed N^l``.

    ``kappa`` and ``rho`` have one column per source (arrival, removal,
    migration).
    """

    eta: np.ndarray
    kappa: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        if np.any(self.eta < 0) or np.any(self.kappa < 0):
            raise ValidationError("migration eta and kappa must be non-negative")
        if np.any((self.kappa > 0) & (self.rho <= 0)):
            raise ValidationError("migration rho must be positive wherever kappa > 0")


@dataclass(frozen=True)
class QueueExcitation:
    """Exponential kernels feeding arrivals (11, 12, 14) and removals (21, 22).

    ``alpha[name]``/``beta[name]`` are per-level arrays; the first digit is the
    excited mechanism, the second the source (4 = migration out of the level,
    both directions pooled).
    """

    alpha: dict
    beta: dict

    def __post_init__(self):
        for name in _EXCITATION_NAMES:
            a, b = self.alpha[name], self.beta[name]
            if np.any(a < 0):
                raise ValidationError(f"alpha{name} must be non-negative")
            if np.any((a > 0) & (b <= 0)):
                raise ValidationError(f"beta{name} must be positive wherever alpha{name} > 0")

    def branching(self, level: int) -> np.ndarray:
        """2x2 arrival/removal branching matrix at 0-based ``level``."""

        def r(name):
            a, b = self.alpha[name][level], self.beta[name][level]
            return a / b if a > 0 else 0.0

        return np.array([[r("11"), r("12")], [r("21"), r("22")]])


@dataclass(frozen=True)
class MicroConfig:
    """Everything needed to simulate the microscopic book.

    Build with :meth:`hawkes` or :meth:`expansion` rather than directly.
    """

    mode: str
    N: int
    n: int
    initial: BookState
    block_boundary_migration: bool
    arrival_baseline: AffineBaseline | None = None
    removal_baseline: AffineBaseline | None = None
    excitation: QueueExcitation | None = None
    migration: MigrationSpec | None = None
    coeffs: EffectiveCoefficients | None = None
    rate_cap: float = 1e9
    max_events: int = 50_000_000

    def __post_init__(self):
        if self.mode not in ("hawkes", "expansion"):
            raise ValidationError(f"mode must be 'hawkes' or 'expansion', got {self.mode!r}")
        if int(self.n) < 1:
            raise ValidationError("scale n must be >= 1")
        if self.initial.N != self.N:
            raise ValidationError("initial state depth does not match N")
        if not self.rate_cap > 0:
            raise ValidationError("rate_cap must be positive")
        if self.mode == "hawkes":
            for lvl in range(self.N - 1):
                rho = spectral_radius(self.excitation.branching(lvl))
                if rho >= 1:
                    raise StabilityError(
                        f"arrival/removal Hawkes subsystem at level {lvl + 1} is unstable (rho={rho:.4g})"
                    )
        elif self.coeffs is None or self.coeffs.N != self.N:
            raise ValidationError("expansion mode needs EffectiveCoefficients with matching depth")

    @property
    def levels(self) -> int:
        return self.N - 1

    @classmethod
    def hawkes(
        cls,
        N: int,
        bid0,
        ask0=None,
        *,
        arrival=(0.0, 0.0),
        removal=(0.0, 0.0),
        alpha=None,
        beta=None,
        eta=0.0,
        kappa=0.0,
        rho=1.0,
        n: int = 1,
        block_boundary_migration: bool = True,
        rate_cap: float = 1e9,
    ) -> "MicroConfig":
        """Hawkes-mode configuration.

        ``arrival``/``removal`` are ``(c0, c1)`` pairs (scalars or per-level
        arrays) of the affine baselines. ``alpha``/``beta`` map the names
        ``"11", "12", "14", "21", "22"`` to scalars or per-level arrays;
        missing names mean no excitation; a scalar ``beta`` applies to all
        kernels. ``kappa``/``rho`` are scalars, a
        length-3 sequence (arrival, removal, migration sources) or an
        ``(N-1, 3)`` array.
        """
        L = int(N) - 1
        alpha = dict(alpha or {})
        if np.isscalar(beta):
            beta = dict.fromkeys(_EXCITATION_NAMES, beta)
        beta = dict(beta or {})
        unknown = (set(alpha) | set(beta)) - set(_EXCITATION_NAMES)
        if unknown:
            raise ValidationError(f"unknown excitation name(s): {sorted(unknown)}")
        exc = QueueExcitation(
            {k: _levels(alpha.get(k, 0.0), L, "alpha" + k) for k in _EXCITATION_NAMES},
            {k: _levels(beta.get(k, 1.0), L, "beta" + k) for k in _EXCITATION_NAMES},
        )
        mig = MigrationSpec(_levels(eta, L, "eta"), _per_source(kappa, L, "kappa"), _per_source(rho, L, "rho"))
        bid0 = np.asarray(bid0)
        ask0 = bid0 if ask0 is None else np.asarray(ask0)
        return cls(
            mode="hawkes",
            N=int(N),
            n=int(n),
            initial=BookState(N, bid0, ask0),
            block_boundary_migration=bool(block_boundary_migration),
            arrival_baseline=AffineBaseline(_levels(arrival[0], L, "arrival c0"), _levels(arrival[1], L, "arrival c1")),
            removal_baseline=AffineBaseline(_levels(removal[0], L, "removal c0"), _levels(removal[1], L, "removal c1")),
            excitation=exc,
            migration=mig,
            rate_cap=float(rate_cap),
        )

    @classmethod
    def expansion(
        cls,
        coeffs: EffectiveCoefficients,
        n: int,
        x0=None,
        *,
        bid0=None,
        ask0=None,
        block_boundary_migration: bool = True,
        rate_cap: float = 1e9,
    ) -> "MicroConfig":
        """Expansion-mode configuration.

        The initial book is either given as integer queues ``bid0``/``ask0``
        or as a rescaled profile ``x0`` (rounded to ``x0 * sqrt(n)``).
        Boundary migration is blocked by default; pass
        ``block_boundary_migration=False`` to let it drain into the ghost
        levels, which is the behaviour the rescaled generator and the
        pinned-Laplacian SDE describe.
        """
        N = coeffs.N
        if bid0 is None:
            if x0 is None:
                raise ValidationError("give either x0 or bid0")
            bid0 = np.rint(_levels(x0, N - 1, "x0") * np.sqrt(n))
        ask0 = bid0 if ask0 is None else ask0
        return cls(
            mode="expansion",
            N=N,
            n=int(n),
            initial=BookState(N, np.asarray(bid0), np.asarray(ask0)),
            block_boundary_migration=bool(block_boundary_migration),
            coeffs=coeffs,
            rate_cap=float(rate_cap),
        )

    def with_scale(self, n: int, x0=None) -> "MicroConfig":
        """Expansion-mode copy at another scale, re-rounding the rescaled start."""
        if self.mode != "expansion":
            raise ValidationError("with_scale applies to expansion mode only")
        if x0 is None:
            x0 = self.initial.bid / np.sqrt(self.n)
        return MicroConfig.expansion(self.coeffs, n, x0, block_boundary_migration=self.block_boundary_migration,
                                     rate_cap=self.rate_cap)

    # -- serialisation -------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "mode": self.mode,
            "depth": self.N,
            "n": self.n,
            "initial_bid": self.initial.bid.tolist(),
            "initial_ask": self.initial.ask.tolist(),
            "block_boundary_migration": self.block_boundary_migration,
            "rate_cap": self.rate_cap,
        }
        if self.mode == "expansion":
            d["coefficients"] = self.coeffs.to_dict()
        else:
            d["arrival"] = [self.arrival_baseline.c0.tolist(), self.arrival_baseline.c1.tolist()]
            d["removal"] = [self.removal_baseline.c0.tolist(), self.removal_baseline.c1.tolist()]
            d["alpha"] = {k: v.tolist() for k, v in self.excitation.alpha.items()}
            d["beta"] = {k: v.tolist() for k, v in self.excitation.beta.items()}
            d["eta"] = self.migration.eta.tolist()
            d["kappa"] = self.migration.kappa.tolist()
            d["rho"] = self.migration.rho.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MicroConfig":
        d = dict(d)
        mode = d.pop("mode", "hawkes")
        common = {"depth", "n", "initial_bid", "initial_ask", "block_boundary_migration", "rate_cap"}
        if mode == "expansion":
            allowed = common | {"coefficients", "x0"}
        elif mode == "hawkes":
            allowed = common | {"arrival", "removal", "alpha", "beta", "eta", "kappa", "rho"}
        else:
            raise ValidationError(f"unknown micro mode {mode!r}")
        unknown = set(d) - allowed
        if unknown:
            raise ValidationError(f"unknown micro config key(s): {sorted(unknown)}")
        extra = {}
        if "block_boundary_migration" in d:
            extra["block_boundary_migration"] = bool(d["block_boundary_migration"])
        if "rate_cap" in d:
            extra["rate_cap"] = float(d["rate_cap"])
        if mode == "expansion":
            if "coefficients" not in d:
                raise ValidationError("expansion config is missing key 'coefficients'")
            coeffs = EffectiveCoefficients.from_dict(d["coefficients"])
            if "depth" in d and int(d["depth"]) != coeffs.N:
                raise ValidationError("key 'depth' disagrees with coefficients.depth")
            return cls.expansion(coeffs, int(d.get("n", 1)), d.get("x0"), bid0=d.get("initial_bid"),
                                 ask0=d.get("initial_ask"), **extra)
        if "depth" not in d or "initial_bid" not in d:
            raise ValidationError("hawkes config needs keys 'depth' and 'initial_bid'")
        return cls.hawkes(
            int(d["depth"]), d["initial_bid"], d.get("initial_ask"),
            arrival=tuple(d.get("arrival", (0.0, 0.0))),
            removal=tuple(d.get("removal", (0.0, 0.0))),
            alpha=d.get("alpha"), beta=d.get("beta"),
            eta=d.get("eta", 0.0), kappa=d.get("kappa", 0.0), rho=d.get("rho", 1.0),
            n=int(d.get("n", 1)), **extra,
        )

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_json(cls, path) -> "MicroConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _per_source(x, L: int, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = np.full((L, 3), float(a))
    elif a.shape == (3,):
        a = np.tile(a, (L, 1))
    if a.shape != (L, 3):
        raise ValidationError(f"'{name}' must be a scalar, length 3, or shape ({L}, 3)")
    return a


# -- compiled rate kernels ------------------------------------------------


def _hawkes_arrays(cfg: MicroConfig):
    L = cfg.levels
    base = np.empty((L, 4))
    base[:, 0] = cfg.arrival_baseline.c0
    base[:, 1] = cfg.arrival_baseline.c1
    base[:, 2] = cfg.removal_baseline.c0
    base[:, 3] = cfg.removal_baseline.c1
    amp = np.empty((L, N_CHANNELS))
    dec = np.empty((L, N_CHANNELS))
    for c, name in enumerate(_EXCITATION_NAMES):
        amp[:, c] = cfg.excitation.alpha[name]
        dec[:, c] = cfg.excitation.beta[name]
    amp[:, 5:8] = cfg.migration.kappa
    dec[:, 5:8] = cfg.migration.rho
    return base, amp, dec, np.asarray(cfg.migration.eta, dtype=float)


@numba.njit(cache=True, nogil=True)
def _hawkes_rates(Z, E, base, eta, block, out):
    L = Z.shape[1]
    total = 0.0
    for s in range(2):
        for l in range(L):
            z = Z[s, l]
            arr = max(0.0, base[l, 0] + base[l, 1] * z) + E[s, l, 0] + E[s, l, 1] + E[s, l, 2]
            rem = 0.0
            if z > 0:
                rem = max(0.0, base[l, 2] + base[l, 3] * z) + E[s, l, 3] + E[s, l, 4]
            a = eta[l] + E[s, l, 5] + E[s, l, 6] + E[s, l, 7]
            mig_in = a * z
            mig_out = a * z
            if block and l == 0:
                mig_in = 0.0
            if block and l == L - 1:
                mig_out = 0.0
            out[s, 0, l] = arr
            out[s, 1, l] = rem
            out[s, 2, l] = mig_in
            out[s, 3, l] = mig_out
            total += arr + rem + mig_in + mig_out
    return total


@numba.njit(cache=True, nogil=True)
def _expansion_rates(Z, n, knots, values, counts, alpha_b, block, out):
    """Rates per unit of rescaled time; returns (total, number of clamped rates)."""
    L = Z.shape[1]
    rn = np.sqrt(n)
    total = 0.0
    clamped = 0
    for s in range(2):
        for l in range(L):
            z = Z[s, l]
            x = z / rn
            sig = _pl_eval(knots[0, l], values[0, l], counts[0, l], x)
            f = _pl_eval(knots[1, l], values[1, l], counts[1, l], x)
            g = _pl_eval(knots[2, l], values[2, l], counts[2, l], x)
            up = 0.5 * n * sig + rn * f
            if up < 0.0:
                up = 0.0
                clamped += 1
            down = 0.0
            if z > 0:
                down = 0.5 * n * sig + rn * g
                if down < 0.0:
                    down = 0.0
                    clamped += 1
            mig = rn * alpha_b * x
            mig_in = mig
            mig_out = mig
            if block and l == 0:
                mig_in = 0.0
            if block and l == L - 1:
                mig_out = 0.0
            out[s, 0, l] = up
            out[s, 1, l] = down
            out[s, 2, l] = mig_in
            out[s, 3, l] = mig_out
            total += up + down + mig_in + mig_out
    return total, clamped


@numba.njit(cache=True, nogil=True)
def _pick(rates, u):
    L = rates.shape[2]
    c = 0.0
    last = (0, 0, 0)
    for s in range(2):
        for k in range(4):
            for l in range(L):
                r = rates[s, k, l]
                if r > 0.0:
                    c += r
                    last = (s, k, l)
                    if u < c:
                        return s, k, l
    return last


@numba.njit(cache=True, nogil=True)
def _apply(Z, s, k, l):
    L = Z.shape[1]
    if k == 0:
        Z[s, l] += 1
        return
    Z[s, l] -= 1
    if k == 2 and l >= 1:
        Z[s, l - 1] += 1
    elif k == 3 and l + 1 < L:
        Z[s, l + 1] += 1


@numba.njit(cache=True, nogil=True)
def _grow(buf_t, buf_i, cap):
    nt = np.empty(cap)
    ni = np.empty((cap, 3), dtype=np.int64)
    m = buf_t.shape[0]
    nt[:m] = buf_t
    ni[:m] = buf_i
    return nt, ni


@numba.njit(cache=True, nogil=True)
def _sim_hawkes(Z, base, amp, dec, eta, block, horizon, rate_cap, max_events, rng, record):
    L = Z.shape[1]
    E = np.zeros((2, L, 8))
    rates = np.empty((2, 4, L))
    cap = 1024 if record else 1
    ev_t = np.empty(cap)
    ev_i = np.empty((cap, 3), dtype=np.int64)
    n_ev = 0
    n_rejected = 0
    t = 0.0
    bound = _hawkes_rates(Z, E, base, eta, block, rates)
    while bound > 0.0:
        if bound > rate_cap:
            return ev_t[:n_ev], ev_i[:n_ev], n_rejected, 1
        w = rng.exponential() / bound
        t += w
        if t > horizon:
            break
        for s in range(2):
            for l in range(L):
                for c in range(8):
                    if E[s, l, c] != 0.0:
                        E[s, l, c] *= np.exp(-dec[l, c] * w)
        total = _hawkes_rates(Z, E, base, eta, block, rates)
        u = rng.random() * bound
        if u < total:
            if n_ev >= max_events:
                return ev_t[:0], ev_i[:0], n_rejected, 2
            s, k, l = _pick(rates, u)
            _apply(Z, s, k, l)
            if k == 0:
                E[s, l, 0] += amp[l, 0]
                E[s, l, 3] += amp[l, 3]
                E[s, l, 5] += amp[l, 5]
            elif k == 1:
                E[s, l, 1] += amp[l, 1]
                E[s, l, 4] += amp[l, 4]
                E[s, l, 6] += amp[l, 6]
            else:
                E[s, l, 2] += amp[l, 2]
                E[s, l, 7] += amp[l, 7]
            if record:
                if n_ev == cap:
                    cap *= 2
                    ev_t, ev_i = _grow(ev_t, ev_i, cap)
                ev_t[n_ev] = t
                ev_i[n_ev, 0] = s
                ev_i[n_ev, 1] = k
                ev_i[n_ev, 2] = l
            n_ev += 1
            total = _hawkes_rates(Z, E, base, eta, block, rates)
        else:
            n_rejected += 1
        bound = total
    if not record:
        return ev_t[:0], ev_i[:0], n_rejected, 0
    return ev_t[:n_ev], ev_i[:n_ev], n_rejected, 0


@numba.njit(cache=True, nogil=True)
def _sim_expansion(Z, n, knots, values, counts, alpha_b, block, horizon, rate_cap, max_events, rng, record):
    """Event-driven simulation in micro time; rates are constant between events."""
    L = Z.shape[1]
    rates = np.empty((2, 4, L))
    cap = 1024 if record else 1
    ev_t = np.empty(cap)
    ev_i = np.empty((cap, 3), dtype=np.int64)
    n_ev = 0
    n_clamped = 0
    t = 0.0
    while True:
        total, clamped = _expansion_rates(Z, n, knots, values, counts, alpha_b, block, rates)
        n_clamped += clamped
        micro_total = total / n
        if micro_total <= 0.0:
            break
        if micro_total > rate_cap:
            return ev_t[:n_ev], ev_i[:n_ev], n_clamped, 1
        t += rng.exponential() / micro_total
        if t > horizon:
            break
        if n_ev >= max_events:
            return ev_t[:0], ev_i[:0], n_clamped, 2
        s, k, l = _pick(rates, rng.random() * total)
        _apply(Z, s, k, l)
        if record:
            if n_ev == cap:
                cap *= 2
                ev_t, ev_i = _grow(ev_t, ev_i, cap)
            ev_t[n_ev] = t
            ev_i[n_ev, 0] = s
            ev_i[n_ev, 1] = k
            ev_i[n_ev, 2] = l
        n_ev += 1
    if not record:
        return ev_t[:0], ev_i[:0], n_clamped, 0
    return ev_t[:n_ev], ev_i[:n_ev], n_clamped, 0


@numba.njit(cache=True)
def _replay(Z0, ev_i):
    m = ev_i.shape[0]
    out = np.empty((m + 1, 2, Z0.shape[1]), dtype=np.int64)
    Z = Z0.copy()
    out[0] = Z
    for e in range(m):
        _apply(Z, ev_i[e, 0], ev_i[e, 1], ev_i[e, 2])
        out[e + 1] = Z
    return out


# -- public operations --------------------------------------------------


def micro_rates(state: BookState, excitation, config: MicroConfig) -> np.ndarray:
    """Event rates indexed ``[side, kind, level - 1]``.

    In Hawkes mode ``excitation`` is the ``(2, N-1, 8)`` array of decayed
    kernel sums (``None`` for a history-free book) and rates are per unit of
    micro time. In expansion mode ``excitation`` is ignored and rates are per
    unit of rescaled time, exactly the expansions with the remainders dropped.
    Negative expansion rates are clamped to zero.
    """
    Z = state.as_array()
    out = np.empty((2, 4, config.levels))
    if config.mode == "hawkes":
        base, _, _, eta = _hawkes_arrays(config)
        E = np.zeros((2, config.levels, N_CHANNELS)) if excitation is None else np.asarray(excitation, dtype=float)
        _hawkes_rates(Z, E, base, eta, config.block_boundary_migration, out)
    else:
        knots, values, counts = config.coeffs.packed()
        _expansion_rates(Z, float(config.n), knots, values, counts, config.coeffs.alpha_b,
                         config.block_boundary_migration, out)
    return out


@dataclass(frozen=True)
class QueuePath:
    """Piecewise-constant path of both sides: row ``k`` holds from ``times[k]``."""

    times: np.ndarray
    bid: np.ndarray
    ask: np.ndarray
    horizon: float

    def _index(self, t):
        return np.searchsorted(self.times, np.asarray(t, dtype=float), side="right") - 1

    def at(self, t):
        i = self._index(t)
        if np.any(i < 0):
            raise ValidationError("time before path start")
        return self.bid[i], self.ask[i]

    def sample(self, grid):
        return self.at(np.asarray(grid, dtype=float))

    @property
    def terminal(self):
        return self.bid[-1], self.ask[-1]

    def snapshots_csv(self, path, step: float, side: str = "bid") -> None:
        grid = np.arange(0, int(np.floor(self.horizon / step + 1e-9)) + 1) * step
        vals = self.sample(grid)[_side_index(side)]
        L = vals.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time"] + [f"level_{i + 1}" for i in range(L)])
            for t, row in zip(grid.tolist(), vals.tolist()):
                w.writerow([repr(t)] + [repr(v) for v in row])


@dataclass(frozen=True)
class MicroPath(QueuePath):
    """Integer book path in micro time plus its event stream."""

    event_side: np.ndarray = field(default=None)
    event_kind: np.ndarray = field(default=None)
    event_level: np.ndarray = field(default=None)
    N: int = 0
    n: int = 1
    diagnostics: dict = field(default_factory=dict)

    @property
    def event_time(self) -> np.ndarray:
        return self.times[1:]

    @property
    def events(self) -> list[MicroEvent]:
        return [
            MicroEvent(t, SIDES[s], KINDS[k], int(l))
            for t, s, k, l in zip(self.event_time.tolist(), self.event_side.tolist(),
                                  self.event_kind.tolist(), self.event_level.tolist())
        ]

    def state(self, k: int) -> BookState:
        return BookState(self.N, self.bid[k], self.ask[k], float(self.times[k]))

    def events_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "side", "kind", "level"])
            for t, s, k, l in zip(self.event_time.tolist(), self.event_side.tolist(),
                                  self.event_kind.tolist(), self.event_level.tolist()):
                w.writerow([repr(t), SIDES[s], KINDS[k], l])


def _run(config: MicroConfig, horizon: float, seed: int, replicate: int, record: bool, salt: int = 0):
    if not horizon >= 0:
        raise ValidationError("horizon must be non-negative")
    rng = stream(seed, replicate, salt)
    Z = config.initial.as_array().copy()
    micro_horizon = float(horizon) * config.n
    if config.mode == "hawkes":
        base, amp, dec, eta = _hawkes_arrays(config)
        ev_t, ev_i, extra, err = _sim_hawkes(Z, base, amp, dec, eta, config.block_boundary_migration,
                                             micro_horizon, config.rate_cap, config.max_events, rng, record)
        diag = {"rejected_candidates": int(extra)}
    else:
        knots, values, counts = config.coeffs.packed()
        ev_t, ev_i, extra, err = _sim_expansion(Z, float(config.n), knots, values, counts, config.coeffs.alpha_b,
                                                config.block_boundary_migration, micro_horizon, config.rate_cap,
                                                config.max_events, rng, record)
        diag = {"clamped_rates": int(extra)}
    if err == 1:
        raise NumericalError(f"total event rate exceeded rate_cap={config.rate_cap:g}")
    if err == 2:
        raise NumericalError(f"more than max_events={config.max_events} events; rates are likely exploding")
    return Z, ev_t, ev_i, diag


def simulate_micro(config: MicroConfig, horizon: float, seed: int, replicate: int = 0, salt: int = 0) -> MicroPath:
    """Exact event-driven path over micro time ``[0, n * horizon]``.

    ``horizon`` is in rescaled units; with ``n = 1`` (the Hawkes-mode
    default) it is plain micro time.
    """
    Z, ev_t, ev_i, diag = _run(config, horizon, seed, replicate, True, salt)
    states = _replay(config.initial.as_array(), ev_i)
    diag["events"] = int(ev_t.size)
    return MicroPath(
        times=np.concatenate([[0.0], ev_t]),
        bid=states[:, 0, :],
        ask=states[:, 1, :],
        horizon=float(horizon) * config.n,
        event_side=ev_i[:, 0].copy(),
        event_kind=ev_i[:, 1].copy(),
        event_level=ev_i[:, 2] + 1,
        N=config.N,
        n=config.n,
        diagnostics=diag,
    )


def terminal_book(config: MicroConfig, horizon: float, seed: int, replicate: int = 0, salt: int = 0) -> np.ndarray:
    """Terminal ``(2, N-1)`` queues without storing the path."""
    Z, _, _, _ = _run(config, horizon, seed, replicate, False, salt)
    return Z
