"""Diffusion covariance induced by the Hawkes order flow.

Counts of a stable M-type Hawkes process satisfy a functional CLT with
covariance ``Sigma_N = (I-K)^{-1} diag(Lambda) (I-K)^{-T}``. Queue volumes are
a linear image ``C N`` of the counts, so their covariance is
``Sigma_X = C Sigma_N C^T``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._rng import parallel_map
from .errors import NotPSDError, NumericalError, StabilityError, ValidationError
from .hawkes import HawkesSpec, branching_matrix, simulate_counts, spectral_radius, stationary_intensity

log = logging.getLogger(__name__)

EVENT_KINDS = ("up", "down", "migrate_out", "migrate_in")
PSD_TOL = 1e-10


@dataclass(frozen=True)
class EventTaxonomy:
    """Ordered bid-side event types ``(kind, level)`` with levels ``1 .. N-1``."""

    N: int
    types: tuple

    def __post_init__(self):
        types = tuple((str(k), int(i)) for k, i in self.types)
        for k, i in types:
            if k not in EVENT_KINDS:
                raise ValidationError(f"unknown event kind {k!r}")
            if not 1 <= i <= self.N - 1:
                raise ValidationError(f"level {i} outside 1..{self.N - 1}")
        if len(set(types)) != len(types):
            raise ValidationError("each (kind, level) pair may appear only once")
        object.__setattr__(self, "types", types)

    @property
    def M(self) -> int:
        return len(self.types)

    @classmethod
    def full(cls, N: int, block_boundary_migration: bool = True) -> "EventTaxonomy":
        """All four mechanisms at every level, level-major.

        With blocked boundaries the inward move at level 1 and the outward
        move at level N-1 are left out.
        """
        types = []
        for i in range(1, N):
            for kind in EVENT_KINDS:
                if block_boundary_migration and (
                    (kind == "migrate_in" and i == 1) or (kind == "migrate_out" and i == N - 1)
                ):
                    continue
                types.append((kind, i))
        return cls(N, tuple(types))


def build_incidence(taxonomy: EventTaxonomy) -> np.ndarray:
    """Incidence matrix ``C`` of shape ``(N-1, M)``; ghost rows are dropped."""
    L = taxonomy.N - 1
    C = np.zeros((L, taxonomy.M), dtype=np.int64)
    for a, (kind, i) in enumerate(taxonomy.types):
        r = i - 1
        if kind == "up":
            C[r, a] = 1
        elif kind == "down":
            C[r, a] = -1
        elif kind == "migrate_out":
            C[r, a] = -1
            if i + 1 <= L:
                C[r + 1, a] = 1
        else:
            C[r, a] = -1
            if i - 1 >= 1:
                C[r - 1, a] = 1
    return C


def sigma_N(spec: HawkesSpec) -> np.ndarray:
    K = branching_matrix(spec)
    if spectral_radius(K) >= 1:
        raise StabilityError("Sigma_N requires spectral radius < 1")
    lam = stationary_intensity(spec)
    B = np.linalg.inv(np.eye(spec.M) - K)
    S = B @ np.diag(lam) @ B.T
    return 0.5 * (S + S.T)


def sigma_X(C, Sigma_N) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    Sigma_N = np.asarray(Sigma_N, dtype=float)
    if C.ndim != 2 or Sigma_N.shape != (C.shape[1], C.shape[1]):
        raise ValidationError(f"shape mismatch: C is {C.shape}, Sigma_N is {Sigma_N.shape}")
    S = C @ Sigma_N @ C.T
    return 0.5 * (S + S.T)


def _factor_with_shift(sigma) -> tuple[np.ndarray, float]:
    S = np.asarray(sigma, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValidationError("factor_psd expects a square matrix")
    if not np.allclose(S, S.T, rtol=0, atol=1e-12 * max(1.0, np.abs(S).max())):
        raise ValidationError("factor_psd expects a symmetric matrix")
    S = 0.5 * (S + S.T)
    m = S.shape[0]
    lam_min = float(np.linalg.eigvalsh(S).min()) if m else 0.0
    if lam_min < -PSD_TOL:
        raise NotPSDError(f"matrix is indefinite (smallest eigenvalue {lam_min:.3g})")
    if not np.any(S):
        return np.zeros_like(S), 0.0
    try:
        return np.linalg.cholesky(S), 0.0
    except np.linalg.LinAlgError:
        pass
    # singular PSD: nudge onto the cone interior, also lifting round-off negatives
    shift = 1e-12 * np.trace(S) / m + max(0.0, -lam_min)
    try:
        G = np.linalg.cholesky(S + shift * np.eye(m))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("Cholesky failed even after the diagonal shift") from exc
    log.info("factor_psd: singular input, diagonal shift %.3g applied", shift)
    return G, shift


def factor_psd(sigma) -> np.ndarray:
    """Lower-triangular ``G`` with ``G @ G.T ≈ sigma`` (Cholesky).

    Singular inputs get a diagonal shift of ``1e-12 * trace / m`` first.
    """
    return _factor_with_shift(sigma)[0]


@dataclass(frozen=True)
class CovarianceBundle:
    K: np.ndarray
    lambda_bar: np.ndarray
    Sigma_N: np.ndarray
    C: np.ndarray
    Sigma_X: np.ndarray
    Gamma: np.ndarray
    shift: float = 0.0
    taxonomy: EventTaxonomy | None = None
    notes: tuple = ()

    def to_dict(self) -> dict:
        d = {
            "K": self.K.tolist(),
            "lambda_bar": self.lambda_bar.tolist(),
            "Sigma_N": self.Sigma_N.tolist(),
            "C": self.C.tolist(),
            "Sigma_X": self.Sigma_X.tolist(),
            "Gamma": self.Gamma.tolist(),
            "cholesky_shift": self.shift,
        }
        if self.taxonomy is not None:
            d["taxonomy"] = {"depth": self.taxonomy.N, "types": [list(t) for t in self.taxonomy.types]}
        if self.notes:
            d["notes"] = list(self.notes)
        return d

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def covariance_bundle(spec: HawkesSpec, taxonomy: EventTaxonomy, notes=()) -> CovarianceBundle:
    if spec.M != taxonomy.M:
        raise ValidationError(f"spec has {spec.M} types but taxonomy lists {taxonomy.M}")
    C = build_incidence(taxonomy)
    SN = sigma_N(spec)
    SX = sigma_X(C, SN)
    G, shift = _factor_with_shift(SX)
    return CovarianceBundle(branching_matrix(spec), stationary_intensity(spec), SN, C, SX, G, shift,
                            taxonomy, tuple(notes))


def lob_event_spec(config, reference_level: float) -> tuple[HawkesSpec, EventTaxonomy, tuple]:
    """Flatten a Hawkes-mode micro configuration into an M-type Hawkes spec.

    Each (mechanism, level) pair becomes one type; there is no cross-level
    excitation. Migration is queue-proportional in the micro model, so it
    is frozen at ``reference_level`` (an integer-scale queue size): baseline
    ``eta * x_ref`` and jumps ``kappa * x_ref``. Removal gates are dropped
    (the reference queue is taken as non-empty).
    """
    if config.mode != "hawkes":
        raise ValidationError("lob_event_spec needs a Hawkes-mode MicroConfig")
    xr = float(reference_level)
    if not xr >= 0:
        raise ValidationError("reference_level must be non-negative")
    tax = EventTaxonomy.full(config.N, config.block_boundary_migration)
    M = tax.M
    index = {t: a for a, t in enumerate(tax.types)}
    mu = np.zeros(M)
    alpha = np.zeros((M, M))
    beta = np.ones((M, M))
    exc, mig = config.excitation, config.migration
    arr0 = config.arrival_baseline(np.full(config.levels, xr))
    rem0 = config.removal_baseline(np.full(config.levels, xr))

    def put(target, source, a, b):
        if target in index and source in index:
            alpha[index[target], index[source]] = a
            beta[index[target], index[source]] = b

    for lvl in range(1, config.N):
        l = lvl - 1
        up, down = ("up", lvl), ("down", lvl)
        migs = [("migrate_out", lvl), ("migrate_in", lvl)]
        mu[index[up]] = arr0[l]
        mu[index[down]] = rem0[l]
        for m in migs:
            if m in index:
                mu[index[m]] = mig.eta[l] * xr
        put(up, up, exc.alpha["11"][l], exc.beta["11"][l])
        put(up, down, exc.alpha["12"][l], exc.beta["12"][l])
        put(down, up, exc.alpha["21"][l], exc.beta["21"][l])
        put(down, down, exc.alpha["22"][l], exc.beta["22"][l])
        for m in migs:
            put(up, m, exc.alpha["14"][l], exc.beta["14"][l])
            put(m, up, mig.kappa[l, 0] * xr, mig.rho[l, 0])
            put(m, down, mig.kappa[l, 1] * xr, mig.rho[l, 1])
            for m2 in migs:
                put(m, m2, mig.kappa[l, 2] * xr, mig.rho[l, 2])
    notes = (
        f"migration types use constant stationary rates frozen at reference queue level {xr:g}",
        "queue-proportional migration makes the true model state-dependent; Sigma_X is the autonomous approximation",
    )
    return HawkesSpec(mu, alpha, beta), tax, notes


@dataclass(frozen=True)
class FCLTReport:
    n: float
    T: float
    replicates: int
    empirical: np.ndarray
    theoretical: np.ndarray
    rel_frobenius_error: float
    mean_counts: np.ndarray

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "T": self.T,
            "replicates": self.replicates,
            "empirical": self.empirical.tolist(),
            "theoretical": self.theoretical.tolist(),
            "rel_frobenius_error": self.rel_frobenius_error,
        }


def empirical_fclt(spec: HawkesSpec, n: float, T: float, replicates: int, seed: int,
                   threads: int | None = 1) -> FCLTReport:
    """Compare the sample covariance of ``(N(nT) - nT Lambda) / sqrt(n)`` with ``T Sigma_N``.

    Each replicate starts from an empty history (no burn-in); the sample
    covariance is centred on the sample mean, so the start-up deficit in the
    mean count does not enter.
    """
    if replicates < 2:
        raise ValidationError("empirical_fclt needs at least two replicates")
    horizon = float(n) * float(T)
    counts = np.stack(parallel_map(lambda r: simulate_counts(spec, horizon, seed, r), range(replicates), threads))
    lam = stationary_intensity(spec)
    Z = (counts - horizon * lam) / np.sqrt(n)
    emp = np.atleast_2d(np.cov(Z, rowvar=False, ddof=1))
    theo = float(T) * sigma_N(spec)
    denom = np.linalg.norm(theo)
    diff = np.linalg.norm(emp - theo)
    err = diff / denom if denom > 0 else diff
    return FCLTReport(float(n), float(T), int(replicates), emp, theo, float(err), counts.mean(axis=0))
