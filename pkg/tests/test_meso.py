import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hawkes_lob import (
    EffectiveCoefficients,
    MesoConfig,
    MesoState,
    NumericalError,
    PiecewiseLinear,
    ValidationError,
    dirichlet_modes,
    drift,
    heat_relaxation,
    laplacian,
    simulate_meso,
    step_reflected_euler,
)

SEED = 0xC0FFEE


def cfg(L=1, sigma_sq=0.0, f=0.0, g=0.0, alpha_b=0.0, x0=1.0, dt=1e-3, **kw):
    return MesoConfig(EffectiveCoefficients.uniform(L + 1, sigma_sq, f, g, alpha_b), x0, dt, **kw)


# drift ------------------------------------------------------------------------------


def test_drift_examples():
    c = EffectiveCoefficients.uniform(6, 0.0, 0.0, 0.0, 0.8)
    d = drift(np.full(5, 2.0), c)
    assert np.allclose(d[1:-1], 0.0) and d[0] == pytest.approx(-1.6) and d[-1] == pytest.approx(-1.6)
    c0 = EffectiveCoefficients(4, 0.0, [0.1, 0.2, 0.3], PiecewiseLinear.affine(0.0, 1.0), 0.0)
    x = np.array([1.0, 2.0, 3.0])
    assert np.allclose(drift(x, c0), [0.1 - 1.0, 0.2 - 2.0, 0.3 - 3.0])
    c1 = EffectiveCoefficients.uniform(4, 0.0, 0.0, 0.0, 1.0)
    assert np.allclose(drift(np.array([1.0, 2.0, 1.0]), c1), [0.0, -2.0, 0.0])


def test_laplacian_pinned_ends():
    assert np.allclose(laplacian([1.0]), [-2.0])
    assert np.allclose(laplacian([1.0, 1.0]), [-1.0, -1.0])


# single steps -----------------------------------------------------------------------


def test_step_projection_example():
    c = cfg(g=1.0, x0=0.5)
    s = step_reflected_euler(MesoState.start([0.5]), 1.0, np.zeros(1), c)
    assert s.X[0] == 0.0 and s.eta[0] == pytest.approx(0.5) and s.t == 1.0


def test_step_without_drift_or_noise_is_identity():
    c = cfg(L=3, x0=[1.0, 0.0, 2.0])
    s0 = MesoState.start([1.0, 0.0, 2.0])
    s = step_reflected_euler(s0, 0.1, np.array([0.3, -0.2, 0.5]), c)
    assert np.array_equal(s.X, s0.X) and np.all(s.eta == 0.0)


def test_step_interior_positive_proposal():
    c = cfg(sigma_sq=4.0, f=1.0, x0=1.0)
    s = step_reflected_euler(MesoState.start([1.0]), 0.01, np.array([0.1]), c)
    assert s.X[0] == pytest.approx(1.0 + 0.01 + 2.0 * 0.1) and s.eta[0] == 0.0


def test_step_correlated_noise_uses_gamma():
    G = np.array([[1.0, 0.0], [0.5, 2.0]])
    c = cfg(L=2, x0=[5.0, 5.0], noise_mode="correlated", gamma=G)
    dW = np.array([0.1, -0.2])
    s = step_reflected_euler(MesoState.start([5.0, 5.0]), 0.01, dW, c)
    assert np.allclose(s.X, 5.0 + G @ dW)


def test_step_non_finite_names_level_and_step():
    c = MesoConfig(EffectiveCoefficients(3, 0.0, [0.0, 1.5e308], 0.0), [1.0, 1.0], 2.0)
    with pytest.raises(NumericalError, match="level 2 in step 3"):
        step_reflected_euler(MesoState(np.ones(2), np.zeros(2), 6.0), 2.0, np.zeros(2), c)
    with pytest.raises(NumericalError, match="level 2"):
        simulate_meso(c, 5.0, 2, SEED)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=3, max_size=3), st.lists(st.floats(-3, 3), min_size=3, max_size=3),
       st.floats(1e-4, 0.5))
def test_step_complementarity(x, dw, dt):
    c = cfg(L=3, sigma_sq=1.0, g=0.5, alpha_b=0.7, x0=x)
    s = step_reflected_euler(MesoState.start(x), dt, dw, c)
    assert np.all(s.X >= 0) and np.all(s.eta >= 0)
    assert np.all(s.X[s.eta > 0] == 0.0)


# config -----------------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValidationError):
        cfg(x0=-1.0)
    with pytest.raises(ValidationError):
        cfg(dt=0.0)
    with pytest.raises(ValidationError):
        cfg(noise_mode="weird")
    with pytest.raises(ValidationError):
        cfg(L=2, x0=[1.0, 1.0], noise_mode="correlated")
    with pytest.raises(ValidationError):
        cfg(L=2, x0=[1.0, 1.0], noise_mode="correlated", gamma=np.eye(2), sigma_x=2 * np.eye(2))


def test_correlated_factor_from_sigma():
    S = np.array([[2.0, 0.5], [0.5, 1.0]])
    c = cfg(L=2, x0=[1.0, 1.0], noise_mode="correlated", sigma_x=S)
    assert np.linalg.norm(c.gamma @ c.gamma.T - S) <= 1e-10


def test_config_dict_roundtrip():
    c = cfg(L=2, sigma_sq=1.0, alpha_b=0.3, x0=[1.0, 2.0], noise_mode="correlated", sigma_x=np.eye(2))
    back = MesoConfig.from_dict(c.to_dict())
    assert back.to_dict() == c.to_dict()
    with pytest.raises(ValidationError):
        MesoConfig.from_dict(dict(c.to_dict(), wobble=1))


# ensembles ---------------------------------------------------------------------------


def test_deterministic_wall_hit():
    c = cfg(L=2, g=1.0, x0=[1.0, 1.0])
    e = simulate_meso(c, 2.0, 1, SEED, output_step=1e-3, keep_paths=True)
    t = e.times
    for k in range(2):
        assert np.max(np.abs(e.paths_x[0, :, k] - np.maximum(1 - t, 0))) <= 2e-3
        assert np.max(np.abs(e.paths_eta[0, :, k] - np.maximum(t - 1, 0))) <= 2e-3


def test_zero_noise_reproduces_deterministic_scheme_exactly():
    coeffs = dict(L=3, f=PiecewiseLinear.affine(0.2, -0.3), g=0.1, alpha_b=0.6, x0=[0.5, 1.0, 0.1], dt=1e-2)
    quiet = cfg(sigma_sq=0.0, **coeffs)
    e = simulate_meso(quiet, 1.0, 1, SEED, output_step=1e-2, keep_paths=True)
    s = MesoState.start(quiet.x0)
    for g in range(1, e.times.size):
        s = step_reflected_euler(s, 1e-2, np.zeros(3), quiet)
        assert np.array_equal(s.X, e.paths_x[0, g]) and np.array_equal(s.eta, e.paths_eta[0, g])
    noisy = simulate_meso(cfg(sigma_sq=1.0, **coeffs), 1.0, 1, SEED, output_step=1e-2, keep_paths=True)
    assert not np.array_equal(noisy.paths_x, e.paths_x)


def test_free_brownian_variance():
    R = 4000
    e = simulate_meso(cfg(sigma_sq=1.0, x0=10.0), 1.0, R, SEED)
    v = e.terminal_x[:, 0].var(ddof=1)
    se = v * np.sqrt(2 / (R - 1))
    assert abs(v - 1.0) <= 3 * se


def test_paths_invariants_on_stored_grid():
    c = cfg(L=3, sigma_sq=PiecewiseLinear.affine(0.5, 0.5), f=0.1, g=0.6, alpha_b=0.4, x0=[0.2, 0.0, 0.5])
    e = simulate_meso(c, 1.0, 50, SEED, output_step=1e-3, keep_paths=True)
    assert np.all(e.paths_x >= 0)
    d_eta = np.diff(e.paths_eta, axis=1)
    assert np.all(d_eta >= 0)
    assert np.all(e.paths_x[:, 1:][d_eta > 0] == 0.0)
    assert np.sum(e.paths_x[:, 1:] * d_eta) == 0.0
    assert e.violations == {"negative_x": 0, "eta_decrease": 0, "complementarity": 0}
    assert np.any(d_eta > 0)


def test_correlated_short_horizon_covariance():
    S = np.array([[1.0, 0.6, -0.2], [0.6, 2.0, 0.3], [-0.2, 0.3, 0.5]])
    c = cfg(L=3, x0=[20.0, 20.0, 20.0], noise_mode="correlated", sigma_x=S)
    e = simulate_meso(c, 0.1, 10_000, SEED, threads=4)
    emp = np.cov(e.terminal_x, rowvar=False)
    assert np.linalg.norm(emp - 0.1 * S) / np.linalg.norm(0.1 * S) <= 0.10


def test_ensemble_reproducible_across_threads(tmp_path):
    c = cfg(L=2, sigma_sq=1.0, g=0.2, alpha_b=0.5, x0=[1.0, 0.5])
    a = simulate_meso(c, 0.5, 40, 9, threads=1)
    b = simulate_meso(c, 0.5, 40, 9, threads=4)
    assert np.array_equal(a.terminal_x, b.terminal_x) and np.allclose(a.mean, b.mean, rtol=0, atol=1e-12)
    a.moments_csv(tmp_path / "a.csv")
    b.moments_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "t,level,mean,var" and len(lines) == 1 + 2 * a.times.size


def test_output_grid_and_path_dump(tmp_path):
    c = cfg(sigma_sq=1.0)
    e = simulate_meso(c, 1.0, 3, SEED, output_step=0.25, keep_paths=True)
    assert np.allclose(e.times, [0, 0.25, 0.5, 0.75, 1.0])
    e.paths_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "path,t,x_1,eta_1" and len(lines) == 1 + 3 * 5
    with pytest.raises(ValidationError):
        simulate_meso(c, 1.0, 2, SEED).paths_csv(tmp_path / "q.csv")


# heat relaxation -------------------------------------------------------------------------


def test_dirichlet_modes_are_eigenpairs():
    lam, V = dirichlet_modes(7)
    for m in range(7):
        assert np.allclose(-laplacian(V[:, m]), lam[m] * V[:, m], atol=1e-13)
    assert np.allclose(V.T @ V, np.eye(7), atol=1e-13)
    assert lam[0] == pytest.approx(2 * (1 - np.cos(np.pi / 8)))


def test_heat_relaxation_zero_start():
    h = heat_relaxation(1.0, np.zeros(5), 1.0, 1e-3)
    assert np.all(h.numeric == 0.0)


def test_heat_relaxation_first_mode():
    lam, V = dirichlet_modes(7)
    h = heat_relaxation(1.0, V[:, 0], 1.0, 1e-4)
    assert h.terminal_relative_error <= 1e-6
    assert np.allclose(h.exact[-1], np.exp(-lam[0]) * V[:, 0])


def test_heat_relaxation_mass_leaks():
    x0 = np.random.default_rng(3).uniform(0, 2, 6)
    h = heat_relaxation(0.7, x0, 2.0, 1e-3)
    assert np.all(np.diff(h.numeric.sum(axis=1)) <= 1e-15)
    assert h.max_relative_error < 1e-8
