import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hawkes_lob import (
    BookState,
    EffectiveCoefficients,
    MicroConfig,
    PiecewiseLinear,
    QueuePath,
    TestFunction,
    apply_event,
    check_neumann,
    dirichlet_modes,
    finite_diffs,
    generator_convergence_report,
    generator_jump,
    generator_limit,
    generator_micro,
    micro_meso_moment_comparison,
    rescale_path,
    simulate_micro,
    snap_to_lattice,
)
from hawkes_lob._rng import parallel_map
from hawkes_lob.scaling import default_probes

SEED = 0xC0FFEE
A = PiecewiseLinear.affine


def generic_affine():
    return EffectiveCoefficients(
        4,
        [A(1.0, 0.3), A(0.8, 0.2), A(1.2, 0.1)],
        [A(0.5, -0.2), A(0.3, 0.1), A(-0.2, 0.4)],
        [A(0.4, 0.3), A(0.6, -0.1), A(0.2, 0.2)],
        0.7,
    )


COSINE = TestFunction.neumann_cosine([1.0, 0.7, 1.3], [4.0, 3.0, 5.0])


# test functions --------------------------------------------------------------------


def test_builtins_satisfy_neumann():
    pts = np.random.default_rng(0).uniform(0, 3, size=(20, 3))
    assert check_neumann(TestFunction.constant(2.0), pts)
    assert check_neumann(TestFunction.quadratic([1.0, 2.0, 0.5]), pts)
    assert check_neumann(COSINE, pts)
    assert not check_neumann(TestFunction.linear([1.0, 0.0, 0.0]), pts)


def test_from_callable_derivatives():
    F = TestFunction.from_callable(lambda x: float(np.sum(np.cos(x))))
    x = np.array([0.3, 1.1])
    assert np.allclose(F.grad(x), -np.sin(x), atol=1e-8)
    assert np.allclose(F.hess_diag(x), -np.cos(x), atol=1e-4)


# finite differences -----------------------------------------------------------------


def test_finite_diffs_examples():
    n = 16
    y = np.array([0.5, 1.25])
    d = finite_diffs(TestFunction.linear([0.0, 3.0]), y, n, 2)
    assert d.right == pytest.approx(3.0) and d.left == pytest.approx(3.0) and abs(d.second) < 1e-12
    d = finite_diffs(TestFunction.quadratic([0.0, 1.0]), y, n, 2)
    assert d.second == pytest.approx(2.0, abs=1e-12)
    assert d.right == pytest.approx(2 * 1.25 + 1 / 4, abs=1e-12)
    d = finite_diffs(TestFunction.constant(5.0), y, n, 1)
    assert d.right == 0.0 and d.left == 0.0 and d.second == 0.0


def test_finite_diffs_clamped_at_zero():
    d = finite_diffs(TestFunction.quadratic([1.0]), np.array([0.0]), 4, 1)
    assert d.clamped and d.left == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 10_000), st.lists(st.integers(0, 400), min_size=3, max_size=3), st.integers(1, 3))
def test_second_difference_identity(n, z, k):
    y = np.array(z, dtype=float) / np.sqrt(n)
    d = finite_diffs(COSINE, y, n, k)
    assert abs(d.second - np.sqrt(n) * (d.right - d.left)) <= 1e-12 * max(1.0, abs(d.second), n)


# path rescaling ------------------------------------------------------------------------


def test_rescale_path_examples():
    p = QueuePath(np.array([0.0, 8.0]), np.array([[4.0], [5.0]]), np.array([[4.0], [4.0]]), 10.0)
    same = rescale_path(p, 1)
    assert np.array_equal(same.times, p.times) and np.array_equal(same.bid, p.bid)
    const = QueuePath(np.array([0.0]), np.array([[4.0]]), np.array([[4.0]]), 3.0)
    assert np.array_equal(rescale_path(const, 16).bid, [[1.0]])
    r = rescale_path(p, 4)
    assert r.times[1] == 2.0 and r.bid[1, 0] == 2.5 and r.horizon == 2.5


def test_rescale_commutes_with_replay():
    n = 25
    c = EffectiveCoefficients.uniform(4, 1.0, 0.1, 0.2, 0.6)
    cfg = MicroConfig.expansion(c, n, [1.0, 0.4, 2.0], block_boundary_migration=False)
    path = simulate_micro(cfg, 0.5, SEED)
    r = rescale_path(path, n)
    state = cfg.initial
    x = state.as_array() / np.sqrt(n)
    assert np.allclose(r.bid[0], x[0])
    for k, e in enumerate(path.events):
        nxt = apply_event(state, e)
        x = x + (nxt.as_array() - state.as_array()) / np.sqrt(n)  # jumps of size 1/sqrt(n)
        state = nxt
        assert r.times[k + 1] == pytest.approx(e.time / n, rel=1e-15)
        assert np.allclose(r.bid[k + 1], x[0], atol=1e-12) and np.allclose(r.ask[k + 1], x[1], atol=1e-12)


# generators -----------------------------------------------------------------------------


def test_generator_micro_examples():
    c = generic_affine()
    y = snap_to_lattice([1.0, 0.0, 2.0], 64)
    assert generator_micro(TestFunction.constant(3.0), y, 64, c) == 0.0
    assert generator_micro(COSINE, y, 64, EffectiveCoefficients.uniform(4)) == 0.0
    one = EffectiveCoefficients.uniform(2, 1.7)
    for z in (1, 5, 40):
        assert generator_micro(TestFunction.quadratic([1.0]), np.array([z / 10]), 100, one) == pytest.approx(1.7, abs=1e-12)


def test_generator_limit_examples():
    c = generic_affine()
    x = np.array([0.7, 1.4, 0.9])
    assert generator_limit(TestFunction.constant(1.0), x, c) == 0.0
    lap = np.array([1.4 - 1.4, 0.9 + 0.7 - 2.8, 1.4 - 1.8])
    for k in range(3):
        w = np.zeros(3)
        w[k] = 1.0
        expected = c.h_at(x)[k] + 0.7 * lap[k]
        assert generator_limit(TestFunction.linear(w), x, c) == pytest.approx(expected, abs=1e-12)
    # uniform interior profile: the Laplacian vanishes at interior levels
    c5 = EffectiveCoefficients.uniform(6, 1.0, A(0.3, 0.2), A(0.1, 0.1), 2.0)
    u = np.full(5, 1.5)
    for k in (1, 2, 3):
        w = np.zeros(5)
        w[k] = 1.0
        assert generator_limit(TestFunction.linear(w), u, c5) == pytest.approx(c5.h_at(u)[k], abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([16, 64, 256, 1024]), st.lists(st.integers(1, 200), min_size=3, max_size=3))
def test_compact_formula_equals_jump_sum_off_boundary(n, z):
    # every level occupied: the formula and a direct sum over the chain's jumps agree
    y = np.array(z, dtype=float) / np.sqrt(n)
    c = generic_affine()
    a, b = generator_micro(COSINE, y, n, c), generator_jump(COSINE, y, n, c)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-9 * np.sqrt(n) * n)


def test_boundary_term_differs_from_jump_sum_as_documented():
    # at an empty level the compact formula weights the right difference by
    # sigma^2 / sqrt(n); the chain's up-rate (n/2) sigma^2 gives sqrt(n)/2 sigma^2
    n = 64
    c = EffectiveCoefficients.uniform(2, 1.3, 0.0, 0.0, 0.0)
    F = TestFunction.quadratic([1.0])
    y = np.array([0.0])
    dr = finite_diffs(F, y, n, 1).right
    assert generator_micro(F, y, n, c) == pytest.approx(1.3 * dr / np.sqrt(n))
    assert generator_jump(F, y, n, c) == pytest.approx(0.5 * np.sqrt(n) * 1.3 * dr)


def test_convergence_report_constant_function():
    rep = generator_convergence_report(TestFunction.constant(1.0), generic_affine(), [16, 64, 256])
    assert np.all(rep.sup_errors == 0) and rep.passed


def test_convergence_quadratic_constant_coefficients():
    c = EffectiveCoefficients.uniform(3, 1.5, 0.4, 0.9, 0.0)
    rep = generator_convergence_report(TestFunction.quadratic([1.0, 0.5]), c, [256, 1024, 4096])
    assert np.all((rep.ratios >= 1.6) & (rep.ratios <= 2.5))


def test_convergence_cosine_generic_affine():
    rep = generator_convergence_report(COSINE, generic_affine(), [256, 1024, 4096])
    assert rep.sup_errors[-1] <= 0.25 * rep.sup_errors[0]


def test_report_csv(tmp_path):
    rep = generator_convergence_report(COSINE, generic_affine(), [64, 256], probes=default_probes(3)[:10])
    rep.to_csv(tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "n,probe_sup_error" and len(lines) == 3


# micro against meso ---------------------------------------------------------------------


def test_moment_comparison_zero_coefficients():
    rep = micro_meso_moment_comparison(EffectiveCoefficients.uniform(3), [1.0, 0.5], [16, 64], 0.5, 20, SEED)
    assert np.all(rep.mean_err == 0) and np.all(rep.var_err == 0) and rep.passed


def test_moment_comparison_small_time_variance():
    rep = micro_meso_moment_comparison(EffectiveCoefficients.uniform(2, 1.0), [1.0], [6400], 0.25, 500, SEED)
    # variance ~ 0.25 before much boundary contact; sampling sd of a variance is ~ var * sqrt(2 / R)
    se_var = 0.25 * np.sqrt(2 / 500)
    assert abs(rep.micro_var[0, 0] - 0.25) <= 3 * np.sqrt(2) * se_var
    assert abs(rep.meso_var[0] - 0.25) <= 3 * np.sqrt(2) * se_var
    assert abs(rep.micro_var[0, 0] - rep.meso_var[0]) <= 3 * np.sqrt(2) * se_var
    assert not any(rep.violations.values())


def test_deterministic_migration_tracks_heat_flow():
    alpha_b, R = 1.0, 200
    x0 = np.array([1.0, 0.5, 1.5])
    c = EffectiveCoefficients.uniform(4, 0.0, 0.0, 0.0, alpha_b)
    grid = np.linspace(0.0, 1.0, 11)
    lam, V = dirichlet_modes(3)
    exact = (np.exp(-alpha_b * np.outer(grid, lam)) * (V.T @ x0)) @ V.T
    devs = []
    for n in (16, 256, 4096):
        cfg = MicroConfig.expansion(c, n, x0, block_boundary_migration=False)
        assert np.array_equal(cfg.initial.bid, x0 * np.sqrt(n))

        def one(r):
            return rescale_path(simulate_micro(cfg, 1.0, SEED, r), n).sample(grid)[0]

        mean = np.mean(parallel_map(one, range(R), 1), axis=0)
        devs.append(np.max(np.abs(mean - exact)))
    assert devs[0] > devs[1] > devs[2]
