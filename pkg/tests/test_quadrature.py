import math

import numpy as np
import pytest

from wpscatter.quadrature import (
    EpsExtrapolation, GaussianTrunc, QuadratureError, Region, Regularization,
    extrapolate_eps, gauss_hermite_nodes, integrate_adaptive,
    order_sensitive_integral,
)


def test_gh_single_node():
    nodes, weights = gauss_hermite_nodes(1)
    assert nodes[0] == pytest.approx(0.0, abs=1e-15)
    assert weights[0] == pytest.approx(math.sqrt(math.pi), abs=1e-15)


@pytest.mark.parametrize("n", [1, 2, 5, 20, 64, 128, 200])
def test_gh_weight_sum(n):
    _, weights = gauss_hermite_nodes(n)
    assert weights.sum() == pytest.approx(math.sqrt(math.pi), abs=1e-13)


def test_gh_second_moment_exact_at_n2():
    nodes, weights = gauss_hermite_nodes(2)
    assert (weights * nodes ** 2).sum() == pytest.approx(
        math.sqrt(math.pi) / 2, abs=1e-13)


def test_gh_polynomial_exactness():
    # degree 2n-1 moments against closed forms
    n = 7
    nodes, weights = gauss_hermite_nodes(n)
    for deg in range(2 * n):
        got = (weights * nodes ** deg).sum()
        if deg % 2:
            expected = 0.0
        else:
            m = deg // 2
            expected = math.sqrt(math.pi) * math.prod(range(2 * m - 1, 0, -2)) / 2 ** m
        assert got == pytest.approx(expected, abs=1e-10 * max(1.0, abs(expected)))


def test_gh_out_of_range():
    with pytest.raises(QuadratureError):
        gauss_hermite_nodes(0)
    with pytest.raises(QuadratureError):
        gauss_hermite_nodes(201)


def test_adaptive_zero_integrand():
    res = integrate_adaptive(lambda pts: np.zeros(pts.shape[0], dtype=complex),
                             Region.box((-1, 1), (-1, 1)), tol=1e-10)
    assert res.value == 0
    assert res.error_estimate == pytest.approx(0.0, abs=1e-15)
    assert res.converged


def test_adaptive_2d_gaussian_bump():
    a, b = 1.3, 0.8

    def f(pts):
        return np.exp(-a * pts[:, 0] ** 2 - b * (pts[:, 1] - 0.4) ** 2) + 0j

    res = integrate_adaptive(f, Region.box((-9, 9), (-9, 9)), tol=1e-9)
    expected = math.sqrt(math.pi / a) * math.sqrt(math.pi / b)
    assert res.value.real == pytest.approx(expected, abs=1e-8)
    assert abs(res.value.imag) < 1e-12
    assert res.converged


def test_adaptive_linearity():
    region = Region.box((-4, 4))
    f = lambda pts: np.exp(-pts[:, 0] ** 2) + 0j
    g = lambda pts: np.cos(pts[:, 0]) * np.exp(-0.5 * pts[:, 0] ** 2) + 0j
    rf = integrate_adaptive(f, region, 1e-10)
    rg = integrate_adaptive(g, region, 1e-10)
    combo = integrate_adaptive(lambda p: 2.0 * f(p) - 3.0 * g(p), region, 1e-10)
    assert abs(combo.value - (2 * rf.value - 3 * rg.value)) <= \
        2 * (2 * rf.error_estimate + 3 * rg.error_estimate + combo.error_estimate)


def test_adaptive_refinement_monotonicity():
    def f(pts):
        x = pts[:, 0]
        return np.abs(x) ** 0.5 * np.exp(-x * x) + 0j

    region = Region.box((-3, 3))
    errs = [integrate_adaptive(f, region, tol).error_estimate
            for tol in (1e-4, 5e-5, 2.5e-5, 1.25e-5)]
    assert all(b <= a + 1e-16 for a, b in zip(errs, errs[1:]))


def test_adaptive_reproducible():
    def f(pts):
        return np.exp(-pts[:, 0] ** 2 + 1j * pts[:, 1]) / (1 + pts[:, 1] ** 2)

    region = Region.box((-5, 5), (-5, 5))
    r1 = integrate_adaptive(f, region, 1e-8)
    r2 = integrate_adaptive(f, region, 1e-8)
    assert r1.value == r2.value
    assert r1.evaluations == r2.evaluations


def test_adaptive_budget_flag():
    def f(pts):  # cusp along a line: slow algebraic convergence
        return np.sqrt(np.abs(pts[:, 0])) + 0j

    res = integrate_adaptive(f, Region.box((-1, 1), (-1, 1)), tol=1e-14,
                             max_evals=5000)
    assert not res.converged


def test_region_validation():
    with pytest.raises(QuadratureError):
        Region((0.0,), (0.0,))
    with pytest.raises(QuadratureError):
        GaussianTrunc(0.0, 1.0, n_sigmas=2.0)
    r = Region.gaussian_truncated(GaussianTrunc(0.0, 1.0, 8.0))
    assert r.lower[0] == -8.0
    assert r.truncation_bound < 1e-14


def test_regularization_validation():
    Regularization()
    with pytest.raises(QuadratureError):
        Regularization(epsilon_schedule=(0.1, 0.2, 0.3))
    with pytest.raises(QuadratureError):
        Regularization(epsilon_schedule=(0.1, 0.05))


def test_extrapolate_exact_quadratic():
    eps = [0.1, 0.05, 0.025, 0.0125]
    vals = [(e, 3.7 - 2.0 * e * e) for e in eps]
    out = extrapolate_eps(vals, order=1)
    assert out.value == pytest.approx(3.7, abs=1e-12)


def test_extrapolate_lorentzian():
    a = 0.9
    eps = [0.1, 0.05, 0.025, 0.0125, 0.00625]
    vals = [(e, 1.0 / (e * e + a * a)) for e in eps]
    out = extrapolate_eps(vals, order=3)
    assert out.value == pytest.approx(1.0 / a ** 2, abs=1e-8)
    assert out.reliable


def test_extrapolate_needs_enough_samples():
    with pytest.raises(QuadratureError):
        extrapolate_eps([(0.1, 1.0), (0.05, 1.0)], order=2)


def test_extrapolate_flags_noise():
    rng = np.random.default_rng(0)
    eps = [0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125]
    vals = [(e, 1.0 + rng.normal(0, 0.5)) for e in eps]
    out = extrapolate_eps(vals, order=3)
    assert not out.reliable


def test_order_sensitive_fubini_regime():
    # absolutely integrable Gaussian: both nesting orders agree
    def f(pts):
        return np.exp(-(pts ** 2).sum(axis=1)) + 0j

    r1 = Region.box((-6, 6))
    r2 = Region.box((-6, 6))
    cuts = [2.0, 4.0, 6.0]
    p12 = order_sensitive_integral(f, r1, r2, cuts, "zeta1_first", tol=1e-9)
    p21 = order_sensitive_integral(f, r1, r2, cuts, "zeta2_first", tol=1e-9)
    assert abs(p12[-1].value - p21[-1].value) <= \
        2 * (p12[-1].error_estimate + p21[-1].error_estimate) + 1e-12
    assert p12[-1].value.real == pytest.approx(math.pi, abs=1e-7)


def test_order_sensitive_partials_recorded_per_cutoff():
    def f(pts):
        return np.exp(-(pts ** 2).sum(axis=1)) + 0j

    cuts = [0.5, 1.0, 2.0]
    parts = order_sensitive_integral(f, Region.box((-4, 4)), Region.box((-4, 4)),
                                     cuts, "zeta1_first", tol=1e-8)
    assert len(parts) == 3
    vals = [p.value.real for p in parts]
    assert vals[0] < vals[1] < vals[2]  # growing boxes of a positive integrand


def test_order_sensitive_rejects_bad_cutoffs():
    f = lambda pts: np.zeros(pts.shape[0], dtype=complex)
    with pytest.raises(QuadratureError):
        order_sensitive_integral(f, Region.box((-1, 1)), Region.box((-1, 1)),
                                 [2.0, 1.0], "zeta1_first")
    with pytest.raises(QuadratureError):
        order_sensitive_integral(f, Region.box((-1, 1)), Region.box((-1, 1)),
                                 [1.0], "diagonal_first")
