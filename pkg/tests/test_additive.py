import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from censadd.additive import (
    AdditiveFit,
    EvaluationDomain,
    IntegrationDensity,
    QuadratureSpec,
    additive_predict,
    bump_density,
    components_on,
    default_domain,
    fit_components,
    marginal_component,
    quad_integrate,
    true_component_oracle,
    uniform_density,
)
from censadd.kernels import epanechnikov
from censadd.psi import PsiSpec
from censadd.regression import fit_surface
from censadd.simulate import generate, half_cos2, half_sin2, paper_dgp

from oracles import centring_constant

U = uniform_density(-1.0, 1.0)


def g1(x):
    return np.sin(2.0 * x) + x**2


def g2(x):
    return np.exp(0.5 * x)


def additive_surface(pts):
    pts = np.atleast_2d(pts)
    return g1(pts[:, 0]) + g2(pts[:, 1])


def test_quad_integrate_examples():
    assert quad_integrate(lambda p: np.ones(len(p)), [((0, 1), 4), ((0, 1), 4)]) == pytest.approx(1.0, abs=1e-15)
    assert quad_integrate(lambda p: p[:, 0] * p[:, 1], [((0, 1), 3), ((0, 1), 3)]) == pytest.approx(0.25, abs=1e-15)
    q = lambda p: U(p[:, 0]) * U(p[:, 1])
    assert quad_integrate(q, [((-1, 1), 48), ((-1, 1), 48)]) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        quad_integrate(lambda p: p[:, 0], [((0, 1), 1)])


def test_integration_density_validation():
    with pytest.raises(ValueError):
        IntegrationDensity((-1.0, 1.0), (1.0,), 0)
    b = bump_density(-0.8, 0.6, 4)
    assert b.smoothness == 3
    assert b.total_mass() == pytest.approx(1.0, abs=1e-12)
    assert b(0.7) == 0.0 and b(-0.8) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        U.derivative(0.0, 1)


def test_exact_additive_recovery_generic_path():
    qs = [bump_density(-0.9, 0.9, 4), U]
    grid = np.linspace(-0.8, 0.8, 17)
    for ell, g in enumerate((g1, g2)):
        got = marginal_component(additive_surface, qs, ell, grid)
        want = g(grid) - quad_integrate(lambda p: g(p[:, 0]) * qs[ell](p[:, 0]), [(qs[ell].support, 64)], panels=4)
        np.testing.assert_allclose(got, want, atol=1e-8, rtol=0)


def test_constant_surface_has_zero_components():
    eta, const = components_on(lambda p: np.full(len(p), 3.5), [U, U], [np.linspace(-1, 1, 5)] * 2)
    assert const == pytest.approx(3.5, abs=1e-13)
    for e in eta:
        np.testing.assert_allclose(e, 0.0, atol=1e-13)


def test_additive_predict_recovers_surface():
    qs = [U, bump_density(-1, 1, 4)]
    dom = EvaluationDomain(((-1, 1), (-1, 1)), (np.linspace(-0.9, 0.9, 19),) * 2)
    fit = fit_components(additive_surface, qs, dom)
    for x in dom.grids[0][::3]:
        for y in dom.grids[1][::4]:
            assert additive_predict(fit, [x, y]) == pytest.approx(g1(x) + g2(y), abs=1e-6)
    with pytest.raises(ValueError):
        additive_predict(fit, [0.95, 0.0])


def test_additive_predict_zero_components():
    fit = AdditiveFit(grids=[np.array([0.0, 1.0])] * 2, eta=[np.zeros(2)] * 2, constant=0.42)
    assert additive_predict(fit, [0.3, 0.9]) == 0.42


def _builtin_surface(n=300, h=0.3, seed=2):
    s = generate(paper_dgp(seed), n)
    return fit_surface(s, epanechnikov(), h, PsiSpec("indicator_leq_tau0", tau0=0.9))


@pytest.mark.parametrize("q", [U, bump_density(-0.9, 0.9, 4)])
def test_fast_path_matches_pointwise_evaluation(q):
    # the separable path integrates the same surface the tensor rule would see
    surf = _builtin_surface()
    qs = [q, q]
    grid = np.array([-0.55, 0.0, 0.31])
    fast = [marginal_component(surf, qs, ell, grid, QuadratureSpec(48, 1, aligned=False)) for ell in range(2)]
    slow = [marginal_component(lambda p: surf(p), qs, ell, grid, QuadratureSpec(48, 1)) for ell in range(2)]
    for f, s in zip(fast, slow):
        np.testing.assert_allclose(f, s, atol=1e-12)


def _epan_cdf(u):
    u = np.clip(u, -1.0, 1.0)
    return 0.75 * (u - u**3 / 3.0) + 0.5


def test_aligned_rule_matches_closed_form():
    surf = _builtin_surface(h=0.12)
    h = surf.bandwidths
    x = surf.x
    # int K_h(t - X) q(t) dt for q = 1/2 on [-1, 1], closed form per observation
    parts = [0.5 * (_epan_cdf((1 - x[:, j]) / h[j]) - _epan_cdf((-1 - x[:, j]) / h[j])) for j in range(2)]
    grid = np.linspace(-0.8, 0.8, 9)
    kern = 0.75 * np.clip(1 - ((grid[:, None] - x[None, :, 0]) / h[0]) ** 2, 0, None) / h[0]
    const = np.sum(surf.coef * parts[0] * parts[1])
    want = kern @ (surf.coef * parts[1]) - const
    got = marginal_component(surf, [U, U], 0, grid, QuadratureSpec(8, 1, aligned=True))
    np.testing.assert_allclose(got, want, atol=1e-12)
    coarse = marginal_component(surf, [U, U], 0, grid, QuadratureSpec(64, 16, aligned=False))
    np.testing.assert_allclose(coarse, want, atol=1e-4)


def test_centring_of_estimated_components():
    surf = _builtin_surface()
    q = bump_density(-0.9, 0.9, 4)
    t, w = q.rule(48, 1)
    for ell in range(2):
        eta = marginal_component(surf, [q, q], ell, t, QuadratureSpec(48, 1, aligned=False))
        assert abs(np.sum(w * eta)) < 1e-8


def test_permutation_invariance():
    surf = _builtin_surface()
    swapped = fit_surface(
        type(surf.sample)(surf.sample.z, surf.sample.delta, surf.sample.x[:, ::-1]),
        epanechnikov(),
        0.3,
        PsiSpec("indicator_leq_tau0", tau0=0.9),
    )
    qs = [U, bump_density(-1, 1, 4)]
    grids = [np.linspace(-0.5, 0.5, 3), np.linspace(-0.7, 0.7, 4)]
    eta, c = components_on(surf, qs, grids)
    eta_s, c_s = components_on(swapped, qs[::-1], grids[::-1])
    assert c == pytest.approx(c_s, abs=1e-13)
    np.testing.assert_allclose(eta[0], eta_s[1], atol=1e-13)
    np.testing.assert_allclose(eta[1], eta_s[0], atol=1e-13)


def test_true_component_oracle():
    eta1 = true_component_oracle(half_cos2, U)
    shift = 0.25 * (1 + math.sin(2) / 2)
    assert shift == pytest.approx(0.3636621783532102, abs=1e-15)
    assert eta1(0.0) == pytest.approx(0.5 - shift, abs=1e-13)
    assert eta1.centre == pytest.approx(centring_constant(half_cos2, -1, 1), abs=1e-13)
    assert true_component_oracle(half_sin2, U).centre == pytest.approx(0.5 - shift, abs=1e-13)
    assert true_component_oracle(lambda x: 0 * x, U)(0.3) == 0.0
    odd = true_component_oracle(np.sin, U)
    assert odd(0.7) == pytest.approx(math.sin(0.7), abs=1e-14)


def test_default_domain():
    dom = default_domain([U, uniform_density(0, 2)])
    assert dom.grids[0][0] == pytest.approx(-0.9) and dom.grids[0][-1] == pytest.approx(0.9)
    assert dom.grids[1][0] == pytest.approx(0.1) and len(dom.grids[1]) == 81
    with pytest.raises(ValueError):
        EvaluationDomain(((-1, 1),), (np.array([0.5, 0.2]),))
    with pytest.raises(ValueError):
        EvaluationDomain(((-1, 1),), (np.array([0.5, 2.0]),))


def test_csv_round_trip_is_exact():
    rng = np.random.default_rng(0)
    fit = AdditiveFit(
        grids=[np.linspace(-0.9, 0.9, 7), np.linspace(-0.5, 0.5, 3)],
        eta=[rng.normal(size=7), rng.normal(size=3)],
        constant=0.3,
        sigma=[rng.uniform(size=7), rng.uniform(size=3)],
        ci_lo=[rng.normal(size=7), rng.normal(size=3)],
        ci_hi=[rng.normal(size=7), rng.normal(size=3)],
    )
    back = AdditiveFit.from_csv(fit.to_csv())
    for name in ("grids", "eta", "sigma", "ci_lo", "ci_hi"):
        for a, b in zip(getattr(fit, name), getattr(back, name)):
            assert np.array_equal(a, b)
    assert back.eta_true is None
    assert fit.to_csv().splitlines()[0] == "axis,x,eta_hat,sigma_hat,ci_lo,ci_hi,eta_true_if_known"


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-2, 2), b=st.floats(-2, 2), c=st.floats(-2, 2), k=st.floats(-5, 5))
def test_polynomial_additive_surface_is_exact(a, b, c, k):
    f = lambda p: k + a * p[:, 0] ** 3 + b * p[:, 1] ** 2 + c * p[:, 1]
    qs = [U, bump_density(-1, 1, 3)]
    grid = np.array([-0.4, 0.2])
    e0 = marginal_component(f, qs, 0, grid)
    np.testing.assert_allclose(e0, a * grid**3, atol=1e-12)
    e1 = marginal_component(f, qs, 1, grid)
    # bump density is even: int t q = 0, int t^2 q = 1/(2*3 + 3) for power 3
    np.testing.assert_allclose(e1, b * (grid**2 - 1 / 9) + c * grid, atol=1e-12)
