import math

import numpy as np
import pytest

from censadd.additive import uniform_density
from censadd.psi import PsiSpec
from censadd.simulate import (
    DgpSpec,
    StudyConfig,
    generate,
    half_cos2,
    half_sin2,
    paper_dgp,
    replicate_rng,
    reproduce_figure,
    run_study,
)


def test_paper_censoring_rate():
    rates = [generate(paper_dgp(s), 1000).delta.mean() for s in range(10)]
    assert 0.17 <= np.mean(rates) <= 0.23


def test_indicator_mechanism_hits_p():
    base = paper_dgp(3)
    # censoring far above every response: Z = Y, delta = 1
    dgp = DgpSpec(2, base.covariate_bounds, base.components, base.mechanism, (5.0, 6.0), base.psi, seed=3)
    s = generate(dgp, 40_000)
    assert np.all(s.delta == 1)
    p = dgp.regression(s.x)
    hit = (s.z <= 0.9).astype(float)
    edges = np.quantile(p, np.linspace(0, 1, 9))
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (p >= lo) & (p <= hi)
        se = math.sqrt(p[sel].mean() * (1 - p[sel].mean()) / sel.sum())
        assert abs(hit[sel].mean() - p[sel].mean()) < 3 * se


def test_censoring_support():
    s = generate(paper_dgp(4), 2000)
    assert np.all(s.z <= 1.0)
    assert np.all(s.z >= 0.0)


def test_generate_is_deterministic_in_seed():
    a, b = generate(paper_dgp(9), 100), generate(paper_dgp(9), 100)
    assert np.array_equal(a.z, b.z) and np.array_equal(a.x, b.x)
    c = generate(paper_dgp(10), 100)
    assert not np.array_equal(a.z, c.z)
    r1 = replicate_rng(5, 7).uniform(size=3)
    r2 = replicate_rng(5, 7).uniform(size=3)
    assert np.array_equal(r1, r2)


def test_invalid_probability_rejected():
    dgp = DgpSpec(
        1, ((-1.0, 1.0),), (lambda x: 0.9 + 0.2 * x,), "paper_indicator_model", (0.0, 1.0),
        PsiSpec("indicator_leq_tau0", tau0=0.9),
    )
    with pytest.raises(ValueError):
        generate(dgp, 500)
    with pytest.raises(ValueError):
        DgpSpec(1, ((-1.0, 1.0),), (half_cos2,), "paper_indicator_model", (0.0, 1.0), PsiSpec("identity_truncated_tau0", tau0=3.0))


def test_location_model_mean():
    dgp = DgpSpec(
        2, ((-1.0, 1.0), (-1.0, 1.0)), (half_cos2, half_sin2), "location_model", (5.0, 6.0),
        PsiSpec("identity_truncated_tau0", tau0=4.0), intercept=1.0,
    )
    s = generate(dgp, 20_000, np.random.default_rng(0))
    resid = s.z - dgp.regression(s.x)
    assert abs(resid.mean()) < 3 * 0.5 / math.sqrt(3 * s.n)
    # H = E[Y^2] when G = 1 below tau0
    h = dgp.second_moment(np.array([[0.0, 0.0]]))[0]
    assert h == pytest.approx(1.5**2 + 0.5**2 / 3, rel=1e-12)


def test_study_single_replicate_without_probes():
    r = run_study(paper_dgp(1), 200, 1, [], StudyConfig())
    s = r.summary()
    assert s["replicates"] == 1 and s["probes"] == []
    assert r.uncensored_fraction.shape == (1,)


def test_study_deterministic_across_threads():
    cfg = StudyConfig(sigma="plugin")
    probes = [(0, 0.0), (1, 0.3)]
    a = run_study(paper_dgp(2), 300, 6, probes, cfg, master_seed=17, threads=1)
    b = run_study(paper_dgp(2), 300, 6, probes, cfg, master_seed=17, threads=3)
    assert np.array_equal(a.eta_hat, b.eta_hat)
    assert np.array_equal(a.sigma_used, b.sigma_used, equal_nan=True)
    assert a.summary() == b.summary()


def test_study_outputs_and_independence():
    m = 60
    r = run_study(paper_dgp(3), 400, m, [(0, 0.0), (1, -0.4)], StudyConfig(), master_seed=3)
    s = r.summary()
    for p in s["probes"]:
        assert 0.0 <= p["coverage"] <= 1.0
        assert abs(p["lag1_autocorrelation"]) < 3 / math.sqrt(m)
        assert p["mse_target"] == pytest.approx(p["bias"] ** 2 + p["sigma_true"] ** 2)
    assert 0.15 < s["uncensored_fraction"] < 0.25
    assert any("by parts" in note for note in r.notes)


def test_study_config_validation():
    with pytest.raises(ValueError):
        StudyConfig(bandwidth_rule="silverman")
    with pytest.raises(ValueError):
        StudyConfig(sigma="bootstrap")
    cfg = StudyConfig()
    assert cfg.bandwidth(1000) == pytest.approx(0.2, rel=1e-14)
    assert StudyConfig(bandwidth_rule="undersmoothed").bandwidth(1000) < 0.2


def test_reproduce_figure_table():
    fit = reproduce_figure(n=1000, seed=1)
    text = fit.to_csv()
    header = text.splitlines()[0].split(",")
    assert header == ["axis", "x", "eta_hat", "sigma_hat", "ci_lo", "ci_hi", "eta_true_if_known"]
    for ell in range(2):
        g = fit.grids[ell]
        assert g.min() >= -1 and g.max() <= 1 and len(g) == 81
        inside = (fit.ci_lo[ell] <= fit.eta_true[ell]) & (fit.eta_true[ell] <= fit.ci_hi[ell])
        assert inside.mean() >= 0.8
    assert 0.17 <= fit.diagnostics["uncensored_fraction"] <= 0.23
    assert fit.metadata["bandwidths"] == [0.2, 0.2]
    assert reproduce_figure(n=1000, seed=1).to_csv() == text
