import math

import numpy as np
import pytest
from scipy import stats

from poisson_bound.core.errors import (
    GridTooCoarse, InvalidParameter, ModelFileError, OutsideDomain,
)
from poisson_bound.models.service_law import (
    Deterministic, Erlang, Exponential, HyperExponential, LightTail, Moderate, ParetoTail,
    Polynomial, WeibullTail, envelope_from_dict, equilibrium_tables, pk_bin_masses,
    service_law_from_dict, verify_envelope,
)
from poisson_bound.numerics.grids import GridSpec
from poisson_bound.numerics.quadrature import integrate


@pytest.mark.parametrize("law, theta", [
    (Exponential(2.0), 0.5),
    (Erlang(3, 2.0), 1.0),
    (HyperExponential([0.3, 0.7], [1.0, 4.0]), 0.5),
    (Deterministic(1.5), 0.7),
])
def test_mgf_closed_form_matches_tail_integral(law, theta):
    integral, _ = integrate(lambda x: law.weighted_tail(x, theta * x), 0.0, math.inf,
                            points=law.breakpoints())
    assert law.mgf(theta) == pytest.approx(1.0 + theta * integral, rel=1e-8)


@pytest.mark.parametrize("law", [
    Exponential(2.0), Erlang(3, 2.0), HyperExponential([0.3, 0.7], [1.0, 4.0]),
    Deterministic(1.5), WeibullTail(0.5, 2.0), ParetoTail(3.0, 2.0),
])
def test_log_tail_matches_tail(law):
    for x in (0.0, 0.3, 1.0, 4.0):
        tail = float(law.tail(x))
        if tail > 0.0:
            assert float(law.log_tail(x)) == pytest.approx(math.log(tail), rel=1e-9, abs=1e-12)
        else:
            assert float(law.log_tail(x)) == -math.inf


def test_weighted_tail_vanishes_with_the_tail():
    law = WeibullTail(0.5, 2.0)
    # e^{θx} 在远端溢出而 H̄ 已为 0
    assert float(law.log_tail(1e6)) == pytest.approx(-2000.0)
    assert law.weighted_tail(1e6, 800.0) == 0.0
    assert Exponential(1.0).weighted_tail(1e4, 1e3) == 0.0
    assert ParetoTail(3.0, 2.0).weighted_tail(1e300, 0.0) == 0.0


@pytest.mark.parametrize("law, theta, expected", [
    (Exponential(1.0), 0.5, 2.0),
    (Exponential(1.0), 0.9, 10.0),
    (Erlang(2, 1.0), 0.5, 4.0),
])
def test_mgf_fallback_matches_closed_form(monkeypatch, law, theta, expected):
    monkeypatch.setattr(type(law), "_mgf_closed", lambda self, t: None)
    assert law.mgf(theta) == pytest.approx(expected, rel=1e-6)


@pytest.mark.parametrize("law", [
    Exponential(2.0), Erlang(3, 2.0), HyperExponential([0.3, 0.7], [1.0, 4.0]),
    Deterministic(1.5), WeibullTail(0.5, 2.0), ParetoTail(3.0, 2.0),
])
def test_integrated_tail_reaches_mean(law):
    quad_mean, _ = integrate(lambda x: float(law.tail(x)), 0.0, math.inf, points=law.breakpoints())
    assert quad_mean == pytest.approx(law.mean, rel=1e-7)
    assert float(law.integrated_tail(1e9)) == pytest.approx(law.mean, rel=1e-6)
    assert float(law.equilibrium_cdf(0.0)) == 0.0


def test_mgf_domain():
    assert Exponential(1.0).mgf(0.0) == 1.0
    with pytest.raises(OutsideDomain):
        Exponential(1.0).mgf(1.0)
    with pytest.raises(OutsideDomain):
        WeibullTail(0.5, 2.0).mgf(0.01)
    assert WeibullTail(0.5, 2.0).is_heavy and ParetoTail(3.0).is_heavy
    assert not Deterministic(1.0).is_heavy


@pytest.mark.parametrize("factory", [
    lambda: Exponential(0.0), lambda: Erlang(1.5, 1.0), lambda: WeibullTail(1.0, 1.0),
    lambda: ParetoTail(1.0), lambda: HyperExponential([0.5, 0.4], [1.0, 2.0]),
])
def test_invalid_parameters(factory):
    with pytest.raises(InvalidParameter):
        factory()


def test_sampler_mean(weibull):
    rng = np.random.default_rng(7)
    draws = weibull.sample_block(rng, 200_000)
    assert draws.mean() == pytest.approx(weibull.mean, rel=0.02)
    assert np.mean(draws > 1.0) == pytest.approx(float(weibull.tail(1.0)), abs=0.005)


def test_service_law_from_dict():
    law = service_law_from_dict({"family": "erlang", "k": 2, "mu": 3.0})
    assert isinstance(law, Erlang) and law.mean == pytest.approx(2 / 3)
    with pytest.raises(ModelFileError):
        service_law_from_dict({"family": "gamma", "k": 2})
    with pytest.raises(ModelFileError):
        service_law_from_dict({"family": "exponential", "mu": 1.0, "rate": 2.0})
    with pytest.raises(ModelFileError):
        service_law_from_dict({"mu": 1.0})


def test_envelope_from_dict():
    env = envelope_from_dict({"kind": "moderate", "C": 1.0, "gamma": 2.0, "beta": 0.5})
    assert env == Moderate(1.0, 2.0, 0.5)
    assert envelope_from_dict({"kind": "light", "theta_bar": 1.0}).constant == 1.0
    with pytest.raises(ModelFileError):
        envelope_from_dict({"kind": "polynomial", "C": 1.0})


def test_exponential_violates_unit_moderate_envelope():
    verdict = verify_envelope(Exponential(1.0), Moderate(1.0, 1.0, 0.5))
    assert not verdict.success
    assert 0.0 < verdict.data["worst_x"] < 1.0
    assert verdict.data["worst_excess"] > 0


def test_larger_constant_repairs_moderate_envelope():
    # max of e^{√x - x} is e^{1/4}
    assert verify_envelope(Exponential(1.0), Moderate(1.3, 1.0, 0.5)).success


@pytest.mark.parametrize("law", [WeibullTail(0.5, 2.0), ParetoTail(3.0, 1.0)])
def test_default_envelopes_hold(law):
    assert verify_envelope(law, law.default_envelope()).success


def test_envelope_grid_must_reach_far_enough():
    with pytest.raises(InvalidParameter):
        verify_envelope(Exponential(1.0), LightTail(1.0), GridSpec(x_hi=10.0))


def test_polynomial_envelope_shape():
    env = Polynomial(C=1.0, kappa=3.0)
    np.testing.assert_allclose(env([0.0, 1.0]), [1.0, 0.125])


def test_equilibrium_tables_bracket_gamma_powers():
    # H_re = Exp(1) for exponential service, so H_re^{*n} is Gamma(n, 1)
    grid = equilibrium_tables(Exponential(1.0), 4, GridSpec(x_hi=20.0, n_points=20001, mode="uniform"))
    x = grid.grid
    for n in range(1, 5):
        exact = stats.gamma.cdf(x, n)
        assert np.all(grid.lower[n] <= exact + 1e-12)
        assert np.all(exact <= grid.upper[n] + 1e-12)
        np.testing.assert_allclose(grid.tables[n], exact, atol=2e-3)
    np.testing.assert_array_equal(grid.tables[0], np.ones_like(x))
    assert grid.gap <= 1e-3


def test_coarse_tables_are_rejected():
    with pytest.raises(GridTooCoarse):
        equilibrium_tables(Exponential(1.0), 3, GridSpec(x_hi=30.0, n_points=31, mode="uniform"))


def test_pk_masses_for_mm1():
    # M/M/1: P(W = 0) = 1 - ρ, P(W > x) = ρ e^{-(μ - λ)x}
    rho = 0.5
    grid = equilibrium_tables(Exponential(1.0), 40, GridSpec(x_hi=40.0, n_points=8001, mode="uniform"),
                              check_gap=False)
    edges = np.array([0.0, 1.0, 2.0, math.inf])
    masses = pk_bin_masses(rho, grid, edges)
    exact_cdf = 1.0 - rho * np.exp(-0.5 * np.array([1.0, 2.0]))
    expected = np.diff(np.concatenate([[0.0], exact_cdf, [1.0]]))
    np.testing.assert_allclose(masses, expected, atol=3e-3)
    assert masses.sum() == pytest.approx(1.0, abs=1e-12)
