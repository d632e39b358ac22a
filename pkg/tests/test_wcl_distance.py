import math

import numpy as np
import pytest

from poisson_bound.core.errors import (
    DivergentInnerIntegral, InvalidParameter, MismatchedModel, UnstableModel,
)
from poisson_bound.models.service_law import Deterministic, Erlang, Exponential
from poisson_bound.services.drift_builder import (
    build_map_gi1, build_mg1_light, build_mg1_moderate, build_mg1_polynomial,
)
from poisson_bound.services.wcl_distance import (
    WclModel, inner_tail_integral, wcl_distance_bound,
)


@pytest.fixture
def mm1_cert():
    return build_mg1_light(0.5, Exponential(1.0), 0.4)


def test_model_validation():
    with pytest.raises(InvalidParameter):
        WclModel(0.0, Exponential(1.0), 5.0)
    with pytest.raises(InvalidParameter):
        WclModel(0.5, Exponential(1.0), 0.0)
    with pytest.raises(UnstableModel):
        WclModel(1.0, Exponential(1.0), 5.0)
    assert WclModel(0.5, Exponential(1.0)).rho == pytest.approx(0.5)


def test_infinite_capacity_has_zero_distance(mm1_cert):
    result = wcl_distance_bound(WclModel(0.5, Exponential(1.0)), mm1_cert)
    assert result.value == 0.0 and result.m_used == 0


def test_inner_integral_closed_form(mm1_cert):
    x, L = 2.0, 10.0
    value, err = inner_tail_integral(Exponential(1.0), mm1_cert, x, L)
    a = L - x
    head = math.exp(-a) * (math.exp(0.4 * L) - 1.0 + math.exp(0.4 * x) - 1.0)
    rest = 0.4 * math.exp(0.4 * x - 0.6 * a) / 0.6
    assert value == pytest.approx(head + rest, rel=1e-12)
    assert err == 0.0


def test_inner_integral_quadrature_agrees_with_closed_form(mm1_cert):
    # Erlang(1, 1) is the exponential law but takes the quadrature path
    for x in (0.0, 3.0, 9.5):
        closed, _ = inner_tail_integral(Exponential(1.0), mm1_cert, x, 10.0)
        quad, err = inner_tail_integral(Erlang(1, 1.0), mm1_cert, x, 10.0)
        assert quad == pytest.approx(closed, rel=1e-8)
        assert err <= 1e-6


def test_inner_integral_vanishes_below_deterministic_service():
    law = Deterministic(1.0)
    cert = build_mg1_light(0.5, law, 0.4)
    value, _ = inner_tail_integral(law, cert, 0.0, 10.0)
    assert value == 0.0
    near, _ = inner_tail_integral(law, cert, 9.5, 10.0)
    assert near > 0.0


def test_inner_integral_rejects(mm1_cert, pareto):
    with pytest.raises(InvalidParameter):
        inner_tail_integral(Exponential(1.0), mm1_cert, 11.0, 10.0)
    with pytest.raises(DivergentInnerIntegral):
        inner_tail_integral(Exponential(0.3), mm1_cert, 1.0, 10.0)
    with pytest.raises(DivergentInnerIntegral):
        inner_tail_integral(pareto, mm1_cert, 1.0, 10.0)
    poly = build_mg1_polynomial(1.0, pareto, kappa_tilde=2.0, x0=4.0, rho_tilde=0.8)
    assert math.isfinite(inner_tail_integral(pareto, poly, 1.0, 10.0)[0])


def test_moderate_certificate_against_pareto_diverges(weibull, pareto):
    cert = build_mg1_moderate(1.0, weibull, eps=0.2, x0=25.0, rho_tilde=0.8)
    with pytest.raises(DivergentInnerIntegral):
        inner_tail_integral(pareto, cert, 1.0, 10.0)


def test_mismatched_certificate(mm1_cert, map2):
    with pytest.raises(MismatchedModel):
        wcl_distance_bound(WclModel(0.6, Exponential(1.0), 5.0), mm1_cert)
    with pytest.raises(MismatchedModel):
        wcl_distance_bound(WclModel(0.5, Exponential(1.0), 5.0),
                           build_map_gi1(map2, Exponential(2.0), 0.5))


def test_distance_bound_bookkeeping(mm1_cert):
    tol = 1e-3
    result = wcl_distance_bound(WclModel(0.5, Exponential(1.0), 10.0), mm1_cert, tol)
    assert result.prefactor == pytest.approx(4.0)
    assert result.truncation_error <= tol / 2
    assert result.quadrature_error <= tol / 2
    assert result.sup_term == pytest.approx(inner_tail_integral(Exponential(1.0), mm1_cert, 10.0, 10.0)[0])
    assert len(result.terms) == result.m_used + 1
    w = 0.5 * result.prefactor
    for t in result.terms:
        assert 0.0 <= t["integral"] <= result.sup_term * (1 + 1e-9)
        assert t["contribution"] == pytest.approx(w * t["weight"] * t["integral"])
    total = math.fsum(t["contribution"] for t in result.terms)
    assert result.value == pytest.approx(total + result.truncation_error + result.quadrature_error)
    assert result.to_dict()["provenance"] == "wcl_series_bound"


def test_distance_decreases_with_capacity(mm1_cert):
    values = [wcl_distance_bound(WclModel(0.5, Exponential(1.0), L), mm1_cert).value
              for L in (5.0, 10.0, 20.0)]
    assert values[0] > values[1] > values[2] > 0.0


def test_tighter_tolerance_stays_within_tolerance(mm1_cert):
    model = WclModel(0.5, Exponential(1.0), 10.0)
    coarse = wcl_distance_bound(model, mm1_cert, 1e-3)
    fine = wcl_distance_bound(model, mm1_cert, 1e-4)
    assert abs(coarse.value - fine.value) <= 2e-3
    assert fine.m_used >= coarse.m_used


def test_distance_rejects_bad_tolerance(mm1_cert):
    with pytest.raises(InvalidParameter):
        wcl_distance_bound(WclModel(0.5, Exponential(1.0), 10.0), mm1_cert, 0.0)


def test_zeroth_term_is_inner_integral_at_zero(mm1_cert):
    result = wcl_distance_bound(WclModel(0.5, Exponential(1.0), 5.0), mm1_cert)
    i0, _ = inner_tail_integral(Exponential(1.0), mm1_cert, 0.0, 5.0)
    assert result.terms[0]["integral"] == pytest.approx(i0)
    assert result.terms[0]["weight"] == pytest.approx(0.5)
    np.testing.assert_allclose([t["weight"] for t in result.terms[:3]], [0.5, 0.25, 0.125])
