import csv
import math

import numpy as np
import pytest

from config.config import CONFIG
from poisson_bound.core.errors import ExplodedCycle, InvalidParameter
from poisson_bound.models.service_law import Exponential, ParetoTail, WeibullTail
from poisson_bound.services.bound_engine import (
    atom_bound, general_bound, map_gi1_witness, map_gi1_witness_special,
)
from poisson_bound.services.drift_builder import (
    build_map_gi1, build_mg1_light, build_mg1_moderate, build_mg1_polynomial,
)
from poisson_bound.services.regen_sim import (
    HITTING, QueueModel, RandomStream, WorkloadState, estimate_arrival_rate, estimate_h,
    estimate_occupation, estimate_pi_g, estimate_return_probability,
    estimate_stationary_histogram, estimate_wcl_distance, simulate_cycle, state_at,
    write_cycles_csv,
)
from poisson_bound.services.rewards import ConstantReward, ExponentialReward, IndicatorAtZero
from poisson_bound.services.wcl_distance import WclModel, wcl_distance_bound


@pytest.fixture
def mm1_queue():
    return QueueModel.mg1(0.5, Exponential(1.0))


def _h_closed_form(x: float) -> float:
    # M/M/1 (λ = 1/2, μ = 1), g = e^{0.2w}: h = (e^{0.2x} - 1)/(θ - σ) - x·⟨π,g⟩/(1 - ρ)
    return math.expm1(0.2 * x) / 0.075 - x * (4.0 / 3.0) / 0.5


def test_workload_state_validation():
    with pytest.raises(InvalidParameter):
        WorkloadState(-1.0)


def test_queue_model_validation(map2):
    with pytest.raises(InvalidParameter):
        QueueModel(map2, Exponential(2.0), L=0.0)
    with pytest.raises(InvalidParameter):
        QueueModel(map2, Exponential(2.0), i0=2)


def test_constant_reward_ratio_is_exactly_one(mm1_queue):
    est = estimate_pi_g(mm1_queue, ConstantReward(1.0), 500, seed=11)
    assert est.point == 1.0
    assert est.std_error == 0.0


def test_same_seed_same_estimate(mm1_queue):
    reward = ExponentialReward(1.0, 0.2)
    a = estimate_pi_g(mm1_queue, reward, 2000, seed=5)
    b = estimate_pi_g(mm1_queue, reward, 2000, seed=5)
    c = estimate_pi_g(mm1_queue, reward, 2000, seed=6)
    assert a.point == b.point and a.std_error == b.std_error
    assert a.point != c.point


@pytest.mark.parametrize("kwargs", [
    {"n_cycles": 99, "seed": 1}, {"n_cycles": 1000, "seed": None}, {"n_cycles": 1000, "seed": -1},
    {"n_cycles": 1000, "seed": 2 ** 64},
])
def test_pi_g_rejects(mm1_queue, kwargs):
    with pytest.raises(InvalidParameter):
        estimate_pi_g(mm1_queue, ConstantReward(), **kwargs)


def test_cycle_record_fields(mm1_queue):
    stream = RandomStream(3, 0, mm1_queue.law)
    for _ in range(50):
        rec = simulate_cycle(mm1_queue, WorkloadState(0.0), ConstantReward(), stream)
        assert rec.tau > 0.0
        assert 0.0 < rec.excursion <= rec.tau
        assert 0.0 < rec.occupation_C <= rec.tau


def test_hitting_from_atom_is_empty(mm1_queue):
    stream = RandomStream(3, 0, mm1_queue.law)
    rec = simulate_cycle(mm1_queue, WorkloadState(0.0), ConstantReward(), stream, mode=HITTING)
    assert (rec.tau, rec.g_integral, rec.occupation_C) == (0.0, 0.0, 0.0)


def test_h_vanishes_on_atom(mm1_queue):
    reward = ExponentialReward(1.0, 0.2)
    pi_g = estimate_pi_g(mm1_queue, reward, 500, seed=1)
    est = estimate_h(mm1_queue, reward, WorkloadState(0.0), 500, pi_g, seed=2)
    assert est.point == 0.0 and est.std_error == 0.0


def test_finite_capacity_never_exceeds_L():
    model = QueueModel.mg1(0.9, Exponential(1.0), L=2.0)
    stream = RandomStream(9, 0, model.law)
    for _ in range(200):
        rec = simulate_cycle(model, WorkloadState(0.0), ConstantReward(), stream, record_segments=True)
        assert max(w for w, _ in rec.segments) <= 2.0
    for _ in range(50):
        assert state_at(model, WorkloadState(1.5), 3.0, stream).w <= 2.0


def test_return_probability_at_time_zero(map2):
    model = QueueModel.map_gi1(map2, Exponential(2.0), i0=0)
    assert estimate_return_probability(model, 0, 0.0, seed=1, n=10).point == 1.0
    assert estimate_return_probability(model, 1, 0.0, seed=1, n=10).point == 0.0
    with pytest.raises(InvalidParameter):
        estimate_return_probability(model, 0, -1.0, seed=1, n=10)


def test_histogram_masses_sum_to_one():
    model = QueueModel.mg1(0.5, Exponential(1.0), L=3.0)
    hist = estimate_stationary_histogram(model, np.linspace(0.0, 6.0, 13), 2000, seed=4)
    assert hist.atom_mass + hist.masses.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(hist.masses[6:] == 0.0)
    with pytest.raises(InvalidParameter):
        estimate_stationary_histogram(model, [0.0, 2.0, 1.0], 200, seed=4)


def test_exploding_cycle(monkeypatch):
    monkeypatch.setitem(CONFIG.config["simulation"], "cycle_cap", 50.0)
    unstable = QueueModel.mg1(2.0, Exponential(1.0))
    with pytest.raises(ExplodedCycle):
        estimate_pi_g(unstable, ConstantReward(), 200, seed=1)


def test_cycles_csv(tmp_path, mm1_queue):
    stream = RandomStream(1, 0, mm1_queue.law)
    records = [simulate_cycle(mm1_queue, WorkloadState(0.0), ConstantReward(), stream) for _ in range(3)]
    path = tmp_path / "cycles.csv"
    write_cycles_csv(records, str(path))
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["tau", "g_integral", "occupation_C"]
    assert len(rows) == 4
    assert float(rows[1][0]) == records[0].tau
    assert "np." not in path.read_text()


def test_wcl_distance_estimate_needs_finite_capacity(mm1_queue):
    with pytest.raises(InvalidParameter):
        estimate_wcl_distance(mm1_queue, lambda x: 1.0, 10, 200, seed=1)


# ---------------------------------------------------------------------------
# 统计检验
# ---------------------------------------------------------------------------

def _within(est, expected, k=4.0):
    assert abs(est.point - expected) <= k * est.std_error + 1e-12, (est.point, est.std_error, expected)


def test_atom_probability(mm1_queue):
    _within(estimate_pi_g(mm1_queue, IndicatorAtZero(), 10_000, seed=21), 0.5)


def test_idle_time_per_cycle(mm1_queue):
    # idle period ~ Exp(λ)
    _within(estimate_occupation(mm1_queue, WorkloadState(0.0), 10_000, seed=22), 2.0)


def test_arrival_rate_of_two_phase_map(map2):
    _within(estimate_arrival_rate(map2, 20_000, seed=23), 1.0)


@pytest.mark.slow
def test_exponential_moment(mm1_queue):
    # (1 - ρ) + ρ(μ - λ)/(μ - λ - θ)
    est = estimate_pi_g(mm1_queue, ExponentialReward(1.0, 0.2), 40_000, seed=24)
    _within(est, 4.0 / 3.0)
    assert est.extra["mean_cycle"] == pytest.approx(4.0, rel=0.05)


@pytest.mark.slow
@pytest.mark.parametrize("x", [0.5, 2.0, 4.0])
def test_poisson_solution_against_closed_form(mm1_queue, x):
    reward = ExponentialReward(1.0, 0.2)
    pi_g = estimate_pi_g(mm1_queue, reward, 40_000, seed=25)
    est = estimate_h(mm1_queue, reward, WorkloadState(x), 20_000, pi_g, seed=26)
    _within(est, _h_closed_form(x))


@pytest.mark.slow
def test_return_probability_bounded_by_witness(map2):
    law = Exponential(2.0)
    w = map_gi1_witness(map2, law, 0, 0.5, 0.5)
    model = QueueModel.map_gi1(map2, law, i0=0)
    for phase in range(2):
        est = estimate_return_probability(model, phase, w.T, seed=27 + phase, n=20_000)
        assert est.point + 3.0 * est.std_error >= w.xi_T


@pytest.mark.slow
def test_wcl_distance_estimate_below_bound():
    law = Exponential(1.0)
    cert = build_mg1_light(0.5, law, 0.4)
    bound = wcl_distance_bound(WclModel(0.5, law, 5.0), cert)
    model = QueueModel.mg1(0.5, law, L=5.0)
    est = estimate_wcl_distance(model, lambda x: float(cert.f(x)), 40, 20_000, seed=28)
    assert abs(est.point) + 3.0 * est.std_error <= bound.value


def _assert_dominated(model, cert, bound, states, seed, n_cycles=20_000, n_reps=10_000):
    reward = cert.reward()
    pi_g = estimate_pi_g(model, reward, n_cycles, seed=seed)
    for k, state in enumerate(states):
        est = estimate_h(model, reward, state, n_reps, pi_g, seed=seed + 1 + k)
        assert abs(est.point) - 3.0 * est.std_error <= bound.evaluate(state.w, state.phase), \
            (state, est.point, est.std_error)


@pytest.mark.slow
def test_moderate_bound_dominates_simulated_h():
    law = WeibullTail(0.5, 2.0)
    cert = build_mg1_moderate(1.0, law, eps=0.2, x0=25.0, rho_tilde=0.8)
    states = [WorkloadState(x) for x in (0.5, 2.0, 5.0)]
    _assert_dominated(QueueModel.mg1(1.0, law), cert, atom_bound(cert), states, seed=40)


@pytest.mark.slow
def test_polynomial_bound_dominates_simulated_h():
    # κ = 5: 周期积分方差有限
    law = ParetoTail(5.0, 2.0)
    cert = build_mg1_polynomial(1.0, law, kappa_tilde=2.0, x0=4.0, rho_tilde=0.8)
    assert cert.sufficient_integral == pytest.approx(0.5 + 1.0 / 12.0, rel=1e-6)
    states = [WorkloadState(x) for x in (0.5, 2.0, 5.0)]
    _assert_dominated(QueueModel.mg1(1.0, law), cert, atom_bound(cert), states, seed=50)


@pytest.mark.slow
def test_map_bound_dominates_simulated_h(map2):
    law = Exponential(2.0)
    cert = build_map_gi1(map2, law, 0.3)
    bound = general_bound(cert, map_gi1_witness_special(map2, cert.i0))
    model = QueueModel.map_gi1(map2, law, i0=cert.i0)
    states = [WorkloadState(0.0, 1), WorkloadState(1.0, 0), WorkloadState(1.0, 1), WorkloadState(3.0, 0)]
    _assert_dominated(model, cert, bound, states, seed=60)


def test_map_h_vanishes_on_atom(map2):
    law = Exponential(2.0)
    cert = build_map_gi1(map2, law, 0.3)
    model = QueueModel.map_gi1(map2, law, i0=cert.i0)
    reward = cert.reward()
    pi_g = estimate_pi_g(model, reward, 500, seed=70)
    est = estimate_h(model, reward, WorkloadState(0.0, cert.i0), 500, pi_g, seed=71)
    assert est.point == 0.0 and est.std_error == 0.0
    other = estimate_h(model, reward, WorkloadState(0.0, 1 - cert.i0), 500, pi_g, seed=71)
    assert other.std_error > 0.0


@pytest.mark.slow
def test_occupation_bounded_by_witness_ratio(map2):
    law = Exponential(2.0)
    w = map_gi1_witness(map2, law, 0, 0.5, 0.5)
    model = QueueModel.map_gi1(map2, law, i0=0)
    starts = [WorkloadState(0.0, 1), WorkloadState(0.5, 0), WorkloadState(2.0, 0), WorkloadState(2.0, 1)]
    for k, start in enumerate(starts):
        est = estimate_occupation(model, start, 10_000, seed=80 + k)
        assert est.point > 0.0
        assert est.point - 3.0 * est.std_error <= w.ratio, (start, est.point, w.ratio)
