import numpy as np
import pytest

from poisson_bound.core.errors import (
    InvalidShape, NegativeRate, NoArrivals, NonGeneratorRows, Reducible,
)
from poisson_bound.models.map_model import poisson_process, stationary_phase, validate_map


def test_two_phase_stationary(map2):
    st = stationary_phase(map2)
    np.testing.assert_allclose(st.varpi, [1 / 3, 2 / 3], atol=1e-12)
    assert st.lam == pytest.approx(1.0, abs=1e-12)
    assert st.residual <= 1e-10


def test_poisson_process_is_one_phase():
    mp = poisson_process(0.7)
    assert mp.M == 1
    st = stationary_phase(mp)
    assert st.lam == pytest.approx(0.7)
    np.testing.assert_allclose(st.varpi, [1.0])


@pytest.mark.parametrize("C, D, error", [
    ([[-1.0, 1.0]], [[1.0, 0.0]], InvalidShape),
    ([[-1.0]], [[1.0, 0.0], [0.0, 1.0]], InvalidShape),
    ([[-2.0, -1.0], [1.0, -2.0]], np.eye(2), NegativeRate),
    ([[-1.0, 1.0], [1.0, -1.0]], np.zeros((2, 2)), NoArrivals),
    ([[-2.0, 1.0], [0.5, -1.0]], np.eye(2), NonGeneratorRows),
    ([[-2.0, 1.0], [0.0, -1.0]], np.eye(2), Reducible),
])
def test_validate_rejects(C, D, error):
    with pytest.raises(error):
        validate_map(C, D)


def test_reducible_reports_components():
    with pytest.raises(Reducible) as info:
        validate_map([[-2.0, 1.0], [0.0, -1.0]], np.eye(2))
    assert sorted(map(tuple, info.value.details["components"])) == [(0,), (1,)]


def test_validated_matrices_are_read_only(map2):
    with pytest.raises(ValueError):
        map2.C[0, 0] = 0.0


def test_model_key_tracks_entries(map2):
    same = validate_map([[-2.0, 1.0], [0.5, -1.5]], np.eye(2))
    other = validate_map([[-2.0, 1.0], [1.0, -2.0]], np.eye(2))
    assert map2.model_key == same.model_key
    assert map2.model_key != other.model_key
