import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dgsim.activity import (AutoregressiveForecaster, DegreeForecast, FixedForecaster,
                            MovingAverageForecaster, NotFittedError, PersistenceForecaster, active_sources,
                            degree_loss, dump_forecasts, k2, load_forecasts, make_forecaster)


def test_moving_average_window_three():
    f = MovingAverageForecaster(3).fit({"u": [0, 3, 3]})
    assert f.predict("u", 2).values == (2.0, 2.0)


def test_moving_average_default_window():
    f = MovingAverageForecaster().fit({0: list(range(10))})
    assert f.predict(0, 1).values == (float(np.mean(range(3, 10))),)


def test_persistence_repeats_last_day():
    f = PersistenceForecaster().fit({0: [1, 9, 4]})
    assert f.predict(0, 3).values == (4.0, 4.0, 4.0)


@pytest.mark.parametrize("c", [0.0, 2.0, 5.5])
def test_autoregressive_constant_series(c):
    f = AutoregressiveForecaster(1).fit({0: [c] * 6, 1: [c] * 6})
    np.testing.assert_allclose(f.predict(0, 3).values, [c] * 3, atol=1e-9)


def test_autoregressive_recovers_linear_recursion():
    # y_t = 1 + 0.5 y_{t-1}, exactly representable by AR(1)
    ys = [0.0]
    for _ in range(8):
        ys.append(1 + 0.5 * ys[-1])
    f = AutoregressiveForecaster(1).fit({0: ys})
    np.testing.assert_allclose(f.coef, [1.0, 0.5], atol=1e-9)
    assert f.predict(0, 1).values[0] == pytest.approx(1 + 0.5 * ys[-1])


def test_predictions_clipped_and_unknown_nodes_zero():
    f = AutoregressiveForecaster(1).fit({0: [5, 3, 1], 1: [4, 2, 0]})
    assert min(f.predict(0, 4).values) >= 0.0
    assert f.predict("ghost", 2).values == (0.0, 0.0)


def test_fit_errors():
    with pytest.raises(ValueError):
        PersistenceForecaster().fit({})
    with pytest.raises(ValueError):
        PersistenceForecaster().fit({0: [1, 2], 1: [1]})
    with pytest.raises(NotFittedError):
        PersistenceForecaster().predict(0, 1)
    with pytest.raises(ValueError):
        make_forecaster("informer")


def test_refit_is_idempotent():
    h = {0: [1, 2, 4], 1: [0, 0, 1]}
    f = AutoregressiveForecaster(1)
    a = f.fit(h).predict_all(3)
    assert f.fit(h).predict_all(3) == a


def test_degree_loss():
    assert degree_loss({0: [3.0]}, {0: [1.0]}) == 4.0
    assert degree_loss({0: [1, 2]}, {0: [1, 2]}) == 0.0
    with pytest.raises(ValueError):
        degree_loss({0: [1]}, {1: [1]})
    with pytest.raises(ValueError):
        degree_loss({0: [1, 2]}, {0: [1]})


@given(st.lists(st.floats(0, 10), min_size=1, max_size=8), st.lists(st.floats(0, 10), min_size=1, max_size=8))
def test_degree_loss_scaling(p, t):
    n = min(len(p), len(t))
    p, t = p[:n], t[:n]
    base = degree_loss({0: p}, {0: t})
    doubled = degree_loss({0: [2 * a - b for a, b in zip(p, t)]}, {0: t})
    assert base >= 0
    assert doubled == pytest.approx(4 * base, rel=1e-9, abs=1e-9)


def test_active_sources():
    fc = {0: DegreeForecast(0, (0.4, 1.2)), 1: DegreeForecast(1, (0.0, 0.0))}
    assert active_sources(fc) == [[0], [0]]
    # node 0 is active on day 0 yet its budget rounds to zero destinations
    assert k2(0.4) == 0
    assert active_sources({0: DegreeForecast(0, (0.0, 0.0))}) == [[], []]


@given(st.dictionaries(st.integers(0, 20), st.lists(st.floats(0, 5), min_size=3, max_size=3), max_size=6),
       st.floats(0, 3), st.floats(0, 3))
def test_active_sources_monotone_in_threshold(raw, a, b):
    lo, hi = sorted((a, b))
    fc = {u: DegreeForecast(u, tuple(v)) for u, v in raw.items()}
    for small, big in zip(active_sources(fc, hi), active_sources(fc, lo)):
        assert set(small) <= set(big)


def test_k2_rounds_half_to_even():
    assert [k2(x) for x in (0.5, 1.5, 2.5, 2.6)] == [0, 2, 2, 3]


def test_persistence_total_matches_last_day():
    hist = {0: [1, 3], 1: [2, 5], 2: [0, 0]}
    fc = PersistenceForecaster().fit(hist).predict_all(4)
    for d in range(4):
        assert sum(f.values[d] for f in fc.values()) == 8


def test_forecast_dump_round_trip(tmp_path):
    fc = {0: DegreeForecast(0, (1.0, 2.0)), "a": DegreeForecast("a", (0.5, 0.0))}
    dump_forecasts(tmp_path / "f.jsonl", fc, 26)
    back, start = load_forecasts(tmp_path / "f.jsonl")
    assert start == 26 and back == fc


def test_fixed_forecaster():
    f = FixedForecaster({0: [1, 2]}).fit()
    assert f.predict(0, 3).values == (1.0, 2.0, 0.0)
