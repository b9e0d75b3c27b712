import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgsim import _pykernels, kernels
from oracles import fnv1a_trigram, lcs

try:
    from dgsim import _ckernels
except ImportError:
    _ckernels = None

IMPLS = [pytest.param(_pykernels, id="python"),
         pytest.param(_ckernels, id="cython",
                      marks=pytest.mark.skipif(_ckernels is None, reason="extension not built"))]

ints = st.lists(st.integers(0, 6), max_size=40)
reals = st.lists(st.floats(-50, 50), min_size=1, max_size=60)


@pytest.mark.parametrize("impl", IMPLS)
@settings(max_examples=60, deadline=None)
@given(a=ints, b=ints)
def test_lcs_matches_table_oracle(impl, a, b):
    assert impl.lcs_length(np.array(a, dtype=np.int64), np.array(b, dtype=np.int64)) == lcs(a, b)


@pytest.mark.parametrize("impl", IMPLS)
@settings(max_examples=60, deadline=None)
@given(text=st.text(max_size=30), dim=st.sampled_from([1, 7, 256]))
def test_trigram_matches_fnv_oracle(impl, text, dim):
    np.testing.assert_array_equal(impl.trigram_features(text, dim), fnv1a_trigram(text, dim))


@pytest.mark.parametrize("impl", IMPLS)
@settings(max_examples=40, deadline=None)
@given(a=reals, b=reals, gamma=st.floats(1e-3, 5))
def test_rbf_cross_sum_matches_double_loop(impl, a, b, gamma):
    wa = np.linspace(0.5, 1.5, len(a))
    wb = np.linspace(1.0, 2.0, len(b))
    naive = sum(wa[i] * wb[j] * np.exp(-gamma * (a[i] - b[j]) ** 2)
                for i in range(len(a)) for j in range(len(b)))
    got = impl.rbf_cross_sum(np.array(a), wa, np.array(b), wb, gamma)
    assert got == pytest.approx(naive, rel=1e-12, abs=1e-12)


@pytest.mark.skipif(_ckernels is None, reason="extension not built")
def test_backends_agree_on_large_inputs():
    rng = np.random.default_rng(3)
    x = rng.normal(size=5000)
    w = rng.random(5000)
    assert _ckernels.rbf_cross_sum(x, w, x, w, 0.3) == pytest.approx(
        _pykernels.rbf_cross_sum(x, w, x, w, 0.3), rel=1e-11)
    a = rng.integers(0, 9, 300)
    b = rng.integers(0, 9, 250)
    assert _ckernels.lcs_length(a, b) == _pykernels.lcs_length(a, b)


def test_dispatch_wrappers_accept_lists():
    assert kernels.lcs_length([1, 2, 3], [1, 3]) == 2
    assert kernels.rbf_cross_sum([0.0], [1.0], [0.0], [1.0], 1.0) == 1.0
    assert kernels.BACKEND in ("cython", "python")


def test_short_text_is_single_gram():
    feats = _pykernels.trigram_features("ab", 64)
    assert np.abs(feats).sum() == 1.0
    assert not _pykernels.trigram_features("", 64).any()
