import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tableturn.roots import MAXITER, BracketError, bisect, bisect_batch


def test_bisect_sqrt2():
    x, fx, it = bisect(lambda x: x * x - 2, 0.0, 2.0)
    assert x == pytest.approx(math.sqrt(2), abs=1e-12)
    assert it <= MAXITER


def test_bisect_endpoint_root():
    assert bisect(lambda x: x, 0.0, 1.0)[:2] == (0.0, 0.0)
    assert bisect(lambda x: x - 1, 0.0, 1.0)[:2] == (1.0, 0.0)


def test_bisect_needs_sign_change():
    with pytest.raises(BracketError):
        bisect(lambda x: x * x + 1, -1.0, 1.0)


def test_bisect_ftol_stops_early():
    _, fx, it = bisect(lambda x: x - 0.3, 0.0, 1.0, ftol=0.1)
    assert abs(fx) <= 0.1 and it <= 2


def test_bisect_nonsmooth():
    x, _, _ = bisect(lambda x: math.copysign(abs(x - 0.2) ** 0.25, x - 0.2), -1.0, 1.0)
    assert x == pytest.approx(0.2, abs=1e-12)


@given(st.floats(-0.99, 0.99), st.floats(0.1, 10))
def test_bisect_linear(root, scale):
    x, _, _ = bisect(lambda x: scale * (x - root), -1.0, 1.0)
    assert abs(x - root) <= 1e-12


def test_bisect_batch_matches_scalar():
    roots = np.linspace(-0.9, 0.9, 11)
    f = lambda x: np.tanh(3 * (x - roots))
    lo, hi = -np.ones(11), np.ones(11)
    x, fx = bisect_batch(f, lo, hi, f(lo), f(hi))
    np.testing.assert_allclose(x, roots, atol=1e-12)
    for i, r in enumerate(roots):
        xs, _, _ = bisect(lambda t: math.tanh(3 * (t - r)), -1.0, 1.0)
        assert x[i] == xs


def test_bisect_batch_flags_missing_bracket():
    f = lambda x: x * x - np.array([0.25, -1.0, 0.0])
    lo, hi = np.zeros(3), np.ones(3)
    x, fx = bisect_batch(f, lo, hi, f(lo), f(hi))
    assert x[0] == pytest.approx(0.5, abs=1e-12)
    assert math.isnan(x[1]) and math.isnan(fx[1])
    assert x[2] == 0.0 and fx[2] == 0.0
