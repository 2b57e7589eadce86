from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import nnls as scipy_nnls

from tlsmit.nnls import nnls, projected_gradient

# three decimals keeps entries well-scaled; the stopping rule is an absolute tolerance
finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False).map(lambda v: round(v, 3))


@given(
    st.integers(2, 8).flatmap(
        lambda n: st.tuples(
            arrays(float, (n + 3, n), elements=finite), arrays(float, n + 3, elements=finite)
        )
    )
)
def test_kkt_and_scipy_agreement(Ab):
    A, b = Ab
    x, r = nnls(A, b)
    assert np.all(x >= 0)
    assert r == pytest.approx(np.linalg.norm(A @ x - b), abs=1e-9)
    xs, rs = scipy_nnls(A, b)
    # the optimal residual is unique even when x is not
    assert r == pytest.approx(rs, rel=1e-7, abs=1e-7)
    scale = max(1.0, np.abs(A).max() ** 2 * max(1.0, np.abs(x).max()))
    assert np.abs(projected_gradient(A, b, x)).max() < 1e-7 * scale


def test_unconstrained_interior_solution():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(20, 5))
    x0 = rng.uniform(0.5, 1.0, 5)
    x, r = nnls(A, A @ x0)
    np.testing.assert_allclose(x, x0, atol=1e-12)
    assert r < 1e-12


def test_active_constraint():
    A = np.eye(3)
    x, _ = nnls(A, np.array([1.0, -2.0, 3.0]))
    assert x.tolist() == [1.0, 0.0, 3.0]


def test_shape_check():
    with pytest.raises(ValueError):
        nnls(np.eye(3), np.ones(2))
