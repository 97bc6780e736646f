import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qvilab.errors import DomainMismatchError, PreconditionError
from qvilab.lattice import (NEUMANN, TOP, Domain1D, GridFunction, Tolerances, join, le, meet,
                            norm, obstacle_le)

D3 = Domain1D(3)
D2 = Domain1D(2)


def gf(values, domain=None):
    values = np.asarray(values, dtype=float)
    return GridFunction(domain or Domain1D(values.size), values)


def test_domain_geometry():
    d = Domain1D(3, 1.0)
    assert d.h == 0.25
    np.testing.assert_allclose(d.nodes, [0.25, 0.5, 0.75])
    np.testing.assert_allclose(d.weights, [0.25] * 3)
    n = Domain1D(3, 1.0, NEUMANN)
    assert n.size == 5
    assert n.weights.sum() == pytest.approx(1.0)
    p = Domain1D.point()
    assert p.singleton and p.size == 1 and p.weights[0] == 1.0


@pytest.mark.parametrize("kw", [dict(n_interior=0), dict(n_interior=2.5), dict(n_interior=3, length=-1.0)])
def test_domain_rejects_bad_fields(kw):
    with pytest.raises(PreconditionError):
        Domain1D(**kw)


def test_le_examples():
    a = gf([0.3, 1.0, 2.0])
    assert le(a, a)
    assert not le(gf([0, 0, 0]), gf([1, -0.5, 2]), 0)
    assert le(gf([1, 1]), gf([1 + 1e-9, 1]), 1e-8)


def test_le_domain_mismatch():
    with pytest.raises(DomainMismatchError):
        le(gf([1, 2, 3]), gf([1, 2]))


def test_norm_examples():
    assert norm(GridFunction.zeros(D3), 1) == 0
    assert norm(GridFunction.zeros(D3), math.inf) == 0
    assert norm(GridFunction(Domain1D.point(), [3.0]), 2) == 3.0
    assert norm(GridFunction.constant(D3, 1.0), 1) == pytest.approx(0.75)
    with pytest.raises(PreconditionError):
        norm(GridFunction.constant(D3, 1.0), 0.5)


def test_meet_join_obstacle_le():
    v = gf([1, 3])
    assert np.array_equal(meet(v, v).values, v.values)
    np.testing.assert_array_equal(meet(gf([1, 3]), gf([2, 0])).values, [1, 0])
    np.testing.assert_array_equal(join(gf([1, 3]), gf([2, 0])).values, [2, 3])
    assert obstacle_le(gf([1e300, -4]), TOP, 0)
    assert not obstacle_le(gf([2, 0]), gf([1, 1]), 0)


def test_values_are_immutable_and_finite():
    v = gf([1, 2])
    with pytest.raises(ValueError):
        v.values[0] = 5
    with pytest.raises(PreconditionError):
        gf([1, np.nan])


def test_tolerances_invariant():
    Tolerances()
    with pytest.raises(PreconditionError):
        Tolerances(tol_inner=1e-6, tol_fixed_point=1e-8)
    with pytest.raises(PreconditionError):
        Tolerances(tol_fixed_point=2.0)
    r = Tolerances.pde_default().refined()
    assert r.tol_inner <= Tolerances.pde_default().tol_inner


finite = st.floats(-10, 10, allow_nan=False)
vec = arrays(float, 6, elements=finite)


@given(vec, vec, vec)
def test_partial_order_axioms(a, b, c):
    A, B, C = (gf(x) for x in (a, b, c))
    assert le(A, A)
    if le(A, B) and le(B, A):
        assert np.array_equal(a, b)
    if le(A, B) and le(B, C):
        assert le(A, C)


@given(vec, vec)
def test_absorption(a, b):
    A, B = gf(a), gf(b)
    assert np.array_equal(meet(A, join(A, B)).values, a)
    assert np.array_equal(join(A, meet(A, B)).values, a)


@given(arrays(float, 6, elements=st.floats(0, 10)), arrays(float, 6, elements=st.floats(0, 10)))
def test_norm_monotone(a, b):
    lo, hi = gf(np.minimum(a, b)), gf(np.maximum(a, b))
    for q in (1, 2, math.inf):
        assert norm(lo, q) <= norm(hi, q) * (1 + 1e-12)


@given(vec)
def test_holder_on_unit_interval(a):
    # weights h sum to n h < 1, so the weighted norms nest
    v = gf(a)
    assert norm(v, 1) <= norm(v, 2) * (1 + 1e-12) + 1e-300
    assert norm(v, 2) <= norm(v, math.inf) * (1 + 1e-12) + 1e-300
