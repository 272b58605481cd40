"""Test the concrete array operations."""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_array_equal, assert_allclose

from bulk_ad.tensor import (ConcreteArray, IndexFn, index, gather, scatter,
                            sum_outer, replicate, transpose, reshape,
                            from_subarrays, one_hot, map_op, dot,
                            inverse_permutation, transposed_shape,
                            op_result_kind)


def _arr(data, kind=None):
    return ConcreteArray(data, kind)


def _fn(n_in, n_out, fn):
    return IndexFn(n_in, n_out, fn)


def test_concrete_array():
    """Test construction, immutability and the JSON mirror."""
    a = _arr([[1, 2], [3, 4]])
    assert a.kind == 'i64'
    assert a.shape == (2, 2)
    assert a.rank == 2
    assert a.flat() == [1, 2, 3, 4]
    assert _arr([1.5]).kind == 'f64'
    assert _arr([True, False]).kind == 'bool'
    with pytest.raises(AttributeError, match='immutable'):
        a.kind = 'f64'
    with pytest.raises(ValueError):
        a.data[0, 0] = 7

    mirror = a.to_json()
    assert mirror == dict(kind='i64', shape=[2, 2], data=[1, 2, 3, 4])
    assert ConcreteArray.from_json(mirror) == a
    with pytest.raises(ValueError, match='needs 4 elements'):
        ConcreteArray.from_flat('f64', (2, 2), [1., 2.])
    with pytest.raises(ValueError, match='kind must be one of'):
        ConcreteArray([1], 'f32')
    with pytest.raises(ValueError, match='rank-0'):
        a.item()
    assert ConcreteArray.scalar(3.).item() == 3.
    assert ConcreteArray.zeros((0, 3)).shape == (0, 3)


def test_index():
    """Test total indexing."""
    a = _arr([[1, 2], [3, 4]])
    assert index(a, ()) == a
    assert index(a, (1, 0)) == ConcreteArray.scalar(3)
    assert index(a, (1,)) == _arr([3, 4])
    # out of range reads are zero
    assert index(_arr([1, 2, 3]), (5,)) == ConcreteArray.scalar(0)
    assert index(_arr([1, 2, 3]), (-1,)) == ConcreteArray.scalar(0)
    assert index(a, (2,)) == _arr([0, 0])
    with pytest.raises(ValueError, match='too long'):
        index(a, (0, 0, 0))


def test_gather():
    """Test gather with the identity, a reversal and out of range reads."""
    a = _arr([10, 20, 30])
    assert gather((3,), a, _fn(1, 1, lambda p: p)) == a
    rev = gather((3,), _arr([1, 2, 3]), _fn(1, 1, lambda p: (2 - p[0],)))
    assert rev == _arr([3, 2, 1])
    oob = gather((2,), _arr([5, 6, 7]), _fn(1, 1, lambda p: (p[0] + 9,)))
    assert oob == _arr([0, 0])
    # trailing dimensions are copied
    m = _arr([[1, 2], [3, 4], [5, 6]])
    rows = gather((2, 2), m, _fn(1, 1, lambda p: (2 * p[0],)))
    assert rows == _arr([[1, 2], [5, 6]])
    # a nullary function reads one subarray everywhere
    assert gather((), m, _fn(0, 2, lambda p: (2, 1))) == \
        ConcreteArray.scalar(6)
    with pytest.raises(ValueError, match='does not fit'):
        gather((3, 3), m, _fn(1, 1, lambda p: p))


def test_scatter():
    """Test that scatter accumulates and drops out of range writes."""
    a = _arr(np.arange(1, 10))
    out = scatter((6,), a, _fn(1, 1, lambda p: (p[0] // 2,)))
    assert out.flat() == [3, 7, 11, 15, 9, 0]
    ident = scatter((3,), _arr([1, 2, 3]), _fn(1, 1, lambda p: p))
    assert ident == _arr([1, 2, 3])
    dropped = scatter((2,), _arr([1, 2, 3]), _fn(1, 1, lambda p: (5,)))
    assert dropped == _arr([0, 0])
    with pytest.raises(ValueError, match='numeric'):
        scatter((2,), _arr([True, False]), _fn(1, 1, lambda p: p))


def test_sum_outer_and_replicate():
    """Test sum_outer, replicate and their interplay."""
    a = _arr([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
    assert sum_outer(a) == _arr([12, 15, 18])
    assert sum_outer(ConcreteArray.zeros((0, 3))) == \
        ConcreteArray.zeros((3,))
    x = _arr([1.5, -2.])
    assert_allclose(sum_outer(replicate(4, x)).data, 4 * x.data)
    assert replicate(2, _arr([1, 2])) == _arr([[1, 2], [1, 2]])
    assert replicate(0, _arr([1, 2])).shape == (0, 2)
    assert sum_outer(replicate(3, _arr([1.]))) == _arr([3.])
    with pytest.raises(ValueError, match='rank >= 1'):
        sum_outer(ConcreteArray.scalar(1.))
    with pytest.raises(ValueError, match='non-negative'):
        replicate(-1, x)


def test_transpose_and_reshape():
    """Test permutations of outer axes and reshaping."""
    a = _arr([[1, 2], [3, 4]])
    assert transpose((0,), a) == a
    assert transpose((1, 0), a) == _arr([[1, 3], [2, 4]])
    big = ConcreteArray.zeros((5, 3, 6, 9))
    assert transpose((3, 0, 1, 2), big).shape == (9, 5, 3, 6)
    assert transposed_shape((3, 0, 1, 2), (5, 3, 6, 9)) == (9, 5, 3, 6)
    assert transposed_shape((1, 0), (2, 3, 4)) == (3, 2, 4)
    assert inverse_permutation((3, 0, 1, 2)) == (1, 2, 3, 0)
    with pytest.raises(ValueError, match='not a permutation'):
        transpose((0, 0), a)
    with pytest.raises(ValueError, match='longer than'):
        transpose((0, 1, 2), a)

    assert reshape((4,), a) == _arr([1, 2, 3, 4])
    assert reshape((2, 2), _arr([1, 2, 3, 4])) == a
    assert reshape(a.shape, a) == a
    with pytest.raises(ValueError, match='Cannot reshape'):
        reshape((5,), a)


def test_from_subarrays_and_one_hot():
    """Test stacking and one-hot arrays."""
    assert from_subarrays([_arr([1]), _arr([2])]) == _arr([[1], [2]])
    u, v = _arr([1., 2.]), _arr([3., 4.])
    assert from_subarrays([u]) == replicate(1, u)
    assert index(from_subarrays([u, v]), (1,)) == v
    with pytest.raises(ValueError, match='one shape and kind'):
        from_subarrays([u, _arr([1.])])

    assert one_hot((3,), (1,), ConcreteArray.scalar(7)) == _arr([0, 7, 0])
    assert one_hot((2, 2), (0,), _arr([1, 2])) == _arr([[1, 2], [0, 0]])
    assert one_hot((2,), (4,), ConcreteArray.scalar(1.)) == _arr([0., 0.])
    with pytest.raises(ValueError, match='needs a value of shape'):
        one_hot((2, 2), (0,), _arr([1, 2, 3]))


def test_map_op():
    """Test elementwise primitives and the integer conventions."""
    assert map_op('+', [_arr([1, 2]), _arr([3, 4])]) == _arr([4, 6])
    assert map_op('*', [_arr([2, 3]), _arr([4, 5])]) == _arr([8, 15])
    assert map_op('div', [_arr([8]), _arr([2])]) == _arr([4])
    assert map_op('div', [_arr([-7]), _arr([2])]) == _arr([-4])
    assert map_op('mod', [_arr([-7]), _arr([2])]) == _arr([1])
    # integer division and modulo by zero are zero
    assert map_op('div', [_arr([5]), _arr([0])]) == _arr([0])
    assert map_op('mod', [_arr([5]), _arr([0])]) == _arr([0])
    assert map_op('div', [_arr([1.]), _arr([4.])]) == _arr([.25])
    assert map_op('<', [_arr([1, 3]), _arr([2, 2])]) == \
        _arr([True, False])
    assert map_op('toreal', [_arr([True, False])]) == _arr([1., 0.])
    assert map_op('floor', [_arr([-1.5, 2.5])]) == _arr([-2, 2])
    assert map_op('neg', [_arr([1., -2.])]) == _arr([-1., 2.])
    inf = map_op('div', [_arr([1.]), _arr([0.])])
    assert np.isinf(inf.data[0])

    assert op_result_kind('==', ['bool', 'bool']) == 'bool'
    with pytest.raises(ValueError, match='does not accept'):
        map_op('exp', [_arr([1])])
    with pytest.raises(ValueError, match='one kind'):
        map_op('+', [_arr([1]), _arr([1.])])
    with pytest.raises(ValueError, match='one shape'):
        map_op('+', [_arr([1, 2]), _arr([1])])
    with pytest.raises(ValueError, match='Unknown primitive'):
        map_op('pow', [_arr([1.]), _arr([1.])])


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 5), m=st.integers(1, 5), shift=st.integers(-2, 6),
       seed=st.integers(0, 2 ** 16))
def test_gather_scatter_adjoint(n, m, shift, seed):
    """Test <gather a, c> = <a, scatter c> for the same index function."""
    rng = np.random.default_rng(seed)
    a = _arr(rng.standard_normal((n, 2)))
    c = _arr(rng.standard_normal((m, 2)))
    f = _fn(1, 1, lambda p: ((3 * p[0] + shift) % (n + 1),))
    lhs = dot(gather((m, 2), a, f), c)
    rhs = dot(a, scatter((n, 2), c, f))
    assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(shape=st.lists(st.integers(1, 4), min_size=1, max_size=3),
       seed=st.integers(0, 2 ** 16))
def test_transpose_roundtrip(shape, seed):
    """Test that the inverse permutation undoes a transpose."""
    rng = np.random.default_rng(seed)
    a = _arr(rng.standard_normal(shape))
    perm = tuple(int(p) for p in rng.permutation(len(shape)))
    back = transpose(inverse_permutation(perm), transpose(perm, a))
    assert_array_equal(back.data, a.data)
    assert dot(sum_outer(replicate(3, a)), a) == pytest.approx(
        3 * dot(a, a))
