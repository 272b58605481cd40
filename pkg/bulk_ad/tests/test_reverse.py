"""Test the dual transform and the concrete reverse pass."""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bulk_ad.bot import normalize
from bulk_ad.carrier import ConcreteCarrier
from bulk_ad.delta import (DVarName, DeltaId, Zero, Input, Add, Scale,
                           ShareD, count_delta_nodes, check_delta_invariants,
                           eval_forward)
from bulk_ad.dual import (dualize, NonScalarOutputError,
                          ContainsBuild1Error)
from bulk_ad.interp import eval_term
from bulk_ad.oracle import (GRADIENT_SUITE, suite_program, dot_program,
                            doubling_chain, finite_diff_grad, gen_input)
from bulk_ad.reverse import (EState, ReverseStats, eval4, backprop,
                             reverse_pass, grad_concrete)
from bulk_ad.syntax import parse_program
from bulk_ad.tensor import ConcreteArray, dot

X = DVarName(1, (3,))


def _arr(data):
    return ConcreteArray(data)


def _concrete_trace(program, inputs):
    body = normalize(program.body, program.env)
    carrier = ConcreteCarrier(inputs)
    return dualize(replace(program, body=body), carrier), carrier


def test_eval4():
    """Test single steps of the reverse pass."""
    carrier = ConcreteCarrier({})
    ones = _arr([1., 1., 1.])
    s = eval4(ones, Zero((3,)), EState(), carrier)
    assert s.grad == {}
    s = eval4(ones, Scale(_arr([2., 3., 4.]), Input(X)), EState(), carrier)
    assert s.grad[X] == _arr([2., 3., 4.])
    # a shared fragment is only queued
    shared = ShareD(DeltaId(1, (3,)), Input(X))
    s = eval4(ones, Add(shared, shared), EState(), carrier)
    assert s.grad == {}
    assert s.accum[1] == _arr([2., 2., 2.])
    s = backprop(s, carrier)
    assert s.grad[X] == _arr([2., 2., 2.])
    assert s.dfrag == {} and s.accum == {}
    # nothing pending
    empty = backprop(EState(), carrier)
    assert empty.grad == {}

    with pytest.raises(RuntimeError, match='Cotangent of shape'):
        eval4(_arr([1., 1.]), Input(X), EState(), carrier)


def test_dot_gradient():
    """Test the gradient of a dot product."""
    a, b = _arr([1., 2., 3.]), _arr([4., 5., 6.])
    grads = grad_concrete(dot_program(3), {'a': a, 'b': b})
    assert grads['a'] == b
    assert grads['b'] == a

    # the gradient is linear in the cotangent
    twice = grad_concrete(dot_program(3), {'a': a, 'b': b}, ctg=2.)
    assert twice['a'] == _arr([8., 10., 12.])
    assert twice['b'] == _arr([2., 4., 6.])

    with pytest.raises(ValueError, match='No value given'):
        grad_concrete(dot_program(3), {'a': a})


def test_unused_and_integer_params():
    """Test that unused reals get zeros and integers get no entry."""
    program = suite_program('cond_select_int')
    inputs = gen_input(0, program.params)
    grads = grad_concrete(program, inputs)
    assert sorted(grads) == ['x']
    program = parse_program('(params (a f64 [2]) (b f64 [2]))\n'
                            '(sumouter a)')
    grads = grad_concrete(program, {'a': _arr([1., 2.]),
                                    'b': _arr([3., 4.])})
    assert grads['a'] == _arr([1., 1.])
    assert grads['b'] == ConcreteArray.zeros((2,))


def test_dualize():
    """Test the primal of the dual transform and its argument checks."""
    program = suite_program('let_sharing')
    inputs = {'x': ConcreteArray.scalar(.7)}
    dual, _ = _concrete_trace(program, inputs)
    assert dual.primal == eval_term(program.body, inputs)
    check_delta_invariants(dual.delta)

    vector = parse_program('(params (a f64 [2])) (op sin a)')
    with pytest.raises(NonScalarOutputError, match='rank-0'):
        dualize(vector, ConcreteCarrier({'a': _arr([1., 2.])}))
    raw = suite_program('dot')
    with pytest.raises(ContainsBuild1Error, match='normalize it first'):
        dualize(raw, ConcreteCarrier({}))


@pytest.mark.parametrize('name', sorted(GRADIENT_SUITE))
def test_suite_against_finite_differences(name):
    """Test the fixed programs against central differences."""
    program = suite_program(name)
    for j in range(5):
        inputs = gen_input((len(name), j), program.params)
        grads = grad_concrete(program, inputs)
        fd = finite_diff_grad(program, inputs)
        for param in program.real_params:
            assert_allclose(grads[param].data, fd[param].data, rtol=1e-4,
                            atol=1e-6, err_msg=f'{name}: {param}')


@pytest.mark.parametrize('name', sorted(GRADIENT_SUITE))
def test_forward_reverse_duality(name):
    """Test <J t, c> = <t, J^T c> on the recorded traces."""
    program = suite_program(name)
    inputs = gen_input((7, len(name)), program.params)
    dual, carrier = _concrete_trace(program, inputs)
    rng = np.random.default_rng(len(name))
    tangents = {}
    for k, param in enumerate(program.real_params, 1):
        shape = tuple(program.env[param].shape)
        tangents[DVarName(k, shape)] = _arr(rng.standard_normal(shape))
    ctg = ConcreteArray.scalar(1.3)
    grad = reverse_pass(ctg, dual.delta, carrier)
    lhs = eval_forward(dual.delta, tangents).item() * ctg.item()
    rhs = sum(dot(tangents[var], grad[var]) for var in grad)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_trace_size_is_constant():
    """Test that bulk operations keep the trace independent of length."""
    counts = set()
    for n in (8, 64, 512):
        program = dot_program(n)
        inputs = gen_input(n, program.params)
        dual, _ = _concrete_trace(program, inputs)
        counts.add(count_delta_nodes(dual.delta))
    assert len(counts) == 1


def test_doubling_chain():
    """Test that shared fragments are visited once each."""
    n = 30
    program = doubling_chain(n)
    stats = ReverseStats()
    grads = grad_concrete(program, {'x0': ConcreteArray.scalar(1.)},
                          stats=stats)
    assert grads['x0'].item() == 2. ** n
    assert stats.visits <= 4 * n
    assert len(stats.dequeued) == n
    # highest id first
    assert stats.dequeued == sorted(stats.dequeued, reverse=True)
    assert stats.node_counts['Add'] == n
