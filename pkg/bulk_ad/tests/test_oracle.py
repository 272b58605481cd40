"""Test finite differences, the program generator and the self checks."""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
import numpy as np
import pytest

from bulk_ad.config import (SYMBOLIC_TOL, MAGNITUDE_LIMIT, INPUT_MARGIN,
                            INPUT_RANGE)
from bulk_ad.interp import eval_term
from bulk_ad.ir import ArrayType, SCALAR_REAL, check_program
from bulk_ad.oracle import (GRADIENT_SUITE, GradCheckResult, suite_program,
                            doubling_chain, finite_diff_grad, gen_input,
                            gen_program, node_coverage, gradcheck, selftest)
from bulk_ad.reverse import grad_concrete
from bulk_ad.syntax import parse_program, print_program
from bulk_ad.tensor import ConcreteArray

warning_str = dict(
    redraw='ignore:Program for seed.*drawing another one:RuntimeWarning',
)

ALL_NODE_CLASSES = {'Const', 'Var', 'Let', 'Cond', 'PrimOp', 'Index',
                    'SumOuter', 'Gather', 'Scatter', 'Ravel', 'Replicate',
                    'Transpose', 'Reshape', 'Build1'}


def test_finite_diff_grad():
    """Test central differences on small programs."""
    square = parse_program('(params (x f64 []) (k i64 []))\n(op * x x)')
    inputs = {'x': ConcreteArray.scalar(3.), 'k': ConcreteArray.scalar(1)}
    grads = finite_diff_grad(square, inputs)
    assert sorted(grads) == ['x']
    assert grads['x'].item() == pytest.approx(6., rel=1e-8)

    program = doubling_chain(5)
    assert eval_term(program.body, {'x0': ConcreteArray.scalar(1.5)}) \
        .item() == 48.
    grads = finite_diff_grad(program, {'x0': ConcreteArray.scalar(1.5)})
    assert grads['x0'].item() == pytest.approx(32., rel=1e-8)

    with pytest.raises(ValueError, match='h must be positive'):
        finite_diff_grad(square, inputs, h=0.)
    vector = parse_program('(params (a f64 [2]))\n(op sin a)')
    with pytest.raises(ValueError, match='rank-0'):
        finite_diff_grad(vector, {'a': ConcreteArray([1., 2.])})


def test_finite_diff_step_halving():
    """Test that halving the step shrinks the error on a smooth program."""
    program = check_program(parse_program(
        '(params (a f64 [3]))\n(sumouter (op exp (op sin a)))'))
    inputs = {'a': ConcreteArray([.3, -.7, 1.1])}
    exact = grad_concrete(program, inputs)['a'].data
    errors = [np.abs(finite_diff_grad(program, inputs, h=h)['a'].data -
                     exact).max() for h in (1e-2, 5e-3)]
    assert 0 < errors[1] <= errors[0] / 2


def test_suite_program():
    """Test looking up the fixed programs."""
    assert len(GRADIENT_SUITE) == 12
    for name in GRADIENT_SUITE:
        assert suite_program(name).body.type == SCALAR_REAL
    with pytest.raises(ValueError, match='Unknown suite program'):
        suite_program('convolution')
    with pytest.raises(TypeError, match='name must be'):
        suite_program(3)


def test_gen_input():
    """Test the drawn inputs."""
    params = (('a', ArrayType((50,), 'f64')), ('k', ArrayType((20,), 'i64')),
              ('b', ArrayType((2, 2), 'bool')))
    inputs = gen_input(4, params)
    assert inputs == gen_input(4, params)
    assert inputs != gen_input((4, 1), params)
    a = inputs['a'].data
    lo, hi = INPUT_RANGE
    assert np.all((a >= lo) & (a <= hi + 2 * INPUT_MARGIN))
    assert np.all(np.abs(a - np.round(a)) >= INPUT_MARGIN)
    k = inputs['k'].data
    assert inputs['k'].kind == 'i64'
    assert k.min() >= 0 and k.max() <= 5
    assert inputs['b'].kind == 'bool'


@pytest.mark.filterwarnings(warning_str['redraw'])
def test_gen_program():
    """Test that generated programs are reproducible and well formed."""
    assert print_program(gen_program(5)) == print_program(gen_program(5))
    assert print_program(gen_program(5)) != print_program(gen_program(6))
    coverage = set()
    for seed in range(200):
        program = gen_program(seed)
        assert program.body.type == SCALAR_REAL
        names = [name for name, _ in program.params]
        assert len(names) == len(set(names))
        value = eval_term(program.body, gen_input(seed, program.params))
        assert np.isfinite(value.item())
        assert abs(value.item()) <= MAGNITUDE_LIMIT
        coverage |= set(node_coverage(program.body))
    assert coverage >= ALL_NODE_CLASSES
    small = gen_program(0, size_budget=1)
    assert set(node_coverage(small.body)) <= {'Var', 'Const'}


@pytest.mark.parametrize('name', sorted(GRADIENT_SUITE))
def test_gradcheck_suite(name):
    """Test that every fixed program passes the gradient check."""
    program = suite_program(name)
    inputs = gen_input(len(name), program.params)
    result = gradcheck(program, inputs, name=name)
    assert result.passed, result
    assert result.name == name
    assert set(result.errors) == set(program.real_params)
    assert result.symbolic_error <= SYMBOLIC_TOL

    result = gradcheck(program, inputs, symbolic=False)
    assert result.symbolic_error is None


def test_gradcheck_result():
    """Test the verdict of a gradient check."""
    assert GradCheckResult({}).passed
    assert GradCheckResult({}).max_error == 0.
    result = GradCheckResult({'a': 1e-6, 'b': 3e-5}, 0., 1e-4)
    assert result.max_error == 3e-5
    assert result.passed
    assert not GradCheckResult({'a': 1e-3}, None, 1e-4).passed
    assert not GradCheckResult({'a': 1e-6}, 1e-6, 1e-4).passed


@pytest.mark.filterwarnings(warning_str['redraw'])
def test_selftest():
    """Test the whole pipeline on a few generated programs."""
    result = selftest(seeds=5, n_inputs=2)
    assert result.passed, result
    assert (result.n_programs, result.n_inputs) == (5, 10)
    assert result.max_error <= 1e-4
    assert sum(result.coverage.values()) > 0

    result = selftest(seeds=[11, 12], n_inputs=1, size_budget=12)
    assert result.n_programs == 2
    assert result.passed, result
