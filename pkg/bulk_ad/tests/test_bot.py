"""Test the bulk-operation transform."""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
import numpy as np
import pytest

from bulk_ad.bot import normalize, check_normal_form
from bulk_ad.config import SEMANTIC_RTOL, SEMANTIC_ATOL
from bulk_ad.interp import eval_term
from bulk_ad.ir import (ArrayType, Build1, Const, Var,
                        alpha_equivalent, check_program, iter_terms)
from bulk_ad.oracle import gen_program, gen_input
from bulk_ad.syntax import parse_term, parse_program
from bulk_ad.tensor import ConcreteArray

T_SC = """
    (params (a f64 [3]))
    (sumouter (build1 3 (lam i
      (op * (index a [i]) (index a [(op - (op - 3 1) i)])))))
"""
T_SC_BULK = """
    (sumouter (op *
      (gather [3] a (lam [i] [i]))
      (gather [3] a (lam [i] [(op - (op - 3 1) i)]))))
"""


def _real(*shape):
    return ArrayType(tuple(shape), 'f64')


def _assert_same_value(a, b):
    assert a.kind == b.kind and a.shape == b.shape
    if a.kind == 'f64':
        np.testing.assert_allclose(a.data, b.data, rtol=SEMANTIC_RTOL,
                                   atol=SEMANTIC_ATOL)
    else:
        assert a == b


@pytest.mark.parametrize('strategy', ['outermost', 'innermost'])
def test_goldens(strategy):
    """Test the rewrites of small known programs."""
    env = {'a': _real(4)}
    t = parse_term('(build1 4 (lam i (op + (index a [i]) 1.0)))')
    expected = parse_term('(op + (gather [4] a (lam [i] [i])) '
                          '(replicate 4 1.0))')
    out = normalize(t, env, strategy=strategy)
    assert alpha_equivalent(out, expected)
    assert out.type == _real(4)

    program = check_program(parse_program(T_SC))
    out = normalize(program.body, program.env, strategy=strategy)
    assert alpha_equivalent(out, parse_term(T_SC_BULK))
    a = ConcreteArray([1., 2., 3.])
    assert eval_term(out, {'a': a}).item() == 10.

    out = normalize(parse_term('(build1 3 (lam i i))'), {},
                    strategy=strategy)
    assert isinstance(out, Const)
    assert out.value == ConcreteArray([0, 1, 2])


def test_rules():
    """Test a few individual rewrites through their normal forms."""
    env = {'x': _real(2, 3), 'k': ArrayType((), 'i64')}
    cases = [
        # build1 of a term not using its variable
        ('(build1 2 (lam i x))', '(replicate 2 x)'),
        # index through replicate
        ('(index (replicate 5 x) [k])', 'x'),
        ('(index (index x [k]) [])', '(index x [k])'),
        ('(let (y x) (op neg y))', '(op neg x)'),
        # two gathers read through one
        ('(gather [2 2] (gather [3 2] x (lam [i j] [j i])) '
         '(lam [k] [(op - 1 k)]))',
         '(gather [2 2] x (lam [k g] [g (op - 1 k)]))'),
    ]
    for source, expected in cases:
        out = normalize(parse_term(source), env)
        assert alpha_equivalent(out, parse_term(expected)), source


def test_simplify():
    """Test the optional removal of identity operations."""
    env = {'a': _real(3)}
    t = parse_term('(build1 3 (lam i (index a [i])))')
    out = normalize(t, env)
    assert alpha_equivalent(out, parse_term('(gather [3] a (lam [i] [i]))'))
    assert normalize(t, env, simplify=True) == Var('a')
    t = parse_term('(op + (tr [0] a) (reshape [3] a))')
    assert alpha_equivalent(normalize(t, env, simplify=True),
                            parse_term('(op + a a)'))


def test_normalize_errors():
    """Test the argument checks and the step budget."""
    program = check_program(parse_program(T_SC))
    with pytest.raises(ValueError, match='strategy must be'):
        normalize(program.body, program.env, strategy='random')
    with pytest.raises(RuntimeError, match='did not reach a normal form'):
        normalize(program.body, program.env, step_budget=1)


def test_check_normal_form():
    """Test the classification of index heads."""
    report = check_normal_form(parse_term(
        '(index (scatter [3] a (lam [p] [p])) [1])'))
    assert report.ok
    assert report.heads['scatter'] == 1

    report = check_normal_form(parse_term('(build1 3 (lam i (index a [i])))'))
    assert not report.ok
    assert report.n_build1 == 1

    report = check_normal_form(parse_term('(index (ravel a a) [0 1])'))
    assert not report.ok
    assert 'Ravel' in report.violations[0]

    report = check_normal_form(parse_term(
        '(op + (index a [1]) (index (ravel b b) [k]))'))
    assert report.ok
    assert dict(report.heads) == {'variable': 1, 'ravel': 1}


def test_cond_under_build1():
    """Test that a conditional under build1 is vectorized."""
    program = check_program(parse_program("""
        (params (a f64 [4]) (k i64 []))
        (build1 4 (lam i (cond (op < i k) (index a [i]) (op neg
          (index a [i])))))
    """))
    out = normalize(program.body, program.env)
    assert check_normal_form(out).ok
    a = ConcreteArray([1., -2., 3., -4.])
    value = eval_term(out, {'a': a, 'k': ConcreteArray.scalar(2)})
    assert value == ConcreteArray([1., -2., -3., 4.])


def test_normal_form_corpus():
    """Test normal forms and values on generated programs."""
    for seed in range(500):
        program = gen_program(seed)
        out = normalize(program.body, program.env)
        report = check_normal_form(out)
        assert report.ok, (seed, report.violations)
        assert not any(isinstance(node, Build1) for node in iter_terms(out))
        assert out.type == program.body.type
        for j in range(3):
            inputs = gen_input((seed, j), program.params)
            _assert_same_value(eval_term(out, inputs),
                               eval_term(program.body, inputs))


def test_strategies_agree():
    """Test that both rewrite orders reach the same normal form."""
    for seed in range(40):
        program = gen_program(seed)
        inputs = gen_input(seed, program.params)
        outer = normalize(program.body, program.env)
        inner = normalize(program.body, program.env, strategy='innermost')
        assert check_normal_form(inner).ok
        assert alpha_equivalent(outer, inner), seed
        _assert_same_value(eval_term(outer, inputs),
                           eval_term(inner, inputs))
