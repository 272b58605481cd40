"""Test command line."""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
import json

import pytest
from mne.utils import ArgvSetter

from bulk_ad.commands import (bulk_ad_check, bulk_ad_eval, bulk_ad_vectorize,
                              bulk_ad_grad, bulk_ad_compile_grad,
                              bulk_ad_gradcheck, bulk_ad_selftest, run)
from bulk_ad.ir import alpha_equivalent, check_program, count_shares
from bulk_ad.syntax import parse_program, parse_term, read_program

DOT = """
    (params (a f64 [3]) (b f64 [3]))
    (sumouter (build1 3 (lam i (op * (index a [i]) (index b [i])))))
"""
T_SC = """
    (params (a f64 [3]))
    (sumouter (build1 3 (lam i
      (op * (index a [i]) (index a [(op - (op - 3 1) i)])))))
"""
VECTOR = '(params (a f64 [3]))\n(op sin a)'
EXP = '(params (x f64 []))\n(op exp x)'

warning_str = dict(
    redraw='ignore:Program for seed.*drawing another one:RuntimeWarning',
)


def check_usage(module, force_help=False):
    """Ensure we print usage."""
    args = ('--help',) if force_help else ()
    with ArgvSetter(args) as out:
        try:
            module.run()
        except SystemExit:
            pass
        assert 'Usage: ' in out.stdout.getvalue()


@pytest.fixture
def files(tmp_path):
    """Write a few programs and an input file."""
    out = dict()
    for name, text in (('dot', DOT), ('t_sc', T_SC), ('vector', VECTOR),
                       ('exp', EXP), ('bad', '(op + 1 2')):
        out[name] = tmp_path / f'{name}.adl'
        out[name].write_text(text)
    out['inputs'] = tmp_path / 'dot.json'
    out['inputs'].write_text(json.dumps({'a': [1, 2, 3], 'b': [4, 5, 6]}))
    out['exp_inputs'] = tmp_path / 'exp.json'
    out['exp_inputs'].write_text(json.dumps({'x': 1.5}))
    return {name: str(fname) for name, fname in out.items()}


def test_check(files):
    """Test bulk_ad check."""
    check_usage(bulk_ad_check)
    with ArgvSetter((files['dot'],)) as out:
        bulk_ad_check.run()
    assert out.stdout.getvalue().strip() == 'Array [] f64'
    with ArgvSetter((files['vector'],)) as out:
        bulk_ad_check.run()
    assert out.stdout.getvalue().strip() == 'Array [3] f64'

    # parse errors exit with status 1
    with pytest.raises(SystemExit) as excinfo:
        with ArgvSetter((files['bad'],)) as out:
            bulk_ad_check.run()
    assert excinfo.value.code == 1
    assert 'ParseError' in out.stderr.getvalue()

    # usage errors exit with status 2
    with pytest.raises(SystemExit) as excinfo:
        with ArgvSetter((files['dot'], files['vector'])):
            bulk_ad_check.run()
    assert excinfo.value.code == 2


def test_eval(files):
    """Test bulk_ad eval."""
    check_usage(bulk_ad_eval)
    with ArgvSetter((files['dot'], '--inputs', files['inputs'])) as out:
        bulk_ad_eval.run()
    assert json.loads(out.stdout.getvalue()) == 32.

    # the inputs are required when the program has parameters
    with pytest.raises(SystemExit) as excinfo:
        with ArgvSetter((files['dot'],)):
            bulk_ad_eval.run()
    assert excinfo.value.code == 2

    # inputs that do not fit
    with pytest.raises(SystemExit) as excinfo:
        with ArgvSetter((files['vector'], '--inputs', files['inputs'])):
            bulk_ad_eval.run()
    assert excinfo.value.code == 1


def test_vectorize(files):
    """Test bulk_ad vectorize."""
    check_usage(bulk_ad_vectorize)
    for extra in ((), ('--simplify',), ('--innermost',)):
        with ArgvSetter((files['dot'],) + extra) as out:
            bulk_ad_vectorize.run()
        text = out.stdout.getvalue()
        assert 'build1' not in text
        assert ('gather' in text) != (extra == ('--simplify',))
        assert text.startswith('(params (a f64 [3]) (b f64 [3]))')

    # a self-convolution becomes two gathers under a sum
    with ArgvSetter((files['t_sc'],)) as out:
        bulk_ad_vectorize.run()
    expected = parse_term('''
        (sumouter (op *
          (gather [3] a (lam [i] [i]))
          (gather [3] a (lam [i] [(op - (op - 3 1) i)]))))''')
    assert alpha_equivalent(parse_program(out.stdout.getvalue()).body,
                            expected)


def test_grad(files):
    """Test bulk_ad grad."""
    check_usage(bulk_ad_grad)
    with ArgvSetter((files['dot'], '--inputs', files['inputs'])) as out:
        bulk_ad_grad.run()
    grads = json.loads(out.stdout.getvalue())
    assert grads == {'a': [4., 5., 6.], 'b': [1., 2., 3.]}

    with ArgvSetter((files['dot'], '--inputs', files['inputs'],
                     '--ctg', '2', '--simplify')) as out:
        bulk_ad_grad.run()
    grads = json.loads(out.stdout.getvalue())
    assert grads == {'a': [8., 10., 12.], 'b': [2., 4., 6.]}

    # Too few input args
    with pytest.raises(SystemExit) as excinfo:
        with ArgvSetter((files['dot'],)):
            bulk_ad_grad.run()
    assert excinfo.value.code == 2

    # only rank-0 real results have a gradient
    vector_inputs = files['inputs'].replace('dot.json', 'vector.json')
    with open(vector_inputs, 'w') as fid:
        json.dump({'a': [1., 2., 3.]}, fid)
    with pytest.raises(SystemExit) as excinfo:
        with ArgvSetter((files['vector'], '--inputs', vector_inputs)) as out:
            bulk_ad_grad.run()
    assert excinfo.value.code == 1
    assert 'rank-0' in out.stderr.getvalue()


def test_compile_grad(files, tmp_path):
    """Test bulk_ad compile-grad."""
    check_usage(bulk_ad_compile_grad)
    with ArgvSetter((files['dot'],)) as out:
        bulk_ad_compile_grad.run()
    assert out.stdout.getvalue().startswith(
        '(params (a f64 [3]) (b f64 [3]) (c f64 []))')

    output = str(tmp_path / 'dot_grad.adl')
    with ArgvSetter((files['dot'], '-o', output)):
        bulk_ad_compile_grad.run()
    grad_program = check_program(read_program(output))
    assert [name for name, _ in grad_program.params] == ['a', 'b', 'c']
    assert count_shares(grad_program.body) == 0

    with pytest.raises(FileExistsError, match='already exists'):
        with ArgvSetter((files['dot'], '-o', output)):
            bulk_ad_compile_grad.run()
    with ArgvSetter((files['dot'], '-o', output, '--overwrite',
                     '--simplify')):
        bulk_ad_compile_grad.run()

    # the emitted program runs with the other commands
    inputs = tmp_path / 'dot_grad.json'
    inputs.write_text(json.dumps({'a': [1, 2, 3], 'b': [4, 5, 6], 'c': 1}))
    with ArgvSetter((output, '--inputs', str(inputs))) as out:
        bulk_ad_eval.run()
    assert json.loads(out.stdout.getvalue()) == \
        [32., [[4., 5., 6.], [1., 2., 3.]]]

    with pytest.raises(SystemExit) as excinfo:
        with ArgvSetter((files['vector'],)):
            bulk_ad_compile_grad.run()
    assert excinfo.value.code == 1


def test_gradcheck(files):
    """Test bulk_ad gradcheck."""
    check_usage(bulk_ad_gradcheck)
    with ArgvSetter((files['dot'], '--seed', '3')) as out:
        bulk_ad_gradcheck.run()
    assert 'Verdict: PASSED.' in out.stdout.getvalue()
    with ArgvSetter((files['t_sc'], '--seed', '7')) as out:
        bulk_ad_gradcheck.run()
    assert 'Verdict: PASSED.' in out.stdout.getvalue()
    with ArgvSetter((files['exp'], '--inputs', files['exp_inputs'])) as out:
        bulk_ad_gradcheck.run()
    assert 'Verdict: PASSED.' in out.stdout.getvalue()

    # a coarse step violates the tolerance
    with pytest.raises(SystemExit) as excinfo:
        with ArgvSetter((files['exp'], '--inputs', files['exp_inputs'],
                         '--h', '0.5')) as out:
            bulk_ad_gradcheck.run()
    assert excinfo.value.code == 2
    assert 'Verdict: FAILED.' in out.stdout.getvalue()

    with pytest.raises(SystemExit) as excinfo:
        with ArgvSetter((files['vector'],)):
            bulk_ad_gradcheck.run()
    assert excinfo.value.code == 1


@pytest.mark.filterwarnings(warning_str['redraw'])
def test_selftest():
    """Test bulk_ad selftest."""
    check_usage(bulk_ad_selftest, force_help=True)
    with ArgvSetter(('--seeds', '2', '--first-seed', '4', '--size', '12',
                     '--inputs-per-program', '1')) as out:
        bulk_ad_selftest.run()
    assert out.stdout.getvalue().startswith('2 generated programs')
    assert 'Verdict: PASSED.' in out.stdout.getvalue()

    with pytest.raises(SystemExit) as excinfo:
        with ArgvSetter(('--seeds', '0')):
            bulk_ad_selftest.run()
    assert excinfo.value.code == 2
    with pytest.raises(SystemExit):
        with ArgvSetter(('stray',)):
            bulk_ad_selftest.run()


def test_run():
    """Test the command dispatcher."""
    assert 'compile-grad' in run.valid_commands
    assert 'gradcheck' in run.valid_commands
    with ArgvSetter(('--version',)) as out:
        run.main()
    assert out.stdout.getvalue().startswith('bulk-ad ')
    with pytest.raises(SystemExit) as excinfo:
        with ArgvSetter(()) as out:
            run.main()
    assert excinfo.value.code == 0
    assert '- selftest' in out.stdout.getvalue()
