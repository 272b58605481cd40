"""Testing the check reports."""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
from collections import Counter

import pytest

from bulk_ad.oracle import GradCheckResult, SelfTestResult
from bulk_ad.report import make_report, _pretty_str


def _flat(text):
    return ' '.join(text.split())


def test_pretty_str():
    """Test listing items in a sentence."""
    assert _pretty_str([]) == ''
    assert _pretty_str(['a']) == 'a'
    assert _pretty_str(['a', 'b', 'c']) == 'a, b, and c'


def test_gradcheck_report():
    """Test the report of a gradient check."""
    result = GradCheckResult({'a': 1.5e-6, 'b': 2e-7}, 0., 1e-4, 'dot')
    report = make_report(result)
    assert all(len(line) <= 80 for line in report.splitlines())
    flat = _flat(report)
    assert flat.startswith('Program "dot" was differentiated')
    assert 'a 1.5e-06, and b 2e-07' in flat
    assert '(tolerance 0.0001)' in flat
    assert 'differed from the concrete gradient by at most 0.' in flat
    assert flat.endswith('Verdict: PASSED.')

    report = make_report(GradCheckResult({'a': .5}, None, 1e-4))
    assert _flat(report).startswith('The program was differentiated')
    assert 'compiled' not in report
    assert report.endswith('Verdict: FAILED.')

    report = make_report(GradCheckResult({}))
    assert 'no real parameters' in _flat(report)


def test_selftest_report():
    """Test the report of a self test."""
    result = SelfTestResult(n_programs=3, n_inputs=9, max_error=2e-7,
                            coverage=Counter(PrimOp=4, Var=2))
    report = make_report(result)
    assert 'node classes PrimOp, and Var' in _flat(report)
    assert 'No check failed.' in _flat(report)
    assert report.splitlines()[-1] == 'Verdict: PASSED.'

    result.gradient_failures.append('seed 3, input 0: error 0.2')
    result.semantic_mismatches.append('seed 1, input 2: 1.0 != 2.0')
    report = make_report(result)
    lines = report.splitlines()
    assert lines[-1] == 'Verdict: FAILED.'
    assert '  gradient failures: seed 3, input 0: error 0.2' in lines
    assert '  semantic mismatches: seed 1, input 2: 1.0 != 2.0' in lines
    assert ('There were 1 semantic mismatches, and 1 gradient failures.'
            in _flat(report))

    with pytest.raises(TypeError, match='result must be'):
        make_report({'errors': {}})
