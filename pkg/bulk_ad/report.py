"""Make readable reports from gradient checks and self tests."""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
import textwrap

from mne.utils import _validate_type

from bulk_ad.oracle import GradCheckResult, SelfTestResult


def _pretty_str(listed):
    # make strings a sequence of ',' and 'and'
    listed = list(listed)
    if len(listed) <= 1:
        return ','.join(listed)
    return '{}, and {}'.format(', '.join(listed[:-1]), listed[-1])


def _verdict(passed):
    return 'PASSED' if passed else 'FAILED'


def _gradcheck_paragraph(result):
    label = f'Program "{result.name}"' if result.name else 'The program'
    if not result.errors:
        paragraph = (f'{label} has no real parameters, so there is no '
                     f'gradient to check.')
    else:
        errors = _pretty_str(f'{name} {err:.3g}'
                             for name, err in result.errors.items())
        paragraph = (f'{label} was differentiated at the given inputs. '
                     f'The largest relative error of the concrete gradient '
                     f'against central finite differences was '
                     f'{result.max_error:.3g} (tolerance {result.tol:g}), '
                     f'per parameter: {errors}.')
    if result.symbolic_error is not None:
        paragraph += (f' The compiled gradient program differed from the '
                      f'concrete gradient by at most '
                      f'{result.symbolic_error:.3g}.')
    return f'{paragraph} Verdict: {_verdict(result.passed)}.'


def _selftest_paragraph(result):
    covered = _pretty_str(sorted(result.coverage))
    paragraph = (f'{result.n_programs} generated programs were checked at '
                 f'{result.n_inputs} inputs in total. They used the node '
                 f'classes {covered}. The largest gradient error was '
                 f'{result.max_error:.3g}.')
    failures = [('normal form violations', result.normal_form_violations),
                ('semantic mismatches', result.semantic_mismatches),
                ('gradient failures', result.gradient_failures),
                ('share violations', result.share_violations)]
    found = [f'{len(items)} {what}' for what, items in failures if items]
    if found:
        paragraph += f' There were {_pretty_str(found)}.'
    else:
        paragraph += ' No check failed.'
    paragraph = '\n'.join(textwrap.wrap(paragraph, width=80))
    details = [f'  {what}: {item}' for what, items in failures
               for item in items]
    return '\n'.join([paragraph] + details +
                     [f'Verdict: {_verdict(result.passed)}.'])


def make_report(result):
    """Describe a gradient check or a self test in a few sentences.

    Parameters
    ----------
    result : GradCheckResult | SelfTestResult
        The outcome to describe.

    Returns
    -------
    paragraph : str
        The report, wrapped at 80 characters per line. Self-test failures
        are listed one per line below the summary.
    """
    _validate_type(result, (GradCheckResult, SelfTestResult), 'result')
    if isinstance(result, SelfTestResult):
        return _selftest_paragraph(result)
    return '\n'.join(textwrap.wrap(_gradcheck_paragraph(result), width=80))
