"""Check the gradients of a program against finite differences.

Both the concrete gradient and the compiled gradient program are compared.
The exit status is 2 if a tolerance is violated.

example usage:  $ bulk_ad gradcheck prog.adl --seed 7
"""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
import sys

import bulk_ad
from bulk_ad.config import (EXIT_CHECK_ERROR, EXIT_TOLERANCE, FD_STEP,
                            GRADCHECK_TOL)
from bulk_ad.dual import NonScalarOutputError
from bulk_ad.oracle import gen_input, gradcheck
from bulk_ad.report import make_report
from bulk_ad.utils import _load_program, _load_inputs, _exit


def run():
    """Run the gradcheck command."""
    from mne.commands.utils import get_optparser

    parser = get_optparser(__file__,
                           usage="usage: %prog FILE [--seed S] [--inputs IN]",
                           prog_prefix='bulk_ad',
                           version=bulk_ad.__version__)

    parser.add_option('--seed', dest='seed', type='int', default=0,
                      help='Seed of the random inputs (default 0).')
    parser.add_option('--inputs', dest='inputs',
                      help='JSON file with the inputs, instead of random '
                      'ones.', metavar='IN')
    parser.add_option('--h', dest='h', type='float', default=FD_STEP,
                      help=f'Relative finite-difference step '
                      f'(default {FD_STEP:g}).')
    parser.add_option('--tol', dest='tol', type='float',
                      default=GRADCHECK_TOL,
                      help=f'Tolerance on the relative error '
                      f'(default {GRADCHECK_TOL:g}).')
    parser.add_option('-v', '--verbose', dest="verbose",
                      help='set logging level to verbose', action="store_true")

    opt, args = parser.parse_args()

    if len(args) != 1:
        parser.print_help()
        parser.error('Give exactly one program file. Found: "{}".'
                     .format(args))

    program = _load_program(args[0])
    if opt.inputs is None:
        inputs = gen_input(opt.seed, program.params)
    else:
        inputs = _load_inputs(opt.inputs, program)
    try:
        result = gradcheck(program, inputs, h=opt.h, tol=opt.tol,
                           name=args[0], verbose=opt.verbose)
    except NonScalarOutputError as err:
        _exit(f'{args[0]}: {err}', EXIT_CHECK_ERROR)
    print(make_report(result))
    if not result.passed:
        sys.exit(EXIT_TOLERANCE)


if __name__ == '__main__':  # pragma: no cover
    run()
