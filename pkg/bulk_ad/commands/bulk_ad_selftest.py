"""Run the differentiation pipeline over randomly generated programs.

Checks that vectorizing keeps values and reaches normal form, and that
gradients agree with finite differences. The exit status is 2 on failure.

example usage:  $ bulk_ad selftest --seeds 50
"""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
import sys

import bulk_ad
from bulk_ad.config import (DEFAULT_SIZE_BUDGET, EXIT_TOLERANCE,
                            GRADCHECK_TOL)
from bulk_ad.oracle import selftest
from bulk_ad.report import make_report


def run():
    """Run the selftest command."""
    from mne.commands.utils import get_optparser

    parser = get_optparser(__file__, usage="usage: %prog [--seeds N]",
                           prog_prefix='bulk_ad',
                           version=bulk_ad.__version__)

    parser.add_option('--seeds', dest='seeds', type='int', default=10,
                      help='Number of programs, seeded 0..N-1 (default 10).')
    parser.add_option('--first-seed', dest='first_seed', type='int',
                      default=0, help='Seed of the first program.')
    parser.add_option('--size', dest='size', type='int',
                      default=DEFAULT_SIZE_BUDGET,
                      help=f'Size budget of each program '
                      f'(default {DEFAULT_SIZE_BUDGET}).')
    parser.add_option('--inputs-per-program', dest='n_inputs', type='int',
                      default=3, help='Random inputs per program.')
    parser.add_option('--tol', dest='tol', type='float',
                      default=GRADCHECK_TOL,
                      help='Tolerance on gradient errors.')
    parser.add_option('-v', '--verbose', dest="verbose",
                      help='set logging level to verbose', action="store_true")

    opt, args = parser.parse_args()

    if len(args) > 0:
        parser.print_help()
        parser.error('Do not specify arguments without flags. Found: "{}".\n'
                     .format(args))
    if opt.seeds < 1:
        parser.error(f'--seeds must be positive, got {opt.seeds}')

    seeds = range(opt.first_seed, opt.first_seed + opt.seeds)
    result = selftest(seeds, size_budget=opt.size, n_inputs=opt.n_inputs,
                      tol=opt.tol, verbose=opt.verbose)
    print(make_report(result))
    if not result.passed:
        sys.exit(EXIT_TOLERANCE)


if __name__ == '__main__':  # pragma: no cover
    run()
