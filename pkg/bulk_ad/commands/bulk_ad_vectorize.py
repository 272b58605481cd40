"""Rewrite a program into bulk-operation normal form and print it.

example usage:  $ bulk_ad vectorize prog.adl --simplify
"""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
from dataclasses import replace

import bulk_ad
from bulk_ad.bot import normalize
from bulk_ad.syntax import print_program
from bulk_ad.utils import _load_program


def run():
    """Run the vectorize command."""
    from mne.commands.utils import get_optparser

    parser = get_optparser(__file__, usage="usage: %prog FILE [--simplify]",
                           prog_prefix='bulk_ad',
                           version=bulk_ad.__version__)

    parser.add_option('--simplify', dest='simplify', action='store_true',
                      help='Also drop identity gathers, transposes and '
                      'reshapes.')
    parser.add_option('--innermost', dest='innermost', action='store_true',
                      help='Rewrite innermost redexes first.')
    parser.add_option('-v', '--verbose', dest="verbose",
                      help='set logging level to verbose', action="store_true")

    opt, args = parser.parse_args()

    if len(args) != 1:
        parser.print_help()
        parser.error('Give exactly one program file. Found: "{}".'
                     .format(args))

    program = _load_program(args[0])
    strategy = 'innermost' if opt.innermost else 'outermost'
    body = normalize(program.body, program.env, simplify=opt.simplify,
                     strategy=strategy, verbose=opt.verbose)
    print(print_program(replace(program, body=body)), end='')


if __name__ == '__main__':  # pragma: no cover
    run()
