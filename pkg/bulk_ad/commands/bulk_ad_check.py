"""Shape-check a program and print the type of its result.

example usage:  $ bulk_ad check prog.adl
"""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
import bulk_ad
from bulk_ad.syntax import print_type
from bulk_ad.utils import _load_program


def run():
    """Run the check command."""
    from mne.commands.utils import get_optparser

    parser = get_optparser(__file__, usage="usage: %prog FILE",
                           prog_prefix='bulk_ad',
                           version=bulk_ad.__version__)

    opt, args = parser.parse_args()

    if len(args) != 1:
        parser.print_help()
        parser.error('Give exactly one program file. Found: "{}".'
                     .format(args))

    program = _load_program(args[0])
    print(print_type(program.body.type))


if __name__ == '__main__':  # pragma: no cover
    run()
