"""Emit a gradient program: the primal and all gradients as one term.

The output has the parameters of the input program plus the cotangent
``c``, and re-parses with the other commands.

example usage:  $ bulk_ad compile-grad prog.adl -o prog_grad.adl
"""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
import bulk_ad
from bulk_ad.config import EXIT_CHECK_ERROR
from bulk_ad.dual import NonScalarOutputError
from bulk_ad.symbolic import build_gradient_program
from bulk_ad.syntax import print_program
from bulk_ad.utils import _load_program, _write_text, _exit


def run():
    """Run the compile-grad command."""
    from mne.commands.utils import get_optparser

    parser = get_optparser(__file__, usage="usage: %prog FILE [-o OUTPUT]",
                           prog_prefix='bulk_ad',
                           version=bulk_ad.__version__)

    parser.add_option('-o', '--output', dest='output',
                      help='Write the gradient program to OUTPUT instead '
                      'of printing it.', metavar='OUTPUT')
    parser.add_option('--overwrite', dest='overwrite', action='store_true',
                      help='Overwrite OUTPUT if it exists.')
    parser.add_option('--simplify', dest='simplify', action='store_true',
                      help='Simplify while vectorizing.')
    parser.add_option('-v', '--verbose', dest="verbose",
                      help='set logging level to verbose', action="store_true")

    opt, args = parser.parse_args()

    if len(args) != 1:
        parser.print_help()
        parser.error('Give exactly one program file. Found: "{}".'
                     .format(args))

    program = _load_program(args[0])
    try:
        grad_program = build_gradient_program(program, simplify=opt.simplify,
                                              verbose=opt.verbose)
    except NonScalarOutputError as err:
        _exit(f'{args[0]}: {err}', EXIT_CHECK_ERROR)
    text = print_program(grad_program)
    if opt.output is None:
        print(text, end='')
    else:
        _write_text(opt.output, text, overwrite=opt.overwrite,
                    verbose=opt.verbose)


if __name__ == '__main__':  # pragma: no cover
    run()
