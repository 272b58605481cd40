"""Compute the gradient of a scalar program at given inputs.

Prints a JSON object mapping each real parameter to its gradient.

example usage:  $ bulk_ad grad dot.adl --inputs dot.json --ctg 1
"""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
import json

import bulk_ad
from bulk_ad.config import EXIT_CHECK_ERROR
from bulk_ad.dual import NonScalarOutputError
from bulk_ad.reverse import grad_concrete
from bulk_ad.utils import (_load_program, _load_inputs, _arrays_to_json,
                           _exit)


def run():
    """Run the grad command."""
    from mne.commands.utils import get_optparser

    parser = get_optparser(__file__,
                           usage="usage: %prog FILE --inputs IN [--ctg C]",
                           prog_prefix='bulk_ad',
                           version=bulk_ad.__version__)

    parser.add_option('--inputs', dest='inputs',
                      help='JSON file mapping each parameter to its value.',
                      metavar='IN')
    parser.add_option('--ctg', dest='ctg', type='float', default=1.,
                      help='Cotangent of the result (default 1).',
                      metavar='C')
    parser.add_option('--simplify', dest='simplify', action='store_true',
                      help='Simplify while vectorizing.')
    parser.add_option('-v', '--verbose', dest="verbose",
                      help='set logging level to verbose', action="store_true")

    opt, args = parser.parse_args()

    if len(args) != 1:
        parser.print_help()
        parser.error('Give exactly one program file. Found: "{}".'
                     .format(args))
    if opt.inputs is None:
        parser.print_help()
        parser.error('Arguments missing. You need to specify the '
                     '--inputs parameter.')

    program = _load_program(args[0])
    inputs = _load_inputs(opt.inputs, program)
    try:
        grads = grad_concrete(program, inputs, ctg=opt.ctg,
                              simplify=opt.simplify, verbose=opt.verbose)
    except NonScalarOutputError as err:
        _exit(f'{args[0]}: {err}', EXIT_CHECK_ERROR)
    print(json.dumps(_arrays_to_json(grads)))


if __name__ == '__main__':  # pragma: no cover
    run()
