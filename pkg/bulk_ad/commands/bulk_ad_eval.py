"""Evaluate a program and print its result as JSON.

example usage:  $ bulk_ad eval prog.adl --inputs values.json
"""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
import json

import bulk_ad
from bulk_ad.interp import eval_term
from bulk_ad.utils import _load_program, _load_inputs, _array_to_json


def _to_json(value):
    if isinstance(value, tuple):
        return [_to_json(v) for v in value]
    return _array_to_json(value)


def run():
    """Run the eval command."""
    from mne.commands.utils import get_optparser

    parser = get_optparser(__file__, usage="usage: %prog FILE --inputs IN",
                           prog_prefix='bulk_ad',
                           version=bulk_ad.__version__)

    parser.add_option('--inputs', dest='inputs',
                      help='JSON file mapping each parameter to its value.',
                      metavar='IN')

    opt, args = parser.parse_args()

    if len(args) != 1:
        parser.print_help()
        parser.error('Give exactly one program file. Found: "{}".'
                     .format(args))

    program = _load_program(args[0])
    if opt.inputs is None:
        if program.params:
            parser.error('The program has parameters; you need to specify '
                         'the --inputs parameter.')
        inputs = {}
    else:
        inputs = _load_inputs(opt.inputs, program)
    print(json.dumps(_to_json(eval_term(program.body, inputs))))


if __name__ == '__main__':  # pragma: no cover
    run()
