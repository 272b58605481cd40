"""Utility and helper functions for bulk-ad."""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
import json
import os
import sys
from os import path as op

import numpy as np
from mne.utils import logger

from bulk_ad.config import DTYPES, EXIT_CHECK_ERROR
from bulk_ad.ir import CheckError, check_program
from bulk_ad.syntax import ParseError, read_program
from bulk_ad.tensor import ConcreteArray


def _array_from_json(obj, typ=None, name='value'):
    """Read an array from a nested list or a ``{kind, shape, data}`` dict.

    With a declared type ``typ``, the kind of a nested list is taken from
    it and the shape is checked against it.
    """
    if isinstance(obj, dict):
        arr = ConcreteArray.from_json(obj)
    else:
        kind = 'f64' if typ is None else typ.kind
        try:
            arr = ConcreteArray(np.asarray(obj, dtype=DTYPES[kind]), kind)
        except (TypeError, ValueError) as err:
            raise ValueError(f'Cannot read "{name}" as a {kind} array: '
                             f'{err}')
    if typ is not None and (arr.shape != tuple(typ.shape) or
                            arr.kind != typ.kind):
        raise ValueError(f'"{name}" should be a {typ.kind} array of shape '
                         f'{list(typ.shape)}, got {arr.kind} '
                         f'{list(arr.shape)}')
    return arr


def _array_to_json(arr):
    """Nested lists for real arrays, the full mirror for other kinds."""
    if arr.kind == 'f64':
        return arr.data.tolist()
    return arr.to_json()


def _read_inputs(fname, program):
    """Read the values of a program's parameters from a JSON file."""
    with open(fname, 'r', encoding='utf-8') as fid:
        values = json.load(fid)
    if not isinstance(values, dict):
        raise ValueError(f'"{fname}" must hold a JSON object mapping '
                         f'parameter names to arrays')
    env = program.env
    unknown = sorted(set(values) - set(env))
    if unknown:
        raise ValueError(f'"{fname}" has values for unknown parameters '
                         f'{unknown}')
    missing = [name for name in env if name not in values]
    if missing:
        raise ValueError(f'"{fname}" has no value for parameters {missing}')
    return {name: _array_from_json(values[name], env[name], name)
            for name in env}


def _arrays_to_json(arrays):
    """Map each name to the JSON form of its array."""
    return {name: _array_to_json(arr) for name, arr in arrays.items()}


def _write_text(fname, text, overwrite=False, verbose=False):
    """Write text to a file."""
    if op.exists(fname) and not overwrite:
        raise FileExistsError(f'"{fname}" already exists. '
                              'Please set overwrite to True.')
    with open(fname, 'w') as fid:
        fid.write(text)
        if not text.endswith('\n'):
            fid.write('\n')

    if verbose:
        logger.info(os.linesep + f"Writing '{fname}'..." + os.linesep)
        logger.info(text)


def _relative_error(value, reference, floor):
    """Largest ``|value - reference| / max(|reference|, floor)``."""
    value = np.asarray(value, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if value.size == 0:
        return 0.
    scale = np.maximum(np.abs(reference), floor)
    return float(np.max(np.abs(value - reference) / scale))


def _exit(msg, code):
    """Print ``msg`` to stderr and exit with status ``code``."""
    print(msg, file=sys.stderr)
    sys.exit(code)


def _load_program(fname):
    """Read and check a program file, exiting on parse or check errors."""
    try:
        return check_program(read_program(fname))
    except UnicodeDecodeError as err:
        _exit(f'Cannot read "{fname}": not UTF-8 text ({err.reason})',
              EXIT_CHECK_ERROR)
    except (ParseError, CheckError) as err:
        _exit(f'{fname}: {type(err).__name__}: {err}', EXIT_CHECK_ERROR)
    except OSError as err:
        _exit(f'Cannot read "{fname}": {err}', EXIT_CHECK_ERROR)


def _load_inputs(fname, program):
    """Read parameter values, exiting if they do not fit the program."""
    try:
        return _read_inputs(fname, program)
    except (OSError, ValueError, KeyError) as err:
        _exit(f'{fname}: {err}', EXIT_CHECK_ERROR)
