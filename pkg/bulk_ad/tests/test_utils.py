"""Testing utilities for bulk-ad."""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
import json

import pytest

from bulk_ad.ir import ArrayType
from bulk_ad.syntax import parse_program
from bulk_ad.tensor import ConcreteArray
from bulk_ad.utils import (_array_from_json, _array_to_json, _read_inputs,
                           _arrays_to_json, _write_text, _relative_error,
                           _load_program, _load_inputs)

PROGRAM = '(params (a f64 [2]) (k i64 []))\n(op * (index a [k]) 2.0)'


def test_array_json():
    """Test reading and writing arrays as JSON values."""
    vec = ArrayType((2,), 'f64')
    assert _array_from_json([1, 2], vec) == ConcreteArray([1., 2.])
    assert _array_from_json(3, ArrayType((), 'i64')) == \
        ConcreteArray.scalar(3)
    mirror = dict(kind='bool', shape=[2], data=[True, False])
    assert _array_from_json(mirror) == ConcreteArray([True, False])
    with pytest.raises(ValueError, match='should be a f64 array of shape'):
        _array_from_json([1., 2., 3.], vec, 'a')
    with pytest.raises(ValueError, match='Cannot read "a"'):
        _array_from_json(['x', 'y'], vec, 'a')

    assert _array_to_json(ConcreteArray([1.5, 2.])) == [1.5, 2.]
    assert _array_to_json(ConcreteArray.scalar(4)) == \
        dict(kind='i64', shape=[], data=[4])
    assert _arrays_to_json({'a': ConcreteArray.scalar(1.)}) == {'a': 1.}


def test_read_inputs(tmp_path):
    """Test reading parameter values from a file."""
    program = parse_program(PROGRAM)
    fname = tmp_path / 'inputs.json'
    fname.write_text(json.dumps({'a': [1., 2.], 'k': 1}))
    inputs = _read_inputs(fname, program)
    assert inputs['a'] == ConcreteArray([1., 2.])
    assert inputs['k'] == ConcreteArray.scalar(1)

    fname.write_text(json.dumps({'a': [1., 2.], 'k': 1, 'z': 0}))
    with pytest.raises(ValueError, match='unknown parameters'):
        _read_inputs(fname, program)
    fname.write_text(json.dumps({'a': [1., 2.]}))
    with pytest.raises(ValueError, match='no value for parameters'):
        _read_inputs(fname, program)
    fname.write_text('[1, 2]')
    with pytest.raises(ValueError, match='JSON object'):
        _read_inputs(fname, program)


def test_write_text(tmp_path):
    """Test writing text files."""
    fname = tmp_path / 'grad.adl'
    _write_text(fname, 'x')
    assert fname.read_text() == 'x\n'
    with pytest.raises(FileExistsError, match='already exists'):
        _write_text(fname, 'y')
    _write_text(fname, 'y\n', overwrite=True)
    assert fname.read_text() == 'y\n'


def test_relative_error():
    """Test relative errors with a floor on the denominator."""
    assert _relative_error([1.1], [1.], 1e-8) == pytest.approx(.1)
    assert _relative_error([1e-9], [0.], 1e-8) == pytest.approx(.1)
    assert _relative_error([], [], 1e-8) == 0.


def test_load_errors(tmp_path, capsys):
    """Test that unreadable files exit with status 1."""
    fname = tmp_path / 'bad.adl'
    fname.write_text('(op + 1 2')
    with pytest.raises(SystemExit) as excinfo:
        _load_program(fname)
    assert excinfo.value.code == 1
    assert 'ParseError' in capsys.readouterr().err

    fname.write_text('(params (a f64 [2]))\n(op + a 1.0)')
    with pytest.raises(SystemExit) as excinfo:
        _load_program(fname)
    assert excinfo.value.code == 1
    assert 'ShapeMismatchError' in capsys.readouterr().err

    with pytest.raises(SystemExit) as excinfo:
        _load_program(tmp_path / 'missing.adl')
    assert 'Cannot read' in capsys.readouterr().err

    program = parse_program(PROGRAM)
    fname = tmp_path / 'inputs.json'
    fname.write_text('{"a": [1.0]}')
    with pytest.raises(SystemExit) as excinfo:
        _load_inputs(fname, program)
    assert excinfo.value.code == 1

    fname = tmp_path / 'latin1.adl'
    fname.write_bytes(b'(params (a f64 [2]))\n(op neg a) ; \xe9t\xe9\n')
    with pytest.raises(SystemExit) as excinfo:
        _load_program(fname)
    assert excinfo.value.code == 1
    assert 'not UTF-8 text' in capsys.readouterr().err
