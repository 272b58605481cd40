"""Read and write the S-expression surface syntax of the core language.

A program file holds an optional header declaring the free variables,
followed by one expression::

    (params (a f64 [3]) (b f64 [3]))
    (sumouter (build1 3 (lam i (op * (index a [i]) (index b [i])))))
"""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
import re

from bulk_ad.config import KINDS
from bulk_ad.ir import (ArrayType, Program, Const, Var, Let, Cond, PrimOp,
                        Index, SumOuter, Gather, Scatter, Ravel, Replicate,
                        Transpose, Reshape, Build1, Share, Tuple, IxFn)
from bulk_ad.tensor import ConcreteArray


class ParseError(ValueError):
    """Syntax error, with the 1-based line and column where it occurred."""

    def __init__(self, msg, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            msg = f'line {line}, column {column}: {msg}'
        super().__init__(msg)


_TOKEN_RE = re.compile(r'''
    (?P<space>[\s,]+)
  | (?P<comment>;[^\n]*)
  | (?P<open>[(\[])
  | (?P<close>[)\]])
  | (?P<atom>[^\s,;()\[\]]+)
''', re.VERBOSE)

_INT_RE = re.compile(r'^[+-]?\d+$')
_FLOAT_RE = re.compile(r'^[+-]?(\d+\.\d*|\.\d+|\d+(\.\d*)?[eE][+-]?\d+|'
                       r'inf|nan)$')
_NAME_RE = re.compile(r'^[A-Za-z_][A-Za-z0-9_\']*$')

_KEYWORDS = ('let', 'cond', 'op', 'index', 'sumouter', 'gather', 'scatter',
             'ravel', 'replicate', 'tr', 'reshape', 'build1', 'array', 'var',
             'share', 'tuple', 'lam', 'params')


class _Atom:
    __slots__ = ('text', 'line', 'column')

    def __init__(self, text, line, column):
        self.text, self.line, self.column = text, line, column


class _List:
    __slots__ = ('bracket', 'items', 'line', 'column')

    def __init__(self, bracket, items, line, column):
        self.bracket, self.items = bracket, items
        self.line, self.column = line, column


def _fail(msg, node):
    raise ParseError(msg, node.line, node.column)


def _read_sexprs(text):
    """Split ``text`` into a list of S-expression trees."""
    pairs = {'(': ')', '[': ']'}
    stack = [_List(None, [], 1, 1)]
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        column = pos - line_start + 1
        if match is None:
            raise ParseError(f'Unexpected character {text[pos]!r}', line,
                             column)
        kind, value = match.lastgroup, match.group()
        if kind == 'open':
            stack.append(_List(value, [], line, column))
        elif kind == 'close':
            if len(stack) == 1 or pairs[stack[-1].bracket] != value:
                raise ParseError(f'Unbalanced {value!r}', line, column)
            node = stack.pop()
            stack[-1].items.append(node)
        elif kind == 'atom':
            stack[-1].items.append(_Atom(value, line, column))
        newlines = value.count('\n')
        if newlines:
            line += newlines
            line_start = pos + value.rindex('\n') + 1
        pos = match.end()
    if len(stack) > 1:
        raise ParseError(f'Unclosed {stack[-1].bracket!r}', stack[-1].line,
                         stack[-1].column)
    return stack[0].items


def _expect_list(node, bracket, what):
    if not isinstance(node, _List) or node.bracket != bracket:
        _fail(f'Expected {what}', node)
    return node.items


def _int(node, what='an integer'):
    if not isinstance(node, _Atom) or not _INT_RE.match(node.text):
        _fail(f'Expected {what}', node)
    return int(node.text)


def _name(node):
    if (not isinstance(node, _Atom) or not _NAME_RE.match(node.text) or
            node.text in _KEYWORDS):
        _fail('Expected a variable name', node)
    return node.text


def _ints(node, what):
    return tuple(_int(item, what) for item in _expect_list(node, '[', what))


def _scalar(text, kind, node):
    if kind == 'bool':
        if text not in ('true', 'false'):
            _fail(f'Expected true or false, got "{text}"', node)
        return text == 'true'
    elif kind == 'i64':
        if not _INT_RE.match(text):
            _fail(f'Expected an integer, got "{text}"', node)
        return int(text)
    if not (_INT_RE.match(text) or _FLOAT_RE.match(text)):
        _fail(f'Expected a number, got "{text}"', node)
    return float(text)


def _arity(items, n, node, form):
    if len(items) != n + 1:
        _fail(f'"{form}" takes {n} arguments, got {len(items) - 1}', node)


def _lam(node):
    items = _expect_list(node, '(', '(lam ...)')
    if not items or not isinstance(items[0], _Atom) or \
            items[0].text != 'lam' or len(items) != 3:
        _fail('Expected (lam PARAMS BODY)', node)
    return items[1], items[2]


def _convert(node):
    """Turn an S-expression tree into a Term."""
    if isinstance(node, _Atom):
        text = node.text
        if text in ('true', 'false'):
            return Const(ConcreteArray.scalar(text == 'true', 'bool'))
        elif _INT_RE.match(text):
            return Const(ConcreteArray.scalar(int(text), 'i64'))
        elif _FLOAT_RE.match(text):
            return Const(ConcreteArray.scalar(float(text), 'f64'))
        return Var(_name(node))
    items = _expect_list(node, '(', 'an expression')
    if not items or not isinstance(items[0], _Atom):
        _fail('Expected a form name', node)
    form = items[0].text
    if form == 'var':
        _arity(items, 1, node, form)
        return Var(_name(items[1]))
    elif form == 'array':
        _arity(items, 3, node, form)
        kind = items[1].text if isinstance(items[1], _Atom) else None
        if kind not in KINDS:
            _fail(f'Expected an element kind {KINDS}', items[1])
        shape = _ints(items[2], 'a shape')
        data = _expect_list(items[3], '[', 'a data list')
        values = []
        for item in data:
            if not isinstance(item, _Atom):
                _fail('Expected a number', item)
            values.append(_scalar(item.text, kind, item))
        try:
            return Const(ConcreteArray.from_flat(kind, shape, values))
        except ValueError as err:
            _fail(str(err), node)
    elif form == 'let':
        _arity(items, 2, node, form)
        binding = _expect_list(items[1], '(', '(NAME EXPR)')
        if len(binding) != 2:
            _fail('Expected (NAME EXPR)', items[1])
        return Let(_name(binding[0]), _convert(binding[1]),
                   _convert(items[2]))
    elif form == 'cond':
        _arity(items, 3, node, form)
        return Cond(*(_convert(item) for item in items[1:]))
    elif form == 'op':
        if len(items) < 3 or not isinstance(items[1], _Atom):
            _fail('Expected (op NAME ARG ...)', node)
        return PrimOp(items[1].text, tuple(_convert(a) for a in items[2:]))
    elif form == 'index':
        _arity(items, 2, node, form)
        ix = _expect_list(items[2], '[', 'an index list')
        return Index(_convert(items[1]), tuple(_convert(c) for c in ix))
    elif form == 'sumouter':
        _arity(items, 1, node, form)
        return SumOuter(_convert(items[1]))
    elif form in ('gather', 'scatter'):
        _arity(items, 3, node, form)
        shape = _ints(items[1], 'a shape')
        params, body = _lam(items[3])
        params = tuple(_name(p) for p in
                       _expect_list(params, '[', 'a parameter list'))
        body = tuple(_convert(c) for c in
                     _expect_list(body, '[', 'an index list'))
        cls = Gather if form == 'gather' else Scatter
        return cls(shape, _convert(items[2]), IxFn(params, body))
    elif form == 'ravel':
        if len(items) < 2:
            _fail('ravel needs at least one element', node)
        return Ravel(tuple(_convert(p) for p in items[1:]))
    elif form == 'replicate':
        _arity(items, 2, node, form)
        return Replicate(_int(items[1]), _convert(items[2]))
    elif form == 'tr':
        _arity(items, 2, node, form)
        return Transpose(_ints(items[1], 'a permutation'),
                         _convert(items[2]))
    elif form == 'reshape':
        _arity(items, 2, node, form)
        return Reshape(_ints(items[1], 'a shape'), _convert(items[2]))
    elif form == 'build1':
        _arity(items, 2, node, form)
        param, body = _lam(items[2])
        return Build1(_int(items[1]), _name(param), _convert(body))
    elif form == 'share':
        _arity(items, 2, node, form)
        return Share(_int(items[1], 'a share id'), _convert(items[2]))
    elif form == 'tuple':
        return Tuple(tuple(_convert(item) for item in items[1:]))
    _fail(f'Unknown form "{form}"', items[0])


def _convert_type(node):
    items = _expect_list(node, '(', '(NAME KIND [SHAPE])')
    if len(items) != 3:
        _fail('Expected (NAME KIND [SHAPE])', node)
    kind = items[1].text if isinstance(items[1], _Atom) else None
    if kind not in KINDS:
        _fail(f'Expected an element kind {KINDS}', items[1])
    return _name(items[0]), ArrayType(_ints(items[2], 'a shape'), kind)


def parse_term(text):
    """Parse a single expression.

    Parameters
    ----------
    text : str
        The source text.

    Returns
    -------
    t : Term
        The unchecked term.
    """
    trees = _read_sexprs(text)
    if len(trees) != 1:
        raise ParseError(f'Expected one expression, found {len(trees)}')
    return _convert(trees[0])


def parse_program(text):
    """Parse a program: an optional ``(params ...)`` header and a body."""
    trees = _read_sexprs(text)
    params = []
    if trees and isinstance(trees[0], _List) and trees[0].items and \
            isinstance(trees[0].items[0], _Atom) and \
            trees[0].items[0].text == 'params':
        header = trees.pop(0)
        for item in header.items[1:]:
            params.append(_convert_type(item))
        names = [name for name, _ in params]
        if len(set(names)) != len(names):
            _fail('Duplicate parameter name', header)
    if len(trees) != 1:
        raise ParseError(f'Expected one expression after the header, found '
                         f'{len(trees)}')
    return Program(tuple(params), _convert(trees[0]))


def read_program(fname):
    """Read a UTF-8 program file."""
    with open(fname, 'r', encoding='utf-8') as fid:
        return parse_program(fid.read())


# ---------------------------------------------------------------------------
# Printing

def _format_scalar(value, kind):
    if kind == 'bool':
        return 'true' if value else 'false'
    elif kind == 'i64':
        return str(int(value))
    return repr(float(value))


def format_array(a):
    """Format an array as ``(array KIND [SHAPE] [DATA])``."""
    shape = ','.join(str(k) for k in a.shape)
    data = ','.join(_format_scalar(x, a.kind) for x in a.flat())
    return f'(array {a.kind} [{shape}] [{data}])'


def _ints_text(values):
    return '[' + ','.join(str(v) for v in values) + ']'


def print_term(t, pretty=False, indent=0):
    """Print ``t`` in canonical surface syntax.

    Parameters
    ----------
    t : Term
        The term to print.
    pretty : bool
        If True, put each let binding and tuple item on its own line.
    indent : int
        Current indentation, used when ``pretty``.

    Returns
    -------
    text : str
        The printed term.
    """
    def p(s):
        return print_term(s)

    if pretty and isinstance(t, Let):
        pad = ' ' * (indent + 2)
        return (f'(let ({t.name} {p(t.bound)})\n{pad}'
                f'{print_term(t.body, True, indent + 2)})')
    if pretty and isinstance(t, Tuple):
        pad = ' ' * (indent + 2)
        items = ''.join(f'\n{pad}{print_term(i, True, indent + 2)}'
                        for i in t.items)
        return f'(tuple{items})'

    if isinstance(t, Const):
        return format_array(t.value)
    elif isinstance(t, Var):
        return f'(var {t.name})'
    elif isinstance(t, Let):
        return f'(let ({t.name} {p(t.bound)}) {p(t.body)})'
    elif isinstance(t, Cond):
        return f'(cond {p(t.scrutinee)} {p(t.then)} {p(t.orelse)})'
    elif isinstance(t, PrimOp):
        return f'(op {t.op} ' + ' '.join(p(a) for a in t.args) + ')'
    elif isinstance(t, Index):
        ix = ' '.join(p(c) for c in t.ix)
        return f'(index {p(t.array)} [{ix}])'
    elif isinstance(t, SumOuter):
        return f'(sumouter {p(t.array)})'
    elif isinstance(t, (Gather, Scatter)):
        form = 'gather' if isinstance(t, Gather) else 'scatter'
        params = ' '.join(t.fn.params)
        body = ' '.join(p(c) for c in t.fn.body)
        return (f'({form} {_ints_text(t.shape)} {p(t.array)} '
                f'(lam [{params}] [{body}]))')
    elif isinstance(t, Ravel):
        return '(ravel ' + ' '.join(p(s) for s in t.parts) + ')'
    elif isinstance(t, Replicate):
        return f'(replicate {t.count} {p(t.array)})'
    elif isinstance(t, Transpose):
        return f'(tr {_ints_text(t.perm)} {p(t.array)})'
    elif isinstance(t, Reshape):
        return f'(reshape {_ints_text(t.shape)} {p(t.array)})'
    elif isinstance(t, Build1):
        return f'(build1 {t.count} (lam {t.var} {p(t.body)}))'
    elif isinstance(t, Share):
        return f'(share {t.id} {p(t.body)})'
    elif isinstance(t, Tuple):
        return '(tuple ' + ' '.join(p(i) for i in t.items) + ')'
    raise TypeError(f'Not a term: {t!r}')


def print_type(typ):
    """Print an :class:`ArrayType` (or a tuple of them)."""
    if isinstance(typ, tuple):
        return '(' + ', '.join(print_type(t) for t in typ) + ')'
    return f'Array {_ints_text(typ.shape)} {typ.kind}'


def print_program(program, pretty=True):
    """Print a :class:`Program` with its ``(params ...)`` header."""
    decls = ' '.join(f'({name} {typ.kind} {_ints_text(typ.shape)})'
                     for name, typ in program.params)
    return f'(params {decls})\n{print_term(program.body, pretty)}\n'
