"""Concrete rectangular arrays and the bulk operations on them.

All operations are total: out-of-range reads give zeros (or ``False``),
out-of-range scatter writes are dropped and integer division or modulo by
zero gives zero.
"""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
import numpy as np

from bulk_ad.config import (KINDS, NUMERIC_KINDS, DTYPES, ARITH_BINARY_OPS,
                            INT_BINARY_OPS, COMPARISON_OPS,
                            LOGICAL_BINARY_OPS, LOGICAL_UNARY_OPS,
                            ARITH_UNARY_OPS, REAL_UNARY_OPS, CONVERSION_OPS)


def _as_shape(shape):
    """Return ``shape`` as a tuple of non-negative ints."""
    shape = tuple(int(k) for k in shape)
    if any(k < 0 for k in shape):
        raise ValueError(f'Shape dimensions must be non-negative, got '
                         f'{list(shape)}')
    return shape


def _kind_of(data):
    """Infer the element kind of a numpy array."""
    if data.dtype == np.bool_:
        return 'bool'
    elif np.issubdtype(data.dtype, np.integer):
        return 'i64'
    return 'f64'


class ConcreteArray:
    """An immutable row-major array of a single element kind.

    Parameters
    ----------
    data : array-like
        The elements. Nested sequences give the shape.
    kind : str | None
        One of ``'f64'``, ``'i64'``, ``'bool'``. If None, it is inferred
        from ``data``.

    Attributes
    ----------
    data : ndarray
        The read-only, C-contiguous element buffer.
    kind : str
        The element kind.
    """

    __slots__ = ('data', 'kind')

    def __init__(self, data, kind=None):
        if isinstance(data, ConcreteArray):
            kind = data.kind if kind is None else kind
            data = data.data
        data = np.asarray(data)
        if kind is None:
            kind = _kind_of(data)
        if kind not in KINDS:
            raise ValueError(f'kind must be one of {KINDS}, got "{kind}"')
        data = np.array(data, dtype=DTYPES[kind], order='C', copy=True)
        data.setflags(write=False)
        object.__setattr__(self, 'data', data)
        object.__setattr__(self, 'kind', kind)

    def __setattr__(self, name, value):
        raise AttributeError('ConcreteArray is immutable')

    @classmethod
    def zeros(cls, shape, kind='f64'):
        """Make an array of zeros (or ``False``)."""
        return cls(np.zeros(_as_shape(shape), dtype=DTYPES[kind]), kind)

    @classmethod
    def full(cls, shape, value, kind='f64'):
        """Make an array filled with ``value``."""
        return cls(np.full(_as_shape(shape), value, dtype=DTYPES[kind]),
                   kind)

    @classmethod
    def scalar(cls, value, kind=None):
        """Make a rank-0 array."""
        if kind is None:
            kind = _kind_of(np.asarray(value))
        return cls(np.asarray(value, dtype=DTYPES[kind]), kind)

    @classmethod
    def from_flat(cls, kind, shape, flat):
        """Make an array from a flat row-major buffer."""
        shape = _as_shape(shape)
        flat = np.asarray(list(flat), dtype=DTYPES[kind])
        if flat.size != int(np.prod(shape, dtype=np.int64)):
            raise ValueError(f'Array of shape {list(shape)} needs '
                             f'{int(np.prod(shape))} elements, got '
                             f'{flat.size}')
        return cls(flat.reshape(shape), kind)

    @property
    def shape(self):
        """The shape as a tuple of ints."""
        return self.data.shape

    @property
    def rank(self):
        """Number of dimensions."""
        return self.data.ndim

    @property
    def size(self):
        """Number of elements."""
        return self.data.size

    def item(self):
        """Return the element of a rank-0 array as a Python scalar."""
        if self.rank != 0:
            raise ValueError(f'item() needs a rank-0 array, got shape '
                             f'{list(self.shape)}')
        return self.data.item()

    def flat(self):
        """Return the row-major elements as a list of Python scalars."""
        return self.data.ravel().tolist()

    def to_json(self):
        """Return the JSON mirror ``{"kind", "shape", "data"}``."""
        return dict(kind=self.kind, shape=list(self.shape),
                    data=self.flat())

    @classmethod
    def from_json(cls, obj):
        """Inverse of :meth:`to_json`."""
        return cls.from_flat(obj['kind'], obj['shape'], obj['data'])

    def __eq__(self, other):
        if not isinstance(other, ConcreteArray):
            return NotImplemented
        return (self.kind == other.kind and self.shape == other.shape and
                np.array_equal(self.data, other.data, equal_nan=True))

    def __hash__(self):
        return hash((self.kind, self.shape, self.data.tobytes()))

    def __repr__(self):
        return f'<ConcreteArray {self.kind} {list(self.shape)} {self.flat()}>'


class IndexFn:
    """An index function mapping ``n_in`` coordinates to ``n_out``.

    Parameters
    ----------
    n_in : int
        Number of coordinates the function takes.
    n_out : int
        Number of coordinates it returns.
    fn : callable
        Called with a tuple of ints, returns a sequence of ints.
    """

    __slots__ = ('n_in', 'n_out', 'fn')

    def __init__(self, n_in, n_out, fn):
        self.n_in = n_in
        self.n_out = n_out
        self.fn = fn

    def __call__(self, idx):
        out = tuple(int(i) for i in self.fn(tuple(idx)))
        if len(out) != self.n_out:
            raise RuntimeError(f'Index function returned {len(out)} '
                               f'coordinates, expected {self.n_out}')
        return out

    def __repr__(self):
        return f'<IndexFn {self.n_in} -> {self.n_out}>'


def _in_range(ix, shape):
    return all(0 <= i < k for i, k in zip(ix, shape))


def _check_numeric(a, what):
    if a.kind not in NUMERIC_KINDS:
        raise ValueError(f'{what} needs a numeric array, got kind '
                         f'"{a.kind}"')


def index(a, ix):
    """Read the subarray of ``a`` at the (possibly partial) index ``ix``.

    Out-of-range coordinates give an all-zero array of the residual shape.
    """
    ix = tuple(int(i) for i in ix)
    if len(ix) > a.rank:
        raise ValueError(f'Index of length {len(ix)} is too long for an '
                         f'array of rank {a.rank}')
    if not _in_range(ix, a.shape):
        return ConcreteArray.zeros(a.shape[len(ix):], a.kind)
    return ConcreteArray(a.data[ix], a.kind)


def gather(sh, a, f):
    """Build an array of shape ``sh`` by reading ``a`` through ``f``.

    ``out[js + rest] = a[f(js) + rest]`` where ``js`` ranges over the first
    ``f.n_in`` dimensions of ``sh``.
    """
    sh = _as_shape(sh)
    m1, m2 = f.n_in, f.n_out
    if m1 > len(sh) or m2 > a.rank or sh[m1:] != a.shape[m2:]:
        raise ValueError(f'gather of shape {list(sh)} with a {m1} -> {m2} '
                         f'index function does not fit an array of shape '
                         f'{list(a.shape)}')
    out = np.zeros(sh, dtype=DTYPES[a.kind])
    for js in np.ndindex(*sh[:m1]):
        src = f(js)
        if _in_range(src, a.shape):
            out[js] = a.data[src]
    return ConcreteArray(out, a.kind)


def scatter(sh, a, f):
    """Add every subarray of ``a`` into a zero array of shape ``sh``.

    The subarray at source position ``p`` (the first ``f.n_in`` dimensions)
    is added at ``f(p)``. Writes that land out of range are dropped.
    """
    _check_numeric(a, 'scatter')
    sh = _as_shape(sh)
    m1, m2 = f.n_in, f.n_out
    if m1 > a.rank or m2 > len(sh) or a.shape[m1:] != sh[m2:]:
        raise ValueError(f'scatter of shape {list(sh)} with a {m1} -> {m2} '
                         f'index function does not fit an array of shape '
                         f'{list(a.shape)}')
    out = np.zeros(sh, dtype=DTYPES[a.kind])
    with np.errstate(all='ignore'):
        for p in np.ndindex(*a.shape[:m1]):
            tgt = f(p)
            if _in_range(tgt, sh):
                out[tgt] = out[tgt] + a.data[p]
    return ConcreteArray(out, a.kind)


def sum_outer(a):
    """Sum over the outermost dimension in ascending index order."""
    _check_numeric(a, 'sum_outer')
    if a.rank < 1:
        raise ValueError('sum_outer needs an array of rank >= 1')
    acc = np.zeros(a.shape[1:], dtype=DTYPES[a.kind])
    with np.errstate(all='ignore'):
        for j in range(a.shape[0]):
            acc = acc + a.data[j]
    return ConcreteArray(acc, a.kind)


def replicate(k, a):
    """Stack ``k`` copies of ``a`` along a new outermost dimension."""
    k = int(k)
    if k < 0:
        raise ValueError(f'replicate count must be non-negative, got {k}')
    return ConcreteArray(np.broadcast_to(a.data, (k,) + a.shape), a.kind)


def check_permutation(perm, rank):
    """Raise if ``perm`` is not a permutation of ``0..m-1`` with m <= rank."""
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != list(range(len(perm))):
        raise ValueError(f'{list(perm)} is not a permutation of '
                         f'0..{len(perm) - 1}')
    if len(perm) > rank:
        raise ValueError(f'Permutation {list(perm)} is longer than the '
                         f'array rank {rank}')
    return perm


def inverse_permutation(perm):
    """Return ``q`` such that ``transpose(q, transpose(perm, a)) == a``."""
    inv = [0] * len(perm)
    for p, q in enumerate(perm):
        inv[q] = p
    return tuple(inv)


def transposed_shape(perm, shape):
    """Shape of ``transpose(perm, a)`` for ``a`` of shape ``shape``."""
    return tuple(shape[p] for p in perm) + tuple(shape[len(perm):])


def transpose(perm, a):
    """Permute the outermost ``len(perm)`` dimensions.

    Output axis ``p`` is input axis ``perm[p]``.
    """
    perm = check_permutation(perm, a.rank)
    axes = perm + tuple(range(len(perm), a.rank))
    return ConcreteArray(np.transpose(a.data, axes), a.kind)


def reshape(sh, a):
    """Reinterpret the row-major buffer of ``a`` with shape ``sh``."""
    sh = _as_shape(sh)
    if int(np.prod(sh, dtype=np.int64)) != a.size:
        raise ValueError(f'Cannot reshape an array of shape '
                         f'{list(a.shape)} to {list(sh)}')
    return ConcreteArray(a.data.reshape(sh), a.kind)


def from_subarrays(parts):
    """Stack equal-shaped arrays along a new outermost dimension."""
    parts = list(parts)
    if len(parts) == 0:
        raise ValueError('from_subarrays needs at least one array')
    first = parts[0]
    for part in parts[1:]:
        if part.shape != first.shape or part.kind != first.kind:
            raise ValueError('from_subarrays needs arrays of one shape and '
                             'kind')
    return ConcreteArray(np.stack([p.data for p in parts]), first.kind)


def one_hot(sh, ix, v):
    """Zeros of shape ``sh`` with ``v`` placed at index ``ix``."""
    sh = _as_shape(sh)
    ix = tuple(int(i) for i in ix)
    if len(ix) > len(sh) or v.shape != sh[len(ix):]:
        raise ValueError(f'one_hot of shape {list(sh)} at {list(ix)} needs '
                         f'a value of shape {list(sh[len(ix):])}, got '
                         f'{list(v.shape)}')
    out = np.zeros(sh, dtype=DTYPES[v.kind])
    if _in_range(ix, sh):
        out[ix] = v.data
    return ConcreteArray(out, v.kind)


def _int_div(x, y):
    safe = np.where(y == 0, 1, y)
    return np.where(y == 0, 0, np.floor_divide(x, safe))


def _int_mod(x, y):
    safe = np.where(y == 0, 1, y)
    return np.where(y == 0, 0, np.mod(x, safe))


_BINARY = {
    '+': np.add, '-': np.subtract, '*': np.multiply,
    'max': np.maximum, 'min': np.minimum,
    '<': np.less, '<=': np.less_equal, '>': np.greater,
    '>=': np.greater_equal, '==': np.equal, '!=': np.not_equal,
    'and': np.logical_and, 'or': np.logical_or,
}

_UNARY = {
    'neg': np.negative, 'abs': np.abs, 'sign': np.sign, 'exp': np.exp,
    'log': np.log, 'sin': np.sin, 'cos': np.cos, 'tanh': np.tanh,
    'sqrt': np.sqrt, 'not': np.logical_not,
}


def op_result_kind(op, kinds):
    """Return the result kind of ``op`` applied to arguments of ``kinds``.

    Raises
    ------
    ValueError
        If the op is unknown, has the wrong arity or does not accept the
        argument kinds.
    """
    kinds = tuple(kinds)
    if op in ARITH_BINARY_OPS + INT_BINARY_OPS + COMPARISON_OPS + \
            LOGICAL_BINARY_OPS:
        if len(kinds) != 2:
            raise ValueError(f'"{op}" takes 2 arguments, got {len(kinds)}')
        if kinds[0] != kinds[1]:
            raise ValueError(f'"{op}" needs arguments of one kind, got '
                             f'{kinds[0]} and {kinds[1]}')
        kind = kinds[0]
        if op in ARITH_BINARY_OPS:
            accepted, result = NUMERIC_KINDS, kind
        elif op in INT_BINARY_OPS:
            accepted, result = ('i64',), kind
        elif op in COMPARISON_OPS:
            accepted = NUMERIC_KINDS if op not in ('==', '!=') else KINDS
            result = 'bool'
        else:
            accepted, result = ('bool',), 'bool'
    elif op in LOGICAL_UNARY_OPS + ARITH_UNARY_OPS + REAL_UNARY_OPS + \
            tuple(CONVERSION_OPS):
        if len(kinds) != 1:
            raise ValueError(f'"{op}" takes 1 argument, got {len(kinds)}')
        kind = kinds[0]
        if op in LOGICAL_UNARY_OPS:
            accepted, result = ('bool',), 'bool'
        elif op in ARITH_UNARY_OPS:
            accepted, result = NUMERIC_KINDS, kind
        elif op in REAL_UNARY_OPS:
            accepted, result = ('f64',), 'f64'
        else:
            accepted, result = CONVERSION_OPS[op]
    else:
        raise ValueError(f'Unknown primitive operation "{op}"')
    if kind not in accepted:
        raise ValueError(f'"{op}" does not accept arguments of kind '
                         f'"{kind}"')
    return result


def map_op(op, args):
    """Apply the primitive ``op`` elementwise to equal-shaped arrays."""
    args = list(args)
    kind = op_result_kind(op, [a.kind for a in args])
    shapes = {a.shape for a in args}
    if len(shapes) != 1:
        raise ValueError(f'"{op}" needs arguments of one shape, got '
                         f'{[list(a.shape) for a in args]}')
    xs = [a.data for a in args]
    with np.errstate(all='ignore'):
        if op == 'div':
            if args[0].kind == 'i64':
                out = _int_div(*xs)
            else:
                out = np.true_divide(*xs)
        elif op == 'mod':
            out = _int_mod(*xs)
        elif op == 'toreal':
            out = xs[0].astype(np.float64)
        elif op == 'floor':
            out = np.floor(xs[0])
            out = np.where(np.isfinite(out), out, 0).astype(np.int64)
        elif op in _BINARY:
            out = _BINARY[op](*xs)
        else:
            out = _UNARY[op](*xs)
    return ConcreteArray(np.asarray(out).reshape(args[0].shape), kind)


def dot(a, b):
    """Sum of elementwise products of two equal-shaped real arrays."""
    return float(np.sum(a.data * b.data))
