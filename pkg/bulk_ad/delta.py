"""Delta terms: the linear traces recorded while differentiating.

A Delta describes the derivative of one array-valued intermediate result
with respect to the program inputs. Nodes are immutable, cache their shape,
and are generic over the carrier holding scale factors and index payloads:
concrete arrays and index functions, or terms of the core language.
"""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
from dataclasses import dataclass

import numpy as np

from bulk_ad.tensor import (ConcreteArray, transposed_shape, map_op, index,
                            gather, scatter, sum_outer, replicate, transpose,
                            reshape, from_subarrays)


@dataclass(frozen=True, order=True)
class DVarName:
    """The input variable number ``id`` (1-based), of shape ``shape``."""

    id: int
    shape: tuple = ()

    def __str__(self):
        return f'x{self.id}'


@dataclass(frozen=True, order=True)
class DeltaId:
    """Identity of a shared Delta fragment; ordered by ``id``."""

    id: int
    shape: tuple = ()

    def __str__(self):
        return str(self.id)


class IdGen:
    """Monotone counter shared by every id issued in one run."""

    def __init__(self, start=1):
        self._next = start

    def fresh(self):
        """Return the next integer id."""
        value = self._next
        self._next += 1
        return value

    @property
    def last(self):
        """The most recently issued id (``start - 1`` if none)."""
        return self._next - 1


def fresh_delta_id(idgen, shape=()):
    """Return a :class:`DeltaId` greater than every id issued before."""
    return DeltaId(idgen.fresh(), tuple(shape))


class Delta:
    """Base class; ``shape`` is computed once at construction."""

    __slots__ = ('shape',)

    def __init__(self, shape):
        object.__setattr__(self, 'shape', tuple(int(k) for k in shape))

    def __setattr__(self, name, value):
        raise AttributeError(f'{type(self).__name__} is immutable')

    def _set(self, **kwargs):
        for name, value in kwargs.items():
            object.__setattr__(self, name, value)

    def __repr__(self):
        return format_delta(self)


class Zero(Delta):
    __slots__ = ()


class Input(Delta):
    __slots__ = ('var',)

    def __init__(self, var):
        super().__init__(var.shape)
        self._set(var=var)


def _same_shape(op, *deltas):
    shapes = {d.shape for d in deltas}
    if len(shapes) != 1:
        raise RuntimeError(f'{op} of Deltas with shapes '
                           f'{sorted(map(list, shapes))}')
    return deltas[0].shape


class Add(Delta):
    __slots__ = ('left', 'right')

    def __init__(self, left, right):
        super().__init__(_same_shape('Add', left, right))
        self._set(left=left, right=right)


class Scale(Delta):
    """Elementwise product of ``factor`` (a carrier value) with ``d``."""

    __slots__ = ('factor', 'd')

    def __init__(self, factor, d):
        shape = getattr(factor, 'shape', None)
        if isinstance(factor, ConcreteArray) and shape != d.shape:
            raise RuntimeError(f'Scale factor of shape {list(shape)} for a '
                               f'Delta of shape {list(d.shape)}')
        super().__init__(d.shape)
        self._set(factor=factor, d=d)


class ShareD(Delta):
    __slots__ = ('id', 'd')

    def __init__(self, id, d):
        if tuple(id.shape) != d.shape:
            raise RuntimeError(f'Share id {id} declares shape '
                               f'{list(id.shape)}, body has {list(d.shape)}')
        super().__init__(d.shape)
        self._set(id=id, d=d)


class IndexD(Delta):
    __slots__ = ('d', 'ix')

    def __init__(self, d, ix):
        ix = tuple(ix)
        if len(ix) > len(d.shape):
            raise RuntimeError(f'IndexD of length {len(ix)} into a Delta of '
                               f'shape {list(d.shape)}')
        super().__init__(d.shape[len(ix):])
        self._set(d=d, ix=ix)


class SumOuterD(Delta):
    __slots__ = ('d',)

    def __init__(self, d):
        if not d.shape:
            raise RuntimeError('SumOuterD of a rank-0 Delta')
        super().__init__(d.shape[1:])
        self._set(d=d)


class GatherD(Delta):
    __slots__ = ('d', 'fn')

    def __init__(self, d, fn, shape):
        super().__init__(shape)
        self._set(d=d, fn=fn)


class ScatterD(Delta):
    __slots__ = ('d', 'fn')

    def __init__(self, d, fn, shape):
        super().__init__(shape)
        self._set(d=d, fn=fn)


class LitArray(Delta):
    __slots__ = ('parts',)

    def __init__(self, parts):
        parts = tuple(parts)
        if not parts:
            raise RuntimeError('LitArray needs at least one element')
        super().__init__((len(parts),) + _same_shape('LitArray', *parts))
        self._set(parts=parts)


class ReplicateD(Delta):
    __slots__ = ('count', 'd')

    def __init__(self, count, d):
        super().__init__((int(count),) + d.shape)
        self._set(count=int(count), d=d)


class TransposeD(Delta):
    __slots__ = ('perm', 'd')

    def __init__(self, perm, d):
        perm = tuple(perm)
        super().__init__(transposed_shape(perm, d.shape))
        self._set(perm=perm, d=d)


class ReshapeD(Delta):
    __slots__ = ('d',)

    def __init__(self, shape, d):
        if np.prod(shape, dtype=np.int64) != np.prod(d.shape,
                                                     dtype=np.int64):
            raise RuntimeError(f'ReshapeD from {list(d.shape)} to '
                               f'{list(shape)}')
        super().__init__(shape)
        self._set(d=d)


def shape_delta(d):
    """Return the shape of ``d`` (cached at construction)."""
    return d.shape


def delta_children(d):
    """The Delta operands of ``d``."""
    if isinstance(d, (Zero, Input)):
        return ()
    elif isinstance(d, Add):
        return (d.left, d.right)
    elif isinstance(d, LitArray):
        return d.parts
    return (d.d,)


def iter_delta_nodes(d):
    """Yield every node of ``d``, visiting each shared fragment once."""
    seen = set()
    stack = [d]
    while stack:
        node = stack.pop()
        if isinstance(node, ShareD):
            if node.id in seen:
                continue
            seen.add(node.id)
        yield node
        stack.extend(reversed(delta_children(node)))


def count_delta_nodes(d):
    """Number of distinct Delta nodes, shared fragments counted once."""
    return sum(1 for _ in iter_delta_nodes(d))


def _recomputed_shape(d):
    if isinstance(d, Zero):
        return d.shape
    elif isinstance(d, Input):
        return tuple(d.var.shape)
    elif isinstance(d, (Add, Scale, ShareD)):
        return delta_children(d)[0].shape
    elif isinstance(d, IndexD):
        return d.d.shape[len(d.ix):]
    elif isinstance(d, SumOuterD):
        return d.d.shape[1:]
    elif isinstance(d, LitArray):
        return (len(d.parts),) + d.parts[0].shape
    elif isinstance(d, ReplicateD):
        return (d.count,) + d.d.shape
    elif isinstance(d, TransposeD):
        return transposed_shape(d.perm, d.d.shape)
    return d.shape


def check_delta_invariants(d, scale_refs=None):
    """Scan ``d`` for violations of the sharing discipline.

    Parameters
    ----------
    d : Delta
        The trace to scan.
    scale_refs : tuple of type | None
        If given, every Scale factor must be an instance of one of these
        (for symbolic traces, variable or share references).

    Returns
    -------
    n_nodes : int
        Number of distinct nodes, as counted by :func:`count_delta_nodes`.

    Raises
    ------
    RuntimeError
        If an id inside a shared fragment is not smaller than the
        fragment's own id, two fragments share an id, or a cached shape
        disagrees with the one recomputed from the constructor arguments.
    """
    fragments = {}
    stack, seen = [d], set()
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if isinstance(node, ShareD):
            if fragments.setdefault(node.id.id, node.d) is not node.d:
                raise RuntimeError(f'Share id {node.id} wraps two different '
                                   f'fragments')
        if _recomputed_shape(node) != node.shape:
            raise RuntimeError(f'{type(node).__name__} caches shape '
                               f'{list(node.shape)}, recomputed '
                               f'{list(_recomputed_shape(node))}')
        if scale_refs is not None and isinstance(node, Scale) and \
                not isinstance(node.factor, scale_refs):
            raise RuntimeError(f'Scale factor is not a reference: '
                               f'{node.factor!r}')
        stack.extend(delta_children(node))

    inside = {}

    def max_id(node):
        if isinstance(node, ShareD):
            if node.id.id not in inside:
                inside[node.id.id] = max(
                    (max_id(c) for c in delta_children(node)), default=0)
                if inside[node.id.id] >= node.id.id:
                    raise RuntimeError(
                        f'Share {node.id} contains id {inside[node.id.id]}, '
                        f'which is not smaller')
            return node.id.id
        return max((max_id(c) for c in delta_children(node)), default=0)

    max_id(d)
    return count_delta_nodes(d)


def format_delta(d, fmt=str):
    """Render ``d`` as an S-expression.

    A shared fragment is printed in full at its first occurrence and as
    ``(ref ID)`` afterwards. ``fmt`` renders carrier payloads.
    """
    seen = set()

    def p(node):
        name = type(node).__name__
        if isinstance(node, Zero):
            return f'(Zero [{",".join(map(str, node.shape))}])'
        elif isinstance(node, Input):
            return f'(Input {node.var})'
        elif isinstance(node, ShareD):
            if node.id.id in seen:
                return f'(ref {node.id})'
            seen.add(node.id.id)
            return f'(Share {node.id} {p(node.d)})'
        elif isinstance(node, Add):
            return f'(Add {p(node.left)} {p(node.right)})'
        elif isinstance(node, Scale):
            return f'(Scale {fmt(node.factor)} {p(node.d)})'
        elif isinstance(node, IndexD):
            ix = ' '.join(fmt(c) for c in node.ix)
            return f'(Index {p(node.d)} [{ix}])'
        elif isinstance(node, (GatherD, ScatterD)):
            shape = ','.join(map(str, node.shape))
            return (f'({name[:-1]} [{shape}] {p(node.d)} '
                    f'{fmt(node.fn)})')
        elif isinstance(node, LitArray):
            return f'(LitArray {" ".join(p(q) for q in node.parts)})'
        elif isinstance(node, ReplicateD):
            return f'(Replicate {node.count} {p(node.d)})'
        elif isinstance(node, TransposeD):
            return f'(Transpose [{",".join(map(str, node.perm))}] ' \
                f'{p(node.d)})'
        elif isinstance(node, ReshapeD):
            return f'(Reshape [{",".join(map(str, node.shape))}] ' \
                f'{p(node.d)})'
        return f'(SumOuter {p(node.d)})'

    return p(d)


def eval_forward(d, tangents):
    """Apply the linear map denoted by a concrete Delta to input tangents.

    Parameters
    ----------
    d : Delta
        A Delta over concrete arrays.
    tangents : dict
        Map from :class:`DVarName` to a :class:`ConcreteArray` of its
        shape; missing inputs have a zero tangent.

    Returns
    -------
    tangent : ConcreteArray
        The directional derivative of the traced value.
    """
    memo = {}

    def ev(node):
        if isinstance(node, Zero):
            return ConcreteArray.zeros(node.shape)
        elif isinstance(node, Input):
            if node.var in tangents:
                return tangents[node.var]
            return ConcreteArray.zeros(node.shape)
        elif isinstance(node, Add):
            return map_op('+', [ev(node.left), ev(node.right)])
        elif isinstance(node, Scale):
            return map_op('*', [node.factor, ev(node.d)])
        elif isinstance(node, ShareD):
            if node.id.id not in memo:
                memo[node.id.id] = ev(node.d)
            return memo[node.id.id]
        elif isinstance(node, IndexD):
            return index(ev(node.d), node.ix)
        elif isinstance(node, SumOuterD):
            return sum_outer(ev(node.d))
        elif isinstance(node, GatherD):
            return gather(node.shape, ev(node.d), node.fn)
        elif isinstance(node, ScatterD):
            return scatter(node.shape, ev(node.d), node.fn)
        elif isinstance(node, LitArray):
            return from_subarrays([ev(q) for q in node.parts])
        elif isinstance(node, ReplicateD):
            return replicate(node.count, ev(node.d))
        elif isinstance(node, TransposeD):
            return transpose(node.perm, ev(node.d))
        elif isinstance(node, ReshapeD):
            return reshape(node.shape, ev(node.d))
        raise TypeError(f'Not a Delta: {node!r}')

    return ev(d)
