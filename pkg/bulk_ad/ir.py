"""Terms of the core array language, their shape checker and helpers."""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
import re
from dataclasses import dataclass, field, replace

import numpy as np

from bulk_ad.config import INT_KIND, BOOL_KIND, NUMERIC_KINDS
from bulk_ad.tensor import (ConcreteArray, op_result_kind,
                            transposed_shape)


class CheckError(ValueError):
    """Raised when a term is not well typed."""


class UnboundVarError(CheckError):
    """A variable is used outside the scope of any binding."""


class ShapeMismatchError(CheckError):
    """Shapes or kinds of subterms do not fit the typing rule."""


class PermutationInvalidError(CheckError):
    """A transpose permutation is not a permutation of 0..m-1."""


class ReshapeProductMismatchError(CheckError):
    """A reshape changes the number of elements."""


class CondScrutineeError(CheckError):
    """The scrutinee of a conditional is not a rank-0 boolean."""


class ScatterNonNumericError(CheckError):
    """A scatter (or sum) is applied to a boolean array."""


@dataclass(frozen=True)
class ArrayType:
    """The type ``Array shape kind`` of a term."""

    shape: tuple
    kind: str

    @property
    def rank(self):
        """Number of dimensions."""
        return len(self.shape)

    def __str__(self):
        dims = ','.join(str(k) for k in self.shape)
        return f'{self.kind} [{dims}]'


SCALAR_INT = ArrayType((), INT_KIND)
SCALAR_REAL = ArrayType((), 'f64')


@dataclass(frozen=True)
class Term:
    """Base class of all terms; ``type`` is filled in by :func:`check`."""

    type: object = field(default=None, compare=False, repr=False,
                         kw_only=True)


@dataclass(frozen=True)
class Const(Term):
    value: ConcreteArray


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class Let(Term):
    name: str
    bound: Term
    body: Term


@dataclass(frozen=True)
class Cond(Term):
    scrutinee: Term
    then: Term
    orelse: Term


@dataclass(frozen=True)
class PrimOp(Term):
    op: str
    args: tuple


@dataclass(frozen=True)
class Index(Term):
    array: Term
    ix: tuple


@dataclass(frozen=True)
class SumOuter(Term):
    array: Term


@dataclass(frozen=True)
class IxFn:
    """``lam [params] [body]``: maps int coordinates to int coordinates."""

    params: tuple
    body: tuple


@dataclass(frozen=True)
class Gather(Term):
    shape: tuple
    array: Term
    fn: IxFn


@dataclass(frozen=True)
class Scatter(Term):
    shape: tuple
    array: Term
    fn: IxFn


@dataclass(frozen=True)
class Ravel(Term):
    parts: tuple


@dataclass(frozen=True)
class Replicate(Term):
    count: int
    array: Term


@dataclass(frozen=True)
class Transpose(Term):
    perm: tuple
    array: Term


@dataclass(frozen=True)
class Reshape(Term):
    shape: tuple
    array: Term


@dataclass(frozen=True)
class Build1(Term):
    count: int
    var: str
    body: Term


@dataclass(frozen=True)
class Share(Term):
    id: int
    body: Term


@dataclass(frozen=True)
class Tuple(Term):
    """Tuple of results; only allowed at the top of a program."""

    items: tuple


@dataclass(frozen=True)
class Program:
    """A term together with the declared types of its free variables.

    Parameters
    ----------
    params : tuple of (str, ArrayType)
        The free variables in declaration order.
    body : Term
        The program body.
    """

    params: tuple
    body: Term

    @property
    def env(self):
        """Map from parameter name to its :class:`ArrayType`."""
        return dict(self.params)

    @property
    def real_params(self):
        """Names of the real-kind parameters, in declaration order."""
        return tuple(name for name, typ in self.params if typ.kind == 'f64')


def const(value, kind=None):
    """Make a rank-0 constant term."""
    return Const(ConcreteArray.scalar(value, kind))


# ---------------------------------------------------------------------------
# Generic traversal

def children(t):
    """Direct subterms of ``t``, index payloads included."""
    if isinstance(t, (Const, Var)):
        return ()
    elif isinstance(t, Let):
        return (t.bound, t.body)
    elif isinstance(t, Cond):
        return (t.scrutinee, t.then, t.orelse)
    elif isinstance(t, PrimOp):
        return t.args
    elif isinstance(t, Index):
        return (t.array,) + t.ix
    elif isinstance(t, (Gather, Scatter)):
        return (t.array,) + t.fn.body
    elif isinstance(t, Ravel):
        return t.parts
    elif isinstance(t, Build1):
        return (t.body,)
    elif isinstance(t, Tuple):
        return t.items
    elif isinstance(t, (SumOuter, Replicate, Transpose, Reshape)):
        return (t.array,)
    elif isinstance(t, Share):
        return (t.body,)
    raise TypeError(f'Not a term: {t!r}')


def map_children(t, fn):
    """Rebuild ``t`` with ``fn`` applied to every direct subterm.

    Returns ``t`` itself when no subterm changed. Binders are not renamed.
    """
    def _all(items):
        new = tuple(fn(s) for s in items)
        return new, any(a is not b for a, b in zip(new, items))

    if isinstance(t, (Const, Var)):
        return t
    elif isinstance(t, Let):
        bound, body = fn(t.bound), fn(t.body)
        if bound is t.bound and body is t.body:
            return t
        return replace(t, bound=bound, body=body)
    elif isinstance(t, Cond):
        new, changed = _all((t.scrutinee, t.then, t.orelse))
        if not changed:
            return t
        return replace(t, scrutinee=new[0], then=new[1], orelse=new[2])
    elif isinstance(t, PrimOp):
        new, changed = _all(t.args)
        return replace(t, args=new) if changed else t
    elif isinstance(t, Index):
        array = fn(t.array)
        ix, changed = _all(t.ix)
        if array is t.array and not changed:
            return t
        return replace(t, array=array, ix=ix)
    elif isinstance(t, (Gather, Scatter)):
        array = fn(t.array)
        body, changed = _all(t.fn.body)
        if array is t.array and not changed:
            return t
        return replace(t, array=array, fn=IxFn(t.fn.params, body))
    elif isinstance(t, Ravel):
        new, changed = _all(t.parts)
        return replace(t, parts=new) if changed else t
    elif isinstance(t, Tuple):
        new, changed = _all(t.items)
        return replace(t, items=new) if changed else t
    elif isinstance(t, (Build1, Share)):
        body = fn(t.body)
        return t if body is t.body else replace(t, body=body)
    elif isinstance(t, (SumOuter, Replicate, Transpose, Reshape)):
        array = fn(t.array)
        return t if array is t.array else replace(t, array=array)
    raise TypeError(f'Not a term: {t!r}')


def iter_terms(t):
    """Yield every node of ``t`` (payloads included), pre-order."""
    stack = [t]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def term_size(t):
    """Number of nodes in ``t``, counting shared subterms every time."""
    return sum(1 for _ in iter_terms(t))


def count_shares(t):
    """Number of Share nodes in ``t``."""
    return sum(1 for node in iter_terms(t) if isinstance(node, Share))


def strip_share(t):
    """Erase every Share wrapper, keeping its body."""
    if isinstance(t, Share):
        return strip_share(t.body)
    return map_children(t, strip_share)


def free_vars(t):
    """Return the set of variable names free in ``t``."""
    if isinstance(t, Var):
        return {t.name}
    elif isinstance(t, Let):
        return free_vars(t.bound) | (free_vars(t.body) - {t.name})
    elif isinstance(t, Build1):
        return free_vars(t.body) - {t.var}
    elif isinstance(t, (Gather, Scatter)):
        inner = set()
        for c in t.fn.body:
            inner |= free_vars(c)
        return free_vars(t.array) | (inner - set(t.fn.params))
    out = set()
    for child in children(t):
        out |= free_vars(child)
    return out


def all_names(t):
    """Every variable name occurring in ``t``, bound or free."""
    names = set()
    for node in iter_terms(t):
        if isinstance(node, Var):
            names.add(node.name)
        elif isinstance(node, Let):
            names.add(node.name)
        elif isinstance(node, Build1):
            names.add(node.var)
        elif isinstance(node, (Gather, Scatter)):
            names.update(node.fn.params)
    return names


class NameGen:
    """Fresh variable names from a single monotone counter.

    Parameters
    ----------
    used : iterable of str
        Names that must never be produced.
    """

    def __init__(self, used=()):
        self._used = set(used)
        self._count = 0

    def reserve(self, names):
        """Mark ``names`` as taken."""
        self._used.update(names)

    def fresh(self, base='v'):
        """Return a new name built from ``base`` and the counter."""
        base = re.sub(r'[_0-9]+$', '', base) or 'v'
        while True:
            self._count += 1
            name = f'{base}{self._count}'
            if name not in self._used:
                self._used.add(name)
                return name

    def claim(self, name):
        """Return ``name`` itself if it is free, otherwise a fresh one."""
        if name in self._used:
            return self.fresh(name)
        self._used.add(name)
        return name


def _rename_binder(name, body, avoid, names):
    """Rename ``name`` in ``body`` if it clashes with ``avoid``."""
    if name not in avoid:
        return name, body
    new = names.fresh(name)
    return new, substitute(body, {name: Var(new)}, names)


def substitute(t, mapping, names=None):
    """Capture-avoiding substitution of variables in ``t``.

    Parameters
    ----------
    t : Term
        The term to substitute into.
    mapping : dict
        Map from variable name to replacement term.
    names : NameGen | None
        Source of fresh names for renamed binders.

    Returns
    -------
    t : Term
        The substituted term.
    """
    if not mapping:
        return t
    if names is None:
        used = all_names(t)
        for value in mapping.values():
            used |= all_names(value)
        names = NameGen(used)
    return _Substituter(mapping, names).visit(t, dict(mapping))


class _Substituter:

    def __init__(self, mapping, names):
        self.names = names
        self._fv = {}

    def _value_fvs(self, mapping):
        out = set()
        for key, value in mapping.items():
            if key not in self._fv:
                self._fv[key] = (value, free_vars(value))
            elif self._fv[key][0] is not value:
                self._fv[key] = (value, free_vars(value))
            out |= self._fv[key][1]
        return out

    def _binders(self, binders, bodies, mapping):
        """Drop shadowed keys and rename binders that would capture."""
        mapping = {k: v for k, v in mapping.items() if k not in binders}
        if not mapping:
            return list(binders), list(bodies), mapping
        avoid = self._value_fvs(mapping)
        binders, bodies = list(binders), list(bodies)
        for j, name in enumerate(binders):
            if name in avoid:
                new = self.names.fresh(name)
                renaming = {name: Var(new)}
                bodies = [substitute(b, renaming, self.names)
                          for b in bodies]
                binders[j] = new
        return binders, bodies, mapping

    def visit(self, t, mapping):
        if not mapping:
            return t
        if isinstance(t, Var):
            return mapping.get(t.name, t)
        elif isinstance(t, Let):
            bound = self.visit(t.bound, mapping)
            (name,), (body,), inner = self._binders(
                (t.name,), (t.body,), mapping)
            body = self.visit(body, inner)
            return replace(t, name=name, bound=bound, body=body)
        elif isinstance(t, Build1):
            (name,), (body,), inner = self._binders(
                (t.var,), (t.body,), mapping)
            return replace(t, var=name, body=self.visit(body, inner))
        elif isinstance(t, (Gather, Scatter)):
            array = self.visit(t.array, mapping)
            params, body, inner = self._binders(
                t.fn.params, t.fn.body, mapping)
            body = tuple(self.visit(c, inner) for c in body)
            return replace(t, array=array, fn=IxFn(tuple(params), body))
        return map_children(t, lambda s: self.visit(s, mapping))


def alpha_equivalent(t, u):
    """Whether two terms are equal up to renaming of bound variables."""
    return _alpha(t, u, {}, {}, 0)


def _alpha(t, u, lt, lu, depth):
    if type(t) is not type(u):
        return False
    if isinstance(t, Var):
        bt, bu = lt.get(t.name), lu.get(u.name)
        if bt is None and bu is None:
            return t.name == u.name
        return bt == bu
    elif isinstance(t, Const):
        return t.value == u.value
    elif isinstance(t, Let):
        return (_alpha(t.bound, u.bound, lt, lu, depth) and
                _alpha(t.body, u.body, {**lt, t.name: depth},
                       {**lu, u.name: depth}, depth + 1))
    elif isinstance(t, Build1):
        return (t.count == u.count and
                _alpha(t.body, u.body, {**lt, t.var: depth},
                       {**lu, u.var: depth}, depth + 1))
    elif isinstance(t, (Gather, Scatter)):
        if (t.shape != u.shape or len(t.fn.params) != len(u.fn.params) or
                len(t.fn.body) != len(u.fn.body) or
                not _alpha(t.array, u.array, lt, lu, depth)):
            return False
        n = len(t.fn.params)
        lt2 = {**lt, **{p: depth + j for j, p in enumerate(t.fn.params)}}
        lu2 = {**lu, **{p: depth + j for j, p in enumerate(u.fn.params)}}
        return all(_alpha(a, b, lt2, lu2, depth + n)
                   for a, b in zip(t.fn.body, u.fn.body))
    static = {PrimOp: 'op', Replicate: 'count', Transpose: 'perm',
              Reshape: 'shape', Share: 'id'}
    attr = static.get(type(t))
    if attr is not None and getattr(t, attr) != getattr(u, attr):
        return False
    ct, cu = children(t), children(u)
    if isinstance(t, Index) and len(t.ix) != len(u.ix):
        return False
    return len(ct) == len(cu) and all(
        _alpha(a, b, lt, lu, depth) for a, b in zip(ct, cu))


# ---------------------------------------------------------------------------
# Type checking

def _describe(t):
    from bulk_ad.syntax import print_term
    text = print_term(strip_annotations(t))
    if len(text) > 72:
        text = text[:69] + '...'
    return text


def strip_annotations(t):
    """Return ``t`` with the type annotations dropped."""
    t = map_children(t, strip_annotations)
    if t.type is not None:
        t = replace(t, type=None)
    return t


def check(t, env, top=True):
    """Check ``t`` against the typing rules and annotate every node.

    Parameters
    ----------
    t : Term
        The term to check.
    env : dict
        Map from free variable name to :class:`ArrayType`.
    top : bool
        Whether ``t`` is in top position, where tuples are allowed.

    Returns
    -------
    t : Term
        The annotated term; ``t.type`` is its :class:`ArrayType` (or a
        tuple of types for a tuple).

    Raises
    ------
    CheckError
        The subclass names the violated rule; the message names the node.
    """
    return _typecheck(t, dict(env), True, top)[0]


def infer_type(t, env):
    """Return the type of ``t``, reusing annotations already present."""
    return _typecheck(t, env, False, True)[1]


def check_program(program):
    """Check a :class:`Program`, returning it with an annotated body."""
    return replace(program, body=check(program.body, program.env))


def _check_index_component(c, env, annotate, where):
    c, typ = _typecheck(c, env, annotate, False)
    if typ != SCALAR_INT:
        raise ShapeMismatchError(
            f'Index components must be rank-0 {INT_KIND}, got {typ} in '
            f'{where}')
    return c


def _typecheck(t, env, annotate, top):
    """Return ``(node, type)``; ``node`` is annotated when ``annotate``."""
    if not annotate and t.type is not None:
        return t, t.type

    def sub(s, inner_env=env, inner_top=False):
        return _typecheck(s, inner_env, annotate, inner_top)

    if isinstance(t, Const):
        node, typ = t, ArrayType(t.value.shape, t.value.kind)
    elif isinstance(t, Var):
        if t.name not in env:
            raise UnboundVarError(f'Unbound variable "{t.name}"')
        node, typ = t, env[t.name]
    elif isinstance(t, Let):
        bound, btyp = sub(t.bound)
        body, typ = sub(t.body, {**env, t.name: btyp}, top)
        if isinstance(btyp, tuple):
            raise ShapeMismatchError(f'Cannot bind a tuple in '
                                     f'{_describe(t)}')
        node = replace(t, bound=bound, body=body)
    elif isinstance(t, Cond):
        scrutinee, styp = sub(t.scrutinee)
        if styp != ArrayType((), BOOL_KIND):
            raise CondScrutineeError(
                f'Conditional scrutinee must be rank-0 {BOOL_KIND}, got '
                f'{styp} in {_describe(t)}')
        then, typ = sub(t.then)
        orelse, etyp = sub(t.orelse)
        if typ != etyp:
            raise ShapeMismatchError(
                f'Conditional branches have types {typ} and {etyp} in '
                f'{_describe(t)}')
        node = replace(t, scrutinee=scrutinee, then=then, orelse=orelse)
    elif isinstance(t, PrimOp):
        results = [sub(a) for a in t.args]
        types = [r[1] for r in results]
        if len({a.shape for a in types}) > 1:
            raise ShapeMismatchError(
                f'Arguments of "{t.op}" have shapes '
                f'{[list(a.shape) for a in types]} in {_describe(t)}')
        try:
            kind = op_result_kind(t.op, [a.kind for a in types])
        except ValueError as err:
            raise ShapeMismatchError(f'{err} in {_describe(t)}')
        typ = ArrayType(types[0].shape, kind)
        node = replace(t, args=tuple(r[0] for r in results))
    elif isinstance(t, Index):
        array, atyp = sub(t.array)
        if len(t.ix) > atyp.rank:
            raise ShapeMismatchError(
                f'Index of length {len(t.ix)} into an array of type {atyp} '
                f'in {_describe(t)}')
        ix = tuple(_check_index_component(c, env, annotate, _describe(t))
                   for c in t.ix)
        typ = ArrayType(atyp.shape[len(t.ix):], atyp.kind)
        node = replace(t, array=array, ix=ix)
    elif isinstance(t, SumOuter):
        array, atyp = sub(t.array)
        if atyp.rank < 1:
            raise ShapeMismatchError(f'sumouter needs rank >= 1, got '
                                     f'{atyp} in {_describe(t)}')
        if atyp.kind not in NUMERIC_KINDS:
            raise ScatterNonNumericError(f'sumouter needs a numeric array, '
                                         f'got {atyp} in {_describe(t)}')
        typ = ArrayType(atyp.shape[1:], atyp.kind)
        node = replace(t, array=array)
    elif isinstance(t, (Gather, Scatter)):
        array, atyp = sub(t.array)
        params, comps = t.fn.params, t.fn.body
        m1, m2 = len(params), len(comps)
        inner = {**env, **{p: SCALAR_INT for p in params}}
        body = tuple(_check_index_component(c, inner, annotate,
                                            _describe(t)) for c in comps)
        shape = tuple(t.shape)
        if isinstance(t, Gather):
            fits = (m1 <= len(shape) and m2 <= atyp.rank and
                    shape[m1:] == atyp.shape[m2:])
        else:
            if atyp.kind not in NUMERIC_KINDS:
                raise ScatterNonNumericError(
                    f'scatter needs a numeric array, got {atyp} in '
                    f'{_describe(t)}')
            fits = (m1 <= atyp.rank and m2 <= len(shape) and
                    atyp.shape[m1:] == shape[m2:])
        if not fits:
            raise ShapeMismatchError(
                f'Shape [{",".join(map(str, shape))}] with a {m1} -> {m2} '
                f'index function does not fit {atyp} in {_describe(t)}')
        typ = ArrayType(shape, atyp.kind)
        node = replace(t, array=array, fn=IxFn(params, body))
    elif isinstance(t, Ravel):
        if len(t.parts) == 0:
            raise ShapeMismatchError('ravel needs at least one element')
        results = [sub(p) for p in t.parts]
        types = {r[1] for r in results}
        if len(types) != 1:
            raise ShapeMismatchError(
                f'ravel elements have types {sorted(map(str, types))} in '
                f'{_describe(t)}')
        ptyp = results[0][1]
        typ = ArrayType((len(t.parts),) + ptyp.shape, ptyp.kind)
        node = replace(t, parts=tuple(r[0] for r in results))
    elif isinstance(t, Replicate):
        if t.count < 0:
            raise ShapeMismatchError(f'replicate count must be >= 0 in '
                                     f'{_describe(t)}')
        array, atyp = sub(t.array)
        typ = ArrayType((t.count,) + atyp.shape, atyp.kind)
        node = replace(t, array=array)
    elif isinstance(t, Transpose):
        array, atyp = sub(t.array)
        perm = tuple(t.perm)
        if sorted(perm) != list(range(len(perm))):
            raise PermutationInvalidError(
                f'{list(perm)} is not a permutation of 0..{len(perm) - 1} '
                f'in {_describe(t)}')
        if len(perm) > atyp.rank:
            raise ShapeMismatchError(
                f'Permutation {list(perm)} is longer than the rank of '
                f'{atyp} in {_describe(t)}')
        typ = ArrayType(transposed_shape(perm, atyp.shape), atyp.kind)
        node = replace(t, array=array)
    elif isinstance(t, Reshape):
        array, atyp = sub(t.array)
        shape = tuple(t.shape)
        if any(k < 0 for k in shape):
            raise ShapeMismatchError(f'Negative dimension in '
                                     f'{_describe(t)}')
        if np.prod(shape, dtype=np.int64) != np.prod(atyp.shape,
                                                     dtype=np.int64):
            raise ReshapeProductMismatchError(
                f'Cannot reshape {atyp} to [{",".join(map(str, shape))}] '
                f'in {_describe(t)}')
        typ = ArrayType(shape, atyp.kind)
        node = replace(t, array=array)
    elif isinstance(t, Build1):
        if t.count < 0:
            raise ShapeMismatchError(f'build1 count must be >= 0 in '
                                     f'{_describe(t)}')
        body, btyp = sub(t.body, {**env, t.var: SCALAR_INT})
        typ = ArrayType((t.count,) + btyp.shape, btyp.kind)
        node = replace(t, body=body)
    elif isinstance(t, Share):
        body, typ = sub(t.body, env, top)
        node = replace(t, body=body)
    elif isinstance(t, Tuple):
        if not top:
            raise ShapeMismatchError('Tuples are only allowed at the top '
                                     'of a program')
        results = [sub(item, env, True) for item in t.items]
        typ = tuple(r[1] for r in results)
        node = replace(t, items=tuple(r[0] for r in results))
    else:
        raise TypeError(f'Not a term: {t!r}')
    if annotate:
        node = replace(node, type=typ)
    else:
        node = t
    return node, typ


def check_share_let_separation(t):
    """List the places where Let and Share are nested in one another.

    Only the spine is inspected; index components and index-function
    bodies are integer code evaluated in place and may contain local lets.

    Returns
    -------
    violations : list of str
        Empty when no Let occurs under a Share and no Share under a Let.
    """
    violations = []

    def walk(node, under_let, under_share):
        if isinstance(node, Share):
            if under_let:
                violations.append(f'share {node.id} under a let')
            under_share = True
        elif isinstance(node, Let):
            if under_share:
                violations.append(f'let {node.name} under a share')
            under_let = True
        if isinstance(node, Index):
            spine = (node.array,)
        elif isinstance(node, (Gather, Scatter)):
            spine = (node.array,)
        else:
            spine = children(node)
        for child in spine:
            walk(child, under_let, under_share)

    walk(t, False, False)
    return violations
