"""The bulk-operation transform.

Rewrites ``build1`` and ``index`` until neither can be pushed any further:
``build1`` disappears and ``index`` is left applied only to variables,
constants, single-index ravels and scatters.
"""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
from dataclasses import dataclass, field
from collections import Counter

import numpy as np
from mne.utils import logger, verbose

from bulk_ad.config import MAX_RANK
from bulk_ad.ir import (Const, Var, Let, Cond, PrimOp, Index, SumOuter,
                        Gather, Scatter, Ravel, Replicate, Transpose, Reshape,
                        Build1, IxFn, SCALAR_INT, NameGen, all_names,
                        free_vars, substitute, map_children, check,
                        infer_type, iter_terms, term_size, const)
from bulk_ad.tensor import ConcreteArray, inverse_permutation


def _lets(names, values, body):
    for name, value in reversed(list(zip(names, values))):
        body = Let(name, value, body)
    return body


def _to_linear(shape, idx):
    """Row-major linear index of ``idx`` in ``shape``, as a term."""
    if not idx:
        return const(0)
    acc = idx[0]
    for k, i in zip(shape[1:], idx[1:]):
        acc = PrimOp('+', (PrimOp('*', (acc, const(k))), i))
    return acc


def _from_linear(shape, lin):
    """Coordinates in ``shape`` of the linear index term ``lin``."""
    comps = []
    for j, k in enumerate(shape):
        stride = int(np.prod(shape[j + 1:], dtype=np.int64))
        c = lin if stride == 1 else PrimOp('div', (lin, const(stride)))
        if j > 0:
            c = PrimOp('mod', (c, const(k)))
        comps.append(c)
    return tuple(comps)


class _Rewriter:
    """Applies the rewrite rules at one position, with scoped types."""

    def __init__(self, names, strategy, step_budget):
        self.names = names
        self.strategy = strategy
        self.step_budget = step_budget
        self.steps = 0
        self.rules = Counter()

    def _tick(self, rule):
        self.steps += 1
        self.rules[rule] += 1
        if self.steps > self.step_budget:
            raise RuntimeError(f'Rewriting did not reach a normal form '
                               f'within {self.step_budget} steps')

    # -- traversal ---------------------------------------------------------

    def map_scoped(self, t, scope, fn):
        """Apply ``fn(child, child_scope)`` to the direct subterms of t."""
        if isinstance(t, Let):
            bound = fn(t.bound, scope)
            inner = {**scope, t.name: infer_type(bound, scope)}
            body = fn(t.body, inner)
            if bound is t.bound and body is t.body:
                return t
            return Let(t.name, bound, body, type=t.type)
        elif isinstance(t, Build1):
            body = fn(t.body, {**scope, t.var: SCALAR_INT})
            if body is t.body:
                return t
            return Build1(t.count, t.var, body, type=t.type)
        elif isinstance(t, (Gather, Scatter)):
            array = fn(t.array, scope)
            inner = {**scope, **{p: SCALAR_INT for p in t.fn.params}}
            body = tuple(fn(c, inner) for c in t.fn.body)
            if array is t.array and all(
                    a is b for a, b in zip(body, t.fn.body)):
                return t
            return type(t)(t.shape, array, IxFn(t.fn.params, body),
                           type=t.type)
        return map_children(t, lambda s: fn(s, scope))

    def normalize(self, t, scope):
        if self.strategy == 'outermost':
            return self._outermost(t, scope)
        return self._innermost(t, scope)

    def _outermost(self, t, scope):
        while True:
            new = self.rewrite(t, scope)
            if new is not None:
                t = new
                continue
            new = self.map_scoped(t, scope, self._outermost)
            if new is t:
                return t
            t = new

    def _innermost(self, t, scope):
        t = self.map_scoped(t, scope, self._innermost)
        new = self.rewrite(t, scope)
        if new is None:
            return t
        return self._innermost(new, scope)

    # -- rules -------------------------------------------------------------

    def rewrite(self, t, scope):
        """Return the result of the first rule matching at the root."""
        if isinstance(t, Let) and isinstance(t.bound, Var):
            self._tick('let-of-var')
            return substitute(t.body, {t.name: t.bound}, self.names)
        elif isinstance(t, Build1):
            return self._build1(t, scope)
        elif isinstance(t, Index):
            return self._index(t, scope)
        elif isinstance(t, Gather) and isinstance(t.array, Gather):
            self._tick('gather-gather')
            return self._fuse_gathers(t)
        return None

    def _build1(self, t, scope):
        k, i, b = t.count, t.var, t.body
        if isinstance(b, Var) and b.name == i:
            self._tick('build1-iota')
            return Const(ConcreteArray(np.arange(k), 'i64'))
        if i not in free_vars(b):
            self._tick('build1-replicate')
            return Replicate(k, b)

        def build(body):
            return Build1(k, i, body)

        if isinstance(b, Let):
            self._tick('build1-let')
            if isinstance(b.bound, Var):
                return build(substitute(b.body, {b.name: b.bound},
                                        self.names))
            x = self.names.fresh(b.name)
            body = substitute(b.body, {b.name: Index(Var(x), (Var(i),))},
                              self.names)
            return Let(x, build(b.bound), build(body))
        elif isinstance(b, Cond):
            self._tick('build1-cond')
            pick = Cond(b.scrutinee, const(0), const(1))
            return build(Index(Ravel((b.then, b.orelse)), (pick,)))
        elif isinstance(b, PrimOp):
            self._tick('build1-op')
            return PrimOp(b.op, tuple(build(a) for a in b.args))
        elif isinstance(b, SumOuter):
            self._tick('build1-sumouter')
            return SumOuter(Transpose((1, 0), build(b.array)))
        elif isinstance(b, (Gather, Scatter)):
            self._tick('build1-gather' if isinstance(b, Gather)
                       else 'build1-scatter')
            fn = b.fn
            if i in fn.params:
                fn = self._rename_params(fn, {i})
            return type(b)((k,) + tuple(b.shape), build(b.array),
                           IxFn((i,) + fn.params, (Var(i),) + fn.body))
        elif isinstance(b, Ravel):
            self._tick('build1-ravel')
            return Transpose((1, 0), Ravel(tuple(build(p) for p in b.parts)))
        elif isinstance(b, Replicate):
            self._tick('build1-replicate-inner')
            return Transpose((1, 0), Replicate(b.count, build(b.array)))
        elif isinstance(b, Transpose):
            self._tick('build1-transpose')
            perm = (0,) + tuple(p + 1 for p in b.perm)
            return Transpose(perm, build(b.array))
        elif isinstance(b, Reshape):
            self._tick('build1-reshape')
            return Reshape((k,) + tuple(b.shape), build(b.array))
        elif isinstance(b, Index):
            return self._build1_index(t, scope)
        return None

    def _build1_index(self, t, scope):
        k, i, b = t.count, t.var, t.body
        a, ix = b.array, b.ix
        if not ix:
            return None
        head_var = isinstance(a, Var) and a.name != i
        if not (head_var or isinstance(a, (Const, Scatter)) or
                (isinstance(a, Ravel) and len(ix) == 1)):
            return None
        residual = infer_type(b, {**scope, i: SCALAR_INT}).shape
        shape = (k,) + tuple(residual)
        if head_var or isinstance(a, Const):
            self._tick('build1-index-leaf')
            return Gather(shape, a, IxFn((i,), ix))
        self._tick('build1-index-ravel' if isinstance(a, Ravel)
                   else 'build1-index-scatter')
        return Gather(shape, Build1(k, i, a), IxFn((i,), (Var(i),) + ix))

    def _rename_params(self, fn, avoid):
        params, body = list(fn.params), fn.body
        for j, p in enumerate(params):
            if p in avoid:
                new = self.names.fresh(p)
                body = tuple(substitute(c, {p: Var(new)}, self.names)
                             for c in body)
                params[j] = new
        return IxFn(tuple(params), body)

    def _fuse_gathers(self, t):
        """One gather reading through the composed index functions."""
        inner = t.array
        g = self._rename_params(inner.fn, set(inner.fn.params))
        avoid = set()
        for c in g.body:
            avoid |= free_vars(c)
        f = self._rename_params(t.fn, avoid)
        n, p = len(f.body), len(g.params)
        # outer indices that stop short of the inner gather's own axes
        extra = tuple(self.names.fresh('g') for _ in g.params[n:])
        args = f.body[:p] + tuple(Var(e) for e in extra)
        mapping = dict(zip(g.params, args))
        body = tuple(substitute(c, mapping, self.names) for c in g.body)
        return Gather(tuple(t.shape), inner.array,
                      IxFn(f.params + extra, body + f.body[p:]))

    def _fresh_lets(self, values, base='i'):
        names = [self.names.fresh(base) for _ in values]
        return names, tuple(Var(n) for n in names)

    def _index(self, t, scope):
        a, ix = t.array, t.ix
        if not ix:
            self._tick('index-empty')
            return a
        if isinstance(a, Index):
            self._tick('index-index')
            return Index(a.array, a.ix + ix)
        elif isinstance(a, Let):
            self._tick('index-let')
            name, body = a.name, a.body
            fvs = set()
            for c in ix:
                fvs |= free_vars(c)
            if name in fvs:
                new = self.names.fresh(name)
                body = substitute(body, {name: Var(new)}, self.names)
                name = new
            return Let(name, a.bound, Index(body, ix))
        elif isinstance(a, Cond):
            self._tick('index-cond')
            names, refs = self._fresh_lets(ix)
            return _lets(names, ix, Cond(a.scrutinee, Index(a.then, refs),
                                         Index(a.orelse, refs)))
        elif isinstance(a, PrimOp):
            self._tick('index-op')
            if len(a.args) == 1:
                return PrimOp(a.op, (Index(a.args[0], ix),))
            names, refs = self._fresh_lets(ix)
            return _lets(names, ix, PrimOp(
                a.op, tuple(Index(arg, refs) for arg in a.args)))
        elif isinstance(a, SumOuter):
            self._tick('index-sumouter')
            m = len(ix)
            perm = tuple(range(1, m + 1)) + (0,)
            return SumOuter(Index(Transpose(perm, a.array), ix))
        elif isinstance(a, Ravel):
            if len(ix) == 1:
                return None
            self._tick('index-ravel')
            names, refs = self._fresh_lets(ix[1:])
            parts = tuple(Index(p, refs) for p in a.parts)
            return _lets(names, ix[1:], Index(Ravel(parts), ix[:1]))
        elif isinstance(a, Replicate):
            self._tick('index-replicate')
            return Index(a.array, ix[1:])
        elif isinstance(a, Transpose):
            self._tick('index-transpose')
            shape = infer_type(a, scope).shape
            m = len(a.perm)
            params = tuple(self.names.fresh('o') for _ in range(m))
            inv = inverse_permutation(a.perm)
            body = tuple(Var(params[inv[q]]) for q in range(m))
            return Index(Gather(shape, a.array, IxFn(params, body)), ix)
        elif isinstance(a, Reshape):
            self._tick('index-reshape')
            source = infer_type(a.array, scope).shape
            params = tuple(self.names.fresh('r') for _ in a.shape)
            lin = _to_linear(a.shape, tuple(Var(p) for p in params))
            body = _from_linear(source, lin)
            return Index(Gather(tuple(a.shape), a.array,
                                IxFn(params, body)), ix)
        elif isinstance(a, Gather) and isinstance(a.array, Gather):
            self._tick('gather-gather')
            return Index(self._fuse_gathers(a), ix)
        elif isinstance(a, Gather):
            if not a.fn.params:
                self._tick('index-gather-nullary')
                return Index(Index(a.array, a.fn.body), ix)
            self._tick('index-gather')
            u = ix[0]
            fn = a.fn
            if free_vars(u) & set(fn.params[1:]):
                fn = self._rename_params(fn, free_vars(u))
            i, rest = fn.params[0], fn.params[1:]
            body = tuple(Let(i, u, c) if i in free_vars(c) else c
                         for c in fn.body)
            return Index(Gather(tuple(a.shape[1:]), a.array,
                                IxFn(rest, body)), ix[1:])
        return None

    # -- optional simplifications -----------------------------------------

    def simplify(self, t, scope):
        t = self.map_scoped(t, scope, self.simplify)
        if isinstance(t, Gather):
            params, body = t.fn.params, t.fn.body
            if (len(params) == len(body) and
                    all(isinstance(c, Var) and c.name == p
                        for c, p in zip(body, params)) and
                    tuple(t.shape) == infer_type(t.array, scope).shape):
                self._tick('simplify-gather')
                return t.array
        elif isinstance(t, Transpose) and \
                tuple(t.perm) == tuple(range(len(t.perm))):
            self._tick('simplify-transpose')
            return t.array
        elif isinstance(t, Reshape) and \
                tuple(t.shape) == infer_type(t.array, scope).shape:
            self._tick('simplify-reshape')
            return t.array
        return t


@verbose
def normalize(t, env, simplify=False, strategy='outermost',
              step_budget=None, verbose=None):
    """Rewrite a checked term to its bulk-operation normal form.

    Parameters
    ----------
    t : Term
        A checked term.
    env : dict
        Map from the free variables of ``t`` to their types.
    simplify : bool
        If True, also drop identity gathers, transposes and reshapes.
    strategy : str
        ``'outermost'`` (default) rewrites the outermost redex first,
        ``'innermost'`` normalizes subterms before their parent.
    step_budget : int | None
        Maximum number of rewrites; by default proportional to the term
        size times the maximum rank.
    %(verbose)s

    Returns
    -------
    t : Term
        The annotated normal form, of the same type as the input.

    Notes
    -----
    The value is preserved when every index consumed by a rewrite is in
    range. Indexing through ``replicate`` drops the index, and indexing
    through a gather (or fusing two gathers) composes index functions, so
    an out-of-range index that would read 0 may land inside the source
    array after rewriting.
    """
    if strategy not in ('outermost', 'innermost'):
        raise ValueError(f'strategy must be "outermost" or "innermost", got '
                         f'"{strategy}"')
    t = check(t, env)
    if step_budget is None:
        step_budget = 1000 + 100 * term_size(t) * (MAX_RANK + 1)
    names = NameGen(all_names(t) | set(env))
    rewriter = _Rewriter(names, strategy, step_budget)
    out = rewriter.normalize(t, dict(env))
    if simplify:
        out = rewriter.normalize(rewriter.simplify(out, dict(env)),
                                 dict(env))
    out = check(out, env)
    if out.type != t.type:
        raise RuntimeError(f'Rewriting changed the type from {t.type} to '
                           f'{out.type}')
    logger.info(f'Normalized a term of size {term_size(t)} in '
                f'{rewriter.steps} rewrites')
    logger.debug(f'Rules used: {dict(rewriter.rules)}')
    return out


@dataclass
class NormalFormReport:
    """Result of :func:`check_normal_form`.

    Attributes
    ----------
    n_build1 : int
        Number of ``build1`` nodes found.
    heads : collections.Counter
        Allowed ``index`` occurrences by head: ``'variable'``,
        ``'constant'``, ``'ravel'`` or ``'scatter'``.
    violations : list of str
        Description of each offending node.
    """

    n_build1: int = 0
    heads: Counter = field(default_factory=Counter)
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        """Whether the term is in normal form."""
        return self.n_build1 == 0 and not self.violations


def check_normal_form(t):
    """Report whether ``t`` is in bulk-operation normal form.

    Parameters
    ----------
    t : Term
        Any term.

    Returns
    -------
    report : NormalFormReport
        The classification of every ``build1`` and ``index`` node.
    """
    from bulk_ad.syntax import print_term

    report = NormalFormReport()
    for node in iter_terms(t):
        if isinstance(node, Build1):
            report.n_build1 += 1
            report.violations.append(f'build1: {print_term(node)[:60]}')
        elif isinstance(node, Index):
            a, n = node.array, len(node.ix)
            if isinstance(a, Var) and n >= 1:
                report.heads['variable'] += 1
            elif isinstance(a, Const) and n >= 1:
                report.heads['constant'] += 1
            elif isinstance(a, Ravel) and n == 1:
                report.heads['ravel'] += 1
            elif isinstance(a, Scatter) and n >= 1:
                report.heads['scatter'] += 1
            else:
                report.violations.append(
                    f'index of {type(a).__name__} with {n} components: '
                    f'{print_term(node)[:60]}')
    return report
