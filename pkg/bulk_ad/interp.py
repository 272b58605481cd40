"""Reference evaluation of core-language terms on concrete arrays."""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
from collections import Counter

from bulk_ad.ir import (Const, Var, Let, Cond, PrimOp, Index, SumOuter,
                        Gather, Scatter, Ravel, Replicate, Transpose, Reshape,
                        Build1, Share, Tuple, ArrayType, check)
from bulk_ad.tensor import (ConcreteArray, IndexFn, index, gather, scatter,
                            sum_outer, replicate, transpose, reshape,
                            from_subarrays, map_op)


def _int_scalar(i):
    return ConcreteArray.scalar(int(i), 'i64')


class _Evaluator:
    """Call-by-value evaluator; memoises Share bodies by id if asked."""

    def __init__(self, memo=False):
        self.memo = {} if memo else None
        self.counts = Counter()

    def index_fn(self, fn, env):
        """Turn an :class:`~bulk_ad.ir.IxFn` into a tensor index function."""
        def apply(idx):
            local = dict(env)
            local.update(zip(fn.params, (_int_scalar(i) for i in idx)))
            return [self(c, local).item() for c in fn.body]
        return IndexFn(len(fn.params), len(fn.body), apply)

    def __call__(self, t, env):
        if isinstance(t, Const):
            return t.value
        elif isinstance(t, Var):
            try:
                return env[t.name]
            except KeyError:
                raise ValueError(f'No value for variable "{t.name}"')
        elif isinstance(t, Let):
            return self(t.body, {**env, t.name: self(t.bound, env)})
        elif isinstance(t, Cond):
            # strict: all three arguments are evaluated
            b = self(t.scrutinee, env)
            then = self(t.then, env)
            orelse = self(t.orelse, env)
            return then if b.item() else orelse
        elif isinstance(t, PrimOp):
            return map_op(t.op, [self(a, env) for a in t.args])
        elif isinstance(t, Index):
            a = self(t.array, env)
            return index(a, [self(c, env).item() for c in t.ix])
        elif isinstance(t, SumOuter):
            return sum_outer(self(t.array, env))
        elif isinstance(t, Gather):
            return gather(t.shape, self(t.array, env),
                          self.index_fn(t.fn, env))
        elif isinstance(t, Scatter):
            return scatter(t.shape, self(t.array, env),
                           self.index_fn(t.fn, env))
        elif isinstance(t, Ravel):
            return from_subarrays([self(p, env) for p in t.parts])
        elif isinstance(t, Replicate):
            return replicate(t.count, self(t.array, env))
        elif isinstance(t, Transpose):
            return transpose(t.perm, self(t.array, env))
        elif isinstance(t, Reshape):
            return reshape(t.shape, self(t.array, env))
        elif isinstance(t, Build1):
            return self._build1(t, env)
        elif isinstance(t, Share):
            if self.memo is None:
                return self(t.body, env)
            if t.id not in self.memo:
                self.counts[t.id] += 1
                self.memo[t.id] = self(t.body, env)
            return self.memo[t.id]
        elif isinstance(t, Tuple):
            return tuple(self(item, env) for item in t.items)
        raise TypeError(f'Not a term: {t!r}')

    def _build1(self, t, env):
        parts = [self(t.body, {**env, t.var: _int_scalar(i)})
                 for i in range(t.count)]
        if parts:
            return from_subarrays(parts)
        typ = t.type
        if typ is None:
            types = {name: ArrayType(v.shape, v.kind)
                     for name, v in env.items()
                     if isinstance(v, ConcreteArray)}
            typ = check(t, types, top=False).type
        return ConcreteArray.zeros(typ.shape, typ.kind)


def make_index_fn(fn, env):
    """Evaluate an index function under ``env`` (name -> ConcreteArray)."""
    return _Evaluator().index_fn(fn, env)


def eval_term(t, env):
    """Evaluate a term.

    Parameters
    ----------
    t : Term
        A checked term.
    env : dict
        Map from each free variable of ``t`` to a :class:`ConcreteArray`.

    Returns
    -------
    value : ConcreteArray | tuple
        The result; a (possibly nested) tuple of arrays for tuple terms.
    """
    return _Evaluator()(t, env)


def eval_memo(t, env):
    """Evaluate a term, evaluating each Share body at most once.

    Parameters
    ----------
    t : Term
        A checked term with no Let under a Share and no Share under a Let.
    env : dict
        Map from each free variable of ``t`` to a :class:`ConcreteArray`.

    Returns
    -------
    value : ConcreteArray | tuple
        Same as :func:`eval_term` on ``t`` with the Shares erased.
    counts : dict
        Number of times each share id's body was evaluated.
    """
    evaluator = _Evaluator(memo=True)
    value = evaluator(t, env)
    return value, dict(evaluator.counts)
