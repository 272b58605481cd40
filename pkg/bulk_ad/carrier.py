"""Carriers: what dual arrays and cotangents are made of.

The dual transform and the reverse pass are written once against the
interface below. :class:`ConcreteCarrier` computes with arrays as it goes;
:class:`SymbolicCarrier` builds terms of the core language instead, so the
same code emits a gradient program.
"""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
from bulk_ad import tensor
from bulk_ad.interp import eval_term, make_index_fn
from bulk_ad.ir import (Const, Var, Cond, PrimOp, Index, SumOuter, Gather,
                        Scatter, Ravel, Replicate, Transpose, Reshape, Share,
                        IxFn, NameGen, const, free_vars, substitute)
from bulk_ad.tensor import ConcreteArray


class ConcreteCarrier:
    """Arrays and index functions evaluated eagerly.

    Parameters
    ----------
    inputs : dict
        Map from parameter name to :class:`~bulk_ad.tensor.ConcreteArray`.
    """

    symbolic = False

    def __init__(self, inputs):
        self.inputs = dict(inputs)

    # -- primal values -----------------------------------------------------

    def param(self, name):
        return self.inputs[name]

    def constant(self, value):
        return value

    def share(self, value):
        return value

    def share_factor(self, value):
        return value

    def prim(self, op, args):
        return tensor.map_op(op, args)

    def cond(self, b, then, orelse):
        return then if b.item() else orelse

    def index(self, a, ix):
        return tensor.index(a, ix)

    def sum_outer(self, a):
        return tensor.sum_outer(a)

    def gather(self, shape, a, fn):
        return tensor.gather(shape, a, fn)

    def scatter(self, shape, a, fn):
        return tensor.scatter(shape, a, fn)

    def ravel(self, parts):
        return tensor.from_subarrays(parts)

    def replicate(self, count, a):
        return tensor.replicate(count, a)

    def transpose(self, perm, a):
        return tensor.transpose(perm, a)

    def reshape(self, shape, a):
        return tensor.reshape(shape, a)

    def zeros(self, shape):
        return ConcreteArray.zeros(shape)

    def full(self, shape, value):
        return ConcreteArray.full(shape, value)

    def shape_of(self, value):
        return value.shape

    # -- payloads ----------------------------------------------------------

    def index_payload(self, ix, env):
        """Evaluate index components to ints."""
        return tuple(eval_term(c, env).item() for c in ix)

    def index_fn(self, fn, env):
        return make_index_fn(fn, env)

    def cond_index(self, b):
        """Position of the selected branch in ``ravel(then, else)``."""
        return 0 if b.item() else 1

    # -- cotangents --------------------------------------------------------

    def share_cotangent(self, c):
        return c

    def add(self, a, b):
        return tensor.map_op('+', [a, b])

    def mul(self, factor, c):
        return tensor.map_op('*', [factor, c])

    def one_hot(self, shape, ix, c):
        return tensor.one_hot(shape, ix, c)

    def index_const(self, c, j):
        return tensor.index(c, (j,))

    def format(self, payload):
        if isinstance(payload, tuple):
            return ' '.join(str(int(i)) for i in payload)
        return repr(payload)


class SymbolicCarrier:
    """Terms of the core language, with sharing made explicit.

    Parameters
    ----------
    idgen : bulk_ad.delta.IdGen
        Counter for share ids; the same counter issues Delta ids.
    names : bulk_ad.ir.NameGen | None
        Source of fresh names for index-function binders.
    """

    symbolic = True

    def __init__(self, idgen, names=None):
        self.idgen = idgen
        self.names = NameGen() if names is None else names

    def param(self, name):
        return Var(name)

    def constant(self, value):
        return Const(value)

    def share(self, t):
        """Wrap ``t`` in a fresh Share unless it is already a reference."""
        if isinstance(t, (Var, Share, Const)):
            return t
        return Share(self.idgen.fresh(), t)

    def share_factor(self, t):
        """Like :meth:`share`, but constants are bound too.

        Scale factors in a symbolic trace are always references.
        """
        if isinstance(t, (Var, Share)):
            return t
        return Share(self.idgen.fresh(), t)

    def prim(self, op, args):
        return PrimOp(op, tuple(args))

    def cond(self, b, then, orelse):
        return Cond(b, then, orelse)

    def index(self, a, ix):
        return Index(a, tuple(ix))

    def sum_outer(self, a):
        return SumOuter(a)

    def gather(self, shape, a, fn):
        return Gather(tuple(shape), a, fn)

    def scatter(self, shape, a, fn):
        return Scatter(tuple(shape), a, fn)

    def ravel(self, parts):
        return Ravel(tuple(parts))

    def replicate(self, count, a):
        return Replicate(int(count), a)

    def transpose(self, perm, a):
        return Transpose(tuple(perm), a)

    def reshape(self, shape, a):
        return Reshape(tuple(shape), a)

    def zeros(self, shape):
        return Const(ConcreteArray.zeros(shape))

    def full(self, shape, value):
        return Const(ConcreteArray.full(shape, value))

    def shape_of(self, value):
        return None

    def _mapping(self, env, terms):
        fvs = set()
        for t in terms:
            fvs |= free_vars(t)
        return {name: env[name] for name in fvs if name in env}

    def index_payload(self, ix, env):
        """Substitute primal terms into the components and share each."""
        mapping = self._mapping(env, ix)
        return tuple(self.share(substitute(c, mapping, self.names))
                     for c in ix)

    def index_fn(self, fn, env):
        """Substitute primal terms into an index function body."""
        mapping = self._mapping(env, fn.body)
        mapping = {k: v for k, v in mapping.items() if k not in fn.params}
        avoid = set()
        for value in mapping.values():
            avoid |= free_vars(value)
        params, body = list(fn.params), fn.body
        for j, p in enumerate(params):
            if p in avoid:
                new = self.names.fresh(p)
                body = tuple(substitute(c, {p: Var(new)}, self.names)
                             for c in body)
                params[j] = new
        return IxFn(tuple(params),
                    tuple(substitute(c, mapping, self.names) for c in body))

    def cond_index(self, b):
        return self.share(Cond(b, const(0), const(1)))

    def share_cotangent(self, c):
        return self.share(c)

    def add(self, a, b):
        return PrimOp('+', (a, b))

    def mul(self, factor, c):
        return PrimOp('*', (factor, c))

    def one_hot(self, shape, ix, c):
        """Zeros of ``shape`` with ``c`` at ``ix``, as a gather."""
        ix = tuple(ix)
        if not ix:
            return c
        shape = tuple(shape)
        residual = shape[len(ix):]
        js = tuple(self.names.fresh('j') for _ in ix)
        hit = None
        for j, i in zip(js, ix):
            test = PrimOp('==', (Var(j), i))
            hit = test if hit is None else PrimOp('and', (hit, test))
        source = Ravel((Const(ConcreteArray.zeros(residual)), c))
        pick = Cond(hit, const(1), const(0))
        return Gather(shape, source, IxFn(js, (pick,)))

    def index_const(self, c, j):
        return Index(c, (const(j),))

    def format(self, payload):
        from bulk_ad.syntax import print_term
        if isinstance(payload, IxFn):
            params = ' '.join(payload.params)
            body = ' '.join(print_term(c) for c in payload.body)
            return f'(lam [{params}] [{body}])'
        elif isinstance(payload, tuple):
            return ' '.join(print_term(c) for c in payload)
        return print_term(payload)
