"""Forward dual transform: a term becomes a primal value and its Delta.

The same interpretation runs on both carriers. With the concrete carrier
it computes the primal value and a concrete trace; with the symbolic one
it emits the primal as a term with global sharing and a symbolic trace
whose scale factors are shared references into it.
"""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
from dataclasses import dataclass

from mne.utils import logger, verbose

from bulk_ad.config import REAL_KIND
from bulk_ad.delta import (Zero, Input, Add, Scale, ShareD, IndexD,
                           SumOuterD, GatherD, ScatterD, LitArray, ReplicateD,
                           TransposeD, ReshapeD, DVarName, IdGen,
                           fresh_delta_id, count_delta_nodes)
from bulk_ad.ir import (Const, Var, Let, Cond, PrimOp, Index, SumOuter,
                        Gather, Scatter, Ravel, Replicate, Transpose, Reshape,
                        Build1, SCALAR_REAL, check, iter_terms)


class NonScalarOutputError(ValueError):
    """The differentiated term does not have a rank-0 real result."""


class ContainsBuild1Error(ValueError):
    """The term still contains ``build1``; run the bulk transform first."""


@dataclass(frozen=True)
class DualValue:
    """A primal value with the Delta of its derivative.

    ``delta`` is None for integer and boolean values.
    """

    primal: object
    delta: object = None


def input_duals(program, carrier):
    """Dual values of the program parameters.

    Real-kind parameters get ``Input`` Deltas numbered 1..n in declaration
    order; the others get none.
    """
    duals, k = {}, 0
    for name, typ in program.params:
        delta = None
        if typ.kind == REAL_KIND:
            k += 1
            delta = Input(DVarName(k, tuple(typ.shape)))
        duals[name] = DualValue(carrier.param(name), delta)
    return duals


def _all_zero(*deltas):
    return all(isinstance(d, Zero) for d in deltas)


class _Dualizer:

    def __init__(self, carrier, idgen):
        self.carrier = carrier
        self.idgen = idgen

    def shared(self, d):
        return ShareD(fresh_delta_id(self.idgen, d.shape), d)

    def primals(self, env):
        return {name: dv.primal for name, dv in env.items()}

    def __call__(self, t, env):
        cr = self.carrier
        real = t.type.kind == REAL_KIND
        shape = t.type.shape
        if isinstance(t, Const):
            return DualValue(cr.constant(t.value),
                             Zero(shape) if real else None)
        elif isinstance(t, Var):
            return env[t.name]
        elif isinstance(t, Let):
            bound = self(t.bound, env)
            bound = DualValue(cr.share(bound.primal), bound.delta)
            return self(t.body, {**env, t.name: bound})
        elif isinstance(t, Cond):
            return self._cond(t, env)
        elif isinstance(t, PrimOp):
            return self._prim(t, env)
        elif isinstance(t, Index):
            a = self(t.array, env)
            ix = cr.index_payload(t.ix, self.primals(env))
            return self._unary(cr.index(a.primal, ix), a.delta,
                               lambda d: IndexD(d, ix), shape)
        elif isinstance(t, SumOuter):
            a = self(t.array, env)
            return self._unary(cr.sum_outer(a.primal), a.delta, SumOuterD,
                               shape)
        elif isinstance(t, (Gather, Scatter)):
            a = self(t.array, env)
            fn = cr.index_fn(t.fn, self.primals(env))
            if isinstance(t, Gather):
                primal = cr.gather(t.shape, a.primal, fn)
                node = GatherD
            else:
                primal = cr.scatter(t.shape, a.primal, fn)
                node = ScatterD
            return self._unary(primal, a.delta,
                               lambda d: node(d, fn, shape), shape)
        elif isinstance(t, Ravel):
            parts = [self(p, env) for p in t.parts]
            primal = cr.ravel([p.primal for p in parts])
            if not real:
                return DualValue(primal)
            deltas = [p.delta for p in parts]
            if _all_zero(*deltas):
                return DualValue(primal, Zero(shape))
            return DualValue(primal, self.shared(LitArray(deltas)))
        elif isinstance(t, Replicate):
            a = self(t.array, env)
            return self._unary(cr.replicate(t.count, a.primal), a.delta,
                               lambda d: ReplicateD(t.count, d), shape)
        elif isinstance(t, Transpose):
            a = self(t.array, env)
            return self._unary(cr.transpose(t.perm, a.primal), a.delta,
                               lambda d: TransposeD(t.perm, d), shape)
        elif isinstance(t, Reshape):
            a = self(t.array, env)
            return self._unary(cr.reshape(t.shape, a.primal), a.delta,
                               lambda d: ReshapeD(t.shape, d), shape)
        raise ValueError(f'Cannot differentiate a {type(t).__name__} node')

    def _unary(self, primal, delta, make, shape):
        if delta is None:
            return DualValue(primal)
        if isinstance(delta, Zero):
            return DualValue(primal, Zero(shape))
        return DualValue(primal, self.shared(make(delta)))

    def _cond(self, t, env):
        cr = self.carrier
        b = self(t.scrutinee, env)
        u = self(t.then, env)
        v = self(t.orelse, env)
        if u.delta is None or _all_zero(u.delta, v.delta):
            primal = cr.cond(b.primal, u.primal, v.primal)
            return DualValue(primal, None if u.delta is None
                             else Zero(t.type.shape))
        scrutinee = cr.share(b.primal)
        primal = cr.cond(scrutinee, u.primal, v.primal)
        # the branches' Deltas are stacked and the live one indexed out
        both = self.shared(LitArray([u.delta, v.delta]))
        pick = cr.cond_index(scrutinee)
        return DualValue(primal, self.shared(IndexD(both, (pick,))))

    def _prim(self, t, env):
        cr = self.carrier
        args = [self(a, env) for a in t.args]
        shape = t.type.shape
        if t.type.kind != REAL_KIND:
            return DualValue(cr.prim(t.op, [a.primal for a in args]))
        deltas = [a.delta for a in args]
        if any(d is None for d in deltas) or _all_zero(*deltas):
            # toreal of an integer, or a constant expression
            return DualValue(cr.prim(t.op, [a.primal for a in args]),
                             Zero(shape))
        op = t.op
        if op in ('+', '-'):
            d1, d2 = deltas
            primal = cr.prim(op, [a.primal for a in args])
            if op == '-':
                d2 = Scale(cr.share_factor(cr.full(shape, -1.)), d2)
            return DualValue(primal, self.shared(Add(d1, d2)))
        xs = [cr.share(a.primal) for a in args]
        if op == '*':
            d1, d2 = deltas
            primal = cr.prim('*', xs)
            delta = Add(Scale(cr.share_factor(xs[1]), d1),
                        Scale(cr.share_factor(xs[0]), d2))
        elif op == 'div':
            d1, d2 = deltas
            primal = cr.prim('div', xs)
            inv = cr.share(cr.prim('div', [cr.full(shape, 1.), xs[1]]))
            slope = cr.share(cr.prim('neg', [cr.prim('*', [xs[0], cr.prim(
                '*', [inv, inv])])]))
            delta = Add(Scale(inv, d1), Scale(slope, d2))
        elif op in ('max', 'min'):
            d1, d2 = deltas
            primal = cr.prim(op, xs)
            test = '>=' if op == 'max' else '<='
            first = cr.share(cr.prim('toreal', [cr.prim(test, xs)]))
            second = cr.share(cr.prim('-', [cr.full(shape, 1.), first]))
            delta = Add(Scale(first, d1), Scale(second, d2))
        else:
            (x,), (d,) = xs, deltas
            primal, factor = self._unary_rule(op, x, shape)
            if factor is None:
                return DualValue(primal, Zero(shape))
            delta = Scale(cr.share_factor(factor), d)
        return DualValue(primal, self.shared(delta))

    def _unary_rule(self, op, x, shape):
        """Return the primal of ``op x`` and the shared derivative factor."""
        cr = self.carrier
        if op == 'neg':
            return cr.prim('neg', [x]), cr.full(shape, -1.)
        elif op in ('sign', 'toreal'):
            return cr.prim(op, [x]), None
        elif op == 'abs':
            return cr.prim('abs', [x]), cr.share(cr.prim('sign', [x]))
        elif op in ('exp', 'tanh', 'sqrt'):
            y = cr.share(cr.prim(op, [x]))
            if op == 'exp':
                factor = y
            elif op == 'tanh':
                factor = cr.prim('-', [cr.full(shape, 1.),
                                       cr.prim('*', [y, y])])
            else:
                factor = cr.prim('div', [cr.full(shape, .5), y])
            return y, cr.share(factor)
        elif op == 'log':
            factor = cr.prim('div', [cr.full(shape, 1.), x])
            return cr.prim('log', [x]), cr.share(factor)
        elif op == 'sin':
            return cr.prim('sin', [x]), cr.share(cr.prim('cos', [x]))
        elif op == 'cos':
            return cr.prim('cos', [x]), cr.share(
                cr.prim('neg', [cr.prim('sin', [x])]))
        raise ValueError(f'No derivative rule for "{op}"')


@verbose
def dualize(program, carrier, idgen=None, verbose=None):
    """Run the dual transform over a bulk-normal program.

    Parameters
    ----------
    program : Program
        A checked program whose body contains no ``build1`` and has a
        rank-0 real result.
    carrier : ConcreteCarrier | SymbolicCarrier
        What the primal values and Delta payloads are made of.
    idgen : IdGen | None
        Counter for Delta ids; defaults to the carrier's own counter (the
        symbolic carrier) or a fresh one.
    %(verbose)s

    Returns
    -------
    dual : DualValue
        The primal result and its Delta over the inputs ``1..n``.

    Raises
    ------
    ContainsBuild1Error
        If ``build1`` occurs in the body.
    NonScalarOutputError
        If the result is not a rank-0 real.
    """
    body = check(program.body, program.env)
    if body.type != SCALAR_REAL:
        raise NonScalarOutputError(f'Can only differentiate a rank-0 '
                                   f'{REAL_KIND} result, got {body.type}')
    if any(isinstance(node, Build1) for node in iter_terms(body)):
        raise ContainsBuild1Error('The term contains build1; normalize it '
                                  'first')
    if idgen is None:
        idgen = getattr(carrier, 'idgen', None) or IdGen()
    dual = _Dualizer(carrier, idgen)(body, input_duals(program, carrier))
    logger.info(f'Dual transform recorded {count_delta_nodes(dual.delta)} '
                f'Delta nodes with ids up to {idgen.last}')
    return dual
