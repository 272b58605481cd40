"""Compile-time differentiation: emitting a gradient program.

The dual transform and the reverse pass run on the symbolic carrier, which
yields the primal and every gradient as terms with global sharing. Shares
are then converted to a stack of let bindings in id order.
"""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
from dataclasses import dataclass, replace

from mne.utils import logger, verbose

from bulk_ad.bot import normalize
from bulk_ad.carrier import SymbolicCarrier
from bulk_ad.config import COTANGENT_NAME, SHARED_NAME_PREFIX
from bulk_ad.delta import DVarName, IdGen
from bulk_ad.dual import dualize
from bulk_ad.interp import eval_term
from bulk_ad.ir import (Const, Var, Let, Index, Gather, Scatter, Build1,
                        Share, Tuple, IxFn, Program, NameGen, SCALAR_REAL,
                        all_names, check, check_program,
                        map_children, term_size)
from bulk_ad.reverse import reverse_pass
from bulk_ad.tensor import ConcreteArray


class MalformedTermError(ValueError):
    """A term outside the language produced by the reverse pass."""


def sym_reverse_pass(c, d, carrier, stats=None):
    """Run the reverse pass with cotangents built as terms.

    Parameters
    ----------
    c : Term
        The cotangent, a variable reference or a constant.
    d : Delta
        A symbolic Delta from :func:`~bulk_ad.dual.dualize`.
    carrier : SymbolicCarrier
        Its id counter must be the one that numbered ``d``, so that the
        cotangent shares get larger ids than everything they refer to.
    stats : ReverseStats | None
        Filled with instrumentation.

    Returns
    -------
    grad : dict
        Map from :class:`~bulk_ad.delta.DVarName` to its gradient term.
    """
    if not isinstance(c, (Var, Const)):
        raise ValueError(f'The cotangent must be a variable or a constant, '
                         f'got {type(c).__name__}')
    return reverse_pass(c, d, carrier, stats)


class _Unsharer:

    def __init__(self, m, names):
        self.m = m
        self.names = names

    def bind(self, t, walk):
        if t.id not in self.m:
            body = walk(t.body)
            name = self.names.claim(f'{SHARED_NAME_PREFIX}{t.id}')
            self.m[t.id] = (name, body)
        return Var(self.m[t.id][0])

    def spine(self, t):
        if isinstance(t, Share):
            return self.bind(t, self.spine)
        elif isinstance(t, (Let, Build1)):
            raise MalformedTermError(f'Cannot unshare a term containing '
                                     f'{type(t).__name__.lower()}')
        elif isinstance(t, Index):
            return replace(t, array=self.spine(t.array),
                           ix=tuple(self.payload(c) for c in t.ix))
        elif isinstance(t, (Gather, Scatter)):
            body = tuple(self.payload(c) for c in t.fn.body)
            return replace(t, array=self.spine(t.array),
                           fn=IxFn(t.fn.params, body))
        return map_children(t, self.spine)

    def payload(self, t):
        # integer code: local lets are fine, shares are still hoisted
        if isinstance(t, Share):
            # a shared index component keeps its local lets
            return self.bind(t, self.payload)
        elif isinstance(t, Build1):
            raise MalformedTermError('Cannot unshare a term containing '
                                     'build1')
        return map_children(t, self.payload)


def unshare(m, t, names=None):
    """Replace every Share in ``t`` by a reference to a named binding.

    Parameters
    ----------
    m : dict
        Map from share id to ``(name, body)``; updated in place.
    t : Term
        A term built from the reverse-pass operations.
    names : NameGen | None
        Source of the binding names; defaults to one avoiding the names
        used in ``t``.

    Returns
    -------
    m : dict
        The updated map; each body is itself Share-free.
    t : Term
        ``t`` with Shares replaced by variables.

    Raises
    ------
    MalformedTermError
        If ``t`` contains ``build1``, or ``let`` outside index payloads.
    """
    if names is None:
        names = NameGen(all_names(t) | {name for name, _ in m.values()})
    return m, _Unsharer(m, names).spine(t)


def stack_lets(m, t):
    """Bind the entries of ``m`` around ``t``, lowest id outermost."""
    for key in sorted(m, reverse=True):
        name, body = m[key]
        t = Let(name, body, t)
    return t


def share_to_let(t, names=None):
    """Turn the global sharing of ``t`` into let bindings."""
    m, t = unshare({}, t, names)
    return stack_lets(m, t)


@dataclass(frozen=True)
class GradientProgram(Program):
    """A program computing the primal result and all gradients.

    Its body has type ``(primal, (grad_1, ..., grad_n))``; the parameters
    are those of the source program followed by the cotangent.

    Attributes
    ----------
    grad_params : tuple of str
        The real-kind parameters, in the order of the gradient tuple.
    cotangent : str
        Name of the cotangent parameter.
    """

    grad_params: tuple = ()
    cotangent: str = COTANGENT_NAME

    def evaluate(self, inputs, ctg=1.):
        """Evaluate at ``inputs`` and cotangent ``ctg``.

        Returns
        -------
        primal : ConcreteArray
            The value of the source program.
        grads : dict
            Map from parameter name to its gradient.
        """
        if not isinstance(ctg, ConcreteArray):
            ctg = ConcreteArray.scalar(float(ctg), 'f64')
        env = {**inputs, self.cotangent: ctg}
        primal, grads = eval_term(self.body, env)
        return primal, dict(zip(self.grad_params, grads))


@verbose
def build_gradient_program(program, simplify=False, verbose=None):
    """Differentiate a scalar program once, for all inputs.

    Parameters
    ----------
    program : Program
        A checked program with a rank-0 real result.
    simplify : bool
        Passed on to :func:`~bulk_ad.bot.normalize`.
    %(verbose)s

    Returns
    -------
    grad_program : GradientProgram
        A Share-free program of the parameters and the cotangent.
    """
    program = check_program(program)
    body = normalize(program.body, program.env, simplify=simplify)
    normal = replace(program, body=body)

    names = NameGen(all_names(body) | set(program.env))
    cotangent = names.claim(COTANGENT_NAME)
    idgen = IdGen()
    carrier = SymbolicCarrier(idgen, names)
    dual = dualize(normal, carrier, idgen)
    grad = sym_reverse_pass(Var(cotangent), dual.delta, carrier)

    grads = []
    for k, name in enumerate(program.real_params, 1):
        shape = tuple(program.env[name].shape)
        grads.append(grad.get(DVarName(k, shape), carrier.zeros(shape)))
    result = Tuple((dual.primal, Tuple(tuple(grads))))
    m, result = unshare({}, result, names)
    n_shares = len(m)
    result = stack_lets(m, result)

    params = tuple(program.params) + ((cotangent, SCALAR_REAL),)
    out = GradientProgram(params, check(result, dict(params)),
                          grad_params=program.real_params,
                          cotangent=cotangent)
    logger.info(f'Gradient program: {n_shares} shares hoisted, '
                f'{term_size(out.body)} nodes')
    return out
