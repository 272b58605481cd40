"""Reverse pass: transpose a Delta against a cotangent.

Shared fragments are queued by id and processed once, highest id first,
after all their cotangent contributions have been summed.
"""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
import heapq
from collections import Counter
from dataclasses import dataclass, field, replace

from mne.utils import logger, verbose

from bulk_ad.bot import normalize
from bulk_ad.carrier import ConcreteCarrier
from bulk_ad.config import REAL_KIND
from bulk_ad.delta import (Zero, Input, Add, Scale, ShareD, IndexD,
                           SumOuterD, GatherD, ScatterD, LitArray, ReplicateD,
                           TransposeD, ReshapeD, DVarName)
from bulk_ad.dual import dualize
from bulk_ad.ir import check_program
from bulk_ad.tensor import ConcreteArray, inverse_permutation


@dataclass
class ReverseStats:
    """Instrumentation of one reverse pass.

    Attributes
    ----------
    visits : int
        Number of Delta nodes evaluated.
    dequeued : list of int
        Share ids in the order their fragments were processed.
    node_counts : collections.Counter
        Visits per Delta node class.
    """

    visits: int = 0
    dequeued: list = field(default_factory=list)
    node_counts: Counter = field(default_factory=Counter)


@dataclass
class EState:
    """State threaded through the reverse pass.

    Attributes
    ----------
    grad : dict
        Cotangent accumulated for each input, keyed by :class:`DVarName`.
    dfrag : dict
        Pending shared fragment per share id.
    accum : dict
        Cotangent accumulated so far per pending share id.
    """

    grad: dict = field(default_factory=dict)
    dfrag: dict = field(default_factory=dict)
    accum: dict = field(default_factory=dict)
    _queue: list = field(default_factory=list, repr=False)
    _done: set = field(default_factory=set, repr=False)


class _ReversePass:

    def __init__(self, carrier, stats):
        self.carrier = carrier
        self.stats = stats

    def eval4(self, c, d, s):
        """Add the contributions of cotangent ``c`` on ``d`` into ``s``."""
        cr = self.carrier
        self.stats.visits += 1
        self.stats.node_counts[type(d).__name__] += 1
        shape = cr.shape_of(c)
        if shape is not None and tuple(shape) != d.shape:
            raise RuntimeError(f'Cotangent of shape {list(shape)} for a '
                               f'{type(d).__name__} of shape '
                               f'{list(d.shape)}')
        if isinstance(d, Zero):
            return s
        elif isinstance(d, Input):
            if d.var in s.grad:
                s.grad[d.var] = cr.add(c, s.grad[d.var])
            else:
                s.grad[d.var] = c
            return s
        elif isinstance(d, Add):
            c = cr.share_cotangent(c)
            return self.eval4(c, d.right, self.eval4(c, d.left, s))
        elif isinstance(d, Scale):
            return self.eval4(cr.mul(d.factor, c), d.d, s)
        elif isinstance(d, ShareD):
            key = d.id.id
            if key in s._done:
                raise RuntimeError(f'Share {d.id} reached after its fragment '
                                   f'was processed')
            if key in s.dfrag:
                if s.dfrag[key] is not d.d:
                    raise RuntimeError(f'Share id {d.id} wraps two different '
                                       f'fragments')
                s.accum[key] = cr.add(c, s.accum[key])
            else:
                s.dfrag[key] = d.d
                s.accum[key] = c
                heapq.heappush(s._queue, -key)
            return s
        elif isinstance(d, IndexD):
            return self.eval4(cr.one_hot(d.d.shape, d.ix, c), d.d, s)
        elif isinstance(d, SumOuterD):
            return self.eval4(cr.replicate(d.d.shape[0], c), d.d, s)
        elif isinstance(d, GatherD):
            return self.eval4(cr.scatter(d.d.shape, c, d.fn), d.d, s)
        elif isinstance(d, ScatterD):
            return self.eval4(cr.gather(d.d.shape, c, d.fn), d.d, s)
        elif isinstance(d, LitArray):
            c = cr.share_cotangent(c)
            # the last slice is evaluated first
            for j in reversed(range(len(d.parts))):
                s = self.eval4(cr.index_const(c, j), d.parts[j], s)
            return s
        elif isinstance(d, ReplicateD):
            return self.eval4(cr.sum_outer(c), d.d, s)
        elif isinstance(d, TransposeD):
            perm = inverse_permutation(d.perm)
            return self.eval4(cr.transpose(perm, c), d.d, s)
        elif isinstance(d, ReshapeD):
            return self.eval4(cr.reshape(d.d.shape, c), d.d, s)
        raise TypeError(f'Not a Delta: {d!r}')

    def backprop(self, s):
        """Process pending fragments in decreasing id order."""
        while s._queue:
            key = -heapq.heappop(s._queue)
            try:
                d = s.dfrag.pop(key)
                c = s.accum.pop(key)
            except KeyError:
                raise RuntimeError(f'No fragment recorded for share {key}')
            s._done.add(key)
            self.stats.dequeued.append(key)
            s = self.eval4(c, d, s)
        if s.dfrag or s.accum:
            raise RuntimeError(f'Fragments left unprocessed: '
                               f'{sorted(s.dfrag)}')
        return s


def eval4(c, d, s, carrier, stats=None):
    """Evaluate one Delta node of the reverse pass.

    Parameters
    ----------
    c : ConcreteArray | Term
        The cotangent, of the shape of ``d``.
    d : Delta
        The Delta to transpose.
    s : EState
        The state to update.
    carrier : ConcreteCarrier | SymbolicCarrier
        The carrier ``c`` and the payloads of ``d`` belong to.
    stats : ReverseStats | None
        Instrumentation to update.

    Returns
    -------
    s : EState
        The updated state.
    """
    stats = ReverseStats() if stats is None else stats
    return _ReversePass(carrier, stats).eval4(c, d, s)


def backprop(s, carrier, stats=None):
    """Drain the pending shared fragments of ``s``."""
    stats = ReverseStats() if stats is None else stats
    return _ReversePass(carrier, stats).backprop(s)


def reverse_pass(c, d, carrier=None, stats=None):
    """Transpose ``d`` against the cotangent ``c``.

    Parameters
    ----------
    c : ConcreteArray | Term
        The cotangent of the traced value.
    d : Delta
        The trace.
    carrier : ConcreteCarrier | SymbolicCarrier | None
        Defaults to a concrete carrier.
    stats : ReverseStats | None
        If given, filled with visit counts and the dequeue order.

    Returns
    -------
    grad : dict
        Map from :class:`~bulk_ad.delta.DVarName` to its cotangent. Inputs
        that do not occur have a zero gradient and no entry.
    """
    carrier = ConcreteCarrier({}) if carrier is None else carrier
    stats = ReverseStats() if stats is None else stats
    rp = _ReversePass(carrier, stats)
    s = rp.backprop(rp.eval4(c, d, EState()))
    logger.debug(f'Reverse pass visited {stats.visits} nodes and '
                 f'{len(stats.dequeued)} shared fragments')
    return s.grad


@verbose
def grad_concrete(program, inputs, ctg=None, simplify=False, stats=None,
                  verbose=None):
    """Gradient of a scalar program at concrete inputs.

    Parameters
    ----------
    program : Program
        The program; its body is normalized before differentiation.
    inputs : dict
        Map from parameter name to :class:`~bulk_ad.tensor.ConcreteArray`.
    ctg : ConcreteArray | float | None
        Cotangent of the result; defaults to 1.
    simplify : bool
        Passed on to :func:`~bulk_ad.bot.normalize`.
    stats : ReverseStats | None
        Filled with instrumentation of the reverse pass.
    %(verbose)s

    Returns
    -------
    grads : dict
        Map from each real-kind parameter name to its gradient, zero for
        parameters the result does not depend on.
    """
    program = check_program(program)
    missing = [name for name, _ in program.params if name not in inputs]
    if missing:
        raise ValueError(f'No value given for parameter(s) {missing}')
    if ctg is None:
        ctg = 1.
    if not isinstance(ctg, ConcreteArray):
        ctg = ConcreteArray.scalar(float(ctg), REAL_KIND)
    body = normalize(program.body, program.env, simplify=simplify)
    program = replace(program, body=body)
    carrier = ConcreteCarrier(inputs)
    dual = dualize(program, carrier)
    grad = reverse_pass(ctg, dual.delta, carrier, stats)
    grads = {}
    for k, name in enumerate(program.real_params, 1):
        shape = program.env[name].shape
        grads[name] = grad.get(DVarName(k, tuple(shape)),
                               ConcreteArray.zeros(shape))
    return grads
