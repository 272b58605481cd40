"""Independent checks: finite differences, fixed and random programs.

Finite differences always run the reference interpreter on the original
term, so they share no code with the bulk transform or the dual transform.
"""
# Authors: bulk-ad developers
#
# License: BSD (3-clause)
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from mne.utils import logger, verbose, warn, _validate_type

from bulk_ad.bot import normalize, check_normal_form
from bulk_ad.config import (FD_STEP, GRADCHECK_TOL, GRADCHECK_ABS_FLOOR,
                            SELFTEST_ABS_FLOOR, SYMBOLIC_TOL, SEMANTIC_RTOL,
                            SEMANTIC_ATOL, MAX_DIM, MAX_RANK,
                            MAGNITUDE_LIMIT, DEFAULT_SIZE_BUDGET, INPUT_RANGE,
                            INPUT_MARGIN, REAL_KIND, INT_KIND, BOOL_KIND)
from bulk_ad.interp import eval_term
from bulk_ad.ir import (ArrayType, Program, Const, Var, Let, Cond, PrimOp,
                        Index, SumOuter, Gather, Scatter, Ravel, Replicate,
                        Transpose, Reshape, Build1, IxFn, SCALAR_INT,
                        SCALAR_REAL, NameGen, const, check_program,
                        count_shares, iter_terms)
from bulk_ad.reverse import grad_concrete
from bulk_ad.symbolic import build_gradient_program
from bulk_ad.syntax import parse_program
from bulk_ad.tensor import ConcreteArray
from bulk_ad.utils import _relative_error


# Fixed programs with a rank-0 real result, in surface syntax
GRADIENT_SUITE = {
    'dot': """
        (params (a f64 [3]) (b f64 [3]))
        (sumouter (build1 3 (lam i (op * (index a [i]) (index b [i])))))
    """,
    'matmat_sum': """
        (params (a f64 [2 3]) (b f64 [3 4]))
        (sumouter (sumouter
          (build1 2 (lam i (build1 4 (lam j
            (sumouter (build1 3 (lam k
              (op * (index a [i k]) (index b [k j])))))))))))
    """,
    'self_conv': """
        (params (a f64 [5]))
        (sumouter (build1 5 (lam i
          (op * (index a [i]) (index a [(op - (op - 5 1) i)])))))
    """,
    'relu_sum': """
        (params (x f64 [4]))
        (sumouter (build1 4 (lam i
          (cond (op > (index x [i]) 0.0) (index x [i]) 0.0))))
    """,
    'logsumexp': """
        (params (x f64 [4]))
        (op log (sumouter (build1 4 (lam i (op exp (index x [i]))))))
    """,
    'transpose_chain': """
        (params (a f64 [2 3]))
        (sumouter (sumouter
          (op * (tr [1 0] a) (tr [1 0] (op sin a)))))
    """,
    'reshape_chain': """
        (params (a f64 [2 3]))
        (let (r (reshape [6] a))
          (sumouter (build1 6 (lam i
            (op * (index r [i]) (index r [(op mod (op + i 1) 6)]))))))
    """,
    'scatter_histogram': """
        (params (w f64 [6]) (bins i64 [6]))
        (let (h (scatter [3] w (lam [i] [(op mod (index bins [i]) 3)])))
          (sumouter (op * h h)))
    """,
    'replicate_outer': """
        (params (u f64 [3]) (v f64 [2]))
        (sumouter (sumouter
          (op * (tr [1 0] (replicate 2 u)) (op tanh (replicate 3 v)))))
    """,
    'let_sharing': """
        (params (x f64 []))
        (let (y (op * x x))
          (let (z (op + y (op sin y)))
            (op * z y)))
    """,
    'stencil': """
        (params (a f64 [6]))
        (sumouter (build1 4 (lam i
          (op * (op - (index a [(op + i 2)]) (index a [i]))
                (index a [(op + i 1)])))))
    """,
    'cond_select_int': """
        (params (x f64 [4]) (k i64 []))
        (sumouter (build1 4 (lam i
          (cond (op < i k)
                (op * (index x [i]) (index x [i]))
                (op exp (index x [i]))))))
    """,
}


def suite_program(name):
    """Parse and check the suite program ``name``."""
    _validate_type(name, str, 'name')
    if name not in GRADIENT_SUITE:
        raise ValueError(f'Unknown suite program "{name}", must be one of '
                         f'{sorted(GRADIENT_SUITE)}')
    return check_program(parse_program(GRADIENT_SUITE[name]))


def dot_program(n):
    """The dot product of two real vectors of length ``n``."""
    return check_program(parse_program(
        f'(params (a f64 [{n}]) (b f64 [{n}]))\n'
        f'(sumouter (build1 {n} (lam i '
        f'(op * (index a [i]) (index b [i])))))'))


def doubling_chain(n):
    """``x_{k+1} = x_k + x_k`` for ``n`` steps, each step let-bound."""
    body = f'x{n}'
    for k in range(n, 0, -1):
        body = f'(let (x{k} (op + x{k - 1} x{k - 1})) {body})'
    return check_program(parse_program(f'(params (x0 f64 []))\n{body}'))


# ---------------------------------------------------------------------------
# Finite differences

def _value(program, inputs):
    out = eval_term(program.body, inputs)
    if out.shape != () or out.kind != REAL_KIND:
        raise ValueError(f'Finite differences need a rank-0 {REAL_KIND} '
                         f'result, got {out.kind} {list(out.shape)}')
    return out.item()


def finite_diff_grad(program, inputs, h=FD_STEP):
    """Central-difference gradient of a scalar program.

    Parameters
    ----------
    program : Program
        The program, evaluated as written (no transform is applied).
    inputs : dict
        Map from parameter name to :class:`~bulk_ad.tensor.ConcreteArray`.
    h : float
        Relative step; component ``x`` is perturbed by ``h * max(1, |x|)``.

    Returns
    -------
    grads : dict
        Map from each real-kind parameter to its estimated gradient.
    """
    if not h > 0:
        raise ValueError(f'h must be positive, got {h}')
    program = check_program(program)
    grads = {}
    for name in program.real_params:
        x = inputs[name].data
        g = np.zeros(x.shape)
        for idx in np.ndindex(*x.shape):
            step = h * max(1., abs(float(x[idx])))
            values = []
            for sign in (1., -1.):
                xp = np.array(x)
                xp[idx] = x[idx] + sign * step
                values.append(_value(program, {
                    **inputs, name: ConcreteArray(xp, REAL_KIND)}))
            g[idx] = (values[0] - values[1]) / (2 * step)
        grads[name] = ConcreteArray(g, REAL_KIND)
    return grads


# ---------------------------------------------------------------------------
# Random programs and inputs

def gen_input(seed, params):
    """Draw values for ``params``.

    Reals are uniform in the configured range but never within the margin
    of an integer, so no branch or rounding boundary is within reach of a
    finite-difference step. Integers are drawn from 0..5.
    """
    rng = np.random.default_rng(seed)
    lo, hi = INPUT_RANGE
    env = {}
    for name, typ in params:
        shape = tuple(typ.shape)
        if typ.kind == REAL_KIND:
            x = rng.uniform(lo, hi, size=shape)
            near = np.abs(x - np.round(x)) < INPUT_MARGIN
            x = np.where(near, np.round(x) + 2 * INPUT_MARGIN, x)
            env[name] = ConcreteArray(x, REAL_KIND)
        elif typ.kind == INT_KIND:
            env[name] = ConcreteArray(rng.integers(0, 6, size=shape),
                                      INT_KIND)
        else:
            env[name] = ConcreteArray(rng.random(size=shape) < .5, BOOL_KIND)
    return env


_PRODUCTIONS = ('let', 'cond', 'op', 'index', 'sumouter', 'gather',
                'scatter', 'ravel', 'replicate', 'transpose', 'reshape',
                'build1')


class _ProgramGenerator:
    """Draws well-typed real-valued terms of a given type."""

    def __init__(self, rng):
        self.rng = rng
        self.names = NameGen()
        self.params = []

    def pick(self, items):
        items = list(items)
        return items[int(self.rng.integers(len(items)))]

    def dim(self):
        return int(self.rng.integers(1, min(MAX_DIM, 4) + 1))

    def shape(self, max_rank=MAX_RANK):
        rank = int(self.rng.integers(0, max_rank + 1))
        return tuple(self.dim() for _ in range(rank))

    def outer_dim(self, shape):
        """A leading dimension that makes ``(k,) + shape`` a param type."""
        fits = [typ.shape[0] for _, typ in self.params
                if typ.kind == REAL_KIND and typ.rank >= 1 and
                tuple(typ.shape[1:]) == tuple(shape)]
        if fits and self.rng.random() < .7:
            return self.pick(fits)
        return self.dim()

    def make_params(self):
        for j in range(int(self.rng.integers(1, 4))):
            self.params.append((f'a{j}', ArrayType(self.shape(2),
                                                   REAL_KIND)))
        if self.rng.random() < .5:
            shape = () if self.rng.random() < .5 else (self.dim(),)
            self.params.append(('k0', ArrayType(shape, INT_KIND)))
        self.names.reserve(name for name, _ in self.params)
        return dict(self.params)

    def int_expr(self, scope, depth=0):
        scalars = [n for n, t in scope.items() if t == SCALAR_INT]
        vectors = [n for n, t in scope.items()
                   if t.kind == INT_KIND and t.rank == 1]
        r = self.rng.random()
        if depth >= 2 or r < .45:
            if scalars and self.rng.random() < .75:
                return Var(self.pick(scalars))
            return const(int(self.rng.integers(0, 6)))
        if vectors and r < .6:
            name = self.pick(vectors)
            return Index(Var(name), (self.bounded(scope, scope[name].shape[0],
                                                  depth + 1),))
        return PrimOp(self.pick(('+', '-', '*')),
                      (self.int_expr(scope, depth + 1),
                       self.int_expr(scope, depth + 1)))

    def bounded(self, scope, k, depth=0):
        return PrimOp('mod', (self.int_expr(scope, depth), const(k)))

    def leaf(self, typ, scope):
        names = [n for n, t in scope.items() if t == typ]
        if names and self.rng.random() < .8:
            return Var(self.pick(names))
        data = np.round(self.rng.uniform(-1, 1, size=typ.shape), 2)
        return Const(ConcreteArray(data, REAL_KIND))

    def productions(self, shape):
        rank = len(shape)
        out = ['let', 'cond', 'op', 'reshape']
        if rank < MAX_RANK:
            # weighted up: these are the only ways to grow the rank
            out += ['index', 'sumouter'] * (3 if rank == 0 else 1)
        if rank >= 1:
            out += ['gather', 'scatter', 'replicate', 'build1']
            if shape[0] <= 3:
                out.append('ravel')
        if rank >= 2:
            out.append('transpose')
        return out

    def gen(self, typ, scope, size):
        if size <= 1 or (size < 4 and self.rng.random() < .2):
            return self.leaf(typ, scope)
        size -= 1
        shape = tuple(typ.shape)
        prod = self.pick(self.productions(shape))
        if prod == 'let':
            if self.params and self.rng.random() < .5:
                btyp = self.pick(t for _, t in self.params
                                 if t.kind == REAL_KIND)
            else:
                btyp = ArrayType(self.shape(), REAL_KIND)
            name = self.names.fresh('x')
            bound = self.gen(btyp, scope, size // 2)
            body = self.gen(typ, {**scope, name: btyp}, size - size // 2)
            return Let(name, bound, body)
        elif prod == 'cond':
            test = PrimOp(self.pick(('<', '<=', '==')),
                          (self.int_expr(scope), self.int_expr(scope)))
            return Cond(test, self.gen(typ, scope, size // 2),
                        self.gen(typ, scope, size // 2))
        elif prod == 'op':
            r = self.rng.random()
            if r < .55:
                return PrimOp(self.pick(('+', '-', '*')),
                              (self.gen(typ, scope, size // 2),
                               self.gen(typ, scope, size // 2)))
            elif r < .9 or shape:
                return PrimOp(self.pick(('neg', 'sin', 'cos', 'tanh')),
                              (self.gen(typ, scope, size),))
            return PrimOp('toreal', (self.int_expr(scope),))
        elif prod == 'index':
            k = self.outer_dim(shape)
            a = self.gen(ArrayType((k,) + shape, REAL_KIND), scope, size)
            return Index(a, (self.bounded(scope, k),))
        elif prod == 'sumouter':
            k = self.outer_dim(shape)
            return SumOuter(self.gen(ArrayType((k,) + shape, REAL_KIND), scope,
                                     size))
        elif prod in ('gather', 'scatter'):
            n, rest = shape[0], shape[1:]
            k = self.outer_dim(rest)
            source = self.gen(ArrayType((k,) + rest, REAL_KIND), scope, size)
            p = self.names.fresh('p')
            inner = {**scope, p: SCALAR_INT}
            expr = PrimOp('+', (Var(p), self.int_expr(inner)))
            if prod == 'gather':
                if isinstance(source, Var) and self.rng.random() < .5:
                    # reads of a variable may fall out of range
                    comp = expr
                else:
                    comp = PrimOp('mod', (expr, const(k)))
                return Gather(shape, source, IxFn((p,), (comp,)))
            comp = PrimOp('mod', (expr, const(n)))
            return Scatter(shape, source, IxFn((p,), (comp,)))
        elif prod == 'ravel':
            part = ArrayType(shape[1:], REAL_KIND)
            return Ravel(tuple(self.gen(part, scope, size // shape[0])
                               for _ in range(shape[0])))
        elif prod == 'replicate':
            part = ArrayType(shape[1:], REAL_KIND)
            return Replicate(shape[0], self.gen(part, scope, size))
        elif prod == 'transpose':
            m = 2 if self.rng.random() < .5 else len(shape)
            perm = tuple(int(p) for p in self.rng.permutation(m))
            source = [0] * m
            for p, q in enumerate(perm):
                source[q] = shape[p]
            source = ArrayType(tuple(source) + shape[m:], REAL_KIND)
            return Transpose(perm, self.gen(source, scope, size))
        elif prod == 'reshape':
            total = int(np.prod(shape, dtype=np.int64))
            options = [(total,)]
            if len(shape) >= 2:
                options.append(shape[::-1])
            if len(shape) < MAX_RANK:
                options.append(shape + (1,))
            source = ArrayType(self.pick(options), REAL_KIND)
            return Reshape(shape, self.gen(source, scope, size))
        i = self.names.fresh('i')
        return Build1(shape[0], i, self.gen(ArrayType(shape[1:], REAL_KIND),
                                            {**scope, i: SCALAR_INT}, size))


@verbose
def gen_program(seed, size_budget=DEFAULT_SIZE_BUDGET, verbose=None):
    """Generate a random well-typed program with a rank-0 real result.

    Parameters
    ----------
    seed : int
        Seed of the generator; equal seeds give equal programs.
    size_budget : int
        Approximate number of nodes.
    %(verbose)s

    Returns
    -------
    program : Program
        A checked program over the full term grammar. Programs whose value
        at ``gen_input(seed, params)`` is not finite or exceeds the
        magnitude bound are redrawn.
    """
    rng = np.random.default_rng(seed)
    for attempt in range(100):
        gen = _ProgramGenerator(rng)
        env = gen.make_params()
        body = gen.gen(SCALAR_REAL, env, size_budget)
        program = check_program(Program(tuple(gen.params), body))
        value = eval_term(program.body,
                          gen_input(seed, program.params)).item()
        if np.isfinite(value) and abs(value) <= MAGNITUDE_LIMIT:
            logger.debug(f'Program {seed}: {len(gen.params)} parameters, '
                         f'{attempt + 1} attempt(s)')
            return program
        warn(f'Program for seed {seed} evaluated to {value}, drawing '
             f'another one')
    raise RuntimeError(f'Could not draw a bounded program for seed {seed}')


def node_coverage(t):
    """Count the node classes occurring in ``t``."""
    return Counter(type(node).__name__ for node in iter_terms(t))


# ---------------------------------------------------------------------------
# Gradient checks

@dataclass
class GradCheckResult:
    """Outcome of :func:`gradcheck`.

    Attributes
    ----------
    errors : dict
        Largest relative error of the concrete gradient against finite
        differences, per real parameter.
    symbolic_error : float | None
        Largest relative difference between the compiled gradient program
        and the concrete gradient, if it was run.
    tol : float
        Tolerance for ``errors``.
    name : str
        Label of the checked program.
    """

    errors: dict
    symbolic_error: object = None
    tol: float = GRADCHECK_TOL
    name: str = ''

    @property
    def max_error(self):
        """The largest finite-difference error."""
        return max(self.errors.values(), default=0.)

    @property
    def passed(self):
        """Whether every error is within tolerance."""
        return (self.max_error <= self.tol and
                (self.symbolic_error is None or
                 self.symbolic_error <= SYMBOLIC_TOL))


@verbose
def gradcheck(program, inputs, h=FD_STEP, tol=GRADCHECK_TOL,
              floor=GRADCHECK_ABS_FLOOR, symbolic=True, grad_program=None,
              name='', verbose=None):
    """Compare the concrete, compiled and finite-difference gradients.

    Parameters
    ----------
    program : Program
        A program with a rank-0 real result.
    inputs : dict
        Map from parameter name to :class:`~bulk_ad.tensor.ConcreteArray`.
    h : float
        Relative finite-difference step.
    tol : float
        Tolerance on the relative error against finite differences.
    floor : float
        Lower bound of the denominator of relative errors.
    symbolic : bool
        Whether to also evaluate the compiled gradient program.
    grad_program : GradientProgram | None
        A compiled program to reuse; built on demand otherwise.
    name : str
        Label stored in the result.
    %(verbose)s

    Returns
    -------
    result : GradCheckResult
        The errors and the verdict.
    """
    program = check_program(program)
    concrete = grad_concrete(program, inputs)
    fd = finite_diff_grad(program, inputs, h)
    errors = {p: _relative_error(concrete[p].data, fd[p].data, floor)
              for p in program.real_params}
    symbolic_error = None
    if symbolic:
        if grad_program is None:
            grad_program = build_gradient_program(program)
        _, compiled = grad_program.evaluate(inputs)
        symbolic_error = max(
            (_relative_error(compiled[p].data, concrete[p].data, floor)
             for p in program.real_params), default=0.)
    result = GradCheckResult(errors, symbolic_error, tol, name)
    logger.info(f'gradcheck {name}: max error {result.max_error:.3g}, '
                f'compiled {symbolic_error}')
    return result


def _values_agree(a, b):
    if a.kind != b.kind or a.shape != b.shape:
        return False
    if a.kind != REAL_KIND:
        return a == b
    return bool(np.allclose(a.data, b.data, rtol=SEMANTIC_RTOL,
                            atol=SEMANTIC_ATOL, equal_nan=True))


@dataclass
class SelfTestResult:
    """Outcome of :func:`selftest`; each failure list holds descriptions."""

    n_programs: int = 0
    n_inputs: int = 0
    max_error: float = 0.
    normal_form_violations: list = field(default_factory=list)
    semantic_mismatches: list = field(default_factory=list)
    gradient_failures: list = field(default_factory=list)
    share_violations: list = field(default_factory=list)
    coverage: Counter = field(default_factory=Counter)

    @property
    def passed(self):
        """Whether no check failed."""
        return not (self.normal_form_violations or self.semantic_mismatches
                    or self.gradient_failures or self.share_violations)


@verbose
def selftest(seeds=10, size_budget=DEFAULT_SIZE_BUDGET, n_inputs=3,
             h=FD_STEP, tol=GRADCHECK_TOL, floor=SELFTEST_ABS_FLOOR,
             verbose=None):
    """Run the whole pipeline over generated programs.

    For each program: the bulk transform reaches a normal form and keeps
    the value at every input, the compiled gradient program is Share-free,
    and the concrete and compiled gradients agree with finite differences.

    Parameters
    ----------
    seeds : int | iterable of int
        The seeds, or their number (then ``0..seeds-1``).
    size_budget : int
        Passed on to :func:`gen_program`.
    n_inputs : int
        Inputs drawn per program.
    h : float
        Relative finite-difference step.
    tol : float
        Tolerance on gradient errors.
    floor : float
        Lower bound of the denominator of relative errors.
    %(verbose)s

    Returns
    -------
    result : SelfTestResult
        Counts, failures and the node classes covered.
    """
    if isinstance(seeds, (int, np.integer)):
        seeds = range(int(seeds))
    result = SelfTestResult()
    for seed in seeds:
        program = gen_program(seed, size_budget)
        result.n_programs += 1
        result.coverage.update(node_coverage(program.body))
        normal = normalize(program.body, program.env)
        report = check_normal_form(normal)
        if not report.ok:
            result.normal_form_violations.append(
                f'seed {seed}: {report.violations}')
        grad_program = build_gradient_program(program)
        if count_shares(grad_program.body):
            result.share_violations.append(f'seed {seed}: share left in '
                                           f'gradient program')
        for j in range(n_inputs):
            inputs = gen_input((seed, j), program.params)
            result.n_inputs += 1
            before = eval_term(program.body, inputs)
            after = eval_term(normal, inputs)
            if not _values_agree(before, after):
                result.semantic_mismatches.append(
                    f'seed {seed}, input {j}: {before.item()} != '
                    f'{after.item()}')
            check = gradcheck(program, inputs, h=h, tol=tol, floor=floor,
                              grad_program=grad_program,
                              name=f'seed {seed}', verbose=False)
            result.max_error = max(result.max_error, check.max_error)
            if not check.passed:
                result.gradient_failures.append(
                    f'seed {seed}, input {j}: error {check.max_error:.3g}, '
                    f'compiled {check.symbolic_error}')
    logger.info(f'selftest: {result.n_programs} programs, '
                f'{result.n_inputs} inputs, passed={result.passed}')
    return result
