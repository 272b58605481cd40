"""Configuration values for bulk-ad."""
import numpy as np


# Element kinds: 64-bit reals, 64-bit signed integers and booleans
KINDS = ('f64', 'i64', 'bool')
NUMERIC_KINDS = ('f64', 'i64')
REAL_KIND = 'f64'
INT_KIND = 'i64'
BOOL_KIND = 'bool'

DTYPES = {'f64': np.float64, 'i64': np.int64, 'bool': np.bool_}

# Primitive operations, grouped by typing rule. Binary arithmetic works on
# both numeric kinds; ``div`` is true division on reals and flooring
# division on integers.
ARITH_BINARY_OPS = ('+', '-', '*', 'div', 'max', 'min')
INT_BINARY_OPS = ('mod',)
COMPARISON_OPS = ('<', '<=', '>', '>=', '==', '!=')
LOGICAL_BINARY_OPS = ('and', 'or')
LOGICAL_UNARY_OPS = ('not',)
ARITH_UNARY_OPS = ('neg', 'abs', 'sign')
REAL_UNARY_OPS = ('exp', 'log', 'sin', 'cos', 'tanh', 'sqrt')

# conversion op -> (accepted argument kinds, result kind)
CONVERSION_OPS = {'toreal': (('i64', 'bool'), 'f64'),
                  'floor': (('f64',), 'i64')}

BINARY_OPS = (ARITH_BINARY_OPS + INT_BINARY_OPS + COMPARISON_OPS +
              LOGICAL_BINARY_OPS)
UNARY_OPS = (LOGICAL_UNARY_OPS + ARITH_UNARY_OPS + REAL_UNARY_OPS +
             tuple(CONVERSION_OPS))

# Real-valued ops with a derivative rule; everything else is carried
# through the dual transform without a delta.
DIFFERENTIABLE_OPS = ('+', '-', '*', 'div', 'max', 'min', 'neg', 'abs',
                      'sign', 'exp', 'log', 'sin', 'cos', 'tanh', 'sqrt',
                      'toreal')

# Finite differences and gradient checking
FD_STEP = 1e-4
GRADCHECK_TOL = 1e-4
GRADCHECK_ABS_FLOOR = 1e-8

# Random program generation
MAX_DIM = 6
MAX_RANK = 3
MAGNITUDE_LIMIT = 1e6
DEFAULT_SIZE_BUDGET = 24
INPUT_RANGE = (-2., 2.)
# distance kept from integers (cond thresholds, rounding boundaries)
INPUT_MARGIN = 1e-3

# Gradient programs
COTANGENT_NAME = 'c'
SHARED_NAME_PREFIX = 'shared'

# Command line exit codes
EXIT_CHECK_ERROR = 1
EXIT_TOLERANCE = 2

# Tolerances of the self checks
# compiled gradients repeat the concrete arithmetic
SYMBOLIC_TOL = 1e-12
# eval before and after the bulk transform
SEMANTIC_RTOL = 1e-10
SEMANTIC_ATOL = 1e-12
# random programs have larger higher derivatives than the fixed suite
SELFTEST_ABS_FLOOR = 1e-2
