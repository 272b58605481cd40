"""Reverse-mode differentiation of a small array language."""

__version__ = '0.1.dev0'
from bulk_ad import commands
from bulk_ad.tensor import ConcreteArray
from bulk_ad.ir import (ArrayType, Program, CheckError, check,
                        check_program, alpha_equivalent)
from bulk_ad.syntax import (ParseError, parse_term, parse_program,
                            read_program, print_term, print_program)
from bulk_ad.interp import eval_term, eval_memo
from bulk_ad.bot import normalize, check_normal_form
from bulk_ad.dual import dualize
from bulk_ad.reverse import grad_concrete, reverse_pass
from bulk_ad.symbolic import (GradientProgram, build_gradient_program,
                              share_to_let)
from bulk_ad.oracle import (GRADIENT_SUITE, finite_diff_grad, gen_program,
                            gen_input, gradcheck, selftest)
from bulk_ad.report import make_report
