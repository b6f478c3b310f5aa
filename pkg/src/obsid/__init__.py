"""Seminumerical local algebraic observability and identifiability testing.

Decides which states and parameters of a rational ODE model are locally
algebraically observable: the model is specialized at random integers over a
large prime field, the linearized (variational) system is integrated as
truncated power series, and each symbol is classified through modular rank
tests on the resulting Jacobian of output-derivative coefficients, with a
quantified probability of correctness.
"""

from .compile import SlpBundle, VariationalSlps, build_variational, compile_numden
from .metrics import ModelMetrics, measure_metrics
from .model import (Model, ModelError, diff_expr, eval_expr, expr_to_text,
                    format_model, parse_model)
from .modular import (Bounds, DegenerateModelError, FieldCtx, Specialization,
                      compute_bounds, is_prime, next_prime, probability_bound,
                      prop6_height, sample_specialization, select_prime)
from .observability import (Classification, JacobianMatrix, ObservabilityReport,
                            RunConfig, block_ranks, classify,
                            classify_assuming_known, detect_nu,
                            jacobian_from_series, rank_fp, report_to_json,
                            report_to_text, run_test)
from .lie import lie_jacobian_rows, lie_oracle
from .series import SeriesMatrix, SeriesRing, TruncSeries, solve_linear_ode
from .slp import (FpRing, FractionRing, FRACTIONS, Slp, SlpDivisionError,
                  dump_slp, evaluate, reverse_gradient, slice_to_result)
from .symmetry import GroupAction, SymmetryVerdict, parse_group, verify_symmetry
from .varsolve import (VariationalSolution, constants_variation,
                       homogeneous_resolution, newton_iterate, residual_order,
                       solve_phi, solve_recurrence)

__version__ = "0.1.0"
