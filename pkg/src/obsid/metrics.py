"""Degree, coefficient-height and evaluation-length measurement.

The degree bound d and height bound h are read off the expanded normalized
numerator/denominator form of every right-hand side, computed once at parse
time with exact polynomial arithmetic.  L is the instruction count of the
compiled division-free program.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import sympy as sp

from .compile import compile_numden
from .model import BinOp, Const, Expr, Model, Pow, Var

__all__ = ["ModelMetrics", "measure_metrics", "expr_to_sympy", "model_sympy_symbols"]


@dataclass(frozen=True)
class ModelMetrics:
    d: int      # max total degree over all normalized numerators/denominators
    h: float    # max coefficient height ln(|c| + 1)
    L: int      # compiled division-free tape length
    n: int
    ell: int
    r: int
    m: int


def model_sympy_symbols(model: Model) -> dict[str, sp.Symbol]:
    names = model.states + model.params + model.inputs
    return {nm: sp.Symbol(nm) for nm in names}


def expr_to_sympy(e: Expr, syms: dict[str, sp.Symbol]):
    if isinstance(e, Const):
        return sp.Integer(e.value)
    if isinstance(e, Var):
        return syms[e.name]
    if isinstance(e, Pow):
        return expr_to_sympy(e.base, syms) ** e.exponent
    a = expr_to_sympy(e.left, syms)
    b = expr_to_sympy(e.right, syms)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    return a / b


def _pair_degree_height(expr, gens):
    """(max degree, max height) over the normalized numerator/denominator."""
    num, den = sp.fraction(sp.cancel(expr))
    best_d, best_h = 0, 0.0
    coeffs: list[sp.Rational] = []
    for part in (num, den):
        part = sp.expand(part)
        if part.is_zero:
            continue
        poly = sp.Poly(part, *gens)
        best_d = max(best_d, poly.total_degree())
        coeffs.extend(poly.coeffs())
    if coeffs:
        # scale the pair to integer coefficients with content 1
        lcm = 1
        for c in coeffs:
            lcm = sp.ilcm(lcm, sp.Rational(c).q)
        ints = [int(sp.Rational(c) * lcm) for c in coeffs]
        gcd = 0
        for v in ints:
            gcd = math.gcd(gcd, abs(v))
        if gcd > 1:
            ints = [v // gcd for v in ints]
        best_h = max(math.log(abs(v) + 1) for v in ints)
    return best_d, best_h


def measure_metrics(model: Model) -> ModelMetrics:
    syms = model_sympy_symbols(model)
    gens = list(syms.values())
    d, h = 0, 0.0
    for rhs in model.f + model.g:
        dd, hh = _pair_degree_height(expr_to_sympy(rhs, syms), gens)
        d = max(d, dd)
        h = max(h, hh)
    if d == 0:
        warnings.warn(f"model {model.name!r} is constant; clamping degree bound to 1",
                      stacklevel=2)
        d = 1
    L = compile_numden(model).slp.length
    return ModelMetrics(d=d, h=h, L=L,
                        n=model.n, ell=model.ell, r=model.r, m=model.m)
