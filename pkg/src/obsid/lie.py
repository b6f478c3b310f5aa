"""Brute-force symbolic Lie-derivative oracle.

Repeated substitution-differentiation over exact rational functions; the
cost grows exponentially with the derivation order, so this is only usable
for small orders on small models.  It is the independent cross-check for
the series pipeline, never part of the fast path.
"""

from __future__ import annotations

import sympy as sp

from .metrics import expr_to_sympy, model_sympy_symbols
from .model import Model

__all__ = ["lie_oracle", "lie_jacobian_rows", "input_derivative_symbol"]

MAX_ORDER = 6


def input_derivative_symbol(name: str, k: int) -> sp.Symbol:
    return sp.Symbol(name if k == 0 else f"{name}__d{k}")


def _lie_once(model: Model, expr, syms, max_u_order: int):
    out = sp.Integer(0)
    for s, rhs in zip(model.states, model.f):
        d = sp.diff(expr, syms[s])
        if d != 0:
            out += expr_to_sympy(rhs, syms) * d
    for u in model.inputs:
        for k in range(max_u_order):
            d = sp.diff(expr, input_derivative_symbol(u, k))
            if d != 0:
                out += input_derivative_symbol(u, k + 1) * d
    return sp.cancel(out)


def lie_oracle(model: Model, j: int) -> list[sp.Expr]:
    """Exact j-th Lie derivative of every output map, as sympy expressions.

    Input symbols u appear together with their formal derivatives u__dk for
    k up to j.
    """
    if j > MAX_ORDER:
        raise ValueError(f"order {j} exceeds the oracle cap {MAX_ORDER}")
    if j < 0:
        raise ValueError("order must be nonnegative")
    syms = model_sympy_symbols(model)
    exprs = [sp.cancel(expr_to_sympy(g, syms)) for g in model.g]
    for step in range(j):
        exprs = [_lie_once(model, e, syms, step + 1) for e in exprs]
    return exprs


def _eval_mod(expr, subs, p: int) -> int:
    val = sp.Rational(expr.subs(subs))
    num, den = int(val.p), int(val.q)
    if den % p == 0:
        raise ZeroDivisionError("denominator vanished at the oracle point")
    return (num * pow(den, p - 2, p)) % p


def lie_jacobian_rows(model: Model, jmax: int, x0, theta, input_series,
                      p: int) -> list[list[int]]:
    """Rows d(L^j G)/d(X, Theta) mod p at a specialization, j = 0..jmax.

    ``input_series`` gives the truncated input coefficients; the value of
    u^(k) at t = 0 is k! times the k-th coefficient.  Rows come out in the
    same (block by j, then output) order as the series pipeline, without
    the 1/j! scaling the series coefficients carry.
    """
    syms = model_sympy_symbols(model)
    subs = {}
    for nm, v in zip(model.states, x0):
        subs[syms[nm]] = sp.Rational(v)
    for nm, v in zip(model.params, theta):
        subs[syms[nm]] = sp.Rational(v)
    fact = 1
    for k in range(jmax + 2):
        if k:
            fact *= k
        for nm, coeffs in zip(model.inputs, input_series):
            c = coeffs[k] if k < len(coeffs) else 0
            subs[input_derivative_symbol(nm, k)] = sp.Rational(c * fact)
    unknowns = [syms[nm] for nm in model.unknowns]
    rows = []
    exprs = [sp.cancel(expr_to_sympy(g, syms)) for g in model.g]
    for j in range(jmax + 1):
        if j:
            exprs = [_lie_once(model, e, syms, j) for e in exprs]
        for e in exprs:
            rows.append([_eval_mod(sp.diff(e, z), subs, p) for z in unknowns])
    return rows
