"""Probabilistic verification of user-supplied symmetry groups.

A group file declares group parameters and a substitution map on states and
parameters::

    lambdas: l1, l2;
    map:
      x2 -> l1*x2;
      c9 -> c9/l1;

A valid action fixes every unmapped symbol, keeps parameter substitutions
free of states, and reduces to the identity at l = 1.  Verification checks,
at random points over F_p, that the transformed trajectory still satisfies
the vector field and that the outputs are left invariant; both identities
are rational, so pointwise checks carry the usual polynomial-identity
confidence.
"""

from __future__ import annotations

import random
import warnings
from dataclasses import dataclass

import sympy as sp

from .metrics import expr_to_sympy
from .model import (Expr, Model, ModelError, Var, _TokenStream, _parse_expr,
                    _tokenize, diff_expr, eval_expr, expr_symbols)
from .modular import FieldCtx
from .slp import FpRing

__all__ = ["GroupAction", "SymmetryVerdict", "parse_group", "verify_symmetry"]


@dataclass(frozen=True)
class GroupAction:
    lambdas: tuple[str, ...]
    subs: dict  # symbol name -> Expr over states, parameters and lambdas

    def substitution(self, name: str) -> Expr:
        return self.subs.get(name, Var(name))


@dataclass(frozen=True)
class SymmetryVerdict:
    accepted: bool
    trials: int
    witness: dict | None = None


def parse_group(text: str, model: Model) -> GroupAction:
    """Parse and validate a group file against a model's symbol table."""
    ts = _TokenStream(_tokenize(text))
    lambdas: list[str] = []
    movable = set(model.states) | set(model.params)

    tok = ts.peek()
    if tok is not None and tok.kind == "IDENT" and tok.text == "lambdas":
        ts.take()
        ts.expect(":")
        nxt = ts.peek()
        if nxt is not None and nxt.kind == ";":
            ts.take()
        else:
            while True:
                ident = ts.expect("IDENT")
                if ident.text in lambdas:
                    raise ModelError(f"duplicate group parameter {ident.text!r}",
                                     ident.line, ident.col)
                if ident.text in movable or ident.text in model.inputs \
                        or ident.text in model.outputs:
                    raise ModelError(
                        f"group parameter {ident.text!r} clashes with a model symbol",
                        ident.line, ident.col)
                lambdas.append(ident.text)
                sep = ts.take()
                if sep.kind == ";":
                    break
                if sep.kind != ",":
                    raise ModelError(f"expected ',' or ';', found {sep.text!r}",
                                     sep.line, sep.col)

    allowed = movable | set(lambdas)

    def check_symbol(tok):
        if tok.text not in allowed:
            raise ModelError(
                f"symbol {tok.text!r} is not a state, parameter or group parameter",
                tok.line, tok.col)

    subs: dict[str, Expr] = {}
    while not ts.done:
        tok = ts.peek()
        if tok.kind == "IDENT" and tok.text == "map":
            nxt = ts.peek(1)
            if nxt is not None and nxt.kind == ":":
                ts.take()
                ts.take()
                continue
        target = ts.expect("IDENT")
        if target.text not in movable:
            raise ModelError(f"substitution target {target.text!r} is not a state "
                             "or parameter", target.line, target.col)
        if target.text in subs:
            raise ModelError(f"duplicate substitution for {target.text!r}",
                             target.line, target.col)
        ts.expect("->")
        rhs = _parse_expr(ts, check_symbol)
        ts.expect(";")
        if target.text in model.params:
            touched = expr_symbols(rhs) & set(model.states)
            if touched:
                raise ModelError(
                    f"substitution for parameter {target.text!r} involves state(s) "
                    f"{sorted(touched)}", target.line, target.col)
        subs[target.text] = rhs

    _check_identity_at_one(subs, lambdas, model)
    return GroupAction(lambdas=tuple(lambdas), subs=subs)


def _check_identity_at_one(subs, lambdas, model):
    """The action must fix everything when every group parameter equals 1."""
    syms = {nm: sp.Symbol(nm) for nm in model.states + model.params + tuple(lambdas)}
    ones = {syms[l]: sp.Integer(1) for l in lambdas}
    for name, rhs in subs.items():
        expr = expr_to_sympy(rhs, syms).subs(ones)
        if sp.cancel(expr - syms[name]) != 0:
            raise ModelError(
                f"substitution for {name!r} is not the identity at lambda = 1")


def verify_symmetry(model: Model, action: GroupAction, ctx: FieldCtx,
                    trials: int = 20, seed: int | None = None,
                    observable=None) -> SymmetryVerdict:
    """Check invariance of outputs and equivariance of the vector field.

    For each trial, draws states, parameters, inputs and group parameters
    over F_p (group parameters from {2, ..., p-2} so the identity cannot
    mask an error) and checks, for every state x_i and output,

        sum_j dT_{x_i}/dx_j * F_j = F_i(T(X), T(Theta), U),
        G(T(X), T(Theta), U)      = G(X, Theta, U).

    Rejection returns a witness point that re-evaluates to the inequality.
    """
    if observable:
        moved = [s for s in action.subs if s in set(observable)]
        if moved:
            warnings.warn(
                "group action moves symbols classified observable: "
                + ", ".join(sorted(moved)), stacklevel=2)
    p = ctx.p
    ring = FpRing(p)
    rng = random.Random(seed)
    t_exprs = {s: action.substitution(s) for s in model.states + model.params}
    dt_dx = {
        s: {x: diff_expr(t_exprs[s], x) for x in model.states}
        for s in model.states
    }
    for trial in range(1, trials + 1):
        env = _draw_point(model, action, rng, p)
        try:
            f_here = [eval_expr(f, env, ring) for f in model.f]
            g_here = [eval_expr(g, env, ring) for g in model.g]
            t_env = dict(env)
            for s in model.states + model.params:
                t_env[s] = eval_expr(t_exprs[s], env, ring)
            f_moved = [eval_expr(f, t_env, ring) for f in model.f]
            g_moved = [eval_expr(g, t_env, ring) for g in model.g]
        except ZeroDivisionError:
            continue  # denominator hit; the draw loop guards how often
        for o in range(model.m):
            if g_here[o] != g_moved[o]:
                return SymmetryVerdict(False, trial,
                                       _witness(env, action, ("output", model.outputs[o])))
        for i, s in enumerate(model.states):
            lhs = 0
            try:
                for j, x in enumerate(model.states):
                    lhs = ring.add(lhs, ring.mul(
                        eval_expr(dt_dx[s][x], env, ring), f_here[j]))
            except ZeroDivisionError:
                continue
            if lhs != f_moved[i]:
                return SymmetryVerdict(False, trial,
                                       _witness(env, action, ("state", s)))
    return SymmetryVerdict(True, trials, None)


def _draw_point(model: Model, action: GroupAction, rng: random.Random, p: int):
    env = {}
    for nm in model.states + model.params + model.inputs:
        env[nm] = rng.randrange(0, p)
    for nm in action.lambdas:
        env[nm] = rng.randrange(2, p - 1)
    return env


def _witness(env, action: GroupAction, equation):
    return {"point": dict(env), "lambdas": {l: env[l] for l in action.lambdas},
            "equation": equation}
