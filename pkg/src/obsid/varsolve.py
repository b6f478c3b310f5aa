"""Series solutions of the linearized system at a specialization.

The unknowns are the state solution Phi (n series), the state sensitivity
Gamma = dPhi/dX0 (n x n) and the parameter sensitivity Lambda = dPhi/dTheta
(n x ell), all truncated at n+ell+1 coefficients.  They satisfy

    P(Phi', Phi)                    = 0,
    A Gamma'  + A' Gamma            = 0,   Gamma(0) = Id,
    A Lambda' + A' Lambda + B       = 0,   Lambda(0) = 0,

with A = dP/dXdot = diag(q_i(Phi)), A' = dP/dX and B = dP/dTheta.

Two independent paths compute them: a direct coefficient recurrence (the
reference semantics) and a quadratic Newton operator whose working order
doubles every step.  Because A' is built from the padded derivative of the
current Phi, the sensitivities lag one doubling behind; one extra resolution
at the final order closes the gap, after which both paths agree coefficient
for coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass

from .compile import VariationalSlps
from .modular import FieldCtx, Specialization
from .series import SeriesMatrix, SeriesRing, TruncSeries, solve_linear_ode

__all__ = [
    "VariationalSolution",
    "solve_phi",
    "solve_recurrence",
    "newton_iterate",
    "homogeneous_resolution",
    "constants_variation",
    "residual_order",
    "newton_schedule",
]


@dataclass(frozen=True, eq=False)
class VariationalSolution:
    phi: tuple[TruncSeries, ...]
    gamma: SeriesMatrix
    lam: SeriesMatrix

    @property
    def ncoeffs(self) -> int:
        return self.phi[0].ncoeffs if self.phi else self.gamma.ncoeffs

    def __eq__(self, other):
        return (isinstance(other, VariationalSolution)
                and list(self.phi) == list(other.phi)
                and self.gamma == other.gamma and self.lam == other.lam)


def _base_env(vslps: VariationalSlps, spec: Specialization, p: int, ncoeffs: int):
    """Constant-parameter and input series, without the states."""
    model = vslps.model
    env = {}
    for nm, v in zip(model.params, spec.theta):
        env[nm] = TruncSeries.constant(v, ncoeffs, p)
    for nm, coeffs in zip(model.inputs, spec.input_series):
        env[nm] = TruncSeries(list(coeffs[:ncoeffs]) + [0] * max(0, ncoeffs - len(coeffs)), p)
    return env


def _full_env(vslps, spec, p, phi):
    env = _base_env(vslps, spec, p, phi[0].ncoeffs)
    for nm, s in zip(vslps.model.states, phi):
        env[nm] = s
    return env


# --------------------------------------------------------------------------
# Reference path: plain coefficient recurrences
# --------------------------------------------------------------------------

def solve_phi(vslps: VariationalSlps, spec: Specialization, ctx: FieldCtx,
              ncoeffs: int) -> list[TruncSeries]:
    """State solution by the term-by-term recurrence x_{k+1} = [t^k]F(Phi)/(k+1)."""
    p = ctx.p
    model = vslps.model
    coeff_lists = [[v % p] for v in spec.x0]
    for k in range(ncoeffs - 1):
        cur = k + 1
        ring = SeriesRing(p, cur)
        phi = [TruncSeries(c, p) for c in coeff_lists]
        env = _full_env(vslps, spec, p, phi)
        p_val, q_val = vslps.evaluate_pq(env, ring)
        inv_k1 = pow(cur, p - 2, p)
        for i in range(model.n):
            f_i = p_val[i].mul(q_val[i].invert())
            coeff_lists[i].append((f_i.coeffs[k] * inv_k1) % p)
    return [TruncSeries(c, p) for c in coeff_lists]


def _linear_blocks(vslps, spec, ctx, phi):
    """A = diag(q(Phi)), A' = dP/dX and B = dP/dTheta at the current Phi."""
    p = ctx.p
    ncoeffs = phi[0].ncoeffs
    ring = SeriesRing(p, ncoeffs)
    env = _full_env(vslps, spec, p, phi)
    xdot = [s.derivative_padded() for s in phi]
    _, q_val, P, dPdX, dPdTheta = vslps.evaluate_blocks(env, xdot, ring)
    n, ell = vslps.model.n, vslps.model.ell
    A = SeriesMatrix.zero(n, n, ncoeffs, p)
    for i in range(n):
        for k, c in enumerate(q_val[i].coeffs):
            A.coeffs[k][i][i] = c
    Ap = SeriesMatrix.from_entries(dPdX, p)
    if ell:
        B = SeriesMatrix.from_entries(dPdTheta, p)
    else:
        B = SeriesMatrix.zero(n, 0, ncoeffs, p)
    P_col = SeriesMatrix.from_entries([[s] for s in P], p)
    return A, Ap, B, P_col


def solve_recurrence(vslps: VariationalSlps, spec: Specialization, ctx: FieldCtx,
                     ncoeffs: int) -> VariationalSolution:
    """Reference solution: Phi by recurrence, then Gamma/Lambda as linear ODEs."""
    p = ctx.p
    model = vslps.model
    phi = solve_phi(vslps, spec, ctx, ncoeffs)
    A, Ap, B, _ = _linear_blocks(vslps, spec, ctx, phi)
    Ainv = A.invert()
    M = Ainv.matmul(Ap).neg()
    gamma = solve_linear_ode(M, None, _identity(model.n), ncoeffs)
    R = Ainv.matmul(B).neg()
    lam = solve_linear_ode(M, R, [[0] * model.ell for _ in range(model.n)], ncoeffs)
    return VariationalSolution(phi=tuple(phi), gamma=gamma, lam=lam)


def _identity(n):
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


# --------------------------------------------------------------------------
# Newton path
# --------------------------------------------------------------------------

def homogeneous_resolution(A: SeriesMatrix, Aprime: SeriesMatrix,
                           ncoeffs: int) -> SeriesMatrix:
    """Invertible W with A W' + A' W = 0 and W(0) = Id, to ncoeffs coefficients."""
    M = A.invert().matmul(Aprime).neg()
    return solve_linear_ode(M, None, _identity(A.rows), ncoeffs)


def constants_variation(W: SeriesMatrix, A: SeriesMatrix,
                        residual: SeriesMatrix, ncoeffs: int) -> SeriesMatrix:
    """E with A E' + A' E + residual = 0 and E(0) = 0, via integrating factors.

    W must come from homogeneous_resolution for the same (A, A') pair; then
    E = -W * integral(W^-1 A^-1 residual).
    """
    inner = W.invert().matmul(A.invert()).matmul(residual)
    return W.matmul(inner.integrate()).neg().truncate(ncoeffs)


def newton_schedule(ncoeffs: int) -> list[int]:
    """Working orders: doubling capped at the target, plus one repeat at the top."""
    orders = []
    s = 1
    while s < ncoeffs:
        s = min(2 * s, ncoeffs)
        orders.append(s)
    orders.append(ncoeffs)
    return orders


def newton_iterate(vslps: VariationalSlps, spec: Specialization, ctx: FieldCtx,
                   ncoeffs: int | None = None) -> VariationalSolution:
    """Quadratic Newton iteration for (Phi, Gamma, Lambda).

    Each resolution linearizes the system at the current iterate, solves the
    homogeneous system once, and corrects all 1+n+ell columns by variation of
    constants at the doubled working order.
    """
    p = ctx.p
    model = vslps.model
    n, ell = model.n, model.ell
    if ncoeffs is None:
        ncoeffs = n + ell + 1
    phi = [TruncSeries.constant(v, 1, p) for v in spec.x0]
    gamma = SeriesMatrix.identity(n, 1, p)
    lam = SeriesMatrix.zero(n, ell, 1, p)
    for s2 in newton_schedule(ncoeffs):
        phi = [x.extend(s2) if x.ncoeffs < s2 else x.truncate(s2) for x in phi]
        gamma = gamma.extend(s2) if gamma.ncoeffs < s2 else gamma.truncate(s2)
        lam = lam.extend(s2) if lam.ncoeffs < s2 else lam.truncate(s2)
        A, Ap, B, P_col = _linear_blocks(vslps, spec, ctx, phi)
        res_gamma = A.matmul(gamma.derivative_padded()).add(Ap.matmul(gamma))
        res_lam = A.matmul(lam.derivative_padded()).add(Ap.matmul(lam)).add(B)
        residual = P_col.hstack(res_gamma).hstack(res_lam)
        W = homogeneous_resolution(A, Ap, s2)
        E = constants_variation(W, A, residual, s2)
        phi = [x.add(E.entry(i, 0)) for i, x in enumerate(phi)]
        gamma = gamma.add(E.slice_cols(1, 1 + n))
        lam = lam.add(E.slice_cols(1 + n, 1 + n + ell))
    return VariationalSolution(phi=tuple(phi), gamma=gamma, lam=lam)


def residual_order(vslps: VariationalSlps, spec: Specialization, ctx: FieldCtx,
                   sol: VariationalSolution) -> int:
    """Largest k with every block of the linearized system zero mod t^k."""
    phi = list(sol.phi)
    A, Ap, B, P_col = _linear_blocks(vslps, spec, ctx, phi)
    res_gamma = A.matmul(sol.gamma.derivative_padded()).add(Ap.matmul(sol.gamma))
    res_lam = A.matmul(sol.lam.derivative_padded()).add(Ap.matmul(sol.lam)).add(B)
    blocks = P_col.hstack(res_gamma).hstack(res_lam)
    for k in range(blocks.ncoeffs):
        if any(x for row in blocks.coeffs[k] for x in row):
            return k
    return blocks.ncoeffs
