"""Compilation of rational models to division-free straight-line programs.

Every right-hand side f_i and output map g_j is turned into a
numerator/denominator pair of division-free tape results, sharing one tape.
Powers compile to repeated squaring; multiplications by the constant 1 and
additions of 0 are elided so the tape length stays close to the source size.

``build_variational`` derives, by one reverse-gradient sweep per row, the
programs behind the linearized system: the numerator residuals
P_i = q_i*xdot_i - p_i, their partials with respect to states and
parameters, and the output sensitivity rows.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import BinOp, Const, Expr, Model, Pow, Var
from .slp import Instr, Slp, evaluate, reverse_gradient

__all__ = ["SlpBundle", "VariationalSlps", "compile_numden", "build_variational"]

_ONE = ("c", 1)
_ZERO = ("c", 0)


class _Builder:
    def __init__(self, inputs: tuple[str, ...]):
        self.inputs = inputs
        self.slot = {name: ("in", i) for i, name in enumerate(inputs)}
        self.tape: list[Instr] = []

    def emit(self, op, a, b):
        self.tape.append(Instr(op, a, b))
        return ("t", len(self.tape) - 1)

    def add(self, a, b):
        if a == _ZERO:
            return b
        if b == _ZERO:
            return a
        if a[0] == "c" and b[0] == "c":
            return ("c", a[1] + b[1])
        return self.emit("+", a, b)

    def sub(self, a, b):
        if b == _ZERO:
            return a
        if a[0] == "c" and b[0] == "c":
            return ("c", a[1] - b[1])
        return self.emit("-", a, b)

    def mul(self, a, b):
        if a == _ONE:
            return b
        if b == _ONE:
            return a
        if a == _ZERO or b == _ZERO:
            return _ZERO
        if a[0] == "c" and b[0] == "c":
            return ("c", a[1] * b[1])
        return self.emit("*", a, b)

    def pow(self, a, k: int):
        if k == 0:
            return _ONE
        acc = None
        base = a
        while k:
            if k & 1:
                acc = base if acc is None else self.mul(acc, base)
            k >>= 1
            if k:
                base = self.mul(base, base)
        return acc


def _compile_pair(b: _Builder, e: Expr):
    """Return operands (num, den) with e = num/den and no division emitted."""
    if isinstance(e, Const):
        return ("c", e.value), _ONE
    if isinstance(e, Var):
        return b.slot[e.name], _ONE
    if isinstance(e, Pow):
        n, d = _compile_pair(b, e.base)
        return b.pow(n, e.exponent), b.pow(d, e.exponent)
    n1, d1 = _compile_pair(b, e.left)
    n2, d2 = _compile_pair(b, e.right)
    if e.op == "*":
        return b.mul(n1, n2), b.mul(d1, d2)
    if e.op == "/":
        return b.mul(n1, d2), b.mul(d1, n2)
    # + or - over the common denominator; reuse it when both sides share one
    if d1 == d2:
        num = b.add(n1, n2) if e.op == "+" else b.sub(n1, n2)
        return num, d1
    lhs = b.mul(n1, d2)
    rhs = b.mul(n2, d1)
    num = b.add(lhs, rhs) if e.op == "+" else b.sub(lhs, rhs)
    return num, b.mul(d1, d2)


@dataclass(frozen=True, eq=False)
class SlpBundle:
    """Division-free tape with numerator/denominator result pairs.

    Result labels are ("p", i)/("q", i) for each state equation and
    ("gnum", j)/("gden", j) for each output map.  Input slots are the
    model's states, then parameters, then inputs.
    """

    model: Model
    slp: Slp

    def denominator_labels(self):
        labels = [("q", i) for i in range(self.model.n)]
        labels += [("gden", j) for j in range(self.model.m)]
        return labels


def compile_numden(model: Model) -> SlpBundle:
    inputs = model.states + model.params + model.inputs
    b = _Builder(inputs)
    results = {}
    for i, rhs in enumerate(model.f):
        num, den = _compile_pair(b, rhs)
        results[("p", i)] = num
        results[("q", i)] = den
    for j, rhs in enumerate(model.g):
        num, den = _compile_pair(b, rhs)
        results[("gnum", j)] = num
        results[("gden", j)] = den
    slp = Slp(inputs, tuple(b.tape), results)
    slp.validate()
    assert all(ins.op != "/" for ins in slp.tape)
    return SlpBundle(model, slp)


# --------------------------------------------------------------------------
# Variational programs
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class VariationalSlps:
    """Gradient tapes for every numerator/denominator, plus assembly helpers.

    The partial-derivative blocks of P_i = q_i*xdot_i - p_i follow from the
    chain rule as dP_i/dxdot_j = q_i when i = j (diagonal), and
    dP_i/ds = dq_i/ds * xdot_i - dp_i/ds for any state or parameter s.
    """

    bundle: SlpBundle
    p_grads: tuple[Slp, ...]
    q_grads: tuple[Slp, ...]
    gnum_grads: tuple[Slp, ...]
    gden_grads: tuple[Slp, ...]

    @property
    def model(self) -> Model:
        return self.bundle.model

    def _grad_values(self, slps, env, ring):
        return [evaluate(s, env, ring) for s in slps]

    def evaluate_blocks(self, env, xdot, ring):
        """P, diag(q), dP/dX and dP/dTheta at a point or series environment."""
        model = self.model
        pg = self._grad_values(self.p_grads, env, ring)
        qg = self._grad_values(self.q_grads, env, ring)
        p_val = [r["value"] for r in pg]
        q_val = [r["value"] for r in qg]
        P = [ring.sub(ring.mul(q_val[i], xdot[i]), p_val[i]) for i in range(model.n)]

        def partial(i, name):
            return ring.sub(ring.mul(qg[i][("d", name)], xdot[i]), pg[i][("d", name)])

        dPdX = [[partial(i, s) for s in model.states] for i in range(model.n)]
        dPdTheta = [[partial(i, th) for th in model.params] for i in range(model.n)]
        return p_val, q_val, P, dPdX, dPdTheta

    def evaluate_pq(self, env, ring):
        res = evaluate(self.bundle.slp, env, ring)
        p_val = [res[("p", i)] for i in range(self.model.n)]
        q_val = [res[("q", i)] for i in range(self.model.n)]
        return p_val, q_val

    def evaluate_output_jacobian(self, env, ring):
        """Rows dG/dX (m x n) and dG/dTheta (m x ell) by the quotient rule."""
        model = self.model
        ag = self._grad_values(self.gnum_grads, env, ring)
        bg = self._grad_values(self.gden_grads, env, ring)

        rows_x, rows_th, values = [], [], []
        for o in range(model.m):
            a, bden = ag[o]["value"], bg[o]["value"]
            inv_b2 = ring.div(ring.from_int(1), ring.mul(bden, bden))

            def dg(name):
                num = ring.sub(ring.mul(ag[o][("d", name)], bden),
                               ring.mul(a, bg[o][("d", name)]))
                return ring.mul(num, inv_b2)

            rows_x.append([dg(s) for s in model.states])
            rows_th.append([dg(th) for th in model.params])
            values.append(ring.div(a, bden))
        return rows_x, rows_th, values

    def evaluate_nabla_y(self, env, gamma, lam, ring):
        """The m x (n+ell) sensitivity rows (dG/dX*Gamma | dG/dX*Lambda + dG/dTheta)."""
        model = self.model
        dgx, dgt, _ = self.evaluate_output_jacobian(env, ring)
        n, ell = model.n, model.ell
        rows = []
        for o in range(model.m):
            row = []
            for c in range(n):
                acc = ring.mul(dgx[o][0], gamma[0][c]) if n else ring.from_int(0)
                for j in range(1, n):
                    acc = ring.add(acc, ring.mul(dgx[o][j], gamma[j][c]))
                row.append(acc)
            for k in range(ell):
                acc = dgt[o][k]
                for j in range(n):
                    acc = ring.add(acc, ring.mul(dgx[o][j], lam[j][k]))
                row.append(acc)
            rows.append(row)
        return rows


def build_variational(bundle: SlpBundle) -> VariationalSlps:
    model = bundle.model

    def grads(kind, count):
        return tuple(reverse_gradient(bundle.slp, (kind, i)) for i in range(count))

    return VariationalSlps(
        bundle=bundle,
        p_grads=grads("p", model.n),
        q_grads=grads("q", model.n),
        gnum_grads=grads("gnum", model.m),
        gden_grads=grads("gden", model.m),
    )
