"""Straight-line programs over {+, -, *, /}.

A tape instruction combines two operands, each of which is an input slot
``("in", i)``, an earlier tape entry ``("t", k)`` or an integer constant
``("c", v)``.  Tapes are evaluated over any commutative ring supplied by the
caller; the ring only needs ``add``, ``sub``, ``mul``, ``div`` and
``from_int``.  Division-free tapes never call ``div``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

__all__ = [
    "Instr",
    "Slp",
    "SlpDivisionError",
    "evaluate",
    "reverse_gradient",
    "slice_to_result",
    "dump_slp",
    "FractionRing",
    "FpRing",
    "FRACTIONS",
]

Operand = tuple  # ("in", i) | ("t", k) | ("c", int)


class SlpDivisionError(ZeroDivisionError):
    """Division by a non-unit during tape evaluation."""

    def __init__(self, tape_index: int):
        super().__init__(f"division by a non-unit at tape index {tape_index}")
        self.tape_index = tape_index


@dataclass(frozen=True)
class Instr:
    op: str  # + - * /
    a: Operand
    b: Operand


@dataclass(frozen=True, eq=False)
class Slp:
    inputs: tuple[str, ...]
    tape: tuple[Instr, ...]
    results: dict = field(default_factory=dict)  # label -> Operand

    @property
    def length(self) -> int:
        return len(self.tape)

    def validate(self) -> None:
        """Check acyclicity: operands only reference earlier entries."""
        for k, ins in enumerate(self.tape):
            for opd in (ins.a, ins.b):
                self._check_operand(opd, k)
            if ins.op not in "+-*/":
                raise ValueError(f"bad op {ins.op!r} at t{k}")
        for label, opd in self.results.items():
            self._check_operand(opd, len(self.tape))

    def _check_operand(self, opd: Operand, limit: int) -> None:
        tag = opd[0]
        if tag == "in":
            if not 0 <= opd[1] < len(self.inputs):
                raise ValueError(f"input slot {opd[1]} out of range")
        elif tag == "t":
            if not 0 <= opd[1] < limit:
                raise ValueError(f"forward reference t{opd[1]}")
        elif tag != "c":
            raise ValueError(f"bad operand {opd!r}")


# --------------------------------------------------------------------------
# Rings
# --------------------------------------------------------------------------

class FractionRing:
    """Exact rationals; the reference ring for cross-checks."""

    @staticmethod
    def from_int(c):
        return Fraction(c)

    @staticmethod
    def add(a, b):
        return a + b

    @staticmethod
    def sub(a, b):
        return a - b

    @staticmethod
    def mul(a, b):
        return a * b

    @staticmethod
    def div(a, b):
        if b == 0:
            raise ZeroDivisionError
        return a / b


FRACTIONS = FractionRing()


class FpRing:
    """Prime field F_p with residues represented as ints in [0, p)."""

    def __init__(self, p: int):
        self.p = p

    def from_int(self, c):
        return c % self.p

    def add(self, a, b):
        return (a + b) % self.p

    def sub(self, a, b):
        return (a - b) % self.p

    def mul(self, a, b):
        return (a * b) % self.p

    def inv(self, a):
        a %= self.p
        if a == 0:
            raise ZeroDivisionError
        return pow(a, self.p - 2, self.p)

    def div(self, a, b):
        return (a * self.inv(b)) % self.p


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------

def evaluate(slp: Slp, env: dict, ring) -> dict:
    """Run the tape over ``ring`` with inputs bound by name through ``env``.

    Returns a dict mapping each result label to its ring element.
    """
    inputs = []
    for name in slp.inputs:
        if name not in env:
            raise KeyError(f"missing input {name!r}")
        inputs.append(env[name])
    consts: dict[int, object] = {}
    vals = []

    def operand(opd):
        tag, v = opd
        if tag == "t":
            return vals[v]
        if tag == "in":
            return inputs[v]
        got = consts.get(v)
        if got is None:
            got = consts[v] = ring.from_int(v)
        return got

    add, sub, mul, div = ring.add, ring.sub, ring.mul, ring.div
    for k, ins in enumerate(slp.tape):
        a = operand(ins.a)
        b = operand(ins.b)
        op = ins.op
        if op == "+":
            vals.append(add(a, b))
        elif op == "-":
            vals.append(sub(a, b))
        elif op == "*":
            vals.append(mul(a, b))
        else:
            try:
                vals.append(div(a, b))
            except ZeroDivisionError:
                raise SlpDivisionError(k) from None
    return {label: operand(opd) for label, opd in slp.results.items()}


def slice_to_result(slp: Slp, label) -> Slp:
    """Extract the sub-program computing one result (its dependency cone)."""
    root = slp.results[label]
    needed = set()
    stack = [root]
    while stack:
        opd = stack.pop()
        if opd[0] == "t" and opd[1] not in needed:
            needed.add(opd[1])
            ins = slp.tape[opd[1]]
            stack.append(ins.a)
            stack.append(ins.b)
    remap: dict[int, int] = {}
    tape = []
    for k in sorted(needed):
        ins = slp.tape[k]
        tape.append(Instr(ins.op, _remap(ins.a, remap), _remap(ins.b, remap)))
        remap[k] = len(tape) - 1
    return Slp(slp.inputs, tuple(tape), {label: _remap(root, remap)})


def _remap(opd: Operand, remap: dict[int, int]) -> Operand:
    if opd[0] == "t":
        return ("t", remap[opd[1]])
    return opd


# --------------------------------------------------------------------------
# Reverse-mode gradient (adjoint tape construction)
# --------------------------------------------------------------------------

def reverse_gradient(slp: Slp, result=None) -> Slp:
    """Build a tape computing a scalar result and all its partial derivatives.

    The returned program shares the forward computation and appends adjoint
    instructions; its results are ``"value"`` plus ``("d", name)`` for every
    input slot.  Length stays within 5x the (sliced) forward length plus a
    small constant.
    """
    if result is None:
        if len(slp.results) != 1:
            raise ValueError("result label required for multi-result programs")
        result = next(iter(slp.results))
    fwd = slice_to_result(slp, result)
    root = fwd.results[result]
    tape = list(fwd.tape)

    def emit(op, a, b) -> Operand:
        tape.append(Instr(op, a, b))
        return ("t", len(tape) - 1)

    adj: dict[Operand, Operand] = {}

    def accumulate(target: Operand, delta: Operand) -> None:
        if target[0] == "c":
            return
        cur = adj.get(target)
        adj[target] = delta if cur is None else emit("+", cur, delta)

    if root[0] != "c":
        adj[root] = ("c", 1)
    for k in range(len(fwd.tape) - 1, -1, -1):
        bar = adj.get(("t", k))
        if bar is None:
            continue
        ins = fwd.tape[k]
        if ins.op == "+":
            accumulate(ins.a, bar)
            accumulate(ins.b, bar)
        elif ins.op == "-":
            accumulate(ins.a, bar)
            accumulate(ins.b, emit("-", ("c", 0), bar))
        elif ins.op == "*":
            if ins.a[0] != "c":
                accumulate(ins.a, emit("*", bar, ins.b))
            if ins.b[0] != "c":
                accumulate(ins.b, emit("*", bar, ins.a))
        else:  # v = a/b:  da += bar/b,  db -= (bar/b)*v
            t1 = emit("/", bar, ins.b)
            accumulate(ins.a, t1)
            if ins.b[0] != "c":
                t2 = emit("*", t1, ("t", k))
                accumulate(ins.b, emit("-", ("c", 0), t2))
    results = {"value": root}
    for i, name in enumerate(fwd.inputs):
        results[("d", name)] = adj.get(("in", i), ("c", 0))
    return Slp(fwd.inputs, tuple(tape), results)


# --------------------------------------------------------------------------
# Debug dump
# --------------------------------------------------------------------------

def _operand_text(slp: Slp, opd: Operand) -> str:
    tag, v = opd
    if tag == "t":
        return f"t{v}"
    if tag == "in":
        return slp.inputs[v]
    return str(v)


def dump_slp(slp: Slp) -> str:
    """One instruction per line: ``t<k> = <operand> <op> <operand>``."""
    lines = [
        f"t{k} = {_operand_text(slp, ins.a)} {ins.op} {_operand_text(slp, ins.b)}"
        for k, ins in enumerate(slp.tape)
    ]
    for label, opd in slp.results.items():
        lines.append(f"{label} := {_operand_text(slp, opd)}")
    return "\n".join(lines)
