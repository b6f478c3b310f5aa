"""Jacobian assembly, modular rank tests, classification and orchestration.

The specialized Jacobian stacks, block by derivative order j, the t^j
coefficients of the output sensitivity rows evaluated on the series
solution.  The transcendence degree is phi = (n+ell) - rank, and a symbol
is observable exactly when deleting its column drops the rank by one.
A full-rank Jacobian certifies the all-observable verdict; every other
verdict carries the (1 - 1/mu)^2 probability bound.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from fractions import Fraction

from .compile import VariationalSlps, build_variational, compile_numden
from .metrics import ModelMetrics, measure_metrics
from .model import Model
from .modular import (Bounds, FieldCtx, Specialization, compute_bounds,
                      is_prime, probability_bound, sample_specialization,
                      select_prime)
from .series import SeriesRing, TruncSeries
from .varsolve import VariationalSolution, newton_iterate, solve_recurrence

__all__ = [
    "JacobianMatrix",
    "Classification",
    "ObservabilityReport",
    "RunConfig",
    "jacobian_from_series",
    "rank_fp",
    "block_ranks",
    "detect_nu",
    "classify",
    "classify_assuming_known",
    "run_test",
    "report_to_json",
    "report_to_text",
]


@dataclass(frozen=True, eq=False)
class JacobianMatrix:
    """m*(nu+1) x (n+ell) residue matrix of output-derivative coefficients."""

    rows: tuple[tuple[int, ...], ...]
    p: int
    row_labels: tuple[tuple[int, int], ...]  # (output index, coefficient order)
    col_labels: tuple[str, ...]              # states then parameters
    m: int
    nu: int

    def block(self, count: int) -> list[tuple[int, ...]]:
        """The rows of the first ``count`` coefficient blocks."""
        return list(self.rows[: count * self.m])


def jacobian_from_series(vslps: VariationalSlps, sol: VariationalSolution,
                         spec: Specialization, ctx: FieldCtx,
                         nu: int) -> JacobianMatrix:
    """Assemble coefficient blocks j = 0..nu of the sensitivity rows.

    Rows are raw series coefficients; the j! scaling that would turn them
    into derivative rows is omitted as it never changes any rank for p > nu.
    """
    model = vslps.model
    p = ctx.p
    ncoeffs = sol.ncoeffs
    if nu + 1 > ncoeffs:
        raise ValueError("solution order too small for the requested nu")
    ring = SeriesRing(p, ncoeffs)
    env = {}
    for nm, s in zip(model.states, sol.phi):
        env[nm] = s
    for nm, v in zip(model.params, spec.theta):
        env[nm] = ring.from_int(v)
    for nm, coeffs in zip(model.inputs, spec.input_series):
        padded = list(coeffs[:ncoeffs]) + [0] * max(0, ncoeffs - len(coeffs))
        env[nm] = TruncSeries(padded, p)
    series_rows = vslps.evaluate_nabla_y(env, sol.gamma.entries(),
                                         sol.lam.entries(), ring)
    rows = []
    labels = []
    for j in range(nu + 1):
        for o in range(model.m):
            rows.append(tuple(s.coeffs[j] for s in series_rows[o]))
            labels.append((o, j))
    return JacobianMatrix(rows=tuple(rows), p=p, row_labels=tuple(labels),
                          col_labels=model.unknowns, m=model.m, nu=nu)


def rank_fp(rows, p: int) -> int:
    """Rank over F_p by Gaussian elimination on a working copy."""
    work = [list(r) for r in rows]
    if not work:
        return 0
    ncols = len(work[0])
    rank = 0
    row = 0
    for col in range(ncols):
        pivot = next((r for r in range(row, len(work)) if work[r][col] % p), None)
        if pivot is None:
            continue
        work[row], work[pivot] = work[pivot], work[row]
        inv = pow(work[row][col] % p, p - 2, p)
        work[row] = [(x * inv) % p for x in work[row]]
        for r in range(len(work)):
            if r != row and work[r][col] % p:
                f = work[r][col] % p
                work[r] = [(x - f * y) % p for x, y in zip(work[r], work[row])]
        rank += 1
        row += 1
        if row == len(work):
            break
    return rank


def block_ranks(jac: JacobianMatrix) -> list[int]:
    """Rank of the first k coefficient blocks, for k = 1..nu+1."""
    return [rank_fp(jac.block(k), jac.p) for k in range(1, jac.nu + 2)]


def detect_nu(jac: JacobianMatrix) -> int:
    """First coefficient count at which the block ranks become stationary.

    Returns the smallest k with rank(k blocks) = rank(k+1 blocks), capped at
    the number of available blocks.
    """
    ranks = block_ranks(jac)
    for k in range(1, len(ranks)):
        if ranks[k - 1] == ranks[k]:
            return k
    return len(ranks)


@dataclass(frozen=True)
class Classification:
    observable: tuple[str, ...]
    non_observable: tuple[str, ...]
    phi: int
    rank: int
    certified: bool


def classify(jac: JacobianMatrix, assume_known=()) -> Classification:
    """Column-removal rank test on every unknown not assumed known.

    A symbol is observable exactly when deleting its column drops the rank
    by one; rank = #columns certifies the all-observable verdict.
    """
    known = set(assume_known)
    for s in known:
        if s not in jac.col_labels:
            raise ValueError(f"unknown symbol {s!r} in assume_known")
    keep = [i for i, c in enumerate(jac.col_labels) if c not in known]
    cols = [jac.col_labels[i] for i in keep]
    sub = [[row[i] for i in keep] for row in jac.rows]
    r = rank_fp(sub, jac.p)
    phi = len(cols) - r
    observable, non_observable = [], []
    for idx, name in enumerate(cols):
        reduced = [row[:idx] + row[idx + 1:] for row in sub]
        if rank_fp(reduced, jac.p) == r - 1:
            observable.append(name)
        else:
            non_observable.append(name)
    return Classification(
        observable=tuple(observable),
        non_observable=tuple(non_observable),
        phi=phi,
        rank=r,
        certified=(r == len(cols)),
    )


def classify_assuming_known(jac: JacobianMatrix, known) -> Classification:
    """Adjoin the given symbols to the base field: delete their columns."""
    return classify(jac, assume_known=known)


# --------------------------------------------------------------------------
# Orchestration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    mu: int = 3000
    seed: int | None = None
    prime: int | None = None
    force_prime: bool = False
    assume_known: tuple[str, ...] = ()
    max_coeffs: int | None = None
    solver: str = "newton"  # or "recurrence"


@dataclass(frozen=True, eq=False)
class ObservabilityReport:
    model_name: str
    p: int
    mu: int
    seed: int
    nu: int
    phi: int
    rank: int
    certified: bool
    observable: tuple[str, ...]
    non_observable: tuple[str, ...]
    assumed_known: tuple[str, ...]
    probability: Fraction
    metrics: ModelMetrics
    bounds: Bounds
    detected_nu: int
    block_rank_profile: tuple[int, ...]
    timings: dict = field(default_factory=dict)


def _reported_nu(certified: bool, ranks: list[int], full_rank_target: int,
                 ncoeffs: int) -> int:
    """Coefficient count a rank-aware early stop would have used.

    Certified runs stop at the first doubling order whose blocks already
    show full rank; without full rank no stop is sound, so the cap n+ell+1
    is reported.
    """
    if not certified:
        return ncoeffs
    s = 1
    while True:
        k = min(s, ncoeffs)
        if ranks[k - 1] == full_rank_target or k == ncoeffs:
            return k
        s *= 2


def run_test(model: Model, config: RunConfig = RunConfig()) -> ObservabilityReport:
    """The full observability test: bounds, prime, specialization, series
    solution, Jacobian blocks, rank tests and per-symbol classification.

    Deterministic given (model, config, seed).
    """
    timings = {}
    t0 = time.perf_counter()
    metrics = measure_metrics(model)
    bounds = compute_bounds(metrics, config.mu)
    ncoeffs = model.n + model.ell + 1
    if config.max_coeffs is not None:
        ncoeffs = min(ncoeffs, max(2, config.max_coeffs))
    if config.prime is not None:
        p = config.prime
        if not is_prime(p):
            raise ValueError(f"prime override {p} is not prime")
        if p <= ncoeffs + 1:
            raise ValueError(f"prime override {p} is too small for order {ncoeffs}")
        if p <= 2 * bounds.Dprime * bounds.mu and not config.force_prime:
            raise ValueError(
                f"prime override {p} is below the guarantee threshold "
                f"{2 * bounds.Dprime * bounds.mu}; pass force_prime to accept")
        ctx = FieldCtx(p=p)
    else:
        ctx = select_prime(bounds, min_exclusive=ncoeffs + 1)
    seed = config.seed
    if seed is None:
        seed = int.from_bytes(os.urandom(8), "big")
    timings["setup"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    bundle = compile_numden(model)
    vslps = build_variational(bundle)
    spec = sample_specialization(model, bundle, bounds, ctx, seed)
    if config.solver == "recurrence":
        sol = solve_recurrence(vslps, spec, ctx, ncoeffs)
    else:
        sol = newton_iterate(vslps, spec, ctx, ncoeffs)
    timings["solve"] = time.perf_counter() - t1

    t2 = time.perf_counter()
    jac = jacobian_from_series(vslps, sol, spec, ctx, ncoeffs - 1)
    ranks = block_ranks(jac)
    result = classify(jac, assume_known=config.assume_known)
    detected = detect_nu(jac)
    nu = _reported_nu(result.certified and not config.assume_known,
                      ranks, model.n + model.ell, ncoeffs)
    timings["rank"] = time.perf_counter() - t2
    timings["total"] = time.perf_counter() - t0

    return ObservabilityReport(
        model_name=model.name,
        p=ctx.p,
        mu=config.mu,
        seed=seed,
        nu=nu,
        phi=result.phi,
        rank=result.rank,
        certified=result.certified,
        observable=result.observable,
        non_observable=result.non_observable,
        assumed_known=tuple(config.assume_known),
        probability=probability_bound(config.mu),
        metrics=metrics,
        bounds=bounds,
        detected_nu=detected,
        block_rank_profile=tuple(ranks),
        timings=timings,
    )


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------

def _probability_text(fr: Fraction) -> str:
    scaled = fr.numerator * 10**10 // fr.denominator
    return f"0.{scaled:010d}" if fr < 1 else "1.0000000000"


def report_to_json(report: ObservabilityReport) -> str:
    payload = {
        "model": report.model_name,
        "p": report.p,
        "mu": report.mu,
        "seed": report.seed,
        "nu": report.nu,
        "phi": report.phi,
        "rank": report.rank,
        "certified": report.certified,
        "observable": list(report.observable),
        "non_observable": list(report.non_observable),
        "assumed_known": list(report.assumed_known),
        "probability_bound": _probability_text(report.probability),
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def report_to_text(report: ObservabilityReport) -> str:
    m = report.metrics
    lines = [
        f"model: {report.model_name}",
        f"  n={m.n} states, ell={m.ell} parameters, r={m.r} inputs, "
        f"m={m.m} outputs; d={m.d}, L={m.L}",
        f"  prime p = {report.p}   mu = {report.mu}   seed = {report.seed}",
        f"  nu (coefficient count) = {report.nu}",
        f"  rank = {report.rank} / {len(report.observable) + len(report.non_observable)}"
        f"   phi = {report.phi}",
        f"  certified: {'yes' if report.certified else 'no'}",
        f"  probability bound: {_probability_text(report.probability)}"
        + ("  (certified verdicts are exact)" if report.certified else ""),
    ]
    if report.assumed_known:
        lines.append(f"  assumed known ({len(report.assumed_known)}): "
                     + ", ".join(report.assumed_known))
    lines.append(f"  observable ({len(report.observable)}): "
                 + (", ".join(report.observable) if report.observable else "-"))
    lines.append(f"  non-observable ({len(report.non_observable)}): "
                 + (", ".join(report.non_observable) if report.non_observable else "-"))
    if report.timings:
        lines.append(f"  time: {report.timings.get('total', 0.0):.2f}s")
    return "\n".join(lines)
