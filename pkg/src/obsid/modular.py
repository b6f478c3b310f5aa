"""Degree/height bounds, working-prime selection and random specialization.

The bounds drive both the prime size and the sampling range: with integers
drawn from {0, ..., mu*D} and arithmetic done modulo a prime p > 2*D'*mu,
the classification is correct with probability at least (1 - 1/mu)^2.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

from .compile import SlpBundle
from .metrics import ModelMetrics
from .model import Model
from .slp import FpRing, evaluate

__all__ = [
    "Bounds",
    "FieldCtx",
    "Specialization",
    "DegenerateModelError",
    "compute_bounds",
    "prop6_height",
    "select_prime",
    "sample_specialization",
    "probability_bound",
    "is_prime",
    "next_prime",
]


class DegenerateModelError(RuntimeError):
    """A denominator vanished at every resampled specialization."""


@dataclass(frozen=True)
class Bounds:
    D: int        # degree bound 4(n+ell)^2 (n+m) d
    Dprime: int   # height bound, natural-log scale, rounded up
    mu: int


@dataclass(frozen=True)
class FieldCtx:
    p: int


@dataclass(frozen=True)
class Specialization:
    x0: tuple[int, ...]
    theta: tuple[int, ...]
    input_series: tuple[tuple[int, ...], ...]  # one coefficient list per input
    seed: int

    @property
    def h0(self) -> float:
        """Height of the sampled integers (diagnostic)."""
        top = max([1, *self.x0, *self.theta,
                   *(c for s in self.input_series for c in s)])
        return math.log(top + 1)


def compute_bounds(metrics: ModelMetrics, mu: int = 3000) -> Bounds:
    """Degree bound D and height bound D' for the confidence integer mu."""
    if mu < 2:
        raise ValueError("mu must be at least 2")
    n, ell, r, m, d, h = (metrics.n, metrics.ell, metrics.r, metrics.m,
                          metrics.d, metrics.h)
    D = 4 * (n + ell) ** 2 * (n + m) * d
    dprime = ((2 * math.log(n + ell + r + 1) + math.log(mu * D)) * D
              + 4 * (n + ell) ** 2 * ((n + m) * h + math.log(2 * n * D)))
    return Bounds(D=D, Dprime=math.ceil(dprime), mu=mu)


def prop6_height(metrics: ModelMetrics, nu: int, mu: int = 3000) -> tuple[int, int]:
    """Sharper degree/height pair using a measured differentiation index.

    Diagnostic only: prime selection always uses compute_bounds so the
    headline probability guarantee applies unconditionally.
    """
    n, ell, r, m, d, h = (metrics.n, metrics.ell, metrics.r, metrics.m,
                          metrics.d, metrics.h)
    D6 = (n + ell) * (2 * nu + 1) * (n + m) * d
    hc = ((2 * math.log(n + ell + r + 1) + math.log(D6)) * D6
          + (n + ell) * (2 * nu + 1) * ((n + m) * h + math.log(2 * n * D6)))
    return D6, math.ceil(hc)


def probability_bound(mu: int) -> Fraction:
    if mu < 1:
        raise ValueError("mu must be positive")
    return Fraction(mu - 1, mu) ** 2


# --------------------------------------------------------------------------
# Primes
# --------------------------------------------------------------------------

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)

# Deterministic Miller-Rabin witness set, valid far beyond 2^64.
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for q in _SMALL_PRIMES:
        if n == q:
            return True
        if n % q == 0:
            return False
    d = n - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = (x * x) % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime(n: int) -> int:
    """Smallest prime strictly greater than n."""
    k = n + 1
    if k <= 2:
        return 2
    if k % 2 == 0:
        k += 1
    while not is_prime(k):
        k += 2
    return k


def select_prime(bounds: Bounds, min_exclusive: int = 0) -> FieldCtx:
    """Smallest prime above both 2*D'*mu and any extra floor (e.g. nu+2)."""
    threshold = max(2 * bounds.Dprime * bounds.mu, min_exclusive)
    return FieldCtx(p=next_prime(threshold))


# --------------------------------------------------------------------------
# Specialization sampling
# --------------------------------------------------------------------------

def sample_specialization(model: Model, bundle: SlpBundle, bounds: Bounds,
                          ctx: FieldCtx, seed: int,
                          max_attempts: int = 5) -> Specialization:
    """Draw (X0, Theta, U) with every denominator nonzero mod p at t = 0.

    All integers come from {0, ..., mu*D}; inputs become polynomials with
    n+ell+1 random coefficients.  Resamples up to max_attempts times before
    declaring the model degenerate.
    """
    rng = random.Random(seed)
    hi = bounds.mu * bounds.D
    ring = FpRing(ctx.p)
    ncoeffs = model.n + model.ell + 1
    labels = bundle.denominator_labels()
    for _ in range(max_attempts):
        x0 = tuple(rng.randint(0, hi) for _ in model.states)
        theta = tuple(rng.randint(0, hi) for _ in model.params)
        input_series = tuple(
            tuple(rng.randint(0, hi) for _ in range(ncoeffs)) for _ in model.inputs)
        env = {}
        env.update({nm: v % ctx.p for nm, v in zip(model.states, x0)})
        env.update({nm: v % ctx.p for nm, v in zip(model.params, theta)})
        env.update({nm: s[0] % ctx.p for nm, s in zip(model.inputs, input_series)})
        values = evaluate(bundle.slp, env, ring)
        if all(values[lab] % ctx.p != 0 for lab in labels):
            return Specialization(x0=x0, theta=theta, input_series=input_series,
                                  seed=seed)
    raise DegenerateModelError(
        f"a denominator of {model.name!r} vanished at {max_attempts} random "
        "specializations; the model likely has a structurally zero denominator")
