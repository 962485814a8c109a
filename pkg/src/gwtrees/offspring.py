"""Offspring distributions for critical branching processes.

A law mu on {0,1,2,...} drives the whole pipeline: the shifted step law
nu(k) = mu(k+1) (k >= -1) has zero mean exactly when mu is critical, and the
scaling constant B_n is calibrated so that W_n / B_n converges to the
spectrally positive stable variable X_1 with E[exp(-lam*X_1)] = exp(lam^theta).

Two closed-form families are provided:

* ``make_geometric(p)``: mu(k) = (1-p) p^k, critical at p = 1/2 (theta = 2).
* ``make_stable_family(theta)``: generating function f(s) = s + (1-s)^theta/theta,
  which is critical with mu(k) ~ c k^(-1-theta), c = (theta-1)/Gamma(2-theta).

Explicit finite-support laws cover everything else (tilting targets, truncated
heavy-tail laws for exact small-n work).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import gamma as _gamma

__all__ = [
    "OffspringLaw",
    "StepLaw",
    "make_geometric",
    "make_stable_family",
    "make_explicit",
    "tilt_to_critical",
    "step_law",
    "calibrate_bn",
    "law_from_spec",
    "law_to_spec",
]

SUM_TOL = 1e-12
CRIT_TOL = 1e-10
LAMBDA_TOL = 1e-12


class LawError(ValueError):
    """Invalid offspring-law parameters or an operation outside the law's domain."""


@dataclass(frozen=True, eq=False)
class OffspringLaw:
    """Probability law on {0,1,2,...} with tail metadata.

    ``family`` is one of "geometric", "stable", "explicit".  For the closed-form
    families the probability vector is extended lazily and the mass beyond any
    cached prefix is known analytically; explicit laws carry their full support.
    """

    family: str
    param: Optional[float]
    theta: float
    mean: float
    variance: float  # math.inf marks infinite variance
    tail_constant: Optional[float]  # c with mu(k) ~ c * k**(-1-theta)
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = self.probs
        if p.ndim != 1 or p.size < 1:
            raise LawError("probability vector must be one-dimensional and nonempty")
        if np.any(p < 0):
            raise LawError("negative probability entries")
        if p[0] <= 0.0:
            raise LawError("mu(0) must be positive")
        if p.size > 1 and p[1] >= 1.0:
            raise LawError("mu(1) must be < 1")
        total = float(p.sum()) + self.tail_mass(p.size - 1)
        if abs(total - 1.0) > SUM_TOL:
            raise LawError(f"probabilities sum to {total!r}, not 1")
        p.flags.writeable = False

    # -- mass bookkeeping ---------------------------------------------------

    def tail_mass(self, k: int) -> float:
        """Exact mass of {k+1, k+2, ...}.

        Geometric: p^(k+1).  Stable family: |binom(theta-1, k)| / theta, from the
        partial-sum identity of the binomial series.  Explicit: 0 beyond support.
        """
        if self.family == "geometric":
            return float(self.param) ** (k + 1)
        if self.family == "stable":
            th = self.theta
            if k == 0:
                return 1.0 - 1.0 / th
            # |binom(theta-1, k)| = (theta-1) Gamma(k-theta+1) / (Gamma(2-theta) k!)
            return (
                (th - 1.0)
                / (th * _gamma(2.0 - th))
                * math.exp(math.lgamma(k - th + 1.0) - math.lgamma(k + 1.0))
            )
        return 0.0

    def partial_mean_tail(self, k: int) -> float:
        """Exact value of sum_{j>k} j*mu(j)."""
        if self.family == "geometric":
            p = float(self.param)
            # sum_{j>k} j (1-p) p^j = p^{k+1} (k+1 + p/(1-p))
            return p ** (k + 1) * (k + 1 + p / (1.0 - p))
        if self.family == "stable":
            if k == 0:
                return 1.0
            # |binom(theta-2, k-1)| = Gamma(2-theta+k-1) / (Gamma(2-theta) (k-1)!)
            beta = 2.0 - self.theta
            return math.exp(
                math.lgamma(beta + k - 1.0) - math.lgamma(float(k))
            ) / _gamma(beta)
        return 0.0

    def probabilities(self, k_max: int) -> np.ndarray:
        """mu(0..k_max) as a vector (padded with exact values or zeros)."""
        if k_max < self.probs.size:
            return self.probs[: k_max + 1].copy()
        if self.family == "explicit":
            out = np.zeros(k_max + 1)
            out[: self.probs.size] = self.probs
            return out
        return _family_probs(self.family, float(self.param), self.theta, k_max)

    def support_cap(self, eps: float) -> int:
        """Smallest K with tail_mass(K) <= eps."""
        if self.family == "explicit":
            return self.probs.size - 1
        if self.family == "geometric":
            p = float(self.param)
            return max(0, math.ceil(math.log(eps) / math.log(p)) - 1)
        # stable family: tail(K) ~ (c/theta) K^-theta; bisect around the guess
        c = float(self.tail_constant)
        hi = max(2, int((c / (self.theta * eps)) ** (1.0 / self.theta)))
        while self.tail_mass(hi) > eps:
            hi *= 2
        lo = 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.tail_mass(mid) > eps:
                lo = mid
            else:
                hi = mid
        return hi

    # -- structural properties ----------------------------------------------

    @property
    def is_critical(self) -> bool:
        return abs(self.mean - 1.0) <= CRIT_TOL

    @property
    def is_aperiodic(self) -> bool:
        return self.span == 1

    @property
    def span(self) -> int:
        """gcd of support differences (1 = aperiodic)."""
        if self.family in ("geometric", "stable"):
            return 1  # supports {0,1,2,...} and {0,2,3,...}
        support = np.flatnonzero(self.probs > 0)
        if support.size < 2:
            return 0
        return int(np.gcd.reduce(np.diff(support)))

    def require_critical(self, what: str = "operation") -> None:
        if not self.is_critical:
            raise LawError(f"{what} requires a critical law (mean = {self.mean!r})")

    def truncate(self, cap: int, renormalize: bool = True) -> "OffspringLaw":
        """Explicit law supported on {0..cap}.

        The discarded tail mass is redistributed by renormalization (default) so
        the result is a proper, slightly subcritical law; exact identities
        (Kemperman, cycle lemma, absolute continuity) hold for it verbatim.
        """
        probs = self.probabilities(cap)
        if not renormalize and self.tail_mass(cap) > SUM_TOL:
            raise LawError("truncation discards more than the summability tolerance")
        if renormalize:
            probs = probs / probs.sum()
        return make_explicit(probs)

    # -- serialization --------------------------------------------------------

    def spec(self) -> dict:
        return law_to_spec(self)


@dataclass(frozen=True, eq=False)
class StepLaw:
    """Shifted view nu(k) = mu(k+1) for k >= -1; zero mean iff mu is critical."""

    law: OffspringLaw

    @property
    def mean(self) -> float:
        return self.law.mean - 1.0

    def nu_min1(self) -> float:
        return float(self.law.probs[0])

    def probabilities(self, k_max: int) -> np.ndarray:
        """nu(-1..k_max) as a vector indexed by k+1."""
        return self.law.probabilities(k_max + 1)

    def tail_mass(self, k: int) -> float:
        return self.law.tail_mass(k + 1)

    def support_cap(self, eps: float) -> int:
        return self.law.support_cap(eps) - 1


# -- constructors -------------------------------------------------------------


def _family_probs(family: str, param: float, theta: float, k_max: int) -> np.ndarray:
    out = np.zeros(k_max + 1)
    if family == "geometric":
        out[:] = (1.0 - param) * param ** np.arange(k_max + 1)
        return out
    # stable: mu(0)=1/theta, mu(1)=0, mu(2)=(theta-1)/2, ratio (k-theta)/(k+1)
    out[0] = 1.0 / theta
    if k_max >= 2:
        factors = np.ones(k_max - 1)
        factors[0] = (theta - 1.0) / 2.0  # mu(2)
        k = np.arange(2, k_max, dtype=float)
        factors[1:] = (k - theta) / (k + 1.0)
        out[2:] = np.cumprod(factors)
    return out


def make_geometric(p: float) -> OffspringLaw:
    """Geometric offspring law mu(k) = (1-p) p^k; critical iff p = 1/2."""
    if not 0.0 < p < 1.0:
        raise LawError(f"geometric parameter must lie in (0,1), got {p!r}")
    mean = p / (1.0 - p)
    variance = p / (1.0 - p) ** 2
    cap = max(8, math.ceil(math.log(1e-18) / math.log(p)))
    return OffspringLaw(
        family="geometric",
        param=p,
        theta=2.0,
        mean=mean,
        variance=variance,
        tail_constant=None,
        probs=_family_probs("geometric", p, 2.0, cap),
    )


def make_stable_family(theta: float) -> OffspringLaw:
    """Critical law with generating function f(s) = s + (1-s)^theta / theta.

    mu(0) = 1/theta, mu(1) = 0, mu(k) = |binom(theta, k)| / theta for k >= 2,
    so mu(k) ~ c k^(-1-theta) with c = (theta-1)/Gamma(2-theta).  Requires
    theta strictly inside (1,2): the theta = 2 member has support {0,2} and is
    periodic (use make_geometric for the finite-variance case).
    """
    if not 1.0 < theta < 2.0:
        raise LawError(f"stable family needs theta in (1,2) exclusive, got {theta!r}")
    c = (theta - 1.0) / _gamma(2.0 - theta)
    return OffspringLaw(
        family="stable",
        param=theta,
        theta=theta,
        mean=1.0,
        variance=math.inf,
        tail_constant=c,
        probs=_family_probs("stable", theta, theta, 256),
    )


def make_explicit(probs: Sequence[float]) -> OffspringLaw:
    """Finite-support law from an explicit probability vector."""
    arr = np.asarray(probs, dtype=float)
    arr = np.trim_zeros(arr, trim="b")
    if arr.size == 0:
        raise LawError("empty probability vector")
    total = arr.sum()
    if abs(total - 1.0) > SUM_TOL:
        raise LawError(f"explicit probabilities sum to {total!r}")
    k = np.arange(arr.size, dtype=float)
    mean = float(k @ arr)
    variance = float((k - mean) ** 2 @ arr)
    return OffspringLaw(
        family="explicit",
        param=None,
        theta=2.0,
        mean=mean,
        variance=variance,
        tail_constant=None,
        probs=arr,
    )


# -- operations ----------------------------------------------------------------


def step_law(law: OffspringLaw) -> StepLaw:
    """nu(k) = mu(k+1) for k >= -1."""
    return StepLaw(law)


def _tilted_mean(probs: np.ndarray, lam: float) -> float:
    k = np.arange(probs.size, dtype=float)
    w = probs * lam**k
    return float((k @ w) / w.sum())


def tilt_to_critical(law: OffspringLaw) -> OffspringLaw:
    """Exponential tilt mu_lam(k) = mu(k) lam^k / sum_i mu(i) lam^i with mean 1.

    lam is located by bracketing and bisection on the (monotone) tilted mean.
    Tilting preserves the support set and, for any n, the conditional law
    of the tree given {zeta = n}.
    """
    if law.is_critical:
        return law
    if law.family == "geometric":
        # tilting maps geometric(p) to geometric(p*lam); criticality at p*lam=1/2
        return make_geometric(0.5)
    if law.family == "stable":
        return law  # already critical by construction

    probs = law.probs
    if float(probs[1:].sum()) <= 0.0 or np.flatnonzero(probs).max() < 2:
        # support inside {0,1}: tilted mean < 1 for every lam
        raise LawError("no tilt parameter can reach mean 1: support lies in {0,1}")
    lo, hi = 1.0, 1.0
    if law.mean > 1.0:
        while _tilted_mean(probs, lo) > 1.0:
            lo *= 0.5
            if lo < 1e-300:
                raise LawError("tilt bracketing failed below (mean stays > 1)")
    else:
        while _tilted_mean(probs, hi) < 1.0:
            hi *= 2.0
            if hi > 1e300:
                raise LawError("tilt bracketing failed above (mean stays < 1)")
    while hi - lo > LAMBDA_TOL * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if _tilted_mean(probs, mid) < 1.0:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    k = np.arange(probs.size, dtype=float)
    tilted = probs * lam**k
    tilted /= tilted.sum()
    out = make_explicit(tilted)
    if abs(out.mean - 1.0) > CRIT_TOL:
        raise LawError(f"tilted mean {out.mean!r} missed criticality tolerance")
    return out


def calibrate_bn(law: OffspringLaw, n: int) -> float:
    """Scaling constant B_n with W_n / B_n -> X_1, E[exp(-lam X_1)] = exp(lam^theta).

    Finite variance sigma^2: B_n = sigma * sqrt(n/2) (the theta = 2 limit has
    variance 2).  Power tail mu(k) ~ c k^(-1-theta): Levy-measure matching gives
    B_n = (c * Gamma(2-theta) * n / (theta*(theta-1)))^(1/theta), which for the
    built-in stable family collapses to (n/theta)^(1/theta).
    """
    if n < 1:
        raise LawError("n must be >= 1")
    law.require_critical("calibrate_bn")
    if math.isfinite(law.variance):
        return math.sqrt(law.variance * n / 2.0)
    if law.tail_constant is not None:
        th = law.theta
        c = law.tail_constant
        return (c * _gamma(2.0 - th) * n / (th * (th - 1.0))) ** (1.0 / th)
    raise LawError("law has neither finite variance nor a tail constant")


# -- law file format ------------------------------------------------------------


def law_from_spec(spec: dict) -> OffspringLaw:
    """Build a law from the JSON description {"family": ..., "param": ..., "probabilities": ...}."""
    family = spec.get("family")
    if family == "geometric":
        return make_geometric(float(spec.get("param", 0.5)))
    if family == "stable":
        return make_stable_family(float(spec["param"]))
    if family == "explicit":
        return make_explicit(spec["probabilities"])
    raise LawError(f"unknown law family {family!r}")


def law_to_spec(law: OffspringLaw) -> dict:
    if law.family == "explicit":
        return {"family": "explicit", "param": None, "probabilities": law.probs.tolist()}
    return {"family": law.family, "param": law.param, "probabilities": None}
