"""Exact finite-n probability computations for the left-continuous walk.

The walk W has i.i.d. steps nu(k) = mu(k+1), k >= -1, so it moves down by at
most 1 per step.  That skip-free structure gives two workhorses:

* Kemperman's formula P[zeta_j = n] = (j/n) P[W_n = -j], linking hitting times
  of -j to plain walk marginals;
* ceiling protection: when building the law of W_n by convolution, any mass
  clipped above ``hi + (n - m)`` at an intermediate step m can never return
  below ``hi`` within the remaining n - m steps, so the final table is exact on
  [-n, hi] no matter how heavy the step tail is.  The clipped mass is tracked
  in ``truncated_mass``.

Total-progeny laws are computed along two independent routes (Kemperman from
walk tables, and the branching recursion through the generating function) and
cross-checked; hitting probabilities phi_n(j) = P[zeta_j = n] for whole ranges
of j come from convolution powers of the progeny law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, List, Optional, Tuple

import numpy as np
from scipy.signal import fftconvolve

from .codings import Tree
from .offspring import OffspringLaw, StepLaw
from .report import ExperimentReport

__all__ = [
    "PmfTable",
    "SubPmf",
    "ExactLawError",
    "walk_pmf",
    "progeny_pmf",
    "phi",
    "phi_star",
    "phi_phi_star_at",
    "discrete_ratio",
    "discrete_ratio_window",
    "ratio_weighted_mean",
    "enumerate_conditioned",
    "check_absolute_continuity",
    "progeny_rho",
    "meander_pmf",
]

MASS_TOL = 1e-12


class ExactLawError(RuntimeError):
    """Truncation budget exceeded or a cross-check between exact routes failed."""


@dataclass(frozen=True, eq=False)
class PmfTable:
    """Finite-support pmf with its smallest represented value and clipped mass.

    Entries at values <= ``exact_hi`` are exact up to float rounding; values
    above may have lost mass to ceiling clipping (tracked in truncated_mass).
    """

    offset: int
    masses: np.ndarray
    truncated_mass: float
    exact_hi: Optional[int] = None

    def __post_init__(self):
        if np.any(self.masses < 0):
            raise ExactLawError("negative pmf entry")
        total = float(self.masses.sum()) + self.truncated_mass
        if abs(total - 1.0) > MASS_TOL:
            raise ExactLawError(f"pmf mass {total!r} differs from 1 beyond budget")
        self.masses.flags.writeable = False

    @property
    def lo(self) -> int:
        return self.offset

    @property
    def hi(self) -> int:
        return self.offset + self.masses.size - 1

    def prob(self, k: int) -> float:
        i = k - self.offset
        if 0 <= i < self.masses.size:
            return float(self.masses[i])
        return 0.0

    def probs(self, ks) -> np.ndarray:
        ks = np.asarray(ks)
        i = ks - self.offset
        out = np.zeros(ks.shape)
        ok = (i >= 0) & (i < self.masses.size)
        out[ok] = self.masses[i[ok]]
        return out


@dataclass(frozen=True, eq=False)
class SubPmf:
    """Sub-probability table (killed / clipped walk states).

    ``clipped_mass`` is the mass removed by ceiling clipping; entries on
    [offset, exact_hi] are exact.  The defect 1 - sum - clipped is the killed mass.
    """

    offset: int
    masses: np.ndarray
    clipped_mass: float
    exact_hi: int

    @property
    def lo(self) -> int:
        return self.offset

    @property
    def hi(self) -> int:
        return self.offset + self.masses.size - 1


# -- convolution plumbing --------------------------------------------------------


def _conv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.size * b.size <= 1 << 20 or min(a.size, b.size) <= 96:
        return np.convolve(a, b)
    out = fftconvolve(a, b)
    np.maximum(out, 0.0, out=out)
    return out


def _clip_hi(offset: int, arr: np.ndarray, hi: int) -> Tuple[int, np.ndarray]:
    """Drop entries above value hi."""
    keep = hi - offset + 1
    if keep >= arr.size:
        return offset, arr
    if keep <= 0:
        raise ExactLawError("ceiling clipped the entire table")
    return offset, arr[:keep]


def _step_table(step: StepLaw, hi: int) -> Tuple[int, np.ndarray]:
    """nu on [-1, min(hi, cap)]: exact entries, negligible analytic tail trimmed.

    The trim threshold 1e-18 keeps the cumulative bookkeeping error of an
    n-step build below ~n * 1e-18, far inside the 1e-12 mass budget; heavy
    tails (no usable cap) are kept at full width hi for pointwise exactness.
    """
    cap = step.support_cap(1e-18)
    return -1, step.probabilities(min(hi, max(cap, 1)))


def _walk_table_raw(step: StepLaw, n: int, hi_eval: int) -> Tuple[int, np.ndarray]:
    """Law of W_n, exact on [-n, hi_eval], by binary-decomposition convolution.

    Intermediate m-step tables are clipped at hi_eval + (n - m); the walk cannot
    descend more than n - m in the remaining steps, so clipped mass never
    contaminates the protected window.
    """
    if n < 1:
        raise ExactLawError("n must be >= 1")
    ceil1 = hi_eval + (n - 1)
    off1, t1 = _step_table(step, ceil1)
    if n == 1:
        return off1, t1
    acc_off, acc, acc_m = None, None, 0
    pw_off, pw, pw_m = off1, t1, 1
    bits = n
    while bits:
        if bits & 1:
            if acc is None:
                acc_off, acc, acc_m = pw_off, pw, pw_m
            else:
                acc_off, acc = _clip_hi(
                    acc_off + pw_off, _conv(acc, pw), hi_eval + (n - acc_m - pw_m)
                )
                acc_m += pw_m
        bits >>= 1
        if bits:
            pw_off, pw = _clip_hi(
                2 * pw_off, _conv(pw, pw), hi_eval + (n - 2 * pw_m)
            )
            pw_m *= 2
    return acc_off, acc


def _finish_table(offset: int, arr: np.ndarray, exact_hi: Optional[int]) -> PmfTable:
    total = float(arr.sum())
    return PmfTable(
        offset=offset,
        masses=arr,
        truncated_mass=max(0.0, 1.0 - total),
        exact_hi=exact_hi,
    )


def walk_pmf(
    step: StepLaw, n: int, window: Optional[Tuple[int, int]] = None
) -> PmfTable:
    """Exact law of W_n = sum of n i.i.d. nu-steps.

    ``window = (lo, hi)`` guarantees exact entries on [max(lo, -n), hi]; with
    ``window=None`` the full support [-n, K*n] is built when the step law has a
    usable support cap K, otherwise hi defaults to a bulk window of ~64 * n^(1/theta).
    """
    if window is None:
        cap = step.support_cap(1e-18)
        if cap * n <= 1 << 22:
            hi_eval = cap * n
        else:
            hi_eval = int(64.0 * n ** (1.0 / step.law.theta)) + 1
    else:
        hi_eval = int(window[1])
    if hi_eval < 1 - n:
        raise ExactLawError("window top below the walk's minimum")
    off, arr = _walk_table_raw(step, n, hi_eval)
    return _finish_table(off, arr, exact_hi=hi_eval)


def _walk_tables_iter(
    step: StepLaw, n: int, hi_eval: int
) -> Iterator[Tuple[int, int, np.ndarray]]:
    """Yield (m, offset, table of W_m) for m = 1..n, exact on [-m, hi_eval] each.

    A single moving ceiling hi_eval + (n - m) keeps every intermediate table
    exact on (-inf, hi_eval] for all later steps as well.
    """
    ceil1 = hi_eval + (n - 1)
    off, arr = _step_table(step, ceil1)
    _, t1 = off, arr
    yield 1, off, arr
    for m in range(2, n + 1):
        off, arr = _clip_hi(off - 1, _conv(arr, t1), hi_eval + (n - m))
        yield m, off, arr


# -- total progeny -----------------------------------------------------------------


def _rho_recursion(law: OffspringLaw, n_max: int) -> np.ndarray:
    """P[zeta = p] for p = 0..n_max via the branching (generating-function) route.

    Uses the coefficient recursion of R(z) = z f(R(z)) specialized per family:
    geometric laws close through F = (1-p) + p F R, the stable family through
    the series A = (1-R)^theta, and explicit laws through incremental powers
    of R.  No walk table is consulted, so this is independent of Kemperman.
    """
    rho = np.zeros(n_max + 1)
    if n_max < 1:
        return rho
    if law.family == "geometric":
        p = float(law.param)
        F = np.empty(max(n_max, 1))
        F[0] = 1.0 - p
        rho[1] = F[0]
        for m in range(1, n_max):
            F[m] = p * float(np.dot(F[:m], rho[m:0:-1]))
            rho[m + 1] = F[m]
        return rho
    if law.family == "stable":
        th = law.theta
        rho[1] = 1.0 / th
        A = np.empty(max(n_max, 1))
        A[0] = 1.0
        jrho = np.zeros(n_max + 1)  # j * rho(j), filled as rho grows
        jrho[1] = rho[1]
        for m in range(1, n_max):
            rev = A[m - 1 :: -1]
            s0 = float(np.dot(rho[1 : m + 1], rev))
            s1 = float(np.dot(jrho[1 : m + 1], rev))
            A[m] = (m * s0 - (1.0 + th) * s1) / m
            rho[m + 1] = rho[m] + A[m] / th
            jrho[m + 1] = (m + 1) * rho[m + 1]
        return rho
    # explicit: incremental powers P_k = R^k, rho(m+1) = sum_k mu(k) P_k[m]
    mu = law.probs
    K = mu.size - 1
    if n_max * n_max * max(K, 1) > 1 << 31:
        raise ExactLawError("explicit-law progeny recursion too large; use Kemperman")
    rho[1] = mu[0]
    P = np.zeros((K + 1, n_max + 1))
    P[0, 0] = 1.0
    for m in range(1, n_max):
        kq = min(K, m)
        for k in range(1, kq + 1):
            # [z^m] R^k = sum_i rho(i) [z^(m-i)] R^(k-1); zero entries pad the dot
            P[k, m] = float(np.dot(rho[1 : m + 1], P[k - 1, m - 1 :: -1]))
        rho[m + 1] = float(mu[1 : kq + 1] @ P[1 : kq + 1, m])
    return rho


@lru_cache(maxsize=64)
def _rho_cached(law: OffspringLaw, n_max: int) -> np.ndarray:
    out = _rho_recursion(law, n_max)
    out.flags.writeable = False
    return out


def progeny_rho(law: OffspringLaw, n_max: int) -> np.ndarray:
    """P[zeta = p], p = 0..n_max, by the branching recursion (read-only array)."""
    return _rho_cached(law, n_max)


def progeny_pmf(
    law: OffspringLaw, n_max: int, method: str = "both", tol: float = 1e-12
) -> PmfTable:
    """Exact law of the total progeny on {1..n_max}.

    method "kemperman": (1/n) P[W_n = -1] from iterated walk tables;
    method "recursion": the branching recursion;
    method "both" (default): compute both and fail loudly if they disagree.
    """
    if n_max < 1:
        raise ExactLawError("n_max must be >= 1")
    kem = rec = None
    if method in ("both", "kemperman"):
        step = StepLaw(law)
        kem = np.zeros(n_max + 1)
        for m, off, arr in _walk_tables_iter(step, n_max, hi_eval=0):
            i = -1 - off
            if 0 <= i < arr.size:
                kem[m] = arr[i] / m
    if method in ("both", "recursion"):
        rec = progeny_rho(law, n_max)
    if method == "both":
        gap = float(np.max(np.abs(kem - rec)))
        if gap > tol:
            raise ExactLawError(
                f"progeny routes disagree by {gap:.3e} (tolerance {tol:.1e})"
            )
    masses = (kem if rec is None else rec)[1:].copy()
    return PmfTable(
        offset=1,
        masses=masses,
        truncated_mass=max(0.0, 1.0 - float(masses.sum())),
        exact_hi=n_max,
    )


# -- hitting-time probabilities ------------------------------------------------------


@lru_cache(maxsize=256)
def _walk_table_for_phi(law: OffspringLaw, n: int) -> PmfTable:
    off, arr = _walk_table_raw(StepLaw(law), n, hi_eval=0)
    return _finish_table(off, arr, exact_hi=0)


def phi(step: StepLaw, n: int, j: int) -> float:
    """phi_n(j) = P[zeta_j = n] = (j/n) P[W_n = -j] (Kemperman route)."""
    if j < 1 or n < 1:
        raise ExactLawError("phi needs j >= 1 and n >= 1")
    if j > n:
        return 0.0
    table = _walk_table_for_phi(step.law, n)
    return j / n * table.prob(-j)


def phi_star(step: StepLaw, n: int, j: int) -> float:
    """phi*_n(j) = P[zeta_j >= n] = 1 - sum_{p<n} phi_p(j)."""
    if j < 1 or n < 1:
        raise ExactLawError("phi_star needs j >= 1 and n >= 1")
    if j >= n:
        return 1.0  # zeta_j >= j >= n always
    _, ps = phi_phi_star_at(step.law, n, j)
    return float(ps[j - 1])


@lru_cache(maxsize=128)
def _phi_profiles(law: OffspringLaw, p: int, j_max: int) -> Tuple[np.ndarray, np.ndarray]:
    """(phi_p(j), phi*_p(j)) for j = 1..j_max via convolution powers of rho.

    phi_p(j) = rho^(*j)(p) and phi*_p(j) = 1 - sum_{q<p} rho^(*j)(q); powers are
    truncated at p, which is exact because every progeny is >= 1.
    """
    rho = progeny_rho(law, p)[: p + 1]
    phi_vals = np.zeros(j_max)
    phistar_vals = np.ones(j_max)
    cur = rho.copy()
    for j in range(1, j_max + 1):
        if j > p:
            break  # phi_p(j) = 0, phi*_p(j) = 1 beyond
        phi_vals[j - 1] = cur[p]
        phistar_vals[j - 1] = max(0.0, 1.0 - float(cur[:p].sum()))
        if j < j_max:
            cur = _conv(cur, rho)[: p + 1]
    phi_vals.flags.writeable = False
    phistar_vals.flags.writeable = False
    return phi_vals, phistar_vals


def phi_phi_star_at(law: OffspringLaw, p: int, j_max: int) -> Tuple[np.ndarray, np.ndarray]:
    """Vectors (phi_p(j))_{j=1..j_max} and (phi*_p(j))_{j=1..j_max}."""
    return _phi_profiles(law, p, j_max)


# -- discrete absolute-continuity ratio ------------------------------------------------


def discrete_ratio(step: StepLaw, n: int, a: float, k: int) -> float:
    """D_n^(a)(k): the weight relating {zeta = n} to {zeta >= n} on walk prefixes.

    D = [phi_{n-floor(an)}(k+1) / phi_n(1)] / [phi*_{n-floor(an)}(k+1) / phi*_n(1)].
    """
    if not 0.0 < a < 1.0:
        raise ExactLawError("a must lie in (0,1)")
    if k < 0:
        raise ExactLawError("k must be >= 0")
    vals = discrete_ratio_window(step.law, n, a, k, k)
    return float(vals[0])


def discrete_ratio_window(
    law: OffspringLaw, n: int, a: float, k_lo: int, k_hi: int
) -> np.ndarray:
    """D_n^(a)(k) for k = k_lo..k_hi (vectorized over the window)."""
    m = n - int(math.floor(a * n))
    phi_m, phistar_m = phi_phi_star_at(law, m, k_hi + 1)
    rho = progeny_rho(law, n)
    phi_n1 = float(rho[n])
    phistar_n1 = max(0.0, 1.0 - float(rho[:n].sum()))
    num = phi_m[k_lo : k_hi + 1] / phi_n1
    den = phistar_m[k_lo : k_hi + 1] / phistar_n1
    if np.any(den <= 0.0):
        raise ExactLawError("phi* vanished on the requested window")
    return num / den


# -- killed walk (meander) ---------------------------------------------------------------


def meander_pmf(step: StepLaw, m: int, hi_eval: int, protect: Optional[int] = None) -> SubPmf:
    """Sub-probability law of W_m on {W stays >= 0 up to m}, exact on [0, hi_eval].

    ``protect`` extends the moving ceiling so entries stay exact up to
    hi_eval + (protect - m); mass clipped at the ceiling is returned in
    ``clipped_mass`` (it all lives strictly above the exact range).  The table's
    total plus clipped_mass equals P[zeta_1 > m].
    """
    if m < 1:
        raise ExactLawError("m must be >= 1")
    horizon = max(protect if protect is not None else m, m)
    _, nu = _step_table(step, hi_eval + horizon)
    nu_defect = 1.0 - float(nu.sum())  # jumps beyond the table land above every ceiling
    cur = np.zeros(1)
    cur[0] = 1.0  # W_0 = 0
    off = 0
    clipped = 0.0
    for q in range(1, m + 1):
        clipped += float(cur.sum()) * nu_defect
        arr = _conv(cur, nu)
        off2 = off - 1
        if off2 < 0:  # kill paths that dipped below 0
            arr = arr[-off2:]
            off2 = 0
        before = float(arr.sum())
        off, cur = _clip_hi(off2, arr, hi_eval + (horizon - q))
        clipped += before - float(cur.sum())
    return SubPmf(
        offset=off,
        masses=cur,
        clipped_mass=max(0.0, clipped),
        exact_hi=hi_eval + (horizon - m),
    )


def ratio_weighted_mean(law: OffspringLaw, n: int, a: float) -> float:
    """E[D_n^(a)(W_{floor(an)}) | zeta >= n], which Lemma-type algebra makes exactly 1.

    Computed from the killed-walk table and the phi-profiles; a strong internal
    consistency check across three exact routes.  Mass clipped above the
    meander ceiling sits at heights where phi_rest vanishes and phi*_rest is 1,
    so it enters the normalization exactly and the numerator not at all.
    """
    m = int(math.floor(a * n))
    rest = n - m
    if m < 1 or rest < 1:
        raise ExactLawError("floor(a*n) and n - floor(a*n) must be >= 1")
    mea = meander_pmf(StepLaw(law), m, hi_eval=rest, protect=n)
    ks = np.arange(mea.lo, mea.hi + 1)
    phi_r, _ = phi_phi_star_at(law, rest, int(ks[-1]) + 1)
    phi_n1 = float(progeny_rho(law, n)[n])
    # E[D | zeta >= n] collapses to sum_k mea(k) phi_rest(k+1) / phi_n(1);
    # mass clipped above the ceiling has phi_rest = 0 and does not contribute.
    return float((mea.masses * phi_r[ks]).sum()) / phi_n1


# -- exhaustive small-n machinery ------------------------------------------------------


def enumerate_conditioned(
    law: OffspringLaw, n: int, max_trees: int = 250_000
) -> List[Tuple[Tree, float]]:
    """Every tree with zeta = n and its exact conditional probability.

    Probabilities are Prod_i mu(c_i) normalized by their sum, i.e. the law of a
    GW tree conditioned on {zeta = n}.  Exhaustive: intended for n <= ~12.
    """
    if n < 1:
        raise ExactLawError("n must be >= 1")
    if n > 1 and _catalan(n - 1) > max_trees:
        raise ExactLawError(f"enumeration of {n}-vertex trees exceeds max_trees")
    mu = law.probabilities(n)  # child counts above n-1 are impossible at zeta = n
    support = [int(c) for c in np.flatnonzero(mu > 0) if c <= n - 1]
    counts = np.zeros(n, dtype=np.int64)
    out: List[Tuple[Tree, float]] = []

    def rec(i: int, w: int, prob: float) -> None:
        if i == n - 1:
            # last vertex must close the tree: step to -1 means c = -1 - w + 1
            c = -w
            if 0 <= c <= n - 1 and mu[c] > 0:
                counts[i] = c
                out.append((Tree(counts.copy()), prob * mu[c]))
            return
        rem_after = n - i - 1
        for c in support:
            w2 = w + c - 1
            if w2 < 0 or w2 > rem_after - 1:
                continue
            counts[i] = c
            rec(i + 1, w2, prob * mu[c])

    rec(0, 0, 1.0)
    total = sum(p for _, p in out)
    if total <= 0.0:
        raise ExactLawError(f"law puts zero mass on zeta = {n}")
    return [(t, p / total) for t, p in out]


def check_absolute_continuity(law: OffspringLaw, n: int, a: float) -> ExperimentReport:
    """Exhaustive verification of the prefix absolute-continuity identity.

    For every walk prefix (W_0..W_m), m = floor(a n), realized while the walk is
    still alive, the conditional mass under {zeta = n} (computed by exhaustive
    tree enumeration) must equal the D-weighted conditional mass under
    {zeta >= n} (computed from hitting-probability tables).  Reports the
    maximum absolute discrepancy over prefixes; passes at 1e-10.
    """
    import time as _time

    t0 = _time.time()
    if not 0.0 < a < 1.0:
        raise ExactLawError("a must lie in (0,1)")
    m = int(math.floor(a * n))
    if m < 1:
        raise ExactLawError("floor(a*n) must be >= 1")
    # Prefixes containing a child count >= n contribute 0 to both sides
    # (the tree can't close at n vertices and phi_rest vanishes), so the
    # enumeration over counts <= n - 1 is complete for the discrepancy.
    mu = law.probabilities(n - 1)
    support = [int(c) for c in np.flatnonzero(mu > 0)]
    nu = {c - 1: mu[c] for c in support}

    # LHS: conditional prefix masses under {zeta = n} from tree enumeration
    lhs: dict = {}
    for tree, p in enumerate_conditioned(law, n):
        w = np.concatenate([[0], np.cumsum(tree.child_counts[:m] - 1)])
        key = tuple(int(x) for x in w)
        lhs[key] = lhs.get(key, 0.0) + p

    # RHS: D-weighted masses under {zeta >= n} over all alive prefixes
    rest = n - m
    j_hi_needed = max(m * (max(support) - 1) + 2, 2)
    phi_r, phistar_r = phi_phi_star_at(law, rest, j_hi_needed)
    rho = progeny_rho(law, n)
    phi_n1 = float(rho[n])
    phistar_n1 = max(0.0, 1.0 - float(rho[:n].sum()))

    n_prefixes = (len(nu)) ** m
    if n_prefixes > 2_000_000:
        raise ExactLawError("prefix enumeration too large; reduce support or a")

    rhs: dict = {}
    prefix = [0] * (m + 1)

    def rec(i: int, w: int, prob: float) -> None:
        if i == m:
            key = tuple(prefix)
            j = w + 1
            weight = prob * phistar_r[j - 1] / phistar_n1
            d = (phi_r[j - 1] / phi_n1) / (phistar_r[j - 1] / phistar_n1)
            rhs[key] = rhs.get(key, 0.0) + weight * d
            return
        for s, ps in nu.items():
            w2 = w + s
            if w2 < 0:
                continue
            prefix[i + 1] = w2
            rec(i + 1, w2, prob * ps)

    rec(0, 0, 1.0)

    keys = set(lhs) | set(rhs)
    max_disc = max(abs(lhs.get(k, 0.0) - rhs.get(k, 0.0)) for k in keys)
    lhs_total = sum(lhs.values())
    rhs_total = sum(rhs.values())
    tol = 1e-10
    stats = {
        "max_discrepancy": max_disc,
        "prefixes": len(keys),
        "lhs_total": lhs_total,
        "rhs_total": rhs_total,
    }
    return ExperimentReport(
        name="absolute_continuity_check",
        parameters={"family": law.family, "n": n, "a": a},
        statistics=stats,
        tolerances={"max_discrepancy": tol},
        passed=bool(max_disc <= tol and abs(rhs_total - 1.0) <= tol),
        wall_time_s=_time.time() - t0,
    )


def _catalan(k: int) -> int:
    return math.comb(2 * k, k) // (k + 1)
