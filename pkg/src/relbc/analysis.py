"""Exact binomial computations: verifier thresholds and soundness curves.

The honest verifier sees, per run, m detected qubits in the claimed basis
and c in the conjugate one, (m, c, rest) ~ Multinomial(N; eta/2, eta/2,
1 - eta). Given m, same-basis mismatches are Binomial(m, e); given c,
conjugate mismatches are Binomial(c, 1/2) whatever the noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from .adversary import BREIDBART_RATE
from .protocol import fraction_at_least, fraction_at_most
from .tables import to_csv


class InfeasiblePlan(ValueError):
    def __init__(self, message: str, best_failure: float):
        self.best_failure = best_failure
        super().__init__(message)


def _check_binomial_args(n: int, k: int, p: float) -> None:
    if not (isinstance(n, (int, np.integer)) and isinstance(k, (int, np.integer))):
        raise TypeError("n and k must be integers")
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    if not (math.isfinite(p) and 0.0 <= p <= 1.0):
        raise ValueError(f"p must lie in [0, 1], got {p}")


def binomial_tail(n: int, k: int, p: float) -> float:
    """P[X >= k] for X ~ Binomial(n, p), summed exactly in log space."""
    _check_binomial_args(n, k, p)
    if k == 0 or p == 1.0:
        return 1.0
    if p == 0.0:
        return 0.0
    lp, lq = math.log(p), math.log1p(-p)
    logs = [math.log(math.comb(n, j)) + j * lp + (n - j) * lq for j in range(k, n + 1)]
    top = max(logs)
    return min(1.0, math.exp(top) * math.fsum(math.exp(v - top) for v in logs))


def binomial_pmf_table(nmax: int, p: float) -> np.ndarray:
    """pmf[m, k] = P[Binomial(m, p) = k] for 0 <= k <= m <= nmax (zero above)."""
    m = np.arange(nmax + 1)[:, None]
    k = np.arange(nmax + 1)[None, :]
    valid = k <= m
    with np.errstate(divide="ignore", invalid="ignore"):
        logc = gammaln(m + 1) - gammaln(k + 1) - gammaln(np.maximum(m - k, 0) + 1)
        if p == 0.0:
            out = np.where(valid & (k == 0), 1.0, 0.0)
        elif p == 1.0:
            out = np.where(valid & (k == m), 1.0, 0.0)
        else:
            out = np.where(valid, np.exp(logc + k * math.log(p) + (m - k) * math.log1p(-p)), 0.0)
    return out


def split_distribution(n: int, eta: float) -> np.ndarray:
    """joint[m, c]: probability of m claimed-basis and c conjugate detections."""
    m = np.arange(n + 1)[:, None]
    c = np.arange(n + 1)[None, :]
    rest = n - m - c
    valid = rest >= 0
    half = eta / 2.0
    if eta == 1.0:
        out = np.zeros((n + 1, n + 1))
        row = binomial_pmf_table(n, 0.5)[n]
        out[np.arange(n + 1), n - np.arange(n + 1)] = row
        return out
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = (
            gammaln(n + 1) - gammaln(m + 1) - gammaln(c + 1) - gammaln(np.maximum(rest, 0) + 1)
            + (m + c) * math.log(half) + np.maximum(rest, 0) * math.log1p(-eta)
        )
    return np.where(valid, np.exp(logp), 0.0)


@dataclass(frozen=True)
class CompletenessBreakdown:
    failure: float
    same_failure: float
    conj_failure: float
    insufficient: float


def completeness_failure(
    n: int, e: float, eta: float, tau_accept: float, rho_reject: float, min_count: int = 16, _tables=None
) -> CompletenessBreakdown:
    """Exact probability that an honest run is not accepted.

    ``same_failure`` and ``conj_failure`` are the marginal probabilities of
    each statistical check failing (counted only where both counts reach
    ``min_count``); ``insufficient`` is the abort probability. Failure
    probabilities are summed directly rather than as 1 - acceptance, so
    tiny values keep full relative precision.
    """
    joint, pmf_e, pmf_half = _tables or _honest_tables(n, e, eta)
    ks = np.arange(n + 1)[None, :]
    ms = np.arange(n + 1)[:, None]
    same_bad = (pmf_e * (ms >= ks) * ~fraction_at_most(ks, ms, tau_accept)).sum(1)
    conj_bad = (pmf_half * (ms >= ks) * ~fraction_at_least(ks, ms, rho_reject)).sum(1)
    enough = np.arange(n + 1) >= min_count
    mask = enough[:, None] & enough[None, :]
    w = joint * mask
    sf, cf = same_bad[:, None], conj_bad[None, :]
    insufficient = float((joint * ~mask).sum())
    checks = float((w * (sf + cf - sf * cf)).sum())
    return CompletenessBreakdown(
        failure=min(1.0, insufficient + checks),
        same_failure=float((w * sf).sum()),
        conj_failure=float((w * cf).sum()),
        insufficient=min(1.0, insufficient),
    )


def _honest_tables(n: int, e: float, eta: float):
    return split_distribution(n, eta), binomial_pmf_table(n, e), binomial_pmf_table(n, 0.5)


def breidbart_pair_threshold_success(n: int, eta: float, tau_accept: float, min_count: int = 16,
                                     rate: float = BREIDBART_RATE) -> float:
    """Dual-pass probability of the Breidbart pair attack against the full verifier.

    Each wing's same-basis mismatches are Binomial(m_i, 1 - rate) on disjoint
    qubit sets; the conjugate test passes automatically whenever the other
    wing's same-basis test does, since the declarations are complementary.
    """
    joint = split_distribution(n, eta)
    ks = np.arange(n + 1)[None, :]
    ms = np.arange(n + 1)[:, None]
    ok = (binomial_pmf_table(n, 1.0 - rate) * fraction_at_most(ks, ms, tau_accept)).sum(1)
    ok = ok * (np.arange(n + 1) >= min_count)
    return float(min(1.0, (joint * ok[:, None] * ok[None, :]).sum()))


@dataclass(frozen=True)
class ThresholdPlan:
    n: int
    e: float
    eta: float
    tau_accept: float
    rho_reject: float
    completeness_failure_prob: float
    same_failure_prob: float
    conj_failure_prob: float
    insufficient_prob: float
    strict_soundness_bound: float
    threshold_soundness_estimate: float

    COLUMNS = ("N", "e", "eta", "tau_accept", "rho_reject", "completeness_failure", "strict_soundness_bound",
               "threshold_soundness_estimate")

    def row(self) -> tuple:
        return (self.n, self.e, self.eta, self.tau_accept, self.rho_reject, self.completeness_failure_prob,
                self.strict_soundness_bound, self.threshold_soundness_estimate)

    def to_csv(self) -> str:
        return to_csv(self.COLUMNS, [self.row()])


def plan_thresholds(n: int, e: float, eta: float, target_completeness: float, min_count: int = 16,
                    grid: float = 0.01) -> ThresholdPlan:
    """Smallest tau_accept on the grid meeting the completeness target.

    rho_reject is put midway between tau_accept and 1/2. The strict soundness
    bound is BREIDBART_RATE ** (expected claimed-basis count N*eta/2); the
    threshold estimate is the Breidbart pair attack's dual-pass probability
    at the chosen thresholds.
    """
    if not 0.0 < target_completeness < 1.0:
        raise ValueError(f"target completeness must lie in (0, 1), got {target_completeness}")
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 <= e < 0.5 or not 0.0 < eta <= 1.0:
        raise ValueError("need 0 <= e < 0.5 and 0 < eta <= 1")
    budget = 1.0 - target_completeness
    best = 1.0
    tables = _honest_tables(n, e, eta)
    steps = int(round(0.5 / grid))
    for i in range(steps):
        tau = round(i * grid, 10)
        rho = (tau + 0.5) / 2.0
        b = completeness_failure(n, e, eta, tau, rho, min_count, _tables=tables)
        best = min(best, b.failure)
        if b.failure <= budget:
            return ThresholdPlan(
                n, e, eta, tau, rho, b.failure, b.same_failure, b.conj_failure, b.insufficient,
                BREIDBART_RATE ** (n * eta / 2.0),
                breidbart_pair_threshold_success(n, eta, tau, min_count),
            )
    raise InfeasiblePlan(
        f"no tau_accept < 0.5 reaches completeness {target_completeness} at N={n}, e={e}, eta={eta} "
        f"(best failure probability {best:.3g})",
        best,
    )


@dataclass(frozen=True)
class SoundnessRow:
    n: int
    per_relevant: float
    per_transmitted: float


def soundness_curve(n_values: Iterable[int], per_qubit_rate: float) -> list[SoundnessRow]:
    """Analytic dual-unveil bounds under both counting conventions.

    ``per_relevant`` raises the rate to N/2 (the expected number of qubits a
    single wing is checked on); ``per_transmitted`` raises it to N, which is
    exact for the strict game at eta = 1 since every qubit is checked on
    exactly one wing.
    """
    if not 0.0 < per_qubit_rate < 1.0:
        raise ValueError(f"per-qubit rate must lie in (0, 1), got {per_qubit_rate}")
    rows = []
    for n in sorted(set(int(v) for v in n_values)):
        if n < 0:
            raise ValueError("N must be non-negative")
        rows.append(SoundnessRow(n, per_qubit_rate ** (n / 2.0), per_qubit_rate ** n))
    return rows


def soundness_csv(rows: Sequence[SoundnessRow], rate: float) -> str:
    return to_csv(["N", "per_qubit_rate", "per_relevant_bound", "per_transmitted_bound"],
                  [(r.n, rate, r.per_relevant, r.per_transmitted) for r in rows])
