"""Closed-form bounds for Bernoulli group testing under dilution noise.

All logarithms are natural except where a result is in bits. The ``(1 + o(1))``
factors of the asymptotic statements are taken to be exactly 1.

Two families of mode strings appear here:

* ``"exact"`` / ``"asymptotic"`` for eta and psi: the finite-d product form
  or its d -> infinity limit.
* ``"explicit"`` / ``"asymptotic"`` for the optimal slack: the finite (n, d)
  closed form or the form in theta = log d / log n.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import entr, gammaln

log = logging.getLogger(__name__)

LOG2 = math.log(2)
ONE_MINUS_E2 = 1.0 - math.exp(-2.0)


def adaptive_alpha(q: float) -> float:
    return LOG2 / (1.0 - q)


def _check_q_open(q):
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")


def _resolve(q, alpha):
    return adaptive_alpha(q) if alpha is None else float(alpha)


def binary_entropy(rho):
    """H_b in bits; accepts scalars or arrays, with H_b(0) = H_b(1) = 0."""
    r = np.asarray(rho, dtype=float)
    if np.any((r < 0) | (r > 1)) or np.any(np.isnan(r)):
        raise ValueError("binary entropy is defined on [0, 1]")
    h = (entr(r) + entr(1.0 - r)) / LOG2
    return float(h) if h.ndim == 0 else h


# -- Quantities from the NCOMP analysis -------------------------------------

def eta(q: float, alpha: float, d: int, mode: str = "exact") -> float:
    """Probability a test holding a given defective is negative because every included defective is diluted."""
    if mode == "exact":
        return q * (1.0 - alpha / d * (1.0 - q)) ** (d - 1)
    if mode == "asymptotic":
        return q * math.exp(-alpha * (1.0 - q))
    raise ValueError(f"unknown mode {mode!r}")


def psi(q: float, alpha: float, d: int, mode: str = "exact") -> float:
    """Probability a test holding a given non-defective is positive through some undiluted defective."""
    if mode == "exact":
        return 1.0 - (1.0 - alpha / d * (1.0 - q)) ** d
    if mode == "asymptotic":
        return 1.0 - math.exp(-alpha * (1.0 - q))
    raise ValueError(f"unknown mode {mode!r}")


def feasible_interval(q: float, alpha: float) -> tuple[float, float]:
    """Open interval of 1 + delta on which both NCOMP error branches are controlled."""
    _check_q_open(q)
    a = math.exp(-alpha * (1.0 - q))
    return a, a / q


def optimal_delta(n: int, d: int, q: float, alpha: float, mode: str = "explicit") -> float:
    """Return 1 + delta~, where the false-negative and false-positive branches meet."""
    _check_q_open(q)
    if not 0 < d < n:
        raise ValueError(f"need 0 < d < n, got n={n}, d={d}")
    a = math.exp(-alpha * (1.0 - q))
    if mode == "explicit":
        if d == 1:
            log.warning("d = 1 makes log d vanish; using the asymptotic form of the optimal slack")
            return optimal_delta(n, d, q, alpha, "asymptotic")
        ld, lnd = math.log(d), math.log(n - d)
        if ld == lnd:
            # d = n/2 makes the closed form 0/0; use its rationalized limit
            s1, s2 = math.sqrt(ld), math.sqrt(lnd)
            return a * (s1 / q + s2) / (s1 + s2)
        num = math.sqrt(ld * lnd) * (1.0 - q) + math.log((n - d) ** q / d)
        return a / q * num / math.log((n - d) / d)
    if mode == "asymptotic":
        theta = math.log(d) / math.log(n)
        return a / q * (math.sqrt(theta) * (1.0 - q) + q - theta) / (1.0 - theta)
    raise ValueError(f"unknown mode {mode!r}")


class Branches(NamedTuple):
    N_fn: float
    N_fp: float

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.N_fn) and math.isfinite(self.N_fp)

    @property
    def N(self) -> float:
        return max(self.N_fn, self.N_fp)


def achievability_tests(n: int, d: int, q: float, alpha: float, one_plus_delta: float,
                        mode: str = "asymptotic") -> Branches:
    """Test counts sufficient for vanishing NCOMP false negatives and false positives.

    ``mode="asymptotic"`` is the printed pair of bounds, with asymptotes at
    e^{-alpha(1-q)} and e^{-alpha(1-q)}/q. ``mode="exact"`` puts the finite-d
    eta/q and (1-psi)/q in their place. A branch whose precondition fails is +inf.
    """
    _check_q_open(q)
    if mode == "asymptotic":
        lo, hi = feasible_interval(q, alpha)
    elif mode == "exact":
        lo, hi = eta(q, alpha, d) / q, (1.0 - psi(q, alpha, d)) / q
    else:
        raise ValueError(f"unknown mode {mode!r}")
    x = one_plus_delta
    scale = d / (alpha * q * q * ONE_MINUS_E2)
    n_fn = scale * math.log(d) / (x - lo) ** 2 if x > lo else math.inf
    n_fp = scale * math.log(n - d) / (x - hi) ** 2 if x < hi else math.inf
    return Branches(n_fn, n_fp)


# -- Converse ----------------------------------------------------------------

def log2_binom(n: int, d: int) -> float:
    return float((gammaln(n + 1) - gammaln(d + 1) - gammaln(n - d + 1)) / LOG2)


def _poisson_pmf(alpha: float, K: int) -> np.ndarray:
    # pmf(z) = pmf(z-1) * alpha / z, accumulated in log space so large alpha does not underflow
    z = np.arange(1, K + 1)
    logpmf = np.concatenate(([-alpha], -alpha + np.cumsum(math.log(alpha) - np.log(z))))
    return np.exp(logpmf)


def poisson_truncation_level(alpha: float, tol: float) -> int:
    """Smallest K with P[Poisson(alpha) <= K] >= 1 - tol."""
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    K = int(alpha + 10.0 * math.sqrt(alpha) + 20)
    limit = int(alpha + 200.0 * math.sqrt(alpha) + 2000)
    while True:
        cdf = np.cumsum(_poisson_pmf(alpha, K))
        hit = np.flatnonzero(cdf >= 1.0 - tol)
        if hit.size:
            return int(hit[0])
        if K >= limit:
            raise ValueError(f"tol={tol} is below the attainable floating-point accuracy")
        K = min(2 * K, limit)


def poisson_entropy_partial_sums(alpha: float, q: float, K: int) -> np.ndarray:
    """Partial sums of E[H_b(q^Z)], Z ~ Poisson(alpha), over z = 0..K."""
    z = np.arange(K + 1)
    terms = binary_entropy(np.power(q, z, dtype=float)) * _poisson_pmf(alpha, K)
    return np.cumsum(terms)


def poisson_entropy_expectation(alpha: float, q: float, tol: float = 1e-10) -> float:
    """E[H_b(q^Z)] for Z ~ Poisson(alpha), with absolute error below ``tol``.

    The series is cut where the remaining Poisson mass drops below ``tol``;
    since H_b <= 1 that mass bounds the neglected part.
    """
    if not 0.0 <= q < 1.0:
        raise ValueError(f"q must lie in [0, 1), got {q}")
    K = poisson_truncation_level(alpha, tol)
    return float(poisson_entropy_partial_sums(alpha, q, K)[-1])


def mutual_information(q: float, alpha: float | None = None, tol: float = 1e-12) -> float:
    """Per-test information I(row; outcome) in bits, in the Poisson limit.

    Equals 1 - E[H_b(q^Z)] under the noise-adaptive design.
    """
    alpha = _resolve(q, alpha)
    h_y = binary_entropy(math.exp(-alpha * (1.0 - q)))
    return h_y - poisson_entropy_expectation(alpha, q, tol)


def converse_tests(n: int, d: int, q: float, alpha: float | None = None, tol: float = 1e-12) -> float:
    """Tests necessary for any decoder: log2 C(n, d) over the per-test information."""
    if not 0.0 <= q < 1.0:
        raise ValueError(f"q must lie in [0, 1), got {q}")
    if not 0 < d < n:
        raise ValueError(f"need 0 < d < n, got n={n}, d={d}")
    info = mutual_information(q, alpha, tol)
    if not info > 0:
        raise ArithmeticError(f"non-positive per-test information {info}")
    return log2_binom(n, d) / info


# -- Rates -------------------------------------------------------------------

def rate_ncomp(theta: float, q: float) -> float:
    """Achievable NCOMP rate in bits per test."""
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    _check_q_open(q)
    return 4.0 * (1.0 - theta) * (1.0 - q) / (ONE_MINUS_E2 * LOG2)


def rate_it(q: float, alpha: float | None = None, tol: float = 1e-12) -> float:
    """Converse rate 1 - E[H_b(q^Z)], Z ~ Poisson(alpha); alpha defaults to noise-adaptive."""
    _check_q_open(q)
    return 1.0 - poisson_entropy_expectation(_resolve(q, alpha), q, tol)


def rate_decay_profile(k_values) -> list[tuple[int, float]]:
    """Pairs (k, k * rate_it(1 - 1/k, k log 2)); bounded in k when the rate is O(1 - q)."""
    out = []
    for k in k_values:
        if k < 2:
            raise ValueError(f"k must be at least 2, got {k}")
        out.append((k, k * rate_it(1.0 - 1.0 / k, k * LOG2)))
    return out


# -- Binomial tail bounds ----------------------------------------------------

def _check_tail_args(K, p, delta):
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")


def chernoff_upper(K: int, p: float, delta: float) -> float:
    """Bound on P[X >= (1 + delta) mu] for X ~ Bin(K, p), mu = K p."""
    _check_tail_args(K, p, delta)
    mu = K * p
    return math.exp(-2.0 * delta**2 * mu**2 / K)


def chernoff_lower(K: int, p: float, delta: float) -> float:
    """Bound on P[X <= (1 - delta) mu] for X ~ Bin(K, p), mu = K p."""
    _check_tail_args(K, p, delta)
    mu = K * p
    return math.exp(-(delta**2) * mu**2 / K)


# -- Report ------------------------------------------------------------------

@dataclass(frozen=True)
class BoundReport:
    n: int
    d: int
    q: float
    alpha: float
    theta: float
    eta: float
    psi: float
    delta_star: float
    N_fn: float
    N_fp: float
    N_achievability: float
    N_logn: float
    prefactor: float
    N_converse: float
    rate_ncomp: float
    rate_it: float
    mode: str

    def asdict(self) -> dict:
        return asdict(self)


def bound_report(n: int, d: int, q: float, alpha: float | None = None, mode: str = "exact") -> BoundReport:
    """Evaluate every bound at one parameter point.

    ``mode="exact"`` uses finite-d eta and psi and the explicit optimal slack;
    ``mode="asymptotic"`` uses their limits and the theta form. The two branch
    counts are always the printed pair at the reported slack. ``N_logn`` is the
    combined form with d log n, and ``prefactor`` is the constant multiplying
    d log n / (1 - q) there.
    """
    if mode not in ("exact", "asymptotic"):
        raise ValueError(f"unknown mode {mode!r}")
    _check_q_open(q)
    if not 1 < d < n:
        raise ValueError(f"need 1 < d < n, got n={n}, d={d}")
    a = _resolve(q, alpha)
    if a / d > 1.0:
        raise ValueError(f"inclusion probability alpha/d = {a / d:.6g} exceeds 1")
    theta = math.log(d) / math.log(n)
    x = optimal_delta(n, d, q, a, "explicit" if mode == "exact" else "asymptotic")
    br = achievability_tests(n, d, q, a, x)
    lo, _ = feasible_interval(q, a)
    prefactor = (1.0 - q) / (a * q * q * ONE_MINUS_E2 * (x - lo) ** 2) if x > lo else math.inf
    theta_ok = 0.0 < theta < 1.0
    return BoundReport(
        n=n, d=d, q=q, alpha=a, theta=theta,
        eta=eta(q, a, d, mode), psi=psi(q, a, d, mode),
        delta_star=x, N_fn=br.N_fn, N_fp=br.N_fp, N_achievability=br.N,
        N_logn=prefactor * d * math.log(n) / (1.0 - q),
        prefactor=prefactor,
        N_converse=converse_tests(n, d, q, a),
        rate_ncomp=rate_ncomp(theta, q) if theta_ok else math.nan,
        rate_it=rate_it(q, a),
        mode=mode,
    )
