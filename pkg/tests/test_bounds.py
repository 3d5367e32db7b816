import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from dilution_gt.bounds import (
    achievability_tests,
    binary_entropy,
    bound_report,
    chernoff_lower,
    chernoff_upper,
    converse_tests,
    eta,
    feasible_interval,
    log2_binom,
    optimal_delta,
    poisson_entropy_expectation,
    poisson_entropy_partial_sums,
    poisson_truncation_level,
    psi,
    rate_decay_profile,
    rate_it,
    rate_ncomp,
)

LOG2 = math.log(2)
A2 = 2 * LOG2  # adaptive alpha at q = 1/2


def exact_binom_upper(K, p, x):
    """P[Bin(K, p) >= x] by summing the pmf with exact rationals."""
    pf = Fraction(p)
    return float(sum(math.comb(K, r) * pf**r * (1 - pf) ** (K - r) for r in range(math.ceil(x), K + 1)))


def exact_binom_lower(K, p, x):
    pf = Fraction(p)
    return float(sum(math.comb(K, r) * pf**r * (1 - pf) ** (K - r) for r in range(0, math.floor(x) + 1)))


# -- binary entropy ------------------------------------------------------------

def test_binary_entropy_values():
    assert binary_entropy(0.5) == pytest.approx(1.0, abs=1e-15)
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.11) == pytest.approx(0.4999, abs=1e-4)
    rho = 0.11
    direct = rho * math.log2(1 / rho) + (1 - rho) * math.log2(1 / (1 - rho))
    assert binary_entropy(rho) == pytest.approx(direct, rel=1e-14)


@pytest.mark.parametrize("bad", [-0.1, 1.01, float("nan")])
def test_binary_entropy_domain(bad):
    with pytest.raises(ValueError):
        binary_entropy(bad)


@given(st.floats(0.0, 1.0))
def test_binary_entropy_symmetric_bounded(r):
    h = binary_entropy(r)
    assert 0.0 <= h <= 1.0 + 1e-15
    assert h == pytest.approx(binary_entropy(1.0 - r), abs=1e-12)


# -- eta, psi --------------------------------------------------------------------

@pytest.mark.parametrize("mode", ["exact", "asymptotic"])
def test_eta_zero_at_q0(mode):
    assert eta(0.0, 1.0, 10, mode) == 0.0


def test_eta_psi_adaptive_half():
    assert eta(0.5, A2, 10, "asymptotic") == pytest.approx(0.25, abs=1e-15)
    assert psi(0.5, A2, 10, "asymptotic") == pytest.approx(0.5, abs=1e-15)


def test_eta_psi_exact_converge():
    for d in (10**4, 10**5):
        assert abs(eta(0.5, A2, d) - eta(0.5, A2, d, "asymptotic")) <= 1e-3
        assert abs(psi(0.5, A2, d) - psi(0.5, A2, d, "asymptotic")) <= 1e-3


def test_eta_psi_exact_forms():
    q, a, d = 0.3, 1.2, 7
    base = 1 - a / d * (1 - q)
    assert eta(q, a, d) == pytest.approx(q * base**6, rel=1e-14)
    assert psi(q, a, d) == pytest.approx(1 - base**7, rel=1e-14)


# -- optimal slack -----------------------------------------------------------------

def test_optimal_delta_asymptotic_example():
    # theta = 0.25 exactly: choose n = 10^8, d = 100
    x = optimal_delta(10**8, 100, 0.5, A2, "asymptotic")
    assert x == pytest.approx(2 / 3, rel=1e-12)
    lo, hi = feasible_interval(0.5, A2)
    assert lo == pytest.approx(0.5) and hi == pytest.approx(1.0)
    assert lo < x < hi


def test_optimal_delta_explicit_vs_asymptotic():
    n = 10**6
    d = round(n**0.25)
    e = optimal_delta(n, d, 0.5, A2, "explicit")
    a = optimal_delta(n, d, 0.5, A2, "asymptotic")
    assert float(f"{e:.3g}") == float(f"{a:.3g}")


def test_optimal_delta_is_branch_intersection():
    # independent route: solve log d/(x-lo)^2 = log(n-d)/(hi-x)^2 by bisection
    n, d, q, a = 5000, 12, 0.35, 1.1
    lo, hi = feasible_interval(q, a)
    f = lambda x: math.log(d) / (x - lo) ** 2 - math.log(n - d) / (hi - x) ** 2
    left, right = lo + 1e-12, hi - 1e-12
    for _ in range(200):
        mid = 0.5 * (left + right)
        if f(mid) > 0:
            left = mid
        else:
            right = mid
    assert optimal_delta(n, d, q, a) == pytest.approx(0.5 * (left + right), rel=1e-12)


def test_optimal_delta_symmetric_d():
    # d = n/2 makes the printed closed form 0/0; its limit is still the intersection
    n, d, q, a = 200, 100, 0.4, 1.0
    x = optimal_delta(n, d, q, a)
    br = achievability_tests(n, d, q, a, x)
    assert br.N_fn == pytest.approx(br.N_fp, rel=1e-12)


def test_optimal_delta_errors(caplog):
    with pytest.raises(ValueError):
        optimal_delta(100, 5, 1.0, 1.0)
    with pytest.raises(ValueError):
        optimal_delta(100, 5, 0.0, 1.0)
    with caplog.at_level("WARNING"):
        x = optimal_delta(100, 1, 0.5, A2)
    assert x == optimal_delta(100, 1, 0.5, A2, "asymptotic")
    assert "d = 1" in caplog.text


@settings(max_examples=200)
@given(
    q=st.floats(0.05, 0.95),
    theta=st.floats(0.1, 0.9),
    logn=st.floats(2.0, 8.0),
)
def test_feasibility(q, theta, logn):
    n = int(10**logn)
    d = round(n**theta)
    assume(1 < d < n / 2)
    a = LOG2 / (1 - q)
    lo, hi = feasible_interval(q, a)
    for mode in ("explicit", "asymptotic"):
        x = optimal_delta(n, d, q, a, mode)
        assert lo < x < hi


# -- achievability branches ---------------------------------------------------------

@pytest.mark.parametrize("n", [10**3, 10**6])
@pytest.mark.parametrize("theta", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("q", [0.2, 0.5, 0.8])
def test_intersection_identity(n, theta, q):
    d = round(n**theta)
    a = LOG2 / (1 - q)
    br = achievability_tests(n, d, q, a, optimal_delta(n, d, q, a))
    assert abs(br.N_fn - br.N_fp) / max(br) <= 1e-9


def test_branch_asymptotes():
    n, d, q, a = 1000, 10, 0.5, A2
    lo, hi = feasible_interval(q, a)
    vals = [achievability_tests(n, d, q, a, lo + eps).N_fn for eps in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(x < y for x, y in zip(vals, vals[1:]))
    assert vals[-1] > 1e9
    assert achievability_tests(n, d, q, a, lo).N_fn == math.inf
    br = achievability_tests(n, d, q, a, hi)
    assert br.N_fp == math.inf and not br.feasible


def test_branch_printed_forms():
    n, d, q, a, x = 10**6, 32, 0.5, A2, 0.7
    c = 1 - math.exp(-2)
    e = math.exp(-a * (1 - q))
    br = achievability_tests(n, d, q, a, x)
    assert br.N_fn == pytest.approx(d * math.log(d) / (a * q * q * c * (x - e) ** 2), rel=1e-14)
    assert br.N_fp == pytest.approx(d * math.log(n - d) / (a * q * q * c * (x - e / q) ** 2), rel=1e-14)


def test_theorem_form_bookkeeping():
    n, d, q = 10**6, 32, 0.5
    rep = bound_report(n, d, q)
    a = rep.alpha
    c = 1 - math.exp(-2)
    combined = d * math.log(n) / (a * q * q * c * (rep.delta_star - math.exp(-a * (1 - q))) ** 2)
    assert rep.N_logn == pytest.approx(combined, rel=1e-12)
    # same denominator as the false-negative branch, with log n in place of log d
    assert rep.N_logn == pytest.approx(rep.N_fn * math.log(n) / math.log(d), rel=1e-9)
    assert rep.prefactor * d * math.log(n) / (1 - q) == pytest.approx(rep.N_logn, rel=1e-14)


def test_exact_branches_use_finite_d_asymptotes():
    n, d, q, a = 1000, 10, 0.5, A2
    x = 0.7
    br = achievability_tests(n, d, q, a, x, mode="exact")
    c = 1 - math.exp(-2)
    assert br.N_fn == pytest.approx(d * math.log(d) / (a * c * (q * x - eta(q, a, d)) ** 2), rel=1e-12)
    assert br.N_fp == pytest.approx(d * math.log(n - d) / (a * c * (q * x - 1 + psi(q, a, d)) ** 2), rel=1e-12)


# -- Poisson expectation ------------------------------------------------------------

def test_poisson_expectation_q0():
    assert poisson_entropy_expectation(1.3, 0.0, 1e-10) == 0.0


def test_poisson_expectation_mc_oracle():
    val = poisson_entropy_expectation(A2, 0.5, 1e-8)
    assert val == pytest.approx(0.6172, abs=1e-4)
    rng = np.random.default_rng(2024)
    z = rng.poisson(A2, size=10**7)
    counts = np.bincount(z)
    mc = sum(c * binary_entropy(0.5**k) for k, c in enumerate(counts)) / z.size
    assert abs(mc - val) < 1e-3


def test_poisson_expectation_truncation_levels_agree():
    for alpha, q in [(A2, 0.5), (0.3, 0.9), (40.0, 0.98), (700.0, 0.999)]:
        tol = 1e-9
        K = poisson_truncation_level(alpha, tol)
        s = poisson_entropy_partial_sums(alpha, q, K + 20)
        assert abs(s[K] - s[K + 20]) < tol
        assert s[K] == pytest.approx(poisson_entropy_expectation(alpha, q, tol), abs=1e-15)


def test_truncation_level_is_minimal():
    from scipy.stats import poisson

    for alpha in (0.5, A2, 12.0, 300.0):
        tol = 1e-8
        K = poisson_truncation_level(alpha, tol)
        assert poisson.cdf(K, alpha) >= 1 - tol - 1e-13
        assert poisson.cdf(K - 1, alpha) < 1 - tol + 1e-13


@given(alpha=st.floats(0.05, 30.0), q=st.floats(0.0, 0.99))
@settings(max_examples=50)
def test_partial_sums_non_decreasing(alpha, q):
    s = poisson_entropy_partial_sums(alpha, q, 60)
    assert np.all(np.diff(s) >= 0)


def test_poisson_tol_validation():
    with pytest.raises(ValueError):
        poisson_entropy_expectation(1.0, 0.5, 0.0)


# -- converse --------------------------------------------------------------------

def test_log2_binom_matches_exact():
    for n in range(2, 61):
        for d in range(1, n):
            assert log2_binom(n, d) == pytest.approx(math.log2(math.comb(n, d)), rel=1e-12, abs=1e-12)


def test_converse_counting_limit():
    assert converse_tests(20, 3, 0.0) == pytest.approx(math.log2(1140), rel=1e-12)
    assert converse_tests(20, 3, 1e-9) == pytest.approx(10.155, abs=1e-3)


def test_converse_value():
    v = converse_tests(1000, 10, 0.5)
    log2c = math.log2(math.comb(1000, 10))
    assert v == pytest.approx(log2c / (1 - 0.6172424), rel=1e-6)
    assert v == pytest.approx(203, abs=1)


def test_converse_monotone_in_q():
    vals = [converse_tests(500, 8, q) for q in np.arange(0.1, 0.95, 0.1)]
    assert all(x <= y for x, y in zip(vals, vals[1:]))


def test_converse_fixed_alpha_uses_output_entropy():
    q, a = 0.3, 0.5
    expected = math.log2(math.comb(300, 6)) / (
        binary_entropy(math.exp(-a * (1 - q))) - poisson_entropy_expectation(a, q, 1e-13))
    assert converse_tests(300, 6, q, a) == pytest.approx(expected, rel=1e-12)
    # the adaptive design maximises the output entropy, so it never needs more tests
    assert converse_tests(300, 6, q) <= converse_tests(300, 6, q, a)


# -- rates -----------------------------------------------------------------------

def test_rate_ncomp_value():
    assert rate_ncomp(0.5, 0.5) == pytest.approx(1.6685, abs=1e-4)
    assert rate_ncomp(0.5, 0.5) == pytest.approx(1 / ((1 - math.exp(-2)) * LOG2), rel=1e-14)


def test_rate_it_value():
    assert rate_it(0.5, A2) == pytest.approx(0.3828, abs=1e-4)
    assert rate_it(0.5) == rate_it(0.5, A2)


@given(q=st.floats(0.01, 0.99), alpha=st.floats(0.01, 50.0))
@settings(max_examples=50)
def test_rate_it_unit_interval(q, alpha):
    assert 0.0 <= rate_it(q, alpha) <= 1.0


def test_rate_domain_errors():
    with pytest.raises(ValueError):
        rate_ncomp(1.0, 0.5)
    with pytest.raises(ValueError):
        rate_it(1.0)


def test_rate_decay_profile():
    prof = rate_decay_profile([2, 8, 64])
    assert prof[0][0] == 2
    assert prof[0][1] == pytest.approx(0.7656, abs=1e-4)
    assert all(v > 0 for _, v in prof)
    with pytest.raises(ValueError):
        rate_decay_profile([1])


# -- Chernoff-type bounds ----------------------------------------------------------

def test_chernoff_example():
    up = chernoff_upper(100, 0.5, 0.2)
    assert up == pytest.approx(math.exp(-2), rel=1e-14)
    assert exact_binom_upper(100, 0.5, 60) < up


def test_chernoff_small_delta():
    assert chernoff_upper(50, 0.3, 1e-9) == pytest.approx(1.0)
    assert chernoff_lower(50, 0.3, 1e-9) == pytest.approx(1.0)


def test_chernoff_monotone():
    ds = np.linspace(0.01, 2.0, 50)
    up = [chernoff_upper(80, 0.3, d) for d in ds]
    lo = [chernoff_lower(80, 0.3, d) for d in ds]
    assert all(x > y for x, y in zip(up, up[1:]))
    assert all(x > y for x, y in zip(lo, lo[1:]))


@settings(max_examples=150, deadline=None)
@given(K=st.integers(1, 200), p=st.floats(0.01, 0.99), delta=st.floats(0.01, 3.0))
def test_chernoff_dominates_exact_tails(K, p, delta):
    mu = K * p
    if (1 + delta) * mu <= K:
        assert exact_binom_upper(K, p, (1 + delta) * mu) <= chernoff_upper(K, p, delta) + 1e-12
    if delta <= 1:
        assert exact_binom_lower(K, p, (1 - delta) * mu) <= chernoff_lower(K, p, delta) + 1e-12


def test_chernoff_domain():
    with pytest.raises(ValueError):
        chernoff_upper(0, 0.5, 0.1)
    with pytest.raises(ValueError):
        chernoff_lower(10, 1.0, 0.1)
    with pytest.raises(ValueError):
        chernoff_lower(10, 0.5, 0.0)


# -- report and cross-bound properties -----------------------------------------------

def test_report_fields():
    rep = bound_report(1000, 10, 0.5)
    assert rep.mode == "exact"
    assert 0 < rep.eta < 1 and 0 < rep.psi < 1
    assert 0 <= rep.rate_it <= 1
    assert rep.N_achievability == max(rep.N_fn, rep.N_fp)
    assert rep.N_converse == pytest.approx(203.27, abs=0.01)
    asym = bound_report(1000, 10, 0.5, mode="asymptotic")
    assert asym.eta == pytest.approx(0.25)
    assert asym.delta_star == optimal_delta(1000, 10, 0.5, A2, "asymptotic")


def test_report_domain():
    with pytest.raises(ValueError):
        bound_report(1000, 10, 0.0)
    with pytest.raises(ValueError):
        bound_report(1000, 1, 0.5)
    with pytest.raises(ValueError):
        bound_report(1000, 10, 0.5, mode="bogus")


@pytest.mark.parametrize("n,d", [(300, 8), (1000, 10), (5000, 40), (10**6, 1000)])
@pytest.mark.parametrize("q", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_sandwich(n, d, q):
    rep = bound_report(n, d, q)
    assert rep.N_converse <= rep.N_achievability


def test_order_matching_high_noise():
    n, d = 10**6, 1000
    ach, conv = [], []
    for q in (0.9, 0.99, 0.999):
        rep = bound_report(n, d, q)
        ach.append(rep.N_achievability * (1 - q) / (d * math.log(n)))
        conv.append(rep.N_converse * (1 - q) / log2_binom(n, d))
    assert max(ach) / min(ach) < 1.15
    assert max(conv) / min(conv) < 1.15
    assert all(0 < v < math.inf for v in ach + conv)
