"""Seeded Monte Carlo estimation of decoder error probabilities.

Trial ``t`` of an experiment with master seed ``s`` draws everything from
``SeedSpec(s, t)``, so a trial's outcome is fixed by ``(config, s, t)`` alone.
Workers return plain counters that are summed, which makes the result
independent of the number of workers and of scheduling order.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import bounds
from .decode import ML_GUARD, GuardError, ml_oracle_decode, ncomp_decode
from .model import ProblemParams, SeedSpec, dilute_outcomes, draw_defectives, gen_design, resolve_alpha

# Stream reserved for the shared design in fixed-design mode.
FIXED_DESIGN_STREAM = (1 << 64) - 1

Z95 = 1.959963984540054


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment.

    ``delta`` is the NCOMP slack: ``"explicit"`` or ``"asymptotic"`` for the
    optimal value in that form, or a number. It is ignored by the ML decoder.
    """

    params: ProblemParams
    decoder: str = "ncomp"
    delta: str | float = "explicit"
    trials: int = 100
    master_seed: int = 0
    jobs: int = 1
    fixed_design: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}")
        if self.decoder not in ("ncomp", "ml"):
            raise ValueError(f"unknown decoder {self.decoder!r}")
        if self.decoder == "ml" and math.comb(self.params.n, self.params.d) > ML_GUARD:
            raise GuardError(
                f"ML decoding needs C({self.params.n}, {self.params.d}) <= {ML_GUARD} candidate sets")
        if isinstance(self.delta, str) and self.delta not in ("explicit", "asymptotic"):
            raise ValueError(f"delta must be 'explicit', 'asymptotic' or a number, got {self.delta!r}")
        SeedSpec(self.master_seed)

    def resolved_delta(self) -> float:
        """Numeric slack delta used by NCOMP (nan for ML)."""
        if self.decoder == "ml":
            return math.nan
        if not isinstance(self.delta, str):
            return float(self.delta)
        p = self.params
        return bounds.optimal_delta(p.n, p.d, p.q, resolve_alpha(p), self.delta) - 1.0


@dataclass(frozen=True)
class TrialStats:
    trials: int
    failures: int
    fn_events: int
    fp_events: int
    p_e_hat: float = field(init=False)
    ci_low: float = field(init=False)
    ci_high: float = field(init=False)

    def __post_init__(self):
        if not 0 <= self.failures <= self.trials:
            raise ValueError("failures must lie in [0, trials]")
        lo, hi = wilson_interval(self.failures, self.trials)
        object.__setattr__(self, "p_e_hat", self.failures / self.trials)
        object.__setattr__(self, "ci_low", lo)
        object.__setattr__(self, "ci_high", hi)

    @property
    def standard_error(self) -> float:
        p = self.p_e_hat
        return math.sqrt(p * (1.0 - p) / self.trials)


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("need at least one trial")
    p = k / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    # clamp so the interval always contains p despite rounding
    return min(max(0.0, centre - half), p), max(min(1.0, centre + half), p)


def pooled_standard_error(a: TrialStats, b: TrialStats) -> float:
    """Standard error of the difference of two failure rates under a pooled rate."""
    p = (a.failures + b.failures) / (a.trials + b.trials)
    return math.sqrt(p * (1.0 - p) * (1.0 / a.trials + 1.0 / b.trials))


def run_trial(config: ExperimentConfig, t: int, delta: float) -> tuple[bool, bool, bool]:
    """Run trial ``t``; returns (failure, any false negative, any false positive)."""
    p = config.params
    seed = SeedSpec(config.master_seed, t)
    D = draw_defectives(p.n, p.d, seed)
    design_seed = SeedSpec(config.master_seed, FIXED_DESIGN_STREAM) if config.fixed_design else seed
    M = gen_design(p, design_seed)
    y = dilute_outcomes(M, D, p.q, seed)
    if config.decoder == "ncomp":
        est = ncomp_decode(M, y, p.q, delta).estimate
    else:
        est = ml_oracle_decode(M, y, p.q, p.d).estimate
    truth = D.indices
    fn = bool(np.setdiff1d(truth, est.indices, assume_unique=True).size)
    fp = bool(np.setdiff1d(est.indices, truth, assume_unique=True).size)
    return fn or fp, fn, fp


def _run_range(config: ExperimentConfig, start: int, stop: int, delta: float) -> tuple[int, int, int]:
    failures = fn_events = fp_events = 0
    for t in range(start, stop):
        fail, fn, fp = run_trial(config, t, delta)
        failures += fail
        fn_events += fn
        fp_events += fp
    return failures, fn_events, fp_events


def run_experiment(config: ExperimentConfig) -> TrialStats:
    delta = config.resolved_delta()
    jobs = max(1, min(config.jobs, config.trials))
    if jobs == 1:
        counts = [_run_range(config, 0, config.trials, delta)]
    else:
        edges = np.linspace(0, config.trials, jobs + 1).astype(int)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_range, config, int(a), int(b), delta)
                       for a, b in zip(edges[:-1], edges[1:]) if b > a]
            counts = [f.result() for f in futures]
    failures, fn_events, fp_events = (sum(c) for c in zip(*counts))
    return TrialStats(config.trials, failures, fn_events, fp_events)


@dataclass(frozen=True)
class SweepPoint:
    config: ExperimentConfig
    stats: TrialStats
    bounds: bounds.BoundReport | None


def sweep(configs, bound_mode: str = "exact") -> list[SweepPoint]:
    """Run each configuration in order and pair it with its bound report.

    Bounds are only defined for 0 < q < 1 and 1 < d; other points get ``None``.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("sweep needs at least one configuration")
    out = []
    for i, cfg in enumerate(configs):
        try:
            stats = run_experiment(cfg)
            p = cfg.params
            rep = None
            if 0.0 < p.q < 1.0 and p.d > 1:
                rep = bounds.bound_report(p.n, p.d, p.q, resolve_alpha(p), bound_mode)
        except GuardError as exc:
            raise GuardError(f"sweep point {i}: {exc}") from exc
        except (ValueError, ArithmeticError) as exc:
            raise type(exc)(f"sweep point {i}: {exc}") from exc
        out.append(SweepPoint(cfg, stats, rep))
    return out


def critical_tests(config: ExperimentConfig, eps: float, lo: int = 1, hi: int | None = None) -> int:
    """Smallest N (by bisection) whose estimated error rate is at most ``eps``.

    Assumes the error rate is non-increasing in N; each probe reuses the
    config's seed, so probes share their random defective sets.
    """
    if hi is None:
        hi = max(lo, 1)
        while run_experiment(replace(config, params=config.params.with_tests(hi))).p_e_hat > eps:
            hi *= 2
            if hi > 1 << 24:
                raise ValueError(f"error rate stays above {eps} up to N = {hi}")
    while lo < hi:
        mid = (lo + hi) // 2
        if run_experiment(replace(config, params=config.params.with_tests(mid))).p_e_hat <= eps:
            hi = mid
        else:
            lo = mid + 1
    return lo
