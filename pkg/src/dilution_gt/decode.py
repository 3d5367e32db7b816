"""Decoders mapping (design, outcomes) to an estimated defective set."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .model import DefectiveSet, DesignMatrix, OutcomeVector

log = logging.getLogger(__name__)

ML_GUARD = 10**6
_ML_CHUNK = 1 << 14


class GuardError(ValueError):
    """Instance too large for exhaustive decoding."""


@dataclass(frozen=True, eq=False)
class ItemEvidence:
    """Per-item tallies: tests containing each item and how many were positive."""

    tests_containing: np.ndarray
    positive_tests_containing: np.ndarray

    def __len__(self):
        return int(self.tests_containing.size)

    def __getitem__(self, i):
        return int(self.tests_containing[i]), int(self.positive_tests_containing[i])


@dataclass(frozen=True)
class DecodeResult:
    estimate: DefectiveSet
    evidence: ItemEvidence
    decoder_id: str


def item_evidence(M: DesignMatrix, y: OutcomeVector) -> ItemEvidence:
    if len(y) != M.rows:
        raise ValueError(f"outcome length {len(y)} does not match {M.rows} design rows")
    dense = M.dense()
    G = dense.sum(axis=0, dtype=np.int64)
    P = dense[y.bits].sum(axis=0, dtype=np.int64)
    return ItemEvidence(G, P)


def ncomp_decode(M: DesignMatrix, y: OutcomeVector, q: float, delta: float) -> DecodeResult:
    """Noisy COMP: item i is declared defective iff G_i > 0 and P_i >= G_i (1 - q (1 + delta)).

    Untested items (G_i = 0) are declared non-defective. At q = 0 this is COMP.
    """
    if not 0.0 <= q < 1.0:
        raise ValueError(f"q must lie in [0, 1), got {q}")
    t = 1.0 - q * (1.0 + delta)
    if not math.isfinite(t):
        raise ValueError(f"threshold multiplier 1 - q(1 + delta) is not finite for delta={delta}")
    ev = item_evidence(M, y)
    G, P = ev.tests_containing, ev.positive_tests_containing
    keep = (G > 0) & (P >= G * t)
    return DecodeResult(DefectiveSet(np.flatnonzero(keep)), ev, "ncomp")


def _log_likelihood_tables(q: float, kmax: int):
    k = np.arange(kmax + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.log1p(-(q ** k.astype(float)))  # log(1 - q^k); -inf at k = 0
        logq = math.log(q) if q > 0 else -math.inf
        neg = np.where(k == 0, 0.0, k * logq)
    return pos, neg


def ml_oracle_decode(M: DesignMatrix, y: OutcomeVector, q: float, d: int) -> DecodeResult:
    """Exhaustive maximum-likelihood decoder over all size-d subsets.

    A test with k defective entries is negative with probability q**k. Ties go
    to the lexicographically smallest index tuple. Refuses when C(n, d) > ML_GUARD.
    """
    n = M.cols
    if len(y) != M.rows:
        raise ValueError(f"outcome length {len(y)} does not match {M.rows} design rows")
    if not 0 < d <= n:
        raise ValueError(f"need 0 < d <= n, got d={d}")
    if not 0.0 <= q < 1.0:
        raise ValueError(f"q must lie in [0, 1), got {q}")
    ncand = math.comb(n, d)
    if ncand > ML_GUARD:
        raise GuardError(f"C({n}, {d}) = {ncand} candidate sets exceeds the limit of {ML_GUARD}")

    dense = M.dense().astype(np.int16)
    pos, neg = _log_likelihood_tables(q, d)
    table = np.where(y.bits[:, None], pos[None, :], neg[None, :])  # (N, d + 1)
    rows = np.arange(M.rows)[:, None]

    best_score, best = -math.inf, None
    combos = itertools.combinations(range(n), d)
    while True:
        chunk = np.array(list(itertools.islice(combos, _ML_CHUNK)), dtype=np.int64)
        if chunk.size == 0:
            break
        k = dense[:, chunk].sum(axis=2)  # (N, chunk)
        scores = table[rows, k].sum(axis=0)
        i = int(np.argmax(scores))
        if best is None or scores[i] > best_score:
            best_score, best = scores[i], chunk[i]
    if best_score == -math.inf:
        log.warning("every candidate set is inconsistent with the outcomes; returning the first")
    return DecodeResult(DefectiveSet(best), item_evidence(M, y), "ml")
