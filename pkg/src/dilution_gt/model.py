"""Problem parameters, Bernoulli pooling designs and the test channels.

A design is an ``N x n`` 0/1 matrix stored as packed bits, one row per test.
Outcomes are either the noiseless OR over the defective columns, or the
dilution channel in which every defective 1-entry is independently erased
with probability ``q`` before the OR is taken.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# SeedSequence tags separating the independent substreams of one trial.
_TAG_DESIGN = 0
_TAG_DEFECTIVES = 1

# Rows generated per chunk in gen_design; bounds peak memory.
_CHUNK_ENTRIES = 1 << 22

_U64 = np.uint64
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ProblemParams:
    """Experiment parameterization.

    ``alpha=None`` selects the noise-adaptive design ``alpha = log 2 / (1 - q)``;
    any float fixes it. Items join each test with probability ``alpha / d``.
    """

    n: int
    d: int
    q: float
    alpha: float | None = None
    N: int = 0

    def __post_init__(self):
        if not 0 < self.d < self.n:
            raise ValueError(f"need 0 < d < n, got n={self.n}, d={self.d}")
        if not 0.0 <= self.q < 1.0:
            raise ValueError(f"dilution probability q must lie in [0, 1), got {self.q}")
        if self.N < 0:
            raise ValueError(f"test count N must be non-negative, got {self.N}")
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        resolve_alpha(self)

    @property
    def adaptive(self) -> bool:
        return self.alpha is None

    @property
    def theta(self) -> float:
        """Sparsity exponent log d / log n (0 when d = 1)."""
        return math.log(self.d) / math.log(self.n)

    @property
    def p(self) -> float:
        return resolve_alpha(self) / self.d

    def with_tests(self, N: int) -> ProblemParams:
        return ProblemParams(self.n, self.d, self.q, self.alpha, N)

    def with_q(self, q: float) -> ProblemParams:
        return ProblemParams(self.n, self.d, q, self.alpha, self.N)


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= v <= _MASK64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")

    def generator(self, tag: int) -> np.random.Generator:
        ss = np.random.SeedSequence([self.master_seed, self.stream_id, tag])
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, eq=False)
class DefectiveSet:
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0):
            raise ValueError("defective indices must be non-negative and strictly increasing")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_items(cls, items) -> DefectiveSet:
        return cls(np.unique(np.asarray(list(items), dtype=np.int64)))

    def __len__(self):
        return int(self.indices.size)

    def __iter__(self):
        return iter(self.indices.tolist())

    def __eq__(self, other):
        if not isinstance(other, DefectiveSet):
            return NotImplemented
        return np.array_equal(self.indices, other.indices)

    def __repr__(self):
        return f"DefectiveSet({self.indices.tolist()})"

    def check(self, n: int, d: int | None = None):
        if self.indices.size and self.indices[-1] >= n:
            raise IndexError(f"defective index {self.indices[-1]} out of range for n={n}")
        if d is not None and len(self) != d:
            raise ValueError(f"expected {d} defectives, got {len(self)}")


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Pool memberships, packed row-major (``np.packbits`` along axis 1)."""

    rows: int
    cols: int
    bits: np.ndarray
    p: float = float("nan")

    def __post_init__(self):
        expected = (self.rows, (self.cols + 7) // 8)
        if self.bits.shape != expected or self.bits.dtype != np.uint8:
            raise ValueError(f"packed bits must be uint8 of shape {expected}, got {self.bits.dtype} {self.bits.shape}")

    @classmethod
    def from_dense(cls, dense, p: float = float("nan")) -> DesignMatrix:
        dense = np.asarray(dense)
        if dense.ndim != 2:
            raise ValueError("design matrix must be 2-dimensional")
        if not np.isin(dense, (0, 1)).all():
            raise ValueError("design entries must be 0 or 1")
        rows, cols = dense.shape
        return cls(rows, cols, np.packbits(dense.astype(bool), axis=1).reshape(rows, (cols + 7) // 8), p)

    def dense(self) -> np.ndarray:
        """Unpacked boolean matrix of shape (rows, cols)."""
        return np.unpackbits(self.bits, axis=1, count=self.cols).astype(bool)

    def columns(self, idx) -> np.ndarray:
        """Boolean submatrix of the given columns, without unpacking the rest."""
        idx = np.asarray(idx, dtype=np.int64)
        shift = (7 - (idx & 7)).astype(np.uint8)
        return ((self.bits[:, idx >> 3] >> shift) & 1).astype(bool)

    def popcount(self) -> int:
        return int(np.bitwise_count(self.bits).sum())

    def __eq__(self, other):
        if not isinstance(other, DesignMatrix):
            return NotImplemented
        return (self.rows, self.cols) == (other.rows, other.cols) and np.array_equal(self.bits, other.bits)


@dataclass(frozen=True, eq=False)
class OutcomeVector:
    bits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bits", np.asarray(self.bits, dtype=bool).reshape(-1))

    def __len__(self):
        return int(self.bits.size)

    def __eq__(self, other):
        if not isinstance(other, OutcomeVector):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def positives(self) -> int:
        return int(self.bits.sum())


def resolve_alpha(params: ProblemParams) -> float:
    if params.alpha is None:
        if params.q >= 1.0:
            raise ValueError("noise-adaptive alpha is undefined at q = 1")
        alpha = math.log(2) / (1.0 - params.q)
    else:
        alpha = float(params.alpha)
    if alpha / params.d > 1.0:
        raise ValueError(f"inclusion probability alpha/d = {alpha / params.d:.6g} exceeds 1")
    return alpha


def draw_defectives(n: int, d: int, seed: SeedSpec) -> DefectiveSet:
    """Uniformly random size-``d`` subset of ``range(n)``."""
    rng = seed.generator(_TAG_DEFECTIVES)
    return DefectiveSet(np.sort(rng.choice(n, size=d, replace=False)))


def gen_design(params: ProblemParams, seed: SeedSpec) -> DesignMatrix:
    """i.i.d. Bernoulli(alpha/d) design with ``params.N`` rows."""
    p = params.p
    if not 0.0 < p <= 1.0:
        raise ValueError(f"invalid inclusion probability {p}")
    n, N = params.n, params.N
    rng = seed.generator(_TAG_DESIGN)
    bits = np.empty((N, (n + 7) // 8), dtype=np.uint8)
    step = max(1, _CHUNK_ENTRIES // n)
    for start in range(0, N, step):
        stop = min(N, start + step)
        bits[start:stop] = np.packbits(rng.random((stop - start, n)) < p, axis=1)
    return DesignMatrix(N, n, bits, p)


def _splitmix(x: np.ndarray) -> np.ndarray:
    # uint64 wraparound is intended
    with np.errstate(over="ignore"):
        x = x + _U64(0x9E3779B97F4A7C15)
        x = (x ^ (x >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> _U64(27))) * _U64(0x94D049BB133111EB)
        return x ^ (x >> _U64(31))


def retention_uniforms(seed: SeedSpec, rows, cols) -> np.ndarray:
    """Counter-based uniforms in (0, 1] keyed by (seed, stream, row, column).

    Each value depends only on its key, so results do not depend on which
    entries are evaluated or in what order. ``rows`` and ``cols`` broadcast.
    """
    rows = np.asarray(rows, dtype=np.uint64)
    cols = np.asarray(cols, dtype=np.uint64)
    key = _splitmix(np.full((), seed.master_seed, dtype=np.uint64))
    key = _splitmix(key ^ _U64(seed.stream_id))
    h = _splitmix(_splitmix(key ^ rows) ^ cols)
    return ((h >> _U64(11)) + _U64(1)).astype(np.float64) * 2.0**-53


def _check_defectives(M: DesignMatrix, D: DefectiveSet):
    D.check(M.cols)


def noiseless_outcomes(M: DesignMatrix, D: DefectiveSet) -> OutcomeVector:
    _check_defectives(M, D)
    if len(D) == 0:
        return OutcomeVector(np.zeros(M.rows, dtype=bool))
    return OutcomeVector(M.columns(D.indices).any(axis=1))


def dilute_outcomes(M: DesignMatrix, D: DefectiveSet, q: float, seed: SeedSpec) -> OutcomeVector:
    """Dilution channel: a defective entry counts only if its retention draw u > q.

    Only defective columns are sampled; non-defective entries never reach the OR.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    _check_defectives(M, D)
    if len(D) == 0 or M.rows == 0:
        return OutcomeVector(np.zeros(M.rows, dtype=bool))
    sub = M.columns(D.indices)
    u = retention_uniforms(seed, np.arange(M.rows)[:, None], D.indices[None, :])
    return OutcomeVector((sub & (u > q)).any(axis=1))


def positivity_probability(p: float, q: float, d: int) -> float:
    """P(y_i = 1) for one test under the Bernoulli design and dilution channel."""
    return 1.0 - (1.0 - p * (1.0 - q)) ** d
