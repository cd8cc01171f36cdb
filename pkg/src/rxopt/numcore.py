"""Deterministic numerical kernel: dense solves, SVD helpers, Gauss-Hermite
quadrature for standard-normal expectations, and reproducible seed streams.

Matrices are plain float64 ``numpy`` arrays throughout the package; the
helpers here add the validation and error semantics the rest of the code
relies on.  All functions are pure: given the same inputs (including a
:class:`SeedStream`) they return bit-identical results regardless of thread
scheduling or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from hashlib import blake2b
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, NonFiniteIntegrand, NotPositiveDefinite

# Relative pivot / singular-value cutoff used for rank decisions.  Saturated
# designs (n = d) sit near the interpolation threshold, so the pseudo-inverse
# fallback keys off s1 * RANK_CUTOFF rather than machine epsilon.
RANK_CUTOFF = 1e-10

DEFAULT_QUADRATURE_ORDER = 40


# ---------------------------------------------------------------------------
# Seed streams


@dataclass(frozen=True)
class SeedStream:
    """Counter-based random stream: (master_seed, derivation path).

    Two streams with the same ``master_seed`` and ``path`` produce
    bit-identical sequences; distinct paths give statistically independent
    streams (PCG64 seeded through ``numpy.random.SeedSequence`` spawn keys).
    Streams carry no mutable state, so they are safe to share across workers;
    call :meth:`generator` to obtain a fresh consumable generator.
    """

    master_seed: int
    path: tuple[int, ...] = ()

    @property
    def stream_index(self) -> tuple[int, ...]:
        return self.path

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, index: int) -> "SeedStream":
        return SeedStream(self.master_seed, self.path + (int(index),))

    def child_from_text(self, label: str) -> "SeedStream":
        """Derive a child stream from a text label (stable across runs)."""
        digest = blake2b(label.encode("utf-8"), digest_size=8).digest()
        lo = int.from_bytes(digest[:4], "little")
        hi = int.from_bytes(digest[4:], "little")
        return SeedStream(self.master_seed, self.path + (lo, hi))


def derive_stream(master_seed: int, run_index: int) -> SeedStream:
    """Per-run stream for Monte-Carlo loops; bijective in ``run_index``."""
    return SeedStream(int(master_seed), (int(run_index),))


def as_stream(seed) -> SeedStream:
    """Coerce an int / SeedStream into a SeedStream."""
    if isinstance(seed, SeedStream):
        return seed
    return SeedStream(int(seed))


# ---------------------------------------------------------------------------
# Dense linear algebra


def validate_matrix(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or min(a.shape) < 1:
        raise DimensionMismatch(f"{name} must be 2-D with positive dimensions, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DimensionMismatch(f"{name} contains non-finite entries")
    return a


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a @ x = b`` for symmetric positive-definite ``a``.

    Raises :class:`NotPositiveDefinite` when a Cholesky pivot falls at or
    below ``RANK_CUTOFF * max(diag)``, which signals rank deficiency; callers
    fall back to :func:`pinv`.
    """
    a = validate_matrix(a, "a")
    d = a.shape[0]
    if a.shape[1] != d:
        raise DimensionMismatch(f"a must be square, got {a.shape}")
    scale = np.linalg.norm(a)
    if scale > 0 and np.linalg.norm(a - a.T) > 1e-10 * scale:
        raise DimensionMismatch("a is not symmetric within tolerance")
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    max_diag = float(np.max(np.abs(np.diag(a))))
    if np.any(np.diag(chol) ** 2 <= RANK_CUTOFF * max_diag):
        raise NotPositiveDefinite("pivot below rank cutoff")
    b = np.asarray(b, dtype=float)
    y = np.linalg.solve(chol, b)
    return np.linalg.solve(chol.T, y)


def solve_spd_or_pinv(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, bool]:
    """solve_spd with pseudo-inverse fallback; returns (x, used_pinv)."""
    try:
        return solve_spd(a, b), False
    except NotPositiveDefinite:
        return pinv(a) @ np.asarray(b, dtype=float), True


def svd(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full SVD ``a = u @ diag(s) @ vt`` with singular values descending."""
    a = validate_matrix(a, "a")
    return np.linalg.svd(a, full_matrices=False)


def pinv(a: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with cutoff ``s1 * RANK_CUTOFF``."""
    u, s, vt = svd(a)
    cutoff = s[0] * RANK_CUTOFF if s.size and s[0] > 0 else 0.0
    inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    return (vt.T * inv) @ u.T


def rank_truncate(a: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Best rank-k approximation of a symmetric PSD matrix via SVD.

    Returns ``(a_k, a_k_pinv, s_next)`` where ``s_next`` is the (k+1)-th
    singular value (0.0 when k equals the dimension).
    """
    u, s, vt = svd(a)
    a_k = (u[:, :k] * s[:k]) @ vt[:k]
    cutoff = s[0] * RANK_CUTOFF if s[0] > 0 else 0.0
    inv = np.array([1.0 / si if si > cutoff else 0.0 for si in s[:k]])
    a_k_pinv = (vt[:k].T * inv) @ u[:, :k].T
    s_next = float(s[k]) if k < len(s) else 0.0
    return a_k, a_k_pinv, s_next


# ---------------------------------------------------------------------------
# Gauss-Hermite quadrature against the standard normal measure


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes/weights for E_{Z~N(0,1)} f(Z); weights sum to 1.

    Exact for polynomial integrands of degree <= 2 * order - 1.
    """

    order: int
    nodes: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=32)
def gauss_hermite_rule(order: int = DEFAULT_QUADRATURE_ORDER) -> QuadratureRule:
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    x, w = np.polynomial.hermite.hermgauss(order)
    nodes = x * np.sqrt(2.0)
    weights = w / np.sqrt(np.pi)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(order=order, nodes=nodes, weights=weights)


def gh_expect(f: Callable[[np.ndarray], np.ndarray], order: int = DEFAULT_QUADRATURE_ORDER) -> float:
    """E_{Z~N(0,1)} f(Z) by Gauss-Hermite quadrature.

    ``f`` must accept an array of nodes and evaluate elementwise.
    """
    rule = gauss_hermite_rule(order)
    vals = np.asarray(f(rule.nodes), dtype=float)
    if vals.shape != rule.nodes.shape:
        vals = np.broadcast_to(vals, rule.nodes.shape)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteIntegrand("integrand is not finite at a quadrature node")
    return float(np.dot(rule.weights, vals))


def gaussian_moment(p: int) -> float:
    """E[Z^p] for Z ~ N(0,1): (p-1)!! for even p, 0 for odd p."""
    if p < 0:
        raise ValueError("moment order must be >= 0")
    if p % 2 == 1:
        return 0.0
    out = 1.0
    for i in range(p - 1, 0, -2):
        out *= i
    return out


# ---------------------------------------------------------------------------
# Stable reductions


def pairwise_mean(values: Sequence[float] | np.ndarray) -> float:
    """Mean via numpy's pairwise (tree) summation; order-stable for MC runs."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise DimensionMismatch("cannot average an empty sequence")
    return float(np.mean(arr))
