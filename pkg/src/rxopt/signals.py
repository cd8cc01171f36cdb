"""Ground-truth signal functions, Gaussian design laws, and synthetic data.

A signal is the noiseless mean function mu(x); a :class:`SignalSpec` pairs it
with the noise variance used when sampling responses y = mu(x) + eps,
eps ~ N(0, noise_var).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import DimensionMismatch, NonFiniteIntegrand
from .numcore import DEFAULT_QUADRATURE_ORDER, SeedStream, gauss_hermite_rule, validate_matrix


# ---------------------------------------------------------------------------
# Signal shapes


@dataclass(frozen=True)
class PiecewiseLinearSignal:
    """1-D family interpolating from a hinge to a pure line.

    mu(x) = (1 - 2k) * max(0, x) for k < 0.5 and (1 - 2k) * x for k >= 0.5,
    k in [0, 1].  Continuous in x with mu(0) = 0 for every k; at k = 0.5 the
    signal is identically zero.
    """

    k: float

    def __post_init__(self):
        if not 0.0 <= self.k <= 1.0:
            raise ValueError(f"k must lie in [0, 1], got {self.k}")

    dimension = 1

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        slope = 1.0 - 2.0 * self.k
        if self.k < 0.5:
            return slope * np.maximum(x, 0.0)
        return slope * x


@dataclass(frozen=True)
class PolynomialSignal:
    """1-D polynomial mu(x) = sum_i coeffs[i] * x**i."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        if len(self.coeffs) == 0:
            raise ValueError("coefficient list must be non-empty")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    dimension = 1

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.polynomial.polynomial.polyval(x, np.asarray(self.coeffs))


@dataclass(frozen=True)
class GaussianBumpSignal:
    """1-D bump mu(x) = exp(-a * (x - b)**2), a >= 0."""

    a: float
    b: float = 0.0

    def __post_init__(self):
        if self.a < 0:
            raise ValueError("a must be >= 0")

    dimension = 1

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.exp(-self.a * (x - self.b) ** 2)


@dataclass(frozen=True)
class LinearSignal:
    """d-dimensional linear map mu(x) = x @ beta."""

    beta: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))

    @property
    def dimension(self) -> int:
        return len(self.beta)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        beta = np.asarray(self.beta)
        if beta.shape[0] == 1:
            # 1-D map: any input array is a batch of scalar points
            return x * beta[0]
        if x.ndim == 1:
            if x.shape[0] != beta.shape[0]:
                raise DimensionMismatch(f"expected {beta.shape[0]} features, got {x.shape[0]}")
            return float(x @ beta)
        if x.shape[1] != beta.shape[0]:
            raise DimensionMismatch(f"expected {beta.shape[0]} features, got {x.shape[1]}")
        return x @ beta


SignalShape = Union[PiecewiseLinearSignal, PolynomialSignal, GaussianBumpSignal, LinearSignal]


@dataclass(frozen=True)
class SignalSpec:
    """A mean function together with the additive noise variance."""

    shape: SignalShape
    noise_var: float = 0.0

    def __post_init__(self):
        if self.noise_var < 0:
            raise ValueError("noise_var must be >= 0")

    @property
    def dimension(self) -> int:
        return self.shape.dimension


def eval_signal(spec: SignalSpec | SignalShape, x: np.ndarray):
    """Evaluate the noiseless mean mu at x (scalar, vector, or n x d rows)."""
    shape = spec.shape if isinstance(spec, SignalSpec) else spec
    if shape.dimension == 1:
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            if x.shape[1] != 1:
                raise DimensionMismatch(f"1-D signal got {x.shape[1]}-column input")
            return shape(x[:, 0])
        return shape(x)
    return shape(x)


# ---------------------------------------------------------------------------
# Design law and datasets


@dataclass(frozen=True)
class DesignSpec:
    """Input law N(0, covariance) in ``dimension`` coordinates.

    ``intercept=True`` appends a constant-1 column to every sampled row (a
    degenerate coordinate), so downstream fits see d + 1 features while the
    signal still consumes the first d coordinates.
    """

    dimension: int = 1
    covariance: Optional[np.ndarray] = None
    intercept: bool = False

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.covariance is not None:
            cov = validate_matrix(np.asarray(self.covariance, dtype=float), "covariance").copy()
            if cov.shape != (self.dimension, self.dimension):
                raise DimensionMismatch(
                    f"covariance shape {cov.shape} does not match dimension {self.dimension}"
                )
            cov.setflags(write=False)
            object.__setattr__(self, "covariance", cov)

    @property
    def n_features(self) -> int:
        return self.dimension + (1 if self.intercept else 0)

    def covariance_matrix(self) -> np.ndarray:
        if self.covariance is None:
            return np.eye(self.dimension)
        return np.asarray(self.covariance)

    def chol_factor(self) -> Optional[np.ndarray]:
        """Cholesky factor of the covariance, or None for the identity."""
        if self.covariance is None:
            return None
        return np.linalg.cholesky(self.covariance)


@dataclass(frozen=True)
class Dataset:
    """Immutable design matrix / response pair."""

    X: np.ndarray
    y: np.ndarray
    noise_var: Optional[float] = None

    def __post_init__(self):
        X = validate_matrix(self.X, "X").copy()
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DimensionMismatch(f"y shape {y.shape} does not match X rows {X.shape[0]}")
        y = y.copy()
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def sample_design(design: DesignSpec, n: int, gen: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. rows from the design law (with intercept augmentation)."""
    z = gen.standard_normal((n, design.dimension))
    chol = design.chol_factor()
    x = z if chol is None else z @ chol.T
    if design.intercept:
        x = np.hstack([x, np.ones((n, 1))])
    return x


def sample_dataset(
    spec: SignalSpec,
    design: DesignSpec,
    n: int,
    rng: SeedStream | np.random.Generator,
) -> Dataset:
    """Sample X from the design law and y = mu(X) + eps.

    Passing a :class:`SeedStream` makes the call pure (same stream, same
    data); passing a generator consumes from it, which is how the Monte-Carlo
    loops draw a train and a test set from one per-run stream.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if spec.dimension != design.dimension:
        raise DimensionMismatch(
            f"signal dimension {spec.dimension} does not match design dimension {design.dimension}"
        )
    gen = rng.generator() if isinstance(rng, SeedStream) else rng
    x = sample_design(design, n, gen)
    raw = x[:, : design.dimension]
    mean = eval_signal(spec, raw if design.dimension > 1 else raw[:, 0])
    y = np.asarray(mean, dtype=float)
    if spec.noise_var > 0:
        y = y + gen.standard_normal(n) * np.sqrt(spec.noise_var)
    else:
        # keep the draw count independent of noise_var so datasets line up
        y = y + 0.0 * gen.standard_normal(n)
    return Dataset(X=x, y=y, noise_var=spec.noise_var)


# ---------------------------------------------------------------------------
# Gaussian moments of 1-D signals


@dataclass(frozen=True)
class SignalMoments:
    """E[Z mu(Z)], E[Z^2 mu(Z)^2], E[Z^3 mu(Z)] under Z ~ N(0,1)."""

    m1: float
    m2: float
    m3: float


def signal_mean(
    shape: SignalShape, order: int = DEFAULT_QUADRATURE_ORDER
) -> float:
    """E[mu(Z)] under Z ~ N(0,1) for a 1-D signal.

    The hinge branch of the piecewise family has a kink at zero that
    symmetric quadrature cannot integrate exactly, so its mean is evaluated
    in closed form ((1-2k) * E[relu(Z)]); smooth shapes go through
    Gauss-Hermite.
    """
    if shape.dimension != 1:
        raise DimensionMismatch("signal_mean requires a 1-D signal")
    if isinstance(shape, PiecewiseLinearSignal):
        if shape.k >= 0.5:
            return 0.0
        return (1.0 - 2.0 * shape.k) / np.sqrt(2.0 * np.pi)
    rule = gauss_hermite_rule(order)
    return float(rule.weights @ np.asarray(shape(rule.nodes), dtype=float))


def moments_1d(
    spec: SignalSpec | SignalShape,
    order: int = DEFAULT_QUADRATURE_ORDER,
) -> SignalMoments:
    """Standard-normal moments of a 1-D signal via Gauss-Hermite quadrature.

    Exact for polynomial mu of degree <= order - 4, and exact for the
    piecewise family because each integrand splits into a polynomial even
    part plus an odd part that both the measure and the symmetric rule
    annihilate.
    """
    shape = spec.shape if isinstance(spec, SignalSpec) else spec
    if shape.dimension != 1:
        raise DimensionMismatch("moments_1d requires a 1-D signal")
    rule = gauss_hermite_rule(order)
    z, w = rule.nodes, rule.weights
    mu = np.asarray(shape(z), dtype=float)
    if not np.all(np.isfinite(mu)):
        raise NonFiniteIntegrand("signal is not finite at a quadrature node")
    m1 = float(w @ (z * mu))
    m2 = float(w @ (z * z * mu * mu))
    m3 = float(w @ (z ** 3 * mu))
    return SignalMoments(m1=m1, m2=m2, m3=m3)
