"""Asymptotic and closed-form evaluators for expected optimism.

The central object is the leading 1/n term of the expected optimism
(random-X test error minus training error) of least-squares-family
estimators.  For a penalty level lam >= 0 let S_lam = Sigma + lam*I,
b = S_lam^-1 eta, and zeta = x*(y* - x*'b).  The matched evaluation used
throughout is

    opt(lam) = (2/n) * E[(zeta - E zeta)' S_lam^-1 (zeta - E zeta)]

which at lam = 0 reduces to (2/n) * E[(y - x'S^-1 eta)^2 * (x'S^-1 x)].
An alternative weighting S_lam^-1 Sigma S_lam^-1 (``form="plugin"``) is kept
for comparison; it agrees at lam = 0 but underestimates simulated optimism
for lam > 0 and decays like 1/lam^2 instead of the observed 1/lam (see
tests).  Expectations are evaluated either by Gauss-Hermite quadrature
(1-D designs) or by inner Monte Carlo on a seed-derived sample; operations
called with the same stream share the same evaluation points, so reduction
identities hold to solver precision rather than MC noise.

Noise enters every integrand analytically: E_eps[(mu + eps - fit)^2 ...]
is expanded to (mu - fit)^2 + sigma2 before averaging, which removes the
epsilon sampling noise without changing the expectation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    FeatureDimensionOverflow,
    NotPositiveDefinite,
    RankDeficientDesign,
    RankExceedsDimension,
    UnsupportedCombination,
    ZeroNoiseVariance,
)
from .numcore import (
    DEFAULT_QUADRATURE_ORDER,
    SeedStream,
    as_stream,
    gauss_hermite_rule,
    gaussian_moment,
    rank_truncate,
    solve_spd,
)
from .signals import (
    DesignSpec,
    GaussianBumpSignal,
    LinearSignal,
    PiecewiseLinearSignal,
    SignalSpec,
    eval_signal,
    moments_1d,
    sample_design,
    signal_mean,
)

DEFAULT_BUDGET = 200_000

# rng.child(0) feeds moment estimation, rng.child(1) feeds the evaluation
# sample; population_moments and the optimism evaluators follow the same
# convention so that feature-space and plain evaluations of the same model
# see identical draws.
_MOMENT_CHILD = 0
_EVAL_CHILD = 1


# ---------------------------------------------------------------------------
# Population moments


@dataclass(frozen=True)
class PopulationMoments:
    """Second moments of the design and the input-output cross moment.

    ``sigma`` is E[x x'], ``eta`` is E[x y] (both over the design law,
    including the degenerate intercept coordinate when the design has one),
    sigma2 the noise variance.  ``eval_error`` bounds the numerical error of
    the moment evaluation: ~1e-10 for quadrature/analytic, 4x the sample
    standard error for inner Monte Carlo.
    """

    d: int
    sigma: np.ndarray
    eta: np.ndarray
    sigma2: float
    signal: SignalSpec
    design: DesignSpec
    eval_error: float
    method: str


def population_moments(
    signal: SignalSpec,
    design: DesignSpec,
    method: str = "auto",
    budget: int = DEFAULT_BUDGET,
    rng: SeedStream | int | None = None,
    order: int = DEFAULT_QUADRATURE_ORDER,
) -> PopulationMoments:
    """E[x x'] and E[x y] for the signal/design pair.

    Linear signals are handled in closed form; other 1-D signals go through
    Gauss-Hermite quadrature; anything else requires ``method="mc"`` with a
    budget of at least 1000 draws.
    """
    if method not in ("auto", "quadrature", "mc"):
        raise ValueError(f"unknown method {method!r}")
    is_linear = isinstance(signal.shape, LinearSignal)
    if method == "auto":
        method = "mc" if (design.dimension > 1 and not is_linear) else "quadrature"

    if method == "quadrature":
        if is_linear:
            cov = design.covariance_matrix()
            eta_raw = cov @ np.asarray(signal.shape.beta)
            if design.intercept:
                sigma = np.zeros((design.dimension + 1, design.dimension + 1))
                sigma[: design.dimension, : design.dimension] = cov
                sigma[-1, -1] = 1.0
                eta = np.concatenate([eta_raw, [0.0]])  # E[mu] = 0 for centered designs
            else:
                sigma, eta = cov, eta_raw
            return PopulationMoments(
                d=sigma.shape[0], sigma=sigma, eta=eta, sigma2=signal.noise_var,
                signal=signal, design=design, eval_error=1e-10, method="quadrature",
            )
        if design.dimension != 1:
            raise UnsupportedCombination("quadrature moments require a 1-D or linear signal")
        v = float(design.covariance_matrix()[0, 0])
        rule = gauss_hermite_rule(order)
        x = np.sqrt(v) * rule.nodes
        mu = np.asarray(eval_signal(signal, x), dtype=float)
        exy = float(rule.weights @ (x * mu))
        if design.intercept:
            if isinstance(signal.shape, PiecewiseLinearSignal):
                # positively homogeneous: E[mu(sqrt(v) Z)] = sqrt(v) E[mu(Z)]
                emu = np.sqrt(v) * signal_mean(signal.shape, order=order)
            else:
                emu = float(rule.weights @ mu)
            sigma = np.array([[v, 0.0], [0.0, 1.0]])
            eta = np.array([exy, emu])
        else:
            sigma = np.array([[v]])
            eta = np.array([exy])
        return PopulationMoments(
            d=sigma.shape[0], sigma=sigma, eta=eta, sigma2=signal.noise_var,
            signal=signal, design=design, eval_error=1e-10, method="quadrature",
        )

    if budget < 1000:
        raise ValueError("inner-MC moment estimation needs budget >= 1000")
    gen = as_stream(rng if rng is not None else 0).child(_MOMENT_CHILD).generator()
    X = sample_design(design, budget, gen)
    mu = np.asarray(eval_signal(signal, X[:, : design.dimension] if design.dimension > 1 else X[:, 0]))
    sigma = X.T @ X / budget
    eta = X.T @ mu / budget
    se_eta = np.std(X * mu[:, None], axis=0, ddof=1) / np.sqrt(budget)
    eval_error = 4.0 * float(np.max(se_eta))
    return PopulationMoments(
        d=sigma.shape[0], sigma=sigma, eta=eta, sigma2=signal.noise_var,
        signal=signal, design=design, eval_error=eval_error, method="inner-mc",
    )


# ---------------------------------------------------------------------------
# Evaluation cores


@dataclass(frozen=True)
class TheoryValue:
    """An evaluated asymptotic optimism with its numerical uncertainty."""

    raw_optimism: float
    scaled_optimism: Optional[float]
    n: int
    eval_stderr: float
    method: str

    @property
    def scaled_stderr(self) -> Optional[float]:
        if self.scaled_optimism is None:
            return None
        return self.eval_stderr * self.n / (2.0 * self._sigma2)

    # stashed by the evaluators so scaled_stderr can be derived
    _sigma2: float = field(default=0.0, repr=False)


def _scaled(raw: float, n: int, sigma2: float) -> Optional[float]:
    if sigma2 > 0:
        return raw * n / (2.0 * sigma2)
    return None


def _eval_points_mc(design: DesignSpec, budget: int, rng: SeedStream) -> np.ndarray:
    return sample_design(design, budget, rng.child(_EVAL_CHILD).generator())


def _eval_points_quadrature(design: DesignSpec, order: int) -> tuple[np.ndarray, np.ndarray]:
    """1-D design quadrature nodes as feature rows, plus weights."""
    if design.dimension != 1:
        raise UnsupportedCombination("quadrature evaluation requires a 1-D design")
    rule = gauss_hermite_rule(order)
    v = float(design.covariance_matrix()[0, 0])
    x = np.sqrt(v) * rule.nodes
    if design.intercept:
        rows = np.column_stack([x, np.ones_like(x)])
    else:
        rows = x[:, None]
    return rows, np.asarray(rule.weights)


def _quadratic_terms(
    X: np.ndarray,
    mu: np.ndarray,
    b: np.ndarray,
    weight: np.ndarray,
    lam: float,
    sigma2: float,
) -> np.ndarray:
    """Per-point values of (zeta - E zeta)' W (zeta - E zeta), eps integrated.

    zeta - E zeta = x * (mu(x) - x'b) + x*eps - lam*b; taking the expectation
    over eps analytically leaves v' W v + sigma2 * x' W x with
    v = x * (mu - x'b) - lam*b.
    """
    resid = mu - X @ b
    V = X * resid[:, None]
    if lam != 0.0:
        V = V - lam * b
    terms = np.einsum("ij,jk,ik->i", V, weight, V)
    if sigma2 > 0:
        terms = terms + sigma2 * np.einsum("ij,jk,ik->i", X, weight, X)
    return terms


def _expect(
    terms: np.ndarray, quad_weights: Optional[np.ndarray]
) -> tuple[float, float]:
    if quad_weights is not None:
        return float(quad_weights @ terms), 0.0
    mean = float(np.mean(terms))
    stderr = float(np.std(terms, ddof=1) / np.sqrt(terms.shape[0]))
    return mean, stderr


def _inverse(a: np.ndarray) -> np.ndarray:
    return solve_spd(a, np.eye(a.shape[0]))


def _resolve_eval(
    design: DesignSpec,
    signal: SignalSpec,
    method: str,
    budget: int,
    rng,
    order: int,
) -> tuple[np.ndarray, np.ndarray, Optional[np.ndarray], str]:
    """Evaluation rows X, signal values mu(X), optional quad weights, label."""
    if method not in ("auto", "quadrature", "mc"):
        raise ValueError(f"unknown method {method!r}")
    kinked_intercept = design.intercept and isinstance(signal.shape, PiecewiseLinearSignal)
    if method == "auto":
        method = "quadrature" if (design.dimension == 1 and not kinked_intercept) else "mc"
    if method == "quadrature":
        if design.dimension != 1:
            raise UnsupportedCombination("quadrature evaluation requires a 1-D design")
        if kinked_intercept:
            raise UnsupportedCombination(
                "intercept designs with kinked signals need an MC evaluation "
                "(the kink breaks symmetric-quadrature exactness)"
            )
        X, w = _eval_points_quadrature(design, order)
        mu = np.asarray(eval_signal(signal, X[:, 0]), dtype=float)
        return X, mu, w, "quadrature"
    X = _eval_points_mc(design, budget, as_stream(rng if rng is not None else 0))
    raw = X[:, : design.dimension]
    mu = np.asarray(eval_signal(signal, raw if design.dimension > 1 else raw[:, 0]), dtype=float)
    return X, mu, None, "inner-mc"


# ---------------------------------------------------------------------------
# Optimism of the least-squares family


def ridge_optimism_asymptotic(
    pm: PopulationMoments,
    lam: float,
    n: int,
    budget: int = DEFAULT_BUDGET,
    rng: SeedStream | int | None = None,
    method: str = "auto",
    order: int = DEFAULT_QUADRATURE_ORDER,
    form: str = "matched",
) -> TheoryValue:
    """Leading-order expected optimism of ridge with penalty n*lam.

    ``form="matched"`` (default) evaluates the centered quadratic form with
    weight S_lam^-1, which matches simulation for every lam and decays like
    1/lam; ``form="plugin"`` uses the weight S_lam^-1 Sigma S_lam^-1.  The
    two coincide at lam = 0, where both reduce to the plain least-squares
    expression.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if form not in ("matched", "plugin"):
        raise ValueError(f"unknown form {form!r}")
    s_lam = pm.sigma + lam * np.eye(pm.d)
    b = solve_spd(s_lam, pm.eta)
    inv_s_lam = _inverse(s_lam)
    if form == "matched":
        weight = inv_s_lam
    else:
        weight = inv_s_lam @ pm.sigma @ inv_s_lam
        weight = 0.5 * (weight + weight.T)
    X, mu, qw, label = _resolve_eval(pm.design, pm.signal, method, budget, rng, order)
    terms = _quadratic_terms(X, mu, b, weight, lam, pm.sigma2)
    mean, stderr = _expect(terms, qw)
    raw = (2.0 / n) * mean
    return TheoryValue(
        raw_optimism=raw,
        scaled_optimism=_scaled(raw, n, pm.sigma2),
        n=n,
        eval_stderr=(2.0 / n) * stderr,
        method=label,
        _sigma2=pm.sigma2,
    )


def ols_optimism_asymptotic(
    pm: PopulationMoments,
    n: int,
    budget: int = DEFAULT_BUDGET,
    rng: SeedStream | int | None = None,
    method: str = "auto",
    order: int = DEFAULT_QUADRATURE_ORDER,
) -> TheoryValue:
    """(2/n) E[(y - x'S^-1 eta)^2 (x'S^-1 x)]: optimism of plain least squares."""
    return ridge_optimism_asymptotic(pm, 0.0, n, budget=budget, rng=rng, method=method, order=order)


def low_rank_optimism_bound(
    pm: PopulationMoments,
    k: int,
    n: int,
    budget: int = DEFAULT_BUDGET,
    rng: SeedStream | int | None = None,
    method: str = "auto",
    order: int = DEFAULT_QUADRATURE_ORDER,
) -> TheoryValue:
    """Upper bound on the optimism of the rank-k truncated estimator.

    Uses M = pinv(S_k) + (1/s_{k+1}) I, where S_k is the best rank-k
    approximation of Sigma and s_{k+1} its next singular value; at k = d the
    inflation term is defined away (1/s_{d+1} := 0) so the bound equals the
    plain least-squares optimism.
    """
    if not 1 <= k <= pm.d:
        raise RankExceedsDimension(f"rank {k} outside [1, {pm.d}]")
    _, trunc_pinv, s_next = rank_truncate(pm.sigma, k)
    M = trunc_pinv if (k == pm.d or s_next == 0.0) else trunc_pinv + np.eye(pm.d) / s_next
    M = 0.5 * (M + M.T)
    b = M @ pm.eta
    X, mu, qw, label = _resolve_eval(pm.design, pm.signal, method, budget, rng, order)
    terms = _quadratic_terms(X, mu, b, M, 0.0, pm.sigma2)
    mean, stderr = _expect(terms, qw)
    raw = (2.0 / n) * mean
    return TheoryValue(
        raw_optimism=raw,
        scaled_optimism=_scaled(raw, n, pm.sigma2),
        n=n,
        eval_stderr=(2.0 / n) * stderr,
        method=label,
        _sigma2=pm.sigma2,
    )


def kernel_optimism_asymptotic(
    feature_map: Callable[[np.ndarray], np.ndarray],
    signal: SignalSpec,
    design: DesignSpec,
    lam: float,
    n: int,
    budget: int = DEFAULT_BUDGET,
    rng: SeedStream | int | None = None,
    form: str = "matched",
) -> TheoryValue:
    """Optimism of feature-space ridge (kernel ridge with map phi).

    Feature moments E[phi phi'] and E[phi y] are estimated by inner MC on
    rng.child(0); the optimism integrand is averaged over rng.child(1), the
    same draw the plain evaluators use, so phi = identity reproduces
    :func:`ridge_optimism_asymptotic` exactly when that is called with
    MC-estimated moments from the same stream.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    stream = as_stream(rng if rng is not None else 0)
    gen = stream.child(_MOMENT_CHILD).generator()
    Xm = sample_design(design, budget, gen)
    raw_m = Xm[:, : design.dimension]
    phi_m = np.asarray(feature_map(Xm), dtype=float)
    if phi_m.ndim != 2 or phi_m.shape[0] != budget:
        raise UnsupportedCombination("feature map must return one row per input row")
    q = phi_m.shape[1]
    if q * q > budget:
        raise FeatureDimensionOverflow(
            f"q^2 = {q * q} moment work exceeds the budget {budget}"
        )
    mu_m = np.asarray(eval_signal(signal, raw_m if design.dimension > 1 else raw_m[:, 0]))
    sigma_phi = phi_m.T @ phi_m / budget
    eta_phi = phi_m.T @ mu_m / budget

    s_lam = sigma_phi + lam * np.eye(q)
    b = solve_spd(s_lam, eta_phi)
    inv_s_lam = _inverse(s_lam)
    if form == "matched":
        weight = inv_s_lam
    elif form == "plugin":
        weight = inv_s_lam @ sigma_phi @ inv_s_lam
        weight = 0.5 * (weight + weight.T)
    else:
        raise ValueError(f"unknown form {form!r}")

    Xe = _eval_points_mc(design, budget, stream)
    raw_e = Xe[:, : design.dimension]
    phi_e = np.asarray(feature_map(Xe), dtype=float)
    mu_e = np.asarray(eval_signal(signal, raw_e if design.dimension > 1 else raw_e[:, 0]))
    terms = _quadratic_terms(phi_e, mu_e, b, weight, lam, signal.noise_var)
    mean, stderr = _expect(terms, None)
    raw = (2.0 / n) * mean
    return TheoryValue(
        raw_optimism=raw,
        scaled_optimism=_scaled(raw, n, signal.noise_var),
        n=n,
        eval_stderr=(2.0 / n) * stderr,
        method="inner-mc",
        _sigma2=signal.noise_var,
    )


@dataclass(frozen=True)
class SignalPart:
    """Misfit component E[(mu(x) - x'S^-1 eta)^2 * x'S^-1 x] with its stderr."""

    value: float
    eval_stderr: float


def misfit_signal_part(
    pm: PopulationMoments,
    budget: int = DEFAULT_BUDGET,
    rng: SeedStream | int | None = None,
    method: str = "auto",
    order: int = DEFAULT_QUADRATURE_ORDER,
) -> SignalPart:
    """Signal-dependent term; zero exactly when the mean function is linear."""
    b = solve_spd(pm.sigma, pm.eta)
    weight = _inverse(pm.sigma)
    X, mu, qw, _ = _resolve_eval(pm.design, pm.signal, method, budget, rng, order)
    terms = _quadratic_terms(X, mu, b, weight, 0.0, 0.0)
    mean, stderr = _expect(terms, qw)
    return SignalPart(value=mean, eval_stderr=stderr)


# ---------------------------------------------------------------------------
# Closed forms for 1-D standard-normal designs


def scaled_optimism_from_moments(m1: float, m2: float, m3: float, sigma2: float) -> float:
    """Scaled optimism (3 m1^2 + m2 - 2 m3 m1) / sigma2 + 1 from the three
    signal moments m1 = E[Z mu], m2 = E[Z^2 mu^2], m3 = E[Z^3 mu]."""
    if sigma2 <= 0:
        raise ZeroNoiseVariance("scaled optimism undefined for sigma2 <= 0")
    return (3.0 * m1 * m1 + m2 - 2.0 * m3 * m1) / sigma2 + 1.0


def poly_series_quadratic_form(coeffs) -> float:
    """Quadratic form F in the non-linear coefficients of a polynomial signal.

    For mu(x) = sum_i A_i x^i under a standard normal design,

        F = sum_{i != 1} sum_{j != 1} [(-2 - 4i) m_{i+1} m_{j+1}
                                       + 2 m_{i+j+2}] A_i A_j

    with m_p the standard normal moments; the scaled optimism is
    F / (2 sigma2) + 1 and does not depend on A_1.
    """
    A = np.asarray(coeffs, dtype=float)
    total = 0.0
    for i in range(A.shape[0]):
        if i == 1 or A[i] == 0.0:
            continue
        for j in range(A.shape[0]):
            if j == 1 or A[j] == 0.0:
                continue
            total += (
                (-2.0 - 4.0 * i) * gaussian_moment(i + 1) * gaussian_moment(j + 1)
                + 2.0 * gaussian_moment(i + j + 2)
            ) * A[i] * A[j]
    return total


def scaled_optimism_poly_series(coeffs, sigma2: float) -> float:
    """Scaled optimism of least squares on a polynomial signal (series form)."""
    if sigma2 <= 0:
        raise ZeroNoiseVariance("scaled optimism undefined for sigma2 <= 0")
    return poly_series_quadratic_form(coeffs) / (2.0 * sigma2) + 1.0


def scaled_optimism_cubic(a0: float, a1: float, a2: float, a3: float, sigma2: float) -> float:
    """Closed form for cubic signals: (2 a0^2 + 30 a2^2 + 84 a3^2
    + 12 a0 a2)/(2 sigma2) + 1; independent of the linear coefficient."""
    if sigma2 <= 0:
        raise ZeroNoiseVariance("scaled optimism undefined for sigma2 <= 0")
    form = 2.0 * a0 ** 2 + 30.0 * a2 ** 2 + 84.0 * a3 ** 2 + 12.0 * a0 * a2
    return form / (2.0 * sigma2) + 1.0


def scaled_optimism_piecewise(k: float, sigma2: float) -> float:
    """Closed form for the hinge-to-line family: (3/2)(1-2k)^2/(2 sigma2) + 1
    for k < 0.5 and exactly 1 for k >= 0.5."""
    if sigma2 <= 0:
        raise ZeroNoiseVariance("scaled optimism undefined for sigma2 <= 0")
    if not 0.0 <= k <= 1.0:
        raise ValueError("k must lie in [0, 1]")
    if k >= 0.5:
        return 1.0
    return 1.5 * (1.0 - 2.0 * k) ** 2 / (2.0 * sigma2) + 1.0


def scaled_optimism_gaussian_bump(
    a: float, b: float, sigma2: float, order: int = DEFAULT_QUADRATURE_ORDER
) -> float:
    """Scaled optimism for mu(x) = exp(-a (x-b)^2) via quadrature moments."""
    if sigma2 <= 0:
        raise ZeroNoiseVariance("scaled optimism undefined for sigma2 <= 0")
    m = moments_1d(GaussianBumpSignal(a=a, b=b), order=order)
    return scaled_optimism_from_moments(m.m1, m.m2, m.m3, sigma2)


def gaussian_bump_tabulated_moments(a: float, b: float) -> tuple[float, float, float]:
    """Previously tabulated closed forms for the bump-signal moments,
    returned as (m1, m2, m3) for side-by-side comparison only.

    The quadrature path is authoritative: these expressions do not recover
    the exact constant-signal moments in the a -> 0 limit (m2 tends to
    1/(2 sqrt(2)) instead of 1), so they are never asserted against.
    """
    m1 = a * b * np.exp(-a * b * b / (a + 1.0)) / (np.sqrt(2.0) * (1.0 + a) ** 1.5)
    m2 = (
        (1.0 + 2.0 * a + 8.0 * a * a * b * b)
        * np.exp(-2.0 * a * b * b / (2.0 * a + 1.0))
        / (2.0 * np.sqrt(2.0) * (1.0 + 2.0 * a) ** 2.5)
    )
    m3 = (
        a * b * (3.0 + 3.0 * a + 2.0 * a * a * b * b)
        * np.exp(-a * b * b / (a + 1.0))
        / (2.0 * np.sqrt(2.0) * (1.0 + a) ** 3.5)
    )
    return float(m1), float(m2), float(m3)


# ---------------------------------------------------------------------------
# Finite-sample optimism decomposition for a fixed design


@dataclass(frozen=True)
class OptimismDecomposition:
    signal_part: float
    noise_part: float
    total: float
    eval_stderr: float


def optimism_decomposition(
    X: np.ndarray,
    signal: SignalSpec,
    sigma2: float,
    design: DesignSpec,
    budget: int = DEFAULT_BUDGET,
    rng: SeedStream | int | None = None,
    x_star: str = "design",
) -> OptimismDecomposition:
    """Signal/noise split of the optimism of least squares on a fixed X.

    With H = X (X'X)^-1 X' and h* the smoother row at a fresh input x*:

        signal part: E||mu(x*) - h*' mu(X)||^2 - (1/n)||mu(X) - H mu(X)||^2
        noise part:  sigma2 * (E||h*||^2 - tr(H'H)/n + 2 tr(H)/n)

    ``x_star="design"`` draws x* from the design law (Monte Carlo over
    ``budget`` points); ``x_star="rows"`` averages exactly over the rows of
    X, in which case the signal part cancels and the noise part collapses to
    2 sigma2 tr(H) / n.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    gram = X.T @ X
    try:
        coef_map = solve_spd(gram, X.T)  # d x n, rows of (X'X)^-1 X'
    except NotPositiveDefinite as exc:
        raise RankDeficientDesign("design matrix is rank deficient") from exc
    raw = X[:, : design.dimension]
    mu_X = np.asarray(eval_signal(signal, raw if design.dimension > 1 else raw[:, 0]), dtype=float)
    proj_coef = coef_map @ mu_X  # (X'X)^-1 X' mu(X)
    fitted = X @ proj_coef
    in_sample = float(np.mean((mu_X - fitted) ** 2))

    H = X @ coef_map  # n x n
    tr_h = float(np.trace(H))
    tr_hth = float(np.sum(H * H))

    if x_star == "rows":
        e_misfit = in_sample
        e_hnorm = tr_hth / n
        stderr = 0.0
    elif x_star == "design":
        gen = as_stream(rng if rng is not None else 0).child(_EVAL_CHILD).generator()
        Xs = sample_design(design, budget, gen)
        raw_s = Xs[:, : design.dimension]
        mu_s = np.asarray(eval_signal(signal, raw_s if design.dimension > 1 else raw_s[:, 0]))
        pred_s = Xs @ proj_coef
        misfit_terms = (mu_s - pred_s) ** 2
        # ||h*||^2 = x*' (X'X)^-1 X' X (X'X)^-1 x* = x*' (X'X)^-1 x*
        hnorm_terms = np.einsum("ij,jk,ik->i", Xs, solve_spd(gram, np.eye(d)), Xs)
        e_misfit = float(np.mean(misfit_terms))
        e_hnorm = float(np.mean(hnorm_terms))
        stderr = float(
            np.sqrt(
                np.var(misfit_terms, ddof=1) / budget
                + sigma2 ** 2 * np.var(hnorm_terms, ddof=1) / budget
            )
        )
    else:
        raise ValueError(f"unknown x_star mode {x_star!r}")

    signal_part = e_misfit - in_sample
    noise_part = sigma2 * (e_hnorm - tr_hth / n + 2.0 * tr_h / n)
    return OptimismDecomposition(
        signal_part=signal_part,
        noise_part=noise_part,
        total=signal_part + noise_part,
        eval_stderr=stderr,
    )
