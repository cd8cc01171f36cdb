"""rxopt: expected optimism of random-design regression models.

Optimism is the expected test error minus the expected training error when
both sets are drawn fresh from the same input law.  The package estimates
it three ways and cross-checks them: Monte-Carlo simulation on synthetic
signals, closed-form / asymptotic evaluation, and resampling (hold-out,
k-fold) on real datasets.
"""

from .errors import (
    ConfigError,
    DimensionMismatch,
    DivergedLoss,
    EmptyDataset,
    EmptyFile,
    FeatureDimensionOverflow,
    FoldTooSmall,
    IoFailure,
    MissingColumn,
    MixedModes,
    NonFiniteIntegrand,
    NonNumericCell,
    NotPositiveDefinite,
    RankDeficientDesign,
    RankExceedsDimension,
    RxoptError,
    SingularGram,
    TestPartitionEmpty,
    UnsupportedCombination,
    ZeroNoiseVariance,
)
from .numcore import (
    QuadratureRule,
    SeedStream,
    derive_stream,
    gauss_hermite_rule,
    gaussian_moment,
    gh_expect,
    pinv,
    solve_spd,
    svd,
)
from .signals import (
    Dataset,
    DesignSpec,
    GaussianBumpSignal,
    LinearSignal,
    PiecewiseLinearSignal,
    PolynomialSignal,
    SignalMoments,
    SignalSpec,
    eval_signal,
    moments_1d,
    sample_dataset,
    signal_mean,
)
from .models import (
    BendedRegressor,
    KernelRidgeRegressor,
    LeastSquaresRegressor,
    LinearKernel,
    LowRankRegressor,
    NtkKernel,
    RidgeRegressor,
    ntk_kernel_eval,
)
from .nets import MlpRegressor, NtkLayerwiseRegressor
from .theory import (
    OptimismDecomposition,
    PopulationMoments,
    SignalPart,
    TheoryValue,
    gaussian_bump_tabulated_moments,
    kernel_optimism_asymptotic,
    low_rank_optimism_bound,
    misfit_signal_part,
    ols_optimism_asymptotic,
    optimism_decomposition,
    population_moments,
    poly_series_quadratic_form,
    ridge_optimism_asymptotic,
    scaled_optimism_cubic,
    scaled_optimism_from_moments,
    scaled_optimism_gaussian_bump,
    scaled_optimism_piecewise,
    scaled_optimism_poly_series,
)
from .estimators import (
    HoldOut,
    KFold,
    ModelSpec,
    OptimismEstimate,
    holdout_optimism,
    kfold_optimism,
    mc_optimism,
    mse,
    scale_optimism,
)
from .dataio import load_dataset_csv
from .gridrun import (
    ExperimentConfig,
    ResultRow,
    emit_csv,
    load_config,
    parse_results_csv,
    report_summary,
    run_grid,
)

__version__ = "0.1.0"
