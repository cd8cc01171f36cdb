"""Exception types shared across the package."""


class RxoptError(Exception):
    """Base class for all rxopt errors."""


class NotPositiveDefinite(RxoptError):
    """Cholesky factorization hit a non-positive (or negligible) pivot."""


class NonFiniteIntegrand(RxoptError):
    """Quadrature integrand evaluated to NaN/inf at a node."""


class DimensionMismatch(RxoptError):
    """Array shapes are inconsistent with each other or with a model."""


class EmptyDataset(RxoptError):
    """A dataset with zero rows was supplied where data is required."""


class RankExceedsDimension(RxoptError):
    """Requested truncation rank is outside [1, d]."""


class SingularGram(RxoptError):
    """Unregularized kernel system is singular beyond jitter repair."""


class DivergedLoss(RxoptError):
    """Iterative training produced a non-finite loss (learning rate too large)."""


class ZeroNoiseVariance(RxoptError):
    """Scaled optimism is undefined when the noise variance is zero."""


class UnsupportedCombination(RxoptError):
    """Requested evaluation method does not apply to this signal/design."""


class FeatureDimensionOverflow(RxoptError):
    """Feature-space dimension makes the q x q moment work exceed the budget."""


class RankDeficientDesign(RxoptError):
    """Design matrix does not have full column rank."""


class TestPartitionEmpty(RxoptError):
    """Hold-out split produced an empty test partition."""

    __test__ = False  # not a pytest class despite the name


class FoldTooSmall(RxoptError):
    """A cross-validation training fold has fewer rows than the model needs."""


class MixedModes(RxoptError):
    """Result rows from different experiment modes cannot be summarized together."""


class ConfigError(RxoptError):
    """Experiment configuration is malformed or incomplete."""


class IoFailure(RxoptError):
    """Reading or writing a results/data file failed."""


class MissingColumn(IoFailure):
    """Named column is absent from the CSV header."""


class NonNumericCell(IoFailure):
    """A CSV cell failed to parse as a number; carries (row, column)."""

    def __init__(self, row: int, column: str, value: str):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"non-numeric value {value!r} at row {row}, column {column!r}")


class EmptyFile(IoFailure):
    """CSV file contains no data rows."""
