"""Exception types raised across the pipeline."""


class PipelineError(Exception):
    """Base class for all library errors."""


class InvalidBandError(PipelineError):
    """Filter band lies outside (0, fs/2)."""


class DesignFailureError(PipelineError):
    """Filter design produced unstable coefficients."""


class InsufficientSamplesError(PipelineError):
    """Input too short for the requested operation."""


class InvalidNfftError(PipelineError):
    """nfft smaller than the signal or not a power of two."""


class RegionTooSmallError(PipelineError):
    """Bounding box too small for the requested superpixel count."""


class DegenerateRegionError(PipelineError):
    """Superpixel region has an empty pixel mask."""


class DegenerateTraceError(PipelineError):
    """RGB traces unusable (zero mean or zero variance everywhere)."""


class DegenerateSubspaceError(PipelineError):
    """Color-covariance eigenvalues too small for subspace rotation."""


class NoDominantFrequencyError(PipelineError):
    """No spectral power inside the physiological band."""


class InvalidFundamentalError(PipelineError):
    """Fundamental frequency outside the physiological range."""


class EmptySweepError(PipelineError):
    """Parameter sweep received no usable segments."""


class NoRegionError(PipelineError):
    """Region selection received no scored regions."""


class InsufficientPeaksError(PipelineError):
    """Too few peaks detected to compute the requested quantity."""


class NoIntervalsError(PipelineError):
    """Fewer than two reference R-peaks: no R-R intervals to match."""


class UnsupportedSampleSizeError(PipelineError):
    """Sample size outside the supported range of a statistical test."""


class DegenerateSampleError(PipelineError):
    """Statistical test input has zero variance."""


class PairingError(PipelineError):
    """Paired comparison received mismatched or too-short inputs."""


class ConfigError(PipelineError):
    """Run configuration is inconsistent or incomplete."""


class EmptyReportError(PipelineError):
    """Pipeline produced no usable segments."""
