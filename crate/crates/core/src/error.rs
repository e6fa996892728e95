use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the watermarking pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two rasters that must share dimensions do not.
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// A rectangle reaches outside its host image.
    RectOutOfBounds,
    /// A parameter violates its documented precondition.
    InvalidParam(String),
    /// A pixel value is NaN or infinite where finite data is required.
    NonFinite,
    /// Otsu thresholding on a single-valued histogram.
    NoSeparatingThreshold,
    /// An operation needs more input points than it was given.
    TooFewPoints { needed: usize, got: usize },
    /// The best-fit conic is not an ellipse (or is degenerate).
    NotAnEllipse,
    /// Corner detection found nothing to work with.
    NoCorners,
    /// The image is smaller than the suppression neighborhood.
    ImageTooSmall,
    /// No intensity-minimum candidate falls inside the search space.
    NoCandidateInSearchSpace,
    /// The search space cannot host the NROI square.
    SearchSpaceTooNarrow,
    /// Subband dimensions within a set disagree.
    InconsistentSubbands,
    /// The session key is empty.
    EmptyKey,
    /// The payload holds more bits than the subband can carry.
    CapacityExceeded { bits: usize, capacity: usize },
    /// The host subband carries no signal variance to correlate against.
    ConstantSubband,
    /// Pearson correlation of a zero-variance sequence.
    ConstantSequence,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DimensionMismatch { expected, got } => write!(
                f,
                "dimension mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Self::RectOutOfBounds => write!(f, "rectangle out of image bounds"),
            Self::InvalidParam(msg) => write!(f, "invalid parameter: {msg}"),
            Self::NonFinite => write!(f, "non-finite pixel value"),
            Self::NoSeparatingThreshold => write!(f, "no separating threshold"),
            Self::TooFewPoints { needed, got } => {
                write!(f, "too few points: need {needed}, got {got}")
            }
            Self::NotAnEllipse => write!(f, "fitted conic is not an ellipse"),
            Self::NoCorners => write!(f, "no corners detected"),
            Self::ImageTooSmall => write!(f, "image too small for corner detection"),
            Self::NoCandidateInSearchSpace => {
                write!(f, "no intensity candidate inside the search space")
            }
            Self::SearchSpaceTooNarrow => write!(f, "search space narrower than the NROI square"),
            Self::InconsistentSubbands => write!(f, "subband dimensions disagree"),
            Self::EmptyKey => write!(f, "session key is empty"),
            Self::CapacityExceeded { bits, capacity } => {
                write!(f, "payload of {bits} bits exceeds capacity of {capacity}")
            }
            Self::ConstantSubband => write!(f, "zero-variance HH subband"),
            Self::ConstantSequence => write!(f, "zero-variance sequence in correlation"),
        }
    }
}

impl std::error::Error for Error {}

impl Error {
    /// True for failures of the anatomy-localization pipeline, as opposed
    /// to bad arguments or capacity problems. The CLI maps these to their
    /// own exit code.
    pub fn is_localization_failure(&self) -> bool {
        matches!(
            self,
            Self::NoCorners
                | Self::ImageTooSmall
                | Self::TooFewPoints { .. }
                | Self::NotAnEllipse
                | Self::NoSeparatingThreshold
                | Self::NoCandidateInSearchSpace
                | Self::SearchSpaceTooNarrow
        )
    }
}
