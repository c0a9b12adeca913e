//! Crate-wide error type.

use std::fmt;
use std::io;

/// Coarse error category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Data violates a format bound (density, mask arity, shape).
    Data,
    /// Filesystem / stream failure.
    Io,
    /// Invalid architecture or coefficient configuration.
    Config,
    /// Invalid network / workload description.
    Workload,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Data => 1,
            ErrorCategory::Io => 2,
            ErrorCategory::Config => 3,
            ErrorCategory::Workload => 4,
        }
    }
}

#[derive(Debug)]
pub enum Error {
    /// Block holds more nonzeros than the DBB bound allows (lossless path).
    DensityExceeded {
        nonzeros: usize,
        bound: u8,
        /// Offending block index when raised while blocking a whole tensor.
        block: Option<usize>,
    },
    /// Input slice length does not match the configured block size.
    LengthMismatch {
        expected: usize,
        got: usize,
    },
    /// Stored value count disagrees with the mask population count.
    MaskArityMismatch {
        mask_popcount: u32,
        values: usize,
    },
    InvalidConfig(String),
    InvalidNnz {
        nnz: u8,
        block_size: u8,
    },
    /// Requested NNZ exceeds the cascaded maxpool stage cap in
    /// hardware-strict mode (dense passthrough is always legal).
    StageCapExceeded {
        nnz: u8,
        max_stages: u8,
    },
    WrongBlockShape(String),
    ShapeMismatch(String),
    CorruptHeader(String),
    TruncatedStream {
        needed: usize,
        available: usize,
    },
    ChecksumMismatch {
        stored: u32,
        computed: u32,
    },
    EmptySample,
    NegativeCoefficient(String),
    UnknownBaseline(String),
    UnknownNetwork(String),
    UnsupportedLayer(String),
    Io(io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            DensityExceeded { .. }
            | LengthMismatch { .. }
            | MaskArityMismatch { .. }
            | InvalidNnz { .. }
            | StageCapExceeded { .. }
            | WrongBlockShape(_)
            | ShapeMismatch(_)
            | CorruptHeader(_)
            | TruncatedStream { .. }
            | ChecksumMismatch { .. }
            | EmptySample => ErrorCategory::Data,
            Io(_) => ErrorCategory::Io,
            InvalidConfig(_) | NegativeCoefficient(_) | UnknownBaseline(_) => ErrorCategory::Config,
            UnknownNetwork(_) | UnsupportedLayer(_) => ErrorCategory::Workload,
        }
    }

    /// Short machine-parsable code, printed on stderr by the CLI.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            DensityExceeded { .. } => "density-exceeded",
            LengthMismatch { .. } => "length-mismatch",
            MaskArityMismatch { .. } => "mask-arity-mismatch",
            InvalidConfig(_) => "invalid-config",
            InvalidNnz { .. } => "invalid-nnz",
            StageCapExceeded { .. } => "stage-cap-exceeded",
            WrongBlockShape(_) => "wrong-block-shape",
            ShapeMismatch(_) => "shape-mismatch",
            CorruptHeader(_) => "corrupt-header",
            TruncatedStream { .. } => "truncated-stream",
            ChecksumMismatch { .. } => "checksum-mismatch",
            EmptySample => "empty-sample",
            NegativeCoefficient(_) => "negative-coefficient",
            UnknownBaseline(_) => "unknown-baseline",
            UnknownNetwork(_) => "unknown-network",
            UnsupportedLayer(_) => "unsupported-layer",
            Io(_) => "io",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Error::*;
        match self {
            DensityExceeded {
                nonzeros,
                bound,
                block: Some(b),
            } => write!(
                f,
                "block {b}: {nonzeros} nonzeros exceed the DBB bound of {bound}"
            ),
            DensityExceeded {
                nonzeros,
                bound,
                block: None,
            } => {
                write!(f, "{nonzeros} nonzeros exceed the DBB bound of {bound}")
            }
            LengthMismatch { expected, got } => {
                write!(f, "expected {expected} elements, got {got}")
            }
            MaskArityMismatch {
                mask_popcount,
                values,
            } => write!(
                f,
                "mask selects {mask_popcount} positions but block stores {values} values"
            ),
            InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            InvalidNnz { nnz, block_size } => {
                write!(f, "nnz {nnz} outside 1..={block_size}")
            }
            StageCapExceeded { nnz, max_stages } => write!(
                f,
                "nnz {nnz} exceeds the {max_stages}-stage maxpool cascade \
                 (dense passthrough requires nnz == block size)"
            ),
            WrongBlockShape(msg) => write!(f, "wrong block shape: {msg}"),
            ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            CorruptHeader(msg) => write!(f, "corrupt header: {msg}"),
            TruncatedStream { needed, available } => {
                write!(
                    f,
                    "truncated stream: needed {needed} bytes, had {available}"
                )
            }
            ChecksumMismatch { stored, computed } => write!(
                f,
                "payload checksum mismatch: stored {stored:#010x}, computed {computed:#010x}"
            ),
            EmptySample => write!(f, "empty sample"),
            NegativeCoefficient(name) => {
                write!(f, "energy coefficient '{name}' must be non-negative")
            }
            UnknownBaseline(label) => write!(f, "unknown baseline label '{label}'"),
            UnknownNetwork(name) => write!(f, "unknown builtin network '{name}'"),
            UnsupportedLayer(msg) => write!(f, "unsupported layer: {msg}"),
            Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}
