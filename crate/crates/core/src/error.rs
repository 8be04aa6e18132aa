use alloc::string::String;
use core::fmt;

/// Errors surfaced by the tracking primitives.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Vector or matrix dimensions do not agree.
    DimensionMismatch { expected: usize, got: usize },
    /// An operation that needs history was given an empty one.
    EmptyHistory,
    /// A sequence operation was given an empty sequence.
    EmptySequence,
    /// State advance requested on a quitted tracklet.
    TerminalState,
    /// Tracklet nodes are not strictly increasing in frame.
    NonMonotonicFrames,
    /// No embedding stored for a detection that survived suppression.
    MissingEmbedding { frame: u32, det_index: u32 },
    /// Duplicate embedding key.
    DuplicateEmbedding { frame: u32, det_index: u32 },
    /// Reliability labelling needs ground-truth identities on every node.
    MissingIdentity { frame: u32 },
    /// Class index out of range for the classifier head.
    ClassOutOfRange { class: usize, classes: usize },
    /// Smoothing windows must be odd.
    EvenWindow(usize),
    /// Weight file problem, tagged with the offending section.
    WeightFormat { section: String, message: String },
    /// Two boxes with the same identity in one frame.
    DuplicateId { frame: u32, id: i64 },
    /// Scene specification cannot be realised.
    InfeasibleScene(String),
    /// Training requested on an empty dataset.
    EmptyDataset,
    /// Catch-all for invalid arguments, with context.
    Invalid(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::EmptyHistory => write!(f, "motion history is empty"),
            Error::EmptySequence => write!(f, "sequence is empty"),
            Error::TerminalState => write!(f, "tracklet is quitted; no further transitions"),
            Error::NonMonotonicFrames => {
                write!(f, "tracklet frames must be strictly increasing")
            }
            Error::MissingEmbedding { frame, det_index } => {
                write!(f, "no embedding for frame {frame}, detection {det_index}")
            }
            Error::DuplicateEmbedding { frame, det_index } => {
                write!(f, "duplicate embedding for frame {frame}, detection {det_index}")
            }
            Error::MissingIdentity { frame } => {
                write!(f, "node at frame {frame} carries no ground-truth identity")
            }
            Error::ClassOutOfRange { class, classes } => {
                write!(f, "class {class} out of range for {classes} classes")
            }
            Error::EvenWindow(w) => write!(f, "smoothing window must be odd, got {w}"),
            Error::WeightFormat { section, message } => {
                write!(f, "weight file, section {section}: {message}")
            }
            Error::DuplicateId { frame, id } => {
                write!(f, "duplicate identity {id} in frame {frame}")
            }
            Error::InfeasibleScene(msg) => write!(f, "infeasible scene: {msg}"),
            Error::EmptyDataset => write!(f, "training dataset is empty"),
            Error::Invalid(msg) => write!(f, "{msg}"),
        }
    }
}

impl core::error::Error for Error {}
