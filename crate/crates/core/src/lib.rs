//! Tracking-by-detection primitives: tracklet generation by bipartite
//! assignment over fused appearance and motion costs, cleaving of
//! identity-impure tracklets with a bidirectional GRU encoder, and
//! re-connection of same-identity tracklets under temporal-spatial gating.
//!
//! The crate is `no_std`-compatible (with `alloc`); all file and process
//! concerns live in the companion `seamtrack` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod assign;
pub mod bbox;
pub mod cleave;
pub mod detect;
pub mod embed;
mod error;
pub mod generation;
pub mod learn;
pub(crate) mod math;
pub mod metrics;
pub mod motion;
pub mod reconnect;
pub mod seqnet;
pub mod synth;
pub mod track;

pub use bbox::{iou, BBox};
pub use detect::{nms, Detection};
pub use embed::{Embedding, EmbeddingProvider, EmbeddingTable};
pub use error::Error;
pub use track::{IdGen, NodeState, QuitReason, TrackNode, Tracklet, Trajectory};

pub type Result<T> = core::result::Result<T, Error>;
