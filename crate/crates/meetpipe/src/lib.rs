//! Meeting transcription pipeline built around continuous speech separation.
//!
//! A long multi-talker recording is cut into short overlapping segments, each
//! segment is separated into two channels, and the channels are stitched back
//! into two overlap-free streams. Energy VAD finds speech regions on each
//! stream, an ASR adapter produces word tokens with timestamps and punctuation,
//! and the diarization stage sub-segments the VAD regions (uniformly, at
//! sentence boundaries, at embedding-detected speaker changes, or both),
//! extracts one speaker embedding per sub-segment and clusters them with
//! k-means++.
//!
//! The crate ships oracle and file-based back-ends for the separator,
//! recognizer and embedding extractor, a deterministic meeting simulator for
//! corpus-free experiments, and an exact scoring suite (ORC WER, cpWER, DER).

pub mod css;
pub mod diarize;
pub mod error;
pub mod formats;
pub mod metrics;
pub mod mixgen;
pub mod pipeline;
pub mod transcript;
pub mod types;
pub mod vad;

pub use error::{Error, Result};
pub use types::{
    ActivityMask, AudioSignal, SpeakerSegment, TimeInterval, Utterance, WordToken,
};
