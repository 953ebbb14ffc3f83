//! On-disk formats: float WAV audio, line-oriented segment JSON, RTTM, and
//! the flat key-value config dialect. All readers validate their input and
//! are safe on untrusted bytes (the fuzz targets exercise each entry point).

pub mod config;
pub mod rttm;
pub mod segment_json;
pub mod wav;

pub use config::ConfigMap;
pub use rttm::RttmLine;
pub use segment_json::{SegmentRecord, WordTiming};
