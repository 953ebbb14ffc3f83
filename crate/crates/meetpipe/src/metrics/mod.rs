//! Exact transcription and diarization metrics.
//!
//! `levenshtein` is the shared word-alignment primitive. `orc_wer` assigns
//! reference utterances to hypothesis streams so the total word error is
//! minimal, `cp_wer` scores per-speaker concatenations under the optimal
//! one-to-one speaker mapping, and `der` scores speaker time with zero collar
//! and overlap regions included. `hungarian` solves the assignment problems
//! the latter two build on.

mod cpwer;
mod der;
mod hungarian;
mod levenshtein;
mod orc;

pub use cpwer::{cp_wer, CpWerResult};
pub use der::{der, DerStats};
pub use hungarian::hungarian;
pub use levenshtein::levenshtein;
pub use orc::{orc_wer, OrcConfig, OrcResult, RefUtterance};

use serde::{Deserialize, Serialize};

/// Word error counts and the derived rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerStats {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub reference_length: usize,
    pub wer: f64,
}

impl WerStats {
    /// With an empty reference the rate degenerates to the insertion count.
    pub fn from_counts(
        substitutions: usize,
        insertions: usize,
        deletions: usize,
        reference_length: usize,
    ) -> Self {
        let errors = substitutions + insertions + deletions;
        WerStats {
            substitutions,
            insertions,
            deletions,
            reference_length,
            wer: errors as f64 / reference_length.max(1) as f64,
        }
    }

    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    pub fn zero() -> Self {
        WerStats::from_counts(0, 0, 0, 0)
    }

    /// Pooled stats: error and reference counts summed across meetings.
    pub fn pooled<'a>(parts: impl IntoIterator<Item = &'a WerStats>) -> Self {
        let (mut s, mut i, mut d, mut n) = (0, 0, 0, 0);
        for p in parts {
            s += p.substitutions;
            i += p.insertions;
            d += p.deletions;
            n += p.reference_length;
        }
        WerStats::from_counts(s, i, d, n)
    }
}

/// Scoring-side text normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextNorm {
    pub lowercase: bool,
    pub strip_punctuation: bool,
}

impl Default for TextNorm {
    fn default() -> Self {
        TextNorm {
            lowercase: true,
            strip_punctuation: true,
        }
    }
}

/// Splits `text` into scoring tokens: lowercased, punctuation stripped
/// (apostrophes kept), whitespace collapsed.
pub fn normalize_tokens(text: &str, norm: &TextNorm) -> Vec<String> {
    let mut cleaned = String::with_capacity(text.len());
    for c in text.chars() {
        let keep = if norm.strip_punctuation {
            c.is_alphanumeric() || c == '\'' || c.is_whitespace()
        } else {
            true
        };
        if keep {
            if norm.lowercase {
                cleaned.extend(c.to_lowercase());
            } else {
                cleaned.push(c);
            }
        } else {
            cleaned.push(' ');
        }
    }
    cleaned.split_whitespace().map(str::to_owned).collect()
}
