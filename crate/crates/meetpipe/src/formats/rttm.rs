//! RTTM speaker segments: the standard 10-field line
//! `SPEAKER <session> 1 <tbeg> <tdur> <NA> <NA> <speaker> <NA> <NA>`.
//! Times are written with full float precision so files round-trip exactly.

use crate::error::{Error, Result};
use crate::types::{SpeakerSegment, TimeInterval};

#[derive(Debug, Clone, PartialEq)]
pub struct RttmLine {
    pub session: String,
    pub onset: f64,
    pub duration: f64,
    pub speaker: String,
}

impl RttmLine {
    pub fn interval(&self) -> Result<TimeInterval> {
        TimeInterval::new(self.onset, self.onset + self.duration)
    }
}

/// Parses RTTM text; non-SPEAKER lines and comments are skipped.
pub fn parse(text: &str) -> Result<Vec<RttmLine>> {
    let mut lines = Vec::new();
    for (number, raw) in text.lines().enumerate() {
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with(';') {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields[0] != "SPEAKER" {
            continue;
        }
        let context = || format!("rttm line {}", number + 1);
        if fields.len() != 10 {
            return Err(Error::parse(
                context(),
                format!("expected 10 fields, got {}", fields.len()),
            ));
        }
        let onset: f64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(context(), format!("bad onset '{}'", fields[3])))?;
        let duration: f64 = fields[4]
            .parse()
            .map_err(|_| Error::parse(context(), format!("bad duration '{}'", fields[4])))?;
        if !onset.is_finite() || !duration.is_finite() || onset < 0.0 || duration < 0.0 {
            return Err(Error::parse(context(), "times must be non-negative"));
        }
        lines.push(RttmLine {
            session: fields[1].to_string(),
            onset,
            duration,
            speaker: fields[7].to_string(),
        });
    }
    Ok(lines)
}

pub fn write(lines: &[RttmLine]) -> String {
    let mut out = String::new();
    for line in lines {
        out.push_str(&format!(
            "SPEAKER {} 1 {} {} <NA> <NA> {} <NA> <NA>\n",
            line.session, line.onset, line.duration, line.speaker
        ));
    }
    out
}

/// Segments to RTTM lines; unlabeled segments are written as "unk".
pub fn from_segments(session: &str, segments: &[SpeakerSegment]) -> Vec<RttmLine> {
    segments
        .iter()
        .map(|seg| RttmLine {
            session: session.to_string(),
            onset: seg.interval.start(),
            duration: seg.interval.duration(),
            speaker: seg.speaker.clone().unwrap_or_else(|| "unk".to_string()),
        })
        .collect()
}

pub fn read_file(path: &std::path::Path) -> Result<Vec<RttmLine>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text)
}

pub fn write_file(path: &std::path::Path, lines: &[RttmLine]) -> Result<()> {
    std::fs::write(path, write(lines)).map_err(|e| Error::io(path, e))
}
