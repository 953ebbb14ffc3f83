//! Line-oriented segment JSON: one object per line describing a labeled (or
//! unlabeled) span of speech with its words and word timings. The same
//! format carries simulation ground truth, ASR transcripts and diarized
//! hypotheses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{TimeInterval, Utterance, WordToken};

/// `[start, end, sentence_final]` triple for one word.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WordTiming(pub f64, pub f64, pub bool);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub session_id: String,
    pub speaker: Option<String>,
    pub channel: Option<usize>,
    pub start_time: f64,
    pub end_time: f64,
    /// Space-joined word texts, aligned with `word_timings`.
    pub words: String,
    pub word_timings: Vec<WordTiming>,
}

impl SegmentRecord {
    pub fn validate(&self) -> Result<()> {
        if !self.start_time.is_finite() || !self.end_time.is_finite() {
            return Err(Error::invalid("segment times must be finite"));
        }
        if self.start_time < 0.0 || self.end_time < self.start_time {
            return Err(Error::invalid(format!(
                "ill-formed segment span [{}, {}]",
                self.start_time, self.end_time
            )));
        }
        if let Some(ch) = self.channel {
            if ch > 1 {
                return Err(Error::invalid(format!("channel must be 0 or 1, got {ch}")));
            }
        }
        let n_words = self.words.split_whitespace().count();
        if n_words != self.word_timings.len() {
            return Err(Error::invalid(format!(
                "{n_words} words but {} timings",
                self.word_timings.len()
            )));
        }
        for t in &self.word_timings {
            if !t.0.is_finite() || !t.1.is_finite() || t.0 < 0.0 || t.1 < t.0 {
                return Err(Error::invalid(format!(
                    "ill-formed word timing [{}, {}]",
                    t.0, t.1
                )));
            }
        }
        Ok(())
    }

    pub fn interval(&self) -> Result<TimeInterval> {
        TimeInterval::new(self.start_time, self.end_time)
    }

    /// Word tokens reconstructed from the text / timing pair.
    pub fn word_tokens(&self) -> Result<Vec<WordToken>> {
        self.words
            .split_whitespace()
            .zip(&self.word_timings)
            .map(|(text, t)| WordToken::new(text, TimeInterval::new(t.0, t.1)?, t.2))
            .collect()
    }

    pub fn from_utterance(session_id: &str, utterance: &Utterance) -> Self {
        SegmentRecord {
            session_id: session_id.to_string(),
            speaker: Some(utterance.speaker.clone()),
            channel: None,
            start_time: utterance.interval.start(),
            end_time: utterance.interval.end(),
            words: utterance.text(),
            word_timings: utterance
                .words
                .iter()
                .map(|w| WordTiming(w.interval.start(), w.interval.end(), w.sentence_final))
                .collect(),
        }
    }

    pub fn to_utterance(&self) -> Result<Utterance> {
        let speaker = self
            .speaker
            .as_ref()
            .ok_or_else(|| Error::invalid("record without speaker cannot become an utterance"))?;
        Utterance::new(speaker.clone(), self.word_tokens()?)
    }

    pub fn from_words(
        session_id: &str,
        speaker: Option<String>,
        channel: Option<usize>,
        interval: TimeInterval,
        words: &[WordToken],
    ) -> Self {
        let text = words
            .iter()
            .map(|w| w.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        SegmentRecord {
            session_id: session_id.to_string(),
            speaker,
            channel,
            start_time: interval.start(),
            end_time: interval.end(),
            words: text,
            word_timings: words
                .iter()
                .map(|w| WordTiming(w.interval.start(), w.interval.end(), w.sentence_final))
                .collect(),
        }
    }
}

/// Parses one record per non-empty line, validating every record.
pub fn parse_lines(text: &str) -> Result<Vec<SegmentRecord>> {
    let mut records = Vec::new();
    for (number, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let record: SegmentRecord = serde_json::from_str(line)
            .map_err(|e| Error::parse(format!("line {}", number + 1), e.to_string()))?;
        record
            .validate()
            .map_err(|e| Error::parse(format!("line {}", number + 1), e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_lines(records: &[SegmentRecord]) -> Result<String> {
    let mut out = String::new();
    for record in records {
        record.validate()?;
        out.push_str(
            &serde_json::to_string(record)
                .map_err(|e| Error::parse("segment json", e.to_string()))?,
        );
        out.push('\n');
    }
    Ok(out)
}

pub fn read_file(path: &std::path::Path) -> Result<Vec<SegmentRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lines(&text).map_err(|e| match e {
        Error::Parse { context, message } => Error::Parse {
            context: format!("{}: {context}", path.display()),
            message,
        },
        other => other,
    })
}

pub fn write_file(path: &std::path::Path, records: &[SegmentRecord]) -> Result<()> {
    std::fs::write(path, write_lines(records)?).map_err(|e| Error::io(path, e))
}
