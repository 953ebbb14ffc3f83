//! Shared domain types: audio buffers, time intervals, word tokens and
//! speaker segments, plus the small time/frame algebra everything else
//! builds on. All types are immutable values and safe to share across
//! worker threads.

use crate::error::{Error, Result};

/// Epsilon used when mapping continuous times onto discrete frame or sample
/// grids, so that values like `1.0 / 0.01` land on the intended index.
const GRID_EPS: f64 = 1e-9;

/// Mono sample buffer with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioSignal {
    /// Rejects non-finite samples and a zero sample rate.
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(pos) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite sample at index {pos}"
            )));
        }
        Ok(AudioSignal {
            samples,
            sample_rate,
        })
    }

    pub fn silence(num_samples: usize, sample_rate: u32) -> Result<Self> {
        AudioSignal::new(vec![0.0; num_samples], sample_rate)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Sample index for a time, clamped into `0..=len`.
    pub fn sample_index(&self, t: f64) -> usize {
        let idx = (t * self.sample_rate as f64 + GRID_EPS).floor();
        (idx.max(0.0) as usize).min(self.samples.len())
    }

    /// Samples covering `interval`, clipped to the signal bounds.
    pub fn slice(&self, interval: TimeInterval) -> &[f32] {
        let a = self.sample_index(interval.start());
        let b = self.sample_index(interval.end());
        &self.samples[a..b.max(a)]
    }
}

/// Half-open time span in seconds with `0 <= start <= end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeInterval {
    start: f64,
    end: f64,
}

impl TimeInterval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() {
            return Err(Error::invalid("interval bounds must be finite"));
        }
        if start < 0.0 || end < start {
            return Err(Error::invalid(format!(
                "ill-formed interval [{start}, {end}]"
            )));
        }
        Ok(TimeInterval { start, end })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }

    /// Overlap duration with `other`; zero when disjoint. Symmetric.
    pub fn overlap(&self, other: &TimeInterval) -> f64 {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }
}

/// Overlap duration of two well-formed intervals.
pub fn interval_overlap(a: TimeInterval, b: TimeInterval) -> f64 {
    a.overlap(&b)
}

/// Frame index of time `t` on a grid with the given hop: `floor(t / hop)`.
pub fn seconds_to_frames(t: f64, hop: f64) -> Result<usize> {
    if !(hop > 0.0) {
        return Err(Error::invalid("frame hop must be positive"));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid("time must be non-negative"));
    }
    Ok((t / hop + GRID_EPS).floor() as usize)
}

/// Recognized word with absolute start/end times.
#[derive(Debug, Clone, PartialEq)]
pub struct WordToken {
    pub text: String,
    pub interval: TimeInterval,
    pub sentence_final: bool,
}

impl WordToken {
    pub fn new(text: impl Into<String>, interval: TimeInterval, sentence_final: bool) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::invalid("word text must be non-empty"));
        }
        Ok(WordToken {
            text,
            interval,
            sentence_final,
        })
    }
}

/// One speaker's contiguous reference turn: ordered words plus the covering
/// interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub speaker: String,
    pub words: Vec<WordToken>,
    pub interval: TimeInterval,
}

impl Utterance {
    /// Builds an utterance from its words; the interval is their exact cover.
    pub fn new(speaker: impl Into<String>, words: Vec<WordToken>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::invalid("utterance must contain at least one word"));
        }
        for pair in words.windows(2) {
            if pair[1].interval.start() < pair[0].interval.start() {
                return Err(Error::invalid("utterance words must be sorted by start time"));
            }
        }
        let start = words
            .iter()
            .map(|w| w.interval.start())
            .fold(f64::INFINITY, f64::min);
        let end = words
            .iter()
            .map(|w| w.interval.end())
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Utterance {
            speaker: speaker.into(),
            words,
            interval: TimeInterval::new(start, end)?,
        })
    }

    /// Space-joined word texts.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for (i, w) in self.words.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&w.text);
        }
        out
    }
}

/// Boolean per-frame activity track.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityMask {
    frame_hop: f64,
    frames: Vec<bool>,
}

impl ActivityMask {
    pub fn new(frame_hop: f64, frames: Vec<bool>) -> Result<Self> {
        if !(frame_hop > 0.0) || !frame_hop.is_finite() {
            return Err(Error::invalid("frame hop must be positive"));
        }
        Ok(ActivityMask { frame_hop, frames })
    }

    pub fn frame_hop(&self) -> f64 {
        self.frame_hop
    }

    pub fn frames(&self) -> &[bool] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Maximal active runs as inclusive frame index ranges.
    pub fn active_runs(&self) -> Vec<(usize, usize)> {
        let mut runs = Vec::new();
        let mut start = None;
        for (i, &on) in self.frames.iter().enumerate() {
            match (on, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    runs.push((s, i - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push((s, self.frames.len() - 1));
        }
        runs
    }

    /// Time interval covered by frames `a..=b`.
    pub fn run_interval(&self, run: (usize, usize)) -> Result<TimeInterval> {
        TimeInterval::new(
            run.0 as f64 * self.frame_hop,
            (run.1 + 1) as f64 * self.frame_hop,
        )
    }

    /// Mask with `num_frames` frames where a frame is active iff its span
    /// overlaps one of the intervals.
    pub fn from_intervals(
        intervals: &[TimeInterval],
        frame_hop: f64,
        num_frames: usize,
    ) -> Result<Self> {
        let mut frames = vec![false; num_frames];
        for iv in intervals {
            if iv.duration() <= 0.0 {
                continue;
            }
            let first = seconds_to_frames(iv.start(), frame_hop)?;
            // Last frame whose span still intersects the interval.
            let last = seconds_to_frames(iv.end(), frame_hop)?;
            let last = if last as f64 * frame_hop + GRID_EPS >= iv.end() && last > 0 {
                last - 1
            } else {
                last
            };
            for f in frames.iter_mut().take(num_frames.min(last + 1)).skip(first) {
                *f = true;
            }
        }
        ActivityMask::new(frame_hop, frames)
    }
}

/// Time span on one separated stream, optionally labeled with a speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerSegment {
    pub channel: usize,
    pub interval: TimeInterval,
    pub speaker: Option<String>,
}

impl SpeakerSegment {
    pub fn new(channel: usize, interval: TimeInterval, speaker: Option<String>) -> Result<Self> {
        if channel > 1 {
            return Err(Error::invalid(format!(
                "stream channel must be 0 or 1, got {channel}"
            )));
        }
        Ok(SpeakerSegment {
            channel,
            interval,
            speaker,
        })
    }
}
