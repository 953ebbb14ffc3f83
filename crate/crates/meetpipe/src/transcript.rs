//! ASR abstraction: recognizers produce word tokens with absolute timestamps
//! and sentence-final flags for each VAD segment. The oracle recognizer reads
//! ground truth (optionally degraded by seeded word-drop, timestamp-jitter and
//! punctuation-drop noise); the file recognizer adapts transcripts produced by
//! an external ASR run.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::css::{channel_packing, StreamPair};
use crate::error::{Error, Result};
use crate::mixgen::MeetingTruth;
use crate::types::{AudioSignal, SpeakerSegment, TimeInterval, WordToken};

/// Words recognized within one VAD segment, in absolute meeting time.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentTranscript {
    pub channel: usize,
    pub segment_interval: TimeInterval,
    pub words: Vec<WordToken>,
}

/// Slack allowed between a word and its segment boundary.
const SEGMENT_SLACK: f64 = 0.1;

impl SegmentTranscript {
    pub fn new(
        channel: usize,
        segment_interval: TimeInterval,
        words: Vec<WordToken>,
    ) -> Result<Self> {
        for pair in words.windows(2) {
            if pair[1].interval.start() < pair[0].interval.start() {
                return Err(Error::invalid("transcript words must be sorted by start"));
            }
        }
        for w in &words {
            if w.interval.start() < segment_interval.start() - SEGMENT_SLACK
                || w.interval.end() > segment_interval.end() + SEGMENT_SLACK
            {
                return Err(Error::invalid(format!(
                    "word '{}' [{}, {}] escapes segment [{}, {}]",
                    w.text,
                    w.interval.start(),
                    w.interval.end(),
                    segment_interval.start(),
                    segment_interval.end()
                )));
            }
        }
        Ok(SegmentTranscript {
            channel,
            segment_interval,
            words,
        })
    }
}

/// Deterministic segment transcriber.
pub trait Recognizer {
    fn transcribe(
        &self,
        stream: &AudioSignal,
        channel: usize,
        segment: TimeInterval,
    ) -> Result<SegmentTranscript>;
}

/// Sets sentence-final flags from trailing punctuation ('.', '?', '!');
/// the last word of a segment is always sentence-final.
pub fn sentence_flags_from_punct(mut words: Vec<WordToken>) -> Vec<WordToken> {
    let n = words.len();
    for (i, w) in words.iter_mut().enumerate() {
        let punct = w.text.ends_with('.') || w.text.ends_with('?') || w.text.ends_with('!');
        w.sentence_final = punct || i + 1 == n;
    }
    words
}

/// Transcribes every VAD segment. Recognizer failures are recorded per
/// segment (with an empty transcript in its place) rather than aborting.
pub struct TranscriptionOutcome {
    pub transcripts: Vec<SegmentTranscript>,
    pub failures: Vec<(usize, Error)>,
}

pub fn transcribe_segments(
    streams: &StreamPair,
    segments: &[SpeakerSegment],
    recognizer: &dyn Recognizer,
) -> Result<TranscriptionOutcome> {
    let mut transcripts = Vec::with_capacity(segments.len());
    let mut failures = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        if seg.channel >= streams.streams.len() {
            return Err(Error::invalid(format!(
                "segment {i} references stream {} of a 2-stream pair",
                seg.channel
            )));
        }
        let stream = &streams.streams[seg.channel];
        match recognizer.transcribe(stream, seg.channel, seg.interval) {
            Ok(t) => transcripts.push(t),
            Err(e) => {
                failures.push((i, e));
                transcripts.push(SegmentTranscript {
                    channel: seg.channel,
                    segment_interval: seg.interval,
                    words: Vec::new(),
                });
            }
        }
    }
    Ok(TranscriptionOutcome {
        transcripts,
        failures,
    })
}

/// Noise controls for the oracle recognizer. All randomness is derived from
/// the seed and the word's identity, so the same word meets the same fate
/// regardless of segmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecognizerNoise {
    pub word_drop_prob: f64,
    pub timestamp_jitter_sigma: f64,
    /// Probability of losing a trailing punctuation mark, hiding the
    /// sentence boundary from the sub-segmenter.
    pub punct_drop_prob: f64,
    pub seed: u64,
}

impl Default for RecognizerNoise {
    fn default() -> Self {
        RecognizerNoise {
            word_drop_prob: 0.0,
            timestamp_jitter_sigma: 0.0,
            punct_drop_prob: 0.0,
            seed: 0,
        }
    }
}

/// Perfect ASR simulated from ground truth: emits the reference words whose
/// audio lies on the queried stream, restricted to the segment.
pub struct OracleRecognizer {
    /// Words per stream, sorted by start time.
    words_by_channel: [Vec<WordToken>; 2],
    noise: RecognizerNoise,
}

impl OracleRecognizer {
    /// Builds per-stream word lists: `stream_of_utterance[i]` is the final
    /// stream index of utterance `i` (for an oracle-separated run, from
    /// [`crate::css::OracleSeparator::effective_channels`]).
    pub fn new(
        truth: &MeetingTruth,
        stream_of_utterance: &[usize],
        noise: RecognizerNoise,
    ) -> Result<Self> {
        if stream_of_utterance.len() != truth.utterances.len() {
            return Err(Error::invalid(
                "stream assignment must cover every utterance",
            ));
        }
        let mut words_by_channel: [Vec<WordToken>; 2] = [Vec::new(), Vec::new()];
        for (utt, &stream) in truth.utterances.iter().zip(stream_of_utterance) {
            if stream > 1 {
                return Err(Error::invalid("stream index must be 0 or 1"));
            }
            words_by_channel[stream].extend(utt.words.iter().cloned());
        }
        for words in &mut words_by_channel {
            words.sort_by(|a, b| {
                a.interval
                    .start()
                    .partial_cmp(&b.interval.start())
                    .unwrap()
            });
        }
        Ok(OracleRecognizer {
            words_by_channel,
            noise,
        })
    }

    /// Oracle without stitching metadata: packing order is stream order.
    pub fn from_packing(truth: &MeetingTruth, noise: RecognizerNoise) -> Result<Self> {
        let packing = channel_packing(truth)?;
        Self::new(truth, &packing, noise)
    }
}

impl Recognizer for OracleRecognizer {
    fn transcribe(
        &self,
        _stream: &AudioSignal,
        channel: usize,
        segment: TimeInterval,
    ) -> Result<SegmentTranscript> {
        let noise = &self.noise;
        let mut words = Vec::new();
        for (index, word) in self.words_by_channel[channel].iter().enumerate() {
            if !segment.contains(word.interval.midpoint()) {
                continue;
            }
            let mut rng = word_rng(noise.seed, channel, index);
            if noise.word_drop_prob > 0.0 && rng.random::<f64>() < noise.word_drop_prob {
                continue;
            }
            let mut text = word.text.clone();
            if noise.punct_drop_prob > 0.0 && rng.random::<f64>() < noise.punct_drop_prob {
                while text.ends_with(['.', '?', '!']) {
                    text.pop();
                }
                if text.is_empty() {
                    continue;
                }
            }
            let interval = if noise.timestamp_jitter_sigma > 0.0 {
                jitter_interval(word.interval, segment, noise.timestamp_jitter_sigma, &mut rng)?
            } else {
                word.interval
            };
            words.push(WordToken::new(text, interval, false)?);
        }
        let words = sentence_flags_from_punct(words);
        SegmentTranscript::new(channel, segment, words)
    }
}

fn word_rng(seed: u64, channel: usize, index: usize) -> ChaCha12Rng {
    let mix = crate::css::splitmix64(
        seed ^ (channel as u64) << 56 ^ (index as u64).wrapping_mul(0x9e3779b97f4a7c15),
    );
    ChaCha12Rng::seed_from_u64(mix)
}

/// Jitters word boundaries and clamps the result so the midpoint stays
/// inside the segment and the word inside the slack band.
fn jitter_interval(
    word: TimeInterval,
    segment: TimeInterval,
    sigma: f64,
    rng: &mut ChaCha12Rng,
) -> Result<TimeInterval> {
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut start = word.start() + normal.sample(rng);
    let mut end = word.end() + normal.sample(rng);
    if end < start {
        std::mem::swap(&mut start, &mut end);
    }
    start = start.max(segment.start() - SEGMENT_SLACK).max(0.0);
    end = end.min(segment.end() + SEGMENT_SLACK).max(start);
    // Shift so the midpoint stays inside the segment.
    let mid = 0.5 * (start + end);
    if mid < segment.start() {
        let shift = segment.start() - mid;
        start += shift;
        end += shift;
    } else if mid > segment.end() {
        let shift = mid - segment.end();
        start = (start - shift).max(0.0);
        end -= shift;
    }
    TimeInterval::new(start.max(0.0), end.max(start.max(0.0)))
}

/// Adapter for externally produced transcripts: words are loaded per channel
/// with absolute times and served per segment by midpoint containment.
pub struct FileRecognizer {
    words_by_channel: [Vec<WordToken>; 2],
}

impl FileRecognizer {
    pub fn new(mut words_by_channel: [Vec<WordToken>; 2]) -> Self {
        for words in &mut words_by_channel {
            words.sort_by(|a, b| {
                a.interval
                    .start()
                    .partial_cmp(&b.interval.start())
                    .unwrap()
            });
        }
        FileRecognizer { words_by_channel }
    }
}

impl Recognizer for FileRecognizer {
    fn transcribe(
        &self,
        _stream: &AudioSignal,
        channel: usize,
        segment: TimeInterval,
    ) -> Result<SegmentTranscript> {
        let words: Vec<WordToken> = self.words_by_channel[channel]
            .iter()
            .filter(|w| segment.contains(w.interval.midpoint()))
            .cloned()
            .collect();
        let words = sentence_flags_from_punct(words);
        SegmentTranscript::new(channel, segment, words)
    }
}
