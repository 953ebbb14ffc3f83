//! Diarization: sub-segmentation of VAD segments, embedding extraction and
//! k-means++ speaker clustering.

mod embedding;
mod kmeans;
mod subsegment;

pub use embedding::{cosine, mean_vector, Embedding, EmbeddingExtractor, FileExtractor, MockExtractor};
pub use kmeans::{cluster_kmeanspp, cluster_kmeanspp_detailed, KMeansResult};
pub use subsegment::{
    detect_speaker_changes, subsegment_sentence, subsegment_sentence_word, subsegment_uniform,
    subsegment_word, word_change_scores, ChangeDetectConfig, SubSegment,
};

use std::fmt;
use std::str::FromStr;

use crate::css::StreamPair;
use crate::error::{Error, Result};
use crate::transcript::SegmentTranscript;
use crate::types::{SpeakerSegment, WordToken};

/// Sub-segmentation scheme applied to every VAD segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    None,
    Uniform(f64),
    Sentence,
    Word,
    SentenceWord,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Scheme::None),
            "uniform-2s" => Ok(Scheme::Uniform(2.0)),
            "uniform-4s" => Ok(Scheme::Uniform(4.0)),
            "sentence" => Ok(Scheme::Sentence),
            "word" => Ok(Scheme::Word),
            "sentence+word" => Ok(Scheme::SentenceWord),
            other => Err(Error::invalid(format!(
                "unknown scheme '{other}' (expected none, uniform-2s, uniform-4s, sentence, word, sentence+word)"
            ))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::None => write!(f, "none"),
            Scheme::Uniform(len) => write!(f, "uniform-{len}s"),
            Scheme::Sentence => write!(f, "sentence"),
            Scheme::Word => write!(f, "word"),
            Scheme::SentenceWord => write!(f, "sentence+word"),
        }
    }
}

/// One recognized word with its attributed speaker label.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedWord {
    pub channel: usize,
    pub speaker: String,
    pub word: WordToken,
}

#[derive(Debug, Clone)]
pub struct DiarizationResult {
    /// Labeled sub-segments in processing order; every `speaker` is set.
    pub subsegments: Vec<SubSegment>,
}

impl DiarizationResult {
    pub fn speaker_segments(&self) -> Vec<SpeakerSegment> {
        self.subsegments
            .iter()
            .map(|s| SpeakerSegment {
                channel: s.channel,
                interval: s.interval,
                speaker: s.speaker.clone(),
            })
            .collect()
    }

    /// Every word with its inherited sub-segment label.
    pub fn attributed_words(&self) -> Vec<AttributedWord> {
        self.subsegments
            .iter()
            .flat_map(|s| {
                let speaker = s.speaker.clone().expect("labeled sub-segment");
                s.words.iter().map(move |w| AttributedWord {
                    channel: s.channel,
                    speaker: speaker.clone(),
                    word: w.clone(),
                })
            })
            .collect()
    }
}

/// Full diarization pass: sub-segment every VAD segment per the scheme,
/// extract one embedding per (word-bearing) sub-segment, cluster with
/// k-means++ and label words by their sub-segment's cluster.
#[allow(clippy::too_many_arguments)]
pub fn diarize_pipeline(
    streams: &StreamPair,
    vad_segments: &[SpeakerSegment],
    transcripts: &[SegmentTranscript],
    scheme: Scheme,
    extractor: &dyn EmbeddingExtractor,
    change_cfg: &ChangeDetectConfig,
    k_speakers: usize,
    seed: u64,
) -> Result<DiarizationResult> {
    if vad_segments.len() != transcripts.len() {
        return Err(Error::invalid(
            "diarize requires one transcript per VAD segment",
        ));
    }
    if k_speakers == 0 {
        return Err(Error::invalid("k_speakers must be positive"));
    }

    let mut subs: Vec<SubSegment> = Vec::new();
    for (seg, transcript) in vad_segments.iter().zip(transcripts) {
        let words = &transcript.words;
        let stream = &streams.streams[seg.channel];
        let pieces = match scheme {
            Scheme::None => vec![SubSegment {
                channel: seg.channel,
                interval: seg.interval,
                words: words.clone(),
                speaker: None,
            }],
            Scheme::Uniform(len) => subsegment_uniform(seg, words, len)?,
            Scheme::Sentence => subsegment_sentence(seg, words)?,
            Scheme::Word => subsegment_word(seg, words, stream, extractor, change_cfg)?,
            Scheme::SentenceWord => {
                subsegment_sentence_word(seg, words, stream, extractor, change_cfg)?
            }
        };
        // Sub-segments without words carry no score weight; drop them before
        // embedding extraction.
        subs.extend(pieces.into_iter().filter(|p| !p.words.is_empty()));
    }

    if subs.is_empty() {
        return Ok(DiarizationResult {
            subsegments: Vec::new(),
        });
    }

    let embeddings: Vec<Embedding> = subs
        .iter()
        .map(|s| extractor.embed(&streams.streams[s.channel], s.channel, s.interval))
        .collect::<Result<_>>()?;
    // A sparse meeting may expose fewer sub-segments than speakers.
    let k = k_speakers.min(embeddings.len());
    let labels = cluster_kmeanspp(&embeddings, k, seed)?;

    for (sub, label) in subs.iter_mut().zip(&labels) {
        sub.speaker = Some(format!("est{label}"));
    }
    Ok(DiarizationResult { subsegments: subs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::css::{run_css_detailed, CssConfig, OracleSeparator};
    use crate::mixgen::{generate_meeting, MixSpec};
    use crate::transcript::{transcribe_segments, OracleRecognizer, RecognizerNoise};
    use crate::vad::{detect_segments, VadConfig};

    #[test]
    fn scheme_parsing_round_trip() {
        for name in ["none", "uniform-2s", "uniform-4s", "sentence", "word", "sentence+word"] {
            let scheme: Scheme = name.parse().unwrap();
            assert_eq!(scheme.to_string(), name);
        }
        assert!("uniform-3s".parse::<Scheme>().is_err());
        assert!("".parse::<Scheme>().is_err());
    }

    /// Oracle everything at sigma 0: every word must inherit a label that is
    /// consistent with the ground-truth speaker partition.
    #[test]
    fn oracle_pipeline_recovers_speaker_partition() {
        let truth = generate_meeting(&MixSpec {
            num_speakers: 3,
            num_utterances: 9,
            overlap_ratio_target: 0.2,
            seed: 31,
            ..MixSpec::default()
        })
        .unwrap();
        let css_cfg = CssConfig::default();
        let sep = OracleSeparator::new(&truth).unwrap();
        let css = run_css_detailed(&truth.mixture, &sep, &css_cfg).unwrap();

        let vad_cfg = VadConfig::default();
        let mut segments = detect_segments(&css.streams.streams[0], 0, &vad_cfg).unwrap();
        segments.extend(detect_segments(&css.streams.streams[1], 1, &vad_cfg).unwrap());

        let recognizer = OracleRecognizer::new(
            &truth,
            &sep.effective_channels(&css),
            RecognizerNoise::default(),
        )
        .unwrap();
        let outcome = transcribe_segments(&css.streams, &segments, &recognizer).unwrap();
        assert!(outcome.failures.is_empty());

        let extractor = MockExtractor::new(&truth.speaker_order(), 64, 0.0, 5).unwrap();
        let result = diarize_pipeline(
            &css.streams,
            &segments,
            &outcome.transcripts,
            Scheme::SentenceWord,
            &extractor,
            &ChangeDetectConfig::default(),
            3,
            7,
        )
        .unwrap();

        // Map each word back to its ground-truth speaker by exact interval.
        let total_words: usize = truth.utterances.iter().map(|u| u.words.len()).sum();
        let attributed = result.attributed_words();
        assert_eq!(attributed.len(), total_words);
        let mut truth_of: std::collections::HashMap<(u64, u64), &str> = Default::default();
        for utt in &truth.utterances {
            for w in &utt.words {
                truth_of.insert(
                    (w.interval.start().to_bits(), w.interval.end().to_bits()),
                    utt.speaker.as_str(),
                );
            }
        }
        let mut mapping: std::collections::HashMap<&str, &str> = Default::default();
        for aw in &attributed {
            let key = (
                aw.word.interval.start().to_bits(),
                aw.word.interval.end().to_bits(),
            );
            let true_spk = truth_of[&key];
            let entry = mapping.entry(true_spk).or_insert(&aw.speaker);
            assert_eq!(
                *entry, aw.speaker,
                "speaker {true_spk} mapped to two labels"
            );
        }
        assert_eq!(mapping.len(), 3, "three distinct labels");
    }

    #[test]
    fn scheme_none_labels_whole_segments() {
        let truth = generate_meeting(&MixSpec {
            num_speakers: 2,
            num_utterances: 4,
            overlap_ratio_target: 0.0,
            seed: 13,
            ..MixSpec::default()
        })
        .unwrap();
        let sep = OracleSeparator::new(&truth).unwrap();
        let css = run_css_detailed(&truth.mixture, &sep, &CssConfig::default()).unwrap();
        let vad_cfg = VadConfig::default();
        let mut segments = detect_segments(&css.streams.streams[0], 0, &vad_cfg).unwrap();
        segments.extend(detect_segments(&css.streams.streams[1], 1, &vad_cfg).unwrap());
        let recognizer = OracleRecognizer::new(
            &truth,
            &sep.effective_channels(&css),
            RecognizerNoise::default(),
        )
        .unwrap();
        let outcome = transcribe_segments(&css.streams, &segments, &recognizer).unwrap();
        let extractor = MockExtractor::new(&truth.speaker_order(), 64, 0.0, 5).unwrap();
        let result = diarize_pipeline(
            &css.streams,
            &segments,
            &outcome.transcripts,
            Scheme::None,
            &extractor,
            &ChangeDetectConfig::default(),
            2,
            7,
        )
        .unwrap();
        // One labeled segment per word-bearing VAD segment.
        let non_empty = outcome
            .transcripts
            .iter()
            .filter(|t| !t.words.is_empty())
            .count();
        assert_eq!(result.subsegments.len(), non_empty);
    }
}
