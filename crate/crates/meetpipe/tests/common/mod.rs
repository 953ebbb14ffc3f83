//! Shared helpers for the integration and acceptance suites: an in-memory
//! pipeline run over a simulated meeting, scored against its own truth.

use meetpipe::css::{run_css_detailed, CssConfig, OracleSeparator};
use meetpipe::diarize::{diarize_pipeline, ChangeDetectConfig, MockExtractor, Scheme};
use meetpipe::formats::SegmentRecord;
use meetpipe::mixgen::{generate_meeting, MeetingTruth, MixSpec};
use meetpipe::pipeline::{diarization_records, evaluate_meeting, EvalConfig, MeetingReport};
use meetpipe::transcript::{transcribe_segments, OracleRecognizer, RecognizerNoise};
use meetpipe::vad::{detect_segments, VadConfig};

pub const EMBEDDING_DIM: usize = 64;

/// The simulated evaluation suite: 8 speakers, 0.3 overlap target.
pub fn suite_spec(meeting_seed: u64) -> MixSpec {
    MixSpec {
        num_speakers: 8,
        num_utterances: 24,
        overlap_ratio_target: 0.3,
        utterance_duration_range: (2.0, 4.0),
        seed: meeting_seed,
        sample_rate: 16_000,
        gap_range: (0.4, 1.2),
    }
}

pub fn suite_meetings(count: usize, base_seed: u64) -> Vec<MeetingTruth> {
    (0..count)
        .map(|i| {
            let seed = base_seed
                .wrapping_mul(0x100000001b3)
                .wrapping_add(i as u64 * 7919);
            generate_meeting(&suite_spec(seed)).expect("suite meeting generates")
        })
        .collect()
}

/// Oracle separation + oracle ASR (optionally degraded) + mock embeddings,
/// evaluated against the meeting's own annotation.
pub fn process_meeting(
    truth: &MeetingTruth,
    scheme: Scheme,
    sigma: f64,
    punct_drop: f64,
    run_seed: u64,
) -> MeetingReport {
    let css_cfg = CssConfig::default();
    let sep = OracleSeparator::new(truth).expect("oracle separator");
    let css = run_css_detailed(&truth.mixture, &sep, &css_cfg).expect("css");

    let vad_cfg = VadConfig::default();
    let mut segments = detect_segments(&css.streams.streams[0], 0, &vad_cfg).expect("vad 0");
    segments.extend(detect_segments(&css.streams.streams[1], 1, &vad_cfg).expect("vad 1"));

    let noise = RecognizerNoise {
        word_drop_prob: 0.0,
        timestamp_jitter_sigma: 0.0,
        punct_drop_prob: punct_drop,
        seed: run_seed,
    };
    let recognizer =
        OracleRecognizer::new(truth, &sep.effective_channels(&css), noise).expect("recognizer");
    let outcome = transcribe_segments(&css.streams, &segments, &recognizer).expect("transcribe");

    let extractor = MockExtractor::new(&truth.speaker_order(), EMBEDDING_DIM, sigma, run_seed)
        .expect("extractor");
    let result = diarize_pipeline(
        &css.streams,
        &segments,
        &outcome.transcripts,
        scheme,
        &extractor,
        &ChangeDetectConfig::default(),
        truth.num_speakers,
        run_seed,
    )
    .expect("diarize");

    let truth_records: Vec<SegmentRecord> = truth
        .utterances
        .iter()
        .map(|u| SegmentRecord::from_utterance("m", u))
        .collect();
    let hyp_records = diarization_records("m", &result);
    evaluate_meeting("m", &truth_records, &hyp_records, &EvalConfig::default())
        .expect("evaluate")
}
