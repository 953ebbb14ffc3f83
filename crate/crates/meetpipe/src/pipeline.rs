//! End-to-end orchestration: simulation of meeting corpora, the staged
//! processing pipeline (css -> vad -> asr -> diarize) with content-hash
//! caching, and metric evaluation with JSON / text reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::css::{
    run_css_detailed, CrossfadeMode, CssConfig, CssOutput, OracleSeparator, PassthroughSeparator,
    Perm, StreamPair,
};
use crate::diarize::{
    diarize_pipeline, ChangeDetectConfig, Embedding, EmbeddingExtractor, FileExtractor,
    MockExtractor, Scheme,
};
use crate::error::{Error, Result};
use crate::formats::config::{ConfigMap, ConfigReader};
use crate::formats::{rttm, segment_json, wav, SegmentRecord};
use crate::metrics::{
    cp_wer, der, normalize_tokens, orc_wer, DerStats, OrcConfig, RefUtterance, TextNorm, WerStats,
};
use crate::mixgen::{generate_meeting, MixSpec};
use crate::transcript::{
    transcribe_segments, FileRecognizer, OracleRecognizer, Recognizer, RecognizerNoise,
    SegmentTranscript,
};
use crate::types::{SpeakerSegment, TimeInterval, Utterance, WordToken};
use crate::vad::{detect_segments, VadConfig};

// ---------------------------------------------------------------------------
// Simulation spec
// ---------------------------------------------------------------------------

/// Corpus simulation request: `meetings` meetings drawn from one mix spec,
/// with per-meeting seeds derived from the base seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub meetings: usize,
    pub mix: MixSpec,
}

impl SimSpec {
    pub fn from_config(map: &ConfigMap) -> Result<Self> {
        let r = ConfigReader::new(map);
        let spec = SimSpec {
            meetings: r.usize_or("meetings", 1)?,
            mix: MixSpec {
                num_speakers: r.usize_or("num_speakers", 2)?,
                num_utterances: r.usize_or("num_utterances", 8)?,
                overlap_ratio_target: r.f64_or("overlap", 0.2)?,
                utterance_duration_range: (
                    r.f64_or("utterance_min", 2.0)?,
                    r.f64_or("utterance_max", 4.0)?,
                ),
                seed: r.u64_or("seed", 0)?,
                sample_rate: r.u64_or("sample_rate", 16_000)? as u32,
                gap_range: (r.f64_or("gap_min", 0.4)?, r.f64_or("gap_max", 1.2)?),
            },
        };
        r.reject_unknown()?;
        if spec.meetings == 0 {
            return Err(Error::invalid("meetings must be positive"));
        }
        spec.mix.validate()?;
        Ok(spec)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::from_config(&ConfigMap::read_file(path)?)
    }
}

// ---------------------------------------------------------------------------
// Pipeline configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparatorKind {
    Oracle,
    Passthrough,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecognizerKind {
    Oracle,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractorKind {
    Mock,
    File,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub css: CssConfig,
    pub vad: VadConfig,
    pub scheme: Scheme,
    pub change: ChangeDetectConfig,
    pub k_speakers: usize,
    pub seed: u64,
    pub separator: SeparatorKind,
    pub recognizer: RecognizerKind,
    pub recognizer_path: Option<PathBuf>,
    pub word_drop: f64,
    pub timestamp_jitter: f64,
    pub punct_drop: f64,
    pub extractor: ExtractorKind,
    pub extractor_path: Option<PathBuf>,
    pub extractor_sigma: f64,
    pub extractor_dim: usize,
    pub norm: TextNorm,
    pub orc: OrcConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            css: CssConfig::default(),
            vad: VadConfig::default(),
            scheme: Scheme::SentenceWord,
            change: ChangeDetectConfig::default(),
            k_speakers: 8,
            seed: 0,
            separator: SeparatorKind::Oracle,
            recognizer: RecognizerKind::Oracle,
            recognizer_path: None,
            word_drop: 0.0,
            timestamp_jitter: 0.0,
            punct_drop: 0.0,
            extractor: ExtractorKind::Mock,
            extractor_path: None,
            extractor_sigma: 0.0,
            extractor_dim: 64,
            norm: TextNorm::default(),
            orc: OrcConfig::default(),
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(Error::parse(
            key.to_string(),
            format!("expected true or false, got '{other}'"),
        )),
    }
}

impl PipelineConfig {
    pub fn from_config(map: &ConfigMap) -> Result<Self> {
        let r = ConfigReader::new(map);
        let defaults = PipelineConfig::default();

        let crossfade = match r.str_or("css.crossfade", "linear") {
            "linear" => CrossfadeMode::Linear,
            "midpoint" => CrossfadeMode::MidpointCut,
            other => {
                return Err(Error::parse(
                    "css.crossfade".to_string(),
                    format!("expected linear or midpoint, got '{other}'"),
                ))
            }
        };
        let css = CssConfig {
            segment_length: r.f64_or("css.segment_length", defaults.css.segment_length)?,
            segment_shift: r.f64_or("css.segment_shift", defaults.css.segment_shift)?,
            crossfade,
        };
        let vad = VadConfig {
            frame_length: r.f64_or("vad.frame_length", defaults.vad.frame_length)?,
            frame_hop: r.f64_or("vad.frame_hop", defaults.vad.frame_hop)?,
            threshold_db_below_max: r.f64_or("vad.threshold_db", defaults.vad.threshold_db_below_max)?,
            closing_gap: r.f64_or("vad.closing_gap", defaults.vad.closing_gap)?,
            boundary_extension: r.f64_or("vad.boundary_extension", defaults.vad.boundary_extension)?,
        };
        let change = ChangeDetectConfig {
            context_words: r.usize_or("change.context_words", defaults.change.context_words)?,
            similarity_threshold: r.f64_or(
                "change.similarity_threshold",
                defaults.change.similarity_threshold,
            )?,
            min_context: r.usize_or("change.min_context", defaults.change.min_context)?,
        };
        let scheme = Scheme::from_str(r.str_or("scheme", "sentence+word"))?;
        let separator = match r.str_or("separator", "oracle") {
            "oracle" => SeparatorKind::Oracle,
            "passthrough" => SeparatorKind::Passthrough,
            other => {
                return Err(Error::parse(
                    "separator".to_string(),
                    format!("expected oracle or passthrough, got '{other}'"),
                ))
            }
        };
        let recognizer = match r.str_or("recognizer", "oracle") {
            "oracle" => RecognizerKind::Oracle,
            "file" => RecognizerKind::File,
            other => {
                return Err(Error::parse(
                    "recognizer".to_string(),
                    format!("expected oracle or file, got '{other}'"),
                ))
            }
        };
        let extractor = match r.str_or("extractor", "mock") {
            "mock" => ExtractorKind::Mock,
            "file" => ExtractorKind::File,
            other => {
                return Err(Error::parse(
                    "extractor".to_string(),
                    format!("expected mock or file, got '{other}'"),
                ))
            }
        };
        let norm = TextNorm {
            lowercase: parse_bool("norm.lowercase", r.str_or("norm.lowercase", "true"))?,
            strip_punctuation: parse_bool(
                "norm.strip_punctuation",
                r.str_or("norm.strip_punctuation", "true"),
            )?,
        };
        let cfg = PipelineConfig {
            css,
            vad,
            scheme,
            change,
            k_speakers: r.usize_or("k_speakers", defaults.k_speakers)?,
            seed: r.u64_or("seed", defaults.seed)?,
            separator,
            recognizer,
            recognizer_path: r.opt_str("recognizer.path").map(PathBuf::from),
            word_drop: r.f64_or("recognizer.word_drop", 0.0)?,
            timestamp_jitter: r.f64_or("recognizer.jitter", 0.0)?,
            punct_drop: r.f64_or("recognizer.punct_drop", 0.0)?,
            extractor,
            extractor_path: r.opt_str("extractor.path").map(PathBuf::from),
            extractor_sigma: r.f64_or("extractor.sigma", 0.0)?,
            extractor_dim: r.usize_or("extractor.dim", defaults.extractor_dim)?,
            norm,
            orc: OrcConfig {
                exhaustive_limit: r.usize_or("orc.exhaustive_limit", defaults.orc.exhaustive_limit)?,
            },
        };
        r.reject_unknown()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::from_config(&ConfigMap::read_file(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.css.validate()?;
        self.vad.validate()?;
        if self.k_speakers == 0 {
            return Err(Error::invalid("k_speakers must be positive"));
        }
        if self.recognizer == RecognizerKind::File && self.recognizer_path.is_none() {
            return Err(Error::invalid("recognizer=file requires recognizer.path"));
        }
        if self.extractor == ExtractorKind::File && self.extractor_path.is_none() {
            return Err(Error::invalid("extractor=file requires extractor.path"));
        }
        for p in [
            (self.word_drop, "recognizer.word_drop"),
            (self.punct_drop, "recognizer.punct_drop"),
        ] {
            if !(0.0..=1.0).contains(&p.0) {
                return Err(Error::invalid(format!("{} must lie in [0, 1]", p.1)));
            }
        }
        Ok(())
    }

    fn noise(&self) -> RecognizerNoise {
        RecognizerNoise {
            word_drop_prob: self.word_drop,
            timestamp_jitter_sigma: self.timestamp_jitter,
            punct_drop_prob: self.punct_drop,
            seed: self.seed,
        }
    }
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Generates `spec.meetings` meetings under `out_dir`, one subdirectory per
/// meeting: mixture.wav, src<k>.wav per speaker, truth.json.
pub fn simulate(spec: &SimSpec, out_dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut ids = Vec::with_capacity(spec.meetings);
    for i in 0..spec.meetings {
        let id = format!("m{i:03}");
        let dir = out_dir.join(&id);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mix = MixSpec {
            seed: crate::css::splitmix64(spec.mix.seed ^ (i as u64).wrapping_mul(0x1000193)),
            ..spec.mix.clone()
        };
        let truth = generate_meeting(&mix)?;
        wav::write_wav(&dir.join("mixture.wav"), &truth.mixture)?;
        for (k, source) in truth.sources.iter().enumerate() {
            wav::write_wav(&dir.join(format!("src{k}.wav")), source)?;
        }
        let records: Vec<SegmentRecord> = truth
            .utterances
            .iter()
            .map(|u| SegmentRecord::from_utterance(&id, u))
            .collect();
        segment_json::write_file(&dir.join("truth.json"), &records)?;
        ids.push(id);
    }
    Ok(ids)
}

// ---------------------------------------------------------------------------
// Staged run
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Css,
    Vad,
    Asr,
    Diarize,
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "css" => Ok(Stage::Css),
            "vad" => Ok(Stage::Vad),
            "asr" => Ok(Stage::Asr),
            "diarize" => Ok(Stage::Diarize),
            other => Err(Error::invalid(format!(
                "unknown stage '{other}' (expected css, vad, asr, diarize)"
            ))),
        }
    }
}

/// Sidecar describing what the stitcher did to each segment; the oracle
/// recognizer needs it to route words to the right stream.
#[derive(Debug, Serialize, Deserialize)]
struct CssMeta {
    swaps: Vec<bool>,
    segment_bounds: Vec<(f64, f64)>,
}

impl CssMeta {
    fn from_output(css: &CssOutput) -> Self {
        CssMeta {
            swaps: css
                .segment_perms
                .iter()
                .map(|p| matches!(p, Perm::Swap))
                .collect(),
            segment_bounds: css
                .segment_intervals
                .iter()
                .map(|iv| (iv.start(), iv.end()))
                .collect(),
        }
    }

    fn to_output(&self, streams: StreamPair) -> Result<CssOutput> {
        Ok(CssOutput {
            streams,
            segment_perms: self
                .swaps
                .iter()
                .map(|&s| if s { Perm::Swap } else { Perm::Identity })
                .collect(),
            segment_intervals: self
                .segment_bounds
                .iter()
                .map(|&(a, b)| TimeInterval::new(a, b))
                .collect::<Result<_>>()?,
        })
    }
}

fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

fn cache_hit(cache_file: &Path, hash: &str, outputs: &[PathBuf]) -> bool {
    match std::fs::read_to_string(cache_file) {
        Ok(stored) => stored.trim() == hash && outputs.iter().all(|p| p.exists()),
        Err(_) => false,
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs the pipeline for one meeting directory, writing artifacts into
/// `out_dir`. Stages whose inputs are unchanged (content hash) are skipped.
/// `stage_limit` stops the run after the given stage.
pub fn run_meeting(
    cfg: &PipelineConfig,
    meeting_dir: &Path,
    out_dir: &Path,
    stage_limit: Option<Stage>,
) -> Result<()> {
    cfg.validate()?;
    let id = meeting_dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::invalid(format!("bad meeting directory {meeting_dir:?}")))?
        .to_string();
    let mixture_path = meeting_dir.join("mixture.wav");
    if !mixture_path.exists() {
        return Err(Error::invalid(format!(
            "{} has no mixture.wav",
            meeting_dir.display()
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let cache_dir = out_dir.join("cache");
    std::fs::create_dir_all(&cache_dir).map_err(|e| Error::io(&cache_dir, e))?;

    let truth_path = meeting_dir.join("truth.json");
    let needs_truth = cfg.separator == SeparatorKind::Oracle
        || cfg.recognizer == RecognizerKind::Oracle
        || cfg.extractor == ExtractorKind::Mock;
    let truth = if needs_truth {
        if !truth_path.exists() {
            return Err(Error::invalid(format!(
                "oracle/mock back-ends need {}",
                truth_path.display()
            )));
        }
        let records = segment_json::read_file(&truth_path)?;
        Some(truth_from_records(&records, meeting_dir)?)
    } else {
        None
    };
    let truth_bytes = if truth_path.exists() {
        read_bytes(&truth_path)?
    } else {
        Vec::new()
    };

    // --- stage css ---------------------------------------------------------
    let stream0_path = out_dir.join(format!("{id}.stream0.wav"));
    let stream1_path = out_dir.join(format!("{id}.stream1.wav"));
    let css_meta_path = out_dir.join("css_meta.json");
    {
        let mixture_bytes = read_bytes(&mixture_path)?;
        let cfg_tag = format!("{:?}|{:?}", cfg.css, cfg.separator);
        let hash = sha256_hex(&[b"css", cfg_tag.as_bytes(), &mixture_bytes, &truth_bytes]);
        let cache_file = cache_dir.join("css.hash");
        let outputs = vec![
            stream0_path.clone(),
            stream1_path.clone(),
            css_meta_path.clone(),
        ];
        if !cache_hit(&cache_file, &hash, &outputs) {
            let run = || -> Result<()> {
                let mixture = wav::read_wav(&mixture_path)?;
                let css = match cfg.separator {
                    SeparatorKind::Oracle => {
                        let sep = OracleSeparator::new(truth.as_ref().expect("truth required"))?;
                        run_css_detailed(&mixture, &sep, &cfg.css)?
                    }
                    SeparatorKind::Passthrough => {
                        run_css_detailed(&mixture, &PassthroughSeparator, &cfg.css)?
                    }
                };
                wav::write_wav(&stream0_path, &css.streams.streams[0])?;
                wav::write_wav(&stream1_path, &css.streams.streams[1])?;
                let meta = serde_json::to_string(&CssMeta::from_output(&css))
                    .map_err(|e| Error::parse("css_meta", e.to_string()))?;
                write_text(&css_meta_path, &meta)?;
                write_text(&cache_file, &hash)
            };
            run().map_err(|e| Error::stage("css", e))?;
        }
    }
    if stage_limit == Some(Stage::Css) {
        return Ok(());
    }

    let stream0_bytes = read_bytes(&stream0_path)?;
    let stream1_bytes = read_bytes(&stream1_path)?;
    let streams = StreamPair {
        streams: [wav::read_wav(&stream0_path)?, wav::read_wav(&stream1_path)?],
    };

    // --- stage vad ---------------------------------------------------------
    let vad_json_path = out_dir.join("vad.json");
    let vad_rttm_path = out_dir.join("vad.rttm");
    {
        let cfg_tag = format!("{:?}", cfg.vad);
        let hash = sha256_hex(&[b"vad", cfg_tag.as_bytes(), &stream0_bytes, &stream1_bytes]);
        let cache_file = cache_dir.join("vad.hash");
        let outputs = vec![vad_json_path.clone(), vad_rttm_path.clone()];
        if !cache_hit(&cache_file, &hash, &outputs) {
            let run = || -> Result<()> {
                let mut segments = detect_segments(&streams.streams[0], 0, &cfg.vad)?;
                segments.extend(detect_segments(&streams.streams[1], 1, &cfg.vad)?);
                let records: Vec<SegmentRecord> = segments
                    .iter()
                    .map(|seg| {
                        SegmentRecord::from_words(&id, None, Some(seg.channel), seg.interval, &[])
                    })
                    .collect();
                segment_json::write_file(&vad_json_path, &records)?;
                rttm::write_file(&vad_rttm_path, &rttm::from_segments(&id, &segments))?;
                write_text(&cache_file, &hash)
            };
            run().map_err(|e| Error::stage("vad", e))?;
        }
    }
    if stage_limit == Some(Stage::Vad) {
        return Ok(());
    }

    // --- stage asr ---------------------------------------------------------
    let transcripts_path = out_dir.join("transcripts.json");
    {
        let vad_bytes = read_bytes(&vad_json_path)?;
        let css_meta_bytes = read_bytes(&css_meta_path)?;
        let external_bytes = match (&cfg.recognizer, &cfg.recognizer_path) {
            (RecognizerKind::File, Some(path)) => read_bytes(path)?,
            _ => Vec::new(),
        };
        let cfg_tag = format!(
            "{:?}|{}|{}|{}|{}",
            cfg.recognizer, cfg.word_drop, cfg.timestamp_jitter, cfg.punct_drop, cfg.seed
        );
        let hash = sha256_hex(&[
            b"asr",
            cfg_tag.as_bytes(),
            &stream0_bytes,
            &stream1_bytes,
            &vad_bytes,
            &css_meta_bytes,
            &truth_bytes,
            &external_bytes,
        ]);
        let cache_file = cache_dir.join("asr.hash");
        if !cache_hit(&cache_file, &hash, &[transcripts_path.clone()]) {
            let run = || -> Result<()> {
                let segments = load_vad_segments(&vad_json_path)?;
                let recognizer: Box<dyn Recognizer> = match cfg.recognizer {
                    RecognizerKind::Oracle => {
                        let truth = truth.as_ref().expect("truth required");
                        let meta: CssMeta =
                            serde_json::from_slice(&css_meta_bytes).map_err(|e| {
                                Error::parse(css_meta_path.display().to_string(), e.to_string())
                            })?;
                        let effective = match cfg.separator {
                            SeparatorKind::Oracle => {
                                let sep = OracleSeparator::new(truth)?;
                                let css = meta.to_output(StreamPair {
                                    streams: streams.streams.clone(),
                                })?;
                                sep.effective_channels(&css)
                            }
                            // Without separation everything sits on stream 0.
                            SeparatorKind::Passthrough => vec![0; truth.utterances.len()],
                        };
                        Box::new(OracleRecognizer::new(truth, &effective, cfg.noise())?)
                    }
                    RecognizerKind::File => {
                        let path = cfg.recognizer_path.as_ref().expect("validated");
                        Box::new(load_file_recognizer(path)?)
                    }
                };
                let outcome = transcribe_segments(&streams, &segments, recognizer.as_ref())?;
                let records: Vec<SegmentRecord> = outcome
                    .transcripts
                    .iter()
                    .map(|t| {
                        SegmentRecord::from_words(
                            &id,
                            None,
                            Some(t.channel),
                            t.segment_interval,
                            &t.words,
                        )
                    })
                    .collect();
                segment_json::write_file(&transcripts_path, &records)?;
                write_text(&cache_file, &hash)
            };
            run().map_err(|e| Error::stage("asr", e))?;
        }
    }
    if stage_limit == Some(Stage::Asr) {
        return Ok(());
    }

    // --- stage diarize -----------------------------------------------------
    {
        let transcripts_bytes = read_bytes(&transcripts_path)?;
        let extractor_bytes = match (&cfg.extractor, &cfg.extractor_path) {
            (ExtractorKind::File, Some(path)) => read_bytes(path)?,
            _ => Vec::new(),
        };
        let cfg_tag = format!(
            "{}|{:?}|{:?}|{}|{}|{}|{}",
            cfg.scheme,
            cfg.change,
            cfg.extractor,
            cfg.extractor_sigma,
            cfg.extractor_dim,
            cfg.k_speakers,
            cfg.seed
        );
        let hash = sha256_hex(&[
            b"diarize",
            cfg_tag.as_bytes(),
            &stream0_bytes,
            &stream1_bytes,
            &transcripts_bytes,
            &truth_bytes,
            &extractor_bytes,
        ]);
        let cache_file = cache_dir.join("diarize.hash");
        let words_path = out_dir.join("words.json");
        let rttm_path = out_dir.join("diarized.rttm");
        if !cache_hit(&cache_file, &hash, &[words_path.clone(), rttm_path.clone()]) {
            let run = || -> Result<()> {
                let (segments, transcripts) = load_transcripts(&transcripts_path)?;
                let extractor: Box<dyn EmbeddingExtractor> = match cfg.extractor {
                    ExtractorKind::Mock => {
                        let truth = truth.as_ref().expect("truth required");
                        Box::new(MockExtractor::new(
                            &truth.speaker_order(),
                            cfg.extractor_dim,
                            cfg.extractor_sigma,
                            cfg.seed,
                        )?)
                    }
                    ExtractorKind::File => {
                        let path = cfg.extractor_path.as_ref().expect("validated");
                        Box::new(load_file_extractor(path)?)
                    }
                };
                let result = diarize_pipeline(
                    &streams,
                    &segments,
                    &transcripts,
                    cfg.scheme,
                    extractor.as_ref(),
                    &cfg.change,
                    cfg.k_speakers,
                    cfg.seed,
                )?;
                rttm::write_file(
                    &rttm_path,
                    &rttm::from_segments(&id, &result.speaker_segments()),
                )?;
                segment_json::write_file(&words_path, &diarization_records(&id, &result))?;
                write_text(&cache_file, &hash)
            };
            run().map_err(|e| Error::stage("diarize", e))?;
        }
    }
    Ok(())
}

/// One segment-JSON record per labeled sub-segment (per-word attribution).
pub fn diarization_records(
    session_id: &str,
    result: &crate::diarize::DiarizationResult,
) -> Vec<SegmentRecord> {
    result
        .subsegments
        .iter()
        .map(|sub| {
            SegmentRecord::from_words(
                session_id,
                sub.speaker.clone(),
                Some(sub.channel),
                sub.interval,
                &sub.words,
            )
        })
        .collect()
}

/// Rebuilds a `MeetingTruth` from truth.json plus the per-speaker sources on
/// disk (required by the oracle separator).
fn truth_from_records(
    records: &[SegmentRecord],
    meeting_dir: &Path,
) -> Result<crate::mixgen::MeetingTruth> {
    if records.is_empty() {
        return Err(Error::invalid("truth.json contains no utterances"));
    }
    let utterances: Vec<Utterance> = records
        .iter()
        .map(|r| r.to_utterance())
        .collect::<Result<_>>()?;
    let mut speakers: Vec<String> = utterances.iter().map(|u| u.speaker.clone()).collect();
    speakers.sort();
    speakers.dedup();
    let mixture = wav::read_wav(&meeting_dir.join("mixture.wav"))?;
    let mut sources = Vec::with_capacity(speakers.len());
    for k in 0..speakers.len() {
        let path = meeting_dir.join(format!("src{k}.wav"));
        if path.exists() {
            sources.push(wav::read_wav(&path)?);
        } else {
            // Source-free ingestion: oracle separation is impossible but the
            // annotation side still works.
            sources.push(crate::types::AudioSignal::silence(
                mixture.len(),
                mixture.sample_rate(),
            )?);
        }
    }
    Ok(crate::mixgen::MeetingTruth {
        utterances,
        sources,
        mixture,
        num_speakers: speakers.len(),
    })
}

fn load_vad_segments(path: &Path) -> Result<Vec<SpeakerSegment>> {
    segment_json::read_file(path)?
        .iter()
        .map(|r| {
            let channel = r
                .channel
                .ok_or_else(|| Error::invalid("vad record without channel"))?;
            SpeakerSegment::new(channel, r.interval()?, None)
        })
        .collect()
}

fn load_transcripts(path: &Path) -> Result<(Vec<SpeakerSegment>, Vec<SegmentTranscript>)> {
    let records = segment_json::read_file(path)?;
    let mut segments = Vec::with_capacity(records.len());
    let mut transcripts = Vec::with_capacity(records.len());
    for r in &records {
        let channel = r
            .channel
            .ok_or_else(|| Error::invalid("transcript record without channel"))?;
        let interval = r.interval()?;
        segments.push(SpeakerSegment::new(channel, interval, None)?);
        transcripts.push(SegmentTranscript::new(channel, interval, r.word_tokens()?)?);
    }
    Ok((segments, transcripts))
}

fn load_file_recognizer(path: &Path) -> Result<FileRecognizer> {
    let records = segment_json::read_file(path)?;
    let mut by_channel: [Vec<WordToken>; 2] = [Vec::new(), Vec::new()];
    for r in &records {
        let channel = r
            .channel
            .ok_or_else(|| Error::invalid("external transcript record without channel"))?;
        by_channel[channel].extend(r.word_tokens()?);
    }
    Ok(FileRecognizer::new(by_channel))
}

/// One embedding per line: `{"channel": 0, "start_time": ..., "end_time":
/// ..., "vector": [...]}`.
#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingRecord {
    channel: usize,
    start_time: f64,
    end_time: f64,
    vector: Vec<f64>,
}

fn load_file_extractor(path: &Path) -> Result<FileExtractor> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (number, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let record: EmbeddingRecord = serde_json::from_str(line).map_err(|e| {
            Error::parse(
                format!("{}: line {}", path.display(), number + 1),
                e.to_string(),
            )
        })?;
        entries.push((
            record.channel,
            TimeInterval::new(record.start_time, record.end_time)?,
            Embedding::new(record.vector)?,
        ));
    }
    Ok(FileExtractor::new(entries))
}

/// Meeting directories under `root`: `root` itself when it holds a
/// mixture.wav, otherwise every direct subdirectory that does.
pub fn discover_meetings(root: &Path) -> Result<Vec<PathBuf>> {
    if !root.exists() {
        return Err(Error::invalid(format!(
            "input directory {} does not exist",
            root.display()
        )));
    }
    if root.join("mixture.wav").exists() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs = Vec::new();
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        if path.is_dir() && path.join("mixture.wav").exists() {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::invalid(format!(
            "{} contains no meeting directories (mixture.wav not found)",
            root.display()
        )));
    }
    Ok(dirs)
}

/// Runs the pipeline over a corpus with up to `jobs` meetings in parallel,
/// writing per-meeting artifact directories under `out_root`.
pub fn run_corpus(
    cfg: &PipelineConfig,
    input_root: &Path,
    out_root: &Path,
    jobs: usize,
    stage_limit: Option<Stage>,
) -> Result<Vec<String>> {
    use rayon::prelude::*;

    let meetings = discover_meetings(input_root)?;
    std::fs::create_dir_all(out_root).map_err(|e| Error::io(out_root, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let results: Vec<Result<String>> = pool.install(|| {
        meetings
            .par_iter()
            .map(|dir| {
                let id = dir
                    .file_name()
                    .and_then(|n| n.to_str())
                    .ok_or_else(|| Error::invalid(format!("bad meeting directory {dir:?}")))?
                    .to_string();
                run_meeting(cfg, dir, &out_root.join(&id), stage_limit)?;
                Ok(id)
            })
            .collect()
    });
    let mut ids = Vec::with_capacity(results.len());
    for r in results {
        ids.push(r?);
    }
    ids.sort();
    Ok(ids)
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalConfig {
    pub norm: TextNorm,
    pub orc: OrcConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeetingReport {
    pub session_id: String,
    pub orc_wer: WerStats,
    pub cp_wer: WerStats,
    pub der: DerStats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub meetings: Vec<MeetingReport>,
    pub pooled: PooledReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PooledReport {
    pub orc_wer: WerStats,
    pub cp_wer: WerStats,
    pub der: DerStats,
}

/// Scores one meeting: reference utterances from truth records, hypothesis
/// words from diarized records.
pub fn evaluate_meeting(
    session_id: &str,
    truth: &[SegmentRecord],
    hyp: &[SegmentRecord],
    cfg: &EvalConfig,
) -> Result<MeetingReport> {
    let ref_utts: Vec<Utterance> = truth
        .iter()
        .map(|r| r.to_utterance())
        .collect::<Result<_>>()?;

    // ORC WER: hypothesis words grouped per stream.
    let orc_refs: Vec<RefUtterance> = ref_utts
        .iter()
        .map(|u| RefUtterance {
            start: u.interval.start(),
            words: normalize_tokens(&u.text(), &cfg.norm),
        })
        .collect();
    let mut stream_words: Vec<Vec<(f64, String)>> = vec![Vec::new(); 2];
    for record in hyp {
        let channel = record.channel.unwrap_or(0).min(1);
        for w in record.word_tokens()? {
            stream_words[channel].push((w.interval.start(), w.text));
        }
    }
    let streams: Vec<Vec<String>> = stream_words
        .into_iter()
        .map(|mut words| {
            words.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            words
                .into_iter()
                .flat_map(|(_, text)| normalize_tokens(&text, &cfg.norm))
                .collect()
        })
        .collect();
    let orc = orc_wer(&orc_refs, &streams, &cfg.orc)?;

    // cpWER: time-ordered concatenation per speaker on both sides.
    let cp = cp_wer(
        &speaker_token_map(ref_utts.iter().map(|u| (u.speaker.clone(), u.interval.start(), u.text())), &cfg.norm),
        &speaker_token_map(
            hyp.iter().filter_map(|r| {
                r.speaker
                    .clone()
                    .map(|s| (s, r.start_time, r.words.clone()))
            }),
            &cfg.norm,
        ),
    );

    // DER over utterance intervals vs diarized sub-segments.
    let ref_segments: Vec<SpeakerSegment> = ref_utts
        .iter()
        .map(|u| SpeakerSegment::new(0, u.interval, Some(u.speaker.clone())))
        .collect::<Result<_>>()?;
    let hyp_segments: Vec<SpeakerSegment> = hyp
        .iter()
        .filter(|r| r.speaker.is_some())
        .map(|r| SpeakerSegment::new(r.channel.unwrap_or(0).min(1), r.interval()?, r.speaker.clone()))
        .collect::<Result<_>>()?;
    let der_stats = der(&ref_segments, &hyp_segments)?;

    Ok(MeetingReport {
        session_id: session_id.to_string(),
        orc_wer: orc.stats,
        cp_wer: cp.stats,
        der: der_stats,
    })
}

fn speaker_token_map(
    entries: impl Iterator<Item = (String, f64, String)>,
    norm: &TextNorm,
) -> BTreeMap<String, Vec<String>> {
    let mut by_speaker: BTreeMap<String, Vec<(f64, String)>> = BTreeMap::new();
    for (speaker, start, text) in entries {
        by_speaker.entry(speaker).or_default().push((start, text));
    }
    by_speaker
        .into_iter()
        .map(|(speaker, mut texts)| {
            texts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let tokens = texts
                .into_iter()
                .flat_map(|(_, text)| normalize_tokens(&text, norm))
                .collect();
            (speaker, tokens)
        })
        .collect()
}

/// Evaluates a hypothesis directory against a truth directory. Meeting IDs
/// must match; missing or extra hypothesis directories are an error.
pub fn evaluate_corpus(truth_root: &Path, hyp_root: &Path, cfg: &EvalConfig) -> Result<Report> {
    let mut ids: Vec<String> = Vec::new();
    let entries = std::fs::read_dir(truth_root).map_err(|e| Error::io(truth_root, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(truth_root, e))?;
        let path = entry.path();
        if path.is_dir() && path.join("truth.json").exists() {
            ids.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    ids.sort();
    if ids.is_empty() {
        return Err(Error::invalid(format!(
            "{} contains no truth.json meeting directories",
            truth_root.display()
        )));
    }
    let missing: Vec<&String> = ids
        .iter()
        .filter(|id| !hyp_root.join(id.as_str()).join("words.json").exists())
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "hypothesis missing for meetings: {}",
            missing
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }

    let mut meetings = Vec::with_capacity(ids.len());
    for id in &ids {
        let truth = segment_json::read_file(&truth_root.join(id).join("truth.json"))?;
        let hyp = segment_json::read_file(&hyp_root.join(id).join("words.json"))?;
        meetings.push(evaluate_meeting(id, &truth, &hyp, cfg)?);
    }
    let pooled = PooledReport {
        orc_wer: WerStats::pooled(meetings.iter().map(|m| &m.orc_wer)),
        cp_wer: WerStats::pooled(meetings.iter().map(|m| &m.cp_wer)),
        der: DerStats::pooled(meetings.iter().map(|m| &m.der)),
    };
    Ok(Report { meetings, pooled })
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::parse("report", e.to_string()))
    }

    /// Aligned text table, one row per meeting plus the pooled row.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "session", "orc_wer", "cp_wer", "der", "miss", "falarm", "confusion"
        );
        let mut row = |name: &str, orc: &WerStats, cp: &WerStats, der: &DerStats| {
            let _ = writeln!(
                out,
                "{:<12} {:>8.2}% {:>8.2}% {:>8.2}% {:>8.2}s {:>8.2}s {:>8.2}s",
                name,
                100.0 * orc.wer,
                100.0 * cp.wer,
                100.0 * der.der,
                der.missed_speech,
                der.false_alarm,
                der.speaker_confusion
            );
        };
        for m in &self.meetings {
            row(&m.session_id, &m.orc_wer, &m.cp_wer, &m.der);
        }
        row("pooled", &self.pooled.orc_wer, &self.pooled.cp_wer, &self.pooled.der);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sim_spec_from_config() {
        let map = ConfigMap::parse(
            "meetings = 3\nnum_speakers = 4\nnum_utterances = 12\noverlap = 0.3\nseed = 5",
        )
        .unwrap();
        let spec = SimSpec::from_config(&map).unwrap();
        assert_eq!(spec.meetings, 3);
        assert_eq!(spec.mix.num_speakers, 4);
        assert_eq!(spec.mix.overlap_ratio_target, 0.3);

        assert!(SimSpec::from_config(&ConfigMap::parse("bogus = 1").unwrap()).is_err());
    }

    #[test]
    fn pipeline_config_round_trip() {
        let text = "\
css.segment_length = 4.0
css.segment_shift = 2.0
vad.boundary_extension = 0.4
change.context_words = 6
change.similarity_threshold = 0.2
scheme = sentence+word
k_speakers = 8
seed = 17
separator = oracle
recognizer = oracle
extractor = mock
extractor.sigma = 0.25
";
        let cfg = PipelineConfig::from_config(&ConfigMap::parse(text).unwrap()).unwrap();
        assert_eq!(cfg.k_speakers, 8);
        assert_eq!(cfg.seed, 17);
        assert_eq!(cfg.scheme, Scheme::SentenceWord);
        assert_eq!(cfg.extractor_sigma, 0.25);

        assert!(PipelineConfig::from_config(&ConfigMap::parse("scheme = bogus").unwrap()).is_err());
        assert!(
            PipelineConfig::from_config(&ConfigMap::parse("recognizer = file").unwrap()).is_err(),
            "file recognizer without path must be rejected"
        );
        assert!(PipelineConfig::from_config(&ConfigMap::parse("nonsense = 1").unwrap()).is_err());
    }

    #[test]
    fn evaluate_meeting_perfect_hypothesis() {
        let truth = vec![
            SegmentRecord {
                session_id: "m".into(),
                speaker: Some("alice".into()),
                channel: None,
                start_time: 0.0,
                end_time: 0.6,
                words: "good morning.".into(),
                word_timings: vec![
                    crate::formats::WordTiming(0.0, 0.3, false),
                    crate::formats::WordTiming(0.3, 0.6, true),
                ],
            },
            SegmentRecord {
                session_id: "m".into(),
                speaker: Some("bob".into()),
                channel: None,
                start_time: 1.0,
                end_time: 1.3,
                words: "hello.".into(),
                word_timings: vec![crate::formats::WordTiming(1.0, 1.3, true)],
            },
        ];
        let mut hyp = truth.clone();
        hyp[0].speaker = Some("est1".into());
        hyp[0].channel = Some(0);
        hyp[1].speaker = Some("est0".into());
        hyp[1].channel = Some(0);

        let report = evaluate_meeting("m", &truth, &hyp, &EvalConfig::default()).unwrap();
        assert_eq!(report.orc_wer.errors(), 0);
        assert_eq!(report.cp_wer.errors(), 0);
        assert!(report.der.der.abs() < 1e-12);
    }

    #[test]
    fn evaluate_meeting_empty_hypothesis() {
        let truth = vec![SegmentRecord {
            session_id: "m".into(),
            speaker: Some("alice".into()),
            channel: None,
            start_time: 0.0,
            end_time: 0.6,
            words: "good morning.".into(),
            word_timings: vec![
                crate::formats::WordTiming(0.0, 0.3, false),
                crate::formats::WordTiming(0.3, 0.6, true),
            ],
        }];
        let report = evaluate_meeting("m", &truth, &[], &EvalConfig::default()).unwrap();
        assert_eq!(report.cp_wer.wer, 1.0);
        assert_eq!(report.der.der, 1.0);
    }
}
