//! Sub-segmentation of VAD segments: uniform pieces, sentence boundaries,
//! and speaker-change detection from word-level embeddings.

use super::embedding::{cosine, mean_vector, Embedding, EmbeddingExtractor};
use crate::error::Result;
use crate::types::{AudioSignal, SpeakerSegment, TimeInterval, WordToken};

/// Piece of a VAD segment, ideally containing a single speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct SubSegment {
    pub channel: usize,
    pub interval: TimeInterval,
    pub words: Vec<WordToken>,
    pub speaker: Option<String>,
}

impl SubSegment {
    fn from_words(channel: usize, words: &[WordToken]) -> Result<Self> {
        let start = words
            .iter()
            .map(|w| w.interval.start())
            .fold(f64::INFINITY, f64::min);
        let end = words
            .iter()
            .map(|w| w.interval.end())
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(SubSegment {
            channel,
            interval: TimeInterval::new(start, end)?,
            words: words.to_vec(),
            speaker: None,
        })
    }
}

/// Word-level speaker-change detection parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangeDetectConfig {
    /// Words averaged on each side of a candidate gap, and the radius of the
    /// local-minimum window (in gaps).
    pub context_words: usize,
    pub similarity_threshold: f64,
    /// Sides with fewer embeddings than this produce no candidate.
    pub min_context: usize,
}

impl Default for ChangeDetectConfig {
    fn default() -> Self {
        ChangeDetectConfig {
            context_words: 6,
            similarity_threshold: 0.2,
            min_context: 2,
        }
    }
}

/// Equal-length pieces; every word goes to the piece it overlaps most
/// (ties to the earlier piece). Pieces may end up without words.
pub fn subsegment_uniform(
    seg: &SpeakerSegment,
    words: &[WordToken],
    length: f64,
) -> Result<Vec<SubSegment>> {
    assert!(length > 0.0, "piece length must be positive");
    let mut pieces: Vec<SubSegment> = Vec::new();
    let mut start = seg.interval.start();
    while start < seg.interval.end() {
        let end = (start + length).min(seg.interval.end());
        pieces.push(SubSegment {
            channel: seg.channel,
            interval: TimeInterval::new(start, end)?,
            words: Vec::new(),
            speaker: None,
        });
        start = end;
    }
    if pieces.is_empty() {
        // Degenerate zero-length segment.
        pieces.push(SubSegment {
            channel: seg.channel,
            interval: seg.interval,
            words: Vec::new(),
            speaker: None,
        });
    }

    for word in words {
        let mut best = 0usize;
        let mut best_overlap = -1.0f64;
        for (i, piece) in pieces.iter().enumerate() {
            let overlap = piece.interval.overlap(&word.interval);
            if overlap > best_overlap {
                best_overlap = overlap;
                best = i;
            }
        }
        if best_overlap <= 0.0 {
            // Word outside every piece (timestamp slack): nearest midpoint.
            let mid = word.interval.midpoint();
            best = pieces
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    (a.interval.midpoint() - mid)
                        .abs()
                        .partial_cmp(&(b.interval.midpoint() - mid).abs())
                        .unwrap()
                })
                .map(|(i, _)| i)
                .unwrap_or(0);
        }
        pieces[best].words.push(word.clone());
    }
    Ok(pieces)
}

/// A new sub-segment starts after every sentence-final word. Sub-segments
/// span their words only; audio between sentences belongs to none.
pub fn subsegment_sentence(seg: &SpeakerSegment, words: &[WordToken]) -> Result<Vec<SubSegment>> {
    let mut out = Vec::new();
    let mut run: Vec<WordToken> = Vec::new();
    for word in words {
        run.push(word.clone());
        if word.sentence_final {
            out.push(SubSegment::from_words(seg.channel, &run)?);
            run.clear();
        }
    }
    if !run.is_empty() {
        out.push(SubSegment::from_words(seg.channel, &run)?);
    }
    Ok(out)
}

/// Per-gap similarity scores: cosine between the mean of up to
/// `context_words` embeddings before and after the gap. Gaps whose sides
/// hold fewer than `min_context` embeddings are skipped (`None`); fewer than
/// `2 * min_context` words yield no candidates at all.
pub fn word_change_scores(
    embeddings: &[Embedding],
    cfg: &ChangeDetectConfig,
) -> Vec<Option<f64>> {
    let n = embeddings.len();
    if n < 2 * cfg.min_context.max(1) {
        return Vec::new();
    }
    let mut scores = Vec::with_capacity(n - 1);
    for gap in 0..n - 1 {
        let left_from = (gap + 1).saturating_sub(cfg.context_words);
        let left: Vec<&Embedding> = embeddings[left_from..=gap].iter().collect();
        let right_to = (gap + 1 + cfg.context_words).min(n);
        let right: Vec<&Embedding> = embeddings[gap + 1..right_to].iter().collect();
        if left.len() < cfg.min_context || right.len() < cfg.min_context {
            scores.push(None);
            continue;
        }
        scores.push(Some(cosine(&mean_vector(&left), &mean_vector(&right))));
    }
    scores
}

/// Selects gaps that are below the threshold and the strict minimum within
/// `context_words` gaps on either side; equal scores go to the earliest gap.
pub fn detect_speaker_changes(scores: &[Option<f64>], cfg: &ChangeDetectConfig) -> Vec<usize> {
    let mut selected = Vec::new();
    for (gap, score) in scores.iter().enumerate() {
        let Some(score) = score else { continue };
        if *score >= cfg.similarity_threshold {
            continue;
        }
        let window_from = gap.saturating_sub(cfg.context_words);
        let window_to = (gap + cfg.context_words + 1).min(scores.len());
        let is_minimum = (window_from..window_to).all(|other| {
            if other == gap {
                return true;
            }
            match scores[other] {
                None => true,
                Some(s) => *score < s || (*score == s && gap < other),
            }
        });
        if is_minimum {
            selected.push(gap);
        }
    }
    selected
}

/// Splits `words` after each selected gap index.
fn split_at_gaps(
    channel: usize,
    words: &[WordToken],
    gaps: &[usize],
) -> Result<Vec<SubSegment>> {
    let mut out = Vec::with_capacity(gaps.len() + 1);
    let mut from = 0usize;
    for &gap in gaps {
        out.push(SubSegment::from_words(channel, &words[from..=gap])?);
        from = gap + 1;
    }
    if from < words.len() {
        out.push(SubSegment::from_words(channel, &words[from..])?);
    }
    Ok(out)
}

/// Word-level sub-segmentation: embed every word, score the gaps, split at
/// detected speaker changes. Word embeddings serve segmentation only.
pub fn subsegment_word(
    seg: &SpeakerSegment,
    words: &[WordToken],
    stream: &AudioSignal,
    extractor: &dyn EmbeddingExtractor,
    cfg: &ChangeDetectConfig,
) -> Result<Vec<SubSegment>> {
    if words.is_empty() {
        return Ok(Vec::new());
    }
    let embeddings = embed_words(words, stream, seg.channel, extractor)?;
    let scores = word_change_scores(&embeddings, cfg);
    let gaps = detect_speaker_changes(&scores, cfg);
    split_at_gaps(seg.channel, words, &gaps)
}

/// Sentence boundaries first, then word-level subdivision inside each
/// sentence piece.
pub fn subsegment_sentence_word(
    seg: &SpeakerSegment,
    words: &[WordToken],
    stream: &AudioSignal,
    extractor: &dyn EmbeddingExtractor,
    cfg: &ChangeDetectConfig,
) -> Result<Vec<SubSegment>> {
    if words.is_empty() {
        return Ok(Vec::new());
    }
    let embeddings = embed_words(words, stream, seg.channel, extractor)?;
    let mut out = Vec::new();
    let mut from = 0usize;
    for (i, word) in words.iter().enumerate() {
        if word.sentence_final || i + 1 == words.len() {
            let piece = &words[from..=i];
            let scores = word_change_scores(&embeddings[from..=i], cfg);
            let gaps = detect_speaker_changes(&scores, cfg);
            out.extend(split_at_gaps(seg.channel, piece, &gaps)?);
            from = i + 1;
        }
    }
    Ok(out)
}

fn embed_words(
    words: &[WordToken],
    stream: &AudioSignal,
    channel: usize,
    extractor: &dyn EmbeddingExtractor,
) -> Result<Vec<Embedding>> {
    words
        .iter()
        .map(|w| extractor.embed(stream, channel, w.interval))
        .collect()
}
