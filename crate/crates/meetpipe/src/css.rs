//! Continuous speech separation driver.
//!
//! A long recording is cut into fixed-length overlapping segments, each
//! segment is separated into two channels by a [`Separator`], and the
//! per-segment channel permutations are resolved against the previous
//! segment's overlap region so the channels concatenate into two consistent
//! overlap-free streams.

use crate::error::{Error, Result};
use crate::mixgen::MeetingTruth;
use crate::types::{AudioSignal, TimeInterval};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrossfadeMode {
    /// Linear ramp over the whole overlap region.
    Linear,
    /// Hard cut at the overlap midpoint.
    MidpointCut,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CssConfig {
    pub segment_length: f64,
    pub segment_shift: f64,
    pub crossfade: CrossfadeMode,
}

impl Default for CssConfig {
    fn default() -> Self {
        CssConfig {
            segment_length: 4.0,
            segment_shift: 2.0,
            crossfade: CrossfadeMode::Linear,
        }
    }
}

impl CssConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.segment_shift > 0.0 && self.segment_length > self.segment_shift) {
            return Err(Error::invalid(
                "css requires 0 < segment_shift < segment_length",
            ));
        }
        Ok(())
    }
}

/// One separated segment: two equal-length channels covering `interval`
/// (plus zero padding up to the nominal segment length on the last one).
#[derive(Debug, Clone)]
pub struct SeparatedSegment {
    pub segment_index: usize,
    pub interval: TimeInterval,
    pub channels: [AudioSignal; 2],
}

/// Two overlap-free output streams of equal length.
#[derive(Debug, Clone)]
pub struct StreamPair {
    pub streams: [AudioSignal; 2],
}

/// Channel order of one segment relative to the stitched output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perm {
    Identity,
    Swap,
}

impl Perm {
    pub fn apply(&self, channel: usize) -> usize {
        match self {
            Perm::Identity => channel,
            Perm::Swap => 1 - channel,
        }
    }
}

/// Two-channel segment separator. Implementations must be deterministic
/// functions of their inputs.
pub trait Separator {
    fn separate(
        &self,
        segment_index: usize,
        interval: TimeInterval,
        segment: &AudioSignal,
    ) -> Result<[AudioSignal; 2]>;
}

/// Uniform segmentation: segments start every `segment_shift` seconds and
/// carry `segment_length` seconds of audio; the last one is zero-padded and
/// its true (unpadded) interval reported.
pub fn segment_uniform(
    signal: &AudioSignal,
    cfg: &CssConfig,
) -> Result<Vec<(TimeInterval, AudioSignal)>> {
    cfg.validate()?;
    if signal.is_empty() {
        return Err(Error::invalid("cannot segment an empty signal"));
    }
    let rate = signal.sample_rate();
    let seg_len = (cfg.segment_length * rate as f64).round() as usize;
    let shift = (cfg.segment_shift * rate as f64).round() as usize;
    let total = signal.len();

    let mut segments = Vec::new();
    let mut start = 0usize;
    loop {
        let true_end = (start + seg_len).min(total);
        let mut samples = signal.samples()[start..true_end].to_vec();
        samples.resize(seg_len, 0.0);
        segments.push((
            TimeInterval::new(start as f64 / rate as f64, true_end as f64 / rate as f64)?,
            AudioSignal::new(samples, rate)?,
        ));
        if start + seg_len >= total {
            break;
        }
        start += shift;
    }
    Ok(segments)
}

/// Channel mapping for `cur` that minimizes the summed per-channel mean
/// squared error against `prev` over the shared overlap. Ties keep identity.
pub fn align_permutation(
    prev: &SeparatedSegment,
    cur: &SeparatedSegment,
    overlap_seconds: f64,
) -> Result<Perm> {
    let rate = prev.channels[0].sample_rate();
    let overlap = (overlap_seconds * rate as f64).round() as usize;
    if overlap == 0 {
        return Err(Error::invalid("alignment requires a non-empty overlap"));
    }
    let prev_len = prev.channels[0].len();
    if prev_len < overlap || cur.channels[0].len() < overlap {
        return Err(Error::invalid("segments shorter than the overlap region"));
    }

    let mse = |a: &AudioSignal, b: &AudioSignal| -> f64 {
        let tail = &a.samples()[prev_len - overlap..];
        let head = &b.samples()[..overlap];
        tail.iter()
            .zip(head)
            .map(|(&x, &y)| {
                let d = x as f64 - y as f64;
                d * d
            })
            .sum::<f64>()
            / overlap as f64
    };

    let identity =
        mse(&prev.channels[0], &cur.channels[0]) + mse(&prev.channels[1], &cur.channels[1]);
    let swapped =
        mse(&prev.channels[0], &cur.channels[1]) + mse(&prev.channels[1], &cur.channels[0]);
    Ok(if swapped < identity {
        Perm::Swap
    } else {
        Perm::Identity
    })
}

/// Stitches separated segments into a continuous stream pair.
///
/// Permutations are resolved greedily left to right; overlap regions blend
/// the two aligned segments (linear ramp or midpoint cut per config), regions
/// covered by a single segment are copied verbatim, and the final segment's
/// zero padding is stripped so the output length equals the recording length.
pub fn stitch(segments: &[SeparatedSegment], cfg: &CssConfig) -> Result<(StreamPair, Vec<Perm>)> {
    cfg.validate()?;
    if segments.is_empty() {
        return Err(Error::invalid("cannot stitch an empty segment list"));
    }
    let rate = segments[0].channels[0].sample_rate();
    let shift = (cfg.segment_shift * rate as f64).round() as usize;
    for (k, seg) in segments.iter().enumerate() {
        if seg.segment_index != k {
            return Err(Error::invalid("segment list is not contiguous"));
        }
        let expect_start = (k * shift) as f64 / rate as f64;
        if (seg.interval.start() - expect_start).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "segment {k} starts at {} instead of {expect_start}",
                seg.interval.start()
            )));
        }
        if seg.channels[0].len() != seg.channels[1].len() {
            return Err(Error::invalid("segment channels differ in length"));
        }
    }

    let total = (segments.last().unwrap().interval.end() * rate as f64).round() as usize;
    let mut out = [vec![0.0f32; total], vec![0.0f32; total]];

    let mut perms: Vec<Perm> = Vec::with_capacity(segments.len());
    let mut prev_aligned: Option<SeparatedSegment> = None;
    for seg in segments {
        // Aligning against the already-aligned predecessor makes the step
        // permutation the segment's absolute orientation.
        let orientation = match &prev_aligned {
            None => Perm::Identity,
            Some(prev) => {
                let overlap_start = seg.interval.start();
                let overlap_end = prev.interval.end().min(seg.interval.end());
                align_permutation(prev, seg, overlap_end - overlap_start)?
            }
        };
        let aligned = SeparatedSegment {
            segment_index: seg.segment_index,
            interval: seg.interval,
            channels: [
                seg.channels[orientation.apply(0)].clone(),
                seg.channels[orientation.apply(1)].clone(),
            ],
        };

        let seg_start = (seg.interval.start() * rate as f64).round() as usize;
        let true_len = ((seg.interval.end() - seg.interval.start()) * rate as f64).round() as usize;
        let blend_end = match &prev_aligned {
            Some(prev) => ((prev.interval.end().min(seg.interval.end())
                - seg.interval.start())
                * rate as f64)
                .round() as usize,
            None => 0,
        };
        for ch in 0..2 {
            let samples = aligned.channels[ch].samples();
            for i in 0..true_len {
                let dst = seg_start + i;
                if dst >= total {
                    break;
                }
                if i < blend_end {
                    let alpha = match cfg.crossfade {
                        CrossfadeMode::Linear => {
                            if blend_end > 1 {
                                i as f32 / (blend_end - 1) as f32
                            } else {
                                1.0
                            }
                        }
                        CrossfadeMode::MidpointCut => {
                            if i * 2 >= blend_end {
                                1.0
                            } else {
                                0.0
                            }
                        }
                    };
                    // prev + alpha * (cur - prev): exact when contents match.
                    let prev_val = out[ch][dst];
                    out[ch][dst] = prev_val + alpha * (samples[i] - prev_val);
                } else {
                    out[ch][dst] = samples[i];
                }
            }
        }
        perms.push(orientation);
        prev_aligned = Some(aligned);
    }

    let [s0, s1] = out;
    Ok((
        StreamPair {
            streams: [AudioSignal::new(s0, rate)?, AudioSignal::new(s1, rate)?],
        },
        perms,
    ))
}

/// Detailed CSS output: the stitched streams plus the channel orientation
/// applied to every segment (needed to trace oracle metadata through the
/// stitcher).
#[derive(Debug, Clone)]
pub struct CssOutput {
    pub streams: StreamPair,
    pub segment_perms: Vec<Perm>,
    pub segment_intervals: Vec<TimeInterval>,
}

/// Segment, separate and stitch a whole recording.
pub fn run_css(signal: &AudioSignal, sep: &dyn Separator, cfg: &CssConfig) -> Result<StreamPair> {
    Ok(run_css_detailed(signal, sep, cfg)?.streams)
}

pub fn run_css_detailed(
    signal: &AudioSignal,
    sep: &dyn Separator,
    cfg: &CssConfig,
) -> Result<CssOutput> {
    let pieces = segment_uniform(signal, cfg)?;
    let mut segments = Vec::with_capacity(pieces.len());
    for (k, (interval, audio)) in pieces.iter().enumerate() {
        let channels = sep.separate(k, *interval, audio)?;
        if channels[0].len() != audio.len() || channels[1].len() != audio.len() {
            return Err(Error::invalid(format!(
                "separator changed the sample count of segment {k}"
            )));
        }
        segments.push(SeparatedSegment {
            segment_index: k,
            interval: *interval,
            channels,
        });
    }
    let (pair, perms) = stitch(&segments, cfg)?;
    debug_assert_eq!(pair.streams[0].len(), signal.len());
    Ok(CssOutput {
        streams: pair,
        segment_perms: perms,
        segment_intervals: pieces.into_iter().map(|(iv, _)| iv).collect(),
    })
}

/// Separator that performs no separation: channel 0 is the input, channel 1
/// silence. Baseline for runs without a separation front-end.
pub struct PassthroughSeparator;

impl Separator for PassthroughSeparator {
    fn separate(
        &self,
        _segment_index: usize,
        _interval: TimeInterval,
        segment: &AudioSignal,
    ) -> Result<[AudioSignal; 2]> {
        Ok([
            segment.clone(),
            AudioSignal::silence(segment.len(), segment.sample_rate())?,
        ])
    }
}

/// Greedy utterance-to-channel packing by start time.
///
/// Each utterance takes a channel that is free for its whole interval,
/// preferring the channel its speaker used last. Fails when more than two
/// utterances overlap at some instant.
pub fn channel_packing(truth: &MeetingTruth) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..truth.utterances.len()).collect();
    order.sort_by(|&a, &b| {
        truth.utterances[a]
            .interval
            .start()
            .partial_cmp(&truth.utterances[b].interval.start())
            .unwrap()
    });

    let mut packing = vec![0usize; truth.utterances.len()];
    let mut channel_busy_until = [0.0f64; 2];
    let mut last_channel: std::collections::HashMap<String, usize> = Default::default();
    for &i in &order {
        let utt = &truth.utterances[i];
        let start = utt.interval.start();
        let free: Vec<usize> = (0..2)
            .filter(|&c| channel_busy_until[c] <= start + 1e-9)
            .collect();
        if free.is_empty() {
            return Err(Error::Infeasible(format!(
                "more than two simultaneous speakers around t={start:.2}"
            )));
        }
        let preferred = last_channel.get(&utt.speaker).copied();
        let channel = preferred.filter(|c| free.contains(c)).unwrap_or(free[0]);
        packing[i] = channel;
        channel_busy_until[channel] = utt.interval.end();
        last_channel.insert(utt.speaker.clone(), channel);
    }
    Ok(packing)
}

/// Oracle separator: slices the ground-truth per-speaker sources into two
/// channels according to the greedy packing. The first segment is emitted in
/// packing order; later segments come out in a pseudo-random order so the
/// stitcher has real permutations to resolve.
pub struct OracleSeparator {
    sources: Vec<AudioSignal>,
    utterances: Vec<(TimeInterval, usize, usize)>, // (interval, speaker index, channel)
}

impl OracleSeparator {
    pub fn new(truth: &MeetingTruth) -> Result<Self> {
        let packing = channel_packing(truth)?;
        let speakers = truth.speaker_order();
        let utterances = truth
            .utterances
            .iter()
            .zip(&packing)
            .map(|(utt, &ch)| {
                let spk = speakers
                    .iter()
                    .position(|s| *s == utt.speaker)
                    .expect("utterance speaker present in speaker order");
                (utt.interval, spk, ch)
            })
            .collect();
        Ok(OracleSeparator {
            sources: truth.sources.clone(),
            utterances,
        })
    }

    /// Packing-order channel content of one segment.
    fn channel_content(&self, interval: TimeInterval, len: usize, rate: u32) -> [Vec<f32>; 2] {
        let mut out = [vec![0.0f32; len], vec![0.0f32; len]];
        let seg_start = (interval.start() * rate as f64).round() as usize;
        for (utt_iv, spk, ch) in &self.utterances {
            let overlap_start = utt_iv.start().max(interval.start());
            let overlap_end = utt_iv.end().min(interval.end());
            if overlap_end <= overlap_start {
                continue;
            }
            let src = self.sources[*spk].samples();
            let a = (overlap_start * rate as f64).round() as usize;
            let b = ((overlap_end * rate as f64).round() as usize).min(src.len());
            for i in a..b {
                let dst = i - seg_start;
                if dst < len {
                    out[*ch][dst] = src[i];
                }
            }
        }
        out
    }
}

impl OracleSeparator {
    /// Emission swap for a segment: the first segment anchors the global
    /// orientation, later ones come out pseudo-randomly permuted.
    fn emission_swap(segment_index: usize) -> bool {
        segment_index > 0 && splitmix64(segment_index as u64) & 1 == 1
    }

    /// Final stream index of every utterance after stitching: the emission
    /// swap composed with the orientation the stitcher applied to the
    /// segment containing the utterance's midpoint.
    pub fn effective_channels(&self, css: &CssOutput) -> Vec<usize> {
        self.utterances
            .iter()
            .map(|(iv, _, packed)| {
                let mid = iv.midpoint();
                let k = css
                    .segment_intervals
                    .iter()
                    .position(|seg| seg.contains(mid))
                    .unwrap_or(css.segment_intervals.len().saturating_sub(1));
                let raw = if Self::emission_swap(k) {
                    1 - packed
                } else {
                    *packed
                };
                match css.segment_perms.get(k) {
                    Some(perm) => perm.apply(raw),
                    None => raw,
                }
            })
            .collect()
    }
}

impl Separator for OracleSeparator {
    fn separate(
        &self,
        segment_index: usize,
        interval: TimeInterval,
        segment: &AudioSignal,
    ) -> Result<[AudioSignal; 2]> {
        let rate = segment.sample_rate();
        let [c0, c1] = self.channel_content(interval, segment.len(), rate);
        let (first, second) = if Self::emission_swap(segment_index) {
            (c1, c0)
        } else {
            (c0, c1)
        };
        Ok([
            AudioSignal::new(first, rate)?,
            AudioSignal::new(second, rate)?,
        ])
    }
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(len: usize, freq: f64, amp: f32, rate: u32) -> Vec<f32> {
        (0..len)
            .map(|n| {
                amp * (2.0 * std::f64::consts::PI * freq * n as f64 / rate as f64).sin() as f32
            })
            .collect()
    }

    fn signal(samples: Vec<f32>) -> AudioSignal {
        AudioSignal::new(samples, 16_000).unwrap()
    }

    #[test]
    fn segmentation_matches_default_grid() {
        // 10 s at 4 s length / 2 s shift -> [0,4],[2,6],[4,8],[6,10].
        let sig = AudioSignal::silence(160_000, 16_000).unwrap();
        let segs = segment_uniform(&sig, &CssConfig::default()).unwrap();
        let intervals: Vec<(f64, f64)> =
            segs.iter().map(|(iv, _)| (iv.start(), iv.end())).collect();
        assert_eq!(
            intervals,
            vec![(0.0, 4.0), (2.0, 6.0), (4.0, 8.0), (6.0, 10.0)]
        );
        assert!(segs.iter().all(|(_, s)| s.len() == 64_000));
    }

    #[test]
    fn short_signal_single_padded_segment() {
        let sig = AudioSignal::silence(48_000, 16_000).unwrap(); // 3 s
        let segs = segment_uniform(&sig, &CssConfig::default()).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].0.end(), 3.0);
        assert_eq!(segs[0].1.len(), 64_000);
    }

    #[test]
    fn exact_fit_single_segment() {
        let sig = AudioSignal::silence(64_000, 16_000).unwrap(); // 4 s
        let segs = segment_uniform(&sig, &CssConfig::default()).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].0.end(), 4.0);
    }

    #[test]
    fn empty_signal_rejected() {
        let sig = AudioSignal::new(vec![], 16_000).unwrap();
        assert!(segment_uniform(&sig, &CssConfig::default()).is_err());
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = CssConfig {
            segment_length: 2.0,
            segment_shift: 2.0,
            crossfade: CrossfadeMode::Linear,
        };
        assert!(cfg.validate().is_err());
    }

    fn seg(index: usize, start: f64, ch0: Vec<f32>, ch1: Vec<f32>) -> SeparatedSegment {
        let end = start + ch0.len() as f64 / 16_000.0;
        SeparatedSegment {
            segment_index: index,
            interval: TimeInterval::new(start, end).unwrap(),
            channels: [signal(ch0), signal(ch1)],
        }
    }

    #[test]
    fn alignment_detects_order() {
        let a = tone(96_000, 440.0, 0.5, 16_000);
        let b = tone(96_000, 1000.0, 0.5, 16_000);
        let prev = seg(0, 0.0, a[..64_000].to_vec(), b[..64_000].to_vec());
        let same = seg(1, 2.0, a[32_000..].to_vec(), b[32_000..].to_vec());
        assert_eq!(align_permutation(&prev, &same, 2.0).unwrap(), Perm::Identity);

        let swapped = seg(1, 2.0, b[32_000..].to_vec(), a[32_000..].to_vec());
        assert_eq!(align_permutation(&prev, &swapped, 2.0).unwrap(), Perm::Swap);
    }

    #[test]
    fn alignment_tie_breaks_to_identity() {
        let prev = seg(0, 0.0, vec![0.0; 64_000], vec![0.0; 64_000]);
        let cur = seg(1, 2.0, vec![0.0; 64_000], vec![0.0; 64_000]);
        assert_eq!(align_permutation(&prev, &cur, 2.0).unwrap(), Perm::Identity);
        assert!(align_permutation(&prev, &cur, 0.0).is_err());
    }

    #[test]
    fn single_segment_stitches_verbatim() {
        let a = tone(64_000, 440.0, 0.5, 16_000);
        let b = tone(64_000, 1000.0, 0.5, 16_000);
        let (pair, perms) =
            stitch(&[seg(0, 0.0, a.clone(), b.clone())], &CssConfig::default()).unwrap();
        assert_eq!(pair.streams[0].samples(), a.as_slice());
        assert_eq!(pair.streams[1].samples(), b.as_slice());
        assert_eq!(perms, vec![Perm::Identity]);
    }

    #[test]
    fn all_silent_stitches_to_silence() {
        let segs: Vec<SeparatedSegment> = (0..3)
            .map(|k| seg(k, 2.0 * k as f64, vec![0.0; 64_000], vec![0.0; 64_000]))
            .collect();
        let (pair, _) = stitch(&segs, &CssConfig::default()).unwrap();
        assert_eq!(pair.streams[0].len(), 128_000);
        assert!(pair.streams[0].samples().iter().all(|&s| s == 0.0));
        assert!(pair.streams[1].samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn non_contiguous_rejected() {
        let a = seg(0, 0.0, vec![0.1; 64_000], vec![0.2; 64_000]);
        let c = seg(2, 4.0, vec![0.1; 64_000], vec![0.2; 64_000]);
        assert!(stitch(&[a, c], &CssConfig::default()).is_err());
    }

    /// Random per-segment swaps of a consistent pair must be undone by
    /// stitching, up to one global swap, exactly outside the overlaps.
    #[test]
    fn permutation_recovery_round_trip() {
        let rate = 16_000;
        let total = 10 * rate as usize;
        let s0 = tone(total, 523.0, 0.4, rate);
        let s1 = tone(total, 1319.0, 0.4, rate);
        let cfg = CssConfig::default();

        for trial in 0..20u64 {
            let mut segments = Vec::new();
            let mut k = 0usize;
            let mut start = 0usize;
            loop {
                let end = (start + 64_000).min(total);
                let mut c0 = s0[start..end].to_vec();
                let mut c1 = s1[start..end].to_vec();
                c0.resize(64_000, 0.0);
                c1.resize(64_000, 0.0);
                if splitmix64(trial * 1000 + k as u64) & 1 == 1 {
                    std::mem::swap(&mut c0, &mut c1);
                }
                segments.push(seg(k, start as f64 / rate as f64, c0, c1));
                if start + 64_000 >= total {
                    break;
                }
                start += 32_000;
                k += 1;
            }
            let (pair, _) = stitch(&segments, &cfg).unwrap();
            assert_eq!(pair.streams[0].len(), total);

            let direct: f32 = pair.streams[0]
                .samples()
                .iter()
                .zip(&s0)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f32::max);
            let crossed: f32 = pair.streams[0]
                .samples()
                .iter()
                .zip(&s1)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f32::max);
            assert!(
                direct < 1e-6 || crossed < 1e-6,
                "trial {trial}: max deviation {direct} / {crossed}"
            );
        }
    }

    #[test]
    fn passthrough_preserves_input() {
        let input = signal(tone(80_000, 440.0, 0.3, 16_000)); // 5 s
        let pair = run_css(&input, &PassthroughSeparator, &CssConfig::default()).unwrap();
        assert_eq!(pair.streams[0].len(), input.len());
        // Cross-fades of identical content are exact.
        assert_eq!(pair.streams[0].samples(), input.samples());
        assert!(pair.streams[1].samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn silent_recording_gives_silent_pair() {
        let input = AudioSignal::silence(80_000, 16_000).unwrap();
        let pair = run_css(&input, &PassthroughSeparator, &CssConfig::default()).unwrap();
        assert!(pair.streams[0].samples().iter().all(|&s| s == 0.0));
        assert!(pair.streams[1].samples().iter().all(|&s| s == 0.0));
    }
}
