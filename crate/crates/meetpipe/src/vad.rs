//! Energy-based voice activity detection with morphological smoothing.
//!
//! Framewise energy is thresholded relative to the recording's loudest frame,
//! short gaps are closed (dilation followed by erosion), and the surviving
//! runs are dilated outward so that speech activity is deliberately
//! over-estimated at the boundaries.

use crate::error::{Error, Result};
use crate::types::{ActivityMask, AudioSignal, SpeakerSegment};

const ENERGY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VadConfig {
    pub frame_length: f64,
    pub frame_hop: f64,
    /// Frames are active when within this many dB of the loudest frame.
    pub threshold_db_below_max: f64,
    /// Gaps up to this long between active runs are filled.
    pub closing_gap: f64,
    /// Each run is extended this far on both sides afterwards.
    pub boundary_extension: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        VadConfig {
            frame_length: 0.025,
            frame_hop: 0.010,
            threshold_db_below_max: 40.0,
            closing_gap: 0.5,
            boundary_extension: 0.4,
        }
    }
}

impl VadConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.frame_length,
            self.frame_hop,
            self.threshold_db_below_max,
            self.closing_gap,
            self.boundary_extension,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("vad parameters must be positive"));
        }
        if self.frame_hop > self.frame_length {
            return Err(Error::invalid("vad frame hop must not exceed frame length"));
        }
        Ok(())
    }
}

/// Per-frame energy in dB: `10*log10(sum of squared samples + eps)`.
pub fn frame_energy(signal: &AudioSignal, cfg: &VadConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if signal.is_empty() {
        return Err(Error::invalid("frame_energy requires a non-empty signal"));
    }
    let rate = signal.sample_rate() as f64;
    let frame_len = ((cfg.frame_length * rate).round() as usize).max(1);
    let hop = ((cfg.frame_hop * rate).round() as usize).max(1);
    let n = signal.len();
    let count = if n <= frame_len {
        1
    } else {
        (n - frame_len).div_ceil(hop) + 1
    };
    let samples = signal.samples();
    let mut energies = Vec::with_capacity(count);
    for i in 0..count {
        let start = i * hop;
        let end = (start + frame_len).min(n);
        let sum: f64 = samples[start.min(n)..end]
            .iter()
            .map(|&s| (s as f64) * (s as f64))
            .sum();
        energies.push(10.0 * (sum + ENERGY_EPS).log10());
    }
    Ok(energies)
}

/// Frame is active iff its energy is above `max - threshold_db_below_max`.
/// The loudest frame is always active, so the mask is never empty.
pub fn threshold_activity(energies: &[f64], cfg: &VadConfig) -> Result<ActivityMask> {
    if energies.is_empty() {
        return Err(Error::invalid("threshold_activity requires energies"));
    }
    let max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = max - cfg.threshold_db_below_max;
    let frames = energies.iter().map(|&e| e > floor).collect();
    ActivityMask::new(cfg.frame_hop, frames)
}

/// Morphological closing followed by boundary dilation.
///
/// Closing fills interior gaps of at most `closing_gap` seconds; the
/// extension then grows every remaining run by `boundary_extension` seconds
/// on each side, clipped to the recording. The output active set is always a
/// superset of the input active set.
pub fn morph_close_and_extend(mask: &ActivityMask, cfg: &VadConfig) -> Result<ActivityMask> {
    let closed = morph_close(mask, cfg.closing_gap)?;
    let ext_frames = frames_for(cfg.boundary_extension, closed.frame_hop());
    let n = closed.len();
    let mut frames = vec![false; n];
    for (a, b) in closed.active_runs() {
        let start = a.saturating_sub(ext_frames);
        let end = (b + ext_frames).min(n.saturating_sub(1));
        for f in frames.iter_mut().take(end + 1).skip(start) {
            *f = true;
        }
    }
    ActivityMask::new(closed.frame_hop(), frames)
}

/// Closing alone: fills gaps of at most `closing_gap` seconds between runs.
pub fn morph_close(mask: &ActivityMask, closing_gap: f64) -> Result<ActivityMask> {
    if !(closing_gap > 0.0) {
        return Err(Error::invalid("closing gap must be positive"));
    }
    let gap_frames = frames_for(closing_gap, mask.frame_hop());
    let runs = mask.active_runs();
    let mut frames = mask.frames().to_vec();
    for pair in runs.windows(2) {
        let gap = pair[1].0 - pair[0].1 - 1;
        if gap <= gap_frames {
            for f in frames.iter_mut().take(pair[1].0).skip(pair[0].1 + 1) {
                *f = true;
            }
        }
    }
    ActivityMask::new(mask.frame_hop(), frames)
}

fn frames_for(seconds: f64, hop: f64) -> usize {
    (seconds / hop + 1e-9).floor() as usize
}

/// Maximal active runs as unlabeled segments on the given stream.
pub fn mask_to_segments(mask: &ActivityMask, channel: usize) -> Result<Vec<SpeakerSegment>> {
    mask.active_runs()
        .into_iter()
        .map(|run| SpeakerSegment::new(channel, mask.run_interval(run)?, None))
        .collect()
}

/// Full VAD pass over one stream: energy, threshold, smoothing, segments.
pub fn detect_segments(
    signal: &AudioSignal,
    channel: usize,
    cfg: &VadConfig,
) -> Result<Vec<SpeakerSegment>> {
    let energies = frame_energy(signal, cfg)?;
    // An all-silent stream has every frame at the epsilon floor; thresholding
    // would mark it all active, so bail out to no segments instead.
    let max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= 10.0 * ENERGY_EPS.log10() + 1e-9 {
        return Ok(Vec::new());
    }
    let mask = threshold_activity(&energies, cfg)?;
    let smoothed = morph_close_and_extend(&mask, cfg)?;
    mask_to_segments(&smoothed, channel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::TimeInterval;
    use proptest::prelude::*;

    fn cfg() -> VadConfig {
        VadConfig::default()
    }

    fn iv(a: f64, b: f64) -> TimeInterval {
        TimeInterval::new(a, b).unwrap()
    }

    #[test]
    fn energy_of_silence_hits_floor() {
        let signal = AudioSignal::silence(400, 16_000).unwrap();
        let energies = frame_energy(&signal, &cfg()).unwrap();
        assert_eq!(energies.len(), 1);
        assert!((energies[0] + 120.0).abs() < 1e-9);
    }

    #[test]
    fn energy_of_unit_frame() {
        // 25 ms at 16 kHz = 400 samples of 1.0 -> 10*log10(400) = 26.02 dB.
        let signal = AudioSignal::new(vec![1.0; 400], 16_000).unwrap();
        let energies = frame_energy(&signal, &cfg()).unwrap();
        assert!((energies[0] - 26.0206).abs() < 1e-3);
    }

    #[test]
    fn doubling_amplitude_adds_six_db() {
        let one = AudioSignal::new(vec![0.25; 400], 16_000).unwrap();
        let two = AudioSignal::new(vec![0.5; 400], 16_000).unwrap();
        let e1 = frame_energy(&one, &cfg()).unwrap()[0];
        let e2 = frame_energy(&two, &cfg()).unwrap()[0];
        assert!((e2 - e1 - 6.0206).abs() < 1e-3);
    }

    #[test]
    fn frame_count_formula() {
        // 1 s at 16 kHz: (16000-400)/160 = 97.5 -> ceil + 1 = 99 frames.
        let signal = AudioSignal::silence(16_000, 16_000).unwrap();
        let energies = frame_energy(&signal, &cfg()).unwrap();
        assert_eq!(energies.len(), 99);
        assert!(frame_energy(&AudioSignal::silence(0, 16_000).unwrap(), &cfg()).is_err());
    }

    #[test]
    fn threshold_keeps_loudest_frame() {
        let energies = vec![-90.0, -10.0, -90.0];
        let mask = threshold_activity(&energies, &cfg()).unwrap();
        assert_eq!(mask.frames(), &[false, true, false]);

        let flat = vec![-50.0; 4];
        let mask = threshold_activity(&flat, &cfg()).unwrap();
        assert!(mask.frames().iter().all(|&f| f));
    }

    #[test]
    fn close_and_extend_example() {
        // Runs [1.0,2.0] and [2.3,3.0]: the 0.3 s gap closes, then both ends
        // extend by 0.4 s -> [0.6, 3.4].
        let mask =
            ActivityMask::from_intervals(&[iv(1.0, 2.0), iv(2.3, 3.0)], 0.01, 400).unwrap();
        let out = morph_close_and_extend(&mask, &cfg()).unwrap();
        let runs = out.active_runs();
        assert_eq!(runs.len(), 1);
        let interval = out.run_interval(runs[0]).unwrap();
        assert!((interval.start() - 0.6).abs() < 1e-9);
        assert!((interval.end() - 3.4).abs() < 1e-9);
    }

    #[test]
    fn extend_clips_at_recording_start() {
        let mask = ActivityMask::from_intervals(&[iv(0.0, 1.0)], 0.01, 140).unwrap();
        let out = morph_close_and_extend(&mask, &cfg()).unwrap();
        let interval = out.run_interval(out.active_runs()[0]).unwrap();
        assert_eq!(interval.start(), 0.0);
        assert!((interval.end() - 1.4).abs() < 1e-9);
    }

    #[test]
    fn empty_mask_stays_empty() {
        let mask = ActivityMask::new(0.01, vec![false; 50]).unwrap();
        let out = morph_close_and_extend(&mask, &cfg()).unwrap();
        assert!(out.active_runs().is_empty());
        assert!(mask_to_segments(&out, 0).unwrap().is_empty());
    }

    #[test]
    fn segments_from_mask() {
        let mask = ActivityMask::new(0.01, vec![true; 30]).unwrap();
        let segs = mask_to_segments(&mask, 1).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].channel, 1);
        assert!((segs[0].interval.end() - 0.3).abs() < 1e-9);
    }

    #[test]
    fn silent_recording_yields_no_segments() {
        let signal = AudioSignal::silence(16_000, 16_000).unwrap();
        assert!(detect_segments(&signal, 0, &cfg()).unwrap().is_empty());
    }

    fn random_mask(seed: u64, len: usize) -> ActivityMask {
        let mut state = seed.max(1);
        let frames: Vec<bool> = (0..len)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                state & 3 == 0
            })
            .collect();
        ActivityMask::new(0.01, frames).unwrap()
    }

    #[test]
    fn smoothing_properties_on_random_masks() {
        for seed in 1..=300u64 {
            let mask = random_mask(seed, 200);
            let closed = morph_close(&mask, 0.5).unwrap();
            let twice = morph_close(&closed, 0.5).unwrap();
            assert_eq!(closed, twice, "closing must be idempotent");

            let out = morph_close_and_extend(&mask, &cfg()).unwrap();
            for (i, (&before, &after)) in
                mask.frames().iter().zip(out.frames()).enumerate()
            {
                assert!(!before || after, "frame {i} deactivated (seed {seed})");
            }

            // Output run boundaries sit at most 0.4 s (40 frames) outside a
            // closed run's boundaries.
            let closed_runs = closed.active_runs();
            for (a, b) in out.active_runs() {
                assert!(closed_runs
                    .iter()
                    .any(|&(ca, _)| ca >= a && ca - a <= 40));
                assert!(closed_runs.iter().any(|&(_, cb)| b >= cb && b - cb <= 40));
            }
        }
    }

    proptest! {
        #[test]
        fn extension_is_superset(frames in proptest::collection::vec(any::<bool>(), 0..120)) {
            let mask = ActivityMask::new(0.01, frames).unwrap();
            let out = morph_close_and_extend(&mask, &cfg()).unwrap();
            for (before, after) in mask.frames().iter().zip(out.frames()) {
                prop_assert!(!before || *after);
            }
        }
    }
}
