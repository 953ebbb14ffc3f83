use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::hungarian::hungarian;
use crate::error::{Error, Result};
use crate::types::{SpeakerSegment, TimeInterval};

/// Diarization error components in seconds plus the derived rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerStats {
    pub missed_speech: f64,
    pub false_alarm: f64,
    pub speaker_confusion: f64,
    pub scored_speech: f64,
    pub der: f64,
}

impl DerStats {
    fn finish(missed: f64, fa: f64, confusion: f64, scored: f64) -> Self {
        let der = if scored > 0.0 {
            (missed + fa + confusion) / scored
        } else if fa > 0.0 {
            1.0
        } else {
            0.0
        };
        DerStats {
            missed_speech: missed,
            false_alarm: fa,
            speaker_confusion: confusion,
            scored_speech: scored,
            der,
        }
    }

    /// Pooled stats: component times summed across meetings.
    pub fn pooled<'a>(parts: impl IntoIterator<Item = &'a DerStats>) -> Self {
        let (mut m, mut f, mut c, mut s) = (0.0, 0.0, 0.0, 0.0);
        for p in parts {
            m += p.missed_speech;
            f += p.false_alarm;
            c += p.speaker_confusion;
            s += p.scored_speech;
        }
        DerStats::finish(m, f, c, s)
    }
}

/// Diarization error rate with zero collar; overlap regions are scored.
///
/// The timeline is cut at every segment boundary; within each region the
/// active reference and hypothesis speaker sets are compared under the global
/// one-to-one speaker mapping that maximizes total attributed time.
pub fn der(reference: &[SpeakerSegment], hypothesis: &[SpeakerSegment]) -> Result<DerStats> {
    let refs = by_speaker(reference, "reference")?;
    let hyps = by_speaker(hypothesis, "hypothesis")?;
    let ref_names: Vec<&String> = refs.keys().collect();
    let hyp_names: Vec<&String> = hyps.keys().collect();

    let scored: f64 = refs
        .values()
        .flat_map(|ivs| ivs.iter().map(TimeInterval::duration))
        .sum();

    // Globally optimal speaker mapping by total overlap duration.
    let mut mapped = vec![None; ref_names.len()];
    if !ref_names.is_empty() && !hyp_names.is_empty() {
        let costs: Vec<Vec<f64>> = ref_names
            .iter()
            .map(|r| {
                hyp_names
                    .iter()
                    .map(|h| -total_overlap(&refs[*r], &hyps[*h]))
                    .collect()
            })
            .collect();
        let (assignment, _) = hungarian(&costs);
        for (i, j) in assignment.iter().enumerate() {
            mapped[i] = *j;
        }
    }

    let mut points: Vec<f64> = Vec::new();
    for ivs in refs.values().chain(hyps.values()) {
        for iv in ivs {
            points.push(iv.start());
            points.push(iv.end());
        }
    }
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup();

    let mut missed = 0.0;
    let mut fa = 0.0;
    let mut confusion = 0.0;
    for pair in points.windows(2) {
        let dur = pair[1] - pair[0];
        if dur <= 0.0 {
            continue;
        }
        let mid = 0.5 * (pair[0] + pair[1]);
        let active = |ivs: &[TimeInterval]| ivs.iter().any(|iv| iv.contains(mid));
        let ref_active: Vec<usize> = (0..ref_names.len())
            .filter(|&i| active(&refs[ref_names[i]]))
            .collect();
        let hyp_active: Vec<bool> = hyp_names.iter().map(|h| active(&hyps[*h])).collect();
        let n_ref = ref_active.len();
        let n_hyp = hyp_active.iter().filter(|&&a| a).count();
        let n_correct = ref_active
            .iter()
            .filter(|&&i| mapped[i].is_some_and(|j| hyp_active[j]))
            .count();
        missed += dur * (n_ref.saturating_sub(n_hyp)) as f64;
        fa += dur * (n_hyp.saturating_sub(n_ref)) as f64;
        confusion += dur * (n_ref.min(n_hyp) - n_correct) as f64;
    }

    Ok(DerStats::finish(missed, fa, confusion, scored))
}

/// Groups segments by speaker and merges each speaker's intervals so
/// self-overlap is not double counted.
fn by_speaker(
    segments: &[SpeakerSegment],
    side: &str,
) -> Result<BTreeMap<String, Vec<TimeInterval>>> {
    let mut map: BTreeMap<String, Vec<TimeInterval>> = BTreeMap::new();
    for seg in segments {
        let speaker = seg.speaker.as_ref().ok_or_else(|| {
            Error::invalid(format!("{side} segment without speaker label in der"))
        })?;
        map.entry(speaker.clone()).or_default().push(seg.interval);
    }
    for ivs in map.values_mut() {
        ivs.sort_by(|a, b| a.start().partial_cmp(&b.start()).unwrap());
        let mut merged: Vec<TimeInterval> = Vec::with_capacity(ivs.len());
        for iv in ivs.drain(..) {
            match merged.last_mut() {
                Some(last) if iv.start() <= last.end() => {
                    *last = TimeInterval::new(last.start(), last.end().max(iv.end()))?;
                }
                _ => merged.push(iv),
            }
        }
        *ivs = merged;
    }
    Ok(map)
}

fn total_overlap(a: &[TimeInterval], b: &[TimeInterval]) -> f64 {
    a.iter()
        .map(|x| b.iter().map(|y| x.overlap(y)).sum::<f64>())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(channel: usize, start: f64, end: f64, speaker: &str) -> SpeakerSegment {
        SpeakerSegment::new(
            channel,
            TimeInterval::new(start, end).unwrap(),
            Some(speaker.to_string()),
        )
        .unwrap()
    }

    #[test]
    fn identical_diarization_zero() {
        let segs = vec![seg(0, 0.0, 10.0, "a"), seg(1, 5.0, 15.0, "b")];
        let stats = der(&segs, &segs).unwrap();
        assert_eq!(stats.der, 0.0);
        assert_eq!(stats.scored_speech, 20.0);
    }

    #[test]
    fn empty_hypothesis_all_missed() {
        let refs = vec![seg(0, 0.0, 4.0, "a"), seg(0, 6.0, 8.0, "b")];
        let stats = der(&refs, &[]).unwrap();
        assert_eq!(stats.missed_speech, 6.0);
        assert_eq!(stats.der, 1.0);
    }

    #[test]
    fn merged_speakers_hand_worked() {
        // Two speakers [0,10] and [5,15]; hypothesis is one label over [0,15].
        // Optimal map ties at 10 s overlap either way; the unmapped speaker
        // is missed in the overlap region (5 s) and confused outside it (5 s).
        let refs = vec![seg(0, 0.0, 10.0, "a"), seg(1, 5.0, 15.0, "b")];
        let hyp = vec![seg(0, 0.0, 15.0, "x")];
        let stats = der(&refs, &hyp).unwrap();
        assert!((stats.missed_speech - 5.0).abs() < 1e-12);
        assert!((stats.speaker_confusion - 5.0).abs() < 1e-12);
        assert_eq!(stats.false_alarm, 0.0);
        assert_eq!(stats.scored_speech, 20.0);
        assert!((stats.der - 0.5).abs() < 1e-12);
    }

    #[test]
    fn false_alarm_only() {
        let refs = vec![seg(0, 0.0, 2.0, "a")];
        let hyp = vec![seg(0, 0.0, 2.0, "x"), seg(0, 4.0, 7.0, "y")];
        let stats = der(&refs, &hyp).unwrap();
        assert_eq!(stats.false_alarm, 3.0);
        assert_eq!(stats.missed_speech, 0.0);
        assert_eq!(stats.speaker_confusion, 0.0);
        assert!((stats.der - 1.5).abs() < 1e-12);
    }

    #[test]
    fn self_overlap_not_double_counted() {
        let refs = vec![seg(0, 0.0, 4.0, "a"), seg(1, 2.0, 6.0, "a")];
        let stats = der(&refs, &refs).unwrap();
        assert_eq!(stats.scored_speech, 6.0);
        assert_eq!(stats.der, 0.0);
    }

    #[test]
    fn unlabeled_segment_rejected() {
        let unlabeled =
            vec![SpeakerSegment::new(0, TimeInterval::new(0.0, 1.0).unwrap(), None).unwrap()];
        assert!(der(&unlabeled, &[]).is_err());
    }
}
