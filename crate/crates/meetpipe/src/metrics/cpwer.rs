use std::collections::BTreeMap;

use super::hungarian::hungarian;
use super::levenshtein::{edit_distance, levenshtein};
use super::WerStats;

#[derive(Debug, Clone)]
pub struct CpWerResult {
    pub stats: WerStats,
    /// Optimal (reference speaker, hypothesis label) pairs.
    pub mapping: Vec<(String, String)>,
}

/// Concatenated minimum-permutation WER.
///
/// Inputs are per-speaker word sequences (each speaker's utterances already
/// concatenated in time order). The speaker spaces are unrelated: an optimal
/// one-to-one mapping between them is found by assignment on the edit-error
/// matrix. Unmatched reference speakers contribute all their words as
/// deletions, unmatched hypothesis labels all theirs as insertions.
pub fn cp_wer(
    ref_by_speaker: &BTreeMap<String, Vec<String>>,
    hyp_by_label: &BTreeMap<String, Vec<String>>,
) -> CpWerResult {
    let ref_names: Vec<&String> = ref_by_speaker.keys().collect();
    let hyp_names: Vec<&String> = hyp_by_label.keys().collect();
    let n = ref_names.len().max(hyp_names.len());
    let total_ref: usize = ref_by_speaker.values().map(Vec::len).sum();
    if n == 0 {
        return CpWerResult {
            stats: WerStats::zero(),
            mapping: Vec::new(),
        };
    }

    let empty: Vec<String> = Vec::new();
    let ref_words = |i: usize| -> &Vec<String> {
        ref_names
            .get(i)
            .map_or(&empty, |name| &ref_by_speaker[*name])
    };
    let hyp_words = |j: usize| -> &Vec<String> {
        hyp_names.get(j).map_or(&empty, |name| &hyp_by_label[*name])
    };

    // Pad to square with empty speakers; an empty side degenerates into pure
    // deletions or insertions, which encodes the dummy costs directly.
    let costs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| edit_distance(ref_words(i), hyp_words(j)) as f64)
                .collect()
        })
        .collect();
    let (assignment, _) = hungarian(&costs);

    let mut subs = 0;
    let mut ins = 0;
    let mut dels = 0;
    let mut mapping = Vec::new();
    for (i, j) in assignment.iter().enumerate() {
        let j = j.expect("square matrix yields a complete assignment");
        let pair = levenshtein(ref_words(i), hyp_words(j));
        subs += pair.substitutions;
        ins += pair.insertions;
        dels += pair.deletions;
        if i < ref_names.len() && j < hyp_names.len() {
            mapping.push((ref_names[i].clone(), hyp_names[j].clone()));
        }
    }
    CpWerResult {
        stats: WerStats::from_counts(subs, ins, dels, total_ref),
        mapping,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    fn side(entries: &[(&str, &str)]) -> BTreeMap<String, Vec<String>> {
        entries
            .iter()
            .map(|(k, v)| (k.to_string(), words(v)))
            .collect()
    }

    /// Factorial oracle: try every injection of the smaller side into the
    /// larger one, with leftovers scored as deletions or insertions.
    fn brute_force(
        refs: &BTreeMap<String, Vec<String>>,
        hyps: &BTreeMap<String, Vec<String>>,
    ) -> usize {
        fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
            if items.is_empty() {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for (k, &x) in items.iter().enumerate() {
                let mut rest = items.to_vec();
                rest.remove(k);
                for mut tail in permutations(&rest) {
                    tail.insert(0, x);
                    out.push(tail);
                }
            }
            out
        }

        let r: Vec<&Vec<String>> = refs.values().collect();
        let h: Vec<&Vec<String>> = hyps.values().collect();
        let n = r.len().max(h.len());
        let empty = Vec::new();
        let mut best = usize::MAX;
        for perm in permutations(&(0..n).collect::<Vec<_>>()) {
            let mut total = 0usize;
            for (i, &j) in perm.iter().enumerate() {
                let rw = if i < r.len() { r[i] } else { &empty };
                let hw = if j < h.len() { h[j] } else { &empty };
                total += edit_distance(rw, hw) as usize;
            }
            best = best.min(total);
        }
        best
    }

    #[test]
    fn perfect_match_zero() {
        let refs = side(&[("alice", "a b c"), ("bob", "d e")]);
        let hyps = side(&[("spk0", "a b c"), ("spk1", "d e")]);
        let result = cp_wer(&refs, &hyps);
        assert_eq!(result.stats.errors(), 0);
        assert_eq!(result.stats.wer, 0.0);
    }

    #[test]
    fn label_permutation_absorbed() {
        let refs = side(&[("alice", "a b c"), ("bob", "d e")]);
        let hyps = side(&[("spk0", "d e"), ("spk1", "a b c")]);
        let result = cp_wer(&refs, &hyps);
        assert_eq!(result.stats.errors(), 0);
        assert!(result
            .mapping
            .contains(&("alice".to_string(), "spk1".to_string())));
    }

    #[test]
    fn unbalanced_sides() {
        // Extra hypothesis label: its words are insertions.
        let refs = side(&[("alice", "a b")]);
        let hyps = side(&[("spk0", "a b"), ("spk1", "x y z")]);
        let result = cp_wer(&refs, &hyps);
        assert_eq!(result.stats.insertions, 3);
        assert_eq!(result.stats.errors(), 3);

        // Missing hypothesis speaker: deletions.
        let refs = side(&[("alice", "a b"), ("bob", "c")]);
        let hyps = side(&[("spk0", "a b")]);
        let result = cp_wer(&refs, &hyps);
        assert_eq!(result.stats.deletions, 1);
        assert!((result.stats.wer - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_hypothesis_rate_one() {
        let refs = side(&[("alice", "a b"), ("bob", "c d")]);
        let result = cp_wer(&refs, &BTreeMap::new());
        assert_eq!(result.stats.wer, 1.0);
    }

    #[test]
    fn matches_factorial_brute_force() {
        let vocab = ["a", "b", "c", "d"];
        let mut state = 0x51ed270b81u64;
        let mut next = move |modulus: usize| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 19) as usize % modulus
        };
        for trial in 0..200 {
            let n_ref = 1 + next(5);
            let n_hyp = 1 + next(5);
            let refs: BTreeMap<String, Vec<String>> = (0..n_ref)
                .map(|i| {
                    let len = next(6);
                    (
                        format!("ref{i}"),
                        (0..len).map(|_| vocab[next(4)].to_string()).collect(),
                    )
                })
                .collect();
            let hyps: BTreeMap<String, Vec<String>> = (0..n_hyp)
                .map(|i| {
                    let len = next(6);
                    (
                        format!("hyp{i}"),
                        (0..len).map(|_| vocab[next(4)].to_string()).collect(),
                    )
                })
                .collect();
            let result = cp_wer(&refs, &hyps);
            assert_eq!(
                result.stats.errors(),
                brute_force(&refs, &hyps),
                "trial {trial} disagrees with brute force"
            );
        }
    }
}
