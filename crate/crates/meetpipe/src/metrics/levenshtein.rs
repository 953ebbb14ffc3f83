use super::WerStats;

/// Minimal-edit word alignment with unit costs.
///
/// The backtrace resolves ties preferring substitution, then deletion, then
/// insertion, so the reported counts are deterministic even when several
/// alignments share the minimal cost.
pub fn levenshtein(reference: &[String], hypothesis: &[String]) -> WerStats {
    let m = reference.len();
    let n = hypothesis.len();
    let mut d = vec![0u32; (m + 1) * (n + 1)];
    let idx = |i: usize, j: usize| i * (n + 1) + j;

    for i in 0..=m {
        d[idx(i, 0)] = i as u32;
    }
    for j in 0..=n {
        d[idx(0, j)] = j as u32;
    }
    for i in 1..=m {
        for j in 1..=n {
            let sub = d[idx(i - 1, j - 1)] + u32::from(reference[i - 1] != hypothesis[j - 1]);
            let del = d[idx(i - 1, j)] + 1;
            let ins = d[idx(i, j - 1)] + 1;
            d[idx(i, j)] = sub.min(del).min(ins);
        }
    }

    let (mut i, mut j) = (m, n);
    let (mut subs, mut ins, mut dels) = (0, 0, 0);
    while i > 0 || j > 0 {
        let cur = d[idx(i, j)];
        if i > 0 && j > 0 {
            let cost = u32::from(reference[i - 1] != hypothesis[j - 1]);
            if cur == d[idx(i - 1, j - 1)] + cost {
                subs += cost as usize;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && cur == d[idx(i - 1, j)] + 1 {
            dels += 1;
            i -= 1;
        } else {
            ins += 1;
            j -= 1;
        }
    }

    debug_assert_eq!((subs + ins + dels) as u32, d[idx(m, n)]);
    WerStats::from_counts(subs, ins, dels, m)
}

/// Edit distance only, without the backtrace.
pub fn edit_distance(reference: &[String], hypothesis: &[String]) -> u32 {
    let (short, long) = if reference.len() <= hypothesis.len() {
        (reference, hypothesis)
    } else {
        (hypothesis, reference)
    };
    let mut prev: Vec<u32> = (0..=short.len() as u32).collect();
    let mut cur = vec![0u32; short.len() + 1];
    for (i, lw) in long.iter().enumerate() {
        cur[0] = i as u32 + 1;
        for (j, sw) in short.iter().enumerate() {
            let sub = prev[j] + u32::from(lw != sw);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn identical_sequences() {
        let stats = levenshtein(&words("a b c"), &words("a b c"));
        assert_eq!(stats.errors(), 0);
        assert_eq!(stats.wer, 0.0);
    }

    #[test]
    fn single_substitution() {
        let stats = levenshtein(&words("a b c"), &words("a x c"));
        assert_eq!(stats.substitutions, 1);
        assert_eq!(stats.insertions, 0);
        assert_eq!(stats.deletions, 0);
        assert!((stats.wer - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_hypothesis_is_all_deletions() {
        let stats = levenshtein(&words("a b"), &[]);
        assert_eq!(stats.deletions, 2);
        assert_eq!(stats.wer, 1.0);
    }

    #[test]
    fn counts_match_distance() {
        let r = words("the quick brown fox jumps");
        let h = words("the quack brown box fox");
        let stats = levenshtein(&r, &h);
        assert_eq!(stats.errors() as u32, edit_distance(&r, &h));
    }
}
