//! Optimal reference combination WER: assign every reference utterance to one
//! hypothesis stream so that the total word error over all streams is
//! minimal, with each stream's assigned utterances concatenated in start-time
//! order.
//!
//! Two exact solvers share the work: a branch-and-bound enumeration over the
//! `streams^utterances` assignment space for small two-stream instances, and
//! an alignment DP whose state tracks one position per stream plus the
//! position inside the current utterance, used everywhere else.

use super::{levenshtein, WerStats};
use crate::error::{Error, Result};

const INF: u32 = u32::MAX / 4;

/// Reference utterance as scoring tokens with its start time.
#[derive(Debug, Clone)]
pub struct RefUtterance {
    pub start: f64,
    pub words: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrcConfig {
    /// Two-stream instances with at most this many utterances are solved by
    /// enumeration; larger ones (and any stream count != 2) go to the DP.
    pub exhaustive_limit: usize,
}

impl Default for OrcConfig {
    fn default() -> Self {
        OrcConfig {
            exhaustive_limit: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OrcResult {
    pub stats: WerStats,
    /// Stream index per input utterance (caller's order).
    pub assignment: Vec<usize>,
}

pub fn orc_wer(
    refs: &[RefUtterance],
    streams: &[Vec<String>],
    cfg: &OrcConfig,
) -> Result<OrcResult> {
    if streams.is_empty() {
        return Err(Error::invalid("orc_wer requires at least one stream"));
    }

    // Stable order by start time; ties keep input order.
    let mut order: Vec<usize> = (0..refs.len()).collect();
    order.sort_by(|&a, &b| refs[a].start.partial_cmp(&refs[b].start).unwrap());
    let sorted: Vec<&[String]> = order.iter().map(|&i| refs[i].words.as_slice()).collect();

    let sorted_assignment = if streams.len() == 1 {
        vec![0usize; sorted.len()]
    } else if streams.len() == 2 && sorted.len() <= cfg.exhaustive_limit {
        enumerate_assignments(&sorted, streams)
    } else {
        dp_assignment(&sorted, streams)?
    };

    // Rebuild per-stream concatenations and score them for the S/I/D split.
    let mut concat: Vec<Vec<String>> = vec![Vec::new(); streams.len()];
    for (pos, &s) in sorted_assignment.iter().enumerate() {
        concat[s].extend_from_slice(sorted[pos]);
    }
    let mut subs = 0;
    let mut ins = 0;
    let mut dels = 0;
    for (s, stream) in streams.iter().enumerate() {
        let stats = levenshtein(&concat[s], stream);
        subs += stats.substitutions;
        ins += stats.insertions;
        dels += stats.deletions;
    }
    let total_ref: usize = refs.iter().map(|u| u.words.len()).sum();

    let mut assignment = vec![0usize; refs.len()];
    for (pos, &orig) in order.iter().enumerate() {
        assignment[orig] = sorted_assignment[pos];
    }
    Ok(OrcResult {
        stats: WerStats::from_counts(subs, ins, dels, total_ref),
        assignment,
    })
}

/// Appends `words` to the alignment captured by `row` against `hyp`.
/// `row[j]` is the minimal cost of consuming `hyp[..j]`; the update is the
/// standard edit recurrence, one sweep per appended word.
fn extend_row(row: &[u32], words: &[String], hyp: &[String]) -> Vec<u32> {
    let mut prev = row.to_vec();
    let mut cur = vec![0u32; hyp.len() + 1];
    for w in words {
        cur[0] = prev[0].saturating_add(1);
        for j in 1..=hyp.len() {
            let sub = prev[j - 1].saturating_add(u32::from(hyp[j - 1] != *w));
            cur[j] = sub.min(prev[j].saturating_add(1)).min(cur[j - 1].saturating_add(1));
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev
}

/// Cost of finishing a stream from its current row: remaining hypothesis
/// words become insertions.
fn completion_cost(row: &[u32]) -> u32 {
    row.last().copied().unwrap_or(INF)
}

fn row_lower_bound(row: &[u32]) -> u32 {
    row.iter().copied().min().unwrap_or(INF)
}

/// Branch and bound over all stream assignments, seeded with a greedy upper
/// bound. First-found among cost ties wins, which makes the result
/// deterministic (streams tried in index order at every level).
fn enumerate_assignments(utts: &[&[String]], streams: &[Vec<String>]) -> Vec<usize> {
    let s_count = streams.len();
    let init_rows: Vec<Vec<u32>> = streams
        .iter()
        .map(|h| (0..=h.len() as u32).collect())
        .collect();

    // Greedy seed: send each utterance to the stream with the better
    // completion estimate after appending it.
    let mut greedy_rows = init_rows.clone();
    let mut greedy_assign = Vec::with_capacity(utts.len());
    for u in utts {
        let mut best = (u32::MAX, 0usize, Vec::new());
        for s in 0..s_count {
            let cand = extend_row(&greedy_rows[s], u, &streams[s]);
            let est: u32 = completion_cost(&cand)
                + (0..s_count)
                    .filter(|&o| o != s)
                    .map(|o| completion_cost(&greedy_rows[o]))
                    .sum::<u32>();
            if est < best.0 {
                best = (est, s, cand);
            }
        }
        greedy_rows[best.1] = best.2;
        greedy_assign.push(best.1);
    }
    let best_cost: u32 = greedy_rows.iter().map(|r| completion_cost(r)).sum();
    let mut best_assign = greedy_assign;

    struct Search<'a> {
        utts: &'a [&'a [String]],
        streams: &'a [Vec<String>],
        best_cost: u32,
        best_assign: Vec<usize>,
        current: Vec<usize>,
    }

    impl Search<'_> {
        fn rec(&mut self, t: usize, rows: &mut Vec<Vec<u32>>) {
            if t == self.utts.len() {
                let total: u32 = rows.iter().map(|r| completion_cost(r)).sum();
                if total < self.best_cost {
                    self.best_cost = total;
                    self.best_assign = self.current.clone();
                }
                return;
            }
            let bound: u32 = rows.iter().map(|r| row_lower_bound(r)).sum();
            if bound >= self.best_cost {
                return;
            }
            for s in 0..self.streams.len() {
                let extended = extend_row(&rows[s], self.utts[t], &self.streams[s]);
                let saved = std::mem::replace(&mut rows[s], extended);
                self.current.push(s);
                self.rec(t + 1, rows);
                self.current.pop();
                rows[s] = saved;
            }
        }
    }

    let mut search = Search {
        utts,
        streams,
        best_cost,
        best_assign: Vec::new(),
        current: Vec::new(),
    };
    std::mem::swap(&mut search.best_assign, &mut best_assign);
    let mut rows = init_rows;
    search.rec(0, &mut rows);
    search.best_assign
}

/// Exact DP over (utterance progress, per-stream positions). Between
/// utterances the active stream may change freely; inside an utterance only
/// the active stream's position advances. Boundary cost cubes are kept for
/// the backtrace.
fn dp_assignment(utts: &[&[String]], streams: &[Vec<String>]) -> Result<Vec<usize>> {
    let s_count = streams.len();
    let sizes: Vec<usize> = streams.iter().map(|h| h.len() + 1).collect();
    let cube_len: usize = sizes.iter().product();
    let total_cells = cube_len
        .checked_mul(utts.len() + 1)
        .ok_or_else(|| Error::invalid("orc_wer instance too large"))?;
    if total_cells > 200_000_000 {
        return Err(Error::invalid(format!(
            "orc_wer instance too large for exact search ({total_cells} DP cells)"
        )));
    }
    let mut strides = vec![1usize; s_count];
    for s in (0..s_count.saturating_sub(1)).rev() {
        strides[s] = strides[s + 1] * sizes[s + 1];
    }

    let mut boundaries: Vec<Vec<u32>> = Vec::with_capacity(utts.len() + 1);
    let mut cube = vec![INF; cube_len];
    cube[0] = 0;
    boundaries.push(cube);

    for utt in utts {
        let prev = boundaries.last().unwrap();
        let mut next = vec![INF; cube_len];
        for (a, stream) in streams.iter().enumerate() {
            align_axis(prev, &mut next, utt, stream, strides[a], sizes[a], cube_len);
        }
        boundaries.push(next);
    }

    // Close out: remaining hypothesis words on every stream are insertions.
    let last = boundaries.last().unwrap();
    let mut best = (INF, 0usize);
    for (idx, &cost) in last.iter().enumerate() {
        if cost >= INF {
            continue;
        }
        let mut tail = 0u32;
        for s in 0..s_count {
            let j = (idx / strides[s]) % sizes[s];
            tail += (sizes[s] - 1 - j) as u32;
        }
        let total = cost + tail;
        if total < best.0 {
            best = (total, idx);
        }
    }

    // Backtrace through the boundary cubes: for each utterance find the
    // (stream, start position) pair whose chunk alignment explains the cost.
    let mut assignment = vec![0usize; utts.len()];
    let mut idx = best.1;
    for t in (0..utts.len()).rev() {
        let target = boundaries[t + 1][idx];
        let mut found = false;
        'streams: for a in 0..s_count {
            let q = (idx / strides[a]) % sizes[a];
            let chunk_costs = chunk_costs_to(utts[t], &streams[a], q);
            for (p, &chunk) in chunk_costs.iter().enumerate() {
                let prev_idx = idx - q * strides[a] + p * strides[a];
                let prev_cost = boundaries[t][prev_idx];
                if prev_cost < INF && prev_cost + chunk == target {
                    assignment[t] = a;
                    idx = prev_idx;
                    found = true;
                    break 'streams;
                }
            }
        }
        debug_assert!(found, "orc backtrace failed at utterance {t}");
        if !found {
            return Err(Error::invalid("orc_wer backtrace failed"));
        }
    }
    Ok(assignment)
}

/// Relaxes `prev -> next` along stream axis `a`: every line of the cube with
/// varying position on that stream is an independent edit-distance DP with an
/// arbitrary init row.
fn align_axis(
    prev: &[u32],
    next: &mut [u32],
    utt: &[String],
    hyp: &[String],
    stride: usize,
    size: usize,
    cube_len: usize,
) {
    let mut init = vec![0u32; size];
    let mut idx = 0usize;
    while idx < cube_len {
        let digit = (idx / stride) % size;
        if digit != 0 {
            idx += stride; // skip to the next candidate base
            continue;
        }
        for (j, v) in init.iter_mut().enumerate() {
            *v = prev[idx + j * stride];
        }
        // Leading insertions may consume hypothesis words before the chunk.
        for j in 1..size {
            init[j] = init[j].min(init[j - 1].saturating_add(1));
        }
        let out = extend_row(&init, utt, hyp);
        for (j, v) in out.iter().enumerate() {
            let slot = &mut next[idx + j * stride];
            if *v < *slot {
                *slot = *v;
            }
        }
        idx += 1;
    }
}

/// `result[p]` = edit distance between `utt` and `hyp[p..q]`, computed in one
/// DP over the reversed sequences.
fn chunk_costs_to(utt: &[String], hyp: &[String], q: usize) -> Vec<u32> {
    let rev_hyp: Vec<&String> = hyp[..q].iter().rev().collect();
    let mut prev: Vec<u32> = (0..=q as u32).collect();
    let mut cur = vec![0u32; q + 1];
    for w in utt.iter().rev() {
        cur[0] = prev[0] + 1;
        for j in 1..=q {
            let sub = prev[j - 1] + u32::from(rev_hyp[j - 1] != w);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    // prev[j] = edit(utt, hyp[q-j..q]); re-index by start position p = q - j.
    (0..=q).map(|p| prev[q - p]).collect()
}
