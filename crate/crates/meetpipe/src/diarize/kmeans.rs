//! Seeded k-means++ clustering (D^2 seeding plus Lloyd iterations).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::embedding::Embedding;
use crate::error::{Error, Result};

const CONVERGENCE_SHIFT: f64 = 1e-8;
const MAX_ITERATIONS: usize = 300;
/// Independent seeded restarts; the run with the lowest objective wins.
/// Small inputs (a handful of points per speaker) make single-shot seeding
/// fragile.
const RESTARTS: usize = 8;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Objective (sum of squared distances) after seeding and after every
    /// Lloyd assignment step, for the winning restart.
    pub objective_trace: Vec<f64>,
}

/// Clusters unit-norm embeddings into `k` groups. Deterministic given the
/// seed; fails when `k` exceeds the number of points.
pub fn cluster_kmeanspp(embeddings: &[Embedding], k: usize, seed: u64) -> Result<Vec<usize>> {
    Ok(cluster_kmeanspp_detailed(embeddings, k, seed)?.labels)
}

pub fn cluster_kmeanspp_detailed(
    embeddings: &[Embedding],
    k: usize,
    seed: u64,
) -> Result<KMeansResult> {
    let mut best: Option<KMeansResult> = None;
    for restart in 0..RESTARTS {
        let run = kmeans_once(
            embeddings,
            k,
            crate::css::splitmix64(seed ^ (restart as u64) << 32),
        )?;
        let better = match &best {
            None => true,
            Some(b) => {
                run.objective_trace.last().unwrap() + 1e-12 < *b.objective_trace.last().unwrap()
            }
        };
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn kmeans_once(embeddings: &[Embedding], k: usize, seed: u64) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > embeddings.len() {
        return Err(Error::invalid(format!(
            "cannot form {k} clusters from {} points",
            embeddings.len()
        )));
    }
    let dim = embeddings[0].dim();
    if embeddings.iter().any(|e| e.dim() != dim) {
        return Err(Error::invalid("embeddings must share one dimension"));
    }
    let points: Vec<&[f64]> = embeddings.iter().map(|e| e.vector()).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    // D^2 seeding.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())].to_vec());
    let mut dist2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = dist2.iter().sum();
        let next = if total > 0.0 {
            let mut draw = rng.random_range(0.0..total);
            let mut chosen = points.len() - 1;
            for (i, &d) in dist2.iter().enumerate() {
                if draw < d {
                    chosen = i;
                    break;
                }
                draw -= d;
            }
            chosen
        } else {
            // All remaining points coincide with chosen centroids; take the
            // first index not yet used so k distinct slots still exist.
            (0..points.len())
                .find(|&i| !centroids.iter().any(|c| squared_distance(points[i], c) == 0.0))
                .unwrap_or(0)
        };
        centroids.push(points[next].to_vec());
        for (d, p) in dist2.iter_mut().zip(&points) {
            *d = d.min(squared_distance(p, centroids.last().unwrap()));
        }
    }

    // Lloyd iterations.
    let mut labels = vec![0usize; points.len()];
    let mut objective_trace = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let mut objective = 0.0;
        for (label, point) in labels.iter_mut().zip(&points) {
            let (mut best_c, mut best_d) = (0usize, f64::INFINITY);
            for (c, centroid) in centroids.iter().enumerate() {
                let d = squared_distance(point, centroid);
                if d < best_d {
                    best_d = d;
                    best_c = c;
                }
            }
            *label = best_c;
            objective += best_d;
        }
        objective_trace.push(objective);

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&label, point) in labels.iter().zip(&points) {
            counts[label] += 1;
            for (s, v) in sums[label].iter_mut().zip(*point) {
                *s += v;
            }
        }
        let mut max_shift = 0.0f64;
        for c in 0..k {
            if counts[c] == 0 {
                continue; // empty cluster keeps its centroid
            }
            let mut shift = 0.0;
            for (s, old) in sums[c].iter_mut().zip(&centroids[c]) {
                *s /= counts[c] as f64;
                shift += (*s - old) * (*s - old);
            }
            max_shift = max_shift.max(shift.sqrt());
            centroids[c] = sums[c].clone();
        }
        if max_shift < CONVERGENCE_SHIFT {
            break;
        }
    }

    Ok(KMeansResult {
        labels,
        centroids,
        objective_trace,
    })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
