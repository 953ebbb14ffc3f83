//! Speaker embeddings and extractors.
//!
//! The mock extractor stands in for a neural d-vector network: each ground
//! truth speaker owns a fixed centroid, the dominant speaker of an interval
//! is read off the stream audio via the speakers' narrowband signatures, and
//! Gaussian noise shrinking with the square root of the interval duration
//! models the usual embedding-quality-vs-length trade-off.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::css::splitmix64;
use crate::error::{Error, Result};
use crate::mixgen::signature_frequency;
use crate::types::{AudioSignal, TimeInterval};

/// Unit-norm speaker identity vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    vector: Vec<f64>,
}

impl Embedding {
    /// Normalizes to unit length; the zero vector is rejected.
    pub fn new(vector: Vec<f64>) -> Result<Self> {
        if vector.is_empty() || vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding must be finite and non-empty"));
        }
        let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 0.0 {
            return Err(Error::invalid("embedding must be non-zero"));
        }
        Ok(Embedding {
            vector: vector.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn norm(&self) -> f64 {
        self.vector.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine similarity of two vectors (not necessarily unit norm).
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na <= 0.0 || nb <= 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Mean of the given embeddings (no re-normalization).
pub fn mean_vector(embeddings: &[&Embedding]) -> Vec<f64> {
    let dim = embeddings[0].dim();
    let mut out = vec![0.0; dim];
    for e in embeddings {
        for (o, v) in out.iter_mut().zip(e.vector()) {
            *o += v;
        }
    }
    for o in &mut out {
        *o /= embeddings.len() as f64;
    }
    out
}

/// Deterministic embedding extractor over a stream interval.
pub trait EmbeddingExtractor {
    fn embed(
        &self,
        stream: &AudioSignal,
        channel: usize,
        interval: TimeInterval,
    ) -> Result<Embedding>;
}

/// Ground-truth-backed mock extractor.
pub struct MockExtractor {
    /// Per-speaker unit centroids, aligned with `signature_freqs`.
    centroids: Vec<Embedding>,
    signature_freqs: Vec<f64>,
    sigma: f64,
    seed: u64,
}

impl MockExtractor {
    /// One unit centroid per speaker label in sorted order, with the
    /// matching signature frequencies. While speakers fit into the embedding
    /// dimension the centroids are exactly orthogonal basis vectors; beyond
    /// that they fall back to seeded random directions.
    pub fn new(speakers: &[String], dim: usize, sigma: f64, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        let mut centroids = Vec::with_capacity(speakers.len());
        for i in 0..speakers.len() {
            if i < dim {
                let mut v = vec![0.0; dim];
                v[i] = 1.0;
                centroids.push(Embedding::new(v)?);
            } else {
                let mut rng = ChaCha12Rng::seed_from_u64(splitmix64(seed ^ 0xC3 ^ (i as u64) << 8));
                let normal = Normal::new(0.0, 1.0).unwrap();
                let v: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
                centroids.push(Embedding::new(v)?);
            }
        }
        let signature_freqs = (0..speakers.len()).map(signature_frequency).collect();
        Ok(MockExtractor {
            centroids,
            signature_freqs,
            sigma,
            seed,
        })
    }

    /// Mock with explicitly chosen centroids (tests use exactly orthogonal
    /// ones).
    pub fn with_centroids(centroids: Vec<Embedding>, sigma: f64, seed: u64) -> Self {
        let signature_freqs = (0..centroids.len()).map(signature_frequency).collect();
        MockExtractor {
            centroids,
            signature_freqs,
            sigma,
            seed,
        }
    }

    /// Dominant speaker in the slice by signature power (one Goertzel pass
    /// per speaker frequency); `None` when the slice is essentially silent.
    fn dominant_speaker(&self, stream: &AudioSignal, interval: TimeInterval) -> Option<usize> {
        let slice = stream.slice(interval);
        if slice.is_empty() {
            return None;
        }
        let rate = stream.sample_rate() as f64;
        let mut best: Option<(usize, f64)> = None;
        for (i, freq) in self.signature_freqs.iter().enumerate() {
            let coeff = 2.0 * (2.0 * std::f64::consts::PI * freq / rate).cos();
            let (mut s1, mut s2) = (0.0f64, 0.0f64);
            for &x in slice {
                let s = x as f64 + coeff * s1 - s2;
                s2 = s1;
                s1 = s;
            }
            let power = (s1 * s1 + s2 * s2 - coeff * s1 * s2) / slice.len() as f64;
            if best.is_none_or(|(_, p)| power > p) {
                best = Some((i, power));
            }
        }
        // Silence floor: a live signature tone yields power on the order of
        // amp^2 * len / 4; anything far below is treated as no speaker.
        best.filter(|&(_, p)| p > 1e-6 * slice.len() as f64)
            .map(|(i, _)| i)
    }
}

impl EmbeddingExtractor for MockExtractor {
    fn embed(
        &self,
        stream: &AudioSignal,
        channel: usize,
        interval: TimeInterval,
    ) -> Result<Embedding> {
        if self.centroids.is_empty() {
            return Err(Error::invalid("mock extractor has no speakers"));
        }
        let key = splitmix64(
            self.seed
                ^ (channel as u64) << 48
                ^ interval.start().to_bits().rotate_left(17)
                ^ interval.end().to_bits(),
        );
        let mut rng = ChaCha12Rng::seed_from_u64(key);

        let centroid = match self.dominant_speaker(stream, interval) {
            Some(spk) => self.centroids[spk].vector().to_vec(),
            None => {
                // Silent interval: an arbitrary but deterministic direction,
                // like a real embedder fed with noise.
                let normal = Normal::new(0.0, 1.0).unwrap();
                let dim = self.centroids[0].dim();
                return Embedding::new((0..dim).map(|_| normal.sample(&mut rng)).collect());
            }
        };

        if self.sigma == 0.0 {
            return Embedding::new(centroid);
        }
        let duration = interval.duration().max(1e-3);
        let sigma_eff = self.sigma / duration.sqrt();
        let normal = Normal::new(0.0, sigma_eff).map_err(|e| Error::invalid(e.to_string()))?;
        let noisy: Vec<f64> = centroid
            .into_iter()
            .map(|v| v + normal.sample(&mut rng))
            .collect();
        Embedding::new(noisy)
    }
}

/// Serves embeddings precomputed out-of-band, keyed by channel and interval
/// (times quantized to 0.1 ms).
pub struct FileExtractor {
    map: HashMap<(usize, i64, i64), Embedding>,
}

impl FileExtractor {
    pub fn new(entries: Vec<(usize, TimeInterval, Embedding)>) -> Self {
        let map = entries
            .into_iter()
            .map(|(ch, iv, e)| ((ch, quantize(iv.start()), quantize(iv.end())), e))
            .collect();
        FileExtractor { map }
    }
}

fn quantize(t: f64) -> i64 {
    (t * 10_000.0).round() as i64
}

impl EmbeddingExtractor for FileExtractor {
    fn embed(
        &self,
        _stream: &AudioSignal,
        channel: usize,
        interval: TimeInterval,
    ) -> Result<Embedding> {
        self.map
            .get(&(channel, quantize(interval.start()), quantize(interval.end())))
            .cloned()
            .ok_or_else(|| {
                Error::invalid(format!(
                    "no stored embedding for channel {channel} interval [{}, {}]",
                    interval.start(),
                    interval.end()
                ))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixgen::{generate_meeting, MixSpec};

    fn iv(a: f64, b: f64) -> TimeInterval {
        TimeInterval::new(a, b).unwrap()
    }

    #[test]
    fn embeddings_are_unit_norm() {
        let e = Embedding::new(vec![3.0, 4.0]).unwrap();
        assert!((e.norm() - 1.0).abs() < 1e-9);
        assert!((e.vector()[0] - 0.6).abs() < 1e-12);
        assert!(Embedding::new(vec![0.0, 0.0]).is_err());
        assert!(Embedding::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn cosine_basics() {
        assert!((cosine(&[1.0, 0.0], &[1.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!((cosine(&[1.0, 0.0], &[-1.0, 0.0]) + 1.0).abs() < 1e-12);
        assert!(cosine(&[1.0, 0.0], &[0.0, 1.0]).abs() < 1e-12);
    }

    #[test]
    fn mock_reads_dominant_speaker_from_audio() {
        let truth = generate_meeting(&MixSpec {
            num_speakers: 2,
            num_utterances: 4,
            overlap_ratio_target: 0.0,
            seed: 9,
            ..MixSpec::default()
        })
        .unwrap();
        let speakers = truth.speaker_order();
        let extractor = MockExtractor::new(&speakers, 16, 0.0, 1).unwrap();

        // Feed the per-speaker source directly: the dominant speaker must be
        // that source's owner, so the embedding equals the centroid.
        for (ordinal, source) in truth.sources.iter().enumerate() {
            let utt = truth
                .utterances
                .iter()
                .find(|u| u.speaker == speakers[ordinal])
                .unwrap();
            let e = extractor.embed(source, 0, utt.interval).unwrap();
            let expect = MockExtractor::new(&speakers, 16, 0.0, 1).unwrap();
            let centroid = expect.centroids[ordinal].clone();
            assert!(
                (cosine(e.vector(), centroid.vector()) - 1.0).abs() < 1e-9,
                "speaker {ordinal} embedding should match its centroid"
            );
        }
    }

    #[test]
    fn mock_noise_is_deterministic_and_scales_down_with_duration() {
        let speakers = vec!["spk0".to_string(), "spk1".to_string()];
        let extractor = MockExtractor::new(&speakers, 32, 0.5, 7).unwrap();
        let truth = generate_meeting(&MixSpec {
            num_speakers: 2,
            num_utterances: 2,
            overlap_ratio_target: 0.0,
            seed: 2,
            ..MixSpec::default()
        })
        .unwrap();
        let stream = &truth.mixture;
        let long = truth.utterances[0].interval;
        let a = extractor.embed(stream, 0, long).unwrap();
        let b = extractor.embed(stream, 0, long).unwrap();
        assert_eq!(a, b, "same inputs, same embedding");

        let short = iv(long.start(), long.start() + 0.3);
        let c = extractor.embed(stream, 0, short).unwrap();
        assert_ne!(a, c);

        let clean = MockExtractor::new(&speakers, 32, 0.0, 7).unwrap();
        let centroid = clean.embed(stream, 0, long).unwrap();
        let long_sim = cosine(a.vector(), centroid.vector());
        let short_sim = cosine(c.vector(), centroid.vector());
        assert!(
            long_sim > short_sim,
            "longer interval should stay closer to the centroid ({long_sim} vs {short_sim})"
        );
    }

    #[test]
    fn file_extractor_round_trip() {
        let e = Embedding::new(vec![1.0, 2.0, 2.0]).unwrap();
        let fx = FileExtractor::new(vec![(1, iv(0.5, 1.25), e.clone())]);
        let stream = AudioSignal::silence(100, 16_000).unwrap();
        assert_eq!(fx.embed(&stream, 1, iv(0.5, 1.25)).unwrap(), e);
        assert!(fx.embed(&stream, 0, iv(0.5, 1.25)).is_err());
        assert!(fx.embed(&stream, 1, iv(0.5, 1.3)).is_err());
    }
}
