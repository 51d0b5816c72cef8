use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::SceneLayout;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseOutcome {
    pub features: Vec<f64>,
    /// One-hot segments that received noise (present objects only).
    pub segments: usize,
    /// Segments whose argmax no longer marks the ground-truth bit.
    pub negatives: usize,
}

impl NoiseOutcome {
    pub fn is_negative(&self) -> bool {
        self.negatives > 0
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Adds N(0, sigma²) to the class and attribute one-hots of every present
/// object slot. Bounding boxes and padding slots are left untouched.
pub fn perturb_features<R: Rng + ?Sized>(f: &[f64], layout: &SceneLayout, sigma: f64, rng: &mut R) -> NoiseOutcome {
    let mut out = f.to_vec();
    let mut segments = 0;
    let mut negatives = 0;
    for k in 0..layout.m_max {
        let segs = layout.segments(k);
        if f[segs[0].clone()].iter().all(|&v| v == 0.0) {
            continue;
        }
        for seg in segs {
            let truth = argmax(&f[seg.clone()]);
            for v in &mut out[seg.clone()] {
                let z: f64 = rng.sample(StandardNormal);
                *v += sigma * z;
            }
            segments += 1;
            let noisy = &out[seg];
            if noisy.iter().enumerate().any(|(i, &v)| i != truth && v >= noisy[truth]) {
                negatives += 1;
            }
        }
    }
    NoiseOutcome {
        features: out,
        segments,
        negatives,
    }
}

/// Fraction of negative segments when perturbing every vector with `sigma`,
/// under a fixed noise stream.
pub fn negative_ratio(features: &[Vec<f64>], layout: &SceneLayout, sigma: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut seg, mut neg) = (0usize, 0usize);
    for f in features {
        let o = perturb_features(f, layout, sigma, &mut rng);
        seg += o.segments;
        neg += o.negatives;
    }
    if seg == 0 {
        0.0
    } else {
        neg as f64 / seg as f64
    }
}

/// Bisection on sigma so that [`negative_ratio`] hits `target`.
pub fn calibrate_sigma(features: &[Vec<f64>], layout: &SceneLayout, target: f64, seed: u64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 4.0f64);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if negative_ratio(features, layout, mid, seed) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
