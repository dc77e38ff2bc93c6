#![allow(dead_code)]

use gesture_irr::sim::NoiseProfile;
use gesture_irr::{GestureKind, Segment, Timeline, TimingConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random valid timeline with at most `max_len` segments drawn from the
/// first `kinds` labeled kinds. Gaps straddle the `Other` threshold.
pub fn random_timeline(rng: &mut impl Rng, rater: &str, max_len: usize, kinds: usize) -> Timeline {
    let n = rng.random_range(0..=max_len);
    let mut t = rng.random_range(0..3000u64);
    let mut segs = Vec::with_capacity(n);
    for _ in 0..n {
        let kind = GestureKind::LABELED[rng.random_range(0..kinds)];
        let d = rng.random_range(1000..6000u64);
        segs.push(Segment::ms(kind, t, t + d));
        t += d + rng.random_range(0..6000u64);
    }
    Timeline::new("m", rater, segs, &TimingConfig::default()).expect("generator respects the schema")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every perturbation type enabled, with room left for plain jitter.
pub fn mixed_noise() -> NoiseProfile {
    NoiseProfile {
        jitter_std_ms: 300.0,
        p_supra: 0.2,
        p_split: 0.08,
        p_merge: 0.05,
        p_miss: 0.05,
        p_relabel: 0.05,
        p_straddle: 0.06,
        max_split_parts: 4,
    }
}
