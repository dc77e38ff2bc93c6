//! Synthetic meals and rater noise.
//!
//! [`generate_meal`] draws a ground-truth timeline from per-kind log-normal
//! duration models. [`perturb`] derives a second rater from it by applying at
//! most one perturbation per ground-truth segment, each built so that
//! matching the two timelines must produce a known case. The resulting
//! [`ProvenanceTag`]s are the expected answers for the matcher.
//!
//! Every perturbed segment only ever overlaps its own ground-truth segment,
//! which keeps perturbations isolated from each other. Boundary jitter is
//! drawn either well inside the tolerance (at most 0.4×) or well outside it
//! (at least 1.6×), never in between.

use std::collections::{BTreeMap, HashMap};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::Corpus;
use crate::matcher::{MatchCase, MatchReport};
use crate::model::{GestureKind, Hand, IndexEvent, Segment, TimePoint, Timeline, TimingConfig};

pub const GT_RATER: &str = "gt";
pub const SIM_RATER: &str = "sim";

/// Maximum re-draws of a perturbation before it is skipped.
pub const MAX_ATTEMPTS: usize = 100;

/// Decorrelates the perturbation stream from the generation stream.
const PERTURB_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid meal model: {0}")]
    Model(String),
    #[error("invalid noise profile: {0}")]
    Noise(String),
    #[error("config: {0}")]
    Config(#[from] toml::de::Error),
}

/// Log-normal duration with the given mean and standard deviation, clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationModel {
    pub mean_s: f64,
    pub std_s: f64,
    pub min_s: f64,
    pub max_s: f64,
}

impl DurationModel {
    pub const fn new(mean_s: f64, std_s: f64, min_s: f64, max_s: f64) -> Self {
        DurationModel {
            mean_s,
            std_s,
            min_s,
            max_s,
        }
    }

    fn check(&self, what: &str, floor_ms: u64) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Model(format!("{what}: {msg}")));
        if !(self.mean_s > 0.0 && self.std_s >= 0.0 && self.mean_s.is_finite() && self.std_s.is_finite()) {
            return bad(format!(
                "mean {} / std {} must be positive / non-negative",
                self.mean_s, self.std_s
            ));
        }
        if self.min_s.is_nan() || self.max_s.is_nan() || self.min_s > self.max_s {
            return bad(format!("min {} exceeds max {}", self.min_s, self.max_s));
        }
        if ((self.min_s * 1000.0).round() as u64) < floor_ms {
            return bad(format!(
                "min {} s is below the {} ms schema minimum",
                self.min_s, floor_ms
            ));
        }
        Ok(())
    }

    fn sampler(&self) -> LogNormal<f64> {
        let cv = self.std_s / self.mean_s;
        let var = (1.0 + cv * cv).ln();
        LogNormal::new(self.mean_s.ln() - var / 2.0, var.sqrt()).expect("checked parameters")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindModel {
    /// Relative frequency; zero disables the kind.
    pub weight: f64,
    #[serde(flatten)]
    pub duration: DurationModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapModel {
    /// Probability that the gap after a gesture is long enough to be `Other`.
    pub p_other: f64,
    pub other: DurationModel,
    /// Transition gaps are uniform in `[0, transition_max_ms]`.
    pub transition_max_ms: u64,
}

impl Default for GapModel {
    fn default() -> Self {
        GapModel {
            p_other: 0.027,
            other: DurationModel::new(9.0, 6.0, 4.0, 73.0),
            transition_max_ms: 3000,
        }
    }
}

/// Defaults follow the observed gesture duration statistics: bite 2±1 s,
/// drink 6±2 s, utensiling 5±5 s, rest 8±12 s, other 9±6 s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MealModel {
    pub bite: KindModel,
    pub drink: KindModel,
    pub utensiling: KindModel,
    pub rest: KindModel,
    pub gaps: GapModel,
    pub meal_length_s: f64,
}

impl Default for MealModel {
    fn default() -> Self {
        MealModel {
            bite: KindModel {
                weight: 18462.0,
                duration: DurationModel::new(2.0, 1.0, 1.0, 11.0),
            },
            drink: KindModel {
                weight: 2182.0,
                duration: DurationModel::new(6.0, 2.0, 1.0, 18.0),
            },
            utensiling: KindModel {
                weight: 14861.0,
                duration: DurationModel::new(5.0, 5.0, 1.0, 186.0),
            },
            rest: KindModel {
                weight: 14761.0,
                duration: DurationModel::new(8.0, 12.0, 1.0, 341.0),
            },
            gaps: GapModel::default(),
            meal_length_s: 600.0,
        }
    }
}

impl MealModel {
    pub fn kinds(&self) -> [(GestureKind, &KindModel); 4] {
        [
            (GestureKind::Bite, &self.bite),
            (GestureKind::Drink, &self.drink),
            (GestureKind::Utensiling, &self.utensiling),
            (GestureKind::Rest, &self.rest),
        ]
    }

    /// Zeroes every weight except `kind`'s.
    pub fn only(mut self, kind: GestureKind) -> Self {
        for (k, m) in [
            (GestureKind::Bite, &mut self.bite),
            (GestureKind::Drink, &mut self.drink),
            (GestureKind::Utensiling, &mut self.utensiling),
            (GestureKind::Rest, &mut self.rest),
        ] {
            if k != kind {
                m.weight = 0.0;
            }
        }
        self
    }

    pub fn check(&self, cfg: &TimingConfig) -> Result<(), SimError> {
        let mut total = 0.0;
        for (kind, m) in self.kinds() {
            if !(m.weight >= 0.0 && m.weight.is_finite()) {
                return Err(SimError::Model(format!(
                    "{kind}: weight {} must be non-negative",
                    m.weight
                )));
            }
            total += m.weight;
            m.duration.check(kind.as_str(), cfg.min_gesture_ms)?;
        }
        if total <= 0.0 {
            return Err(SimError::Model("at least one kind needs a positive weight".into()));
        }
        if !(0.0..=1.0).contains(&self.gaps.p_other) {
            return Err(SimError::Model(format!(
                "gaps.p_other {} outside [0, 1]",
                self.gaps.p_other
            )));
        }
        self.gaps
            .other
            .check("gaps.other", cfg.gap_other_ms.max(cfg.min_other_ms))?;
        if !(self.meal_length_s > 0.0 && self.meal_length_s.is_finite()) {
            return Err(SimError::Model(format!(
                "meal_length_s {} must be positive",
                self.meal_length_s
            )));
        }
        Ok(())
    }
}

fn draw_ms(rng: &mut impl Rng, sampler: &LogNormal<f64>, m: &DurationModel) -> u64 {
    let s = sampler.sample(rng).clamp(m.min_s, m.max_s);
    (s * 1000.0).round() as u64
}

/// Draws one ground-truth meal. Each intake segment receives exactly one
/// dominant-hand index event placed uniformly inside it.
pub fn generate_meal(
    meal_id: &str,
    model: &MealModel,
    cfg: &TimingConfig,
    seed: u64,
) -> Result<(Timeline, Vec<IndexEvent>), SimError> {
    model.check(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds = model.kinds();
    let pick = WeightedIndex::new(kinds.iter().map(|(_, m)| m.weight)).map_err(|e| SimError::Model(e.to_string()))?;
    let samplers: Vec<LogNormal<f64>> = kinds.iter().map(|(_, m)| m.duration.sampler()).collect();
    let other = model.gaps.other.sampler();
    let length_ms = (model.meal_length_s * 1000.0).round() as u64;

    let gap = |rng: &mut ChaCha8Rng| {
        if rng.random_bool(model.gaps.p_other) {
            draw_ms(rng, &other, &model.gaps.other)
        } else {
            rng.random_range(0..=model.gaps.transition_max_ms)
        }
    };

    let mut segments = Vec::new();
    let mut events = Vec::new();
    let mut t = gap(&mut rng);
    while t < length_ms {
        let k = pick.sample(&mut rng);
        let (kind, m) = kinds[k];
        let d = draw_ms(&mut rng, &samplers[k], &m.duration).max(cfg.min_gesture_ms);
        let seg = Segment::ms(kind, t, t + d);
        if kind.is_intake() {
            let at = rng.random_range(seg.start.ms()..=seg.end.ms());
            events.push(IndexEvent::new(meal_id, TimePoint::from_ms(at), kind, Hand::Dominant).expect("intake kind"));
        }
        segments.push(seg);
        t += d + gap(&mut rng);
    }
    let timeline = Timeline::new(meal_id, GT_RATER, segments, cfg).expect("generated meals are valid by construction");
    Ok((timeline, events))
}

/// Per-segment rater error rates. Structural perturbations are mutually
/// exclusive; a segment that gets none is jittered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseProfile {
    pub jitter_std_ms: f64,
    /// Share of jittered segments that get a beyond-tolerance shift.
    pub p_supra: f64,
    pub p_split: f64,
    pub p_merge: f64,
    pub p_miss: f64,
    pub p_relabel: f64,
    /// Beyond-tolerance shift plus an inserted different-kind segment in the
    /// uncovered part (boundary ambiguity III).
    pub p_straddle: f64,
    pub max_split_parts: usize,
}

impl Default for NoiseProfile {
    fn default() -> Self {
        NoiseProfile {
            jitter_std_ms: 0.0,
            p_supra: 0.0,
            p_split: 0.0,
            p_merge: 0.0,
            p_miss: 0.0,
            p_relabel: 0.0,
            p_straddle: 0.0,
            max_split_parts: 3,
        }
    }
}

impl NoiseProfile {
    pub fn check(&self) -> Result<(), SimError> {
        let probs = [
            ("p_supra", self.p_supra),
            ("p_split", self.p_split),
            ("p_merge", self.p_merge),
            ("p_miss", self.p_miss),
            ("p_relabel", self.p_relabel),
            ("p_straddle", self.p_straddle),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Noise(format!("{name} = {p} outside [0, 1]")));
            }
        }
        let structural: f64 = probs[1..].iter().map(|p| p.1).sum();
        if structural > 1.0 + 1e-12 {
            return Err(SimError::Noise(format!(
                "structural probabilities sum to {structural} > 1"
            )));
        }
        if !(self.jitter_std_ms >= 0.0 && self.jitter_std_ms.is_finite()) {
            return Err(SimError::Noise(format!(
                "jitter_std_ms {} must be non-negative",
                self.jitter_std_ms
            )));
        }
        if self.max_split_parts < 2 {
            return Err(SimError::Noise("max_split_parts must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JitterRegime {
    /// Both deltas at most 0.4× tolerance.
    SubTolerance,
    /// At least one delta at least 1.6× tolerance.
    SupraTolerance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Perturbation {
    Jitter {
        regime: JitterRegime,
        start_delta_ms: i64,
        end_delta_ms: i64,
    },
    Split {
        parts: usize,
    },
    /// Merged with the following ground-truth segment `with`.
    Merge {
        with: usize,
    },
    Delete,
    Relabel {
        to: GestureKind,
    },
    Straddle {
        inserted: Segment,
    },
    /// Every draw broke validity; the segment was copied unchanged.
    NoOp,
}

impl Perturbation {
    pub fn expected_case(&self) -> MatchCase {
        match self {
            Perturbation::Jitter {
                regime: JitterRegime::SubTolerance,
                ..
            }
            | Perturbation::NoOp => MatchCase::Agreement,
            Perturbation::Jitter {
                regime: JitterRegime::SupraTolerance,
                ..
            } => MatchCase::BoundaryAmbiguityI,
            Perturbation::Split { .. } | Perturbation::Merge { .. } => MatchCase::BoundaryAmbiguityII,
            Perturbation::Straddle { .. } => MatchCase::BoundaryAmbiguityIII,
            Perturbation::Delete => MatchCase::MistakeMissed,
            Perturbation::Relabel { .. } => MatchCase::MistakeIdentity,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Perturbation::Jitter {
                regime: JitterRegime::SubTolerance,
                ..
            } => "jitter_sub",
            Perturbation::Jitter { .. } => "jitter_supra",
            Perturbation::Split { .. } => "split",
            Perturbation::Merge { .. } => "merge",
            Perturbation::Delete => "delete",
            Perturbation::Relabel { .. } => "relabel",
            Perturbation::Straddle { .. } => "straddle",
            Perturbation::NoOp => "noop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceTag {
    /// Position of the segment in the ground-truth timeline.
    pub gt_index: usize,
    pub perturbation: Perturbation,
    pub expected: MatchCase,
}

impl ProvenanceTag {
    fn new(gt_index: usize, perturbation: Perturbation) -> Self {
        ProvenanceTag {
            gt_index,
            perturbation,
            expected: perturbation.expected_case(),
        }
    }
}

#[derive(Clone, Copy)]
enum Op {
    Miss,
    Relabel,
    Split,
    Merge,
    Straddle,
    Jitter(JitterRegime),
}

struct Perturber<'a> {
    gt: &'a [Segment],
    profile: &'a NoiseProfile,
    cfg: &'a TimingConfig,
    rng: ChaCha8Rng,
    jitter: Normal<f64>,
    out: Vec<Segment>,
}

impl Perturber<'_> {
    fn sub_limit(&self) -> i64 {
        (self.cfg.tolerance_ms as f64 * 0.4).floor() as i64
    }

    fn supra_floor(&self) -> i64 {
        (self.cfg.tolerance_ms as f64 * 1.6).ceil() as i64
    }

    fn draw_op(&mut self) -> Op {
        let p = self.profile;
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        for (prob, op) in [
            (p.p_miss, Op::Miss),
            (p.p_relabel, Op::Relabel),
            (p.p_split, Op::Split),
            (p.p_merge, Op::Merge),
            (p.p_straddle, Op::Straddle),
        ] {
            acc += prob;
            if u < acc {
                return op;
            }
        }
        if self.rng.random_bool(p.p_supra) {
            Op::Jitter(JitterRegime::SupraTolerance)
        } else {
            Op::Jitter(JitterRegime::SubTolerance)
        }
    }

    fn sub_delta(&mut self) -> i64 {
        let lim = self.sub_limit();
        (self.jitter.sample(&mut self.rng).round() as i64).clamp(-lim, lim)
    }

    fn supra_delta(&mut self) -> i64 {
        let mag = self.supra_floor() + self.jitter.sample(&mut self.rng).abs().round() as i64;
        if self.rng.random_bool(0.5) {
            mag
        } else {
            -mag
        }
    }

    /// Window a replacement for segment `i` must stay in: after the previous
    /// ground-truth segment and the last placed segment, before the next
    /// ground-truth segment.
    fn window(&self, i: usize) -> (i64, i64) {
        let lo = if i > 0 { self.gt[i - 1].end.ms() } else { 0 };
        let lo = lo.max(self.out.last().map_or(0, |s| s.end.ms()));
        let hi = self.gt.get(i + 1).map_or(i64::MAX, |s| s.start.ms() as i64);
        (lo as i64, hi)
    }

    fn fits(&self, i: usize, start: i64, end: i64, kind: GestureKind) -> bool {
        let (lo, hi) = self.window(i);
        start >= lo && end <= hi && end - start >= self.cfg.min_duration_ms(kind) as i64
    }

    fn jitter(&mut self, i: usize, regime: JitterRegime) -> Option<Perturbation> {
        let g = self.gt[i];
        for _ in 0..MAX_ATTEMPTS {
            let (ds, de) = match regime {
                JitterRegime::SubTolerance => (self.sub_delta(), self.sub_delta()),
                JitterRegime::SupraTolerance => match self.rng.random_range(0..3) {
                    0 => (self.supra_delta(), self.sub_delta()),
                    1 => (self.sub_delta(), self.supra_delta()),
                    _ => (self.supra_delta(), self.supra_delta()),
                },
            };
            let (s, e) = (g.start.ms() as i64 + ds, g.end.ms() as i64 + de);
            // must still overlap the original
            let overlaps = s < g.end.ms() as i64 && e > g.start.ms() as i64;
            if overlaps && self.fits(i, s, e, g.kind) {
                self.out.push(Segment::ms(g.kind, s as u64, e as u64));
                return Some(Perturbation::Jitter {
                    regime,
                    start_delta_ms: ds,
                    end_delta_ms: de,
                });
            }
        }
        None
    }

    fn split(&mut self, i: usize) -> Option<Perturbation> {
        let g = self.gt[i];
        let min = self.cfg.min_gesture_ms;
        for _ in 0..MAX_ATTEMPTS {
            let k = self.rng.random_range(2..=self.profile.max_split_parts);
            let gaps: Vec<u64> = (1..k).map(|_| self.rng.random_range(0..=500)).collect();
            let gap_total: u64 = gaps.iter().sum();
            let Some(spare) = g.duration_ms().checked_sub(gap_total + k as u64 * min) else {
                continue;
            };
            // random composition of `spare` into k parts
            let mut cuts: Vec<u64> = (1..k).map(|_| self.rng.random_range(0..=spare)).collect();
            cuts.sort_unstable();
            cuts.push(spare);
            let mut t = g.start.ms();
            let mut prev_cut = 0;
            for (p, &cut) in cuts.iter().enumerate() {
                let end = t + min + cut - prev_cut;
                prev_cut = cut;
                self.out.push(Segment::ms(g.kind, t, end));
                t = end + gaps.get(p).copied().unwrap_or(0);
            }
            debug_assert_eq!(self.out.last().unwrap().end, g.end);
            return Some(Perturbation::Split { parts: k });
        }
        None
    }

    fn straddle(&mut self, i: usize) -> Option<Perturbation> {
        let g = self.gt[i];
        let min = self.cfg.min_gesture_ms as i64;
        for _ in 0..MAX_ATTEMPTS {
            let shift = self.supra_delta().abs();
            if shift < min || g.duration_ms() as i64 - shift < min {
                continue;
            }
            let others: Vec<GestureKind> = GestureKind::LABELED.into_iter().filter(|&k| k != g.kind).collect();
            let kind = others[self.rng.random_range(0..others.len())];
            let (s, e) = (g.start.ms(), g.end.ms());
            let shift = shift as u64;
            let (inserted, kept) = if self.rng.random_bool(0.5) {
                (Segment::ms(kind, s, s + shift), Segment::ms(g.kind, s + shift, e))
            } else {
                (Segment::ms(kind, e - shift, e), Segment::ms(g.kind, s, e - shift))
            };
            let mut pair = [inserted, kept];
            pair.sort();
            self.out.extend(pair);
            return Some(Perturbation::Straddle { inserted });
        }
        None
    }
}

/// Derives a second rater from `truth`. Returns the perturbed timeline (rater
/// [`SIM_RATER`]) and one tag per ground-truth segment.
pub fn perturb(
    truth: &Timeline,
    profile: &NoiseProfile,
    cfg: &TimingConfig,
    seed: u64,
) -> Result<(Timeline, Vec<ProvenanceTag>), SimError> {
    profile.check()?;
    let gt = truth.segments();
    let mut p = Perturber {
        gt,
        profile,
        cfg,
        rng: ChaCha8Rng::seed_from_u64(seed),
        jitter: Normal::new(0.0, profile.jitter_std_ms).map_err(|e| SimError::Noise(e.to_string()))?,
        out: Vec::with_capacity(gt.len()),
    };
    let mut tags = Vec::with_capacity(gt.len());
    let mut i = 0;
    while i < gt.len() {
        let g = gt[i];
        let applied = match p.draw_op() {
            Op::Miss => Some(Perturbation::Delete),
            Op::Relabel => {
                let others: Vec<GestureKind> = GestureKind::LABELED.into_iter().filter(|&k| k != g.kind).collect();
                let to = others[p.rng.random_range(0..others.len())];
                p.out.push(Segment { kind: to, ..g });
                Some(Perturbation::Relabel { to })
            }
            Op::Split => p.split(i),
            Op::Merge => match gt.get(i + 1) {
                Some(next) if next.kind == g.kind => {
                    p.out.push(Segment::ms(g.kind, g.start.ms(), next.end.ms()));
                    let tag = Perturbation::Merge { with: i + 1 };
                    tags.push(ProvenanceTag::new(i, tag));
                    tags.push(ProvenanceTag::new(i + 1, tag));
                    i += 2;
                    continue;
                }
                _ => None,
            },
            Op::Straddle => p.straddle(i),
            Op::Jitter(regime) => p.jitter(i, regime),
        };
        let applied = applied.unwrap_or_else(|| {
            p.out.push(g);
            Perturbation::NoOp
        });
        tags.push(ProvenanceTag::new(i, applied));
        i += 1;
    }
    let timeline = Timeline::new(truth.meal_id(), SIM_RATER, p.out, cfg)
        .unwrap_or_else(|issues| panic!("perturbation produced an invalid timeline: {issues:?}"));
    Ok((timeline, tags))
}

/// Simulator settings as read from a TOML file. Every key is optional.
///
/// ```toml
/// meals = 50
///
/// [model]
/// meal_length_s = 600
/// bite = { weight = 18462, mean_s = 2, std_s = 1, min_s = 1, max_s = 11 }
///
/// [model.gaps]
/// p_other = 0.03
///
/// [noise]
/// jitter_std_ms = 150
/// p_supra = 0.1
/// p_miss = 0.03
/// p_relabel = 0.01
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub meals: usize,
    pub model: MealModel,
    pub noise: NoiseProfile,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            meals: 10,
            model: MealModel::default(),
            noise: NoiseProfile::default(),
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<SimConfig, SimError> {
        Ok(toml::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimMeal {
    pub truth: Timeline,
    pub perturbed: Timeline,
    pub events: Vec<IndexEvent>,
    pub tags: Vec<ProvenanceTag>,
}

pub fn meal_id(ordinal: usize) -> String {
    format!("meal_{ordinal:04}")
}

/// Ground truth plus one perturbed rater for meal `ordinal`; its seed is
/// `corpus_seed ^ ordinal`.
pub fn simulate_meal(
    config: &SimConfig,
    cfg: &TimingConfig,
    corpus_seed: u64,
    ordinal: usize,
) -> Result<SimMeal, SimError> {
    let seed = corpus_seed ^ ordinal as u64;
    let id = meal_id(ordinal);
    let (truth, events) = generate_meal(&id, &config.model, cfg, seed)?;
    let (perturbed, tags) = perturb(&truth, &config.noise, cfg, seed ^ PERTURB_STREAM)?;
    Ok(SimMeal {
        truth,
        perturbed,
        events,
        tags,
    })
}

pub fn simulate(config: &SimConfig, cfg: &TimingConfig, seed: u64) -> Result<Vec<SimMeal>, SimError> {
    config.model.check(cfg)?;
    config.noise.check()?;
    (0..config.meals)
        .into_par_iter()
        .map(|i| simulate_meal(config, cfg, seed, i))
        .collect()
}

pub fn to_corpus(meals: &[SimMeal]) -> Corpus {
    let mut corpus = Corpus::default();
    for m in meals {
        corpus.insert(m.truth.clone()).expect("fresh meal");
        corpus.insert(m.perturbed.clone()).expect("distinct raters");
        corpus
            .index_events
            .insert(m.truth.meal_id().to_string(), m.events.clone());
    }
    corpus
}

pub const PROVENANCE_HEADER: &str = "gt_index,perturbation,expected_case,detail";

pub fn write_provenance_csv(tags: &[ProvenanceTag]) -> String {
    let mut out = format!("{PROVENANCE_HEADER}\n");
    for t in tags {
        let detail = match t.perturbation {
            Perturbation::Jitter {
                start_delta_ms,
                end_delta_ms,
                ..
            } => format!("{start_delta_ms};{end_delta_ms}"),
            Perturbation::Split { parts } => parts.to_string(),
            Perturbation::Merge { with } => with.to_string(),
            Perturbation::Relabel { to } => to.to_string(),
            Perturbation::Straddle { inserted } => {
                format!("{}@{}-{}", inserted.kind, inserted.start, inserted.end)
            }
            Perturbation::Delete | Perturbation::NoOp => String::new(),
        };
        out.push_str(&format!(
            "{},{},{},{}\n",
            t.gt_index,
            t.perturbation.name(),
            t.expected,
            detail
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecoveryMiss {
    pub meal_id: String,
    pub gt_index: usize,
    pub expected: MatchCase,
    pub got: Option<MatchCase>,
}

/// Tagged segments whose group case matched the tag, per expected case.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Recovery {
    /// expected case → (recovered, tagged)
    pub per_case: BTreeMap<MatchCase, (u64, u64)>,
    pub misses: Vec<RecoveryMiss>,
}

impl Recovery {
    pub fn merge(&mut self, other: Recovery) {
        for (case, (hit, n)) in other.per_case {
            let e = self.per_case.entry(case).or_default();
            e.0 += hit;
            e.1 += n;
        }
        self.misses.extend(other.misses);
    }

    pub fn rate(&self, case: MatchCase) -> Option<f64> {
        self.per_case
            .get(&case)
            .filter(|(_, n)| *n > 0)
            .map(|&(hit, n)| hit as f64 / n as f64)
    }
}

/// Looks up the group holding each tagged ground-truth segment in a report
/// produced by `match_pair(truth, perturbed, ..)`.
pub fn check_recovery(truth: &Timeline, tags: &[ProvenanceTag], report: &MatchReport) -> Recovery {
    let mut case_of: HashMap<Segment, MatchCase> = HashMap::new();
    for g in &report.groups {
        for s in &g.members_a {
            case_of.insert(*s, g.case);
        }
    }
    let mut rec = Recovery::default();
    for tag in tags {
        let got = case_of.get(&truth.segments()[tag.gt_index]).copied();
        let e = rec.per_case.entry(tag.expected).or_default();
        e.1 += 1;
        if got == Some(tag.expected) {
            e.0 += 1;
        } else {
            rec.misses.push(RecoveryMiss {
                meal_id: truth.meal_id().to_string(),
                gt_index: tag.gt_index,
                expected: tag.expected,
                got,
            });
        }
    }
    rec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_segment_file, write_segment_csv, TimeUnit};

    fn cfg() -> TimingConfig {
        TimingConfig::default()
    }

    #[test]
    fn generation_is_deterministic() {
        let m = MealModel::default();
        let a = generate_meal("m", &m, &cfg(), 7).unwrap();
        let b = generate_meal("m", &m, &cfg(), 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, generate_meal("m", &m, &cfg(), 8).unwrap().0);
    }

    #[test]
    fn bite_only_model() {
        let m = MealModel::default().only(GestureKind::Bite);
        let (t, ev) = generate_meal("m", &m, &cfg(), 3).unwrap();
        assert!(!t.is_empty());
        assert!(t.segments().iter().all(|s| s.kind == GestureKind::Bite));
        assert_eq!(ev.len(), t.len());
        for (s, e) in t.segments().iter().zip(&ev) {
            assert!(s.contains(e.t));
        }
    }

    #[test]
    fn rejects_bad_models() {
        let mut m = MealModel::default();
        m.bite.duration.min_s = 0.5;
        assert!(m.check(&cfg()).is_err());
        let m = MealModel::default().only(GestureKind::Bite);
        let mut z = m;
        z.bite.weight = 0.0;
        assert!(z.check(&cfg()).is_err());
        let n = NoiseProfile {
            p_miss: 0.7,
            p_relabel: 0.7,
            ..Default::default()
        };
        assert!(n.check().is_err());
    }

    #[test]
    fn zero_noise_is_identity() {
        let (t, _) = generate_meal("m", &MealModel::default(), &cfg(), 11).unwrap();
        let (p, tags) = perturb(&t, &NoiseProfile::default(), &cfg(), 5).unwrap();
        assert_eq!(p.segments(), t.segments());
        assert!(tags.iter().all(|t| t.expected == MatchCase::Agreement));
        assert_eq!(tags.len(), t.len());
    }

    #[test]
    fn split_everything_on_rest_meal() {
        let mut m = MealModel::default().only(GestureKind::Rest);
        m.rest.duration.min_s = 3.5;
        let (t, _) = generate_meal("m", &m, &cfg(), 2).unwrap();
        let profile = NoiseProfile {
            p_split: 1.0,
            ..Default::default()
        };
        let (p, tags) = perturb(&t, &profile, &cfg(), 2).unwrap();
        assert!(tags.iter().all(|t| t.expected == MatchCase::BoundaryAmbiguityII));
        assert!(p.len() >= 2 * t.len());
    }

    #[test]
    fn perturbed_output_reparses_cleanly() {
        let profile = NoiseProfile {
            jitter_std_ms: 300.0,
            p_supra: 0.3,
            p_split: 0.1,
            p_merge: 0.1,
            p_miss: 0.1,
            p_relabel: 0.1,
            p_straddle: 0.1,
            max_split_parts: 4,
        };
        for seed in 0..20 {
            let (t, _) = generate_meal("m", &MealModel::default(), &cfg(), seed).unwrap();
            let (p, _) = perturb(&t, &profile, &cfg(), seed).unwrap();
            let text = write_segment_csv(&p);
            let back = parse_segment_file(text.as_bytes(), "m", SIM_RATER, &cfg(), TimeUnit::Millis).unwrap();
            assert_eq!(back, p);
        }
    }

    #[test]
    fn config_from_toml() {
        let c = SimConfig::from_toml(
            "meals = 3\n[model]\nmeal_length_s = 120\nbite = { weight = 1, mean_s = 2, std_s = 1, min_s = 1, max_s = 11 }\n[noise]\np_miss = 0.2\n",
        )
        .unwrap();
        assert_eq!(c.meals, 3);
        assert_eq!(c.model.meal_length_s, 120.0);
        assert_eq!(c.model.bite.weight, 1.0);
        assert_eq!(c.model.rest, MealModel::default().rest);
        assert_eq!(c.noise.p_miss, 0.2);
        assert!(SimConfig::from_toml("mealz = 3").is_err());
    }

    #[test]
    fn provenance_rows() {
        let tags = [
            ProvenanceTag::new(0, Perturbation::Delete),
            ProvenanceTag::new(1, Perturbation::Relabel { to: GestureKind::Rest }),
        ];
        assert_eq!(
            write_provenance_csv(&tags),
            "gt_index,perturbation,expected_case,detail\n0,delete,mistake_missed,\n1,relabel,mistake_identity,rest\n"
        );
    }
}
