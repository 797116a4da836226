//! Synthetic pool streams with a hidden labeling function.
//!
//! Stands in for weekly sensor reports when no real data is wired up. Each
//! round draws a fresh herd snapshot from per-feature ranges, with a mild
//! per-round mean shift on a random feature subset so consecutive pools are
//! not identically distributed. The labeling oracle combines a linear part,
//! two pairwise interactions, and one smooth nonlinearity over normalized
//! features, plus additive Gaussian noise keyed per (case, timestamp).

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Pool, Sample};
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Number of rounds T.
    pub rounds: usize,
    /// Pool size per round.
    pub pool_size: usize,
    /// Feature dimension.
    pub dim: usize,
    /// Standard deviation of additive label noise.
    pub noise_sd: f64,
    /// Standard deviation of the per-round mean shift, in normalized units.
    pub drift: f64,
    /// Fraction of all generated samples set aside as the fixed holdout.
    pub holdout_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            rounds: 100,
            pool_size: 500,
            dim: 10,
            noise_sd: 1.0,
            drift: 0.05,
            holdout_fraction: 0.2,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("synthetic rounds must be positive".into()));
        }
        if self.pool_size == 0 {
            return Err(Error::Config("synthetic pool_size must be positive".into()));
        }
        if self.dim == 0 {
            return Err(Error::Config("synthetic dim must be positive".into()));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::Config("synthetic noise_sd must be >= 0".into()));
        }
        if !(self.drift >= 0.0) {
            return Err(Error::Config("synthetic drift must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::Config(
                "synthetic holdout_fraction must be in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    fn holdout_per_round(&self) -> usize {
        let h = self.holdout_fraction;
        ((self.pool_size as f64) * h / (1.0 - h)).round() as usize
    }
}

struct FeatureDef {
    name: &'static str,
    lo: f64,
    hi: f64,
    integer: bool,
}

const HERD_FEATURES: [FeatureDef; 10] = [
    FeatureDef { name: "casein", lo: 1.5, hi: 3.0, integer: false },
    FeatureDef { name: "fat", lo: 2.5, hi: 5.5, integer: false },
    FeatureDef { name: "protein", lo: 2.8, hi: 4.2, integer: false },
    FeatureDef { name: "dim", lo: 0.0, hi: 305.0, integer: true },
    FeatureDef { name: "lactose", lo: 4.0, hi: 5.2, integer: false },
    FeatureDef { name: "oa", lo: 0.4, hi: 1.6, integer: false },
    FeatureDef { name: "sufa", lo: 1.0, hi: 3.0, integer: false },
    FeatureDef { name: "mufa", lo: 0.4, hi: 2.0, integer: false },
    FeatureDef { name: "igg", lo: 0.1, hi: 1.1, integer: false },
    FeatureDef { name: "activity", lo: 20.0, hi: 80.0, integer: false },
];

/// Number of features the drift shift touches each round.
const DRIFT_FEATURES: usize = 3;

/// Reference outcome moments the generator standardizes its labels to:
/// signal plus configured noise lands at mean ~10.55 and sd ~7.89.
const LABEL_MEAN: f64 = 10.55;
const LABEL_SD: f64 = 7.89;
/// Probe draws used to standardize one stream's signal moments.
const CALIBRATION_DRAWS: usize = 4000;

fn feature_range(j: usize) -> (f64, f64, bool) {
    if j < HERD_FEATURES.len() {
        let f = &HERD_FEATURES[j];
        (f.lo, f.hi, f.integer)
    } else {
        (0.0, 1.0, false)
    }
}

pub fn feature_names(dim: usize) -> Arc<[String]> {
    (0..dim)
        .map(|j| {
            if j < HERD_FEATURES.len() {
                HERD_FEATURES[j].name.to_string()
            } else {
                format!("x{j}")
            }
        })
        .collect::<Vec<_>>()
        .into()
}

/// Partition of the synthetic features into positively and negatively
/// acting sets, as a domain expert would hand them to Pareto sampling.
pub fn default_pareto_partition(names: &[String]) -> (Vec<usize>, Vec<usize>) {
    const POSITIVE: [&str; 7] = ["casein", "fat", "protein", "oa", "sufa", "mufa", "igg"];
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (j, name) in names.iter().enumerate() {
        if POSITIVE.contains(&name.as_str()) {
            pos.push(j);
        } else {
            neg.push(j);
        }
    }
    (pos, neg)
}

/// Hidden signal over normalized features: a linear part, two pairwise
/// interactions, and one smooth nonlinearity (a coagulation collapse once
/// the casein-protein blend drops into the sparse low tail of the herd
/// distribution). Terms drop out when the dimension is too small to carry
/// them.
fn signal(u: &[f64]) -> f64 {
    let d = u.len();
    let mut h = 0.0;
    if d >= 1 {
        h += 3.0 * u[0];
    }
    if d >= 2 {
        h += 1.5 * u[1] + 2.5 * u[0] * u[1];
    }
    if d >= 3 {
        h += 2.0 * u[2];
        // smooth coagulation collapse on the low casein-protein tail
        let blend = 0.5 * (u[0] + u[2]);
        h -= 6.0 / (1.0 + (-10.0 * (0.30 - blend)).exp());
    }
    if d >= 4 {
        h -= 2.0 * u[3];
    }
    if d >= 5 {
        h -= 2.0 * u[3] * u[4];
    }
    h
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; clamping u1 away from zero keeps ln finite.
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// The hidden labeling function, affinely standardized per stream so the
/// label distribution hits the reference moments regardless of where the
/// herd's profiles landed.
#[derive(Debug, Clone)]
pub struct SynthOracle {
    dim: usize,
    noise_sd: f64,
    noise_seed: u64,
    scale: f64,
    offset: f64,
}

impl SynthOracle {
    fn normalized(&self, sample: &Sample) -> Vec<f64> {
        debug_assert_eq!(sample.dim(), self.dim);
        sample
            .features
            .iter()
            .enumerate()
            .map(|(j, x)| {
                let (lo, hi, _) = feature_range(j);
                (x - lo) / (hi - lo)
            })
            .collect()
    }

    pub fn label(&self, sample: &Sample) -> f64 {
        let mut noise_rng = seeds::rng(seeds::mix(
            seeds::mix(self.noise_seed, seeds::hash_str(&sample.case_id)),
            sample.timestamp,
        ));
        self.expected_label(sample) + self.noise_sd * standard_normal(&mut noise_rng)
    }

    /// Noise-free value, exposed for diagnostics.
    pub fn expected_label(&self, sample: &Sample) -> f64 {
        self.scale * signal(&self.normalized(sample)) + self.offset
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }
}

/// Fixed holdout carved from a stream: never available for pooling.
#[derive(Debug, Clone)]
pub struct Holdout {
    pub samples: Vec<Sample>,
    pub labels: Vec<f64>,
}

impl Holdout {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SynthStream {
    pub pools: Vec<Pool>,
    pub holdout: Holdout,
    pub oracle: SynthOracle,
    pub feature_names: Arc<[String]>,
}

/// Latent cow profiles of one stream: a herd is a weighted mixture of a
/// few recurring (quality, nutrition) profiles, so pools carry many
/// near-duplicate cows and a long tail of rare profiles. Profile positions
/// are standardized within the stream to pin the label moments.
struct HerdModel {
    profiles: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
}

const HERD_PROFILES: usize = 24;
/// Within-profile spread of the latent factors.
const PROFILE_JITTER: f64 = 0.15;

impl HerdModel {
    fn generate(seed: u64) -> Self {
        let mut rng = seeds::rng(seeds::mix(seed, 0xCA7E));
        let mut qs: Vec<f64> = (0..HERD_PROFILES).map(|_| standard_normal(&mut rng)).collect();
        let mut ms: Vec<f64> = (0..HERD_PROFILES).map(|_| standard_normal(&mut rng)).collect();
        for vs in [&mut qs, &mut ms] {
            let n = vs.len() as f64;
            let mean = vs.iter().sum::<f64>() / n;
            let sd = (vs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
                .sqrt()
                .max(1e-9);
            for v in vs.iter_mut() {
                *v = (*v - mean) / sd;
            }
        }
        // fixed long-tailed profile weights: a few herds dominate
        let raw: Vec<f64> = (0..HERD_PROFILES)
            .map(|p| 1.0 / (p as f64 + 1.0).powf(1.1))
            .collect();
        let total: f64 = raw.iter().sum();
        let mut acc = 0.0;
        let cumulative = raw
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        HerdModel {
            profiles: qs.into_iter().zip(ms).collect(),
            cumulative,
        }
    }

    fn draw_factors(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let toss: f64 = rng.gen();
        let p = self
            .cumulative
            .iter()
            .position(|c| toss <= *c)
            .unwrap_or(HERD_PROFILES - 1);
        let (q, m) = self.profiles[p];
        (
            q + PROFILE_JITTER * standard_normal(rng),
            m + PROFILE_JITTER * standard_normal(rng),
        )
    }
}

/// One herd snapshot row. Composition and fatty-acid features load on the
/// cow's latent profile with bell-shaped marginals, so pools are correlated
/// and redundant; days in milk stays uniform over the lactation cycle and
/// extras are plain uniform.
fn draw_sample(
    herd: &HerdModel,
    rng: &mut ChaCha8Rng,
    dim: usize,
    shifts: &[f64],
    case_id: String,
    timestamp: u64,
    names: &Arc<[String]>,
) -> Sample {
    let (quality, nutrition) = herd.draw_factors(rng);
    let mut features = Vec::with_capacity(dim);
    for j in 0..dim {
        let (lo, hi, integer) = feature_range(j);
        let base: f64 = match j {
            0 => 0.5 + 0.22 * quality + 0.05 * standard_normal(rng),
            1 => 0.5 + 0.18 * quality + 0.10 * nutrition + 0.06 * standard_normal(rng),
            2 => 0.5 + 0.20 * quality + 0.05 * nutrition + 0.05 * standard_normal(rng),
            3 => {
                let steps = (hi - lo).round() as u64;
                rng.gen_range(0..=steps) as f64 / steps as f64
            }
            4 => 0.5 - 0.08 * quality + 0.12 * nutrition + 0.10 * standard_normal(rng),
            5 => 0.5 + 0.20 * nutrition + 0.10 * standard_normal(rng),
            6 => 0.5 + 0.15 * nutrition + 0.10 * standard_normal(rng),
            7 => 0.5 + 0.12 * nutrition + 0.12 * standard_normal(rng),
            8 => 0.5 - 0.08 * quality + 0.18 * standard_normal(rng),
            9 => 0.5 + 0.06 * quality + 0.18 * standard_normal(rng),
            _ => rng.gen::<f64>(),
        };
        let u = (base + shifts[j]).clamp(0.0, 1.0);
        let mut x = lo + u * (hi - lo);
        if integer {
            x = x.round();
        }
        features.push(x);
    }
    Sample::new(case_id, timestamp, features, names.clone())
}

/// Generates `rounds` pools of `pool_size` samples plus a proportional
/// holdout, together with the labeling oracle. Equal seeds give equal
/// streams and labels.
pub fn synth_pool_stream(cfg: &SynthConfig, seed: u64) -> Result<SynthStream> {
    cfg.validate()?;
    let names = feature_names(cfg.dim);
    let per_round_holdout = cfg.holdout_per_round();

    let herd = HerdModel::generate(seed);

    // standardize this stream's signal against a probe draw from the same
    // herd, so configured noise plus signal lands on the reference moments
    let (scale, offset) = {
        let mut rng = seeds::rng(seeds::mix(seed, 0xCA1B));
        let shifts = vec![0.0; cfg.dim];
        let h: Vec<f64> = (0..CALIBRATION_DRAWS)
            .map(|i| {
                let s = draw_sample(
                    &herd,
                    &mut rng,
                    cfg.dim,
                    &shifts,
                    format!("k{i}"),
                    0,
                    &names,
                );
                let u: Vec<f64> = s
                    .features
                    .iter()
                    .enumerate()
                    .map(|(j, x)| {
                        let (lo, hi, _) = feature_range(j);
                        (x - lo) / (hi - lo)
                    })
                    .collect();
                signal(&u)
            })
            .collect();
        let n = h.len() as f64;
        let mean = h.iter().sum::<f64>() / n;
        let sd = (h.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
            .sqrt()
            .max(1e-9);
        let signal_sd = (LABEL_SD * LABEL_SD - cfg.noise_sd * cfg.noise_sd)
            .max(0.25)
            .sqrt();
        let scale = signal_sd / sd;
        (scale, LABEL_MEAN - scale * mean)
    };

    let oracle = SynthOracle {
        dim: cfg.dim,
        noise_sd: cfg.noise_sd,
        noise_seed: seeds::mix(seed, 0x4E01),
        scale,
        offset,
    };
    let mut pools = Vec::with_capacity(cfg.rounds);
    let mut holdout_samples = Vec::with_capacity(per_round_holdout * cfg.rounds);
    for round in 1..=cfg.rounds {
        let mut rng = seeds::rng(seeds::mix(seed, round as u64));

        let mut shifts = vec![0.0; cfg.dim];
        if cfg.drift > 0.0 {
            for _ in 0..DRIFT_FEATURES.min(cfg.dim) {
                let j = rng.gen_range(0..cfg.dim);
                shifts[j] += cfg.drift * standard_normal(&mut rng);
            }
        }

        let mut samples = Vec::with_capacity(cfg.pool_size);
        for i in 0..cfg.pool_size {
            samples.push(draw_sample(
                &herd,
                &mut rng,
                cfg.dim,
                &shifts,
                format!("c{i:04}"),
                round as u64,
                &names,
            ));
        }
        for i in 0..per_round_holdout {
            holdout_samples.push(draw_sample(
                &herd,
                &mut rng,
                cfg.dim,
                &shifts,
                format!("h{i:04}"),
                round as u64,
                &names,
            ));
        }
        pools.push(Pool::new(round, samples)?);
    }

    let labels = holdout_samples.iter().map(|s| oracle.label(s)).collect();
    Ok(SynthStream {
        pools,
        holdout: Holdout {
            samples: holdout_samples,
            labels,
        },
        oracle,
        feature_names: names,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate_stream;

    fn small() -> SynthConfig {
        SynthConfig {
            rounds: 5,
            pool_size: 40,
            dim: 10,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn shape_matches_config() {
        let stream = synth_pool_stream(&small(), 7).unwrap();
        assert_eq!(stream.pools.len(), 5);
        assert!(stream.pools.iter().all(|p| p.len() == 40));
        validate_stream(&stream.pools).unwrap();
        // holdout fraction 0.2 -> 10 extra per round of 40
        assert_eq!(stream.holdout.len(), 5 * 10);
    }

    #[test]
    fn equal_seeds_give_identical_streams_and_labels() {
        let a = synth_pool_stream(&small(), 42).unwrap();
        let b = synth_pool_stream(&small(), 42).unwrap();
        for (pa, pb) in a.pools.iter().zip(&b.pools) {
            assert_eq!(pa.samples(), pb.samples());
        }
        assert_eq!(a.holdout.labels, b.holdout.labels);
        let s = &a.pools[0].samples()[3];
        assert_eq!(a.oracle.label(s), b.oracle.label(s));
    }

    #[test]
    fn different_seeds_differ() {
        let a = synth_pool_stream(&small(), 1).unwrap();
        let b = synth_pool_stream(&small(), 2).unwrap();
        assert_ne!(a.pools[0].samples()[0], b.pools[0].samples()[0]);
    }

    #[test]
    fn features_respect_ranges() {
        let stream = synth_pool_stream(&small(), 3).unwrap();
        for pool in &stream.pools {
            for s in pool.samples() {
                for (j, x) in s.features.iter().enumerate() {
                    let (lo, hi, integer) = feature_range(j);
                    assert!(*x >= lo && *x <= hi, "feature {j} = {x} outside [{lo}, {hi}]");
                    if integer {
                        assert_eq!(x.fract(), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn non_positive_dimensions_are_config_errors() {
        for bad in [
            SynthConfig { rounds: 0, ..small() },
            SynthConfig { pool_size: 0, ..small() },
            SynthConfig { dim: 0, ..small() },
        ] {
            assert!(synth_pool_stream(&bad, 1).is_err());
        }
    }

    #[test]
    fn rounds_are_consecutive_from_one() {
        let stream = synth_pool_stream(&small(), 11).unwrap();
        for (i, p) in stream.pools.iter().enumerate() {
            assert_eq!(p.round(), i + 1);
        }
    }

    #[test]
    fn feature_names_are_stable_across_rounds() {
        let stream = synth_pool_stream(&small(), 11).unwrap();
        let names = stream.pools[0].samples()[0].feature_names.clone();
        for pool in &stream.pools {
            for s in pool.samples() {
                assert_eq!(s.feature_names, names);
            }
        }
    }
}
