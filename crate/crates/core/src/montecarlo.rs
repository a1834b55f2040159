//! Seeded simulation of the XOR random-channel model.
//!
//! Each trial owns a ChaCha8 stream derived from `(seed, trial)`. Within a
//! trial the draws happen in a fixed order (selections, then channel states,
//! then inputs), so estimators that only need the first few selections read
//! the same prefix a full [`Trajectory`] would. Per-trial values are
//! collected into an indexed buffer and reduced sequentially, which keeps
//! every estimate bit-identical for any number of worker threads.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{GainSource, SimConfig};
use crate::numerics::neumaier_sum;
use crate::seed::stream_rng;

const TRAJECTORY_STREAM: u64 = 1;
const GAIN_STREAM: u64 = 2;

/// Below this many trials the 3-sigma normal interval is not trustworthy.
pub const MIN_TRIALS_FOR_CI: usize = 10_000;

/// One block of the XOR model. Channel indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trajectory {
    pub inputs: Vec<u8>,
    pub selections: Vec<usize>,
    pub states: Vec<u8>,
    pub outputs: Vec<u8>,
}

impl Trajectory {
    pub fn is_consistent(&self) -> bool {
        self.outputs.iter().enumerate().all(|(t, &y)| y == self.inputs[t] ^ self.states[self.selections[t]])
    }
}

/// Sample mean with a 3-sigma normal-approximation half width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub ci_half_width: f64,
    pub trials: usize,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        assert!(n > 0, "an estimate needs at least one sample");
        let mean = neumaier_sum(samples.iter().copied()) / n as f64;
        let var = if n > 1 { neumaier_sum(samples.iter().map(|&x| (x - mean).powi(2))) / (n - 1) as f64 } else { 0.0 };
        Self { mean, ci_half_width: 3.0 * (var / n as f64).sqrt(), trials: n }
    }

    pub fn ci_low(&self) -> f64 {
        self.mean - self.ci_half_width
    }

    pub fn ci_high(&self) -> f64 {
        self.mean + self.ci_half_width
    }

    pub fn covers(&self, value: f64) -> bool {
        (value - self.mean).abs() <= self.ci_half_width + 1e-12 * value.abs().max(1.0)
    }
}

fn trial_rng(cfg: &SimConfig, trial: u64) -> ChaCha8Rng {
    stream_rng(cfg.seed, &[TRAJECTORY_STREAM, trial])
}

/// Draws a full block: `B` channel selections, `L` channel states, then the
/// inputs (zero during training, fair bits afterwards).
pub fn simulate_trajectory(cfg: &SimConfig, trial: u64) -> Trajectory {
    let b = cfg.blocklength();
    let l = cfg.channel_count();
    let t_train = cfg.training_len.min(b);
    let mut rng = trial_rng(cfg, trial);
    let selections: Vec<usize> = (0..b).map(|_| rng.gen_range(0..l)).collect();
    let states: Vec<u8> = (0..l).map(|_| rng.gen::<bool>() as u8).collect();
    let inputs: Vec<u8> = (0..b).map(|t| if t < t_train { 0 } else { rng.gen::<bool>() as u8 }).collect();
    let outputs = inputs.iter().zip(&selections).map(|(&x, &k)| x ^ states[k]).collect();
    Trajectory { inputs, selections, states, outputs }
}

/// Runs `f(trial_rng, seen_stamps, stamp)` for every trial and returns the
/// per-trial outputs in trial order.
fn run_trials<T, F>(cfg: &SimConfig, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, &mut [u64], u64) -> T + Sync,
{
    let l = cfg.channel_count();
    (0..cfg.trials as u64)
        .into_par_iter()
        .map_init(
            || vec![0u64; l],
            |stamps, trial| {
                let mut rng = trial_rng(cfg, trial);
                f(&mut rng, stamps, trial + 1)
            },
        )
        .collect()
}

fn mark(stamps: &mut [u64], k: usize, stamp: u64) -> bool {
    let fresh = stamps[k] != stamp;
    stamps[k] = stamp;
    fresh
}

/// Fraction of trials in which the channel at slot `t+1` was not selected in
/// slots `1..=t`.
pub fn estimate_unseen_probability(cfg: &SimConfig, t: usize) -> Result<Estimate> {
    Ok(estimate_unseen_curve(cfg, &[t])?.remove(0))
}

/// [`estimate_unseen_probability`] at several slots from a single pass.
pub fn estimate_unseen_curve(cfg: &SimConfig, ts: &[usize]) -> Result<Vec<Estimate>> {
    let b = cfg.blocklength();
    if let Some(&bad) = ts.iter().find(|&&t| t >= b) {
        return Err(Error::InvalidParameter(format!("slot {bad} outside block of length {b}")));
    }
    let max_t = ts.iter().copied().max().unwrap_or(0);
    let l = cfg.channel_count();
    let per_trial = run_trials(cfg, |rng, stamps, stamp| {
        let mut unseen_at = vec![0u8; max_t + 1];
        for (slot, flag) in unseen_at.iter_mut().enumerate() {
            let k = rng.gen_range(0..l);
            *flag = (stamps[k] != stamp) as u8;
            if slot < max_t {
                mark(stamps, k, stamp);
            }
        }
        unseen_at
    });
    Ok(ts.iter().map(|&t| Estimate::from_samples(&per_trial.iter().map(|v| v[t] as f64).collect::<Vec<_>>())).collect())
}

/// Mean number of distinct channels among the first `t` selections.
pub fn estimate_distinct_channels(cfg: &SimConfig, t: usize) -> Result<Estimate> {
    Ok(estimate_distinct_curve(cfg, &[t])?.remove(0))
}

/// [`estimate_distinct_channels`] at several prefix lengths from a single pass.
pub fn estimate_distinct_curve(cfg: &SimConfig, ts: &[usize]) -> Result<Vec<Estimate>> {
    let b = cfg.blocklength();
    if let Some(&bad) = ts.iter().find(|&&t| t == 0 || t > b) {
        return Err(Error::InvalidParameter(format!("prefix length {bad} outside 1..={b}")));
    }
    let max_t = ts.iter().copied().max().unwrap_or(1);
    let l = cfg.channel_count();
    let per_trial = run_trials(cfg, |rng, stamps, stamp| {
        let mut counts = vec![0u32; max_t + 1];
        let mut distinct = 0u32;
        for slot in 1..=max_t {
            let k = rng.gen_range(0..l);
            if mark(stamps, k, stamp) {
                distinct += 1;
            }
            counts[slot] = distinct;
        }
        counts
    });
    Ok(ts.iter().map(|&t| Estimate::from_samples(&per_trial.iter().map(|v| v[t] as f64).collect::<Vec<_>>())).collect())
}

/// Empirical `I(x_{T+1}; y_{T+1} | training)`.
///
/// Given the training, the first data slot carries exactly one bit when its
/// channel was seen during training and nothing otherwise, so each trial
/// contributes that indicator.
pub fn estimate_data_phase_mi(cfg: &SimConfig) -> Result<Estimate> {
    let t = cfg.training_len;
    if t >= cfg.blocklength() {
        return Err(Error::InvalidParameter("no data slot after training (tau = 1)".into()));
    }
    let l = cfg.channel_count();
    let per_trial = run_trials(cfg, |rng, stamps, stamp| {
        for _ in 0..t {
            let k = rng.gen_range(0..l);
            mark(stamps, k, stamp);
        }
        let k = rng.gen_range(0..l);
        (stamps[k] == stamp) as u8 as f64
    });
    Ok(Estimate::from_samples(&per_trial))
}

/// Sample mean of `log2(1 + g^2)`; normal gains are drawn from the seeded
/// stream, explicit samples are used as given.
pub fn estimate_gain_expectation(gains: &GainSource, samples: usize, seed: u64) -> Result<Estimate> {
    let f = |g: f64| (g * g).ln_1p() / std::f64::consts::LN_2;
    match gains {
        GainSource::Samples { values } => {
            if values.is_empty() {
                return Err(Error::NoGains);
            }
            Ok(Estimate::from_samples(&values.iter().map(|&g| f(g)).collect::<Vec<_>>()))
        }
        GainSource::Normal { mean, std_dev } => {
            if samples == 0 {
                return Err(Error::InvalidParameter("samples must be positive".into()));
            }
            const CHUNK: usize = 4096;
            let chunks = samples.div_ceil(CHUNK);
            let values: Vec<f64> = (0..chunks as u64)
                .into_par_iter()
                .flat_map_iter(|c| {
                    let mut rng = stream_rng(seed, &[GAIN_STREAM, c]);
                    let n = CHUNK.min(samples - c as usize * CHUNK);
                    (0..n)
                        .map(move |_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            f(mean + std_dev * z)
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            Ok(Estimate::from_samples(&values))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrainingFraction;
    use crate::oracle::{xor_block_entropy, xor_finite_mutual_information, xor_unseen_probability, XorExactConfig};

    fn cfg(t: usize, tau: f64, a: f64, trials: usize, seed: u64) -> SimConfig {
        SimConfig::new(t, TrainingFraction::new(tau).unwrap(), a, trials, seed).unwrap()
    }

    #[test]
    fn trajectory_contract() {
        let c = cfg(5, 0.5, 0.7, 1, 42);
        let tr = simulate_trajectory(&c, 3);
        assert!(tr.is_consistent());
        assert_eq!(tr, simulate_trajectory(&c, 3));
        assert_ne!(tr, simulate_trajectory(&c, 4));
        assert_eq!(tr.outputs.len(), c.blocklength());
        assert!(tr.inputs[..5].iter().all(|&x| x == 0));
        let single = cfg(5, 0.5, 1e-6, 1, 1);
        assert_eq!(single.channel_count(), 1);
        assert!(simulate_trajectory(&single, 0).selections.iter().all(|&k| k == 0));
    }

    #[test]
    fn estimators_read_the_trajectory_prefix() {
        let c = cfg(6, 0.5, 1.0, 200, 9);
        let mi = estimate_data_phase_mi(&c).unwrap();
        let from_traj: f64 = (0..200)
            .map(|i| {
                let tr = simulate_trajectory(&c, i);
                tr.selections[..6].contains(&tr.selections[6]) as u8 as f64
            })
            .sum::<f64>()
            / 200.0;
        assert!((mi.mean - from_traj).abs() < 1e-12);
    }

    #[test]
    fn unseen_probability_examples() {
        let c = cfg(2, 0.5, 1.0, 100_000, 0);
        let e0 = estimate_unseen_probability(&c, 0).unwrap();
        assert_eq!((e0.mean, e0.ci_half_width), (1.0, 0.0));
        let e2 = estimate_unseen_probability(&c, 2).unwrap();
        assert!(e2.covers(0.5625), "{e2:?}");
        // L = B: tau = 1 so the whole block is training, B = L = 500
        let c = cfg(500, 1.0, 1.0, 100_000, 0);
        let e = estimate_unseen_probability(&c, 499).unwrap();
        assert!(e.covers(xor_unseen_probability(499, 500)), "{e:?}");
    }

    #[test]
    fn distinct_channel_examples() {
        let c = cfg(2, 0.5, 1.0, 100_000, 0);
        let e1 = estimate_distinct_channels(&c, 1).unwrap();
        assert_eq!((e1.mean, e1.ci_half_width), (1.0, 0.0));
        assert!(estimate_distinct_channels(&c, 2).unwrap().covers(1.75));
        assert!(estimate_distinct_channels(&c, 0).is_err());
    }

    #[test]
    fn data_phase_examples() {
        let c = cfg(0, 0.5, 1.0, 1_000, 0);
        assert_eq!(estimate_data_phase_mi(&c).unwrap().mean, 0.0);
        let c = cfg(2, 0.5, 1.0, 100_000, 0);
        assert!(estimate_data_phase_mi(&c).unwrap().covers(0.4375));
        assert!(estimate_data_phase_mi(&cfg(3, 1.0, 1.0, 10, 0)).is_err());
    }

    #[test]
    fn larger_system_against_oracle() {
        let c = cfg(1_000, 0.5, 1.0, 20_000, 5);
        let exact = XorExactConfig::from_fraction(1_000, c.tau, 1.0).unwrap();
        let d = estimate_distinct_channels(&c, 1_000).unwrap();
        assert!(d.covers(xor_block_entropy(&exact)), "{d:?}");
        let mi = estimate_data_phase_mi(&c).unwrap();
        assert!(mi.covers(xor_finite_mutual_information(&exact)), "{mi:?}");
    }

    #[test]
    fn curves_match_single_point_estimators() {
        let c = cfg(4, 0.5, 1.0, 2_000, 3);
        let curve = estimate_unseen_curve(&c, &[0, 1, 3, 7]).unwrap();
        for (i, &t) in [0usize, 1, 3, 7].iter().enumerate() {
            assert_eq!(curve[i], estimate_unseen_probability(&c, t).unwrap());
        }
        let curve = estimate_distinct_curve(&c, &[1, 4, 8]).unwrap();
        assert_eq!(curve[1], estimate_distinct_channels(&c, 4).unwrap());
    }

    #[test]
    fn estimates_independent_of_thread_count() {
        let c = cfg(10, 0.5, 1.0, 5_000, 11);
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = single.install(|| estimate_distinct_channels(&c, 10).unwrap());
        let b = many.install(|| estimate_distinct_channels(&c, 10).unwrap());
        assert_eq!(a, b);
        let g1 = single.install(|| estimate_gain_expectation(&GainSource::standard_normal(), 10_000, 3).unwrap());
        let g2 = many.install(|| estimate_gain_expectation(&GainSource::standard_normal(), 10_000, 3).unwrap());
        assert_eq!(g1, g2);
    }

    #[test]
    fn calibration_across_seeds() {
        let mut covered = [0usize; 3];
        for seed in 0..100 {
            let c = cfg(2, 0.5, 1.0, 10_000, seed);
            covered[0] += estimate_unseen_probability(&c, 2).unwrap().covers(0.5625) as usize;
            covered[1] += estimate_distinct_channels(&c, 2).unwrap().covers(1.75) as usize;
            covered[2] += estimate_data_phase_mi(&c).unwrap().covers(0.4375) as usize;
        }
        assert!(covered.iter().all(|&c| c >= 99), "{covered:?}");
    }

    #[test]
    fn interval_shrinks_as_inverse_root() {
        let wide = estimate_data_phase_mi(&cfg(2, 0.5, 1.0, 20_000, 1)).unwrap();
        let narrow = estimate_data_phase_mi(&cfg(2, 0.5, 1.0, 40_000, 1)).unwrap();
        let ratio = wide.ci_half_width / (narrow.ci_half_width * std::f64::consts::SQRT_2);
        assert!((ratio - 1.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn gain_expectation_examples() {
        let zeros = GainSource::Samples { values: vec![0.0; 4] };
        assert_eq!(estimate_gain_expectation(&zeros, 4, 0).unwrap().mean, 0.0);
        let ones = GainSource::Samples { values: vec![1.0; 3] };
        assert_eq!(estimate_gain_expectation(&ones, 3, 0).unwrap().mean, 1.0);
        let quad = crate::analytic::gain_expectation(&GainSource::standard_normal()).unwrap();
        let mc = estimate_gain_expectation(&GainSource::standard_normal(), 1_000_000, 0).unwrap();
        assert!(mc.covers(quad), "{mc:?} vs {quad}");
    }
}
