//! Random linear codes over the erasure channel induced by one-shot training
//! on the XOR model.
//!
//! After training, a data slot whose channel was selected during training is
//! a perfect bit pipe; any other slot outputs a fair coin independent of the
//! input. The receiver knows which is which, so the effective channel is a
//! known-erasure channel. A dense random generator matrix encodes the
//! message over `n_blocks` independent channel blocks and the decoder solves
//! the unerased equations by Gaussian elimination.
//!
//! Random streams are keyed so that configurations differing only in rate
//! share erasure patterns, messages and generator rows: the generator for a
//! shorter message is the leading rows of the generator for a longer one.
//! A decoding success at a higher rate therefore implies success at every
//! lower rate for the same trial.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gf2::{get_bit, set_bit, solve_augmented, transpose64, words_for};
use crate::model::{ceil_tolerant, channel_count, TrainingFraction};
use crate::seed::{derive_seed, stream_rng};

const ERASURE_STREAM: u64 = 11;
const MESSAGE_STREAM: u64 = 12;
const GENERATOR_STREAM: u64 = 13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CodingConfig {
    pub blocklength: usize,
    pub tau: TrainingFraction,
    pub a: f64,
    pub n_blocks: usize,
    /// Message bits per transmission.
    pub rate: f64,
    pub trials: usize,
    pub seed: u64,
}

impl CodingConfig {
    pub fn new(
        blocklength: usize,
        tau: TrainingFraction,
        a: f64,
        n_blocks: usize,
        rate: f64,
        trials: usize,
        seed: u64,
    ) -> Result<Self> {
        if blocklength == 0 || n_blocks == 0 || trials == 0 {
            return Err(Error::InvalidParameter("blocklength, blocks and trials must be positive".into()));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter(format!("a must be positive, got {a}")));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidParameter(format!("rate must be positive, got {rate}")));
        }
        if rate > 1.0 - tau.get() + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "rate {rate} exceeds the data fraction 1 - tau = {}",
                1.0 - tau.get()
            )));
        }
        let cfg = Self { blocklength, tau, a, n_blocks, rate, trials, seed };
        if cfg.message_bits() > cfg.code_len() {
            return Err(Error::RateExceedsSlotBudget { message_bits: cfg.message_bits(), slots: cfg.code_len() });
        }
        Ok(cfg)
    }

    /// `T = ceil(tau B)`.
    pub fn training_len(&self) -> usize {
        (ceil_tolerant(self.tau.get() * self.blocklength as f64) as usize).min(self.blocklength)
    }

    pub fn channels(&self) -> usize {
        channel_count(self.a, self.blocklength)
    }

    pub fn data_slots(&self) -> usize {
        self.blocklength - self.training_len()
    }

    /// `K = floor(R n B)`.
    pub fn message_bits(&self) -> usize {
        let k = self.rate * (self.n_blocks * self.blocklength) as f64;
        let r = k.round();
        if (k - r).abs() <= 1e-9 * r.max(1.0) {
            r as usize
        } else {
            k.floor() as usize
        }
    }

    /// `N_c = n (B - T)`.
    pub fn code_len(&self) -> usize {
        self.n_blocks * self.data_slots()
    }
}

/// Mask over the data slots of one block; `true` marks a slot whose channel
/// was identified during training.
pub fn erasure_pattern(cfg: &CodingConfig, trial: u64, block: u64) -> Vec<bool> {
    let l = cfg.channels();
    let t = cfg.training_len();
    let mut rng = stream_rng(cfg.seed, &[ERASURE_STREAM, trial, block]);
    let mut seen = vec![false; l];
    for _ in 0..t {
        seen[rng.gen_range(0..l)] = true;
    }
    (0..cfg.data_slots()).map(|_| seen[rng.gen_range(0..l)]).collect()
}

/// Dense `K x N` generator matrix stored as packed rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generator {
    k: usize,
    n: usize,
    rows: Vec<Vec<u64>>,
}

impl Generator {
    /// Row `i` is drawn from its own stream, so generators for different `K`
    /// built from one seed share their leading rows.
    pub fn from_seed(seed: u64, k: usize, n: usize) -> Result<Self> {
        if k > n {
            return Err(Error::RateExceedsSlotBudget { message_bits: k, slots: n });
        }
        let w = words_for(n);
        let tail = n % 64;
        let rows = (0..k as u64)
            .map(|i| {
                let mut rng = stream_rng(seed, &[GENERATOR_STREAM, i]);
                let mut row: Vec<u64> = (0..w).map(|_| rng.gen()).collect();
                if tail != 0 {
                    row[w - 1] &= (1u64 << tail) - 1;
                }
                row
            })
            .collect();
        Ok(Self { k, n, rows })
    }

    /// Generator from explicit rows of `n` bits each.
    pub fn from_rows(rows: Vec<Vec<bool>>, n: usize) -> Result<Self> {
        if rows.len() > n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::RateExceedsSlotBudget { message_bits: rows.len(), slots: n });
        }
        let k = rows.len();
        let rows = rows
            .into_iter()
            .map(|r| {
                let mut packed = vec![0u64; words_for(n)];
                for (j, b) in r.into_iter().enumerate() {
                    set_bit(&mut packed, j, b);
                }
                packed
            })
            .collect();
        Ok(Self { k, n, rows })
    }

    pub fn message_bits(&self) -> usize {
        self.k
    }

    pub fn code_len(&self) -> usize {
        self.n
    }

    /// `message x G` for a packed message of `K` bits; returns packed
    /// codeword bits.
    pub fn encode(&self, message: &[u64]) -> Vec<u64> {
        let mut cw = vec![0u64; words_for(self.n)];
        for (i, row) in self.rows.iter().enumerate() {
            if get_bit(message, i) {
                for (c, r) in cw.iter_mut().zip(row) {
                    *c ^= r;
                }
            }
        }
        cw
    }

    /// Solves for the message from the unerased codeword positions. Returns
    /// `None` when the unerased columns do not determine it uniquely.
    pub fn decode(&self, received: &[u64], unerased: &[bool]) -> Option<Vec<u64>> {
        let positions: Vec<usize> = (0..self.n).filter(|&j| unerased[j]).collect();
        if positions.len() < self.k {
            return None;
        }
        // equation j is column j of the generator, transposed in 64x64 blocks
        let mut slot = vec![usize::MAX; self.n];
        for (e, &j) in positions.iter().enumerate() {
            slot[j] = e;
        }
        let mut equations = vec![vec![0u64; words_for(self.k + 1)]; positions.len()];
        let mut block = [0u64; 64];
        for rb in 0..words_for(self.k) {
            for cw in 0..words_for(self.n) {
                for (r, b) in block.iter_mut().enumerate() {
                    *b = self.rows.get(rb * 64 + r).map_or(0, |row| row[cw]);
                }
                transpose64(&mut block);
                for (c, &col) in block.iter().enumerate() {
                    let j = cw * 64 + c;
                    if j < self.n && slot[j] != usize::MAX {
                        equations[slot[j]][rb] = col;
                    }
                }
            }
        }
        for (eq, &j) in equations.iter_mut().zip(&positions) {
            set_bit(eq, self.k, get_bit(received, j));
        }
        solve_augmented(equations, self.k)
    }
}

/// Encodes `message` (packed, `K` bits) with the generator derived from
/// `generator_seed`.
pub fn random_linear_encode(
    message: &[u64],
    message_bits: usize,
    generator_seed: u64,
    code_len: usize,
) -> Result<Vec<u64>> {
    Ok(Generator::from_seed(generator_seed, message_bits, code_len)?.encode(message))
}

/// Recovers a `K`-bit message from the unerased positions of `received`.
pub fn erasure_decode(
    received: &[u64],
    unerased: &[bool],
    generator_seed: u64,
    message_bits: usize,
) -> Result<Option<Vec<u64>>> {
    let g = Generator::from_seed(generator_seed, message_bits, unerased.len())?;
    Ok(g.decode(received, unerased))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CodingResult {
    pub rate: f64,
    pub message_bits: usize,
    pub code_len: usize,
    pub empirical_pe: f64,
    pub errors: usize,
    pub trials: usize,
    /// `(1 - tau)` times the mean fraction of identified data slots.
    pub capacity_estimate: f64,
}

struct TrialOutcome {
    error: bool,
    unerased: usize,
}

fn run_trial(cfg: &CodingConfig, trial: u64) -> TrialOutcome {
    let k = cfg.message_bits();
    let n = cfg.code_len();
    let mut mask = Vec::with_capacity(n);
    for block in 0..cfg.n_blocks as u64 {
        mask.extend(erasure_pattern(cfg, trial, block));
    }
    let unerased = mask.iter().filter(|&&u| u).count();

    let mut rng = stream_rng(cfg.seed, &[MESSAGE_STREAM, trial]);
    let mut message: Vec<u64> = (0..words_for(k)).map(|_| rng.gen()).collect();
    if !k.is_multiple_of(64) {
        let last = message.len() - 1;
        message[last] &= (1u64 << (k % 64)) - 1;
    }
    let generator_seed = derive_seed(cfg.seed, &[GENERATOR_STREAM, trial]);
    let g = Generator::from_seed(generator_seed, k, n).expect("K <= N_c checked at construction");
    let codeword = g.encode(&message);
    // erased positions carry nothing about the input; the decoder ignores them
    let error = match g.decode(&codeword, &mask) {
        Some(decoded) => decoded != message,
        None => true,
    };
    TrialOutcome { error, unerased }
}

/// Block error rate of random linear codes at the configured rate.
pub fn run_coding_experiment(cfg: &CodingConfig) -> Result<CodingResult> {
    let outcomes: Vec<TrialOutcome> = (0..cfg.trials as u64).into_par_iter().map(|t| run_trial(cfg, t)).collect();
    let errors = outcomes.iter().filter(|o| o.error).count();
    let unerased: usize = outcomes.iter().map(|o| o.unerased).sum();
    let identified = if cfg.code_len() == 0 { 0.0 } else { unerased as f64 / (cfg.code_len() * cfg.trials) as f64 };
    Ok(CodingResult {
        rate: cfg.rate,
        message_bits: cfg.message_bits(),
        code_len: cfg.code_len(),
        empirical_pe: errors as f64 / cfg.trials as f64,
        errors,
        trials: cfg.trials,
        capacity_estimate: (1.0 - cfg.tau.get()) * identified,
    })
}

/// Runs one experiment per rate with shared seeds.
pub fn sweep_rates(base: &CodingConfig, rates: &[f64]) -> Result<Vec<CodingResult>> {
    rates
        .iter()
        .map(|&rate| {
            let cfg =
                CodingConfig::new(base.blocklength, base.tau, base.a, base.n_blocks, rate, base.trials, base.seed)?;
            run_coding_experiment(&cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::xor_unseen_probability;
    use proptest::prelude::*;

    fn tau(x: f64) -> TrainingFraction {
        TrainingFraction::new(x).unwrap()
    }

    fn pack(bits: &[bool]) -> Vec<u64> {
        let mut w = vec![0u64; words_for(bits.len()).max(1)];
        for (i, &b) in bits.iter().enumerate() {
            set_bit(&mut w, i, b);
        }
        w
    }

    #[test]
    fn config_dimensions() {
        let c = CodingConfig::new(1000, tau(0.443), 1.0, 20, 0.16, 50, 0).unwrap();
        assert_eq!(c.training_len(), 443);
        assert_eq!(c.channels(), 1000);
        assert_eq!(c.code_len(), 20 * 557);
        assert_eq!(c.message_bits(), 3200);
        assert!(CodingConfig::new(1000, tau(0.443), 1.0, 20, 0.6, 50, 0).is_err());
        assert!(CodingConfig::new(1000, tau(0.443), 1.0, 20, 0.0, 50, 0).is_err());
    }

    #[test]
    fn erasure_pattern_edge_cases() {
        let c = CodingConfig::new(10, tau(1.0), 1.0, 1, 1e-9, 1, 0);
        // tau = 1 leaves no data slot, so no positive rate fits
        assert!(c.is_err());
        let c = CodingConfig { blocklength: 10, tau: tau(1.0), a: 1.0, n_blocks: 1, rate: 0.0, trials: 1, seed: 0 };
        assert!(erasure_pattern(&c, 0, 0).is_empty());
        let c = CodingConfig::new(50, tau(0.2), 0.001, 1, 0.5, 1, 0).unwrap();
        assert_eq!(c.channels(), 1);
        assert!(erasure_pattern(&c, 0, 0).iter().all(|&u| u));
    }

    #[test]
    fn erasure_fraction_matches_oracle() {
        let c = CodingConfig::new(1000, tau(0.443), 1.0, 1, 0.1, 1, 0).unwrap();
        let trials = 400u64;
        let samples: Vec<f64> = (0..trials)
            .map(|t| {
                let m = erasure_pattern(&c, t, 0);
                m.iter().filter(|&&u| u).count() as f64 / m.len() as f64
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / trials as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let expect = 1.0 - xor_unseen_probability(443, 1000);
        assert!((expect - 0.358).abs() < 1e-3);
        assert!((mean - expect).abs() <= 3.0 * (var / trials as f64).sqrt(), "{mean} vs {expect}");
    }

    #[test]
    fn encode_examples() {
        let g = Generator::from_seed(5, 8, 20).unwrap();
        assert_eq!(g.encode(&[0]), vec![0u64]);
        let ones = Generator::from_rows(vec![vec![true; 6]], 6).unwrap();
        assert_eq!(ones.encode(&[1]), vec![0b111111]);
        assert_eq!(ones.encode(&[0]), vec![0]);
        assert!(Generator::from_seed(1, 7, 6).is_err());
        assert!(random_linear_encode(&[0], 7, 1, 6).is_err());
    }

    #[test]
    fn decode_examples() {
        // full-rank 3 x 3 generator without erasures
        let g =
            Generator::from_rows(vec![vec![true, false, false], vec![true, true, false], vec![false, true, true]], 3)
                .unwrap();
        let msg = pack(&[true, false, true]);
        let cw = g.encode(&msg);
        assert_eq!(g.decode(&cw, &[true; 3]), Some(msg.clone()));
        assert_eq!(g.decode(&cw, &[false; 3]), None);

        // K = 2, N = 4, rows 1101 / 0111, position 2 erased:
        // m0 = y0, m0 ^ m1 = y1, m1 = y3 -> unique
        let g = Generator::from_rows(vec![vec![true, true, false, true], vec![false, true, true, true]], 4).unwrap();
        let msg = pack(&[true, true]);
        let cw = g.encode(&msg);
        // codeword = 1101 ^ 0111 = 1010
        assert_eq!(cw, pack(&[true, false, true, false]));
        assert_eq!(g.decode(&cw, &[true, true, false, true]), Some(msg));
    }

    #[test]
    fn seeded_decode_round_trip() {
        let k = 40;
        let n = 100;
        let seed = 77;
        let msg = pack(&(0..k).map(|i| i % 3 == 0).collect::<Vec<_>>());
        let cw = random_linear_encode(&msg, k, seed, n).unwrap();
        let mask: Vec<bool> = (0..n).map(|j| j % 4 != 1).collect();
        assert_eq!(erasure_decode(&cw, &mask, seed, k).unwrap(), Some(msg));
    }

    #[test]
    fn generator_rows_are_nested_across_message_lengths() {
        let small = Generator::from_seed(3, 10, 200).unwrap();
        let large = Generator::from_seed(3, 30, 200).unwrap();
        assert_eq!(small.rows[..], large.rows[..10]);
    }

    proptest! {
        #[test]
        fn encoding_is_linear(a in proptest::collection::vec(any::<bool>(), 24), b in proptest::collection::vec(any::<bool>(), 24), seed in any::<u64>()) {
            let g = Generator::from_seed(seed, 24, 70).unwrap();
            let (pa, pb) = (pack(&a), pack(&b));
            let sum: Vec<u64> = pa.iter().zip(&pb).map(|(x, y)| x ^ y).collect();
            let lhs: Vec<u64> = g.encode(&pa).iter().zip(g.encode(&pb)).map(|(x, y)| x ^ y).collect();
            prop_assert_eq!(lhs, g.encode(&sum));
        }

        #[test]
        fn decoded_message_reproduces_received_bits(msg in proptest::collection::vec(any::<bool>(), 16), mask in proptest::collection::vec(any::<bool>(), 40), seed in any::<u64>()) {
            let g = Generator::from_seed(seed, 16, 40).unwrap();
            let cw = g.encode(&pack(&msg));
            if let Some(decoded) = g.decode(&cw, &mask) {
                let re = g.encode(&decoded);
                for j in 0..40 {
                    if mask[j] {
                        prop_assert_eq!(get_bit(&re, j), get_bit(&cw, j));
                    }
                }
            }
        }
    }

    #[test]
    fn small_experiment_behaves_around_threshold() {
        // B = 200, tau = 0.5, a = 1: capacity (1-tau)(1-(1-1/200)^100) ~ 0.197
        let base = CodingConfig::new(200, tau(0.5), 1.0, 10, 0.1, 30, 4).unwrap();
        let res = sweep_rates(&base, &[0.08, 0.14, 0.26, 0.32]).unwrap();
        assert!(res.windows(2).all(|w| w[1].empirical_pe >= w[0].empirical_pe));
        assert!(res[0].empirical_pe <= 0.1);
        assert_eq!(res[3].empirical_pe, 1.0);
        let expect = 0.5 * (1.0 - xor_unseen_probability(100, 200));
        let cap = res[0].capacity_estimate;
        assert!((cap - expect).abs() < 0.01, "{cap} vs {expect}");
        assert!(res.iter().all(|r| r.errors <= r.trials && (0.0..=1.0).contains(&r.empirical_pe)));
    }
}
