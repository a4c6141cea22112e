//! Coordinate-selection strategies.
//!
//! Three policies drive the descent loop:
//!
//! - uniform random selection;
//! - Bernoulli ε-greedy: with probability ε pick the coordinate with the
//!   largest cached reward, otherwise pick uniformly; the cache is rebuilt
//!   by a full reward scan every `B` iterations and the selected
//!   coordinate's entry is refreshed after every update;
//! - Thompson sampling: a `q`-armed Beta-Bernoulli bandit chooses the greedy
//!   probability itself. Each round samples `ν_i ~ Beta(α_i, β_i)` per arm,
//!   plays the arm with the largest sample, draws the greedy/explore branch
//!   from `Bernoulli(ν)`, and feeds the realized coordinate reward back into
//!   the winning arm's posterior.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::covariance::ScanEntry;
use crate::error::{Error, Result};

/// Cached per-coordinate reward estimates with staleness bookkeeping.
#[derive(Debug, Clone)]
pub struct RewardCache {
    r_bar: Vec<f64>,
    last_full_refresh: u64,
}

impl RewardCache {
    /// Build the cache from a full reward scan taken at iteration `t`.
    pub fn from_scan(scan: &[ScanEntry], t: u64) -> Self {
        RewardCache {
            r_bar: scan.iter().map(|e| e.reward).collect(),
            last_full_refresh: t,
        }
    }

    /// Overwrite every entry from a fresh full scan.
    pub fn refresh(&mut self, scan: &[ScanEntry], t: u64) {
        debug_assert_eq!(scan.len(), self.r_bar.len());
        for (slot, e) in self.r_bar.iter_mut().zip(scan) {
            *slot = e.reward;
        }
        self.last_full_refresh = t;
    }

    /// Overwrite the single entry for the just-updated coordinate.
    pub fn update_entry(&mut self, k: usize, reward: f64) {
        self.r_bar[k] = reward;
    }

    pub fn len(&self) -> usize {
        self.r_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_bar.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.r_bar
    }

    pub fn last_full_refresh(&self) -> u64 {
        self.last_full_refresh
    }

    /// Index of the largest cached reward; lowest index wins ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.r_bar)
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    best
}

/// ε-greedy configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernoulliPolicyConfig {
    /// Probability of taking the greedy branch.
    pub epsilon: f64,
    /// Full-scan refresh period `B`.
    pub refresh_period: u64,
}

impl BernoulliPolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!(
                "epsilon must be in [0, 1], got {}",
                self.epsilon
            )));
        }
        if self.refresh_period == 0 {
            return Err(Error::Config("refresh period must be at least 1".into()));
        }
        Ok(())
    }
}

/// Thompson-sampling configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThompsonConfig {
    /// Number of inner bandit arms `q`.
    pub num_arms: usize,
    /// Full-scan refresh period `E`.
    pub refresh_period: u64,
    /// Prior Beta parameters (uniform prior by default).
    pub prior_alpha: f64,
    pub prior_beta: f64,
}

impl ThompsonConfig {
    pub fn new(num_arms: usize, refresh_period: u64) -> Self {
        ThompsonConfig {
            num_arms,
            refresh_period,
            prior_alpha: 1.0,
            prior_beta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_arms == 0 {
            return Err(Error::Config(
                "Thompson bandit needs at least one arm".into(),
            ));
        }
        if self.refresh_period == 0 {
            return Err(Error::Config("refresh period must be at least 1".into()));
        }
        if !(self.prior_alpha > 0.0) || !(self.prior_beta > 0.0) {
            return Err(Error::Config(
                "Beta prior parameters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Posterior parameters of the inner `q`-armed bandit.
#[derive(Debug, Clone)]
pub struct ThompsonState {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl ThompsonState {
    pub fn new(cfg: &ThompsonConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(ThompsonState {
            alpha: vec![cfg.prior_alpha; cfg.num_arms],
            beta: vec![cfg.prior_beta; cfg.num_arms],
        })
    }

    pub fn num_arms(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
}

/// Outcome of one Thompson round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThompsonDraw {
    /// Selected coordinate.
    pub coordinate: usize,
    /// Winning arm `j_t`.
    pub arm: usize,
    /// The winning arm's sampled exploration probability `ν`.
    pub nu: f64,
    /// Whether the greedy branch fired.
    pub greedy: bool,
}

/// Uniform coordinate selection.
pub fn select_random(num_coords: usize, rng: &mut impl Rng) -> usize {
    debug_assert!(num_coords >= 1);
    rng.gen_range(0..num_coords)
}

/// ε-greedy selection over the cached rewards. Returns the coordinate and
/// whether the greedy branch fired.
pub fn select_bernoulli(
    cache: &RewardCache,
    cfg: &BernoulliPolicyConfig,
    rng: &mut impl Rng,
) -> (usize, bool) {
    let greedy = rng.gen::<f64>() < cfg.epsilon;
    if greedy {
        (cache.argmax(), true)
    } else {
        (select_random(cache.len(), rng), false)
    }
}

/// A `Beta(α, β)` variate for arbitrary positive real shapes, generated as
/// `G_α/(G_α + G_β)` from two independent Gamma variates (rejection-sampled,
/// so non-integer shapes are exact).
pub fn sample_beta(alpha: f64, beta: f64, rng: &mut impl Rng) -> Result<f64> {
    if !(alpha > 0.0) || !(beta > 0.0) {
        return Err(Error::Domain(format!(
            "Beta shape parameters must be positive, got ({alpha}, {beta})"
        )));
    }
    let ga = Gamma::new(alpha, 1.0)
        .map_err(|e| Error::Domain(format!("invalid Gamma shape {alpha}: {e}")))?;
    let gb = Gamma::new(beta, 1.0)
        .map_err(|e| Error::Domain(format!("invalid Gamma shape {beta}: {e}")))?;
    let x: f64 = ga.sample(rng);
    let y: f64 = gb.sample(rng);
    let sum = x + y;
    if sum > 0.0 {
        Ok(x / sum)
    } else {
        // Both variates underflowed; the ratio is ill-defined but any value
        // in (0,1) is equally (un)likely at this point.
        Ok(0.5)
    }
}

/// One Thompson round: sample all arms, pick the largest, draw the branch
/// and select a coordinate.
pub fn thompson_round(
    ts: &ThompsonState,
    cache: &RewardCache,
    rng: &mut impl Rng,
) -> Result<ThompsonDraw> {
    let mut best_arm = 0;
    let mut best_nu = f64::NEG_INFINITY;
    for i in 0..ts.num_arms() {
        let nu = sample_beta(ts.alpha[i], ts.beta[i], rng)?;
        if nu > best_nu {
            best_nu = nu;
            best_arm = i;
        }
    }
    let greedy = rng.gen::<f64>() < best_nu;
    let coordinate = if greedy {
        cache.argmax()
    } else {
        select_random(cache.len(), rng)
    };
    Ok(ThompsonDraw {
        coordinate,
        arm: best_arm,
        nu: best_nu,
        greedy,
    })
}

/// Posterior update for the winning arm from the realized coordinate reward.
///
/// The increment weight is `κ = min(r/|F|, 1)`: the objective can be
/// negative or cross zero under the normalized power scaling, and a raw
/// `r/F` could drive the Beta parameters non-positive, so the magnitude is
/// used and the weight is capped. Greedy rounds credit `α += ν·κ`; explore
/// rounds credit `β += (1−ν)·κ`.
pub fn thompson_update(
    ts: &mut ThompsonState,
    arm: usize,
    nu: f64,
    greedy: bool,
    reward: f64,
    objective: f64,
) {
    let denom = objective.abs();
    let kappa = if denom > 0.0 {
        (reward / denom).min(1.0)
    } else if reward > 0.0 {
        1.0
    } else {
        0.0
    };
    let kappa = kappa.max(0.0);
    if greedy {
        ts.alpha[arm] += nu * kappa;
    } else {
        ts.beta[arm] += (1.0 - nu) * kappa;
    }
}

/// Wholesale cache overwrite from a scheduled full scan.
pub fn refresh_cache(cache: &mut RewardCache, scan: &[ScanEntry], t: u64) {
    cache.refresh(scan, t);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RngHub, Stream};

    fn policy_rng(seed: u64) -> rand_chacha::ChaCha20Rng {
        RngHub::new(seed).stream(Stream::Policy)
    }

    fn cache_from(values: &[f64]) -> RewardCache {
        let scan: Vec<ScanEntry> = values
            .iter()
            .map(|&reward| ScanEntry { delta: 0.0, reward })
            .collect();
        RewardCache::from_scan(&scan, 0)
    }

    #[test]
    fn select_random_single_coordinate() {
        let mut rng = policy_rng(0);
        for _ in 0..10 {
            assert_eq!(select_random(1, &mut rng), 0);
        }
    }

    #[test]
    fn select_random_is_uniform() {
        let mut rng = policy_rng(1);
        let mut counts = [0usize; 4];
        let draws = 100_000;
        for _ in 0..draws {
            counts[select_random(4, &mut rng)] += 1;
        }
        for &c in &counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.25).abs() <= 0.01, "frequency {freq}");
        }
    }

    #[test]
    fn select_random_reproducible() {
        let seq1: Vec<usize> = {
            let mut rng = policy_rng(9);
            (0..32).map(|_| select_random(100, &mut rng)).collect()
        };
        let seq2: Vec<usize> = {
            let mut rng = policy_rng(9);
            (0..32).map(|_| select_random(100, &mut rng)).collect()
        };
        assert_eq!(seq1, seq2);
    }

    #[test]
    fn bernoulli_epsilon_one_always_greedy() {
        let cache = cache_from(&[0.1, 0.9, 0.4]);
        let cfg = BernoulliPolicyConfig {
            epsilon: 1.0,
            refresh_period: 1,
        };
        let mut rng = policy_rng(2);
        for _ in 0..100 {
            let (k, greedy) = select_bernoulli(&cache, &cfg, &mut rng);
            assert_eq!(k, 1);
            assert!(greedy);
        }
    }

    #[test]
    fn bernoulli_epsilon_zero_never_greedy() {
        let cache = cache_from(&[0.1, 0.9, 0.4]);
        let cfg = BernoulliPolicyConfig {
            epsilon: 0.0,
            refresh_period: 1,
        };
        let mut rng = policy_rng(3);
        for _ in 0..100 {
            let (_, greedy) = select_bernoulli(&cache, &cfg, &mut rng);
            assert!(!greedy);
        }
    }

    #[test]
    fn bernoulli_greedy_fraction() {
        let cache = cache_from(&[0.1, 0.9, 0.4]);
        let cfg = BernoulliPolicyConfig {
            epsilon: 0.6,
            refresh_period: 1,
        };
        let mut rng = policy_rng(4);
        let rounds = 100_000;
        let mut greedy_count = 0usize;
        for _ in 0..rounds {
            let (_, greedy) = select_bernoulli(&cache, &cfg, &mut rng);
            greedy_count += greedy as usize;
        }
        let freq = greedy_count as f64 / rounds as f64;
        assert!((freq - 0.6).abs() <= 0.01, "greedy fraction {freq}");
    }

    #[test]
    fn argmax_breaks_ties_low() {
        let cache = cache_from(&[0.2, 0.7, 0.7, 0.1]);
        assert_eq!(cache.argmax(), 1);
    }

    #[test]
    fn argmax_scale_invariance() {
        let values = [0.3, 1.4, 0.9, 1.4, 0.0];
        let scaled: Vec<f64> = values.iter().map(|v| v * 17.5).collect();
        assert_eq!(cache_from(&values).argmax(), cache_from(&scaled).argmax());
    }

    #[test]
    fn beta_uniform_case_moments() {
        let mut rng = policy_rng(5);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| sample_beta(1.0, 1.0, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        // Uniform(0,1): mean 1/2, sd of the mean = 1/sqrt(12 n).
        let se = (1.0 / 12.0f64 / n as f64).sqrt();
        assert!((mean - 0.5).abs() <= 4.0 * se, "mean {mean}");
    }

    #[test]
    fn beta_nonint_shape_mean() {
        let (a, b) = (5.3, 2.1);
        let mut rng = policy_rng(6);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| sample_beta(a, b, &mut rng).unwrap())
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let expected = a / (a + b);
        let var = expected * (1.0 - expected) / (a + b + 1.0);
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - expected).abs() <= 3.0 * se,
            "mean {mean}, expected {expected} ± {se}"
        );
    }

    #[test]
    fn beta_large_alpha_tail() {
        let mut rng = policy_rng(7);
        let n = 1_000;
        let above = (0..n)
            .filter(|_| sample_beta(1e4, 1.0, &mut rng).unwrap() > 0.99)
            .count();
        assert!(
            above as f64 / n as f64 >= 0.99,
            "only {above}/{n} above 0.99"
        );
    }

    #[test]
    fn beta_rejects_nonpositive_shapes() {
        let mut rng = policy_rng(8);
        assert!(sample_beta(0.0, 1.0, &mut rng).is_err());
        assert!(sample_beta(1.0, -2.0, &mut rng).is_err());
    }

    #[test]
    fn thompson_single_arm() {
        let cfg = ThompsonConfig::new(1, 1);
        let ts = ThompsonState::new(&cfg).unwrap();
        let cache = cache_from(&[0.0, 1.0]);
        let mut rng = policy_rng(10);
        for _ in 0..50 {
            let draw = thompson_round(&ts, &cache, &mut rng).unwrap();
            assert_eq!(draw.arm, 0);
        }
    }

    #[test]
    fn thompson_dominant_arm_wins() {
        let cfg = ThompsonConfig::new(5, 1);
        let mut ts = ThompsonState::new(&cfg).unwrap();
        ts.alpha[0] = 100.0;
        let cache = cache_from(&[0.0, 1.0, 0.5]);
        let mut rng = policy_rng(11);
        let rounds = 10_000;
        let wins = (0..rounds)
            .filter(|_| thompson_round(&ts, &cache, &mut rng).unwrap().arm == 0)
            .count();
        assert!(
            wins as f64 / rounds as f64 >= 0.95,
            "dominant arm won only {wins}/{rounds}"
        );
    }

    #[test]
    fn thompson_symmetric_arms() {
        let q = 5;
        let cfg = ThompsonConfig::new(q, 1);
        let ts = ThompsonState::new(&cfg).unwrap();
        let cache = cache_from(&[0.0, 1.0]);
        let mut rng = policy_rng(12);
        let rounds = 10_000;
        let mut counts = vec![0usize; q];
        for _ in 0..rounds {
            counts[thompson_round(&ts, &cache, &mut rng).unwrap().arm] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let freq = c as f64 / rounds as f64;
            assert!(
                (freq - 1.0 / q as f64).abs() <= 0.02,
                "arm {i} frequency {freq}"
            );
        }
    }

    #[test]
    fn thompson_update_arithmetic() {
        let cfg = ThompsonConfig::new(3, 1);
        // Zero reward leaves the state unchanged.
        let mut ts = ThompsonState::new(&cfg).unwrap();
        thompson_update(&mut ts, 1, 0.8, true, 0.0, -5.0);
        assert_eq!(ts.alpha(), &[1.0, 1.0, 1.0]);
        assert_eq!(ts.beta(), &[1.0, 1.0, 1.0]);
        // Greedy: α += ν·κ with κ = r/|F| = 0.5.
        thompson_update(&mut ts, 1, 0.8, true, 1.0, -2.0);
        assert!((ts.alpha()[1] - 1.4).abs() < 1e-15);
        assert_eq!(ts.beta()[1], 1.0);
        // Explore: β += (1−ν)·κ.
        thompson_update(&mut ts, 2, 0.8, false, 1.0, 2.0);
        assert!((ts.beta()[2] - 1.1).abs() < 1e-15);
        assert_eq!(ts.alpha()[2], 1.0);
    }

    #[test]
    fn thompson_kappa_clamped() {
        let cfg = ThompsonConfig::new(1, 1);
        let mut ts = ThompsonState::new(&cfg).unwrap();
        // r/|F| far above 1 clamps to 1.
        thompson_update(&mut ts, 0, 0.5, true, 100.0, 0.001);
        assert!((ts.alpha()[0] - 1.5).abs() < 1e-15);
        // Zero objective with positive reward clamps to 1 as well.
        thompson_update(&mut ts, 0, 0.5, false, 3.0, 0.0);
        assert!((ts.beta()[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn thompson_parameters_stay_positive() {
        let cfg = ThompsonConfig::new(4, 1);
        let mut ts = ThompsonState::new(&cfg).unwrap();
        let mut rng = policy_rng(13);
        for _ in 0..100_000 {
            let arm = rng.gen_range(0..4);
            let nu: f64 = rng.gen();
            let greedy = rng.gen::<bool>();
            let reward = rng.gen::<f64>() * 10.0;
            let objective = (rng.gen::<f64>() - 0.5) * 200.0;
            thompson_update(&mut ts, arm, nu, greedy, reward, objective);
        }
        assert!(ts.alpha().iter().all(|&a| a > 0.0));
        assert!(ts.beta().iter().all(|&b| b > 0.0));
    }

    #[test]
    fn cache_refresh_and_no_write_contract() {
        let mut cache = cache_from(&[0.1, 0.2, 0.3]);
        assert_eq!(cache.last_full_refresh(), 0);
        let scan: Vec<ScanEntry> = [0.5, 0.6, 0.7]
            .iter()
            .map(|&reward| ScanEntry { delta: 0.0, reward })
            .collect();
        refresh_cache(&mut cache, &scan, 10);
        assert_eq!(cache.values(), &[0.5, 0.6, 0.7]);
        assert_eq!(cache.last_full_refresh(), 10);
        // A single-entry update never touches other entries.
        let before: Vec<u64> = cache.values().iter().map(|v| v.to_bits()).collect();
        cache.update_entry(1, 0.05);
        let after: Vec<u64> = cache.values().iter().map(|v| v.to_bits()).collect();
        assert_eq!(before[0], after[0]);
        assert_eq!(before[2], after[2]);
        assert_eq!(cache.values()[1], 0.05);
    }
}
