//! The outer coordinate-descent driver: iterate policy → step → update,
//! record a trace, and stop on relative objective change or an iteration
//! cap.
//!
//! The stopping test compares `F` across a window of `W` iterations:
//! `|F_t − F_{t−W}| ≤ rel_tol·|F_{t−W}|`. `W = 1` is the literal
//! per-iteration rule; it can fire spuriously when a single coordinate
//! update is tiny (any coordinate clamped at its bound produces a zero
//! step), so experiment configurations typically set `W = NR` for
//! epoch-level stopping.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::covariance::SolverState;
use crate::error::Result;
use crate::model::{SampleCovariance, SequenceMatrix};
use crate::policies::{
    select_bernoulli, select_random, thompson_round, thompson_update, BernoulliPolicyConfig,
    RewardCache, ThompsonConfig, ThompsonState,
};

/// Coordinate-selection policy for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PolicyKind {
    Random,
    Bernoulli(BernoulliPolicyConfig),
    Thompson(ThompsonConfig),
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::Bernoulli(_) => "bernoulli",
            PolicyKind::Thompson(_) => "thompson",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PolicyKind::Random => Ok(()),
            PolicyKind::Bernoulli(cfg) => cfg.validate(),
            PolicyKind::Thompson(cfg) => cfg.validate(),
        }
    }
}

/// Termination rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    /// Relative objective-change tolerance.
    pub rel_tol: f64,
    /// Iteration cap.
    pub max_iters: u64,
    /// Comparison window `W` (1 = per-iteration rule).
    pub window: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            rel_tol: 1e-6,
            max_iters: 1500,
            window: 1,
        }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(crate::Error::Config(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if self.max_iters == 0 || self.window == 0 {
            return Err(crate::Error::Config(
                "max_iters and window must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One per-iteration trace record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Iteration index, starting at 1.
    pub t: u64,
    /// Selected coordinate.
    pub k: usize,
    /// Applied step.
    pub delta: f64,
    /// Realized reward (exact objective decrease).
    pub reward: f64,
    /// Objective after the update.
    pub objective: f64,
    /// Whether the greedy branch fired (bandit policies only).
    pub greedy: Option<bool>,
    /// Winning inner arm (Thompson only).
    pub arm: Option<usize>,
    /// Sampled exploration probability (Thompson only).
    pub nu: Option<f64>,
    /// Solver wall-clock seconds elapsed at the end of the iteration.
    pub elapsed_s: f64,
}

/// Run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub iterations: u64,
    /// Number of full reward scans (initial scan plus scheduled refreshes).
    pub reward_scans: u64,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub wall_s: f64,
    /// True when the relative-change rule fired before the iteration cap.
    pub converged: bool,
}

/// Per-iteration log of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub summary: TraceSummary,
}

pub const TRACE_CSV_HEADER: &str = "t,k,delta,reward,F,greedy,arm,nu,elapsed_s";

impl Trace {
    /// Objective value after each iteration.
    pub fn objective_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        for r in &self.records {
            let greedy = match r.greedy {
                Some(true) => "1",
                Some(false) => "0",
                None => "",
            };
            let arm = r.arm.map(|a| a.to_string()).unwrap_or_default();
            let nu = r.nu.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.t, r.k, r.delta, r.reward, r.objective, greedy, arm, nu, r.elapsed_s
            )?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Trace> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != TRACE_CSV_HEADER {
            return Err(crate::Error::Serialization(format!(
                "unexpected trace header {header:?}"
            )));
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 9 {
                return Err(crate::Error::Serialization(format!(
                    "trace line {} has {} fields",
                    i + 2,
                    fields.len()
                )));
            }
            let parse_f = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|e| crate::Error::Serialization(format!("bad float {s:?}: {e}")))
            };
            records.push(TraceRecord {
                t: fields[0]
                    .parse()
                    .map_err(|e| crate::Error::Serialization(format!("bad t: {e}")))?,
                k: fields[1]
                    .parse()
                    .map_err(|e| crate::Error::Serialization(format!("bad k: {e}")))?,
                delta: parse_f(fields[2])?,
                reward: parse_f(fields[3])?,
                objective: parse_f(fields[4])?,
                greedy: match fields[5] {
                    "" => None,
                    "1" => Some(true),
                    "0" => Some(false),
                    other => {
                        return Err(crate::Error::Serialization(format!(
                            "bad greedy flag {other:?}"
                        )))
                    }
                },
                arm: if fields[6].is_empty() {
                    None
                } else {
                    Some(
                        fields[6]
                            .parse()
                            .map_err(|e| crate::Error::Serialization(format!("bad arm: {e}")))?,
                    )
                },
                nu: if fields[7].is_empty() {
                    None
                } else {
                    Some(parse_f(fields[7])?)
                },
                elapsed_s: parse_f(fields[8])?,
            });
        }
        let summary = TraceSummary {
            iterations: records.len() as u64,
            reward_scans: 0,
            initial_objective: f64::NAN,
            final_objective: records.last().map(|r| r.objective).unwrap_or(f64::NAN),
            wall_s: records.last().map(|r| r.elapsed_s).unwrap_or(0.0),
            converged: false,
        };
        Ok(Trace { records, summary })
    }
}

/// Result of one solver run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub gamma: Vec<f64>,
    pub trace: Trace,
}

/// Execute one coordinate-descent run.
///
/// Per iteration: the policy selects a coordinate (with a full reward-scan
/// refresh on its schedule), the closed-form step is evaluated and applied,
/// bandit bookkeeping runs, and a record is appended. Terminates when
/// `|F_t − F_{t−W}| ≤ rel_tol·|F_{t−W}|` or at `max_iters`.
pub fn run(
    q: &SequenceMatrix,
    sigma_hat: &SampleCovariance,
    noise_var: f64,
    policy: &PolicyKind,
    stop: &StopRule,
    rng: &mut impl Rng,
) -> Result<RunOutput> {
    policy.validate()?;
    stop.validate()?;
    let clock = Instant::now();
    let mut state = SolverState::init(q, sigma_hat, noise_var)?;
    let nr = state.num_coords();
    let mut reward_scans = 0u64;

    enum Bandit {
        None,
        Bernoulli {
            cfg: BernoulliPolicyConfig,
            cache: RewardCache,
        },
        Thompson {
            cfg: ThompsonConfig,
            cache: RewardCache,
            ts: ThompsonState,
        },
    }

    let mut bandit = match policy {
        PolicyKind::Random => Bandit::None,
        PolicyKind::Bernoulli(cfg) => {
            let scan = state.full_reward_scan(q, sigma_hat)?;
            reward_scans += 1;
            Bandit::Bernoulli {
                cfg: *cfg,
                cache: RewardCache::from_scan(&scan, 0),
            }
        }
        PolicyKind::Thompson(cfg) => {
            let scan = state.full_reward_scan(q, sigma_hat)?;
            reward_scans += 1;
            Bandit::Thompson {
                cfg: *cfg,
                cache: RewardCache::from_scan(&scan, 0),
                ts: ThompsonState::new(cfg)?,
            }
        }
    };

    let initial_objective = state.cached_objective();
    // The history never holds more than min(window, iterations) + 1 values.
    let mut f_hist: Vec<f64> = Vec::with_capacity(stop.window.min(stop.max_iters) as usize + 1);
    f_hist.push(initial_objective);
    let mut records: Vec<TraceRecord> = Vec::new();
    let mut converged = false;

    for t in 1..=stop.max_iters {
        // Scheduled wholesale cache refresh at the current state.
        match &mut bandit {
            Bandit::Bernoulli { cfg, cache } if t % cfg.refresh_period == 0 => {
                let scan = state.full_reward_scan(q, sigma_hat)?;
                cache.refresh(&scan, t);
                reward_scans += 1;
            }
            Bandit::Thompson { cfg, cache, .. } if t % cfg.refresh_period == 0 => {
                let scan = state.full_reward_scan(q, sigma_hat)?;
                cache.refresh(&scan, t);
                reward_scans += 1;
            }
            _ => {}
        }

        let (k, greedy, arm, nu) = match &mut bandit {
            Bandit::None => (select_random(nr, rng), None, None, None),
            Bandit::Bernoulli { cfg, cache } => {
                let (k, greedy) = select_bernoulli(cache, cfg, rng);
                (k, Some(greedy), None, None)
            }
            Bandit::Thompson { cache, ts, .. } => {
                let draw = thompson_round(ts, cache, rng)?;
                (
                    draw.coordinate,
                    Some(draw.greedy),
                    Some(draw.arm),
                    Some(draw.nu),
                )
            }
        };

        let step = match state.coordinate_step(q, sigma_hat, k) {
            Ok(s) => s,
            Err(crate::Error::LostDefiniteness(_)) => {
                // Rebuild the inverse and retry once.
                state.refactor(sigma_hat)?;
                state.coordinate_step(q, sigma_hat, k)?
            }
            Err(e) => return Err(e),
        };
        let f_before = state.cached_objective();

        if let (Bandit::Thompson { ts, .. }, Some(arm), Some(nu), Some(greedy)) =
            (&mut bandit, arm, nu, greedy)
        {
            thompson_update(ts, arm, nu, greedy, step.reward, f_before);
        }

        let (delta, reward) = (step.delta, step.reward);
        state.apply_update(q, sigma_hat, &step)?;

        // The selected coordinate's cache entry is refreshed at the
        // post-update state.
        match &mut bandit {
            Bandit::Bernoulli { cache, .. } | Bandit::Thompson { cache, .. } => {
                let post = state.coordinate_step(q, sigma_hat, k)?;
                cache.update_entry(k, post.reward);
            }
            Bandit::None => {}
        }

        let f_after = state.cached_objective();
        records.push(TraceRecord {
            t,
            k,
            delta,
            reward,
            objective: f_after,
            greedy,
            arm,
            nu,
            elapsed_s: clock.elapsed().as_secs_f64(),
        });

        f_hist.push(f_after);
        if f_hist.len() > stop.window as usize + 1 {
            f_hist.remove(0);
        }
        if f_hist.len() == stop.window as usize + 1 {
            let f_ref = f_hist[0];
            let denom = f_ref.abs().max(f64::MIN_POSITIVE);
            if (f_after - f_ref).abs() <= stop.rel_tol * denom {
                converged = true;
                break;
            }
        }
    }

    let wall_s = clock.elapsed().as_secs_f64();
    let final_objective = state.cached_objective();
    Ok(RunOutput {
        gamma: state.gamma().to_vec(),
        trace: Trace {
            summary: TraceSummary {
                iterations: records.len() as u64,
                reward_scans,
                initial_objective,
                final_objective,
                wall_s,
                converged,
            },
            records,
        },
    })
}

/// Per-iteration suboptimality `ε(γ^t) = F_t − F*`, floored at zero.
pub fn suboptimality_series(trace: &Trace, f_star: f64) -> Vec<f64> {
    trace
        .records
        .iter()
        .map(|r| (r.objective - f_star).max(0.0))
        .collect()
}

/// Replay the `(k, δ)` sequence of a trace, yielding `γ^t` after each
/// iteration through the visitor. Reproduces the solver's iterates exactly
/// (same additions in the same order).
pub fn replay_gamma(num_coords: usize, trace: &Trace, mut visit: impl FnMut(u64, &[f64])) {
    let mut gamma = vec![0.0f64; num_coords];
    for r in &trace.records {
        gamma[r.k] += r.delta;
        if gamma[r.k] < 0.0 {
            gamma[r.k] = 0.0;
        }
        visit(r.t, &gamma);
    }
}
