//! Experiment execution: runs every (policy × seed) cell of a resolved
//! spec, decodes the estimates, and writes traces, summaries and the
//! aggregate/timing CSVs. Cells are independent; seeds may run concurrently
//! and the aggregate is sorted, so output bytes do not depend on
//! scheduling.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use actdet_core::adc::{quantize_complex_matrix, quantized_surrogate};
use actdet_core::detect::{calibrate_threshold, decode, false_alarm_prob, missed_detection_prob};
use actdet_core::model::{
    generate_scenario, sample_covariance, ActiveDevice, SampleCovariance, Scenario, SequenceMatrix,
};
use actdet_core::rng::{RngHub, Stream};
use actdet_core::solver::{run, StopRule};
use actdet_core::Error;

use crate::spec::ResolvedSpec;

pub const AGGREGATE_CSV_HEADER: &str =
    "schema_version,policy,seed,final_F,iterations,reward_scans,p_md,p_fa,config_digest";
pub const TIMING_CSV_HEADER: &str = "schema_version,policy,seed,wall_s";
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// One row of the aggregate table (deterministic fields only; wall-clock
/// time goes to the sibling timing file so the aggregate is byte-stable
/// across reruns).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateRow {
    pub policy: String,
    pub seed: u64,
    pub final_f: f64,
    pub iterations: u64,
    pub reward_scans: u64,
    pub p_md: f64,
    pub p_fa: f64,
    pub config_digest: String,
    #[serde(skip)]
    pub wall_s: f64,
}

/// Per-cell run summary, one JSON file per (policy, seed).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub policy: String,
    pub seed: u64,
    pub config_digest: String,
    pub num_devices: usize,
    pub num_messages: usize,
    pub num_active: usize,
    pub adc_bits: Option<u32>,
    pub iterations: u64,
    pub reward_scans: u64,
    pub initial_f: f64,
    pub final_f: f64,
    pub converged: bool,
    pub wall_s: f64,
    pub threshold: f64,
    pub num_declared: usize,
    pub p_md: f64,
    pub p_fa: f64,
    /// Ground-truth activity, enabling replay-based figures.
    pub truth_active: Vec<ActiveDevice>,
}

#[derive(Debug)]
pub struct CellFailure {
    pub policy: String,
    pub seed: u64,
    pub error: Error,
}

#[derive(Debug)]
pub struct RunReport {
    pub rows: Vec<AggregateRow>,
    pub failures: Vec<CellFailure>,
}

/// The solver inputs for one seed, after the optional ADC front end.
struct PreparedScenario {
    scenario: Scenario,
    sequences: SequenceMatrix,
    sigma_hat: SampleCovariance,
    noise_var: f64,
}

fn prepare_scenario(resolved: &ResolvedSpec, seed: u64) -> Result<PreparedScenario, Error> {
    let hub = RngHub::new(resolved.config.master_seed).trial(seed);
    let scenario = generate_scenario(&resolved.config, &hub)?;
    let (sequences, sigma_hat, noise_var) = match &resolved.adc {
        None => (
            scenario.sequences.clone(),
            sample_covariance(&scenario.received),
            scenario.noise_var,
        ),
        Some(qcfg) => {
            let yq = quantize_complex_matrix(&scenario.received, qcfg);
            let sigma_hat_q = sample_covariance(&yq);
            let surrogate = quantized_surrogate(scenario.noise_var, &sigma_hat_q, qcfg);
            (
                scenario.sequences.scaled(surrogate.seq_scale),
                sigma_hat_q,
                surrogate.noise_floor,
            )
        }
    };
    Ok(PreparedScenario {
        scenario,
        sequences,
        sigma_hat,
        noise_var,
    })
}

fn trace_path(out_dir: &Path, policy: &str, seed: u64) -> PathBuf {
    out_dir.join(format!("trace_{policy}_s{seed:04}.csv"))
}

fn summary_path(out_dir: &Path, policy: &str, seed: u64) -> PathBuf {
    out_dir.join(format!("summary_{policy}_s{seed:04}.json"))
}

/// Write a file atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or(""),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

fn run_cell(
    resolved: &ResolvedSpec,
    prepared: &PreparedScenario,
    policy: &actdet_core::solver::PolicyKind,
    seed: u64,
    stop: &StopRule,
    digest: &str,
    out_dir: &Path,
) -> Result<AggregateRow, Error> {
    let hub = RngHub::new(resolved.config.master_seed).trial(seed);
    let mut rng = hub.stream(Stream::Policy);
    let out = run(
        &prepared.sequences,
        &prepared.sigma_hat,
        prepared.noise_var,
        policy,
        stop,
        &mut rng,
    )?;
    let cfg = &resolved.config;
    let s_th = calibrate_threshold(&out.gamma, cfg.num_messages(), cfg.num_active)?;
    let result = decode(&out.gamma, cfg.num_messages(), s_th);
    let p_md = missed_detection_prob(&prepared.scenario.truth, &result);
    let p_fa = false_alarm_prob(&prepared.scenario.truth, &result);

    if resolved.emit_traces {
        let mut buf = Vec::new();
        out.trace.write_csv(&mut buf)?;
        write_atomic(&trace_path(out_dir, policy.name(), seed), &buf)?;
    }
    if resolved.emit_summaries {
        let summary = RunSummary {
            schema_version: CSV_SCHEMA_VERSION,
            policy: policy.name().into(),
            seed,
            config_digest: digest.into(),
            num_devices: cfg.num_devices,
            num_messages: cfg.num_messages(),
            num_active: cfg.num_active,
            adc_bits: resolved.adc.as_ref().map(|a| a.bits),
            iterations: out.trace.summary.iterations,
            reward_scans: out.trace.summary.reward_scans,
            initial_f: out.trace.summary.initial_objective,
            final_f: out.trace.summary.final_objective,
            converged: out.trace.summary.converged,
            wall_s: out.trace.summary.wall_s,
            threshold: s_th,
            num_declared: result.num_declared(),
            p_md,
            p_fa,
            truth_active: prepared.scenario.truth.active.clone(),
        };
        let text = serde_json::to_string_pretty(&summary)
            .map_err(|e| Error::Serialization(e.to_string()))?;
        write_atomic(&summary_path(out_dir, policy.name(), seed), text.as_bytes())?;
    }
    Ok(AggregateRow {
        policy: policy.name().into(),
        seed,
        final_f: out.trace.summary.final_objective,
        iterations: out.trace.summary.iterations,
        reward_scans: out.trace.summary.reward_scans,
        p_md,
        p_fa,
        config_digest: digest.into(),
        wall_s: out.trace.summary.wall_s,
    })
}

/// Execute every (policy × seed) cell. Failed cells are recorded and the
/// rest continue; the aggregate holds the successful rows sorted by
/// (policy, seed).
pub fn run_experiment(
    resolved: &ResolvedSpec,
    out_dir: &Path,
    jobs: usize,
) -> Result<RunReport, Error> {
    fs::create_dir_all(out_dir)?;
    let digest = resolved.digest();
    let spec_toml =
        toml::to_string_pretty(resolved).map_err(|e| Error::Serialization(e.to_string()))?;
    write_atomic(&out_dir.join("resolved_spec.toml"), spec_toml.as_bytes())?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;

    let seed_results: Vec<(Vec<AggregateRow>, Vec<CellFailure>)> = pool.install(|| {
        (0..resolved.num_seeds)
            .into_par_iter()
            .map(|seed| {
                let mut rows = Vec::new();
                let mut failures = Vec::new();
                match prepare_scenario(resolved, seed) {
                    Ok(prepared) => {
                        for policy in &resolved.policies {
                            match run_cell(
                                resolved,
                                &prepared,
                                policy,
                                seed,
                                &resolved.stop,
                                &digest,
                                out_dir,
                            ) {
                                Ok(row) => rows.push(row),
                                Err(error) => failures.push(CellFailure {
                                    policy: policy.name().into(),
                                    seed,
                                    error,
                                }),
                            }
                        }
                    }
                    Err(error) => {
                        for policy in &resolved.policies {
                            failures.push(CellFailure {
                                policy: policy.name().into(),
                                seed,
                                error: Error::Config(error.to_string()),
                            });
                        }
                    }
                }
                (rows, failures)
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in seed_results {
        rows.extend(r);
        failures.extend(f);
    }
    rows.sort_by(|a, b| a.policy.cmp(&b.policy).then(a.seed.cmp(&b.seed)));

    if resolved.emit_aggregate {
        let mut agg = String::from(AGGREGATE_CSV_HEADER);
        agg.push('\n');
        let mut timing = String::from(TIMING_CSV_HEADER);
        timing.push('\n');
        for row in &rows {
            agg.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                CSV_SCHEMA_VERSION,
                row.policy,
                row.seed,
                row.final_f,
                row.iterations,
                row.reward_scans,
                row.p_md,
                row.p_fa,
                row.config_digest
            ));
            timing.push_str(&format!(
                "{},{},{},{}\n",
                CSV_SCHEMA_VERSION, row.policy, row.seed, row.wall_s
            ));
        }
        write_atomic(&out_dir.join("aggregate.csv"), agg.as_bytes())?;
        write_atomic(&out_dir.join("timing.csv"), timing.as_bytes())?;
    }

    Ok(RunReport { rows, failures })
}

/// Parse an aggregate CSV, rejecting unknown schemas.
pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>, Error> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != AGGREGATE_CSV_HEADER {
        return Err(Error::Serialization(format!(
            "unexpected aggregate header in {}: {header:?}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::Serialization(format!(
                "aggregate line {} has {} fields",
                i + 2,
                f.len()
            )));
        }
        let version: u32 = f[0]
            .parse()
            .map_err(|e| Error::Serialization(format!("bad schema version: {e}")))?;
        if version != CSV_SCHEMA_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported aggregate schema version {version}"
            )));
        }
        let parse_f = |s: &str| -> Result<f64, Error> {
            s.parse()
                .map_err(|e| Error::Serialization(format!("bad float {s:?}: {e}")))
        };
        rows.push(AggregateRow {
            policy: f[1].into(),
            seed: f[2]
                .parse()
                .map_err(|e| Error::Serialization(format!("bad seed: {e}")))?,
            final_f: parse_f(f[3])?,
            iterations: f[4]
                .parse()
                .map_err(|e| Error::Serialization(format!("bad iterations: {e}")))?,
            reward_scans: f[5]
                .parse()
                .map_err(|e| Error::Serialization(format!("bad scans: {e}")))?,
            p_md: parse_f(f[6])?,
            p_fa: parse_f(f[7])?,
            config_digest: f[8].into(),
            wall_s: 0.0,
        });
    }
    Ok(rows)
}

pub fn read_summary(out_dir: &Path, policy: &str, seed: u64) -> Result<RunSummary, Error> {
    let path = summary_path(out_dir, policy, seed);
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Serialization(format!("bad summary {}: {e}", path.display())))
}

pub fn read_trace(
    out_dir: &Path,
    policy: &str,
    seed: u64,
) -> Result<actdet_core::solver::Trace, Error> {
    let path = trace_path(out_dir, policy, seed);
    let text = fs::read_to_string(&path)?;
    actdet_core::solver::Trace::read_csv(&text)
}
