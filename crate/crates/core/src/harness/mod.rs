//! Seeded Monte Carlo sweeps over SNR.
//!
//! Every `(snr index, trial index)` pair gets its own generator seeded with
//! [`trial_seed`], so a row depends only on the plan and the master seed. Rows
//! are computed on a bounded worker pool and written in `(snr, trial)` order.

mod output;
mod plan;

pub use output::{write_csv, RunManifest, MANIFEST_SUFFIX};
pub use plan::{parse_plan, validate_config, ExperimentPlan, ReceiverKind, Variant};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use crate::channel::Scenario;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::metrics::{
    check_identifiability, demod_counts, effective_channel, nmse, resolve_scaling, ErrorCounts,
    MetricRecord,
};
use crate::protocols::{add_awgn, synthesize};
use crate::receivers::{npf_tals, perfect_csi_symbols, pf_tals, pilot_assisted, TalsOptions};
use crate::rng::{rng_from_seed, trial_seed};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "RISFA_WORKERS";

/// Detailed outcome of one trial; [`MetricRecord`] is its CSV projection.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub record: MetricRecord,
    pub errors: Option<ErrorCounts>,
    /// Whether any pseudo-inverse truncated rank during the run.
    pub rank_deficient: bool,
}

/// Runs trial `trial` at grid point `snr_index` of `cfg`.
pub fn run_trial(
    cfg: &SystemConfig,
    receiver: ReceiverKind,
    tals: &TalsOptions,
    snr_grid: &[f64],
    snr_index: usize,
    trial: usize,
    master_seed: u64,
) -> Result<TrialOutcome> {
    let snr_db = *snr_grid
        .get(snr_index)
        .ok_or(Error::Index {
            op: "run_trial",
            index: snr_index,
            bound: snr_grid.len(),
        })?;
    let mut rng = rng_from_seed(trial_seed(master_seed, snr_index as u64, trial as u64));
    let sc = Scenario::generate(cfg, &mut rng)?;
    let (h, g, x) = (&sc.channels.h, &sc.channels.g, &sc.symbols.x);
    let clean = synthesize(cfg.protocol, h, g, &sc.schedule, x)?;
    let y = add_awgn(cfg.protocol, &clean, snr_db, &mut rng)?;

    let mut record = MetricRecord {
        snr_db,
        trial,
        protocol: cfg.protocol,
        nmse_eff: None,
        ber: None,
        ser: None,
        iterations: None,
        converged: None,
    };
    let true_eff = || effective_channel(g, h);

    let outcome = match receiver {
        ReceiverKind::PerfectCsi => {
            let ls = perfect_csi_symbols(&y, &sc.schedule, &sc.channels, tals.pinv_rel_tol)?;
            let counts = demod_counts(&ls.solution, &sc.symbols)?;
            record.ber = Some(counts.ber());
            record.ser = Some(counts.ser());
            TrialOutcome {
                record,
                errors: Some(counts),
                rank_deficient: ls.rank < cfg.users,
            }
        }
        ReceiverKind::PilotAssisted => {
            let out = match pilot_assisted(&y, &sc.schedule, x, tals, &mut rng) {
                Ok(out) => out,
                Err(Error::Numerical { iteration, detail }) => {
                    return Ok(numerical_failure(record, iteration, &detail));
                }
                Err(e) => return Err(e),
            };
            record.nmse_eff = Some(nmse(&effective_channel(&out.g_hat, &out.h_hat)?, &true_eff()?)?);
            record.iterations = Some(out.iterations);
            record.converged = Some(out.converged);
            let rank_deficient = out.rank_deficient();
            if rank_deficient {
                warn!(
                    "trial {} at {} dB: pilot regression is rank deficient",
                    record.trial, record.snr_db
                );
            }
            TrialOutcome {
                record,
                errors: None,
                rank_deficient,
            }
        }
        ReceiverKind::PfTals | ReceiverKind::NpfTals => {
            let run = if receiver == ReceiverKind::PfTals {
                pf_tals(&y, &sc.schedule, tals, &mut rng)
            } else {
                npf_tals(&y, &sc.schedule, tals, &mut rng)
            };
            let out = match run {
                Ok(out) => out,
                Err(Error::Numerical { iteration, detail }) => {
                    return Ok(numerical_failure(record, iteration, &detail));
                }
                Err(e) => return Err(e),
            };
            let rank_deficient = out.rank_deficient();
            let fixed = match resolve_scaling(&out, &sc.symbols.pilot()) {
                Ok(f) => f,
                // An exactly-zero pilot estimate leaves the ambiguity unresolved.
                Err(Error::Degenerate(_)) => out,
                Err(e) => return Err(e),
            };
            let counts = demod_counts(&fixed.x_hat, &sc.symbols)?;
            record.nmse_eff = Some(nmse(&effective_channel(&fixed.g_hat, &fixed.h_hat)?, &true_eff()?)?);
            record.ber = Some(counts.ber());
            record.ser = Some(counts.ser());
            record.iterations = Some(fixed.iterations);
            record.converged = Some(fixed.converged);
            TrialOutcome {
                record,
                errors: Some(counts),
                rank_deficient,
            }
        }
    };
    Ok(outcome)
}

fn numerical_failure(mut record: MetricRecord, iteration: usize, detail: &str) -> TrialOutcome {
    warn!(
        "trial {} at {} dB failed at iteration {iteration}: {detail}",
        record.trial, record.snr_db
    );
    record.iterations = Some(iteration);
    record.converged = Some(false);
    TrialOutcome {
        record,
        errors: None,
        rank_deficient: false,
    }
}

/// Worker count: explicit value, else `RISFA_WORKERS`, else all cores.
pub fn worker_count(explicit: Option<usize>) -> Result<usize> {
    if let Some(n) = explicit {
        return if n == 0 {
            Err(Error::field("workers", "must be at least 1"))
        } else {
            Ok(n)
        };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::field(WORKERS_ENV, format!("expected a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Computes every trial of one configuration, in `(snr, trial)` order.
pub fn sweep(
    cfg: &SystemConfig,
    plan: &ExperimentPlan,
    workers: usize,
) -> Result<Vec<TrialOutcome>> {
    let jobs: Vec<(usize, usize)> = (0..plan.snr_grid.len())
        .flat_map(|s| (0..plan.trials).map(move |t| (s, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|&(s, t)| {
                run_trial(cfg, plan.receiver, &plan.tals, &plan.snr_grid, s, t, plan.master_seed)
            })
            .collect()
    })
}

/// Where one configuration's results went.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub name: String,
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub outcomes: Vec<TrialOutcome>,
    pub duration_s: f64,
}

/// Runs every configuration of the plan, writing a manifest and a CSV file
/// for each. The manifest is written before the first row and rewritten with
/// the wall-clock duration once the CSV is complete.
pub fn run_experiment(plan: &ExperimentPlan, workers: Option<usize>) -> Result<Vec<RunReport>> {
    plan.validate()?;
    let workers = worker_count(workers)?;
    let mut reports = Vec::new();
    for (name, cfg, csv_path) in plan.runs() {
        let ident = check_identifiability(&cfg);
        if !ident.overall {
            warn!("configuration {name} violates identifiability conditions:\n{ident}");
        }
        let manifest_path = output::manifest_path(&csv_path);
        let mut manifest = RunManifest::new(plan, &name, &cfg);
        manifest.write(&manifest_path)?;

        let start = Instant::now();
        info!(
            "running {name}: {} SNR points x {} trials on {workers} workers",
            plan.snr_grid.len(),
            plan.trials
        );
        let outcomes = sweep(&cfg, plan, workers)?;
        let mut out = BufWriter::new(File::create(&csv_path)?);
        write_csv(&mut out, outcomes.iter().map(|o| &o.record))?;
        out.flush()?;

        let duration_s = start.elapsed().as_secs_f64();
        manifest.duration_s = Some(duration_s);
        manifest.write(&manifest_path)?;
        reports.push(RunReport {
            name,
            csv_path,
            manifest_path,
            outcomes,
            duration_s,
        });
    }
    Ok(reports)
}

/// Per-SNR averages across trials. NMSE is averaged in linear scale and
/// then converted to dB; BER and SER pool the error counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrSummary {
    pub snr_db: f64,
    pub trials: usize,
    pub mean_nmse: Option<f64>,
    pub ber: Option<f64>,
    pub ser: Option<f64>,
    pub converged: usize,
}

impl SnrSummary {
    pub fn mean_nmse_db(&self) -> Option<f64> {
        self.mean_nmse.map(crate::metrics::to_db)
    }
}

pub fn summarize(outcomes: &[TrialOutcome]) -> Vec<SnrSummary> {
    let mut grid: Vec<f64> = Vec::new();
    for o in outcomes {
        if !grid.contains(&o.record.snr_db) {
            grid.push(o.record.snr_db);
        }
    }
    grid.into_iter()
        .map(|snr| {
            let at: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.record.snr_db == snr).collect();
            let nmse: Vec<f64> = at.iter().filter_map(|o| o.record.nmse_eff).collect();
            let mut counts = ErrorCounts::default();
            let mut any_counts = false;
            for c in at.iter().filter_map(|o| o.errors) {
                any_counts = true;
                counts.bit_errors += c.bit_errors;
                counts.bits += c.bits;
                counts.symbol_errors += c.symbol_errors;
                counts.symbols += c.symbols;
            }
            SnrSummary {
                snr_db: snr,
                trials: at.len(),
                mean_nmse: (!nmse.is_empty()).then(|| nmse.iter().sum::<f64>() / nmse.len() as f64),
                ber: any_counts.then(|| counts.ber()),
                ser: any_counts.then(|| counts.ser()),
                converged: at.iter().filter(|o| o.record.converged == Some(true)).count(),
            }
        })
        .collect()
}
