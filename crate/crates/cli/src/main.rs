use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use log::{info, warn};

use risfa_core::harness::{self, parse_plan, ExperimentPlan, ReceiverKind};
use risfa_core::metrics::{check_identifiability, complexity_estimate};
use risfa_core::oracle;
use risfa_core::{Protocol, SystemConfig};

#[derive(Parser)]
#[command(name = "risfa", version, about = "Semi-blind tensor receivers for RIS-aided fluid-antenna uplinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo sweep described by a plan file.
    Run {
        plan: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Worker threads; falls back to RISFA_WORKERS, then to the CPU count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Validate a plan file and print the identifiability and cost report.
    Check {
        plan: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the small-dimension brute-force equivalence suite.
    Oracle {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Command-line values that replace the corresponding plan entries.
#[derive(clap::Args)]
struct Overrides {
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Comma-separated SNR grid in dB; `inf` means noiseless.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Option<Vec<f64>>,
    /// pf_tals, npf_tals, perfect_csi_baseline or pilot_assisted_baseline.
    #[arg(long)]
    receiver: Option<String>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
}

impl Overrides {
    fn apply(&self, plan: &mut ExperimentPlan) -> anyhow::Result<()> {
        if let Some(t) = self.trials {
            plan.trials = t;
        }
        if let Some(s) = self.seed {
            plan.master_seed = s;
        }
        if let Some(o) = &self.output {
            plan.output_path = o.clone();
        }
        if let Some(g) = &self.snr_db {
            plan.snr_grid = g.clone();
        }
        if let Some(r) = &self.receiver {
            plan.receiver = r.parse::<ReceiverKind>()?;
        }
        if let Some(n) = self.max_iters {
            plan.tals.max_iters = n;
        }
        if let Some(d) = self.delta {
            plan.tals.delta = d;
        }
        Ok(())
    }
}

fn load_plan(path: &PathBuf, overrides: &Overrides) -> anyhow::Result<ExperimentPlan> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (mut plan, warnings) = parse_plan(&text)?;
    for w in warnings {
        warn!("{w}");
    }
    overrides.apply(&mut plan)?;
    plan.validate()?;
    Ok(plan)
}

fn run(plan: PathBuf, overrides: Overrides, workers: Option<usize>) -> anyhow::Result<ExitCode> {
    let plan = load_plan(&plan, &overrides)?;
    for report in harness::run_experiment(&plan, workers)? {
        info!(
            "{}: {} rows in {:.2} s",
            report.name,
            report.outcomes.len(),
            report.duration_s
        );
        println!("{}", report.csv_path.display());
        for s in harness::summarize(&report.outcomes) {
            let nmse = s
                .mean_nmse_db()
                .map_or_else(|| "-".to_owned(), |v| format!("{v:.2} dB"));
            let ber = s.ber.map_or_else(|| "-".to_owned(), |v| format!("{v:.3e}"));
            println!(
                "  snr {:>6}  nmse {nmse:>10}  ber {ber:>10}  converged {}/{}",
                s.snr_db, s.converged, s.trials
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn print_system(cfg: &SystemConfig) {
    println!("protocol        {}", cfg.protocol);
    println!("active_antennas {}", cfg.active_antennas);
    println!("ports           {}", cfg.ports);
    println!("ris_elements    {}", cfg.ris_elements);
    println!("users           {}", cfg.users);
    println!("blocks          {}", cfg.blocks);
    if cfg.protocol == Protocol::P1 {
        println!("slots           {}", cfg.slots);
    }
    println!("symbols         {}", cfg.symbols);
    println!("modulation      {}", format!("{:?}", cfg.modulation).to_lowercase());
    println!("theta_design    {}", format!("{:?}", cfg.theta_design).to_lowercase());
    println!("coding_design   {}", format!("{:?}", cfg.coding_design).to_lowercase());
}

fn check(plan: PathBuf, overrides: Overrides) -> anyhow::Result<ExitCode> {
    let plan = load_plan(&plan, &overrides)?;
    println!(
        "receiver {}, {} trials, master seed {}, snr_db {:?}",
        plan.receiver, plan.trials, plan.master_seed, plan.snr_grid
    );
    let mut all_ok = true;
    for (name, cfg, csv) in plan.runs() {
        println!("\n[{name}] -> {}", csv.display());
        print_system(&cfg);
        let ident = check_identifiability(&cfg);
        all_ok &= ident.overall;
        println!("{ident}");
        let cost = complexity_estimate(&cfg);
        println!(
            "flops per iteration: P1 {:.4e}, P2 {:.4e}",
            cost.p1_flops_per_iter, cost.p2_flops_per_iter
        );
    }
    if !all_ok {
        warn!("at least one configuration violates identifiability conditions");
    }
    Ok(ExitCode::SUCCESS)
}

fn run_oracle(seed: u64) -> anyhow::Result<ExitCode> {
    let checks = oracle::run_all(seed)?;
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    if failed > 0 {
        bail!("{failed} of {} oracle checks failed", checks.len());
    }
    println!("all {} oracle checks passed", checks.len());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            plan,
            overrides,
            workers,
        } => run(plan, overrides, workers),
        Command::Check { plan, overrides } => check(plan, overrides),
        Command::Oracle { seed } => run_oracle(seed),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
