//! CSV rows and JSON run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::SystemConfig;
use crate::error::Result;
use crate::metrics::{
    check_identifiability, complexity_estimate, Complexity, IdentReport, MetricRecord, CSV_HEADER,
};

use super::plan::ExperimentPlan;

/// Appended to the CSV path to name its manifest.
pub const MANIFEST_SUFFIX: &str = ".manifest.json";

pub(crate) fn manifest_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(MANIFEST_SUFFIX);
    PathBuf::from(s)
}

/// Writes the header and one `\n`-terminated line per record.
pub fn write_csv<'a, W: Write>(
    mut w: W,
    records: impl IntoIterator<Item = &'a MetricRecord>,
) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

fn snr_text(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, Serialize)]
struct SystemSection {
    protocol: String,
    active_antennas: usize,
    ports: usize,
    ris_elements: usize,
    users: usize,
    blocks: usize,
    /// Absent for protocol P2.
    slots: Option<usize>,
    symbols: usize,
    modulation: crate::modulation::Modulation,
    theta_design: crate::config::PhaseDesign,
    coding_design: crate::config::PhaseDesign,
}

#[derive(Debug, Clone, Serialize)]
struct ReceiverSection {
    kind: String,
    delta: f64,
    max_iters: usize,
    pinv_rel_tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    tool: &'static str,
    version: &'static str,
    name: String,
    master_seed: u64,
    trials: usize,
    /// SNR points as text so that `inf` survives JSON.
    snr_db: Vec<String>,
    system: SystemSection,
    receiver: ReceiverSection,
    identifiability: IdentReport,
    complexity: Complexity,
    /// `null` until the run finishes.
    pub duration_s: Option<f64>,
}

impl RunManifest {
    pub fn new(plan: &ExperimentPlan, name: &str, cfg: &SystemConfig) -> Self {
        Self {
            tool: "risfa",
            version: env!("CARGO_PKG_VERSION"),
            name: name.to_owned(),
            master_seed: plan.master_seed,
            trials: plan.trials,
            snr_db: plan.snr_grid.iter().copied().map(snr_text).collect(),
            system: SystemSection {
                protocol: cfg.protocol.to_string(),
                active_antennas: cfg.active_antennas,
                ports: cfg.ports,
                ris_elements: cfg.ris_elements,
                users: cfg.users,
                blocks: cfg.blocks,
                slots: (cfg.protocol == crate::config::Protocol::P1).then_some(cfg.slots),
                symbols: cfg.symbols,
                modulation: cfg.modulation,
                theta_design: cfg.theta_design,
                coding_design: cfg.coding_design,
            },
            receiver: ReceiverSection {
                kind: plan.receiver.to_string(),
                delta: plan.tals.delta,
                max_iters: plan.tals.max_iters,
                pinv_rel_tol: plan.tals.pinv_rel_tol,
            },
            identifiability: check_identifiability(cfg),
            complexity: complexity_estimate(cfg),
            duration_s: None,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}
