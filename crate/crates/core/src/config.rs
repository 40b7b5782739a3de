//! System dimensions and protocol selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::modulation::Modulation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    /// Two-time-scale: spatial settings per block, coding per slot.
    P1,
    /// Single-time-scale: spatial settings and coding both per block.
    P2,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::P1 => "P1",
            Protocol::P2 => "P2",
        })
    }
}

/// How the RIS phase matrix and the temporal coding matrix are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseDesign {
    /// Leading columns of a DFT matrix; falls back to random phases when the
    /// DFT is too short to supply the requested number of columns.
    #[default]
    Dft,
    /// i.i.d. uniform phases.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub protocol: Protocol,
    /// M: active RF chains.
    pub active_antennas: usize,
    /// N: candidate fluid-antenna ports.
    pub ports: usize,
    /// N_r: RIS elements.
    pub ris_elements: usize,
    /// K: single-antenna users.
    pub users: usize,
    /// I: spatial blocks.
    pub blocks: usize,
    /// P: coding slots per block. Ignored by protocol P2.
    pub slots: usize,
    /// T: symbol periods per slot, pilot column included.
    pub symbols: usize,
    pub snr_db: f64,
    pub seed: u64,
    pub modulation: Modulation,
    pub theta_design: PhaseDesign,
    pub coding_design: PhaseDesign,
}

impl SystemConfig {
    /// A config with every dimension set and the documented defaults for the
    /// rest (QPSK, DFT designs, noiseless, seed 0).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        protocol: Protocol,
        active_antennas: usize,
        ports: usize,
        ris_elements: usize,
        users: usize,
        blocks: usize,
        slots: usize,
        symbols: usize,
    ) -> Self {
        Self {
            protocol,
            active_antennas,
            ports,
            ris_elements,
            users,
            blocks,
            slots,
            symbols,
            snr_db: f64::INFINITY,
            seed: 0,
            modulation: Modulation::default(),
            theta_design: PhaseDesign::default(),
            coding_design: PhaseDesign::default(),
        }
    }

    pub fn p1(m: usize, n: usize, nr: usize, k: usize, i: usize, p: usize, t: usize) -> Self {
        Self::new(Protocol::P1, m, n, nr, k, i, p, t)
    }

    pub fn p2(m: usize, n: usize, nr: usize, k: usize, i: usize, t: usize) -> Self {
        Self::new(Protocol::P2, m, n, nr, k, i, 1, t)
    }

    /// Number of coding rows: P for protocol P1, I for P2.
    pub fn coding_rows(&self) -> usize {
        match self.protocol {
            Protocol::P1 => self.slots,
            Protocol::P2 => self.blocks,
        }
    }

    /// Collects every invariant violation, naming the offending fields.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let dims = [
            ("system.active_antennas", self.active_antennas),
            ("system.ports", self.ports),
            ("system.ris_elements", self.ris_elements),
            ("system.users", self.users),
            ("system.blocks", self.blocks),
            ("system.slots", self.slots),
            ("system.symbols", self.symbols),
        ];
        for (path, v) in dims {
            if v == 0 {
                errs.push(FieldError {
                    path: path.into(),
                    message: "must be at least 1".into(),
                });
            }
        }
        if self.active_antennas > self.ports {
            errs.push(FieldError {
                path: "system.active_antennas, system.ports".into(),
                message: format!(
                    "active_antennas (M={}) must not exceed ports (N={})",
                    self.active_antennas, self.ports
                ),
            });
        }
        if self.snr_db.is_nan() {
            errs.push(FieldError {
                path: "system.snr_db".into(),
                message: "must not be NaN".into(),
            });
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}
