//! Ambiguity removal, error metrics, identifiability and cost accounting.

use serde::Serialize;

use crate::channel::SymbolMatrix;
use crate::config::{Protocol, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{fro_norm_sq, khatri_rao, CMatrix, ONE};
use crate::receivers::ReceiverOutput;

/// Cascaded user-RIS-BS channel `Gᵀ ⋄ H`, shape `KN × N_r`.
pub fn effective_channel(g: &CMatrix, h: &CMatrix) -> Result<CMatrix> {
    khatri_rao(&g.transpose(), h)
}

/// Removes the per-user scaling between Ĝ and X̂ using the pilot column:
/// `α_k = X[k,0] / X̂[k,0]`, `X̂ ← diag(α) X̂`, `Ĝ ← Ĝ diag(α)⁻¹`.
/// When the ambiguity is a common scalar every `α_k` coincides.
pub fn resolve_scaling(out: &ReceiverOutput, x_true_pilot: &CMatrix) -> Result<ReceiverOutput> {
    let k = out.x_hat.nrows();
    if x_true_pilot.nrows() != k || x_true_pilot.ncols() < 1 || out.x_hat.ncols() < 1 {
        return Err(Error::dim(
            "resolve_scaling",
            format!(
                "pilot is {:?}, estimate has {k} users",
                x_true_pilot.shape()
            ),
        ));
    }
    let mut fixed = out.clone();
    for user in 0..k {
        let est = out.x_hat[(user, 0)];
        let pilot = x_true_pilot[(user, 0)];
        if pilot.norm_sqr() == 0.0 || est.norm_sqr() == 0.0 {
            return Err(Error::Degenerate(format!(
                "zero pilot entry for user {user}"
            )));
        }
        let alpha = pilot / est;
        let mut row = fixed.x_hat.row_mut(user);
        row *= alpha;
        let mut col = fixed.g_hat.column_mut(user);
        col *= ONE / alpha;
    }
    Ok(fixed)
}

/// `‖est − truth‖²_F / ‖truth‖²_F`.
pub fn nmse(est: &CMatrix, truth: &CMatrix) -> Result<f64> {
    if est.shape() != truth.shape() {
        return Err(Error::dim(
            "nmse",
            format!("{:?} vs {:?}", est.shape(), truth.shape()),
        ));
    }
    let denom = fro_norm_sq(truth);
    if denom == 0.0 {
        return Err(Error::Degenerate("nmse against an all-zero reference".into()));
    }
    Ok(fro_norm_sq(&(est - truth)) / denom)
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Counts from hard-decision demapping of the data columns (pilot column 0
/// excluded).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ErrorCounts {
    pub bit_errors: u64,
    pub bits: u64,
    pub symbol_errors: u64,
    pub symbols: u64,
}

impl ErrorCounts {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits as f64
        }
    }

    pub fn ser(&self) -> f64 {
        if self.symbols == 0 {
            0.0
        } else {
            self.symbol_errors as f64 / self.symbols as f64
        }
    }
}

pub fn demod_counts(x_hat: &CMatrix, x_true: &SymbolMatrix) -> Result<ErrorCounts> {
    if x_hat.shape() != x_true.x.shape() {
        return Err(Error::dim(
            "demod_ber",
            format!("{:?} vs {:?}", x_hat.shape(), x_true.x.shape()),
        ));
    }
    let modulation = x_true.modulation;
    let mut counts = ErrorCounts::default();
    for t in 1..x_hat.ncols() {
        for k in 0..x_hat.nrows() {
            let sent = x_true.label(k, t);
            let got = modulation.decide(x_hat[(k, t)]);
            let diff = (sent ^ got).count_ones() as u64;
            counts.bit_errors += diff;
            counts.symbol_errors += u64::from(diff > 0);
            counts.bits += u64::from(modulation.bits_per_symbol());
            counts.symbols += 1;
        }
    }
    Ok(counts)
}

/// `(ber, ser)` over the data columns.
pub fn demod_ber(x_hat: &CMatrix, x_true: &SymbolMatrix) -> Result<(f64, f64)> {
    let c = demod_counts(x_hat, x_true)?;
    Ok((c.ber(), c.ser()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Condition {
    pub name: &'static str,
    pub lhs: u64,
    pub rhs: u64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdentReport {
    pub protocol: Protocol,
    pub conditions: Vec<Condition>,
    pub overall: bool,
}

impl std::fmt::Display for IdentReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "identifiability ({}):", self.protocol)?;
        for c in &self.conditions {
            let mark = if c.satisfied { "ok" } else { "VIOLATED" };
            writeln!(f, "  {:<22} {:>12} >= {:<12} {mark}", c.name, c.lhs, c.rhs)?;
        }
        write!(f, "  overall: {}", if self.overall { "identifiable" } else { "not identifiable" })
    }
}

fn cond(name: &'static str, lhs: usize, rhs: usize) -> Condition {
    Condition {
        name,
        lhs: lhs as u64,
        rhs: rhs as u64,
        satisfied: lhs >= rhs,
    }
}

/// Sufficient dimension inequalities for unique LS updates.
pub fn check_identifiability(cfg: &SystemConfig) -> IdentReport {
    let (m, n, nr, k, i, p, t) = (
        cfg.active_antennas,
        cfg.ports,
        cfg.ris_elements,
        cfg.users,
        cfg.blocks,
        cfg.slots,
        cfg.symbols,
    );
    let conditions = match cfg.protocol {
        Protocol::P1 => vec![
            cond("IMTP >= Nr*max(K,N)", i * m * t * p, nr * k.max(n)),
            cond("IM >= Nr", i * m, nr),
            cond("IMP >= K", i * m * p, k),
        ],
        Protocol::P2 => vec![
            cond("MTI >= Nr*max(K,N)", m * t * i, nr * k.max(n)),
            cond("IM >= K", i * m, k),
        ],
    };
    IdentReport {
        protocol: cfg.protocol,
        overall: conditions.iter().all(|c| c.satisfied),
        conditions,
    }
}

/// Dominant per-iteration flop terms with unit constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Complexity {
    pub p1_flops_per_iter: f64,
    pub p2_flops_per_iter: f64,
}

/// `P1: IMPK² + IMTP(N_r²K² + N²N_r²)`, `P2: IMK² + MTI(N_r²K² + N²N_r²)`,
/// both evaluated on the same dimensions.
pub fn complexity_estimate(cfg: &SystemConfig) -> Complexity {
    let f = |v: usize| v as f64;
    let (m, n, nr, k, i, p, t) = (
        f(cfg.active_antennas),
        f(cfg.ports),
        f(cfg.ris_elements),
        f(cfg.users),
        f(cfg.blocks),
        f(cfg.slots),
        f(cfg.symbols),
    );
    let inner = nr * nr * k * k + n * n * nr * nr;
    Complexity {
        p1_flops_per_iter: i * m * p * k * k + i * m * t * p * inner,
        p2_flops_per_iter: i * m * k * k + m * t * i * inner,
    }
}

/// One CSV result row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub snr_db: f64,
    pub trial: usize,
    pub protocol: Protocol,
    /// Linear effective-channel NMSE; `None` for receivers that do not
    /// estimate channels.
    pub nmse_eff: Option<f64>,
    pub ber: Option<f64>,
    pub ser: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
}

pub const CSV_HEADER: &str = "snr_db,trial,protocol,nmse_db,ber,ser,iters,converged";

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.6e}")
    }
}

impl MetricRecord {
    pub fn nmse_db(&self) -> Option<f64> {
        self.nmse_eff.map(to_db)
    }

    /// Formats the row without a trailing newline. Missing fields are empty.
    pub fn csv_row(&self) -> String {
        let snr = if self.snr_db.is_infinite() {
            fmt_f64(self.snr_db)
        } else {
            format!("{}", self.snr_db)
        };
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        format!(
            "{snr},{},{},{},{},{},{},{}",
            self.trial,
            self.protocol,
            opt(self.nmse_db()),
            opt(self.ber),
            opt(self.ser),
            self.iterations.map(|v| v.to_string()).unwrap_or_default(),
            self.converged.map(|v| v.to_string()).unwrap_or_default(),
        )
    }
}
