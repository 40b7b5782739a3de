//! Semi-blind trilinear ALS receivers.
//!
//! Both receivers cycle through three exact least-squares updates
//! (G, then H, then X) against the same Frobenius data-fit cost and stop when
//! the normalized residual
//! `ε(j) = ‖Y_stacked − B_total·X̂‖²_F / ‖Y_stacked‖²_F` changes by less than
//! `delta` between sweeps, or after `max_iters` sweeps.

mod baseline;
mod npf;
mod pf;

pub use baseline::{perfect_csi_symbols, pilot_assisted};
pub use npf::{npf_build_btotal, npf_build_wg, npf_build_wh, npf_tals};
pub use pf::{pf_build_btotal, pf_build_wg, pf_build_wh, pf_tals};

use rand::Rng;

use crate::channel::Schedule;
use crate::config::Protocol;
use crate::error::{Error, Result};
use crate::linalg::{
    check_finite, fro_norm_sq, lstsq, unvec, CMatrix, DEFAULT_PINV_REL_TOL,
};
use crate::protocols::ObservationTensor;
use crate::rng::complex_gaussian_matrix;

/// Schedule parameters assumed known at the base station.
pub type KnownSideInfo = Schedule;

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    /// Ĥ and X̂ drawn i.i.d. CN(0, 1), Ĥ first.
    #[default]
    Random,
    Provided { h: CMatrix, x: CMatrix },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TalsOptions {
    pub delta: f64,
    pub max_iters: usize,
    pub pinv_rel_tol: f64,
    pub init: Init,
}

impl Default for TalsOptions {
    fn default() -> Self {
        Self {
            delta: 1e-8,
            max_iters: 300,
            pinv_rel_tol: DEFAULT_PINV_REL_TOL,
            init: Init::Random,
        }
    }
}

impl TalsOptions {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.delta.is_nan() || self.delta <= 0.0 {
            errs.push(crate::error::FieldError {
                path: "receiver.delta".into(),
                message: "must be positive".into(),
            });
        }
        if self.max_iters == 0 {
            errs.push(crate::error::FieldError {
                path: "receiver.max_iters".into(),
                message: "must be at least 1".into(),
            });
        }
        if self.pinv_rel_tol.is_nan() || self.pinv_rel_tol <= 0.0 {
            errs.push(crate::error::FieldError {
                path: "receiver.pinv_rel_tol".into(),
                message: "must be positive".into(),
            });
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

/// Effective ranks retained by the pseudo-inverse in one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateRanks {
    pub g: usize,
    pub h: usize,
    pub x: usize,
}

/// Normalized global residual after each sub-update of a sweep.
/// `x` is `None` when symbols are clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepTrace {
    pub after_g: f64,
    pub after_h: f64,
    pub after_x: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverOutput {
    pub g_hat: CMatrix,
    pub h_hat: CMatrix,
    pub x_hat: CMatrix,
    /// ε(j) for j = 1..=iterations.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub effective_ranks: Vec<UpdateRanks>,
    /// Column counts of W_G, W_H and B_total: the ranks of a unique update.
    pub full_ranks: UpdateRanks,
    pub sweeps: Vec<SweepTrace>,
}

impl ReceiverOutput {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::INFINITY)
    }

    /// True if any update in any sweep lost rank under truncation.
    pub fn rank_deficient(&self) -> bool {
        let full = self.full_ranks;
        self.effective_ranks
            .iter()
            .any(|r| r.g < full.g || r.h < full.h || r.x < full.x)
    }
}

/// Vectorized observations paired with each regression matrix.
pub(crate) struct Observations {
    /// Paired with W_G.
    pub y_g: CMatrix,
    /// Paired with W_H.
    pub y_h: CMatrix,
    /// Paired with B_total.
    pub y_stacked: CMatrix,
}

pub(crate) trait TensorModel {
    const PROTOCOL: Protocol;
    fn build_wg(side: &KnownSideInfo, h: &CMatrix, x: &CMatrix) -> Result<CMatrix>;
    fn build_wh(side: &KnownSideInfo, g: &CMatrix, x: &CMatrix) -> Result<CMatrix>;
    fn build_btotal(side: &KnownSideInfo, g: &CMatrix, h: &CMatrix) -> Result<CMatrix>;
    fn observations(y: &ObservationTensor, side: &KnownSideInfo) -> Result<Observations>;
}

struct Dims {
    n: usize,
    nr: usize,
    k: usize,
    t: usize,
}

fn dims(y: &ObservationTensor, side: &KnownSideInfo) -> Result<Dims> {
    let first = side
        .selections
        .first()
        .ok_or_else(|| Error::dim("receiver", "no selection matrices"))?;
    Ok(Dims {
        n: first.ncols(),
        nr: side.theta.ncols(),
        k: side.coding.ncols(),
        t: y.data.dims().1,
    })
}

fn initial_factors<R: Rng + ?Sized>(
    init: &Init,
    d: &Dims,
    rng: &mut R,
) -> Result<(CMatrix, CMatrix)> {
    match init {
        Init::Random => {
            let h = complex_gaussian_matrix(d.n, d.nr, 1.0, rng);
            let x = complex_gaussian_matrix(d.k, d.t, 1.0, rng);
            Ok((h, x))
        }
        Init::Provided { h, x } => {
            if h.shape() != (d.n, d.nr) || x.shape() != (d.k, d.t) {
                return Err(Error::dim(
                    "receiver init",
                    format!(
                        "expected H {:?} and X {:?}, got {:?} and {:?}",
                        (d.n, d.nr),
                        (d.k, d.t),
                        h.shape(),
                        x.shape()
                    ),
                ));
            }
            check_finite(h, "initial H")?;
            check_finite(x, "initial X")?;
            Ok((h.clone(), x.clone()))
        }
    }
}

fn relative_residual(y: &CMatrix, a: &CMatrix, sol: &CMatrix, norm_sq: f64) -> f64 {
    fro_norm_sq(&(y - a * sol)) / norm_sq
}

/// Shared TALS loop. When `clamp_x` is set the symbol update is skipped and
/// ε(j) is the fit after the H update.
pub(crate) fn run_als<M: TensorModel, R: Rng + ?Sized>(
    y: &ObservationTensor,
    side: &KnownSideInfo,
    opt: &TalsOptions,
    clamp_x: Option<&CMatrix>,
    rng: &mut R,
) -> Result<ReceiverOutput> {
    if y.protocol != M::PROTOCOL {
        return Err(Error::Usage(format!(
            "observation is protocol {}, receiver expects {}",
            y.protocol,
            M::PROTOCOL
        )));
    }
    opt.validate()?;
    let d = dims(y, side)?;
    let obs = M::observations(y, side)?;
    let norm_sq = fro_norm_sq(&obs.y_stacked);
    if norm_sq == 0.0 {
        return Err(Error::Degenerate("all-zero observation".into()));
    }

    let (mut h, mut x) = initial_factors(&opt.init, &d, rng)?;
    if let Some(xt) = clamp_x {
        if xt.shape() != (d.k, d.t) {
            return Err(Error::dim("pilot_assisted", "clamped X has wrong shape"));
        }
        x = xt.clone();
    }
    let mut g = CMatrix::zeros(d.nr, d.k);

    let full_ranks = UpdateRanks {
        g: d.nr * d.k,
        h: d.n * d.nr,
        x: d.k,
    };
    let mut residuals = Vec::new();
    let mut effective_ranks = Vec::new();
    let mut sweeps = Vec::new();
    let mut converged = false;
    let mut prev = f64::INFINITY;

    for iteration in 1..=opt.max_iters {
        let wg = M::build_wg(side, &h, &x)?;
        let ls_g = lstsq(&wg, &obs.y_g, opt.pinv_rel_tol)?;
        let after_g = relative_residual(&obs.y_g, &wg, &ls_g.solution, norm_sq);
        g = unvec(&ls_g.solution, d.nr, d.k)?;

        let wh = M::build_wh(side, &g, &x)?;
        let ls_h = lstsq(&wh, &obs.y_h, opt.pinv_rel_tol)?;
        let after_h = relative_residual(&obs.y_h, &wh, &ls_h.solution, norm_sq);
        h = unvec(&ls_h.solution, d.n, d.nr)?;

        let (eps, x_rank, after_x) = if clamp_x.is_some() {
            (after_h, d.k, None)
        } else {
            let b = M::build_btotal(side, &g, &h)?;
            let ls_x = lstsq(&b, &obs.y_stacked, opt.pinv_rel_tol)?;
            x = ls_x.solution;
            let eps = relative_residual(&obs.y_stacked, &b, &x, norm_sq);
            (eps, ls_x.rank, Some(eps))
        };

        if !eps.is_finite() {
            return Err(Error::Numerical {
                iteration,
                detail: format!("data-fit residual is {eps}"),
            });
        }
        residuals.push(eps);
        effective_ranks.push(UpdateRanks {
            g: ls_g.rank,
            h: ls_h.rank,
            x: x_rank,
        });
        sweeps.push(SweepTrace {
            after_g,
            after_h,
            after_x,
        });
        if (eps - prev).abs() < opt.delta {
            converged = true;
            break;
        }
        prev = eps;
    }

    Ok(ReceiverOutput {
        g_hat: g,
        h_hat: h,
        x_hat: x,
        iterations: residuals.len(),
        residuals,
        converged,
        effective_ranks,
        full_ranks,
        sweeps,
    })
}

/// Checks the factor shapes a builder receives against the side information.
pub(crate) fn check_factor(
    op: &'static str,
    name: &str,
    m: &CMatrix,
    rows: usize,
    cols: usize,
) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::dim(
            op,
            format!("{name} is {:?}, expected {:?}", m.shape(), (rows, cols)),
        ));
    }
    Ok(())
}

pub(crate) struct SideDims {
    pub n: usize,
    pub nr: usize,
    pub k: usize,
}

pub(crate) fn side_dims(op: &'static str, side: &KnownSideInfo) -> Result<SideDims> {
    let first = side
        .selections
        .first()
        .ok_or_else(|| Error::dim(op, "no selection matrices"))?;
    let n = first.ncols();
    if side.selections.iter().any(|s| s.shape() != first.shape()) {
        return Err(Error::dim(op, "selection matrices differ in shape"));
    }
    if side.theta.nrows() != side.selections.len() {
        return Err(Error::dim(
            op,
            format!(
                "theta has {} rows for {} blocks",
                side.theta.nrows(),
                side.selections.len()
            ),
        ));
    }
    Ok(SideDims {
        n,
        nr: side.theta.ncols(),
        k: side.coding.ncols(),
    })
}

#[cfg(test)]
pub(crate) mod testing {
    use super::npf::NpfModel;
    use super::pf::PfModel;
    use super::TensorModel;
    use crate::channel::Scenario;
    use crate::config::{Protocol, SystemConfig};
    use crate::linalg::{pinv, DEFAULT_PINV_REL_TOL};
    use crate::protocols::{synthesize, ObservationTensor};
    use crate::rng::rng_from_seed;

    pub fn noiseless(cfg: &SystemConfig, seed: u64) -> (Scenario, ObservationTensor) {
        let sc = Scenario::generate(cfg, &mut rng_from_seed(seed)).unwrap();
        let (h, g, x) = (&sc.channels.h, &sc.channels.g, &sc.symbols.x);
        let y = synthesize(cfg.protocol, h, g, &sc.schedule, x).unwrap();
        (sc, ObservationTensor::noiseless(cfg.protocol, y))
    }

    fn full_rank<M: TensorModel>(sc: &Scenario) -> bool {
        let (h, g, x) = (&sc.channels.h, &sc.channels.g, &sc.symbols.x);
        let wg = M::build_wg(&sc.schedule, h, x).unwrap();
        let wh = M::build_wh(&sc.schedule, g, x).unwrap();
        pinv(&wg, DEFAULT_PINV_REL_TOL).unwrap().rank == wg.ncols()
            && pinv(&wh, DEFAULT_PINV_REL_TOL).unwrap().rank == wh.ncols()
    }

    /// First seed whose realization gives full-rank G and H regressions.
    pub fn identifiable(cfg: &SystemConfig) -> (Scenario, ObservationTensor) {
        (0..100)
            .map(|seed| noiseless(cfg, seed))
            .find(|(sc, _)| match cfg.protocol {
                Protocol::P1 => full_rank::<PfModel>(sc),
                Protocol::P2 => full_rank::<NpfModel>(sc),
            })
            .expect("an identifiable realization within 100 seeds")
    }

}
