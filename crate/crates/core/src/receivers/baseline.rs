//! Reference receivers with extra knowledge at the base station.

use rand::Rng;

use super::npf::NpfModel;
use super::pf::PfModel;
use super::{run_als, KnownSideInfo, ReceiverOutput, TalsOptions, TensorModel};
use crate::channel::ChannelSet;
use crate::config::Protocol;
use crate::error::Result;
use crate::linalg::{lstsq, CMatrix, LeastSquares};
use crate::protocols::ObservationTensor;

/// Symbol LS with the true channels: `X̂ = B_total⁺ Y_stacked`.
pub fn perfect_csi_symbols(
    y: &ObservationTensor,
    side: &KnownSideInfo,
    channels: &ChannelSet,
    pinv_rel_tol: f64,
) -> Result<LeastSquares> {
    fn solve<M: TensorModel>(
        y: &ObservationTensor,
        side: &KnownSideInfo,
        ch: &ChannelSet,
        tol: f64,
    ) -> Result<LeastSquares> {
        let obs = M::observations(y, side)?;
        let b = M::build_btotal(side, &ch.g, &ch.h)?;
        lstsq(&b, &obs.y_stacked, tol)
    }
    match y.protocol {
        Protocol::P1 => solve::<PfModel>(y, side, channels, pinv_rel_tol),
        Protocol::P2 => solve::<NpfModel>(y, side, channels, pinv_rel_tol),
    }
}

/// Channel-only alternating LS with the symbols clamped to `x_true`.
/// `x_hat` of the output equals `x_true`.
pub fn pilot_assisted<R: Rng + ?Sized>(
    y: &ObservationTensor,
    side: &KnownSideInfo,
    x_true: &CMatrix,
    opt: &TalsOptions,
    rng: &mut R,
) -> Result<ReceiverOutput> {
    match y.protocol {
        Protocol::P1 => run_als::<PfModel, R>(y, side, opt, Some(x_true), rng),
        Protocol::P2 => run_als::<NpfModel, R>(y, side, opt, Some(x_true), rng),
    }
}
