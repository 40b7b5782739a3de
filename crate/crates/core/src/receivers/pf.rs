//! PARAFAC receiver for protocol P1.

use rand::Rng;

use super::{
    check_factor, run_als, side_dims, KnownSideInfo, Observations, ReceiverOutput, TalsOptions,
    TensorModel,
};
use crate::config::Protocol;
use crate::error::{Error, Result};
use crate::linalg::{hstack, kron, scale_cols_by_row, scale_rows_by_row, vstack, CMatrix};
use crate::protocols::{p1_block_vec, spatial_stack, stacked_slices, tensor_vec, ObservationTensor};

/// `W_G = [((D_1(C)X)ᵀ ⊗ Q); …; ((D_P(C)X)ᵀ ⊗ Q)]`, shape `IMTP × N_r K`,
/// where `Q` stacks `S_i H D_i(Θ)` over blocks.
pub fn pf_build_wg(side: &KnownSideInfo, h: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
    let op = "pf_build_wg";
    let sd = side_dims(op, side)?;
    check_factor(op, "H", h, sd.n, sd.nr)?;
    check_factor(op, "X", x, sd.k, x.ncols())?;
    let q = spatial_stack(h, side)?;
    let blocks: Vec<CMatrix> = (0..side.coding.nrows())
        .map(|p| kron(&scale_rows_by_row(&side.coding, p, x).transpose(), &q))
        .collect();
    vstack(&blocks)
}

/// `W_H = [Ψ_1; …; Ψ_I]` with `Ψ_i = B_iᵀ ⊗ S_i`, `B_i = D_i(Θ) R_aux` and
/// `R_aux = [G D_1(C) X, …, G D_P(C) X]`. Shape `IMTP × N N_r`.
pub fn pf_build_wh(side: &KnownSideInfo, g: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
    let op = "pf_build_wh";
    let sd = side_dims(op, side)?;
    check_factor(op, "G", g, sd.nr, sd.k)?;
    check_factor(op, "X", x, sd.k, x.ncols())?;
    let slots: Vec<CMatrix> = (0..side.coding.nrows())
        .map(|p| scale_cols_by_row(g, &side.coding, p) * x)
        .collect();
    let r_aux = hstack(&slots)?;
    let blocks: Vec<CMatrix> = side
        .selections
        .iter()
        .enumerate()
        .map(|(i, s)| kron(&scale_rows_by_row(&side.theta, i, &r_aux).transpose(), s))
        .collect();
    vstack(&blocks)
}

/// `B_total = [Q G D_1(C); …; Q G D_P(C)]`, shape `IMP × K`.
pub fn pf_build_btotal(side: &KnownSideInfo, g: &CMatrix, h: &CMatrix) -> Result<CMatrix> {
    let op = "pf_build_btotal";
    let sd = side_dims(op, side)?;
    check_factor(op, "G", g, sd.nr, sd.k)?;
    check_factor(op, "H", h, sd.n, sd.nr)?;
    let w = spatial_stack(h, side)? * g;
    let blocks: Vec<CMatrix> = (0..side.coding.nrows())
        .map(|p| scale_cols_by_row(&w, &side.coding, p))
        .collect();
    vstack(&blocks)
}

pub(crate) struct PfModel;

impl TensorModel for PfModel {
    const PROTOCOL: Protocol = Protocol::P1;

    fn build_wg(side: &KnownSideInfo, h: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
        pf_build_wg(side, h, x)
    }

    fn build_wh(side: &KnownSideInfo, g: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
        pf_build_wh(side, g, x)
    }

    fn build_btotal(side: &KnownSideInfo, g: &CMatrix, h: &CMatrix) -> Result<CMatrix> {
        pf_build_btotal(side, g, h)
    }

    fn observations(y: &ObservationTensor, side: &KnownSideInfo) -> Result<Observations> {
        let sd = side_dims("pf_tals", side)?;
        let m = side.selections[0].nrows();
        let (rows, _, slots) = y.data.dims();
        if rows != side.blocks() * m || slots != side.coding.nrows() || sd.k == 0 {
            return Err(Error::dim(
                "pf_tals",
                format!(
                    "tensor {:?} does not match I={}, M={m}, P={}",
                    y.data.dims(),
                    side.blocks(),
                    side.coding.nrows()
                ),
            ));
        }
        Ok(Observations {
            y_g: tensor_vec(&y.data),
            y_h: p1_block_vec(&y.data, m)?,
            y_stacked: stacked_slices(&y.data),
        })
    }
}

/// Semi-blind PARAFAC receiver (protocol P1).
pub fn pf_tals<R: Rng + ?Sized>(
    y: &ObservationTensor,
    side: &KnownSideInfo,
    opt: &TalsOptions,
    rng: &mut R,
) -> Result<ReceiverOutput> {
    run_als::<PfModel, R>(y, side, opt, None, rng)
}
